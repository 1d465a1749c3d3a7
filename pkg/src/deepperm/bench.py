"""Expected-running-time (ERT) benchmark harness.

For a sampler scheme the ERT of a (0.1, 0.05)-approximation is
extrapolated from the time to collect ``ert_accepts`` accepted samples:

    ERT = preprocess_seconds + target_accepts * sampling_seconds / ert_accepts

``preprocess_seconds`` covers DS preprocessing (when enabled) and building
the depth-d bound.  A run that hits ``time_limit_s`` is reported with
status ``timeout`` and its elapsed time as a lower bound on the ERT.

Scheme names: ``HL-<d>``, ``AdaPart-<d>`` with an optional ``-DS`` suffix,
and ``GG-r`` / ``GG-c`` / ``GG-q`` for the determinant estimators.
"""

from __future__ import annotations

import csv
import json
import math
import re
import sys
import time
from dataclasses import asdict, dataclass, fields
from typing import Optional

import jsonschema
import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .bounds import BoundKind, deep_bound
from .exact import log_permanent_exact
from .gg import GGVariant, gg_samples, mom_plan
from .matrix import InstanceClass, InstanceSpec, generate
from .preprocess import ds_pipeline
from .sampler import SamplerConfig, Strategy, TrialRunner, block_rng

ERT_ACCEPTS = 65
TARGET_ACCEPTS = 388
TIME_LIMIT = 4825.0
GG_PILOT = 2000


@dataclass(frozen=True)
class SchemeSpec:
    family: str
    depth: int = 0
    ds: bool = False
    variant: Optional[GGVariant] = None

    @classmethod
    def parse(cls, text: str) -> SchemeSpec:
        t = text.strip()
        g = re.fullmatch(r"GG-([rcq]|real|complex|quaternion)", t, flags=re.I)
        if g:
            return cls("GG", variant=GGVariant.parse(g.group(1)))
        s = re.fullmatch(r"(HL|AdaPart)-(\d+)(-DS)?", t, flags=re.I)
        if not s:
            raise ValueError(f"cannot parse scheme {text!r}; expected e.g. HL-8, AdaPart-20-DS, GG-r")
        family = "HL" if s.group(1).upper() == "HL" else "AdaPart"
        return cls(family, int(s.group(2)), bool(s.group(3)))

    @property
    def name(self) -> str:
        if self.family == "GG":
            return f"GG-{self.variant.value[0]}"
        return f"{self.family}-{self.depth}" + ("-DS" if self.ds else "")

    def sampler_config(self, seed: int) -> SamplerConfig:
        if self.family == "HL":
            return SamplerConfig(BoundKind.HUBER_LAW, self.depth, Strategy.STATIC, seed)
        return SamplerConfig(BoundKind.SCHRIJVER_SOULES, self.depth, Strategy.ADAPART, seed)


@dataclass(frozen=True)
class BenchConfig:
    scheme: SchemeSpec
    instance: InstanceSpec
    ert_accepts: int = ERT_ACCEPTS
    target_accepts: int = TARGET_ACCEPTS
    time_limit_s: float = TIME_LIMIT
    repeats: int = 1
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.scheme, str):
            object.__setattr__(self, "scheme", SchemeSpec.parse(self.scheme))
        if not 1 <= self.ert_accepts <= self.target_accepts:
            raise ValueError("need 1 <= ert_accepts <= target_accepts")
        if self.time_limit_s <= 0 or self.repeats < 1:
            raise ValueError("time_limit_s and repeats must be positive")


@dataclass(frozen=True)
class BenchRow:
    instance_id: str
    n: int
    scheme: str
    ert_seconds: float
    accepts: int
    trials: int
    preprocess_seconds: float
    bound_value_log: Optional[float]
    status: str


CSV_FIELDS = [f.name for f in fields(BenchRow)]


def repeat_seed(seed: int, repeat: int) -> int:
    return int(np.random.SeedSequence([seed, repeat]).generate_state(1)[0])


def _run_sampler(a: np.ndarray, cfg: BenchConfig, seed: int, instance_id: str) -> BenchRow:
    scheme = cfg.scheme
    scfg = scheme.sampler_config(seed)
    n = a.shape[0]
    # compile outside the timed region
    warm = SchemeSpec(scheme.family, min(scheme.depth, 1)).sampler_config(0)
    TrialRunner(np.eye(2), warm).run(np.full((1, 5), 0.5))

    start = time.perf_counter()
    if scheme.ds:
        scaled = ds_pipeline(a)
        if scaled.zero_permanent:
            return BenchRow(instance_id, n, scheme.name, time.perf_counter() - start, 0, 0,
                            time.perf_counter() - start, None, "ok")
        work, log_scale = scaled.matrix, scaled.log_scale
    else:
        work, log_scale = a, 0.0
    db = deep_bound(work, scheme.depth, scfg.kind)
    runner = TrialRunner(work, scfg, db)
    prep = time.perf_counter() - start
    bound = db.value
    bound_log = None if bound.is_zero() else bound.log + log_scale
    if bound.is_zero():
        return BenchRow(instance_id, n, scheme.name, prep, 0, 0, prep, None, "ok")

    deadline = start + cfg.time_limit_s
    accepts = 0
    run_trials = 0
    trials_to_target = 0
    size = 16
    block = 0
    t0 = time.perf_counter()
    status = "ok"
    while True:
        blk = runner.run(block_rng(seed, block).random((size, runner.width)))
        block += 1
        hits = np.flatnonzero(blk.accepted)
        need = cfg.ert_accepts - accepts
        if len(hits) >= need:
            trials_to_target = run_trials + int(hits[need - 1]) + 1
            accepts = cfg.ert_accepts
            run_trials += size
            break
        accepts += len(hits)
        run_trials += size
        if time.perf_counter() > deadline:
            status = "timeout"
            break
        size = min(size * 2, 4096)
    sampling = time.perf_counter() - t0
    if status == "timeout":
        return BenchRow(instance_id, n, scheme.name, prep + sampling, accepts, run_trials,
                        prep, bound_log, status)
    # charge only the trials up to the last needed accept
    to_target = sampling * trials_to_target / run_trials
    ert = prep + cfg.target_accepts * to_target / cfg.ert_accepts
    return BenchRow(instance_id, n, scheme.name, ert, accepts, trials_to_target, prep, bound_log, status)


def _run_gg(a: np.ndarray, cfg: BenchConfig, seed: int, instance_id: str) -> BenchRow:
    """Time a pilot of single draws and extrapolate to the median-of-means plan."""
    variant = cfg.scheme.variant
    n = a.shape[0]
    batches, size = mom_plan(n, variant, 0.1, 0.05)
    total = batches * size
    rng = np.random.default_rng(seed)
    gg_samples(np.eye(2), variant, 2, rng)
    pilot = min(total, GG_PILOT)
    t0 = time.perf_counter()
    gg_samples(a, variant, pilot, rng)
    elapsed = time.perf_counter() - t0
    ert = elapsed * total / pilot
    status = "ok" if ert <= cfg.time_limit_s else "timeout"
    # for GG rows, accepts counts the timed pilot draws and trials the planned draws
    return BenchRow(instance_id, n, cfg.scheme.name, ert, pilot, total, 0.0, None, status)


def run_one(cfg: BenchConfig, repeat: int = 0) -> BenchRow:
    a = generate(cfg.instance)
    seed = repeat_seed(cfg.seed, repeat)
    if cfg.scheme.family == "GG":
        return _run_gg(a, cfg, seed, cfg.instance.instance_id)
    return _run_sampler(a, cfg, seed, cfg.instance.instance_id)


def run_bench(configs, csv_path=None, progress=None) -> list:
    """Run every configuration ``repeats`` times, sequentially."""
    if isinstance(configs, BenchConfig):
        configs = [configs]
    rows = []
    for cfg in configs:
        for r in range(cfg.repeats):
            row = run_one(cfg, r)
            rows.append(row)
            if progress is not None:
                progress(row)
    if csv_path is not None:
        write_csv(rows, csv_path)
    return rows


def write_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        w.writeheader()
        for row in rows:
            d = asdict(row)
            d["ert_seconds"] = repr(float(row.ert_seconds))
            d["preprocess_seconds"] = repr(float(row.preprocess_seconds))
            d["bound_value_log"] = "" if row.bound_value_log is None else repr(float(row.bound_value_log))
            w.writerow(d)


def read_csv(path) -> list:
    rows = []
    with open(path, newline="") as fh:
        for d in csv.DictReader(fh):
            rows.append(BenchRow(
                instance_id=d["instance_id"], n=int(d["n"]), scheme=d["scheme"],
                ert_seconds=float(d["ert_seconds"]), accepts=int(d["accepts"]),
                trials=int(d["trials"]), preprocess_seconds=float(d["preprocess_seconds"]),
                bound_value_log=float(d["bound_value_log"]) if d["bound_value_log"] else None,
                status=d["status"]))
    return rows


# ---------------------------------------------------------------- config files

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["schemes", "instances"],
    "additionalProperties": False,
    "properties": {
        "description": {"type": "string"},
        "output": {"type": "string"},
        "ert_accepts": {"type": "integer", "minimum": 1},
        "target_accepts": {"type": "integer", "minimum": 1},
        "time_limit_s": {"type": "number", "exclusiveMinimum": 0},
        "repeats": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "schemes": {"type": "array", "minItems": 1, "items": {"type": "string"}},
        "instances": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["class"],
                "additionalProperties": False,
                "properties": {
                    "class": {"enum": [c.value for c in InstanceClass]},
                    "n": {"type": "integer", "minimum": 1},
                    "p": {"type": "number", "minimum": 0, "maximum": 1},
                    "seed": {"type": "integer", "minimum": 0},
                    "path": {"type": "string"},
                },
            },
        },
    },
}


def parse_config(doc: dict) -> list:
    """Expand a validated config document into the scheme x instance grid."""
    jsonschema.validate(doc, CONFIG_SCHEMA)
    common = {k: doc[k] for k in ("ert_accepts", "target_accepts", "time_limit_s", "repeats", "seed")
              if k in doc}
    out = []
    for inst in doc["instances"]:
        spec = InstanceSpec(InstanceClass(inst["class"]), n=inst.get("n", 0), p=inst.get("p"),
                            seed=inst.get("seed", 0), path=inst.get("path"))
        for s in doc["schemes"]:
            out.append(BenchConfig(SchemeSpec.parse(s), spec, **common))
    return out


def load_config(path) -> tuple:
    """Read a JSON or TOML grid; returns ``(configs, output_path_or_None)``."""
    path = str(path)
    if path.lower().endswith(".toml"):
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    else:
        with open(path) as fh:
            doc = json.load(fh)
    return parse_config(doc), doc.get("output")


# ---------------------------------------------------------------- random-matrix diagnostic


def asymptotic_ratio_bound(n: int, d: int, p: float, delta: float) -> float:
    """High-probability bound on ``U^HL_d / per`` for a random 0/1 matrix."""
    p0 = p - math.sqrt(2.0 * p * math.log(1.0 / delta)) / n
    if p0 <= 0:
        return math.inf
    m = n - d
    log_val = (-math.log(delta) - 0.5 * math.log(math.pi * m)
               + ((2 * math.e - 1) + math.log(m * p0)) / (2 * p0))
    return math.exp(log_val)


def ratio_report(n: int = 20, p: float = 0.5, depths=(0, 5), seed: int = 0,
                 delta: float = 0.05) -> dict:
    """Measured ``U^HL_d / per`` next to the asymptotic bound for one draw."""
    spec = InstanceSpec(InstanceClass.BERNOULLI, n=n, p=p, seed=seed)
    a = generate(spec)
    per = log_permanent_exact(a)
    entries = []
    for d in depths:
        u = deep_bound(a, d, BoundKind.HUBER_LAW).value
        if per.is_zero():
            ratio = math.inf
        else:
            ratio = math.exp(u.log - per.log)
        bound = asymptotic_ratio_bound(n, d, p, delta)
        entries.append({
            "d": d, "ratio": ratio, "asymptotic_bound": bound,
            "finite": math.isfinite(ratio), "ratio_at_least_one": ratio >= 1.0 - 1e-12,
        })
    return {"instance_id": spec.instance_id, "n": n, "p": p, "delta": delta,
            "log_permanent": None if per.is_zero() else per.log, "entries": entries}
