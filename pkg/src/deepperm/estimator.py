"""(epsilon, delta)-estimators of the permanent driven by a trial stream.

``Dagum`` stops at ``k = ceil(psi)`` accepts and returns ``U * k / t`` with
``t`` the number of trials.  ``GBAS`` charges an Exp(1) arrival per trial
and returns ``U * (k - 1) / t`` with ``t`` the summed arrivals;
``GBAS_EXACT_K`` is the same scheme with the smallest ``k`` for which the
Gamma tail is below ``delta``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .bounds import deep_bound
from .errors import TrialBudgetExceeded
from .logscale import LogScale
from .matrix import as_matrix
from .preprocess import ds_pipeline, has_perfect_matching
from .sampler import DEFAULT_BLOCK, SamplerConfig, TrialRunner

TRIAL_BUDGET = 10**8
GAMMA_TOL = 1e-15
GAMMA_MAX_ITER = 100000


class Scheme(str, Enum):
    DAGUM = "dagum"
    GBAS = "gbas"
    GBAS_EXACT_K = "gbas-exact"

    @classmethod
    def parse(cls, value) -> Scheme:
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("_", "-")
        aliases = {"dagum": cls.DAGUM, "gbas": cls.GBAS, "gbas-exact": cls.GBAS_EXACT_K,
                   "gbas-exact-k": cls.GBAS_EXACT_K, "gbasexactk": cls.GBAS_EXACT_K}
        if key not in aliases:
            raise ValueError(f"unknown scheme {value!r}")
        return aliases[key]


@dataclass(frozen=True)
class EstimatorConfig:
    epsilon: float = 0.1
    delta: float = 0.05
    scheme: Scheme = Scheme.GBAS_EXACT_K

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.scheme is not Scheme.DAGUM and not self.epsilon < 0.75:
            raise ValueError("the GBAS schemes need epsilon in (0, 3/4)")

    @property
    def psi(self) -> float:
        e, d = self.epsilon, self.delta
        return 1.0 + 2.88 * (1.0 + e) * math.log(2.0 / d) / e**2

    @property
    def psi_star(self) -> float:
        e, d = self.epsilon, self.delta
        return 2.0 * math.log(2.0 / d) / (e**2 * (1.0 - 4.0 * e / 3.0))


# ---------------------------------------------------------------- incomplete gamma


def _gamma_series(a: float, x: float) -> float:
    """Lower regularized P(a, x) by its power series (good for x < a + 1)."""
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(GAMMA_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * GAMMA_TOL:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cf(a: float, x: float) -> float:
    """Upper regularized Q(a, x) by the modified Lentz continued fraction."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    frac = d
    for i in range(1, GAMMA_MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        step = d * c
        frac *= step
        if abs(step - 1.0) < GAMMA_TOL:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * frac


def regularized_gamma_p(a: float, x: float) -> float:
    if a <= 0:
        raise ValueError("a must be positive")
    if x <= 0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cf(a, x)


def regularized_gamma_q(a: float, x: float) -> float:
    if a <= 0:
        raise ValueError("a must be positive")
    if x <= 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cf(a, x)


def gamma_tail(k: int, eps: float) -> float:
    """``Pr(|Z - 1| > eps)`` for ``Z ~ Gamma(shape k, rate k - 1)``.

    Summed as two tails, which avoids the cancellation in ``1 - (P - P)``.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    scale = k - 1.0
    return regularized_gamma_q(k, scale * (1.0 + eps)) + regularized_gamma_p(k, scale * (1.0 - eps))


def _exact_k(eps: float, delta: float) -> int:
    # the tail decreases in k: bracket by doubling, then bisect
    hi = 2
    while gamma_tail(hi, eps) >= delta:
        hi *= 2
    lo = max(1, hi // 2)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if mid >= 2 and gamma_tail(mid, eps) < delta:
            hi = mid
        else:
            lo = mid
    return hi


def required_accepts(cfg: EstimatorConfig) -> int:
    if cfg.scheme is Scheme.DAGUM:
        return math.ceil(cfg.psi)
    if cfg.scheme is Scheme.GBAS:
        return math.ceil(cfg.psi_star)
    return _exact_k(cfg.epsilon, cfg.delta)


# ---------------------------------------------------------------- estimate


@dataclass
class EstimateReport:
    estimate: LogScale
    epsilon: float
    delta: float
    scheme: Scheme
    accepted: int
    total_trials: int
    scale_correction: LogScale = field(default_factory=LogScale.one)
    bound: LogScale = field(default_factory=LogScale.one)
    wall_time: float = 0.0
    preprocess_seconds: float = 0.0
    sampler: str = ""

    @property
    def value(self) -> float:
        return self.estimate.value

    def to_dict(self) -> dict:
        return {
            "estimate": self.value,
            "estimate_log": self.estimate.log if not self.estimate.is_zero() else None,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "scheme": self.scheme.value,
            "k": self.accepted,
            "accepted": self.accepted,
            "total_trials": self.total_trials,
            "scale_correction_log": self.scale_correction.log,
            "bound_log": self.bound.log if not self.bound.is_zero() else None,
            "wall_time": self.wall_time,
            "preprocess_seconds": self.preprocess_seconds,
            "sampler": self.sampler,
        }


def estimate(m, cfg: EstimatorConfig, sampler_cfg: SamplerConfig, *, preprocess: bool = False,
             seed: Optional[int] = None, trial_budget: int = TRIAL_BUDGET,
             time_limit: Optional[float] = None, threads: Optional[int] = None,
             block_size: int = DEFAULT_BLOCK) -> EstimateReport:
    """Run trials until the scheme's accept target is met and scale the result.

    A matrix whose support admits no perfect matching has permanent 0,
    which is returned without sampling.  Raises
    :class:`TrialBudgetExceeded` when ``trial_budget`` trials or
    ``time_limit`` seconds are used up first.
    """
    start = time.perf_counter()
    a = as_matrix(m, square=True)
    seed = sampler_cfg.seed if seed is None else seed
    name = sampler_cfg.name + ("-DS" if preprocess else "")
    correction = LogScale.one()
    if not has_perfect_matching(a):
        return EstimateReport(LogScale.zero(), cfg.epsilon, cfg.delta, cfg.scheme, 0, 0,
                              wall_time=time.perf_counter() - start, sampler=name,
                              bound=LogScale.zero())
    if preprocess:
        scaled = ds_pipeline(a)
        a = scaled.matrix
        correction = scaled.scale
    db = deep_bound(a, sampler_cfg.depth, sampler_cfg.kind)
    runner = TrialRunner(a, sampler_cfg, db)
    prep = time.perf_counter() - start

    k = required_accepts(cfg)
    gbas = cfg.scheme is not Scheme.DAGUM
    accepted = 0
    trials = 0
    arrival = 0.0
    done = False
    for blk in runner.blocks(seed, block_size, threads):
        hits = np.flatnonzero(blk.accepted)
        need = k - accepted
        if len(hits) >= need:
            cut = int(hits[need - 1]) + 1
            done = True
        else:
            cut = len(blk.accepted)
        accepted += min(len(hits), need)
        trials += cut
        if gbas:
            arrival += float(blk.arrivals[:cut].sum())
        if done:
            break
        elapsed = time.perf_counter() - start
        if trials >= trial_budget or (time_limit is not None and elapsed > time_limit):
            raise TrialBudgetExceeded(
                f"stopped after {trials} trials with {accepted} of {k} accepts",
                accepted, trials, elapsed)

    ratio = (k - 1) / arrival if gbas else k / trials
    est = db.value * ratio * correction
    return EstimateReport(est, cfg.epsilon, cfg.delta, cfg.scheme, accepted, trials,
                          scale_correction=correction, bound=db.value,
                          wall_time=time.perf_counter() - start, preprocess_seconds=prep,
                          sampler=name)
