"""Permanent approximation by rejection sampling with deep upper bounds.

Exact permanents, row-factorizable upper bounds and their depth-d
refinements, exact samplers of permutations, (epsilon, delta) estimators,
DS preprocessing and determinant-based baselines.
"""

__version__ = "0.1.0"

from .bounds import BoundKind, bound, check_nesting, deep_bound, partition_bound
from .errors import (
    MatrixParseError,
    MemoryBudgetError,
    NegativeEntryError,
    NestingFailure,
    NotSquareError,
    NumericOverflowError,
    PermanentError,
    TrialBudgetExceeded,
    ZeroPermanentError,
)
from .estimator import EstimatorConfig, Scheme, estimate, gamma_tail, required_accepts
from .exact import log_permanent_exact, permanent_bruteforce, permanent_exact, rper
from .logscale import LogScale
from .matrix import InstanceClass, InstanceSpec, generate, load_matrix, save_matrix
from .preprocess import ds_pipeline
from .sampler import SamplerConfig, Strategy, acceptance_rate_estimate, sample_trial
