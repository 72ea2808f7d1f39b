"""Functional inhomogeneous ERGMs for longitudinal item responses, fitted by FHS-DMH."""

__version__ = "0.1.0"

from .basis import BasisMatrix, build_bspline, fhs_constants  # noqa: E402
from .dmh import ChainConfig, ChainOutput, ProposalConfig, acceptance_report, run_chain  # noqa: E402
from .fhs import FhsConfig, FhsState  # noqa: E402
from .model import (  # noqa: E402
    Easiness,
    Interaction,
    ParamIndex,
    ParamState,
    ResponseTensor,
    SuffStats,
    compute_suff_stats,
    exact_log_lik,
    log_unnorm_lik,
)
from .sampler import InnerSamplerConfig, simulate_dataset, simulate_slice  # noqa: E402

__all__ = [
    "BasisMatrix",
    "ChainConfig",
    "ChainOutput",
    "Easiness",
    "FhsConfig",
    "FhsState",
    "InnerSamplerConfig",
    "Interaction",
    "ParamIndex",
    "ParamState",
    "ProposalConfig",
    "ResponseTensor",
    "SuffStats",
    "acceptance_report",
    "build_bspline",
    "compute_suff_stats",
    "exact_log_lik",
    "fhs_constants",
    "log_unnorm_lik",
    "run_chain",
    "simulate_dataset",
    "simulate_slice",
]
