"""Iteration drivers: restarted, continuous-updating and Anderson-type methods."""

from ..problems.base import FixedPointProblem
from .anderson import (
    AtmState,
    QuasiNewtonMatrixView,
    StabilizedBasis,
    apply_H_beta,
    atm_candidate,
    atm_step,
    explicit_H,
    h_recursive_projected,
    h_recursive_secant,
    mmpe_matrix,
    run_aa,
    run_atm,
    run_stabilized_aa,
    stabilize,
    stabilized_step,
)
from .config import (
    ANDERSON,
    CONTINUOUS,
    METHODS,
    RESTARTED,
    MethodConfig,
    RunRecord,
    Status,
    default_policy,
)
from .continuous import run_continuous, run_continuous_alpha, run_continuous_beta
from .plain import run_plain
from .restarted import run_restarted


def run_method(problem: FixedPointProblem, cfg: MethodConfig) -> RunRecord:
    """Dispatch on ``cfg.method``."""
    if cfg.method in RESTARTED:
        return run_restarted(problem, cfg)
    if cfg.method in CONTINUOUS:
        return run_continuous(problem, cfg)
    if cfg.method in ANDERSON:
        return run_atm(problem, cfg)
    if cfg.method == "StabilizedAA":
        return run_stabilized_aa(problem, cfg)
    return run_plain(problem, cfg)


__all__ = [
    "ANDERSON",
    "CONTINUOUS",
    "METHODS",
    "RESTARTED",
    "AtmState",
    "MethodConfig",
    "QuasiNewtonMatrixView",
    "RunRecord",
    "StabilizedBasis",
    "Status",
    "apply_H_beta",
    "atm_candidate",
    "atm_step",
    "default_policy",
    "explicit_H",
    "h_recursive_projected",
    "h_recursive_secant",
    "mmpe_matrix",
    "run_aa",
    "run_atm",
    "run_continuous",
    "run_continuous_alpha",
    "run_continuous_beta",
    "run_method",
    "run_plain",
    "run_restarted",
    "run_stabilized_aa",
    "stabilize",
    "stabilized_step",
]
