"""Method configuration and the per-run record every driver returns."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import BudgetExhausted, ConfigError, Diverged
from ..linalg import MetricSpec
from ..regularization import RegularizationPolicy
from ..shanks import CoefficientStrategy, Strategy

RESTARTED = {
    "SVDA": Strategy.MINRES_ALPHA_SVD,
    "RNLA": Strategy.MINRES_ALPHA,
    "RRRE": Strategy.MINRES_BETA,
    "RTSA": Strategy.TOPO_ALPHA,
}
CONTINUOUS = {"CU-Alpha": Strategy.MINRES_ALPHA, "CU-Beta": Strategy.MINRES_BETA}
ANDERSON = ("AA", "RAA", "ATM-RRE", "ATM-MPE", "ATM-MMPE")
METHODS = (*RESTARTED, *CONTINUOUS, *ANDERSON, "StabilizedAA", "PlainFixedPoint")

_DEFAULT_REG = {
    "RNLA": "grid",
    "RRRE": "gcv",
    "RTSA": "grid",
    "RAA": "gcv",
}

DIVERGENCE_LIMIT = 1e12


def default_policy(method: str) -> RegularizationPolicy:
    kind = _DEFAULT_REG.get(method, "fixed")
    if kind == "grid":
        return RegularizationPolicy.grid_search()
    if kind == "gcv":
        return RegularizationPolicy.gcv()
    return RegularizationPolicy.fixed(0.0)


@dataclass(frozen=True)
class MethodConfig:
    """Everything a driver needs besides the problem.

    ``window`` is the number of iterates an extrapolation works on: the cycle
    length ``l_k`` for the restarted methods (``k = window - 2`` for
    minimal-residual strategies, ``k = (window - 1) // 2`` for topological
    ones) and the history depth ``m`` for the continuous and Anderson-type
    methods. ``reg=None`` selects the method's default policy.

    With ``lambda_scale="relative"`` (the default) every ``lam`` coming from
    the policy is multiplied by the squared norm of the newest first difference
    (the newest residual for the Anderson-type methods), so grids are
    dimensionless and keep their meaning as the iteration converges.
    ``"absolute"`` uses the values as given.

    ``combine`` defaults to ``"t_tilde"`` for the continuous-updating methods
    and ``"t"`` everywhere else.

    ``svda_sum_normalize`` rescales the SVDA singular vector to unit sum before
    combining. Unit-norm weights shrink homogeneous maps such as PageRank
    towards zero, so the driver default is on.
    """

    method: str
    window: int = 7
    mixing_beta: float = 1.0
    tau: float = 10.0
    metric: MetricSpec | None = None
    reg: RegularizationPolicy | None = None
    max_g_evals: int = 10_000
    tol: float = 1e-7
    combine: str | None = None
    svda_sum_normalize: bool = True
    strategy: CoefficientStrategy | None = None
    raa_variant: str = "type2"
    lambda_scale: str = "relative"
    seed: int = 0
    max_workers: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}", "method")
        if not (0 < self.mixing_beta <= 1):
            raise ConfigError(f"must lie in (0, 1], got {self.mixing_beta}", "mixing_beta")
        if not (self.tau > 1 and not math.isnan(self.tau)):
            raise ConfigError(f"must exceed 1, got {self.tau}", "tau")
        if not (self.tol > 0 and math.isfinite(self.tol)):
            raise ConfigError(f"must be positive, got {self.tol}", "tol")
        if self.max_g_evals < 1:
            raise ConfigError("must be at least 1", "max_g_evals")
        if self.window < 1:
            raise ConfigError("must be at least 1", "window")
        if self.method in RESTARTED and self.window < 3:
            raise ConfigError("restarted methods need at least 3 iterates per cycle", "window")
        if self.combine is None:
            object.__setattr__(self, "combine", "t_tilde" if self.method in CONTINUOUS else "t")
        if self.combine not in ("t", "t_tilde"):
            raise ConfigError(f"must be 't' or 't_tilde', got {self.combine!r}", "combine")
        if self.raa_variant not in ("type1", "type2"):
            raise ConfigError(f"must be 'type1' or 'type2', got {self.raa_variant!r}", "raa_variant")
        if self.lambda_scale not in ("relative", "absolute"):
            raise ConfigError(f"must be 'relative' or 'absolute', got {self.lambda_scale!r}", "lambda_scale")
        if self.max_workers < 1:
            raise ConfigError("must be at least 1", "max_workers")
        if self.reg is None:
            object.__setattr__(self, "reg", default_policy(self.method))
        if self.reg.kind == "gcv" and self.coefficient_strategy() is not None and self.coefficient_strategy().kind.uses_alpha:
            raise ConfigError("GCV needs a least-squares coefficient problem; alpha strategies have none", "reg")
        if self.reg.kind == "gcv" and self.method in ("ATM-RRE", "ATM-MPE", "ATM-MMPE", "StabilizedAA", "PlainFixedPoint"):
            raise ConfigError(f"GCV is not supported for {self.method}", "reg")

    def coefficient_strategy(self) -> CoefficientStrategy | None:
        """Coefficient strategy for restarted and continuous methods, else ``None``."""
        if self.strategy is not None:
            return self.strategy
        kind = RESTARTED.get(self.method) or CONTINUOUS.get(self.method)
        if kind is None:
            return None
        return CoefficientStrategy(kind, svda_sum_normalize=self.svda_sum_normalize)

    def with_(self, **changes) -> MethodConfig:
        return replace(self, **changes)


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    BUDGET_EXHAUSTED = "BudgetExhausted"
    DIVERGED = "Diverged"


@dataclass
class RunRecord:
    """Outcome of one driver run.

    ``residuals[i]`` is ``||G(x) - x||`` for the ``i``-th evaluation of ``G``,
    probes included, so ``g_eval_count == len(residuals)``. ``lambdas`` holds
    ``(eval_index, lam)`` pairs: the evaluation count at the moment a ridge
    parameter was selected. ``solution`` (the last evaluated point) is kept in
    memory only and is not serialized.
    """

    method: str
    residuals: list[float] = field(default_factory=list)
    lambdas: list[tuple[int, float]] = field(default_factory=list)
    status: Status = Status.BUDGET_EXHAUSTED
    message: str = ""
    iterations: int = 0
    wall_ms: float = 0.0
    solution: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def g_eval_count(self) -> int:
        return len(self.residuals)

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    def raise_for_status(self) -> RunRecord:
        if self.status is Status.DIVERGED:
            raise Diverged(self.message or "iteration diverged", self)
        if self.status is Status.BUDGET_EXHAUSTED:
            raise BudgetExhausted(self.message or "evaluation budget exhausted", self)
        return self
