"""Shanks-type coefficient solvers, their regularized forms, and the combiners.

Two families of coefficients are computed here:

* ``alpha`` weights (length ``k + 1``, summing to one) that combine iterates
  directly, ``t = S alpha``;
* ``beta`` weights (length ``k``) used as ``t = s_anchor - dS beta``.

Minimal-residual solvers need ``k + 2`` consecutive iterates, topological
ones ``2k + 1``. All solvers accept a metric ``M`` and a ridge parameter
``lam``; ``lam == 0`` reproduces the unregularized transformations.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import SingularSystem
from .linalg import (
    COND_LIMIT,
    IDENTITY,
    MetricSpec,
    constrained_least_squares,
    least_squares,
    ridge_solve,
    smallest_right_singular_vector,
    sum_constrained_factored,
)
from .window import (
    SequenceWindow,
    delta2_matrix,
    delta_matrix,
    stacked_column,
    stacked_delta,
    stacked_delta2,
)


class Strategy(enum.Enum):
    MINRES_ALPHA = "MinResAlpha"
    MINRES_ALPHA_SVD = "MinResAlphaSVD"
    MINRES_BETA = "MinResBeta"
    GENERAL_Y = "GeneralY"
    TOPO_ALPHA = "TopoAlpha"
    TOPO_BETA = "TopoBeta"
    TOPO_GENERAL_Y = "TopoGeneralY"

    @property
    def topological(self) -> bool:
        return self in (Strategy.TOPO_ALPHA, Strategy.TOPO_BETA, Strategy.TOPO_GENERAL_Y)

    @property
    def uses_alpha(self) -> bool:
        return self in (Strategy.MINRES_ALPHA, Strategy.MINRES_ALPHA_SVD, Strategy.TOPO_ALPHA)

    def iterates_needed(self, k: int) -> int:
        """Number of consecutive iterates one extrapolation consumes."""
        return 2 * k + 1 if self.topological else k + 2

    def k_for_history(self, length: int) -> int:
        """Largest ``k`` whose extrapolation fits into ``length`` iterates."""
        k = (length - 1) // 2 if self.topological else length - 2
        if k < 1:
            raise ValueError(f"{self.value} needs more than {length} iterates")
        return k


@dataclass(frozen=True)
class CoefficientStrategy:
    """A :class:`Strategy` together with its auxiliary ``Y`` choice.

    ``y_choice`` applies to the general-``Y`` strategies: ``"mpe"`` uses the
    first differences ``dS`` (minimal-residual only), ``"matrix"`` uses the
    fixed ``Y`` given here (MMPE), and ``"last"`` builds ``I_k (x) y`` from the
    most recent difference (topological only).
    """

    kind: Strategy
    Y: np.ndarray | None = None
    y_choice: str = "mpe"
    svda_sum_normalize: bool = False

    def __post_init__(self):
        if self.kind is Strategy.GENERAL_Y and self.y_choice not in ("mpe", "matrix"):
            raise ValueError(f"unknown Y choice {self.y_choice!r} for GeneralY")
        if self.kind is Strategy.TOPO_GENERAL_Y and self.y_choice not in ("last", "matrix"):
            object.__setattr__(self, "y_choice", "last" if self.Y is None else "matrix")
        if self.y_choice == "matrix" and self.Y is None:
            raise ValueError("y_choice='matrix' requires Y")


# --------------------------------------------------------------------------
# coefficient solvers


def solve_alpha_minres(dS, metric: MetricSpec | None = None, lam: float = 0.0) -> np.ndarray:
    """Weights minimizing ``||dS g||_M^2 + lam ||g||^2`` with ``sum(g) == 1``.

    ``dS`` is ``p x (k+1)``. For ``lam > 0`` this is the closed form
    ``(dS^T M dS + lam I)^{-1} e`` normalized to unit sum, evaluated through
    the SVD of the whitened ``dS``; for ``lam == 0``
    the constraint is eliminated and the reduced least-squares problem is
    solved by QR, which stays well defined on exact Shanks-kernel data where
    ``dS^T M dS`` is singular.
    """
    metric = metric or IDENTITY
    dS = np.asarray(dS, dtype=float)
    if dS.ndim != 2 or dS.shape[1] < 2:
        raise ValueError("dS must have at least two columns (k >= 1)")
    W = metric.whiten(dS)
    if lam == 0:
        return constrained_least_squares(W)
    return sum_constrained_factored(W, lam)


def solve_alpha_svd(dS, sum_normalize: bool = False) -> np.ndarray:
    """Smallest right singular vector of ``dS`` (unit 2-norm, first nonzero entry positive).

    With ``sum_normalize`` the vector is rescaled to unit sum instead, which
    is the exact kernel formula and the variant to use on Shanks-kernel data.
    """
    v, _ = smallest_right_singular_vector(dS)
    if sum_normalize:
        total = v.sum()
        if total == 0:
            raise SingularSystem("singular vector is orthogonal to the all-ones vector")
        v = v / total
    return v


def solve_beta_rre(d2S, rhs, metric: MetricSpec | None = None, lam: float = 0.0) -> np.ndarray:
    """RRE-type weights ``(D^T M D + lam I)^{-1} D^T M rhs`` with ``D = d2S``."""
    return ridge_solve(d2S, metric, rhs, lam)


def solve_beta_general_y(d2S, rhs, Y) -> np.ndarray:
    """Solve the projected system ``Y^T d2S beta = Y^T rhs``."""
    d2S = np.asarray(d2S, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.shape != d2S.shape:
        raise ValueError(f"Y has shape {Y.shape}, expected {d2S.shape}")
    B = Y.T @ d2S
    cond = np.linalg.cond(B)
    if not cond <= COND_LIMIT:
        raise SingularSystem(f"Y^T d2S has condition estimate {cond:.3g}")
    return np.linalg.solve(B, Y.T @ np.asarray(rhs, dtype=float))


def solve_alpha_topological(stacked_dS, metric: MetricSpec | None = None, lam: float = 0.0) -> np.ndarray:
    """Topological alpha weights; ``stacked_dS`` is ``kp x (k+1)``."""
    return solve_alpha_minres(stacked_dS, metric, lam)


def solve_beta_topological(stacked_d2S, stacked_rhs, metric: MetricSpec | None = None, lam: float = 0.0) -> np.ndarray:
    """Topological beta weights; ``stacked_d2S`` is ``kp x k``."""
    return ridge_solve(stacked_d2S, metric, stacked_rhs, lam)


def solve_theta_coupled(dC, c, Y=None, metric: MetricSpec | None = None, lam: float = 0.0) -> np.ndarray:
    """Mixing weights from a coupled sequence.

    Minimizes ``||c - dC t||_M^2 + lam ||t||^2``. When ``Y`` is given the
    metric is ``Y Y^T``; with ``lam == 0`` and a square projected system this
    reduces to ``(Y^T dC)^{-1} Y^T c``, which is solved directly.
    """
    dC = np.asarray(dC, dtype=float)
    if dC.ndim == 1:
        dC = dC[:, None]
    c = np.asarray(c, dtype=float)
    if Y is not None:
        Y = np.asarray(Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if lam == 0 and Y.shape == dC.shape:
            return solve_beta_general_y(dC, c, Y)
        metric = MetricSpec.factor(Y)
    return ridge_solve(dC, metric, c, lam)


# --------------------------------------------------------------------------
# combiners


def combine_alpha(S, alpha) -> np.ndarray:
    """``S @ alpha``: the caller picks the slice (``t`` or ``t~``)."""
    return np.asarray(S, dtype=float) @ np.asarray(alpha, dtype=float)


def combine_beta(s_anchor, dS_slice, beta) -> np.ndarray:
    """``s_anchor - dS_slice @ beta``."""
    return np.asarray(s_anchor, dtype=float) - np.asarray(dS_slice, dtype=float) @ np.asarray(beta, dtype=float)


# --------------------------------------------------------------------------
# window-level extrapolation


def _mpe_beta(w: SequenceWindow, n: int, k: int) -> np.ndarray:
    # Y = dS makes Y^T d2S b = Y^T ds_{n+k} equivalent to the least-squares
    # problem min ||dS c + ds_{n+k}||; solving that by QR avoids the squared
    # conditioning of the projected square system.
    D = delta_matrix(w, n, k + 1)
    c = least_squares(D[:, :k], -D[:, k])
    gamma = np.append(c, 1.0)
    total = gamma.sum()
    if total == 0 or not np.isfinite(total):
        raise SingularSystem("MPE weights cannot be normalized to unit sum")
    return np.cumsum(gamma / total)[:k]


def _general_y_matrix(w: SequenceWindow, strategy: CoefficientStrategy, n: int, k: int) -> np.ndarray:
    if strategy.y_choice == "matrix":
        return np.asarray(strategy.Y, dtype=float)
    if strategy.kind is Strategy.GENERAL_Y:
        return delta_matrix(w, n, k)
    y = delta_matrix(w, n + 2 * k - 1, 1)[:, 0]
    return np.kron(np.eye(k), y[:, None])


def least_squares_operands(w: SequenceWindow, kind: Strategy, n: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """``(X, y)`` of the unconstrained beta-type problem ``min ||y - X b||``.

    Used for generalized cross-validation of the beta strategies.
    """
    if kind in (Strategy.MINRES_BETA, Strategy.GENERAL_Y):
        return delta2_matrix(w, n, k), delta_matrix(w, n + k, 1)[:, 0]
    if kind in (Strategy.TOPO_BETA, Strategy.TOPO_GENERAL_Y):
        return stacked_delta2(w, n, k, k), stacked_column(w, n + k, k)
    raise ValueError(f"{kind.value} has no unconstrained least-squares form")


def regularization_scale(
    w: SequenceWindow,
    strategy: CoefficientStrategy | Strategy,
    n: int,
    k: int,
    metric: MetricSpec | None = None,
) -> float:
    """Squared (metric) norm of the newest first difference of the block at ``s_n``.

    Multiplying a dimensionless ``lam`` by this value makes the ridge term
    scale like the least-squares term, so a fixed grid keeps its meaning as
    the iterates converge and the differences shrink.
    """
    kind = strategy.kind if isinstance(strategy, CoefficientStrategy) else strategy
    last = n + kind.iterates_needed(k) - 1
    d = w[last] - w[last - 1]
    if metric is not None:
        d = metric.whiten(d)
    return float(d @ d)


def extrapolation_coefficients(
    w: SequenceWindow,
    strategy: CoefficientStrategy,
    n: int,
    k: int,
    lam: float = 0.0,
    metric: MetricSpec | None = None,
) -> np.ndarray:
    """Alpha or beta coefficients for the block of iterates starting at ``s_n``."""
    kind = strategy.kind
    if kind is Strategy.MINRES_ALPHA:
        return solve_alpha_minres(delta_matrix(w, n, k + 1), metric, lam)
    if kind is Strategy.MINRES_ALPHA_SVD:
        return solve_alpha_svd(delta_matrix(w, n, k + 1), strategy.svda_sum_normalize)
    if kind is Strategy.TOPO_ALPHA:
        return solve_alpha_topological(stacked_delta(w, n, k, k + 1), metric, lam)
    X, y = least_squares_operands(w, kind, n, k)
    if kind is Strategy.MINRES_BETA:
        return solve_beta_rre(X, y, metric, lam)
    if kind is Strategy.TOPO_BETA:
        return solve_beta_topological(X, y, metric, lam)
    if kind is Strategy.GENERAL_Y and strategy.y_choice == "mpe" and lam == 0 and metric is None:
        return _mpe_beta(w, n, k)
    Y = _general_y_matrix(w, strategy, n, k)
    if lam == 0 and metric is None:
        return solve_beta_general_y(X, y, Y)
    return ridge_solve(X, MetricSpec.factor(Y), y, lam)


def combine_window(
    w: SequenceWindow,
    kind: Strategy,
    coeffs: np.ndarray,
    n: int,
    k: int,
    combine: str = "t",
) -> np.ndarray:
    """Form ``t`` (uses the newest iterate) or ``t~`` (one step earlier) from coefficients."""
    if combine not in ("t", "t_tilde"):
        raise ValueError(f"combine must be 't' or 't_tilde', got {combine!r}")
    shift = 1 if combine == "t" else 0
    if kind.topological:
        # t~ for topological transforms slides the same combination back by one
        base = n + k - 1 + shift
    else:
        base = n + shift
    if kind.uses_alpha:
        return combine_alpha(w.matrix(base, k + 1), coeffs)
    return combine_beta(w[base + k], delta_matrix(w, base, k), coeffs)


def extrapolate(
    w: SequenceWindow,
    strategy: CoefficientStrategy | Strategy,
    n: int,
    k: int,
    lam: float = 0.0,
    metric: MetricSpec | None = None,
    combine: str = "t",
) -> np.ndarray:
    """One Shanks-type extrapolation from the iterates ``s_n, s_{n+1}, ...`` held in ``w``."""
    if isinstance(strategy, Strategy):
        strategy = CoefficientStrategy(strategy)
    coeffs = extrapolation_coefficients(w, strategy, n, k, lam, metric)
    return combine_window(w, strategy.kind, coeffs, n, k, combine)
