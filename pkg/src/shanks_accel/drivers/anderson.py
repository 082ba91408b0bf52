"""Anderson-type mixing, its quasi-Newton form and the stabilized variant.

All methods keep raw histories of iterates ``s_j`` and residuals
``f_j = G(s_j) - s_j`` and rebuild the difference matrices each step. A step
computes mixing weights ``theta`` and moves to

    s_{j+1} = (s_j - dS theta) + beta (f_j - dF theta),

which equals ``s_j - H f_j`` for the multisecant matrix
``H = -beta I + (dS + beta dF)(dF^T dF)^{-1} dF^T`` when ``theta`` is the
least-squares choice.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DegenerateTrace, ShanksError, SingularSystem
from ..linalg import MetricSpec, ridge_solve, svd_shift
from ..problems.base import FixedPointProblem
from ..regularization import gcv_select
from ..shanks import solve_theta_coupled
from ..window import SequenceWindow, delta2_matrix, delta_matrix
from .config import ANDERSON, MethodConfig, RunRecord
from .tracking import Stop, Tracker

# --------------------------------------------------------------------------
# the multisecant matrix


@dataclass(frozen=True, eq=False)
class QuasiNewtonMatrixView:
    """``H = -beta I + (dS + beta dF~)(dF~^T dF~)^{-1} dF^T``-type matrices, never formed.

    ``variant="type2"`` (the regularized Anderson matrix) uses ``dF`` in the
    right factor and ``dF~ = svd_shift(dF, lam)`` only inside the inverse;
    ``variant="type1"`` (experimental) uses ``dF~`` in all three places, so
    that ``H dF~ = dS``. Both reduce to the classical matrix at ``lam = 0``.
    """

    dS: np.ndarray
    dF: np.ndarray
    beta: float
    lam: float = 0.0
    variant: str = "type2"

    def __post_init__(self):
        dS = np.asarray(self.dS, dtype=float)
        dF = np.asarray(self.dF, dtype=float)
        if dS.ndim == 1:
            dS = dS[:, None]
        if dF.ndim == 1:
            dF = dF[:, None]
        if dS.shape != dF.shape:
            raise ValueError(f"dS {dS.shape} and dF {dF.shape} must have the same shape")
        if self.variant not in ("type1", "type2"):
            raise ValueError(f"unknown variant {self.variant!r}")
        object.__setattr__(self, "dS", dS)
        object.__setattr__(self, "dF", dF)

    @property
    def dim(self) -> int:
        return self.dS.shape[0]

    def coefficients(self, v) -> np.ndarray:
        """``(dF~^T dF~)^{-1} X^T v`` with ``X = dF`` (type2) or ``dF~`` (type1)."""
        if self.dF.shape[1] == 0:
            return np.zeros(0)
        if self.variant == "type1":
            return ridge_solve(svd_shift(self.dF, self.lam), None, v, 0.0)
        return ridge_solve(self.dF, None, v, self.lam)

    def left_factor(self) -> np.ndarray:
        right = svd_shift(self.dF, self.lam) if self.variant == "type1" else self.dF
        return self.dS + self.beta * right

    def apply(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        out = -self.beta * v
        if self.dF.shape[1]:
            out = out + self.left_factor() @ self.coefficients(v)
        return out

    def todense(self) -> np.ndarray:
        """Explicit ``p x p`` matrix (tests and small problems only)."""
        return explicit_H(self.dS, self.dF, self.beta, self.lam, self.variant)


def apply_H_beta(view: QuasiNewtonMatrixView, v) -> np.ndarray:
    """``H v`` for the implicitly represented multisecant matrix."""
    return view.apply(v)


def explicit_H(dS, dF, beta: float, lam: float = 0.0, variant: str = "type2") -> np.ndarray:
    """Materialize ``H`` straight from its closed form with a dense inverse."""
    dS = np.atleast_2d(np.asarray(dS, dtype=float))
    dF = np.atleast_2d(np.asarray(dF, dtype=float))
    p, m = dF.shape
    H = -beta * np.eye(p)
    if m == 0:
        return H
    Ft = svd_shift(dF, lam)
    inner = np.linalg.inv(Ft.T @ Ft)
    if variant == "type1":
        return H + (dS + beta * Ft) @ inner @ Ft.T
    return H + (dS + beta * dF) @ inner @ dF.T


# --------------------------------------------------------------------------
# stabilization


@dataclass
class StabilizedBasis:
    """Outcome of the thresholded Gram-Schmidt pass over ``dF`` columns.

    ``kept`` lists surviving column positions (oldest first) and ``fhat`` the
    matching orthogonalized vectors, one column each.
    """

    kept: list[int]
    fhat: np.ndarray
    discarded: list[int] = field(default_factory=list)

    def projector(self, upto: int | None = None) -> np.ndarray:
        """``Q = sum_d fhat_d fhat_d^T / (fhat_d^T fhat_d)`` over the first ``upto`` survivors."""
        F = self.fhat[:, : len(self.kept) if upto is None else upto]
        return (F / np.sum(F * F, axis=0)) @ F.T


def stabilize(dF, tau: float) -> StabilizedBasis:
    """Keep ``dF[:, d]`` only if its component orthogonal to the survivors so far
    has norm at least ``||dF[:, d]|| / tau``.

    Columns that are exactly zero (or project to exactly zero) are always
    discarded. ``tau = inf`` keeps every column with a nonzero projection.
    """
    dF = np.atleast_2d(np.asarray(dF, dtype=float))
    p, m = dF.shape
    kept: list[int] = []
    discarded: list[int] = []
    fhat = np.zeros((p, 0))
    for d in range(m):
        v = dF[:, d]
        h = v.copy()
        for i in range(fhat.shape[1]):
            u = fhat[:, i]
            h -= u * ((u @ v) / (u @ u))
        nh = np.linalg.norm(h)
        if nh > 0 and nh * tau >= np.linalg.norm(v):
            kept.append(d)
            fhat = np.column_stack([fhat, h])
        else:
            discarded.append(d)
    return StabilizedBasis(kept, fhat, discarded)


def h_recursive_secant(dS, dF, beta: float, fhat) -> np.ndarray:
    """Build ``H`` by rank-one updates ``H += (ds - H df) fhat^T / (fhat^T df)`` from ``-beta I``."""
    dS, dF, fhat = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (dS, dF, fhat))
    H = -beta * np.eye(dF.shape[0])
    for d in range(dF.shape[1]):
        df, ds, fh = dF[:, d], dS[:, d], fhat[:, d]
        H = H + np.outer(ds - H @ df, fh) / (fh @ df)
    return H


def h_recursive_projected(dS, dF, beta: float, fhat) -> np.ndarray:
    """Build ``H`` by rank-one updates in the orthogonalized pairs ``(shat, fhat)``.

    ``shat_d = ds_d - H_{d-1} Q_{d-1} df_d`` where ``Q_{d-1}`` projects onto the
    previous ``fhat``; each update is ``(shat - H fhat) fhat^T / (fhat^T fhat)``.
    """
    dS, dF, fhat = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (dS, dF, fhat))
    p, m = dF.shape
    H = -beta * np.eye(p)
    Q = np.zeros((p, p))
    for d in range(m):
        df, ds, fh = dF[:, d], dS[:, d], fhat[:, d]
        shat = ds - H @ (Q @ df)
        H = H + np.outer(shat - H @ fh, fh) / (fh @ fh)
        Q = Q + np.outer(fh, fh) / (fh @ fh)
    return H


# --------------------------------------------------------------------------
# Anderson-type mixing


@dataclass
class AtmState:
    """Histories of an Anderson-type run.

    ``s`` holds ``s_0 .. s_j`` (the current iterate last) and ``f`` holds
    ``f_0 .. f_j`` once the current residual has been pushed; both use the
    same global indices.
    """

    s: SequenceWindow
    f: SequenceWindow
    m: int
    Y: np.ndarray | None = None
    j: int = 0

    @classmethod
    def start(cls, s0, m: int, Y=None) -> AtmState:
        s0 = np.asarray(s0, dtype=float)
        p = s0.shape[0]
        s = SequenceWindow(p, m + 2)
        f = SequenceWindow(p, m + 2)
        s.push(s0)
        return cls(s, f, m, Y)

    @property
    def current(self) -> np.ndarray:
        return self.s[self.j]

    def m_j(self, method: str) -> int:
        if method == "ATM-RRE":
            return min(self.m, self.j - 1)
        return min(self.m, self.j)


def mmpe_matrix(p: int, m: int, seed: int) -> np.ndarray:
    """Seeded Gaussian ``p x m`` matrix with orthonormalized columns."""
    if m > p:
        raise ConfigError(f"history depth {m} exceeds the problem dimension {p}", "window")
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((p, m)))
    return Q


def _theta(method: str, state: AtmState, m_j: int, f_j, cfg: MethodConfig, lam: float) -> np.ndarray:
    j = state.j
    dS = delta_matrix(state.s, j - m_j, m_j)
    dF = delta_matrix(state.f, j - m_j, m_j)
    if method in ("AA", "StabilizedAA"):
        return ridge_solve(dF, cfg.metric, f_j, 0.0)
    if method == "RAA":
        # (dF~^T dF~)^{-1} dF^T f with dF~ = svd_shift(dF, lam) is exactly the
        # ridge solution; ridge_solve evaluates it through the same SVD
        return ridge_solve(dF, cfg.metric, f_j, lam)
    if method == "ATM-RRE":
        # the second differences that end at s_j; one step behind the
        # residual window, so no future iterate is needed
        Y = delta2_matrix(state.s, j - m_j - 1, m_j)
    elif method == "ATM-MPE":
        Y = dS
    elif method == "ATM-MMPE":
        Y = state.Y[:, :m_j]
    else:
        raise ConfigError(f"{method} is not an Anderson-type method", "method")
    return solve_theta_coupled(dF, f_j, Y=Y, metric=None, lam=lam)


def atm_scale(state: AtmState, cfg: MethodConfig) -> float:
    """Squared (metric) norm of the newest residual, the unit of a relative ``lam``."""
    if cfg.lambda_scale != "relative":
        return 1.0
    f = state.f[state.f.last_index]
    if cfg.metric is not None and cfg.method in ("AA", "RAA"):
        f = cfg.metric.whiten(f)
    return float(f @ f)


def atm_candidate(state: AtmState, f_j, cfg: MethodConfig, lam: float = 0.0, m_j: int | None = None) -> np.ndarray:
    """Next iterate from the current histories for a given ``lam`` (pure).

    ``state.f`` must already hold ``f_j``.
    """
    method = cfg.method
    j = state.j
    s_j = state.s[j]
    m_j = state.m_j(method) if m_j is None else m_j
    if m_j <= 0:
        return s_j + cfg.mixing_beta * f_j
    dS = delta_matrix(state.s, j - m_j, m_j)
    dF = delta_matrix(state.f, j - m_j, m_j)
    if method == "RAA" and cfg.raa_variant == "type1":
        view = QuasiNewtonMatrixView(dS, dF, cfg.mixing_beta, lam, "type1")
        return s_j - view.apply(f_j)
    theta = _theta(method, state, m_j, f_j, cfg, lam)
    s_bar = s_j - dS @ theta
    f_bar = f_j - dF @ theta
    return s_bar + cfg.mixing_beta * f_bar


def atm_next(state: AtmState, f_j, cfg: MethodConfig, lam: float = 0.0) -> tuple[np.ndarray, str]:
    """:func:`atm_candidate` with the singular-system fallback.

    On a singular mixing system the oldest history column is dropped and the
    step retried once; if that fails too the damped Picard step is taken.
    Returns the iterate and ``""``, ``"dropped"`` or ``"damped"``.
    """
    m_j = state.m_j(cfg.method)
    for attempt, size in enumerate((m_j, m_j - 1)):
        if attempt and size < 1:
            break
        try:
            with np.errstate(all="ignore"):
                out = atm_candidate(state, f_j, cfg, lam, size)
            if np.all(np.isfinite(out)):
                return out, ("dropped" if attempt else "")
        except (SingularSystem, np.linalg.LinAlgError):
            pass
    return state.s[state.j] + cfg.mixing_beta * f_j, "damped"


def atm_step(state: AtmState, g_value, cfg: MethodConfig, lam: float = 0.0) -> tuple[AtmState, np.ndarray]:
    """Advance the histories by one iteration given ``g_value = G(s_j)``.

    Returns the (mutated) state and ``s_{j+1}``, which is also appended to
    the iterate history.
    """
    s_j = state.s[state.j]
    f_j = np.asarray(g_value, dtype=float) - s_j
    state.f.push(f_j)
    nxt, _ = atm_next(state, f_j, cfg, lam)
    state.s.push(nxt)
    state.j += 1
    return state, nxt


def stabilized_step(dS, dF, f_j, s_j, beta: float, tau: float) -> tuple[np.ndarray, StabilizedBasis]:
    """One stabilized Anderson step ``s_j - H f_j`` built from the surviving columns."""
    basis = stabilize(dF, tau)
    dS = np.atleast_2d(np.asarray(dS, dtype=float))
    dF = np.atleast_2d(np.asarray(dF, dtype=float))
    view = QuasiNewtonMatrixView(dS[:, basis.kept], dF[:, basis.kept], beta)
    return np.asarray(s_j, dtype=float) - view.apply(f_j), basis


def run_atm(problem: FixedPointProblem, cfg: MethodConfig) -> RunRecord:
    """Anderson-type mixing; ``cfg.method`` picks the weights.

    ``AA`` uses least-squares weights on the residual differences, ``RAA``
    their ridge-regularized form with ``lam`` from ``cfg.reg``, and the
    ``ATM-*`` methods the coupled-sequence weights with ``Y`` equal to the
    second differences, the first differences or a fixed random matrix.
    """
    if cfg.method not in ANDERSON:
        raise ConfigError(f"{cfg.method} is not an Anderson-type method", "method")
    Y = mmpe_matrix(problem.dim, cfg.window, cfg.seed) if cfg.method == "ATM-MMPE" else None
    state = AtmState.start(problem.initial_guess, cfg.window, Y)
    tr = Tracker(problem, cfg)
    image = None
    policy = cfg.reg
    try:
        while True:
            s_j = state.s[state.j]
            g = image if image is not None else tr.evaluate(s_j)
            image = None
            f_j = g - s_j
            state.f.push(f_j)
            m_j = state.m_j(cfg.method)
            if m_j <= 0 or (policy.kind == "fixed" and policy.value == 0):
                nxt, _ = atm_next(state, f_j, cfg, 0.0)
            elif policy.kind == "fixed":
                nxt, _ = atm_next(state, f_j, cfg, policy.value * atm_scale(state, cfg))
            elif policy.kind == "gcv":
                scale = atm_scale(state, cfg)
                dF = delta_matrix(state.f, state.j - m_j, m_j)
                if cfg.metric is not None:
                    dF, y = cfg.metric.whiten(dF), cfg.metric.whiten(f_j)
                else:
                    y = f_j
                try:
                    lam = gcv_select(dF / np.sqrt(scale) if scale > 0 else dF, y, policy.grid)
                except DegenerateTrace:
                    lam = policy.grid[-1]
                tr.note_lambda(lam)
                nxt, _ = atm_next(state, f_j, cfg, lam * scale)
            else:
                scale = atm_scale(state, cfg)
                candidates = []
                for lam in policy.grid:
                    try:
                        with np.errstate(all="ignore"):
                            c = atm_candidate(state, f_j, cfg, lam * scale)
                    except (ShanksError, np.linalg.LinAlgError):
                        continue
                    if np.all(np.isfinite(c)):
                        candidates.append((lam, c))
                picked = tr.select(candidates) if candidates else None
                if picked is None:
                    nxt, _ = atm_next(state, f_j, cfg, 0.0)
                else:
                    _, nxt, image = picked
            state.s.push(nxt)
            state.j += 1
            tr.record.iterations = state.j
    except Stop:
        pass
    return tr.done()


def run_aa(problem: FixedPointProblem, cfg: MethodConfig) -> RunRecord:
    """Classical (``AA``) or regularized (``RAA``) Anderson acceleration."""
    if cfg.method not in ("AA", "RAA"):
        cfg = cfg.with_(method="AA", reg=None)
    return run_atm(problem, cfg)


def run_stabilized_aa(problem: FixedPointProblem, cfg: MethodConfig) -> RunRecord:
    """Anderson acceleration over the residual differences that survive :func:`stabilize`.

    With no survivor the step is the damped Picard step ``s_j + beta f_j``.
    """
    m = cfg.window
    state = AtmState.start(problem.initial_guess, m)
    tr = Tracker(problem, cfg.with_(method="StabilizedAA") if cfg.method != "StabilizedAA" else cfg)
    beta = cfg.mixing_beta
    try:
        while True:
            j = state.j
            s_j = state.s[j]
            f_j = tr.evaluate(s_j) - s_j
            state.f.push(f_j)
            m_j = min(m, j)
            if m_j == 0:
                nxt = s_j + beta * f_j
            else:
                dS = delta_matrix(state.s, j - m_j, m_j)
                dF = delta_matrix(state.f, j - m_j, m_j)
                try:
                    with np.errstate(all="ignore"):
                        nxt, _ = stabilized_step(dS, dF, f_j, s_j, beta, cfg.tau)
                    if not np.all(np.isfinite(nxt)):
                        raise SingularSystem("non-finite step")
                except (SingularSystem, np.linalg.LinAlgError):
                    nxt = s_j + beta * f_j
            state.s.push(nxt)
            state.j += 1
            tr.record.iterations = state.j
    except Stop:
        pass
    return tr.done()
