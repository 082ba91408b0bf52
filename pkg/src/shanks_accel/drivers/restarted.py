"""Restarted extrapolation: short Picard cycles, each closed by one extrapolation."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, DegenerateTrace, ShanksError
from ..problems.base import FixedPointProblem
from ..regularization import RegularizationPolicy, gcv_select
from ..shanks import CoefficientStrategy, extrapolate, least_squares_operands, regularization_scale
from ..window import SequenceWindow
from .config import MethodConfig, RunRecord
from .tracking import Stop, Tracker


def _safe_extrapolate(w, strategy, n, k, lam, metric, combine):
    try:
        with np.errstate(all="ignore"):
            t = extrapolate(w, strategy, n, k, lam, metric, combine)
    except (ShanksError, np.linalg.LinAlgError):
        return None
    return t if np.all(np.isfinite(t)) else None


def gcv_lambda(
    w: SequenceWindow,
    strategy: CoefficientStrategy,
    n: int,
    k: int,
    policy: RegularizationPolicy,
    metric=None,
    scale: float = 1.0,
) -> float:
    """GCV choice of ``lam`` for the beta-type coefficient problem at ``s_n``.

    The grid is read in units of ``scale``: the returned value ``lam`` is
    optimal for the ridge parameter ``lam * scale``.
    """
    X, y = least_squares_operands(w, strategy.kind, n, k)
    if metric is not None:
        X, y = metric.whiten(X), metric.whiten(y)
    if scale > 0:
        X = X / np.sqrt(scale)
    try:
        return gcv_select(X, y, policy.grid)
    except DegenerateTrace:
        return policy.grid[-1]


def extrapolate_with_policy(
    tr: Tracker,
    w: SequenceWindow,
    strategy: CoefficientStrategy,
    n: int,
    k: int,
) -> tuple[np.ndarray, np.ndarray | None] | None:
    """Extrapolate from ``s_n`` choosing ``lam`` by the configured policy.

    Returns ``(point, image)`` where ``image`` is ``G(point)`` when grid
    search already evaluated it, else ``None``. Returns ``None`` when no
    extrapolation could be formed.
    """
    cfg = tr.cfg
    policy = cfg.reg
    scale = 1.0
    if cfg.lambda_scale == "relative" and not (policy.kind == "fixed" and policy.value == 0):
        scale = regularization_scale(w, strategy, n, k, cfg.metric)
    if policy.kind == "grid":
        candidates = []
        for lam in policy.grid:
            t = _safe_extrapolate(w, strategy, n, k, lam * scale, cfg.metric, cfg.combine)
            if t is not None:
                candidates.append((lam, t))
        if not candidates:
            return None
        picked = tr.select(candidates)
        if picked is None:
            return None
        _, point, image = picked
        return point, image
    if policy.kind == "gcv":
        lam = gcv_lambda(w, strategy, n, k, policy, cfg.metric, scale)
        tr.note_lambda(lam)
    else:
        lam = policy.value
    t = _safe_extrapolate(w, strategy, n, k, lam * scale, cfg.metric, cfg.combine)
    return None if t is None else (t, None)


def run_restarted(problem: FixedPointProblem, cfg: MethodConfig) -> RunRecord:
    """Cycles of ``l_k - 1`` Picard steps followed by one extrapolation.

    The extrapolated point starts the next cycle. When no extrapolation can be
    formed (e.g. a numerically singular coefficient system at ``lam = 0``) the
    cycle continues from its last Picard iterate instead. With grid search the
    winning probe's ``G`` value is reused as the first step of the next cycle.
    """
    strategy = cfg.coefficient_strategy()
    if strategy is None:
        raise ConfigError(f"{cfg.method} is not a restarted method", "method")
    kind = strategy.kind
    k = kind.k_for_history(cfg.window)
    length = kind.iterates_needed(k)
    tr = Tracker(problem, cfg)
    w = SequenceWindow(problem.dim, length)
    x = problem.initial_guess.copy()
    gx = None
    try:
        while True:
            w.clear()
            w.push(x)
            g = gx if gx is not None else tr.evaluate(x)
            for i in range(1, length):
                w.push(g)
                if i < length - 1:
                    g = tr.evaluate(w[i])
            out = extrapolate_with_policy(tr, w, strategy, 0, k)
            tr.record.iterations += 1
            if out is None:
                x, gx = w[length - 1].copy(), None
            else:
                x, gx = out
    except Stop:
        pass
    return tr.done()
