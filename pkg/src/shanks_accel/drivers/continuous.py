"""Continuous-updating extrapolation: every Picard step is replaced by an extrapolation."""

from __future__ import annotations

from ..errors import ConfigError
from ..problems.base import FixedPointProblem
from ..shanks import Strategy
from ..window import SequenceWindow
from .config import MethodConfig, RunRecord
from .restarted import extrapolate_with_policy
from .tracking import Stop, Tracker


def run_continuous(problem: FixedPointProblem, cfg: MethodConfig) -> RunRecord:
    """Extrapolate after every new Picard iterate and continue from the result.

    At step ``j`` the Picard iterate ``G(s_j)`` joins the window as a provisional
    ``s_{j+1}`` and the last ``m_j + 2`` entries (``m_j = min(m, j)``) feed a
    minimal-residual extrapolation, which then overwrites ``s_{j+1}``. The
    first step is a plain Picard step. With ``combine="t"`` the combination
    includes the provisional iterate; ``"t_tilde"`` uses the window one step
    earlier, so the provisional iterate enters only through the coefficients.
    """
    strategy = cfg.coefficient_strategy()
    if strategy is None or strategy.kind.topological:
        raise ConfigError(f"{cfg.method} needs a minimal-residual coefficient strategy", "method")
    if strategy.kind is Strategy.MINRES_ALPHA_SVD:
        raise ConfigError("continuous updating uses alpha or beta weights, not SVD weights", "strategy")
    m = cfg.window
    tr = Tracker(problem, cfg)
    w = SequenceWindow(problem.dim, m + 2)
    w.push(problem.initial_guess)
    image = None
    j = 0
    try:
        while True:
            g = image if image is not None else tr.evaluate(w[j])
            w.push(g)
            image = None
            m_j = min(m, j)
            if m_j > 0:
                out = extrapolate_with_policy(tr, w, strategy, j - m_j, m_j)
                if out is not None:
                    point, image = out
                    w.replace(j + 1, point)
            j += 1
            tr.record.iterations = j
    except Stop:
        pass
    return tr.done()


def run_continuous_alpha(problem: FixedPointProblem, cfg: MethodConfig) -> RunRecord:
    """Continuous updating with sum-to-one ``alpha`` weights."""
    if cfg.method != "CU-Alpha" and cfg.strategy is None:
        cfg = cfg.with_(method="CU-Alpha")
    return run_continuous(problem, cfg)


def run_continuous_beta(problem: FixedPointProblem, cfg: MethodConfig) -> RunRecord:
    """Continuous updating with ``beta`` weights (reduced-rank type)."""
    if cfg.method != "CU-Beta" and cfg.strategy is None:
        cfg = cfg.with_(method="CU-Beta")
    return run_continuous(problem, cfg)
