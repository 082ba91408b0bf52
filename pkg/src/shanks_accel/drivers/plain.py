"""The unaccelerated baseline ``s_{j+1} = G(s_j)``."""

from __future__ import annotations

from ..problems.base import FixedPointProblem
from .config import MethodConfig, RunRecord
from .tracking import Stop, Tracker


def run_plain(problem: FixedPointProblem, cfg: MethodConfig) -> RunRecord:
    """Undamped Picard iteration (``cfg.mixing_beta`` is ignored)."""
    tr = Tracker(problem, cfg, method="PlainFixedPoint")
    x = problem.initial_guess.copy()
    try:
        while True:
            x = tr.evaluate(x)
            tr.record.iterations += 1
    except Stop:
        pass
    return tr.done()
