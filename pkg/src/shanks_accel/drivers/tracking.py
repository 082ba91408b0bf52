"""Evaluation bookkeeping shared by every driver."""

from __future__ import annotations

import math
import time
from collections.abc import Sequence

import numpy as np

from ..errors import AllCandidatesFailed, ShanksError
from ..problems.base import FixedPointProblem
from ..regularization import grid_search_select
from .config import DIVERGENCE_LIMIT, MethodConfig, RunRecord, Status


class Stop(Exception):
    """Raised inside a driver loop once the run has reached a terminal status."""


class Tracker:
    """Evaluates ``G``, logs residuals and enforces tolerance, budget and divergence."""

    def __init__(self, problem: FixedPointProblem, cfg: MethodConfig, method: str | None = None):
        self.problem = problem
        self.cfg = cfg
        self.record = RunRecord(method or cfg.method)
        self._t0 = time.perf_counter()

    @property
    def count(self) -> int:
        return self.record.g_eval_count

    def _finish(self, status: Status, message: str, x=None) -> None:
        self.record.status = status
        self.record.message = message
        if x is not None:
            self.record.solution = np.array(x, dtype=float)
        raise Stop

    def _check_budget(self, needed: int = 1) -> None:
        if self.count + needed > self.cfg.max_g_evals:
            self._finish(Status.BUDGET_EXHAUSTED, f"no convergence within {self.cfg.max_g_evals} G-evaluations")

    def _log(self, x, r: float) -> None:
        self.record.residuals.append(r)
        self.record.solution = x
        if r < self.cfg.tol:
            self._finish(Status.CONVERGED, "", x)
        if not r <= DIVERGENCE_LIMIT:
            self._finish(Status.DIVERGED, f"residual {r:.3g} exceeds {DIVERGENCE_LIMIT:.0e}", x)
        self._check_budget()

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """``G(x)``; stops the run on convergence, divergence or an exhausted budget."""
        self._check_budget()
        if not np.all(np.isfinite(x)):
            self.record.residuals.append(math.inf)
            self._finish(Status.DIVERGED, "iterate has non-finite entries")
        try:
            with np.errstate(all="ignore"):
                g = self.problem(x)
                r = float(np.linalg.norm(g - x))
        except ShanksError as exc:
            self.record.residuals.append(math.inf)
            self._finish(Status.DIVERGED, f"G failed: {exc}")
        if not math.isfinite(r):
            r = math.inf
        self._log(np.array(x, dtype=float), r)
        return g

    def select(self, candidates: Sequence[tuple[float, np.ndarray]]):
        """Grid-search over candidate points, counting every probe.

        Losing probes are logged first and the winner last, so the newest
        residual always belongs to the point the driver continues from.
        Returns ``(lam, point, image)`` or ``None`` when every candidate failed.
        """
        self._check_budget(len(candidates))
        workers = self.cfg.max_workers if self.problem.pure else 1

        def G(t):
            try:
                return self.problem(t)
            except ShanksError:
                return np.full(self.problem.dim, np.nan)

        try:
            res = grid_search_select(candidates, G, max_workers=workers)
        except AllCandidatesFailed:
            self.record.residuals.extend(math.inf for _ in candidates)
            return None
        winner = next(i for i, (lam, _) in enumerate(candidates) if lam == res.lam)
        for i, r in enumerate(res.residuals):
            if i != winner:
                self.record.residuals.append(r)
        self.record.lambdas.append((self.count + 1, float(res.lam)))
        self._log(np.array(res.point, dtype=float), res.residual)
        return res.lam, res.point, res.image

    def note_lambda(self, lam: float) -> None:
        self.record.lambdas.append((self.count, float(lam)))

    def done(self) -> RunRecord:
        self.record.wall_ms = (time.perf_counter() - self._t0) * 1e3
        return self.record
