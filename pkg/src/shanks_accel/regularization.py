"""Choosing the ridge parameter: fixed, grid search on the fixed-point residual, or GCV."""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import AllCandidatesFailed, DegenerateTrace


def default_grid() -> list[float]:
    """Seven log-equispaced values spanning ``[1e-12, 1]``."""
    return [10.0**e for e in range(-12, 1, 2)]


def _check_grid(grid: Sequence[float]) -> tuple[float, ...]:
    grid = tuple(float(g) for g in grid)
    if not grid:
        raise ValueError("grid must not be empty")
    if any(not math.isfinite(g) or g < 0 for g in grid):
        raise ValueError("grid values must be finite and non-negative")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be strictly increasing")
    return grid


@dataclass(frozen=True)
class RegularizationPolicy:
    """How a driver picks ``lam`` each time it extrapolates.

    ``kind`` is ``"fixed"`` (use ``value``), ``"grid"`` (try every grid value
    and keep the candidate with the smallest fixed-point residual) or
    ``"gcv"`` (generalized cross-validation on the coefficient problem).
    """

    kind: str = "fixed"
    value: float = 0.0
    grid: tuple[float, ...] = field(default_factory=lambda: tuple(default_grid()))

    def __post_init__(self):
        if self.kind not in ("fixed", "grid", "gcv"):
            raise ValueError(f"unknown regularization policy {self.kind!r}")
        if self.kind == "fixed":
            if not (math.isfinite(self.value) and self.value >= 0):
                raise ValueError("fixed lambda must be finite and non-negative")
        else:
            object.__setattr__(self, "grid", _check_grid(self.grid))

    @classmethod
    def fixed(cls, value: float = 0.0) -> RegularizationPolicy:
        return cls("fixed", value)

    @classmethod
    def grid_search(cls, grid: Sequence[float] | None = None) -> RegularizationPolicy:
        return cls("grid", grid=tuple(default_grid() if grid is None else grid))

    @classmethod
    def gcv(cls, grid: Sequence[float] | None = None) -> RegularizationPolicy:
        return cls("gcv", grid=tuple(default_grid() if grid is None else grid))


class GridSearchResult(NamedTuple):
    lam: float
    point: np.ndarray
    image: np.ndarray
    residual: float
    residuals: list[float]


def grid_search_select(
    candidates: Sequence[tuple[float, np.ndarray]],
    G: Callable[[np.ndarray], np.ndarray],
    max_workers: int = 1,
) -> GridSearchResult:
    """Pick the candidate ``t_lam`` with the smallest ``||G(t_lam) - t_lam||``.

    ``G`` is evaluated exactly once per candidate; the images are returned so
    drivers can reuse the winner's evaluation. Ties go to the larger ``lam``.
    With ``max_workers > 1`` (and a pure ``G``) evaluations run in a thread
    pool; the selection does not depend on completion order.

    Returns:
        ``(lam, point, image, residual, residuals)`` where ``residuals`` lists
        every candidate's residual in input order (``inf`` when non-finite).

    Raises:
        AllCandidatesFailed: no candidate produced a finite residual.
    """
    if not candidates:
        raise ValueError("no candidates to select from")

    def probe(t):
        with np.errstate(all="ignore"):
            image = np.asarray(G(t), dtype=float)
            r = float(np.linalg.norm(image - t))
        return image, (r if math.isfinite(r) else math.inf)

    points = [np.asarray(t, dtype=float) for _, t in candidates]
    if max_workers > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            probed = list(pool.map(probe, points))
    else:
        probed = [probe(t) for t in points]

    best = None
    for i, ((lam, _), (_, r)) in enumerate(zip(candidates, probed)):
        if not math.isfinite(r):
            continue
        if best is None:
            best = i
            continue
        r_best = probed[best][1]
        if r < r_best or (r == r_best and lam >= candidates[best][0]):
            best = i
    residuals = [r for _, r in probed]
    if best is None:
        raise AllCandidatesFailed("every grid-search candidate produced a non-finite residual")
    image, r = probed[best]
    return GridSearchResult(float(candidates[best][0]), points[best], image, r, residuals)


def gcv_scores(X, y, grid: Sequence[float]) -> np.ndarray:
    """The GCV functional ``p ||(I - A) y||^2 / trace(I - A)^2`` on a grid.

    ``A(lam) = X (X^T X + lam I)^{-1} X^T`` is handled through one thin SVD of
    ``X``. Grid points where ``trace(I - A)`` vanishes get ``nan``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float)
    p = X.shape[0]
    U, s, _ = np.linalg.svd(X, full_matrices=False)
    coef = U.T @ y
    # part of y outside range(U) is never fitted
    r_out = y - U @ coef
    outside = float(r_out @ r_out)
    s2 = s**2
    tol = s.max(initial=0.0) * max(X.shape) * np.finfo(float).eps
    scores = np.empty(len(grid))
    for i, lam in enumerate(grid):
        if lam > 0:
            fit = s2 / (s2 + lam)
        else:
            fit = (s > tol).astype(float)
        resid = outside + float(np.sum(((1.0 - fit) * coef) ** 2))
        trace = p - float(fit.sum())
        if trace <= 1e-12 * p:
            scores[i] = np.nan
        else:
            scores[i] = p * resid / trace**2
    return scores


def gcv_select(X, y, grid: Sequence[float] | None = None) -> float:
    """Grid value minimizing the GCV functional; ties go to the larger ``lam``.

    Grid points with a vanishing trace (square, full-rank ``X`` at ``lam = 0``)
    are skipped.

    Raises:
        DegenerateTrace: every grid point was skipped.
    """
    grid = _check_grid(default_grid() if grid is None else grid)
    scores = gcv_scores(X, y, grid)
    best = None
    for i, v in enumerate(scores):
        if np.isnan(v):
            continue
        if best is None or v <= scores[best]:
            best = i
    if best is None:
        raise DegenerateTrace("trace(I - A(lambda)) vanishes on the whole grid")
    return grid[best]
