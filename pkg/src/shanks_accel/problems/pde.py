"""Finite-difference Picard maps on the unit square.

Both problems live on a uniform grid with spacing ``h = 1/grid_n`` and
``(grid_n - 1)**2`` interior unknowns ordered with ``x`` fastest. Diffusion
uses the five-point flux form, convection ``u_x`` a centered difference.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import LinearSolveFailed
from .base import FixedPointProblem

# (q, dq/du) pairs; "const" is the linear reduction used in tests
DIFFUSIVITIES = {
    "q1u2": (lambda u: 1.0 + u**2, lambda u: 2.0 * u),
    "q1u4": (lambda u: 1.0 + u**4, lambda u: 4.0 * u**3),
    "const": (lambda u: np.ones_like(u), lambda u: np.zeros_like(u)),
}


class Grid:
    def __init__(self, grid_n: int):
        if grid_n < 8:
            raise ValueError(f"grid_n must be at least 8, got {grid_n}")
        self.n = grid_n
        self.h = 1.0 / grid_n
        self.m = grid_n - 1
        self.nodes = np.linspace(0.0, 1.0, grid_n + 1)
        # full grid arrays indexed [iy, ix]
        self.Y, self.X = np.meshgrid(self.nodes, self.nodes, indexing="ij")

    @property
    def size(self) -> int:
        return self.m * self.m

    def interior(self, full: np.ndarray) -> np.ndarray:
        return full[1:-1, 1:-1].reshape(-1)

    def embed(self, u: np.ndarray, boundary: np.ndarray) -> np.ndarray:
        """Interior vector plus boundary values on the full ``(n+1)^2`` grid."""
        full = boundary.copy()
        full[1:-1, 1:-1] = u.reshape(self.m, self.m)
        return full


def _assemble(grid: Grid, qfull: np.ndarray, ufull_boundary: np.ndarray):
    """Matrix of ``-div(q grad v) + v_x`` on the interior and the boundary load.

    ``qfull`` holds nodal diffusivities on the full grid; face values are
    harmonic means. The returned load carries the Dirichlet data of
    ``ufull_boundary`` to the right-hand side.
    """
    m, h = grid.m, grid.h
    h2 = h * h
    qe = 2.0 * qfull[1:-1, 1:-1] * qfull[1:-1, 2:] / (qfull[1:-1, 1:-1] + qfull[1:-1, 2:])
    qw = 2.0 * qfull[1:-1, 1:-1] * qfull[1:-1, :-2] / (qfull[1:-1, 1:-1] + qfull[1:-1, :-2])
    qn = 2.0 * qfull[1:-1, 1:-1] * qfull[2:, 1:-1] / (qfull[1:-1, 1:-1] + qfull[2:, 1:-1])
    qs = 2.0 * qfull[1:-1, 1:-1] * qfull[:-2, 1:-1] / (qfull[1:-1, 1:-1] + qfull[:-2, 1:-1])
    conv = 1.0 / (2.0 * h)
    ce = -qe / h2 + conv
    cw = -qw / h2 - conv
    cn = -qn / h2
    cs = -qs / h2
    diag = (qe + qw + qn + qs) / h2

    idx = np.arange(m * m).reshape(m, m)
    rows = [idx.ravel()]
    cols = [idx.ravel()]
    vals = [diag.ravel()]
    for coef, dy, dx in ((ce, 0, 1), (cw, 0, -1), (cn, 1, 0), (cs, -1, 0)):
        iy, ix = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
        jy, jx = iy + dy, ix + dx
        inside = (jy >= 0) & (jy < m) & (jx >= 0) & (jx < m)
        rows.append(idx[inside])
        cols.append(idx[jy[inside], jx[inside]])
        vals.append(coef[inside])
    A = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m * m, m * m)
    )

    ub = ufull_boundary
    load = np.zeros((m, m))
    load[:, -1] -= ce[:, -1] * ub[1:-1, -1]
    load[:, 0] -= cw[:, 0] * ub[1:-1, 0]
    load[-1, :] -= cn[-1, :] * ub[-1, 1:-1]
    load[0, :] -= cs[0, :] * ub[0, 1:-1]
    return A, load.reshape(-1)


def _solve(A, rhs) -> np.ndarray:
    try:
        v = spla.splu(A).solve(rhs)
    except RuntimeError as exc:
        raise LinearSolveFailed(f"sparse factorization failed: {exc}") from exc
    if not np.all(np.isfinite(v)):
        raise LinearSolveFailed("inner solve produced non-finite values")
    return v


def exact_poisson_solution(x, y):
    return np.exp(-2.0 * x) * np.sin(3.0 * math.pi * y)


def poisson_source(x, y, variant: str):
    """Right-hand side that makes ``exp(-2x) sin(3 pi y)`` an exact solution.

    With ``u = exp(-2x) sin(3 pi y)`` one has ``lap u = (4 - 9 pi^2) u``, so
    ``f = -q(u) lap u - q'(u) |grad u|^2 + u_x``.
    """
    q, dq = DIFFUSIVITIES[variant]
    u = exact_poisson_solution(x, y)
    ux = -2.0 * u
    uy = 3.0 * math.pi * np.exp(-2.0 * x) * np.cos(3.0 * math.pi * y)
    return -q(u) * (4.0 - 9.0 * math.pi**2) * u - dq(u) * (ux**2 + uy**2) + ux


def make_nonlinear_poisson_problem(grid_n: int = 32, variant: str = "q1u2", initial_guess=None) -> FixedPointProblem:
    """Lagged-diffusivity Picard map for ``-div(q(u) grad u) + u_x = f``.

    ``G(u)`` solves the linear problem with ``q`` frozen at ``u``. Dirichlet
    data and ``f`` come from the exact solution ``exp(-2x) sin(3 pi y)``, which
    is attached (sampled on the interior nodes) as ``reference_solution``.
    ``variant`` is ``"q1u2"`` (``q = 1 + u^2``), ``"q1u4"`` (``q = 1 + u^4``)
    or ``"const"`` (``q = 1``, making ``G`` affine).
    """
    if variant not in DIFFUSIVITIES:
        raise ValueError(f"unknown variant {variant!r}; choose from {sorted(DIFFUSIVITIES)}")
    grid = Grid(grid_n)
    q, _ = DIFFUSIVITIES[variant]
    exact_full = exact_poisson_solution(grid.X, grid.Y)
    boundary = exact_full.copy()
    boundary[1:-1, 1:-1] = 0.0
    f = grid.interior(poisson_source(grid.X, grid.Y, variant))

    def G(u):
        full = grid.embed(u, boundary)
        A, load = _assemble(grid, q(full), boundary)
        return _solve(A, f + load)

    s0 = np.zeros(grid.size) if initial_guess is None else initial_guess
    return FixedPointProblem(
        dim=grid.size,
        evaluate=G,
        initial_guess=s0,
        reference_solution=grid.interior(exact_full),
        name=f"poisson-{variant}-{grid_n}",
    )


def make_bratu_problem(grid_n: int = 32, lambda_b: float = 1.0, initial_guess=None) -> FixedPointProblem:
    """Picard map for ``-lap u + u_x + lambda_b exp(u) = 0`` with zero boundary values.

    ``G(u) = A^{-1}(-lambda_b exp(u))`` where ``A`` discretizes ``-lap + d/dx``
    and is factored once.
    """
    grid = Grid(grid_n)
    zero = np.zeros_like(grid.X)
    A, _ = _assemble(grid, np.ones_like(grid.X), zero)
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise LinearSolveFailed(f"sparse factorization failed: {exc}") from exc
    lam = float(lambda_b)

    def G(u):
        with np.errstate(over="ignore"):
            rhs = -lam * np.exp(u)
        if not np.all(np.isfinite(rhs)):
            raise LinearSolveFailed("right-hand side overflowed")
        return lu.solve(rhs)

    s0 = np.zeros(grid.size) if initial_guess is None else initial_guess
    return FixedPointProblem(
        dim=grid.size,
        evaluate=G,
        initial_guess=s0,
        known_solution=np.zeros(grid.size) if lam == 0 else None,
        name=f"bratu-{lam:g}-{grid_n}",
    )
