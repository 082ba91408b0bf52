"""Affine fixed-point iterations ``s -> M s + b``."""

from __future__ import annotations

import numpy as np

from ..errors import SingularProblem
from .base import FixedPointProblem


def make_linear_problem(M, b, s0, name: str = "linear") -> FixedPointProblem:
    """``G(s) = M s + b`` with the solution ``(I - M)^{-1} b`` attached.

    The attached solution is the limit when the spectral radius of ``M`` is
    below one and the antilimit otherwise.

    Raises:
        SingularProblem: ``cond(I - M) > 1e12``.
    """
    M = np.array(M, dtype=float, ndmin=2)
    b = np.asarray(b, dtype=float).reshape(-1)
    p = b.shape[0]
    if M.shape != (p, p):
        raise ValueError(f"M has shape {M.shape}, expected ({p}, {p})")
    A = np.eye(p) - M
    cond = np.linalg.cond(A)
    if not cond <= 1e12:
        raise SingularProblem(f"I - M has condition estimate {cond:.3g}")
    solution = np.linalg.solve(A, b)
    return FixedPointProblem(
        dim=p,
        evaluate=lambda s: M @ s + b,
        initial_guess=s0,
        known_solution=solution,
        name=name,
    )


def random_linear_problem(p: int, spectral_radius: float, rng: np.random.Generator, name: str = "linear") -> FixedPointProblem:
    """Gaussian ``M`` rescaled to the requested spectral radius, Gaussian ``b`` and ``s0``.

    Draws are repeated until ``I - M`` passes the conditioning check.
    """
    for _ in range(100):
        M = rng.standard_normal((p, p))
        M *= spectral_radius / np.max(np.abs(np.linalg.eigvals(M)))
        b = rng.standard_normal(p)
        s0 = rng.standard_normal(p)
        try:
            return make_linear_problem(M, b, s0, name=name)
        except SingularProblem:
            continue
    raise SingularProblem("could not draw a well-posed linear problem")
