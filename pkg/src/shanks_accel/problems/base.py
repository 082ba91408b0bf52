"""The fixed-point problem abstraction every driver works on."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np


@dataclass
class FixedPointProblem:
    """A map ``G: R^p -> R^p`` whose fixed point ``G(s) = s`` is sought.

    Attributes:
        dim: dimension ``p``.
        evaluate: the map ``G``.
        initial_guess: starting vector for the drivers.
        known_solution: exact (or antilimit) solution of ``G(s) = s``.
        reference_solution: a nearby vector that is not an exact fixed point,
            e.g. a continuous solution sampled on the grid.
        pure: ``G`` is deterministic and side-effect free, so it may be
            evaluated concurrently.
        name: label used in run records.
    """

    dim: int
    evaluate: Callable[[np.ndarray], np.ndarray]
    initial_guess: np.ndarray
    known_solution: np.ndarray | None = None
    reference_solution: np.ndarray | None = None
    pure: bool = True
    name: str = "problem"

    def __post_init__(self):
        self.initial_guess = np.asarray(self.initial_guess, dtype=float).reshape(-1)
        if self.initial_guess.shape[0] != self.dim:
            raise ValueError(f"initial guess has length {self.initial_guess.shape[0]}, expected {self.dim}")
        if self.known_solution is not None:
            self.known_solution = np.asarray(self.known_solution, dtype=float).reshape(-1)

    def __call__(self, s) -> np.ndarray:
        out = np.asarray(self.evaluate(np.asarray(s, dtype=float)), dtype=float)
        if out.shape != (self.dim,):
            raise ValueError(f"G returned shape {out.shape}, expected ({self.dim},)")
        return out

    def residual(self, s) -> np.ndarray:
        """``F(s) = G(s) - s``."""
        s = np.asarray(s, dtype=float)
        return self(s) - s
