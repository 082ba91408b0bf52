"""Benchmark fixed-point problems."""

from .base import FixedPointProblem
from .linear import make_linear_problem, random_linear_problem
from .pagerank import (
    SparseStochasticMatrix,
    ingest_matrix_market,
    make_pagerank_problem,
    random_stochastic_matrix,
)
from .pde import make_bratu_problem, make_nonlinear_poisson_problem

__all__ = [
    "FixedPointProblem",
    "SparseStochasticMatrix",
    "ingest_matrix_market",
    "make_bratu_problem",
    "make_linear_problem",
    "make_nonlinear_poisson_problem",
    "make_pagerank_problem",
    "random_linear_problem",
    "random_stochastic_matrix",
]
