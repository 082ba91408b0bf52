"""PageRank as a fixed-point problem, column-stochastic matrices and Matrix Market input."""

from __future__ import annotations

import os

import numpy as np
import scipy.sparse as sp

from ..errors import EmptyMatrix, IoError, NotStochastic, ParseError
from .base import FixedPointProblem

_STOCHASTIC_TOL = 1e-12


class SparseStochasticMatrix:
    """Column-stochastic ``n x n`` matrix stored as CSC plus a dangling-column mask.

    Dangling (all-zero) columns stand for the uniform column ``e / n``; that
    column is never materialized, :meth:`matvec` adds its contribution as
    ``(sum of u over dangling columns) / n`` in every entry.
    """

    def __init__(self, matrix, dangling=None):
        A = sp.csc_matrix(matrix, dtype=float)
        n, m = A.shape
        if n != m:
            raise NotStochastic(f"matrix must be square, got {A.shape}")
        if n == 0:
            raise EmptyMatrix("matrix has dimension zero")
        A.sum_duplicates()
        A.eliminate_zeros()
        if A.nnz and (not np.all(np.isfinite(A.data)) or A.data.min() < 0):
            raise NotStochastic("entries must be finite and non-negative")
        sums = np.asarray(A.sum(axis=0)).ravel()
        empty = np.diff(A.indptr) == 0
        if dangling is None:
            dangling = empty
        dangling = np.asarray(dangling, dtype=bool)
        if dangling.shape != (n,) or np.any(dangling & ~empty):
            raise NotStochastic("dangling columns must be exactly zero in the stored matrix")
        bad = ~dangling & (np.abs(sums - 1.0) > _STOCHASTIC_TOL)
        if np.any(bad):
            j = int(np.flatnonzero(bad)[0])
            raise NotStochastic(f"column {j} sums to {sums[j]!r}")
        self.n = n
        self.matrix = A
        self.dangling = dangling

    @classmethod
    def from_pattern(cls, pattern) -> SparseStochasticMatrix:
        """Scale each nonzero column of a non-negative matrix to unit sum."""
        A = sp.csc_matrix(pattern, dtype=float)
        A.sum_duplicates()
        A.eliminate_zeros()
        if A.nnz and A.data.min() < 0:
            raise NotStochastic("entries must be non-negative")
        sums = np.asarray(A.sum(axis=0)).ravel()
        scale = np.divide(1.0, sums, out=np.zeros_like(sums), where=sums > 0)
        return cls(A @ sp.diags(scale))

    def matvec(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        out = self.matrix @ u
        if self.dangling.any():
            out += u[self.dangling].sum() / self.n
        return out

    def toarray(self) -> np.ndarray:
        """Dense form with the dangling repair applied (small ``n`` only)."""
        D = self.matrix.toarray()
        D[:, self.dangling] = 1.0 / self.n
        return D

    def column_sums(self) -> np.ndarray:
        sums = np.asarray(self.matrix.sum(axis=0)).ravel()
        sums[self.dangling] = 1.0
        return sums


def make_pagerank_problem(S: SparseStochasticMatrix, alpha: float, u0=None, name: str = "pagerank") -> FixedPointProblem:
    """Power-method map ``G(u) = alpha S u + (1 - alpha)/n (e^T u) e``.

    ``u0`` defaults to the uniform vector.
    """
    if not 0 <= alpha < 1:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    n = S.n
    u0 = np.full(n, 1.0 / n) if u0 is None else np.asarray(u0, dtype=float)
    if u0.shape != (n,) or np.any(u0 < 0) or abs(u0.sum() - 1.0) > 1e-12:
        raise ValueError("u0 must be a non-negative vector summing to one")

    def G(u):
        return alpha * S.matvec(u) + (1.0 - alpha) / n * u.sum()

    return FixedPointProblem(dim=n, evaluate=G, initial_guess=u0, name=name)


def random_stochastic_matrix(
    n: int,
    nnz_per_col: int,
    rng: np.random.Generator,
    communities: int = 100,
    cross_fraction: float = 0.0005,
    dangling_fraction: float = 0.001,
    block_shift: int = 50,
) -> SparseStochasticMatrix:
    """Random link graph with community structure.

    The defaults pair up blocks of ``n / 100`` nodes that link only to each
    other, so ``S`` has eigenvalues near ``-1`` whose eigenvectors are
    concentrated on few nodes; started from a point mass the power method
    then needs close to ``log(tol) / log(alpha)`` steps.

    Nodes are split into ``communities`` equally sized blocks and a node in
    block ``b`` links into block ``(b + block_shift) % communities``, except for
    a ``cross_fraction`` of links per column that go anywhere. With
    ``block_shift = 0`` the chain mixes slowly between blocks; a nonzero shift
    makes the block graph cyclic, which puts eigenvalues of modulus close to one
    on the unit circle. Either way the power method converges at a rate close to
    ``alpha``. A small fraction of columns is left dangling.
    """
    if n < 2 or nnz_per_col < 1:
        raise ValueError("need n >= 2 and nnz_per_col >= 1")
    communities = max(1, min(communities, n))
    block = np.arange(n) * communities // n
    starts = np.searchsorted(block, np.arange(communities))
    sizes = np.bincount(block, minlength=communities)
    rows, cols = [], []
    for j in range(n):
        if rng.random() < dangling_fraction:
            continue
        c = (block[j] + block_shift) % communities
        cnt = min(nnz_per_col, sizes[c])
        local = starts[c] + rng.choice(sizes[c], size=cnt, replace=False)
        if rng.random() < cross_fraction * nnz_per_col:
            local[0] = rng.integers(n)
        rows.append(local)
        cols.append(np.full(local.size, j))
    if not rows:
        raise EmptyMatrix("every column came out dangling")
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    A = sp.csc_matrix((np.ones(r.size), (r, c)), shape=(n, n))
    A.data[:] = 1.0  # collapse duplicate links
    return SparseStochasticMatrix.from_pattern(A)


# --------------------------------------------------------------------------
# Matrix Market


def _parse_header(line: str) -> tuple[str, str]:
    parts = line.strip().lower().split()
    if len(parts) != 5 or parts[0] != "%%matrixmarket" or parts[1] != "matrix":
        raise ParseError("not a Matrix Market matrix header", line=1)
    fmt, field, symmetry = parts[2:]
    if fmt != "coordinate":
        raise ParseError(f"only coordinate format is supported, got {fmt!r}", line=1)
    if field not in ("pattern", "real", "integer"):
        raise ParseError(f"unsupported field {field!r}", line=1)
    if symmetry not in ("general", "symmetric"):
        raise ParseError(f"unsupported symmetry {symmetry!r}", line=1)
    return field, symmetry


def ingest_matrix_market(path) -> SparseStochasticMatrix:
    """Read a coordinate ``.mtx`` file as a link graph.

    Entry ``(i, j)`` is a link from ``j`` to ``i``. Stored values are used as
    link weights (pattern files get weight one); each nonzero column is then
    scaled to unit sum and zero columns become dangling.

    Raises:
        ParseError: malformed content, with the offending line number.
        EmptyMatrix: zero dimension.
        IoError: the file cannot be read.
    """
    path = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise ParseError(f"not a text file: {exc}") from exc
    if not lines:
        raise ParseError("empty file", line=1)
    field, symmetry = _parse_header(lines[0])

    lineno = 1
    size = None
    for lineno in range(2, len(lines) + 1):
        text = lines[lineno - 1].strip()
        if text and not text.startswith("%"):
            size = text.split()
            break
    if size is None:
        raise ParseError("missing size line", line=lineno)
    try:
        nrows, ncols, nnz = (int(x) for x in size)
    except ValueError:
        raise ParseError("size line must hold three integers", line=lineno) from None
    if nrows < 0 or ncols < 0 or nnz < 0:
        raise ParseError("negative size", line=lineno)
    if nrows == 0 or ncols == 0:
        raise EmptyMatrix(f"matrix is {nrows} x {ncols}")
    if nrows != ncols:
        raise ParseError(f"link matrix must be square, got {nrows} x {ncols}", line=lineno)

    width = 2 if field == "pattern" else 3
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.ones(nnz)
    count = 0
    for lineno in range(lineno + 1, len(lines) + 1):
        text = lines[lineno - 1].strip()
        if not text or text.startswith("%"):
            continue
        if count == nnz:
            raise ParseError(f"more than the declared {nnz} entries", line=lineno)
        parts = text.split()
        if len(parts) != width:
            raise ParseError(f"expected {width} fields, got {len(parts)}", line=lineno)
        try:
            i, j = int(parts[0]), int(parts[1])
            v = float(parts[2]) if width == 3 else 1.0
        except ValueError:
            raise ParseError(f"cannot parse entry {text!r}", line=lineno) from None
        if not (1 <= i <= nrows and 1 <= j <= ncols):
            raise ParseError(f"index ({i}, {j}) out of range", line=lineno)
        if not np.isfinite(v) or v < 0:
            raise ParseError(f"link weight must be finite and non-negative, got {v!r}", line=lineno)
        rows[count], cols[count], vals[count] = i - 1, j - 1, v
        count += 1
    if count != nnz:
        raise ParseError(f"declared {nnz} entries, found {count}", line=len(lines))

    if symmetry == "symmetric":
        off = rows != cols
        rows, cols, vals = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
            np.concatenate([vals, vals[off]]),
        )
    A = sp.csc_matrix((vals, (rows, cols)), shape=(nrows, ncols))
    return SparseStochasticMatrix.from_pattern(A)
