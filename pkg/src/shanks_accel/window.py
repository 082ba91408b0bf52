"""Rolling iterate histories and the difference matrices built from them.

Indices are global (the ``n`` in ``s_n``), never buffer offsets, so callers
can write ``w.delta_matrix(j - m, m)`` exactly as the recurrences read.
Differences are recomputed on every request; windows are tiny and the
continuous-updating drivers overwrite iterates in place.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .errors import OutOfWindow


class SequenceWindow:
    """The last ``capacity`` vectors of a sequence in ``R^dim``.

    >>> w = SequenceWindow(1, capacity=3)
    >>> for x in (1.0, 2.0, 4.0, 8.0):
    ...     _ = w.push([x])
    >>> w.first_index, w.last_index
    (1, 3)
    """

    def __init__(self, dim: int, capacity: int, first_index: int = 0):
        if dim < 1 or capacity < 1:
            raise ValueError("dim and capacity must be positive")
        self.dim = dim
        self.capacity = capacity
        self._items: deque[np.ndarray] = deque(maxlen=capacity)
        self._first = first_index

    def __len__(self) -> int:
        return len(self._items)

    @property
    def first_index(self) -> int:
        return self._first

    @property
    def last_index(self) -> int:
        """Global index of the newest vector (``first_index - 1`` when empty)."""
        return self._first + len(self._items) - 1

    def _checked(self, v) -> np.ndarray:
        v = np.array(v, dtype=float).reshape(-1)
        if v.shape[0] != self.dim:
            raise ValueError(f"expected a vector of length {self.dim}, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise ValueError("window entries must be finite")
        return v

    def push(self, v) -> int:
        """Append ``v`` (evicting the oldest if full); return its global index."""
        v = self._checked(v)
        if len(self._items) == self.capacity:
            self._first += 1
        self._items.append(v)
        return self.last_index

    def replace(self, index: int, v) -> None:
        """Overwrite the stored iterate with global index ``index``."""
        self._check_range(index, index)
        self._items[index - self._first] = self._checked(v)

    def clear(self, first_index: int = 0) -> None:
        self._items.clear()
        self._first = first_index

    def _check_range(self, lo: int, hi: int) -> None:
        if lo < self._first or hi > self.last_index or lo > hi + 1:
            raise OutOfWindow(
                f"indices {lo}..{hi} not available; window holds {self._first}..{self.last_index}"
            )

    def __getitem__(self, index: int) -> np.ndarray:
        self._check_range(index, index)
        return self._items[index - self._first]

    def matrix(self, start: int, cols: int) -> np.ndarray:
        """``[s_start, ..., s_{start+cols-1}]`` as a ``dim x cols`` array."""
        self._check_range(start, start + cols - 1)
        if cols == 0:
            return np.zeros((self.dim, 0))
        return np.column_stack([self._items[i - self._first] for i in range(start, start + cols)])


def delta_matrix(w: SequenceWindow, start: int, cols: int) -> np.ndarray:
    """Columns ``s_{start+j+1} - s_{start+j}`` for ``j < cols``."""
    S = w.matrix(start, cols + 1)
    return S[:, 1:] - S[:, :-1]


def delta2_matrix(w: SequenceWindow, start: int, cols: int) -> np.ndarray:
    """Second differences; evaluated as a difference of differences so it is
    bit-identical to applying :func:`delta_matrix` twice."""
    D = delta_matrix(w, start, cols + 1)
    return D[:, 1:] - D[:, :-1]


def stacked_delta(w: SequenceWindow, n: int, k: int, cols: int) -> np.ndarray:
    """Block matrix whose block row ``r`` is ``delta_matrix(w, n + r, cols)``."""
    _require_blocks(k)
    return np.vstack([delta_matrix(w, n + r, cols) for r in range(k)])


def stacked_delta2(w: SequenceWindow, n: int, k: int, cols: int) -> np.ndarray:
    """Block matrix whose block row ``r`` is ``delta2_matrix(w, n + r, cols)``."""
    _require_blocks(k)
    return np.vstack([delta2_matrix(w, n + r, cols) for r in range(k)])


def stacked_column(w: SequenceWindow, start: int, k: int) -> np.ndarray:
    """``(Ds_start, ..., Ds_{start+k-1})`` stacked into one vector of length ``k * dim``."""
    return stacked_delta(w, start, k, 1)[:, 0]


def _require_blocks(k: int) -> None:
    if k < 1:
        raise ValueError(f"block count must be positive, got {k}")
