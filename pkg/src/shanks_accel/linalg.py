"""Small dense kernels behind every coefficient solver.

Windows never exceed a handful of columns, so everything here is dense and
cheap. Solves work on the metric-whitened operand ``W`` rather than on its
Gram matrix: unregularized ones by QR, regularized ones (``lam > 0``) through
the SVD of ``W``, where ``(W^T W + lam I)^{-1}`` is diagonal. Forming the
shifted Gram matrix instead loses about ``eps * ||W||^2 / lam`` relative
accuracy, which is ruinous for the small ``lam`` values that matter most.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DegenerateNormalization, SingularSystem

# Condition numbers above this are treated as singular. For the QR route it is
# applied to the factored (whitened) matrix itself, not to its Gram matrix.
COND_LIMIT = 1e14


@dataclass(frozen=True, eq=False)
class MetricSpec:
    """The (semi-)norm ``||x||_M^2 = x^T M x`` used by the residual objectives.

    Build instances with :meth:`identity`, :meth:`explicit` or :meth:`factor`.
    ``kind`` is one of ``"identity"``, ``"explicit"`` and ``"factor"``; for a
    factor ``matrix`` holds ``Y`` with ``M = Y Y^T``.
    """

    kind: str = "identity"
    matrix: np.ndarray | None = None

    @classmethod
    def identity(cls) -> MetricSpec:
        return cls("identity", None)

    @classmethod
    def explicit(cls, M) -> MetricSpec:
        """Wrap an explicit symmetric positive semi-definite matrix.

        Raises:
            ValueError: if ``M`` is not symmetric to 1e-12 relative, has an
                eigenvalue below ``-1e-12 * ||M||`` or contains non-finite entries.
        """
        M = np.array(M, dtype=float, ndmin=2)
        if M.shape[0] != M.shape[1]:
            raise ValueError(f"metric must be square, got {M.shape}")
        if not np.all(np.isfinite(M)):
            raise ValueError("metric has non-finite entries")
        scale = np.linalg.norm(M, 2)
        if np.linalg.norm(M - M.T, 2) > 1e-12 * max(scale, np.finfo(float).tiny):
            raise ValueError("metric is not symmetric")
        if scale > 0 and np.linalg.eigvalsh(M).min() < -1e-12 * scale:
            raise ValueError("metric is not positive semi-definite")
        return cls("explicit", M)

    @classmethod
    def factor(cls, Y) -> MetricSpec:
        """Metric ``M = Y Y^T``; rank of ``Y`` is the caller's business."""
        Y = np.array(Y, dtype=float, ndmin=2)
        if Y.ndim != 2:
            raise ValueError("metric factor must be a matrix")
        return cls("factor", Y)

    @property
    def dim(self) -> int | None:
        return None if self.matrix is None else self.matrix.shape[0]

    def whiten(self, X: np.ndarray) -> np.ndarray:
        """Return ``W`` with ``W^T W = X^T M X`` (works for vectors too)."""
        X = np.asarray(X, dtype=float)
        if self.kind == "identity":
            return X
        if self.matrix.shape[0] != X.shape[0]:
            raise ValueError(
                f"metric of size {self.matrix.shape[0]} does not match operand with {X.shape[0]} rows"
            )
        if self.kind == "factor":
            return self.matrix.T @ X
        return self._root().T @ X

    def _root(self) -> np.ndarray:
        root = self.__dict__.get("_cached_root")
        if root is None:
            w, V = np.linalg.eigh(self.matrix)
            root = V * np.sqrt(np.clip(w, 0.0, None))
            object.__setattr__(self, "_cached_root", root)
        return root

    def matrix_form(self, p: int) -> np.ndarray:
        """Materialize ``M`` as a dense ``p x p`` array (tests and small problems only)."""
        if self.kind == "identity":
            return np.eye(p)
        if self.kind == "factor":
            return self.matrix @ self.matrix.T
        return self.matrix.copy()


IDENTITY = MetricSpec.identity()


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def matrix_condition(W: np.ndarray) -> float:
    """2-norm condition number of a tall matrix (``inf`` when rank deficient)."""
    if W.shape[1] == 0:
        return 1.0
    if W.shape[0] < W.shape[1]:
        return np.inf
    s = np.linalg.svd(W, compute_uv=False)
    if s[-1] == 0.0 or not np.isfinite(s[0]):
        return np.inf
    return float(s[0] / s[-1])


def least_squares(W: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Full-rank least squares ``argmin ||z - W b||`` via Householder QR.

    Raises:
        SingularSystem: if ``cond(W)`` exceeds :data:`COND_LIMIT`.
    """
    cond = matrix_condition(W)
    if not cond <= COND_LIMIT:
        raise SingularSystem(f"least-squares condition estimate {cond:.3g} exceeds {COND_LIMIT:.0e}")
    Q, R = np.linalg.qr(W, mode="reduced")
    return sla.solve_triangular(R, Q.T @ z, lower=False)


def _solve_spd_shift(A: np.ndarray, rhs: np.ndarray, lam: float) -> np.ndarray:
    B = A + lam * np.eye(A.shape[0])
    try:
        c, low = sla.cho_factor(B, lower=True, check_finite=True)
        return sla.cho_solve((c, low), rhs)
    except np.linalg.LinAlgError:
        # Semi-definite metrics can leave B indefinite only through rounding.
        return np.linalg.solve(B, rhs)


def _svd_ridge(W: np.ndarray, z: np.ndarray, lam: float) -> np.ndarray:
    U, s, Vt = np.linalg.svd(W, full_matrices=False)
    return Vt.T @ (s / (s * s + lam) * (U.T @ z))


def ridge_solve(X, metric: MetricSpec | None, y, lam: float) -> np.ndarray:
    """Minimize ``||y - X b||_M^2 + lam ||b||^2`` over ``b``.

    Args:
        X: ``p x k`` design matrix.
        metric: the metric ``M``; ``None`` means identity.
        y: right-hand side of length ``p``.
        lam: ridge parameter, ``lam >= 0``.

    Returns:
        The length-``k`` minimizer, i.e. the solution of
        ``(X^T M X + lam I) b = X^T M y``.

    Raises:
        SingularSystem: ``lam == 0`` and ``X^T M X`` is numerically singular.
    """
    if lam < 0 or not np.isfinite(lam):
        raise ValueError(f"lambda must be a finite non-negative number, got {lam}")
    metric = metric or IDENTITY
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float)
    W = metric.whiten(X)
    z = metric.whiten(y)
    if lam == 0:
        return least_squares(W, z)
    return _svd_ridge(W, z, lam)


def sum_constrained_solve(A, lam: float) -> np.ndarray:
    """Return ``(A + lam I)^{-1} e / (e^T (A + lam I)^{-1} e)``.

    This is the minimizer of ``g^T A g + lam ||g||^2`` subject to ``sum(g) == 1``.

    Raises:
        SingularSystem: ``lam == 0`` and ``cond(A) > 1e14``.
        DegenerateNormalization: the normalizing sum is negligible.
    """
    A = np.asarray(A, dtype=float)
    if lam < 0 or not np.isfinite(lam):
        raise ValueError(f"lambda must be a finite non-negative number, got {lam}")
    n = A.shape[0]
    B = A + lam * np.eye(n)
    if lam == 0:
        cond = np.linalg.cond(B)
        if not cond <= COND_LIMIT:
            raise SingularSystem(f"condition estimate {cond:.3g} exceeds {COND_LIMIT:.0e}")
        z = np.linalg.solve(B, np.ones(n))
    else:
        z = _solve_spd_shift(A, np.ones(n), lam)
    return _normalize_sum(z)


def _normalize_sum(z: np.ndarray) -> np.ndarray:
    total = z.sum()
    if not abs(total) >= 1e-14 * np.abs(z).sum() or not np.isfinite(total):
        raise DegenerateNormalization("sum-to-one normalization is numerically unachievable")
    alpha = z / total
    alpha[-1] = 1.0 - np.sum(alpha[:-1])
    return alpha


def sum_constrained_factored(W, lam: float) -> np.ndarray:
    """:func:`sum_constrained_solve` for ``A = W^T W`` without forming ``A`` (``lam > 0``)."""
    if not lam > 0 or not np.isfinite(lam):
        raise ValueError(f"lambda must be positive and finite, got {lam}")
    W = _as_matrix(W)
    n = W.shape[1]
    # only Vt is needed; the thin SVD already has all n rows of it unless W is wide
    _, s, Vt = np.linalg.svd(W, full_matrices=W.shape[0] < n)
    d = np.full(n, float(lam))
    d[: s.size] += s * s
    z = Vt.T @ ((Vt @ np.ones(n)) / d)
    return _normalize_sum(z)


def constrained_least_squares(W) -> np.ndarray:
    """``argmin ||W g||`` subject to ``sum(g) == 1`` without forming ``W^T W``.

    The constraint is eliminated by ``g = (z, 1 - sum(z))`` and the reduced
    problem is solved by QR. This is the ``lam == 0`` companion of
    :func:`sum_constrained_solve` and also works when ``W`` has an exact
    kernel direction (the Shanks-kernel case), where ``W^T W`` is singular.
    """
    W = _as_matrix(W)
    last = W[:, -1]
    B = W[:, :-1] - last[:, None]
    z = least_squares(B, -last)
    alpha = np.append(z, 1.0 - z.sum())
    return alpha


def _fix_sign(v: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(v)
    if nz.size and v[nz[0]] < 0:
        return -v
    return v


def smallest_right_singular_vector(X) -> tuple[np.ndarray, float]:
    """Unit vector ``v`` minimizing ``||X v||`` and the attained value.

    The sign is fixed so that the first nonzero entry is positive. When the
    matrix has fewer rows than columns the minimum is zero and ``v`` spans part
    of the exact kernel.
    """
    X = _as_matrix(X)
    p, n = X.shape
    _, s, Vt = np.linalg.svd(X, full_matrices=p < n)
    v = Vt[-1].copy()
    sigma = float(s[-1]) if p >= n else 0.0
    return _fix_sign(v), sigma


def svd_shift(X, lam: float) -> np.ndarray:
    """Replace every singular value ``s`` of ``X`` by ``sqrt(s**2 + lam)``.

    Singular vectors are kept, so ``Xs^T Xs == X^T X + lam I`` when ``X`` has
    at least as many rows as columns.
    """
    if lam < 0:
        raise ValueError(f"lambda must be non-negative, got {lam}")
    X = _as_matrix(X)
    if lam == 0:
        return X.copy()
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    return (U * np.sqrt(s**2 + lam)) @ Vt
