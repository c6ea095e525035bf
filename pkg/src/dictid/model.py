"""Dictionaries, coefficient matrices and the per-row block decomposition.

Indices are 0-based throughout. Zeros in a coefficient matrix are exact:
an entry belongs to the zero set if and only if it compares equal to 0.0.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NotUnitNorm, ZeroColumn

UNIT_NORM_TOL = 1e-12
ZERO_COLUMN_TOL = 1e-14


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def sign(a):
    """Componentwise sign with sign(0) = 0."""
    return np.sign(a)


@dataclass(frozen=True, eq=False)
class Dictionary:
    """A d x K matrix whose columns (atoms) have unit l2 norm."""

    atoms: np.ndarray

    def __post_init__(self):
        a = _frozen(self.atoms)
        if a.ndim != 2:
            raise DimensionMismatch(f"dictionary must be 2-D, got shape {a.shape}")
        d, K = a.shape
        if K < d:
            raise DimensionMismatch(f"need K >= d, got d={d}, K={K}")
        norms = np.linalg.norm(a, axis=0)
        bad = np.flatnonzero(np.abs(norms - 1.0) > UNIT_NORM_TOL)
        if bad.size:
            raise NotUnitNorm(f"columns {bad.tolist()} are not unit norm")
        object.__setattr__(self, "atoms", a)

    @property
    def d(self):
        return self.atoms.shape[0]

    @property
    def K(self):
        return self.atoms.shape[1]

    @property
    def is_basis(self):
        return self.d == self.K

    @property
    def is_complete(self):
        return np.linalg.matrix_rank(self.atoms) == self.d

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.atoms, dtype=dtype)


@dataclass(frozen=True, eq=False)
class GramParts:
    """Off-diagonal Gram matrix ``M0 = D^T D - I`` and its columns without
    the diagonal entry (``mbar[k]`` has length K-1)."""

    M0: np.ndarray
    mbar: tuple


@dataclass(frozen=True, eq=False)
class CoefficientMatrix:
    X: np.ndarray
    zero_mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        X = _frozen(self.X)
        if X.ndim != 2:
            raise DimensionMismatch(f"coefficients must be 2-D, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("coefficient matrix has non-finite entries")
        # -0.0 compares equal to zero; normalise it so files and hashes agree
        X = np.where(X == 0.0, 0.0, X)
        X.setflags(write=False)
        mask = X == 0.0
        mask.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "zero_mask", mask)

    @property
    def K(self):
        return self.X.shape[0]

    @property
    def N(self):
        return self.X.shape[1]

    @property
    def zero_set(self):
        """The set of (k, n) positions of exact zeros."""
        return {(int(k), int(n)) for k, n in zip(*np.nonzero(self.zero_mask))}

    def row_support(self, k):
        """Columns where row k is nonzero."""
        return np.flatnonzero(~self.zero_mask[k])

    def row_zeros(self, k):
        """Columns where row k is exactly zero."""
        return np.flatnonzero(self.zero_mask[k])

    def row_l1(self):
        return np.abs(self.X).sum(axis=1)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.X, dtype=dtype)


@dataclass(frozen=True, eq=False)
class RowBlocks:
    k: int
    xk: np.ndarray
    sk: np.ndarray
    Xk: np.ndarray
    Xbark: np.ndarray
    uk: np.ndarray
    vk: np.ndarray
    support: np.ndarray
    zeros: np.ndarray


def as_coefficients(X):
    return X if isinstance(X, CoefficientMatrix) else CoefficientMatrix(X)


def normalize_columns(M):
    """Scale every column of ``M`` to unit l2 norm.

    Raises
    ------
    ZeroColumn
        If some column has norm below 1e-14.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got shape {M.shape}")
    norms = np.linalg.norm(M, axis=0)
    small = np.flatnonzero(norms < ZERO_COLUMN_TOL)
    if small.size:
        raise ZeroColumn(int(small[0]))
    return Dictionary(M / norms)


def gram_parts(D):
    A = D.atoms
    M0 = A.T @ A
    np.fill_diagonal(M0, 0.0)
    # symmetrise so M0 == M0.T holds bit for bit
    M0 = 0.5 * (M0 + M0.T)
    K = D.K
    mbar = tuple(np.delete(M0[:, k], k) for k in range(K))
    return GramParts(M0=_frozen(M0), mbar=tuple(_frozen(m) for m in mbar))


def _pnorm(x, p):
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return 0.0
    if p == np.inf:
        return float(np.max(np.abs(x)))
    if p < 1:
        raise ValueError(f"norm exponent must be >= 1, got {p}")
    return float(np.linalg.norm(x, ord=p))


def coherence(D, p=2):
    """``max_k ||mbar_k||_p``; for ``p = inf`` the classical coherence."""
    parts = gram_parts(D)
    return max((_pnorm(m, p) for m in parts.mbar), default=0.0)


def row_blocks(X, D, k):
    """Block decomposition of ``X`` with respect to row ``k``.

    ``Xk`` / ``Xbark`` are ``X`` with row k removed and columns restricted to
    the support / zero set of row k. ``vk = Xk @ sk`` and
    ``uk = vk - diag(||x^l||_1)_{l != k} @ mbar_k``, the diagonal weights
    taken in ascending l with l = k skipped, matching ``mbar_k``.
    """
    X = as_coefficients(X)
    if D.K != X.K:
        raise DimensionMismatch(f"dictionary has {D.K} atoms but X has {X.K} rows")
    if not 0 <= k < X.K:
        raise IndexError(f"row index {k} out of range for K={X.K}")
    sup = X.row_support(k)
    zer = X.row_zeros(k)
    xk = X.X[k]
    sk = sign(xk[sup])
    rest = np.delete(X.X, k, axis=0)
    Xk = rest[:, sup]
    Xbark = rest[:, zer]
    vk = Xk @ sk
    weights = np.delete(X.row_l1(), k)
    uk = vk - weights * gram_parts(D).mbar[k]
    return RowBlocks(
        k=k,
        xk=_frozen(xk),
        sk=_frozen(sk),
        Xk=_frozen(Xk),
        Xbark=_frozen(Xbark),
        uk=_frozen(uk),
        vk=_frozen(vk),
        support=sup,
        zeros=zer,
    )


def gamma(X):
    """Largest row l1 norm."""
    X = as_coefficients(X)
    return float(X.row_l1().max(initial=0.0))


def beta(X, D, p=2):
    """Largest ``||v_k||_p`` over the rows."""
    X = as_coefficients(X)
    return max((_pnorm(row_blocks(X, D, k).vk, p) for k in range(X.K)), default=0.0)


def hadamard(n):
    """Sylvester Hadamard matrix of order ``n`` (a power of two)."""
    if n < 1 or n & (n - 1):
        raise ValueError(f"order must be a power of two, got {n}")
    H = np.ones((1, 1))
    while H.shape[0] < n:
        H = np.block([[H, H], [H, -H]])
    return H


def mixed_orthobasis(K, ell):
    """Basis made of ``ell`` canonical vectors and ``K - ell`` normalised
    Hadamard columns (a maximally incoherent pair of orthonormal bases).

    The Hadamard columns kept are those not paired with the canonical vectors
    used, so the result is invertible for every ``0 <= ell <= K``.
    """
    if not 0 <= ell <= K:
        raise ValueError("need 0 <= ell <= K")
    H = hadamard(K) / np.sqrt(K)
    return Dictionary(np.hstack([np.eye(K)[:, :ell], H[:, ell:]]))


def angle_dictionary(thetas):
    """2 x K dictionary with atoms ``(cos t, sin t)``."""
    t = np.asarray(thetas, dtype=float)
    return normalize_columns(np.vstack([np.cos(t), np.sin(t)]))
