"""Tangent directions of the constraint manifold and first-order tests.

A tangent direction at (D, X) is parameterised by a zero-diagonal K x K
matrix Z and a null-space element V of D:

    C  = Z - diag(M0 Z)          (admissible: keeps the atoms unit norm)
    D' = D C
    X' = -C X + V
"""

from dataclasses import dataclass

import numpy as np

from . import rng
from .conditions import check_conditions
from .errors import (
    DegenerateDirection,
    DimensionMismatch,
    NotInNullSpace,
    NotZeroDiagonal,
    SingularPerturbedDictionary,
    ZeroColumn,
)
from .model import as_coefficients, gram_parts, normalize_columns, sign
from .parallel import pmap

NULL_TOL = 1e-10
SINGULAR_COND = 1e12


@dataclass(frozen=True, eq=False)
class TangentDirection:
    Z: np.ndarray
    C: np.ndarray
    V: np.ndarray
    Xprime: np.ndarray


def u_matrix(D, X):
    """``U = sign(X) X^T - M0^T diag(||x^k||_1)``."""
    X = as_coefficients(X)
    M0 = gram_parts(D).M0
    return sign(X.X) @ X.X.T - M0.T @ np.diag(X.row_l1())


def null_space_basis(D, rcond=1e-12):
    """Orthonormal basis (K x r) of the null space of D, from an SVD."""
    A = np.asarray(D, dtype=float)
    _, s, Vt = np.linalg.svd(A, full_matrices=True)
    tol = rcond * (s[0] if s.size else 1.0)
    rank = int(np.sum(s > tol))
    return Vt[rank:].T


def make_direction(D, X, Z, V=None):
    X = as_coefficients(X)
    K, N = X.X.shape
    Z = np.array(Z, dtype=float)
    if Z.shape != (K, K):
        raise DimensionMismatch(f"Z must be {K}x{K}, got {Z.shape}")
    if np.any(np.diag(Z) != 0.0):
        raise NotZeroDiagonal("Z must have an exactly zero diagonal")
    V = np.zeros((K, N)) if V is None else np.array(V, dtype=float)
    if V.shape != (K, N):
        raise DimensionMismatch(f"V must be {K}x{N}, got {V.shape}")
    A = np.asarray(D, dtype=float)
    scale = 1.0 + np.abs(V).max(initial=0.0)
    if np.abs(A @ V).max(initial=0.0) > NULL_TOL * scale:
        raise NotInNullSpace("D V is not zero")
    M0 = gram_parts(D).M0
    C = Z - np.diag(np.diag(M0 @ Z))
    return TangentDirection(Z=Z, C=C, V=V, Xprime=-C @ X.X + V)


def random_zero_diagonal(gen, K):
    """Gaussian off-diagonal entries, Frobenius-normalised."""
    Z = rng.gaussian(gen, (K, K))
    np.fill_diagonal(Z, 0.0)
    nrm = np.linalg.norm(Z)
    return Z / nrm if nrm > 0 else Z


def random_direction(D, X, seed, null_basis=None):
    """Random tangent direction; V is a random null-space combination when
    D is overcomplete."""
    X = as_coefficients(X)
    gen = rng.stream(seed)
    Z = random_zero_diagonal(gen, X.K)
    V = None
    if null_basis is None and not D.is_basis:
        null_basis = null_space_basis(D)
    if null_basis is not None and null_basis.shape[1]:
        V = null_basis @ rng.gaussian(gen, (null_basis.shape[1], X.N))
        V /= max(np.linalg.norm(V), 1e-300)
        # keep D V = 0 to machine precision
        V = V - np.linalg.lstsq(np.asarray(D, dtype=float), np.asarray(D, dtype=float) @ V, rcond=None)[0]
    return make_direction(D, X, Z, V)


def directional_derivatives(X, direction):
    """One-sided derivatives of ``||X||_1`` along ``X'``:
    ``+/- ||X'_zero||_1 + <X', sign X>``."""
    X = as_coefficients(X)
    Xp = direction.Xprime
    off = float(np.abs(Xp[X.zero_mask]).sum())
    lin = float(np.sum(Xp * sign(X.X)))
    return off + lin, -off + lin


@dataclass(frozen=True)
class NSCResult:
    lhs: float
    rhs: float
    satisfied: bool


def _zero_scale(X, Z, V):
    return 1e-14 * (1.0 + np.abs(Z).sum() * np.abs(X).max(initial=0.0) + np.abs(V).max(initial=0.0))


def nsc_check(D, X, direction):
    """``|<Z, U> + <V, sign X>| < ||(Z X + V)_zero||_1``."""
    X = as_coefficients(X)
    Z, V = direction.Z, direction.V
    ZXV = Z @ X.X + V
    if np.abs(ZXV).max(initial=0.0) <= _zero_scale(X.X, Z, V):
        raise DegenerateDirection("Z X + V = 0")
    U = u_matrix(D, X)
    lhs = abs(float(np.sum(Z * U)) + float(np.sum(V * sign(X.X))))
    rhs = float(np.abs(ZXV[X.zero_mask]).sum())
    return NSCResult(lhs, rhs, lhs < rhs)


@dataclass(frozen=True)
class DecouplingGap:
    coupled: float
    decoupled_max: float


def coupled_ratio(D, X, Z):
    """``|<Z, U>| / ||(Z X)_zero||_1`` (0/0 := 0, x/0 := inf)."""
    X = as_coefficients(X)
    ZX = Z @ X.X
    if np.abs(ZX).max(initial=0.0) <= _zero_scale(X.X, Z, np.zeros(1)):
        raise DegenerateDirection("Z X = 0")
    num = abs(float(np.sum(Z * u_matrix(D, X))))
    den = float(np.abs(ZX[X.zero_mask]).sum())
    if den == 0.0:
        return 0.0 if num == 0.0 else np.inf
    return num / den


def decoupling_gap(D, X, Z, report=None):
    X = as_coefficients(X)
    if report is None:
        report = check_conditions(D, X, with_theorem3=False, threads=1)
    return DecouplingGap(coupled_ratio(D, X, Z), report.max_value)


def certificate_direction(D, X, k, z):
    """Zero-diagonal Z whose row k carries ``z`` (length K-1) around the
    zero diagonal entry, all other rows zero."""
    X = as_coefficients(X)
    Z = np.zeros((X.K, X.K))
    Z[k, np.arange(X.K) != k] = z
    return Z


def curve_probe(D, X, direction, epsilons):
    """Cost changes ``||X(eps)||_1 - ||X||_1`` along the curve
    ``D(eps) = normalize(D (I + eps C))``, ``X(eps) = D(eps)^-1 D X``."""
    if not D.is_basis:
        raise DimensionMismatch("curve probing needs a basis dictionary")
    X = as_coefficients(X)
    A = np.asarray(D, dtype=float)
    Y = A @ X.X
    base = float(np.abs(X.X).sum())
    out = []
    for eps in epsilons:
        if eps == 0:
            out.append(0.0)
            continue
        try:
            De = normalize_columns(A @ (np.eye(D.K) + eps * direction.C)).atoms
        except ZeroColumn as exc:
            raise SingularPerturbedDictionary(f"eps={eps}: {exc}") from exc
        if np.linalg.cond(De) > SINGULAR_COND:
            raise SingularPerturbedDictionary(f"D(eps) is singular at eps={eps}")
        Xe = np.linalg.solve(De, Y)
        out.append(float(np.abs(Xe).sum()) - base)
    return out


@dataclass(frozen=True)
class Battery:
    directions: int
    seed: int
    counterexample: dict
    min_margin: float

    @property
    def found(self):
        return self.counterexample is not None


def verify_battery(D, X, directions, seed, threads=None):
    """Check the strict inequality along ``directions`` random tangent
    directions; report the first violating one, if any."""
    X = as_coefficients(X)
    null_basis = None if D.is_basis else null_space_basis(D)

    def one(i):
        d = random_direction(D, X, rng.derive_seed(seed, i), null_basis)
        try:
            r = nsc_check(D, X, d)
        except DegenerateDirection:
            return i, None, None
        return i, r, d

    results = pmap(one, range(directions), threads)
    ce = None
    margins = []
    for i, r, d in results:
        if r is None:
            continue
        margins.append(r.rhs - r.lhs)
        if not r.satisfied and ce is None:
            ce = {"index": i, "lhs": r.lhs, "rhs": r.rhs, "Z": d.Z.tolist()}
    return Battery(directions, seed, ce, min(margins, default=float("nan")))
