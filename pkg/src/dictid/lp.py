"""Small dense linear programs.

The workhorse is :func:`simplex`, a two-phase revised simplex method for

    minimise c.x  subject to  A x = b,  lo <= x <= hi

with finite lower bounds and possibly infinite upper bounds. Nonbasic
variables sit at one of their bounds. Entering and leaving variables follow
Bland's smallest-index rule, so pivoting is deterministic and cannot cycle.
The basic solution is recomputed from scratch at every iteration; the
problems handled here have at most a few dozen rows, so the cost is
dominated by pricing.
"""

from dataclasses import dataclass
import enum

import numpy as np

from .errors import DimensionMismatch, SolverError

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-11


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True, eq=False)
class LPSolution:
    """Result of an LP.

    ``certificate`` carries a dual vector when one is meaningful: for
    :func:`min_inf_norm` it is a maximiser ``z`` of ``<v, z> / ||A^T z||_1``
    (Optimal) or a vector with ``A^T z = 0`` and ``<v, z> > 0`` (Infeasible).
    """

    value: float
    witness: np.ndarray
    status: Status
    certificate: np.ndarray = None

    @property
    def optimal(self):
        return self.status is Status.OPTIMAL


@dataclass
class _Result:
    status: Status
    x: np.ndarray
    y: np.ndarray
    obj: float


def simplex(c, A, b, lo, hi, max_iter=None, start=None):
    """Solve ``min c.x  s.t.  A x = b, lo <= x <= hi``.

    Parameters
    ----------
    c, A, b, lo, hi : array_like
        Problem data; ``lo`` must be finite, ``hi`` may contain ``inf``.
    start : array_like of bool, optional
        Initial nonbasic position per variable: True puts it at its upper
        bound (ignored where the upper bound is infinite).

    Returns
    -------
    _Result
        Status, primal point, simplex multipliers ``y`` (``A^T y`` prices the
        columns) and objective value.
    """
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    m, n = A.shape
    if b.shape != (m,) or c.shape != (n,) or lo.shape != (n,) or hi.shape != (n,):
        raise DimensionMismatch("inconsistent LP data shapes")
    if not np.all(np.isfinite(lo)):
        raise ValueError("lower bounds must be finite")
    if np.any(hi < lo):
        return _Result(Status.INFEASIBLE, np.full(n, np.nan), np.zeros(m), np.nan)
    if max_iter is None:
        max_iter = 50 * (n + m) + 1000

    x = lo.copy()
    if start is not None:
        up = np.asarray(start, dtype=bool) & np.isfinite(hi)
        x[up] = hi[up]

    # phase 1: one artificial per row, signed so it starts nonnegative
    resid = b - A @ x
    sig = np.where(resid >= 0, 1.0, -1.0)
    A1 = np.hstack([A, np.diag(sig)])
    lo1 = np.concatenate([lo, np.zeros(m)])
    hi1 = np.concatenate([hi, np.full(m, np.inf)])
    x1 = np.concatenate([x, np.abs(resid)])
    basis = list(range(n, n + m))
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    scale_b = 1.0 + (np.max(np.abs(b)) if m else 0.0)

    status, x1, basis, y, it = _iterate(c1, A1, b, lo1, hi1, x1, basis, max_iter)
    if status is not Status.OPTIMAL:
        raise SolverError("phase 1 did not terminate at an optimum")
    infeas = float(np.sum(x1[n:]))
    if infeas > FEAS_TOL * scale_b:
        return _Result(Status.INFEASIBLE, np.full(n, np.nan), y, np.nan)

    # phase 2: artificials pinned to zero, possibly still basic at level 0
    hi1[n:] = 0.0
    x1[n:] = 0.0
    c2 = np.concatenate([c, np.zeros(m)])
    status, x1, basis, y, _ = _iterate(c2, A1, b, lo1, hi1, x1, basis, max_iter - it)
    xs = x1[:n]
    if status is Status.UNBOUNDED:
        return _Result(status, xs, y, -np.inf)
    return _Result(status, xs, y, float(c @ xs))


def _basic_solution(A, b, x, basis):
    B = A[:, basis]
    rhs = b - A @ x + B @ x[basis]
    try:
        xb = np.linalg.solve(B, rhs)
    except np.linalg.LinAlgError as exc:
        raise SolverError("singular basis matrix") from exc
    if np.linalg.cond(B) > 1e13:
        raise SolverError("ill-conditioned basis matrix")
    return B, xb


def _iterate(c, A, b, lo, hi, x, basis, max_iter):
    m, n = A.shape
    x = x.copy()
    basis = list(basis)
    is_basic = np.zeros(n, dtype=bool)
    is_basic[basis] = True
    fixed = hi - lo <= 0.0
    for it in range(max_iter):
        B, xb = _basic_solution(A, b, x, basis)
        x[basis] = xb
        y = np.linalg.solve(B.T, c[basis])
        red = c - A.T @ y
        at_lo = x <= lo
        # Bland: first eligible index
        can_up = (~is_basic) & (~fixed) & at_lo & (red < -OPT_TOL)
        can_dn = (~is_basic) & (~fixed) & (~at_lo) & (red > OPT_TOL)
        cand = np.flatnonzero(can_up | can_dn)
        if cand.size == 0:
            return Status.OPTIMAL, x, basis, y, it
        j = int(cand[0])
        direction = 1.0 if can_up[j] else -1.0
        w = np.linalg.solve(B, A[:, j])
        # x_B(t) = xb - direction * t * w
        dw = direction * w
        step = hi[j] - lo[j]
        leave = None
        lo_b = lo[basis]
        hi_b = hi[basis]
        for i in sorted(range(m), key=lambda r: basis[r]):
            if dw[i] > PIVOT_TOL:
                t = max(xb[i] - lo_b[i], 0.0) / dw[i]
                target = lo_b[i]
            elif dw[i] < -PIVOT_TOL and np.isfinite(hi_b[i]):
                t = max(hi_b[i] - xb[i], 0.0) / (-dw[i])
                target = hi_b[i]
            else:
                continue
            if t < step:
                step, leave = t, (i, target)
        if not np.isfinite(step):
            return Status.UNBOUNDED, x, basis, y, it
        x[basis] = xb - dw * step
        if leave is None:
            # bound flip, basis unchanged
            x[j] = hi[j] if direction > 0 else lo[j]
            continue
        i, target = leave
        x[j] = x[j] + direction * step
        out = basis[i]
        x[out] = target
        is_basic[out] = False
        is_basic[j] = True
        basis[i] = j
    raise SolverError(f"simplex exceeded {max_iter} iterations")


def _as_system(A, v):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if A.shape[0] != v.shape[0]:
        raise DimensionMismatch(f"A has {A.shape[0]} rows but v has length {v.shape[0]}")
    return A, v


def _range_residual(A, v):
    if A.shape[1] == 0:
        return v.copy()
    coef, *_ = np.linalg.lstsq(A, v, rcond=None)
    return v - A @ coef


def min_inf_norm(A, v):
    """``min ||d||_inf  s.t.  A d = v``.

    Solved through the equivalent gauge program

        maximise lam  s.t.  A d - lam v = 0,  -1 <= d <= 1,  lam >= 0

    whose optimum ``lam*`` gives the value ``1 / lam*`` and the witness
    ``d* / lam*``. This keeps the row count at ``n`` rather than ``n + 2M``.
    The returned certificate ``z`` attains the dual form
    ``<v, z> / ||A^T z||_1``.
    """
    A, v = _as_system(A, v)
    n, M = A.shape
    scale = 1.0 + np.max(np.abs(v), initial=0.0)
    if not np.any(v):
        return LPSolution(0.0, np.zeros(M), Status.OPTIMAL, np.zeros(n))
    r = _range_residual(A, v)
    if np.max(np.abs(r)) > 1e-9 * scale:
        z = r / np.linalg.norm(r)
        return LPSolution(np.inf, np.full(M, np.nan), Status.INFEASIBLE, z)

    # Start d at the sign pattern of the least-squares dual direction. lam is
    # variable 0, so Bland's order lets it enter first and phase 1 ends
    # without walking the d's away from that pattern and back.
    z0, *_ = np.linalg.lstsq(A @ A.T, v, rcond=None)
    start = np.concatenate([[False], A.T @ z0 > 0])
    c = np.zeros(M + 1)
    c[0] = -1.0
    Aeq = np.hstack([-v[:, None], A])
    lo = np.concatenate([[0.0], -np.ones(M)])
    hi = np.concatenate([[np.inf], np.ones(M)])
    res = simplex(c, Aeq, np.zeros(n), lo, hi, start=start)
    if res.status is Status.INFEASIBLE:
        raise SolverError("gauge program reported infeasible at lam = 0")
    if res.status is Status.UNBOUNDED:
        raise SolverError("gauge program unbounded for nonzero v")
    lam = res.x[0]
    if lam <= 1e-12 * scale:
        # v is numerically outside the range; treat as infeasible
        z = r / np.linalg.norm(r) if np.any(r) else None
        return LPSolution(np.inf, np.full(M, np.nan), Status.INFEASIBLE, z)
    d = res.x[1:] / lam
    value = float(np.max(np.abs(d), initial=0.0))
    if np.max(np.abs(A @ d - v), initial=0.0) > 1e-9 * scale:
        raise SolverError("witness violates the equality constraints")
    z = _dual_direction(A, v, res.y)
    return LPSolution(value, d, Status.OPTIMAL, z)


def _dual_direction(A, v, y):
    z = np.asarray(y, dtype=float)
    if not np.any(z):
        return z
    if v @ z < 0:
        z = -z
    return z / np.linalg.norm(z)


def dual_ratio(A, v, z):
    """``<v, z> / ||A^T z||_1`` with the conventions 0/0 = 0, x/0 = inf."""
    A, v = _as_system(A, v)
    num = float(v @ z)
    den = float(np.abs(A.T @ z).sum())
    if den == 0.0:
        return 0.0 if num == 0.0 else np.inf
    return num / den


def basis_pursuit(D, y):
    """``min ||x||_1  s.t.  D x = y`` via the split ``x = xp - xm``."""
    atoms = np.asarray(D, dtype=float)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    d, K = atoms.shape
    if y.shape != (d,):
        raise DimensionMismatch(f"signal has shape {y.shape}, expected ({d},)")
    Aeq = np.hstack([atoms, -atoms])
    res = simplex(
        np.ones(2 * K), Aeq, y, np.zeros(2 * K), np.full(2 * K, np.inf)
    )
    if res.status is Status.INFEASIBLE:
        return LPSolution(np.inf, np.full(K, np.nan), Status.INFEASIBLE)
    if res.status is Status.UNBOUNDED:
        raise SolverError("basis pursuit cannot be unbounded")
    x = res.x[:K] - res.x[K:]
    scale = 1.0 + np.max(np.abs(y), initial=0.0)
    if np.max(np.abs(atoms @ x - y), initial=0.0) > 1e-9 * scale:
        raise SolverError("basis pursuit witness violates D x = y")
    return LPSolution(float(np.abs(x).sum()), x, Status.OPTIMAL)
