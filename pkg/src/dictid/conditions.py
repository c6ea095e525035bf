"""Necessary / sufficient local-minimum conditions and the decoupled
coherence test.

For each row k the quantity checked is

    rho_k = sup_{z != 0} |<u_k, z>| / ||Xbar_k^T z||_1
          = min ||d||_inf  s.t.  Xbar_k d = u_k,

i.e. the gauge of ``u_k`` with respect to the zonotope ``Xbar_k Q``. The pair
(D, X) passes the necessary test when ``max_k rho_k <= 1`` and the sufficient
test (basis case) when ``max_k rho_k < 1``. A band of width ``tol_strict``
around 1 is reported as inconclusive.
"""

from dataclasses import dataclass, field
import enum
import itertools
import math

import numpy as np

from . import lp, rng
from .errors import DimensionMismatch, UnsupportedMode
from .model import as_coefficients, beta, coherence, gamma, row_blocks
from .parallel import pmap

DEFAULT_TOL_STRICT = 1e-7
DEGENERATE_COND = 1e12
MAX_COVER_WORK = 5e7


class Verdict(str, enum.Enum):
    YES = "yes"
    NO = "no"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class ExactFacets:
    """Exact l2 inscribed radius by facet-normal enumeration (n <= 3)."""

    def to_json(self):
        return {"mode": "exact_facets"}


@dataclass(frozen=True)
class EpsCover:
    """Minimum over a rotated grid eps-cover of the sphere."""

    eps: float = 0.05
    seed: int = 0

    def to_json(self):
        return {"mode": "eps_cover", "eps": self.eps, "seed": self.seed}


@dataclass(frozen=True)
class Radius:
    value: float
    certified: bool


def _dual_exponent(p):
    if p == 1:
        return math.inf
    if p == math.inf:
        return 1.0
    return p / (p - 1.0)


def _check_matrix(A):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got shape {A.shape}")
    return A


def _support_min(A, Z):
    """min over the columns z of Z of ||A^T z||_1, chunked."""
    best = math.inf
    for s in range(0, Z.shape[1], 4096):
        vals = np.abs(A.T @ Z[:, s:s + 4096]).sum(axis=0)
        if vals.size:
            best = min(best, float(vals.min()))
    return best


def _facet_normals(A):
    """Unit vectors orthogonal to every non-degenerate (n-1)-subset of columns."""
    n, M = A.shape
    if n == 1:
        return np.ones((1, 1))
    norms = np.linalg.norm(A, axis=0)
    scale = norms.max(initial=0.0)
    cols = A[:, norms > 1e-12 * max(scale, 1e-300)]
    if n == 2:
        Z = np.vstack([-cols[1], cols[0]])
        return Z / np.linalg.norm(Z, axis=0)
    if n == 3:
        unit = cols / np.linalg.norm(cols, axis=0)
        out = []
        m = unit.shape[1]
        for i in range(m - 1):
            cr = np.cross(unit[:, i][None, :], unit[:, i + 1:].T).T
            # cross norm = sin(angle); 1/sin(angle) bounds the pair's condition number
            nrm = np.linalg.norm(cr, axis=0)
            keep = nrm * DEGENERATE_COND > 1.0
            if np.any(keep):
                out.append(cr[:, keep] / nrm[keep])
        return np.hstack(out) if out else np.zeros((3, 0))
    raise UnsupportedMode(f"exact facet enumeration needs n <= 3, got n={n}")


def _rotation(seed, n):
    g = rng.stream(seed)
    Q, R = np.linalg.qr(rng.gaussian(g, (n, n)))
    return Q * np.sign(np.diag(R))


def cover_points(n, eps, seed=0):
    """Grid eps-cover of the unit l2 sphere of R^n, randomly rotated.

    Points are a grid on the surface of the cube [-1, 1]^n projected onto the
    sphere. Radial projection is 1-Lipschitz outside the unit ball, so the
    covering distance is at most (grid step / 2) * sqrt(n - 1) < eps.
    """
    if not 0 < eps < 1:
        raise ValueError(f"cover radius must be in (0, 1), got {eps}")
    if n == 1:
        return np.array([[1.0, -1.0]])
    h = 0.999 * 2.0 * eps / math.sqrt(n - 1)
    m = math.ceil(2.0 / h) + 1
    ticks = np.linspace(-1.0, 1.0, m)
    grid = np.array(list(itertools.product(ticks, repeat=n - 1))).T
    faces = []
    for i in range(n):
        for s in (-1.0, 1.0):
            face = np.insert(grid, i, s, axis=0)
            faces.append(face)
    P = np.hstack(faces)
    P = P / np.linalg.norm(P, axis=0)
    return _rotation(seed, n) @ P


def _cover_size(n, eps):
    if n == 1:
        return 2
    h = 0.999 * 2.0 * eps / math.sqrt(n - 1)
    return 2 * n * (math.ceil(2.0 / h) + 1) ** (n - 1)


def radius(A, p=2, mode=ExactFacets()):
    """Radius of the largest l_p ball inside the zonotope ``A Q``.

    Equals ``inf_z ||A^T z||_1 / ||z||_q`` with ``1/p + 1/q = 1``; it is 0 when
    ``A`` does not have full row rank.

    ``ExactFacets`` (p = 2, n <= 3) is exact: on each cone where the sign
    pattern of ``A^T z`` is fixed the objective is linear, so its minimum over
    the sphere sits on a ray where n-1 columns are orthogonal to z.
    ``EpsCover`` with p = 2 returns ``min_cover ||A^T z||_1 - delta * eps``
    with ``delta = sum_i ||A_i||_2``, a certified lower bound. For other p it
    returns the uncertified minimum of the ratio over the cover.
    """
    A = _check_matrix(A)
    n, M = A.shape
    if n == 0:
        return Radius(math.inf, True)
    if M == 0 or np.linalg.matrix_rank(A) < n:
        return Radius(0.0, True)
    if isinstance(mode, ExactFacets):
        if p != 2:
            raise UnsupportedMode(f"exact facets supports p=2 only, got p={p}")
        return Radius(_support_min(A, _facet_normals(A)), True)
    if isinstance(mode, EpsCover):
        size = _cover_size(n, mode.eps)
        if size * M > MAX_COVER_WORK:
            raise UnsupportedMode(
                f"eps-cover of size {size} in R^{n} is too large for M={M}"
            )
        Z = cover_points(n, mode.eps, mode.seed)
        if p == 2:
            delta = float(np.linalg.norm(A, axis=0).sum())
            lower = _support_min(A, Z) - delta * mode.eps
            return Radius(max(lower, 0.0), True)
        q = _dual_exponent(p)
        Zq = Z / np.linalg.norm(Z, ord=q, axis=0)
        return Radius(_support_min(A, Zq), False)
    raise UnsupportedMode(f"unknown radius mode {mode!r}")


def default_radius_mode(n, p):
    if p == 2 and n <= 3:
        return ExactFacets()
    return EpsCover()


@dataclass(frozen=True)
class Theorem3:
    holds: bool
    margin: float
    alpha: float
    beta: float
    gamma: float
    mu: float
    certified: bool


def _alpha(X, D, p, mode, threads=None):
    X = as_coefficients(X)
    blocks = [row_blocks(X, D, k) for k in range(X.K)]
    radii = pmap(lambda b: radius(b.Xbark, p, mode), blocks, threads)
    return min(r.value for r in radii), all(r.certified for r in radii)


def theorem3_check(D, X, p=2, radius_mode=None, threads=None):
    """Decoupled test ``mu_p(D) < (alpha_p(X) - beta_p(X)) / gamma(X)``.

    With an exact or certified-lower-bound alpha, ``holds`` implies the
    sufficient condition.
    """
    X = as_coefficients(X)
    if radius_mode is None:
        radius_mode = default_radius_mode(X.K - 1, p)
    a, certified = _alpha(X, D, p, radius_mode, threads)
    b = beta(X, D, p)
    g = gamma(X)
    mu = coherence(D, p)
    if g > 0:
        margin = (a - b) / g - mu
    else:
        margin = math.inf if a > b else -math.inf
    holds = bool(mu * g < a - b)
    return Theorem3(holds, float(margin), a, b, g, mu, certified)


@dataclass(eq=False)
class IdentifiabilityReport:
    k_values: list
    nc: Verdict
    sc: Verdict
    tol_strict: float
    p: float
    basis: bool
    alpha: float = None
    beta: float = None
    gamma: float = None
    mu: float = None
    alpha_certified: bool = None
    theorem3_holds: bool = None
    theorem3_margin: float = None
    radius_mode: object = None
    certificates: list = field(default=None, repr=False)

    @property
    def max_value(self):
        return max(self.k_values, default=0.0)

    def to_json(self):
        return {
            "k_values": [_num(v) for v in self.k_values],
            "nc": self.nc.value,
            "sc": self.sc.value,
            "basis": self.basis,
            "alpha": _num(self.alpha),
            "beta": _num(self.beta),
            "gamma": _num(self.gamma),
            "mu": _num(self.mu),
            "p": _num(self.p),
            "alpha_certified": self.alpha_certified,
            "radius_mode": self.radius_mode.to_json() if self.radius_mode else None,
            "theorem3": {
                "holds": self.theorem3_holds,
                "margin": _num(self.theorem3_margin),
            },
            "tolerances": {
                "tol_strict": self.tol_strict,
                "lp_feasibility": lp.FEAS_TOL,
                "lp_optimality": lp.OPT_TOL,
            },
        }


def _num(x):
    """JSON-safe number: infinities become the strings "inf" / "-inf"."""
    if x is None:
        return None
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


def row_value(Xbark, uk):
    """Per-row LP value and its dual certificate; +inf when infeasible."""
    sol = lp.min_inf_norm(Xbark, uk)
    if sol.optimal:
        return sol.value, sol.certificate
    return math.inf, sol.certificate


def classify(value, tol_strict):
    if value < 1.0 - tol_strict:
        return Verdict.YES
    if value > 1.0 + tol_strict:
        return Verdict.NO
    return Verdict.INCONCLUSIVE


def check_conditions(D, X, tol_strict=DEFAULT_TOL_STRICT, p=2, radius_mode=None,
                     threads=None, with_theorem3=True):
    """Evaluate the per-row values, NC/SC verdicts and the coherence test.

    The SC verdict only implies a strict local minimum when ``D`` is a basis;
    ``basis`` in the report records which case applies. When the inscribed
    radius cannot be computed in the requested mode, alpha and the
    coherence-test fields are left as None.
    """
    X = as_coefficients(X)
    if D.K != X.K:
        raise DimensionMismatch(f"dictionary has {D.K} atoms but X has {X.K} rows")
    blocks = [row_blocks(X, D, k) for k in range(X.K)]
    rows = pmap(lambda b: row_value(b.Xbark, b.uk), blocks, threads)
    values = [float(v) for v, _ in rows]
    verdict = classify(max(values, default=0.0), tol_strict)
    report = IdentifiabilityReport(
        k_values=values,
        nc=verdict,
        sc=verdict,
        tol_strict=tol_strict,
        p=p,
        basis=D.is_basis,
        certificates=[z for _, z in rows],
    )
    report.beta = beta(X, D, p)
    report.gamma = gamma(X)
    report.mu = coherence(D, p)
    if with_theorem3:
        mode = radius_mode or default_radius_mode(X.K - 1, p)
        try:
            t3 = theorem3_check(D, X, p, mode, threads)
        except UnsupportedMode:
            return report
        report.radius_mode = mode
        report.alpha = t3.alpha
        report.alpha_certified = t3.certified
        report.theorem3_holds = t3.holds
        report.theorem3_margin = t3.margin
    return report
