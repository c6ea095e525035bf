"""Bernoulli-Gaussian coefficients and the concentration bounds built on them.

Entries are ``x = xi * g`` with ``xi ~ Bernoulli(p)`` and ``g ~ N(0, 1)``, so
an entry is exactly zero with probability ``1 - p``. The bound evaluators
return the raw formula values; only the final Theorem-4 probability is
clamped to [0, 1].
"""

from dataclasses import asdict, dataclass
import math

import numpy as np

from . import rng
from .errors import PreconditionFailed, UnknownBoundId
from .model import CoefficientMatrix, Dictionary
from .parallel import pmap

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class BGParams:
    p: float
    K: int
    N: int
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise PreconditionFailed(f"p must lie in (0, 1), got {self.p}")
        if self.K < 1 or self.N < 1:
            raise PreconditionFailed(f"K and N must be positive, got K={self.K}, N={self.N}")
        rng.check_seed(self.seed)


def draw(gen, shape, p):
    """Bernoulli-Gaussian array from an open stream.

    Consumes, in order: one uniform per entry for the indicators, then the
    Box-Muller uniforms (``u1`` block, then ``u2`` block), all row-major.
    """
    xi = rng.uniform(gen, shape) < p
    g = rng.gaussian(gen, shape)
    return np.where(xi, g, 0.0)


def sample(params):
    """Draw a K x N coefficient matrix; identical params give identical bits."""
    gen = rng.stream(params.seed)
    return CoefficientMatrix(draw(gen, (params.K, params.N), params.p))


# -- bound evaluators -------------------------------------------------------

def _positive_eps(eps):
    if not eps > 0:
        raise PreconditionFailed(f"eps must be positive, got {eps}")


def _unit_eps(eps):
    if not 0 < eps < 1:
        raise PreconditionFailed(f"eps must lie in (0, 1), got {eps}")


def _bernstein(count, p, eps):
    return 2.0 * math.exp(-count * p * eps ** 2 / (2.0 + math.sqrt(2.0) * eps))


@dataclass(frozen=True)
class BoundInputs:
    """Theoretical thresholds for a given (p, K, N, eps)."""

    p: float
    K: int
    N: int
    eps: float

    def __post_init__(self):
        _unit_eps(self.eps)

    @property
    def M_l(self):
        return self.N * (1 - self.p) * (1 - self.eps)

    @property
    def M_u(self):
        return self.N * (1 - self.p) * (1 + self.eps)

    @property
    def alpha_n(self):
        p, e = self.p, self.eps
        return self.N * p * (1 - p) * (1 - e) * (SQRT_2_OVER_PI - 2 * e - e ** 2)

    @property
    def beta_n(self):
        p, e = self.p, self.eps
        return self.N * p * math.sqrt(((self.K - 1) / self.N + e) * (1 + e / p - e))

    @property
    def gamma_n(self):
        return self.N * self.p * (SQRT_2_OVER_PI + self.eps)


def bound_gamma(p, N, eps):
    """Threshold ``Np(sqrt(2/pi) + eps)`` on ``||x||_1`` for one row, and
    the probability of exceeding it."""
    _positive_eps(eps)
    return N * p * (SQRT_2_OVER_PI + eps), _bernstein(N, p, eps)


def bound_gamma_union(p, K, N, eps):
    """Same threshold applied to all K rows at once (union bound)."""
    threshold, prob = bound_gamma(p, N, eps)
    return threshold, K * prob


def bound_support_size(p, N, eps):
    """Probability that the zero count of a row leaves ``[M_l, M_u]``."""
    _unit_eps(eps)
    return 2.0 * math.exp(-2.0 * N * (1 - p) ** 2 * eps ** 2)


@dataclass(frozen=True)
class BallBounds:
    op_threshold: float
    op_prob: float
    ray_threshold: float
    ray_prob: float


def bound_operator_and_ray(p, L, M, eps):
    """Bounds for an L x M Bernoulli-Gaussian matrix A and a unit vector z:
    ``||A^T||_{2->1} > M sqrt(pL)(1+eps)`` and
    ``||A^T z||_1 <= Mp(sqrt(2/pi) - eps)``, each with probability at most
    ``2 exp(-Mp eps^2 / (2 + sqrt(2) eps))``."""
    _positive_eps(eps)
    prob = _bernstein(M, p, eps)
    return BallBounds(
        op_threshold=M * math.sqrt(p * L) * (1 + eps),
        op_prob=prob,
        ray_threshold=M * p * (SQRT_2_OVER_PI - eps),
        ray_prob=prob,
    )


def bound_beta(p, K, N, eps):
    """``beta_n`` and the probability that ``||X_k s_k||_2`` exceeds it."""
    _unit_eps(eps)
    beta_n = BoundInputs(p, K, N, eps).beta_n
    prob = 2.0 * math.exp(-N * p * eps ** 2 / (6.0 * (K - 1) / N + 2.0 * eps))
    return beta_n, prob


def bound_bs_norm(p, L, n, eps):
    """Threshold ``Lnp(1+eps)`` on ``||Bs||_2^2`` for an L x n
    Bernoulli-Gaussian B and a sign vector s, with its probability bound."""
    _positive_eps(eps)
    return L * n * p * (1 + eps), 2.0 * math.exp(-L * p * eps ** 2 / (6.0 + 2.0 * eps))


def chi_moment(L, k):
    """``E(Y^k)`` for a chi-distributed Y with L degrees of freedom."""
    return math.exp(0.5 * k * math.log(2.0) + math.lgamma((k + L) / 2.0) - math.lgamma(L / 2.0))


def chi_moment_bound(L, k):
    """Claimed upper bound ``(L/2)^(k/2) k!`` on the chi moments."""
    return (L / 2.0) ** (k / 2.0) * math.factorial(k)


# -- probabilistic identifiability bound ---------------------------------------

EPS_BISECT_TOL = 1e-10


@dataclass(frozen=True)
class Theorem4Result:
    identifiable_whp: bool
    eps_star: float
    failure_prob_bound: float
    log_bound: float
    reason: str

    def to_json(self):
        return asdict(self)


def coherence_budget(p, K, N, eps):
    """Largest coherence admitted at a given eps:
    ``(1-p)(1-5 eps) - sqrt(pi/2 (K/N + eps)(1 + eps/p))``."""
    return (1 - p) * (1 - 5 * eps) - math.sqrt(math.pi / 2 * (K / N + eps) * (1 + eps / p))


def log_failure_bound(p, K, N, eps):
    return (
        math.log(4 * K)
        + K / 2 * math.log(9 * K / (eps ** 2 * p))
        - N * p * (1 - p) * eps ** 2 * (1 - 2 * eps) / 2
    )


def theorem4(p, K, N, mu2):
    """Probability that an incoherent basis fails to be a local minimum.

    Raises
    ------
    PreconditionFailed
        If ``p >= 4/5``, ``p <= 0`` or ``N <= pi K / (2 (1-p)^2)``.
    """
    if not p > 0:
        raise PreconditionFailed("p <= 0")
    if p >= 0.8:
        raise PreconditionFailed("p >= 4/5")
    if K < 1:
        raise PreconditionFailed("K < 1")
    if not N > math.pi * K / (2 * (1 - p) ** 2):
        raise PreconditionFailed("N <= pi K / (2 (1-p)^2)")
    if mu2 >= 1 - p - math.sqrt(math.pi / 2 * K / N):
        return Theorem4Result(False, None, 1.0, None, "asymptotic-coherence")
    lo, hi = 0.0, 0.2
    while hi - lo > EPS_BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if mu2 <= coherence_budget(p, K, N, mid):
            lo = mid
        else:
            hi = mid
    if lo == 0.0:
        return Theorem4Result(False, None, 1.0, None, "no-feasible-eps")
    logb = log_failure_bound(p, K, N, lo)
    bound = math.exp(min(logb, 0.0))
    reason = "ok" if bound < 1.0 else "vacuous-bound"
    return Theorem4Result(bound < 1.0, lo, bound, logb, reason)


def equiangular_basis(K, mu2):
    """Basis whose Gram off-diagonal entries all equal ``mu2 / sqrt(K-1)``,
    hence ``mu_2 = mu2``."""
    if K == 1:
        return Dictionary(np.ones((1, 1)))
    rho = mu2 / math.sqrt(K - 1)
    G = (1 - rho) * np.eye(K) + rho * np.ones((K, K))
    w, V = np.linalg.eigh(G)
    if w.min() <= 0:
        raise PreconditionFailed(f"no real basis with coherence {mu2} for K={K}")
    root = V @ np.diag(np.sqrt(w)) @ V.T
    return Dictionary(root / np.linalg.norm(root, axis=0))


def smallest_n_for(p, K, mu2, target=0.01, n0=None, max_n=1 << 40):
    """Doubling search for the smallest power-of-two multiple of ``n0`` at
    which the Theorem-4 bound drops to ``target``."""
    n = n0 or math.floor(math.pi * K / (2 * (1 - p) ** 2)) + 1
    while n <= max_n:
        res = theorem4(p, K, n, mu2)
        if res.eps_star is not None and res.failure_prob_bound <= target:
            return n, res
        n *= 2
    raise PreconditionFailed(f"bound never reaches {target} below N={max_n}")


# -- Monte Carlo validation -------------------------------------------------

@dataclass(frozen=True)
class Validation:
    bound_id: str
    params: dict
    trials: int
    empirical_freq: float
    theoretical_bound: float
    passed: bool

    def to_json(self):
        return {
            "bound_id": self.bound_id,
            "params": self.params,
            "trials": self.trials,
            "empirical_freq": self.empirical_freq,
            "theoretical_bound": self.theoretical_bound,
            "pass": self.passed,
        }


def _ev_gamma(gen, p, N, eps):
    threshold, _ = bound_gamma(p, N, eps)
    return np.abs(draw(gen, N, p)).sum() > threshold


def _ev_gamma_union(gen, p, K, N, eps):
    threshold, _ = bound_gamma_union(p, K, N, eps)
    return np.abs(draw(gen, (K, N), p)).sum(axis=1).max() > threshold


def _ev_support(gen, p, N, eps):
    b = BoundInputs(p, 1, N, eps)
    zeros = int(np.count_nonzero(draw(gen, N, p) == 0.0))
    return not b.M_l <= zeros <= b.M_u


def _ev_operator(gen, p, L, M, eps):
    # the crude bound sum_i ||A_i||_2 dominates ||A^T||_{2->1}
    A = draw(gen, (L, M), p)
    return np.linalg.norm(A, axis=0).sum() > bound_operator_and_ray(p, L, M, eps).op_threshold


def _ev_ray(gen, p, L, M, eps):
    A = draw(gen, (L, M), p)
    z = np.zeros(L)
    z[0] = 1.0
    return np.abs(A.T @ z).sum() <= bound_operator_and_ray(p, L, M, eps).ray_threshold


def _ev_beta(gen, p, L, n, eps):
    B = draw(gen, (L, n), p)
    s = np.where(rng.uniform(gen, n) < 0.5, -1.0, 1.0)
    threshold, _ = bound_bs_norm(p, L, n, eps)
    return float(np.sum((B @ s) ** 2)) >= threshold


def _ev_theorem4(gen, p, K, N, mu2):
    from .conditions import Verdict, check_conditions

    D = equiangular_basis(K, mu2)
    X = CoefficientMatrix(draw(gen, (K, N), p))
    return check_conditions(D, X, threads=1, with_theorem3=False).sc is not Verdict.YES


def _theory(bound_id, params):
    P = params
    if bound_id == "gamma":
        return bound_gamma(P["p"], P["N"], P["eps"])[1]
    if bound_id == "gamma_union":
        return bound_gamma_union(P["p"], P["K"], P["N"], P["eps"])[1]
    if bound_id == "support":
        return bound_support_size(P["p"], P["N"], P["eps"])
    if bound_id == "operator":
        return bound_operator_and_ray(P["p"], P["L"], P["M"], P["eps"]).op_prob
    if bound_id == "ray":
        return bound_operator_and_ray(P["p"], P["L"], P["M"], P["eps"]).ray_prob
    if bound_id == "beta":
        return bound_bs_norm(P["p"], P["L"], P["n"], P["eps"])[1]
    if bound_id == "theorem4":
        return theorem4(P["p"], P["K"], P["N"], P["mu2"]).failure_prob_bound
    raise UnknownBoundId(bound_id)


EVENTS = {
    "gamma": (_ev_gamma, ("p", "N", "eps")),
    "gamma_union": (_ev_gamma_union, ("p", "K", "N", "eps")),
    "support": (_ev_support, ("p", "N", "eps")),
    "operator": (_ev_operator, ("p", "L", "M", "eps")),
    "ray": (_ev_ray, ("p", "L", "M", "eps")),
    "beta": (_ev_beta, ("p", "L", "n", "eps")),
    "theorem4": (_ev_theorem4, ("p", "K", "N", "mu2")),
}


def validate_bound(bound_id, params, trials, seed, threads=None):
    """Monte Carlo frequency of a bound's bad event against its theoretical
    probability.

    Passes when ``freq <= bound + 3 sqrt(bound (1 - bound) / trials)``;
    bounds at or above 1 pass trivially. Trial t uses the sub-stream
    ``derive_seed(seed, t)``.
    """
    if bound_id not in EVENTS:
        raise UnknownBoundId(bound_id)
    if trials < 100:
        raise PreconditionFailed(f"need at least 100 trials, got {trials}")
    event, names = EVENTS[bound_id]
    missing = [k for k in names if k not in params]
    if missing:
        raise PreconditionFailed(f"missing parameters for {bound_id}: {missing}")
    args = [params[k] for k in names]
    bound = _theory(bound_id, params)

    def one(t):
        return bool(event(rng.stream(rng.derive_seed(seed, t)), *args))

    hits = sum(pmap(one, range(trials), threads))
    freq = hits / trials
    if bound >= 1.0:
        passed = True
    else:
        passed = freq <= bound + 3.0 * math.sqrt(bound * (1.0 - bound) / trials)
    return Validation(bound_id, dict(params), trials, freq, bound, bool(passed))
