"""Desk-scale experiments: the 2D cost landscape, the coherence / sparsity
phase diagram and zonotope snapshots for K = 3.

For d = K = 2 with atoms ``a(t) = (cos t, sin t)`` the l1 cost of the basis
``[a(t0), a(t1)]`` has the closed form

    cost(t0, t1) = (h(t0) + h(t1)) / |sin(t1 - t0)|,
    h(t) = sum_n |sin(t) y1n - cos(t) y2n|,

obtained from Cramer's rule, so a whole grid costs O(res * N + res^2).
"""

from dataclasses import dataclass
import math

import numpy as np

from . import rng
from .bgmodel import BGParams, sample
from .conditions import row_value
from .errors import DimensionMismatch, EmptyGrid
from .model import angle_dictionary, as_coefficients, row_blocks
from .parallel import pmap

DEFAULT_RESOLUTION = 180
DEFAULT_SIN_TOL = math.sin(math.radians(1.0)) / 2.0


@dataclass(frozen=True, eq=False)
class LandscapeGrid:
    resolution: int
    values: np.ndarray
    theta_star: tuple
    thetas: np.ndarray


def grid_angles(resolution):
    return np.arange(resolution) * (math.pi / resolution)


def landscape2d(Y, theta_star, resolution=DEFAULT_RESOLUTION, sin_tol=DEFAULT_SIN_TOL):
    """``values[i, j] = ||D(t_i, t_j)^-1 Y||_1`` on the grid ``t_i = i pi / res``.

    Cells with ``|sin(t_j - t_i)| < sin_tol`` (near-singular bases, including
    the diagonal) are ``+inf``.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if Y.shape[0] != 2:
        raise DimensionMismatch(f"landscape needs 2-dimensional signals, got d={Y.shape[0]}")
    if resolution < 1:
        raise ValueError(f"resolution must be positive, got {resolution}")
    t = grid_angles(resolution)
    h = np.abs(np.outer(np.sin(t), Y[0]) - np.outer(np.cos(t), Y[1])).sum(axis=1)
    det = np.abs(np.sin(t[None, :] - t[:, None]))
    with np.errstate(divide="ignore", invalid="ignore"):
        values = (h[:, None] + h[None, :]) / det
    values[det < sin_tol] = np.inf
    return LandscapeGrid(resolution, values, tuple(float(a) for a in theta_star), t)


@dataclass(frozen=True)
class Minima:
    cells: list
    plateau: bool


def find_local_minima(grid):
    """Cells strictly below all 8 neighbours (indices wrap modulo the grid,
    i.e. modulo pi in angle). Infinite cells are never minima; finite cells
    tied with their smallest neighbour set the plateau flag instead."""
    V = np.asarray(grid.values if isinstance(grid, LandscapeGrid) else grid, dtype=float)
    finite = np.isfinite(V)
    if not finite.any():
        raise EmptyGrid("no finite cells in the landscape")
    nb = np.full(V.shape, np.inf)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                nb = np.minimum(nb, np.roll(np.roll(V, di, axis=0), dj, axis=1))
    strict = finite & (V < nb)
    plateau = bool(np.any(finite & (V == nb)))
    cells = [(int(i), int(j)) for i, j in zip(*np.nonzero(strict))]
    return Minima(cells, plateau)


def global_minimum(grid):
    V = grid.values if isinstance(grid, LandscapeGrid) else np.asarray(grid)
    i, j = np.unravel_index(int(np.argmin(V)), V.shape)
    return int(i), int(j)


def nearest_cell(theta, resolution):
    return int(round(theta / (math.pi / resolution))) % resolution


def _torus_close(a, b, res, tol=1):
    return all(min((x - y) % res, (y - x) % res) <= tol for x, y in zip(a, b))


def expected_cells(theta_star, resolution):
    i0 = nearest_cell(theta_star[0], resolution)
    i1 = nearest_cell(theta_star[1], resolution)
    return [(i0, i1), (i1, i0)]


def phase_angles(mu):
    """Centred atom pair with ``|<a0, a1>| = mu``."""
    gap = math.acos(mu)
    t0 = (math.pi - gap) / 2.0
    return t0, t0 + gap


@dataclass(frozen=True)
class TrialOutcome:
    missed: bool
    spurious: bool
    wrong_global: bool

    @property
    def error(self):
        return self.missed or self.spurious or self.wrong_global


def classify_trial(grid):
    """Compare detected minima with the ground-truth cells (+-1 cell)."""
    res = grid.resolution
    exp = expected_cells(grid.theta_star, res)
    found = find_local_minima(grid).cells
    missed = any(not any(_torus_close(e, c, res) for c in found) for e in exp)
    spurious = any(not any(_torus_close(c, e, res) for e in exp) for c in found)
    g = global_minimum(grid)
    wrong = not any(_torus_close(g, e, res) for e in exp)
    return TrialOutcome(missed, spurious, wrong)


def run_trial(mu, p, N, resolution, seed):
    thetas = phase_angles(mu)
    D = angle_dictionary(thetas)
    X = sample(BGParams(p, 2, N, seed))
    grid = landscape2d(np.asarray(D) @ X.X, thetas, resolution)
    return classify_trial(grid)


@dataclass(frozen=True)
class PhaseCell:
    mu: float
    p: float
    trials: int
    missed: int
    spurious: int
    wrong_global: int
    errors: int

    @property
    def error_rate(self):
        return self.errors / self.trials


def phase_experiment(mu_grid, p_grid, trials, N=1000, resolution=DEFAULT_RESOLUTION,
                     seed=0, threads=None):
    """Monte Carlo over the (mu, p) grid, mu varying slowest.

    Trial t of cell c uses ``derive_seed(derive_seed(seed, c), t)``. Error
    types are counted independently; ``errors`` counts trials with at least
    one of them.
    """
    if trials < 1:
        raise ValueError(f"need at least one trial, got {trials}")
    rng.check_seed(seed)
    cells = [(float(m), float(p)) for m in mu_grid for p in p_grid]
    jobs = [
        (c, t, m, p)
        for c, (m, p) in enumerate(cells)
        for t in range(trials)
    ]

    def one(job):
        c, t, m, p = job
        return run_trial(m, p, N, resolution, rng.derive_seed(rng.derive_seed(seed, c), t))

    outcomes = pmap(one, jobs, threads)
    out = []
    for c, (m, p) in enumerate(cells):
        res = outcomes[c * trials:(c + 1) * trials]
        out.append(PhaseCell(
            mu=m,
            p=p,
            trials=trials,
            missed=sum(o.missed for o in res),
            spurious=sum(o.spurious for o in res),
            wrong_global=sum(o.wrong_global for o in res),
            errors=sum(o.error for o in res),
        ))
    return out


# -- zonotopes ------------------------------------------------------------

def zonotope_vertices(G, tol=1e-12):
    """Counter-clockwise vertices of the zonotope ``G Q`` (G is 2 x M).

    Generators are flipped into the upper half-plane, parallel ones merged,
    and sorted by angle; starting from the lowest vertex the boundary adds
    ``2 g`` in angle order and then subtracts ``2 g`` in the same order.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    if G.shape[0] != 2:
        raise DimensionMismatch(f"generators must be 2-dimensional, got {G.shape[0]}")
    scale = max(np.abs(G).max(initial=0.0), 1e-300)
    keep = np.linalg.norm(G, axis=0) > tol * scale
    G = G[:, keep]
    if G.shape[1] == 0:
        return np.zeros((1, 2))
    flip = (G[1] < 0) | ((G[1] == 0) & (G[0] < 0))
    G = np.where(flip, -G, G)
    ang = np.arctan2(G[1], G[0])
    order = np.argsort(ang, kind="stable")
    merged = []
    for idx in order:
        g = G[:, idx]
        if merged:
            last = merged[-1]
            cross = last[0] * g[1] - last[1] * g[0]
            if abs(cross) <= tol * np.linalg.norm(last) * np.linalg.norm(g):
                merged[-1] = last + g
                continue
        merged.append(g.copy())
    # the first and last directions may also be parallel (angles 0 and ~pi)
    if len(merged) > 1:
        a, b = merged[0], merged[-1]
        cross = a[0] * b[1] - a[1] * b[0]
        if abs(cross) <= tol * np.linalg.norm(a) * np.linalg.norm(b):
            merged[0] = a - b
            merged.pop()
    start = -np.sum(merged, axis=0)
    verts = [start]
    for g in merged:
        verts.append(verts[-1] + 2 * g)
    for g in merged[:-1]:
        verts.append(verts[-1] - 2 * g)
    return np.array(verts)


def polygon_area(V):
    """Shoelace area of a vertex list."""
    V = np.asarray(V, dtype=float)
    if len(V) < 3:
        return 0.0
    x, y = V[:, 0], V[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def polygon_perimeter(V):
    V = np.asarray(V, dtype=float)
    if len(V) < 2:
        return 0.0
    return float(np.linalg.norm(np.roll(V, -1, axis=0) - V, axis=1).sum())


def zonotope_area(G):
    """``4 sum_{i<j} |det(g_i, g_j)|`` for the zonotope ``G Q``, Q = [-1, 1]^M."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    dets = np.abs(np.outer(G[0], G[1]) - np.outer(G[1], G[0]))
    return 2.0 * float(dets.sum())


def isoperimetric_ratio(V):
    """``4 pi area / perimeter^2``: 1 for a disc, pi/4 for a square."""
    per = polygon_perimeter(V)
    if per == 0.0:
        return 0.0
    return 4.0 * math.pi * polygon_area(V) / per ** 2


def polygon_contains(V, u, tol=1e-12):
    """Closed containment of ``u`` in the convex counter-clockwise polygon V."""
    V = np.asarray(V, dtype=float)
    u = np.asarray(u, dtype=float)
    scale = 1.0 + np.abs(V).max(initial=0.0) + np.abs(u).max(initial=0.0)
    if len(V) == 1:
        return bool(np.all(np.abs(u - V[0]) <= tol * scale))
    E = np.roll(V, -1, axis=0) - V
    W = u[None, :] - V
    cross = E[:, 0] * W[:, 1] - E[:, 1] * W[:, 0]
    if not np.all(cross >= -tol * scale * scale):
        return False
    if len(V) == 2:
        # a segment: also require u between its end points
        t = float(np.dot(u - V[0], E[0]) / np.dot(E[0], E[0]))
        return -tol <= t <= 1.0 + tol
    return True


@dataclass(frozen=True, eq=False)
class Snapshot:
    k: int
    vertices: np.ndarray
    v: np.ndarray
    u: np.ndarray
    contains_u: bool
    per_k_value: float

    def to_json(self):
        val = self.per_k_value
        return {
            "k": self.k,
            "vertices": self.vertices.tolist(),
            "v": self.v.tolist(),
            "u": self.u.tolist(),
            "contains_u": self.contains_u,
            "per_k_value": "inf" if math.isinf(val) else val,
        }


def zonotope_snapshot(X, D, k):
    """Zonotope ``Xbar_k Q`` with the points ``v_k`` and ``u_k`` (K = 3)."""
    X = as_coefficients(X)
    if X.K != 3:
        raise DimensionMismatch(f"snapshots need K = 3, got K={X.K}")
    b = row_blocks(X, D, k)
    verts = zonotope_vertices(b.Xbark)
    value, _ = row_value(b.Xbark, b.uk)
    return Snapshot(
        k=k,
        vertices=verts,
        v=np.array(b.vk),
        u=np.array(b.uk),
        contains_u=polygon_contains(verts, b.uk),
        per_k_value=float(value),
    )
