"""Exact finite-graph analysis of trap geometry.

Backtrack values are computed through the half-space-cluster equivalence
(the cluster of x above level x - n is finite exactly when the walk must
drop more than n below x to escape), not by path enumeration; a
path-enumeration oracle lives in the test suite. Searches use a finite
escape radius as the proxy for "infinite cluster", so results carry
censoring flags instead of silently guessing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from . import backend
from .env import Edge, Environment, edge_open, edge_open_bulk
from .errors import NotATrapError, UnsupportedDimensionError
from .geometry import BiasSpec, ge, gt, pack_edge, pack_vertex, unpack_vertex

DEFAULT_N_MAX = 30
ESCAPE_FACTOR = 40          # default escape radius is 40 * n_max lattice units
DEFAULT_CAP = 1_000_000


class CensoredSample(NamedTuple):
    """An observation that may be known only as ">= value"."""

    value: int
    censored: bool


@dataclass(frozen=True)
class HalfSpaceClusterResult:
    status: str                  # finite | escaped | censored
    size: int
    max_forward: float           # max (y - x) . direction over the explored set


@dataclass(frozen=True)
class TrapReport:
    """A one-headed trap: forward dead-end entered through a single edge."""

    head: Tuple[int, ...]
    depth: float
    size: int
    base: Tuple[int, ...]


class TrapScan(NamedTuple):
    report: Optional[TrapReport]
    censored: bool


@dataclass(frozen=True)
class BoxClassification:
    center: Tuple[int, ...]
    K: int
    eta: float
    is_open: bool
    crossing: Tuple[bool, ...]
    large_cluster_unique: bool


def default_eta(d: int) -> float:
    return 3.0 ** (-d) / 8.0


def _pad(x: Sequence[int]) -> Tuple[int, int, int]:
    x = tuple(x)
    return x + (0,) * (3 - len(x))


_STATUS = {backend.FINITE: "finite", backend.ESCAPED: "escaped", backend.CENSORED: "censored"}


def half_space_cluster(env: Environment, bias: BiasSpec, x: Sequence[int], n: float,
                       escape_radius: int, cap: int = DEFAULT_CAP) -> HalfSpaceClusterResult:
    """Explore the open cluster of x among vertices with (z-x).dir >= -n."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if escape_radius < 1:
        raise ValueError("escape_radius must be >= 1")
    k = env.kernel(bias)
    xx = _pad(x)
    p0 = k.proj(*xx)
    status, size, _, max_proj, _, _ = k.search(
        xx[0], xx[1], xx[2], floor=p0 - n, radius=escape_radius, cap=cap)
    return HalfSpaceClusterResult(_STATUS[status], size, max_proj - p0)


def backtrack_BK(env: Environment, bias: BiasSpec, x: Sequence[int],
                 n_max: int = DEFAULT_N_MAX, escape_radius: int | None = None,
                 ) -> CensoredSample:
    """Backtrack value of x: least n whose level-(-n) half-space cluster escapes.

    Vertices not connected to distance escape_radius get value 0 (the
    definition's off-cluster clause); a censored sample means the value
    exceeds n_max.
    """
    if escape_radius is None:
        escape_radius = ESCAPE_FACTOR * n_max
    k = env.kernel(bias)
    xx = _pad(x)
    value, censored, exhausted = k.backtrack_bk(xx[0], xx[1], xx[2], n_max, escape_radius)
    if not censored:
        return CensoredSample(value, False)
    if exhausted:
        # The full open cluster of x was used up: x is not connected.
        return CensoredSample(0, False)
    status = k.cluster_status(xx[0], xx[1], xx[2], escape_radius)
    if status != 0:
        return CensoredSample(0, False)
    return CensoredSample(n_max, True)


def backtrack_BK_conditioned(env: Environment, bias: BiasSpec, x: Sequence[int],
                             n_max: int = DEFAULT_N_MAX,
                             escape_radius: int | None = None,
                             ) -> Optional[CensoredSample]:
    """Backtrack sample conditioned on x being connected; None otherwise.

    An escape at any level already certifies connectivity, so the extra
    status search runs only for censored samples.
    """
    if escape_radius is None:
        escape_radius = ESCAPE_FACTOR * n_max
    k = env.kernel(bias)
    xx = _pad(x)
    value, censored, exhausted = k.backtrack_bk(xx[0], xx[1], xx[2], n_max, escape_radius)
    if not censored:
        return CensoredSample(value, False)
    if exhausted:
        return None
    if k.cluster_status(xx[0], xx[1], xx[2], escape_radius) != 0:
        return None
    return CensoredSample(n_max, True)


def detect_one_headed_trap(env: Environment, bias: BiasSpec, x: Sequence[int],
                           cap: int = 100_000) -> TrapScan:
    """Check the three one-headed-trap conditions at head x.

    (1) the forward edge [x, x + e1] is open, (2) the cluster of x + e1
    with that edge removed is finite, (3) that cluster stays in the
    forward half-space of x + e1. On success the report carries the trap
    depth (max forward displacement inside the cluster), its size, and
    the base vertex (deepest point, lexicographic tie-break).
    """
    x = tuple(x)
    e1 = bias.forward_axis
    head_next = tuple(a + b for a, b in zip(x, e1))
    lower = x if sum(e1) > 0 else head_next
    axis0 = next(i for i, c in enumerate(e1) if c != 0)
    head_edge = pack_edge(_pad(lower), axis0)
    if not env.edge_state_packed(head_edge):
        return TrapScan(None, False)
    k = env.kernel(bias)
    hx = _pad(head_next)
    status, size, min_proj, max_proj, base, _ = k.search(
        hx[0], hx[1], hx[2], forbidden_edge=head_edge, cap=cap)
    if status == backend.CENSORED:
        return TrapScan(None, True)
    p1 = k.proj(*hx)
    if not ge(min_proj, p1):
        return TrapScan(None, False)
    report = TrapReport(head=x, depth=max_proj - p1, size=size, base=base[: env.d])
    return TrapScan(report, False)


def trap_depth(env: Environment, bias: BiasSpec, y: Sequence[int],
               escape_radius: int = 200, cap: int = DEFAULT_CAP) -> float:
    """Max forward displacement over the cluster of y restricted to its
    forward half-space; raises when that cluster is unbounded."""
    k = env.kernel(bias)
    yy = _pad(y)
    p0 = k.proj(*yy)
    status, _, _, max_proj, _, _ = k.search(
        yy[0], yy[1], yy[2], floor=p0, radius=escape_radius, cap=cap)
    if status == backend.ESCAPED:
        raise NotATrapError(f"forward cluster of {tuple(y)} reaches radius {escape_radius}")
    if status == backend.CENSORED:
        raise NotATrapError(f"forward cluster of {tuple(y)} exceeds the {cap}-vertex budget")
    return max_proj - p0


# -- planar dual lattice ------------------------------------------------------

def _require_d2(env: Environment):
    if env.d != 2:
        raise UnsupportedDimensionError("the dual lattice is defined for d=2 only")


def dual_partner(e_star: Edge) -> Edge:
    """Primal edge crossing a dual edge (dual base indexes Z^2 + (1/2,1/2))."""
    vx, vy = e_star.base
    if e_star.axis == 1:
        return Edge((vx + 1, vy), 2)
    return Edge((vx, vy + 1), 1)


def dual_edge_open(env: Environment, e_star: Edge) -> bool:
    """A dual edge is open exactly when its crossing primal edge is closed."""
    _require_d2(env)
    return not edge_open(env, dual_partner(e_star))


class DualReach(NamedTuple):
    reached: bool
    censored: bool


def dual_reaches(env: Environment, bias: BiasSpec, x_star: Sequence[int], target,
                 cap: int = DEFAULT_CAP) -> DualReach:
    """Connectivity in the open dual cluster of x_star.

    target is either a dual vertex (tuple of 2 ints) or a float level c,
    meaning the half-space of dual vertices with projection <= c
    (projections include the (1/2, 1/2) dual shift).
    """
    _require_d2(env)
    k = env.kernel(bias)
    vx, vy = tuple(x_star)
    if isinstance(target, (tuple, list)):
        tkey = pack_vertex(target[0], target[1], 0)
        hits, _, censored = k.dual_search(vx, vy, cap, targets=[tkey])
        return DualReach(bool(hits[0]), censored)
    hits, reached, censored = k.dual_search(vx, vy, cap, level=float(target))
    return DualReach(bool(reached), censored)


def dual_cluster_hits(env: Environment, bias: BiasSpec, x_star: Sequence[int],
                      targets: Sequence[Tuple[int, int]], cap: int = DEFAULT_CAP,
                      ) -> Tuple[np.ndarray, bool]:
    """Membership of several dual vertices in the dual cluster of x_star."""
    _require_d2(env)
    k = env.kernel(bias)
    keys = [pack_vertex(t[0], t[1], 0) for t in targets]
    hits, _, censored = k.dual_search(x_star[0], x_star[1], cap, targets=keys)
    return np.asarray(hits, dtype=bool), censored


# -- sausage-connections (d >= 3) ---------------------------------------------

def detect_sausage_connection(env: Environment, bias: BiasSpec, x: Sequence[int],
                              y: Sequence[int], cap: int = 100_000) -> bool:
    """Five-condition check that x (bottom) and y (top) are sausage-connected.

    The slab cluster of x between the levels of y and x must contain y,
    be finite, pinch to {x, x-e1} at the top and {y, y+e1} at the bottom,
    and the non-forward edges at x and the forward edges at y (other than
    the pinch columns) must be closed.
    """
    if env.d < 3:
        raise UnsupportedDimensionError("sausage-connections are defined for d >= 3")
    k = env.kernel(bias)
    xx, yy = _pad(x), _pad(y)
    px, py = k.proj(*xx), k.proj(*yy)
    if not gt(px - py, 2.0):
        raise ValueError("precondition x.dir > y.dir + 2 violated")
    e1 = bias.forward_axis

    # Sealing conditions first: they are cheap local rejections.
    d = env.d
    for i in range(d):
        for sgn in (1, -1):
            e = tuple(sgn if j == i else 0 for j in range(d))
            proj_e = bias.projection(e)
            if e != tuple(-c for c in e1) and not gt(proj_e, 0.0):
                if _edge_state_between(env, x, tuple(a + b for a, b in zip(x, e))):
                    return False
            if e != e1 and gt(proj_e, 0.0):
                if _edge_state_between(env, y, tuple(a + b for a, b in zip(y, e))):
                    return False

    status, size, _, _, _, verts = k.search(
        xx[0], xx[1], xx[2], floor=py, ceil=px, cap=cap, collect=True)
    if status != backend.FINITE:
        return False
    coords = {unpack_vertex(v, env.d) for v in verts}
    if tuple(y) not in coords:
        return False
    x_below = tuple(a - b for a, b in zip(x, e1))
    y_above = tuple(a + b for a, b in zip(y, e1))
    p_top = bias.projection(x_below)
    p_bot = bias.projection(y_above)
    top = {c for c in coords if ge(bias.projection(c), p_top)}
    bot = {c for c in coords if not gt(bias.projection(c), p_bot)}
    if top != {tuple(x), x_below}:
        return False
    if bot != {tuple(y), y_above}:
        return False
    return True


def _edge_state_between(env: Environment, x, y) -> bool:
    from .env import edge_between
    return edge_open(env, edge_between(x, y))


def sausage_connected_to_level(env: Environment, bias: BiasSpec, n: int,
                               cap: int = 100_000) -> bool:
    """Event that 0 is sausage-connected to a unique vertex in the layer
    of level -n (projections in (-n-1, -n])."""
    if env.d < 3:
        raise UnsupportedDimensionError("sausage-connections are defined for d >= 3")
    k = env.kernel(bias)
    origin = (0,) * env.d
    # Generous slab: candidates are filtered to the open layer (-n-1, -n]
    # below, and each candidate is re-checked with its exact slab.
    status, _, _, _, _, verts = k.search(
        0, 0, 0, floor=float(-(n + 1)), ceil=0.0, cap=cap, collect=True)
    if status == backend.CENSORED:
        return False
    hits = 0
    for v in verts:
        c = unpack_vertex(v, env.d)
        pc = bias.projection(c)
        if gt(pc, -n - 1) and not gt(pc, -n):
            try:
                if detect_sausage_connection(env, bias, origin, c, cap=cap):
                    hits += 1
                    if hits > 1:
                        return False
            except ValueError:
                continue
    return hits == 1


def box_backtrack_max(env: Environment, bias: BiasSpec, L: float, alpha: float,
                      n_max: int = 15, escape_radius: int | None = None,
                      ) -> Tuple[float, bool]:
    """Max backtrack value over all vertices of B(L, L^alpha).

    Used for the Dirichlet lower-bound shape check: the eigenvalue is
    controlled by exp(-2 lam * maxBK) up to polynomial factors. Returns
    (max value, any_censored).
    """
    from .geometry import box_vertices

    verts = box_vertices(bias, L, float(L) ** alpha)
    best = 0.0
    censored = False
    for v in verts:
        s = backtrack_BK(env, bias, tuple(int(c) for c in v),
                         n_max=n_max, escape_radius=escape_radius)
        censored |= s.censored
        if s.value > best:
            best = float(s.value)
    return best, censored


# -- (K, eta)-open box classification ------------------------------------------

def classify_K_box(env: Environment, K: int, center: Sequence[int],
                   eta: float | None = None) -> BoxClassification:
    """Crossing-and-uniqueness classification of the K-box at `center`.

    The box is [-5K/8, 5K/8]^d shifted by K*center. Its largest open
    cluster must cross the box along every axis and be the unique cluster
    of size >= eta*K. Isolated vertices do not count as open clusters.
    """
    if K < 2:
        raise ValueError("K must be >= 2")
    d = env.d
    if eta is None:
        eta = default_eta(d)
    center = tuple(center)
    rng = (5 * K) // 8
    lows = [K * c - rng for c in center]
    width = 2 * rng + 1

    shape = (width,) * d
    nvert = width ** d
    idx = np.arange(nvert)
    coords = np.stack(np.unravel_index(idx, shape), axis=1)
    for i in range(d):
        coords[:, i] += lows[i]

    rows = []
    cols = []
    for axis in range(d):
        mask = coords[:, axis] < lows[axis] + width - 1
        bases = coords[mask]
        if len(bases) == 0:
            continue
        states = edge_open_bulk(env, bases, np.full(len(bases), axis, dtype=np.int64))
        src = idx[mask][states]
        step = int(np.ravel_multi_index(tuple(1 if i == axis else 0 for i in range(d)), shape))
        rows.append(src)
        cols.append(src + step)

    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    crossing = tuple(False for _ in range(d))
    if rows:
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        adj = coo_matrix((np.ones(len(r), dtype=np.int8), (r, c)), shape=(nvert, nvert))
        ncomp, labels = connected_components(adj, directed=False)
        sizes = np.bincount(labels, minlength=ncomp)
        # Open clusters have at least one edge, hence at least 2 vertices.
        open_labels = np.flatnonzero(sizes >= 2)
        if len(open_labels) > 0:
            order = np.lexsort((open_labels, -sizes[open_labels]))
            m_label = int(open_labels[order[0]])
            in_m = labels == m_label
            crossing = tuple(
                bool(np.any(in_m & (coords[:, i] == lows[i]))
                     and np.any(in_m & (coords[:, i] == lows[i] + width - 1)))
                for i in range(d)
            )
            qualifying = int(np.sum(sizes[open_labels] >= eta * K))
            unique = bool(qualifying == 1 and sizes[m_label] >= eta * K)
            return BoxClassification(center, K, eta, bool(all(crossing) and unique),
                                     crossing, unique)
    return BoxClassification(center, K, eta, False, crossing, False)
