"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written with different algorithms and
data structures than the production code: exhaustive self-avoiding-path
enumeration for backtrack values, union-find for box classification, a
quadratic double loop for regeneration detection.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Sequence, Tuple


class BudgetExceeded(Exception):
    pass


def bk_min_over_saps(edge_states: Dict[Tuple[Tuple[int, int], int], bool],
                     start: Tuple[int, int], lo: int, hi: int,
                     budget: int = 3_000_000) -> Optional[int]:
    """Min over self-avoiding escape paths of the maximal descent.

    edge_states fixes every edge with both endpoints in the core box
    [lo, hi]^2 (keys are (base, axis0)); edges leaving the box are open
    (the surrounding environment is fully open). A path escapes when it
    steps outside the core box; beyond it the fully open half-plane lets
    it ascend freely, so its final value is the descent accumulated so
    far. Returns None when no path escapes, raises BudgetExceeded when
    the enumeration outgrows the node budget.
    """
    sx = start[0]
    nodes = 0
    best: Optional[int] = None

    def edge_open(a: Tuple[int, int], b: Tuple[int, int]) -> bool:
        if a[0] == b[0]:
            base = a if a[1] < b[1] else b
            axis = 1
        else:
            base = a if a[0] < b[0] else b
            axis = 0
        inside = all(lo <= v[0] <= hi and lo <= v[1] <= hi for v in (a, b))
        if inside:
            return edge_states[(base, axis)]
        return True

    path = {start}

    def dfs(v: Tuple[int, int], maxdesc: int):
        nonlocal nodes, best
        nodes += 1
        if nodes > budget:
            raise BudgetExceeded
        for nb in ((v[0] + 1, v[1]), (v[0] - 1, v[1]),
                   (v[0], v[1] + 1), (v[0], v[1] - 1)):
            if nb in path or not edge_open(v, nb):
                continue
            nd = max(maxdesc, sx - nb[0])
            if best is not None and nd >= best:
                continue
            if not (lo <= nb[0] <= hi and lo <= nb[1] <= hi):
                best = nd if best is None else min(best, nd)
                continue
            path.add(nb)
            dfs(nb, nd)
            path.discard(nb)

    dfs(start, 0)
    return best


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


def classify_box_uf(env, K: int, center: Sequence[int], eta: float):
    """Union-find reimplementation of the (K, eta)-open classification."""
    from percdrift.env import Edge, edge_open

    d = env.d
    rng = (5 * K) // 8
    lows = [K * c - rng for c in center]
    width = 2 * rng + 1
    coords = []
    if d == 2:
        for x in range(lows[0], lows[0] + width):
            for y in range(lows[1], lows[1] + width):
                coords.append((x, y))
    else:
        for x in range(lows[0], lows[0] + width):
            for y in range(lows[1], lows[1] + width):
                for z in range(lows[2], lows[2] + width):
                    coords.append((x, y, z))
    index = {v: i for i, v in enumerate(coords)}
    uf = UnionFind(len(coords))
    has_edge = [False] * len(coords)
    for v in coords:
        for axis in range(d):
            w = tuple(c + (1 if j == axis else 0) for j, c in enumerate(v))
            if w in index and edge_open(env, Edge(v, axis + 1)):
                uf.union(index[v], index[w])
                has_edge[index[v]] = has_edge[index[w]] = True
    comp_sizes: Dict[int, int] = {}
    for i, v in enumerate(coords):
        if has_edge[i]:
            r = uf.find(i)
            comp_sizes[r] = comp_sizes.get(r, 0) + 1
    if not comp_sizes:
        return False, tuple(False for _ in range(d)), False
    m_root = max(comp_sizes, key=lambda r: (comp_sizes[r], -r))
    crossing = []
    for axis in range(d):
        touch_lo = touch_hi = False
        for v in coords:
            i = index[v]
            if has_edge[i] and uf.find(i) == m_root:
                if v[axis] == lows[axis]:
                    touch_lo = True
                if v[axis] == lows[axis] + width - 1:
                    touch_hi = True
        crossing.append(touch_lo and touch_hi)
    qualifying = sum(1 for s in comp_sizes.values() if s >= eta * K)
    unique = qualifying == 1 and comp_sizes[m_root] >= eta * K
    return all(crossing) and unique, tuple(crossing), unique


def regenerations_bruteforce(times: Sequence[int], proj: Sequence[float],
                             horizon: int) -> List[Tuple[int, bool]]:
    """O(n^2) application of the fresh-record/future-minimum definition."""
    n = len(proj)
    out = []
    for t in range(n):
        if any(proj[s] >= proj[t] for s in range(t)):
            continue
        if any(proj[s] < proj[t] for s in range(t + 1, n)):
            continue
        out.append((int(times[t]), bool(times[-1] - times[t] >= horizon)))
    return out


def gamblers_ruin(rho: float, k: int, n: int) -> float:
    """P_k[T_n < T_0] for the birth-death chain whose edge (i, i+1) has
    conductance rho^i: resistances in series."""
    num = sum(rho**-i for i in range(k))
    den = sum(rho**-i for i in range(n))
    return num / den
