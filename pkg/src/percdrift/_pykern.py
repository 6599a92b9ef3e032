"""Pure-Python compute kernels.

Reference implementation of the hot inner loops: counter-hash edge
sampling, cluster searches, dual-lattice searches and the walk stepper.
The compiled backend (``percdrift._ckern``) mirrors these routines
operation for operation; outputs must be bit-identical, which is what
``tests/test_backend_parity.py`` checks. Keep the two in sync.

Search conventions shared by both backends:

* neighbor enumeration order is axis-major, plus before minus
  (+e1, -e1, +e2, -e2, ...),
* escape searches pop vertices in decreasing (L-inf distance, packed key)
  order, so the exploration sequence is deterministic,
* a vertex is admitted to a half-space/slab search when its projection
  passes the collar comparison of :mod:`percdrift.geometry`.
"""

from __future__ import annotations

import heapq
import math
from collections import deque

from .geometry import (
    COLLAR,
    EDGE_SALT,
    PACK_BITS,
    PACK_OFFSET,
    WALK_SALT,
    mix64,
    unit_double,
)

BACKEND_NAME = "python"

# Search status codes (shared with the C backend).
FINITE = 0
ESCAPED = 1
CENSORED = 2

# Exit faces.
FACE_PLUS = 0
FACE_MINUS = 1
FACE_SIDE = 2
FACE_CENSORED = 3

_MASK64 = (1 << 64) - 1
_NEG_INF = float("-inf")
_POS_INF = float("inf")


class KernelEnv:
    """Environment + bias bundle used by the inner loops.

    Holds the hash seed, the Bernoulli parameter, the bias geometry and
    the overlay map (packed edge key -> 0/1). All methods are pure with
    respect to the configuration.
    """

    def __init__(self, d, p, seed, direction, lam, frame, overlay):
        self.d = d
        self.p = float(p)
        self.seed = seed & _MASK64
        self.h0 = mix64(self.seed ^ EDGE_SALT)
        self.lam = float(lam)
        self.l = tuple(direction) + (0.0,) * (3 - d)
        self.f2 = tuple(frame[1]) + (0.0,) * (3 - d)
        self.f3 = tuple(frame[2]) + (0.0,) * (3 - d) if d == 3 else (0.0, 0.0, 0.0)
        self.wplus = [math.exp(lam * self.l[i]) for i in range(3)]
        self.wminus = [math.exp(-lam * self.l[i]) for i in range(3)]
        self.overlay = dict(overlay)
        self.has_overlay = bool(overlay)
        self._mask_cache = {}

    # -- elementary queries -------------------------------------------------

    def _pack(self, x, y, z):
        return (x + PACK_OFFSET) | ((y + PACK_OFFSET) << PACK_BITS) | ((z + PACK_OFFSET) << (2 * PACK_BITS))

    def edge_state_packed(self, packed_edge):
        if self.has_overlay:
            s = self.overlay.get(packed_edge)
            if s is not None:
                return s
        h = mix64(self.h0 ^ packed_edge)
        return 1 if unit_double(h) < self.p else 0

    def edge_state(self, bx, by, bz, axis):
        return self.edge_state_packed(self._pack(bx, by, bz) | (axis << (3 * PACK_BITS)))

    def proj(self, x, y, z):
        return x * self.l[0] + y * self.l[1] + z * self.l[2]

    def _neighbor(self, x, y, z, k):
        """k-th neighbor and the packed key of the connecting edge."""
        axis = k >> 1
        if k & 1:  # minus direction; base is the neighbor
            if axis == 0:
                nx, ny, nz = x - 1, y, z
            elif axis == 1:
                nx, ny, nz = x, y - 1, z
            else:
                nx, ny, nz = x, y, z - 1
            ek = self._pack(nx, ny, nz) | (axis << (3 * PACK_BITS))
        else:
            if axis == 0:
                nx, ny, nz = x + 1, y, z
            elif axis == 1:
                nx, ny, nz = x, y + 1, z
            else:
                nx, ny, nz = x, y, z + 1
            ek = self._pack(x, y, z) | (axis << (3 * PACK_BITS))
        return nx, ny, nz, ek

    def open_mask(self, x, y, z):
        """Bitmask of open incident edges, bit k for the k-th neighbor."""
        key = self._pack(x, y, z)
        m = self._mask_cache.get(key)
        if m is None:
            m = 0
            for k in range(2 * self.d):
                _, _, _, ek = self._neighbor(x, y, z, k)
                if self.edge_state_packed(ek):
                    m |= 1 << k
            self._mask_cache[key] = m
        return m

    # -- cluster searches ---------------------------------------------------

    def search(self, x, y, z, floor=None, ceil=None, radius=None, cap=None,
               forbidden_edge=-1, collect=False):
        """Best-first exploration of the open cluster of (x, y, z).

        Vertices are admitted when their projection lies in
        [floor - collar, ceil + collar]. The search stops with ESCAPED as
        soon as a vertex at L-inf distance >= radius from the start is
        discovered, with CENSORED when cap vertices have been visited, and
        with FINITE when the (restricted) cluster is exhausted.

        Returns (status, size, min_proj, max_proj, base, vertices) where
        base is the lexicographically-smallest vertex attaining the
        maximal projection and vertices is the visit-ordered list of
        packed keys (when collect is set). min/max projections are over
        the explored set.
        """
        flo = _NEG_INF if floor is None else floor
        chi = _POS_INF if ceil is None else ceil
        rad = radius if radius is not None else -1
        maxv = cap if cap is not None else (1 << 62)

        start_key = self._pack(x, y, z)
        visited = {start_key}
        heap = [(0, -start_key)]
        verts = [start_key] if collect else None
        size = 1
        p0 = self.proj(x, y, z)
        min_proj = max_proj = p0
        base = (x, y, z)
        status = FINITE

        while heap:
            ndist, nkey = heapq.heappop(heap)
            key = -nkey
            cx = (key & ((1 << PACK_BITS) - 1)) - PACK_OFFSET
            cy = ((key >> PACK_BITS) & ((1 << PACK_BITS) - 1)) - PACK_OFFSET
            cz = ((key >> (2 * PACK_BITS)) & ((1 << PACK_BITS) - 1)) - PACK_OFFSET
            for k in range(2 * self.d):
                nx2, ny2, nz2, ek = self._neighbor(cx, cy, cz, k)
                if ek == forbidden_edge:
                    continue
                nkey2 = self._pack(nx2, ny2, nz2)
                if nkey2 in visited:
                    continue
                if not self.edge_state_packed(ek):
                    continue
                pr = self.proj(nx2, ny2, nz2)
                if pr < flo - COLLAR or pr > chi + COLLAR:
                    continue
                visited.add(nkey2)
                size += 1
                if collect:
                    verts.append(nkey2)
                if pr > max_proj + COLLAR:
                    max_proj = pr
                    base = (nx2, ny2, nz2)
                elif pr > max_proj - COLLAR and (nx2, ny2, nz2) < base:
                    base = (nx2, ny2, nz2)
                if pr < min_proj:
                    min_proj = pr
                dist = max(abs(nx2 - x), abs(ny2 - y), abs(nz2 - z))
                if rad >= 0 and dist >= rad:
                    return ESCAPED, size, min_proj, max_proj, base, verts
                if size >= maxv:
                    return CENSORED, size, min_proj, max_proj, base, verts
                heapq.heappush(heap, (-dist, -nkey2))

        return status, size, min_proj, max_proj, base, verts

    def cluster_status(self, x, y, z, radius):
        """0 = reaches radius, 1 = exhausted first, 2 = no open incident edge."""
        if self.open_mask(x, y, z) == 0:
            return 2
        status, _, _, _, _, _ = self.search(x, y, z, radius=radius)
        return 0 if status == ESCAPED else 1

    def backtrack_bk(self, x, y, z, n_max, radius):
        """Least n in [0, n_max] whose level-(-n) half-space cluster escapes.

        Returns (value, censored, exhausted): censored means no escape up
        to n_max; exhausted additionally means the full-space cluster was
        used up, i.e. the start is not connected to distance `radius`.
        """
        p0 = self.proj(x, y, z)
        start_key = self._pack(x, y, z)
        visited = {start_key}
        heap = [(0, -start_key)]
        deferred = []            # (proj, packed) below the current floor
        deferred_seen = set()
        n = 0
        floor = p0 - n

        while True:
            while heap:
                _, nkey = heapq.heappop(heap)
                key = -nkey
                cx = (key & ((1 << PACK_BITS) - 1)) - PACK_OFFSET
                cy = ((key >> PACK_BITS) & ((1 << PACK_BITS) - 1)) - PACK_OFFSET
                cz = ((key >> (2 * PACK_BITS)) & ((1 << PACK_BITS) - 1)) - PACK_OFFSET
                for k in range(2 * self.d):
                    nx2, ny2, nz2, ek = self._neighbor(cx, cy, cz, k)
                    nkey2 = self._pack(nx2, ny2, nz2)
                    if nkey2 in visited or nkey2 in deferred_seen:
                        continue
                    if not self.edge_state_packed(ek):
                        continue
                    pr = self.proj(nx2, ny2, nz2)
                    if pr < floor - COLLAR:
                        deferred_seen.add(nkey2)
                        deferred.append((pr, nkey2))
                        continue
                    visited.add(nkey2)
                    dist = max(abs(nx2 - x), abs(ny2 - y), abs(nz2 - z))
                    if dist >= radius:
                        return n, False, False
                    heapq.heappush(heap, (-dist, -nkey2))
            # Cluster at this floor exhausted: BK > n.
            n += 1
            if n > n_max:
                return n_max, True, not deferred
            floor = p0 - n
            if deferred:
                keep = []
                for pr, vk in deferred:
                    if pr >= floor - COLLAR:
                        deferred_seen.discard(vk)
                        visited.add(vk)
                        kx = (vk & ((1 << PACK_BITS) - 1)) - PACK_OFFSET
                        ky = ((vk >> PACK_BITS) & ((1 << PACK_BITS) - 1)) - PACK_OFFSET
                        kz = ((vk >> (2 * PACK_BITS)) & ((1 << PACK_BITS) - 1)) - PACK_OFFSET
                        dist = max(abs(kx - x), abs(ky - y), abs(kz - z))
                        if dist >= radius:
                            return n, False, False
                        heapq.heappush(heap, (-dist, -vk))
                    else:
                        keep.append((pr, vk))
                deferred = keep
            elif not heap:
                # Nothing left anywhere: full cluster is finite.
                return n_max, True, True

    # -- dual lattice (d = 2) -----------------------------------------------

    def dual_edge_state(self, vx, vy, axis):
        """Open/closed state of the dual edge at dual-lattice base (vx, vy)."""
        if axis == 0:
            pk = self._pack(vx + 1, vy, 0) | (1 << (3 * PACK_BITS))
        else:
            pk = self._pack(vx, vy + 1, 0) | (0 << (3 * PACK_BITS))
        return 1 - self.edge_state_packed(pk)

    def _dual_neighbor(self, x, y, k):
        axis = k >> 1
        if k & 1:
            nx, ny = (x - 1, y) if axis == 0 else (x, y - 1)
            return nx, ny, (nx, ny, axis)
        nx, ny = (x + 1, y) if axis == 0 else (x, y + 1)
        return nx, ny, (x, y, axis)

    def dual_search(self, vx, vy, cap, targets=None, level=None):
        """Grow the open dual cluster of (vx, vy).

        Returns (hits, reached_level, censored): hits is a list of booleans
        aligned with `targets` (packed dual vertex keys); reached_level is
        set when a dual vertex with projection <= level is met (dual
        projections include the (1/2, 1/2) shift).
        """
        shift = 0.5 * (self.l[0] + self.l[1])
        want = set(targets) if targets else set()
        hit = set()
        start_key = self._pack(vx, vy, 0)
        if start_key in want:
            hit.add(start_key)
        reached = False
        if level is not None and self.proj(vx, vy, 0) + shift <= level + COLLAR:
            reached = True
        visited = {start_key}
        queue = deque([(vx, vy)])
        censored = False
        while queue:
            cx, cy = queue.popleft()
            for k in range(4):
                nx, ny, (bx, by, axis) = self._dual_neighbor(cx, cy, k)
                nkey = self._pack(nx, ny, 0)
                if nkey in visited:
                    continue
                if not self.dual_edge_state(bx, by, axis):
                    continue
                visited.add(nkey)
                if nkey in want:
                    hit.add(nkey)
                    if len(hit) == len(want) and level is None:
                        return [t in hit for t in targets], reached, False
                if level is not None and self.proj(nx, ny, 0) + shift <= level + COLLAR:
                    reached = True
                    if not want:
                        return [], True, False
                if len(visited) >= cap:
                    censored = True
                    queue.clear()
                    break
                queue.append((nx, ny))
        hits = [t in hit for t in targets] if targets else []
        return hits, reached, censored

    # -- walk ----------------------------------------------------------------

    def _walk_step(self, x, y, z, wseed_mixed, t):
        """One transition from (x, y, z); returns the new position."""
        m = self.open_mask(x, y, z)
        if m == 0:
            return x, y, z
        total = 0.0
        w = [0.0] * (2 * self.d)
        for k in range(2 * self.d):
            if m & (1 << k):
                axis = k >> 1
                wk = self.wminus[axis] if (k & 1) else self.wplus[axis]
                w[k] = wk
                total += wk
        r = unit_double(mix64(wseed_mixed ^ t)) * total
        acc = 0.0
        for k in range(2 * self.d):
            if m & (1 << k):
                acc += w[k]
                if r < acc:
                    axis = k >> 1
                    step = -1 if (k & 1) else 1
                    if axis == 0:
                        return x + step, y, z
                    if axis == 1:
                        return x, y + step, z
                    return x, y, z + step
        # r == total due to rounding: take the last open direction.
        for k in range(2 * self.d - 1, -1, -1):
            if m & (1 << k):
                axis = k >> 1
                step = -1 if (k & 1) else 1
                if axis == 0:
                    return x + step, y, z
                if axis == 1:
                    return x, y + step, z
                return x, y, z + step
        return x, y, z

    def walk_exit_box(self, x, y, z, L, Lp, walk_seed, cap):
        """Run until the walk leaves B(L, Lp); classify the exit face."""
        ws = mix64((walk_seed & _MASK64) ^ WALK_SALT)
        t = 0
        while t < cap:
            x, y, z = self._walk_step(x, y, z, ws, t)
            t += 1
            pr = x * self.l[0] + y * self.l[1] + z * self.l[2]
            if pr >= L - COLLAR:
                return FACE_PLUS, t, (x, y, z)
            if -pr >= L - COLLAR:
                return FACE_MINUS, t, (x, y, z)
            lat = x * self.f2[0] + y * self.f2[1] + z * self.f2[2]
            if abs(lat) >= Lp - COLLAR:
                return FACE_SIDE, t, (x, y, z)
            if self.d == 3:
                lat = x * self.f3[0] + y * self.f3[1] + z * self.f3[2]
                if abs(lat) >= Lp - COLLAR:
                    return FACE_SIDE, t, (x, y, z)
        return FACE_CENSORED, cap, (x, y, z)

    def walk_deltas(self, x, y, z, levels, walk_seed, cap):
        """First hitting times of the half-spaces {proj >= level}.

        levels must be increasing; returns a list of times with -1 for
        levels not reached before cap, plus the final position.
        """
        ws = mix64((walk_seed & _MASK64) ^ WALK_SALT)
        times = [-1] * len(levels)
        idx = 0
        t = 0
        pr = self.proj(x, y, z)
        while idx < len(levels) and pr >= levels[idx] - COLLAR:
            times[idx] = 0
            idx += 1
        while idx < len(levels) and t < cap:
            x, y, z = self._walk_step(x, y, z, ws, t)
            t += 1
            pr = x * self.l[0] + y * self.l[1] + z * self.l[2]
            while idx < len(levels) and pr >= levels[idx] - COLLAR:
                times[idx] = t
                idx += 1
        return times, (x, y, z)

    def walk_path(self, x, y, z, nsteps, walk_seed):
        """Positions of an nsteps-step walk, start included."""
        ws = mix64((walk_seed & _MASK64) ^ WALK_SALT)
        out = [(x, y, z)]
        for t in range(nsteps):
            x, y, z = self._walk_step(x, y, z, ws, t)
            out.append((x, y, z))
        return out

    def walk_excursions(self, ax, ay, az, tx, ty, tz, n_exc, walk_seed, cap):
        """Count excursions from a that hit the target before returning to a.

        One shared uniform stream drives all excursions (the counter keeps
        increasing), so results are reproducible. Returns (hits, censored).
        """
        ws = mix64((walk_seed & _MASK64) ^ WALK_SALT)
        t = 0
        hits = 0
        censored = 0
        for _ in range(n_exc):
            x, y, z = ax, ay, az
            steps = 0
            while True:
                x, y, z = self._walk_step(x, y, z, ws, t)
                t += 1
                steps += 1
                if x == tx and y == ty and z == tz:
                    hits += 1
                    break
                if x == ax and y == ay and z == az:
                    break
                if steps >= cap:
                    censored += 1
                    break
        return hits, censored
