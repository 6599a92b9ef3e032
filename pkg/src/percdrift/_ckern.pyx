# distutils: language = c++
# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled compute kernels.

Mirror of ``percdrift._pykern`` (the pure-Python reference backend);
outputs must stay bit-identical. Neighbor order, heap tie-breaking, the
collar comparisons and the hash/rng streams are all shared conventions:
see the module docstring over there before touching anything here.
"""

from cython.operator cimport dereference as deref
from libc.math cimport exp, fabs, INFINITY
from libcpp.unordered_map cimport unordered_map
from libcpp.unordered_set cimport unordered_set
from libcpp.vector cimport vector
from libcpp.queue cimport priority_queue, queue
from libcpp.pair cimport pair

ctypedef unsigned long long u64
ctypedef long long i64

BACKEND_NAME = "compiled"

FINITE = 0
ESCAPED = 1
CENSORED = 2

FACE_PLUS = 0
FACE_MINUS = 1
FACE_SIDE = 2
FACE_CENSORED = 3

DEF COLLAR = 1e-9
DEF PACK_BITS = 20
DEF PACK_OFFSET = 524288          # 1 << 19
DEF PACK_MASK = 1048575           # (1 << 20) - 1

cdef u64 EDGE_SALT = 0xA0761D6478BD642FULL
cdef u64 WALK_SALT = 0xE7037ED1A0B428DBULL
cdef double INV53 = 1.0 / 9007199254740992.0


cdef inline u64 mix64(u64 x) nogil:
    cdef u64 z = x + 0x9E3779B97F4A7C15ULL
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double unit_double(u64 h) nogil:
    return <double>(h >> 11) * INV53


cdef inline u64 pack3(long x, long y, long z) nogil:
    return (<u64>(x + PACK_OFFSET)) | ((<u64>(y + PACK_OFFSET)) << PACK_BITS) \
        | ((<u64>(z + PACK_OFFSET)) << (2 * PACK_BITS))


cdef inline long unpack_x(u64 key) nogil:
    return <long>(key & PACK_MASK) - PACK_OFFSET


cdef inline long unpack_y(u64 key) nogil:
    return <long>((key >> PACK_BITS) & PACK_MASK) - PACK_OFFSET


cdef inline long unpack_z(u64 key) nogil:
    return <long>((key >> (2 * PACK_BITS)) & PACK_MASK) - PACK_OFFSET


cdef inline long imax(long a, long b) nogil:
    return a if a > b else b


cdef inline long labs_(long a) nogil:
    return a if a >= 0 else -a


cdef class KernelEnv:
    """Environment + bias bundle shared by the compiled inner loops."""

    cdef public int d
    cdef double p
    cdef u64 seed, h0
    cdef public double lam
    cdef double l0, l1, l2
    cdef double f20, f21, f22
    cdef double f30, f31, f32
    cdef double wplus[3]
    cdef double wminus[3]
    cdef unordered_map[u64, unsigned char] overlay
    cdef bint has_overlay
    cdef unordered_map[u64, int] mask_cache

    def __init__(self, d, p, seed, direction, lam, frame, overlay):
        self.d = d
        self.p = p
        self.seed = <u64>(seed & 0xFFFFFFFFFFFFFFFF)
        self.h0 = mix64(self.seed ^ EDGE_SALT)
        self.lam = lam
        cdef list l = list(direction) + [0.0] * (3 - d)
        self.l0, self.l1, self.l2 = l[0], l[1], l[2]
        cdef list f2 = list(frame[1]) + [0.0] * (3 - d)
        self.f20, self.f21, self.f22 = f2[0], f2[1], f2[2]
        if d == 3:
            self.f30, self.f31, self.f32 = frame[2][0], frame[2][1], frame[2][2]
        else:
            self.f30 = self.f31 = self.f32 = 0.0
        cdef int i
        cdef double li
        for i in range(3):
            li = l[i]
            self.wplus[i] = exp(lam * li)
            self.wminus[i] = exp(-lam * li)
        for k, v in overlay.items():
            self.overlay[<u64>k] = <unsigned char>v
        self.has_overlay = len(overlay) > 0

    # -- elementary queries -------------------------------------------------

    cdef inline int edge_state_key(self, u64 packed_edge) nogil:
        cdef unordered_map[u64, unsigned char].iterator it
        if self.has_overlay:
            it = self.overlay.find(packed_edge)
            if it != self.overlay.end():
                return <int>deref(it).second
        return 1 if unit_double(mix64(self.h0 ^ packed_edge)) < self.p else 0

    cdef inline double cproj(self, long x, long y, long z) nogil:
        return x * self.l0 + y * self.l1 + z * self.l2

    cdef inline u64 neighbor(self, long x, long y, long z, int k,
                             long* nx, long* ny, long* nz) nogil:
        """k-th neighbor; returns the packed key of the connecting edge."""
        cdef int axis = k >> 1
        if k & 1:
            if axis == 0:
                nx[0] = x - 1; ny[0] = y; nz[0] = z
            elif axis == 1:
                nx[0] = x; ny[0] = y - 1; nz[0] = z
            else:
                nx[0] = x; ny[0] = y; nz[0] = z - 1
            return pack3(nx[0], ny[0], nz[0]) | ((<u64>axis) << (3 * PACK_BITS))
        else:
            if axis == 0:
                nx[0] = x + 1; ny[0] = y; nz[0] = z
            elif axis == 1:
                nx[0] = x; ny[0] = y + 1; nz[0] = z
            else:
                nx[0] = x; ny[0] = y; nz[0] = z + 1
            return pack3(x, y, z) | ((<u64>axis) << (3 * PACK_BITS))

    cdef inline int c_open_mask(self, long x, long y, long z):
        cdef u64 key = pack3(x, y, z)
        cdef unordered_map[u64, int].iterator it = self.mask_cache.find(key)
        if it != self.mask_cache.end():
            return deref(it).second
        cdef int m = 0, k
        cdef long nx, ny, nz
        cdef u64 ek
        for k in range(2 * self.d):
            ek = self.neighbor(x, y, z, k, &nx, &ny, &nz)
            if self.edge_state_key(ek):
                m |= 1 << k
        self.mask_cache[key] = m
        return m

    def edge_state_packed(self, packed_edge):
        return self.edge_state_key(<u64>packed_edge)

    def edge_state(self, bx, by, bz, axis):
        cdef u64 pk = pack3(bx, by, bz) | ((<u64>axis) << (3 * PACK_BITS))
        return self.edge_state_key(pk)

    def proj(self, x, y, z):
        return self.cproj(x, y, z)

    def open_mask(self, x, y, z):
        return self.c_open_mask(x, y, z)

    # -- cluster searches ---------------------------------------------------

    def search(self, x, y, z, floor=None, ceil=None, radius=None, cap=None,
               forbidden_edge=-1, collect=False):
        """See the Python backend for the exact contract; identical here."""
        cdef double flo = -INFINITY if floor is None else floor
        cdef double chi = INFINITY if ceil is None else ceil
        cdef i64 rad = -1 if radius is None else radius
        cdef u64 maxv = (<u64>1 << 62) if cap is None else cap
        cdef u64 forb = <u64>(<i64>forbidden_edge)
        cdef long sx = x, sy = y, sz = z

        cdef u64 start_key = pack3(sx, sy, sz)
        cdef unordered_set[u64] visited
        visited.insert(start_key)
        cdef priority_queue[pair[i64, u64]] heap
        heap.push(pair[i64, u64](0, start_key))
        cdef vector[u64] verts
        cdef bint do_collect = collect
        if do_collect:
            verts.push_back(start_key)
        cdef u64 size = 1
        cdef double p0 = self.cproj(sx, sy, sz)
        cdef double min_proj = p0, max_proj = p0, pr
        cdef long bx_ = sx, by_ = sy, bz_ = sz
        cdef long cx, cy, cz, nx, ny, nz
        cdef i64 dist
        cdef u64 key, ek, nkey2
        cdef int k, status = FINITE

        while not heap.empty():
            key = heap.top().second
            heap.pop()
            cx = unpack_x(key); cy = unpack_y(key); cz = unpack_z(key)
            for k in range(2 * self.d):
                ek = self.neighbor(cx, cy, cz, k, &nx, &ny, &nz)
                if ek == forb:
                    continue
                nkey2 = pack3(nx, ny, nz)
                if visited.count(nkey2):
                    continue
                if not self.edge_state_key(ek):
                    continue
                pr = self.cproj(nx, ny, nz)
                if pr < flo - COLLAR or pr > chi + COLLAR:
                    continue
                visited.insert(nkey2)
                size += 1
                if do_collect:
                    verts.push_back(nkey2)
                if pr > max_proj + COLLAR:
                    max_proj = pr
                    bx_ = nx; by_ = ny; bz_ = nz
                elif pr > max_proj - COLLAR and lex_less(nx, ny, nz, bx_, by_, bz_, self.d):
                    bx_ = nx; by_ = ny; bz_ = nz
                if pr < min_proj:
                    min_proj = pr
                dist = imax(imax(labs_(nx - sx), labs_(ny - sy)), labs_(nz - sz))
                if rad >= 0 and dist >= rad:
                    return ESCAPED, size, min_proj, max_proj, self._vtup(bx_, by_, bz_), self._vlist(verts, do_collect)
                if size >= maxv:
                    return CENSORED, size, min_proj, max_proj, self._vtup(bx_, by_, bz_), self._vlist(verts, do_collect)
                heap.push(pair[i64, u64](dist, nkey2))

        return status, size, min_proj, max_proj, self._vtup(bx_, by_, bz_), self._vlist(verts, do_collect)

    cdef object _vtup(self, long x, long y, long z):
        return (x, y, z)

    cdef object _vlist(self, vector[u64]& verts, bint do_collect):
        if not do_collect:
            return None
        cdef list out = []
        cdef size_t i
        for i in range(verts.size()):
            out.append(verts[i])
        return out

    def cluster_status(self, x, y, z, radius):
        if self.c_open_mask(x, y, z) == 0:
            return 2
        status = self.search(x, y, z, radius=radius)[0]
        return 0 if status == ESCAPED else 1

    def backtrack_bk(self, x, y, z, n_max, radius):
        cdef long sx = x, sy = y, sz = z
        cdef i64 rad = radius
        cdef long nmax = n_max
        cdef double p0 = self.cproj(sx, sy, sz)
        cdef u64 start_key = pack3(sx, sy, sz)
        cdef unordered_set[u64] visited, deferred_seen
        visited.insert(start_key)
        cdef priority_queue[pair[i64, u64]] heap
        heap.push(pair[i64, u64](0, start_key))
        cdef vector[pair[double, u64]] deferred, keep
        cdef long n = 0
        cdef double floor = p0 - n, pr
        cdef long cx, cy, cz, nx, ny, nz, kx, ky, kz
        cdef u64 key, ek, nkey2, vk
        cdef i64 dist
        cdef int k
        cdef size_t j

        while True:
            while not heap.empty():
                key = heap.top().second
                heap.pop()
                cx = unpack_x(key); cy = unpack_y(key); cz = unpack_z(key)
                for k in range(2 * self.d):
                    ek = self.neighbor(cx, cy, cz, k, &nx, &ny, &nz)
                    nkey2 = pack3(nx, ny, nz)
                    if visited.count(nkey2) or deferred_seen.count(nkey2):
                        continue
                    if not self.edge_state_key(ek):
                        continue
                    pr = self.cproj(nx, ny, nz)
                    if pr < floor - COLLAR:
                        deferred_seen.insert(nkey2)
                        deferred.push_back(pair[double, u64](pr, nkey2))
                        continue
                    visited.insert(nkey2)
                    dist = imax(imax(labs_(nx - sx), labs_(ny - sy)), labs_(nz - sz))
                    if dist >= rad:
                        return n, False, False
                    heap.push(pair[i64, u64](dist, nkey2))
            n += 1
            if n > nmax:
                return nmax, True, deferred.size() == 0
            floor = p0 - n
            if deferred.size() > 0:
                keep.clear()
                for j in range(deferred.size()):
                    pr = deferred[j].first
                    vk = deferred[j].second
                    if pr >= floor - COLLAR:
                        deferred_seen.erase(vk)
                        visited.insert(vk)
                        kx = unpack_x(vk); ky = unpack_y(vk); kz = unpack_z(vk)
                        dist = imax(imax(labs_(kx - sx), labs_(ky - sy)), labs_(kz - sz))
                        if dist >= rad:
                            return n, False, False
                        heap.push(pair[i64, u64](dist, vk))
                    else:
                        keep.push_back(deferred[j])
                deferred.swap(keep)
            elif heap.empty():
                return nmax, True, True

    # -- dual lattice (d = 2) -----------------------------------------------

    cdef inline int dual_edge_state_c(self, long vx, long vy, int axis) nogil:
        cdef u64 pk
        if axis == 0:
            pk = pack3(vx + 1, vy, 0) | ((<u64>1) << (3 * PACK_BITS))
        else:
            pk = pack3(vx, vy + 1, 0)
        return 1 - self.edge_state_key(pk)

    def dual_edge_state(self, vx, vy, axis):
        return self.dual_edge_state_c(vx, vy, axis)

    def dual_search(self, vx, vy, cap, targets=None, level=None):
        cdef double shift = 0.5 * (self.l0 + self.l1)
        cdef bint has_level = level is not None
        cdef double lev = level if has_level else 0.0
        cdef u64 capv = cap
        cdef long svx = vx, svy = vy

        cdef unordered_set[u64] want, hit
        cdef list tlist = list(targets) if targets else []
        for t in tlist:
            want.insert(<u64>t)
        cdef u64 start_key = pack3(svx, svy, 0)
        if want.count(start_key):
            hit.insert(start_key)
        cdef bint reached = False
        if has_level and self.cproj(svx, svy, 0) + shift <= lev + COLLAR:
            reached = True
        cdef unordered_set[u64] visited
        visited.insert(start_key)
        cdef queue[pair[long, long]] q
        q.push(pair[long, long](svx, svy))
        cdef bint censored = False
        cdef long cx, cy, nx, ny, bx, by
        cdef int k, axis
        cdef u64 nkey

        while not q.empty():
            cx = q.front().first
            cy = q.front().second
            q.pop()
            for k in range(4):
                axis = k >> 1
                if k & 1:
                    if axis == 0:
                        nx = cx - 1; ny = cy
                    else:
                        nx = cx; ny = cy - 1
                    bx = nx; by = ny
                else:
                    if axis == 0:
                        nx = cx + 1; ny = cy
                    else:
                        nx = cx; ny = cy + 1
                    bx = cx; by = cy
                nkey = pack3(nx, ny, 0)
                if visited.count(nkey):
                    continue
                if not self.dual_edge_state_c(bx, by, axis):
                    continue
                visited.insert(nkey)
                if want.count(nkey):
                    hit.insert(nkey)
                    if hit.size() == want.size() and not has_level:
                        return [hit.count(<u64>t) > 0 for t in tlist], reached, False
                if has_level and self.cproj(nx, ny, 0) + shift <= lev + COLLAR:
                    reached = True
                    if want.size() == 0:
                        return [], True, False
                if visited.size() >= capv:
                    censored = True
                    while not q.empty():
                        q.pop()
                    break
                q.push(pair[long, long](nx, ny))
        hits = [hit.count(<u64>t) > 0 for t in tlist] if tlist else []
        return hits, reached, censored

    # -- walk ----------------------------------------------------------------

    cdef inline void step_c(self, long* x, long* y, long* z, u64 ws, u64 t):
        cdef int m = self.c_open_mask(x[0], y[0], z[0])
        if m == 0:
            return
        cdef double total = 0.0
        cdef double w[6]
        cdef int k, axis
        for k in range(2 * self.d):
            w[k] = 0.0
            if m & (1 << k):
                axis = k >> 1
                w[k] = self.wminus[axis] if (k & 1) else self.wplus[axis]
                total += w[k]
        cdef double r = unit_double(mix64(ws ^ t)) * total
        cdef double acc = 0.0
        cdef long step
        for k in range(2 * self.d):
            if m & (1 << k):
                acc += w[k]
                if r < acc:
                    axis = k >> 1
                    step = -1 if (k & 1) else 1
                    if axis == 0:
                        x[0] += step
                    elif axis == 1:
                        y[0] += step
                    else:
                        z[0] += step
                    return
        for k in range(2 * self.d - 1, -1, -1):
            if m & (1 << k):
                axis = k >> 1
                step = -1 if (k & 1) else 1
                if axis == 0:
                    x[0] += step
                elif axis == 1:
                    y[0] += step
                else:
                    z[0] += step
                return

    def walk_exit_box(self, x, y, z, L, Lp, walk_seed, cap):
        cdef long cx = x, cy = y, cz = z
        cdef double dL = L, dLp = Lp
        cdef u64 ws = mix64((<u64>(walk_seed & 0xFFFFFFFFFFFFFFFF)) ^ WALK_SALT)
        cdef u64 t = 0, capv = cap
        cdef double pr, lat
        while t < capv:
            self.step_c(&cx, &cy, &cz, ws, t)
            t += 1
            pr = cx * self.l0 + cy * self.l1 + cz * self.l2
            if pr >= dL - COLLAR:
                return FACE_PLUS, t, (cx, cy, cz)
            if -pr >= dL - COLLAR:
                return FACE_MINUS, t, (cx, cy, cz)
            lat = cx * self.f20 + cy * self.f21 + cz * self.f22
            if fabs(lat) >= dLp - COLLAR:
                return FACE_SIDE, t, (cx, cy, cz)
            if self.d == 3:
                lat = cx * self.f30 + cy * self.f31 + cz * self.f32
                if fabs(lat) >= dLp - COLLAR:
                    return FACE_SIDE, t, (cx, cy, cz)
        return FACE_CENSORED, capv, (cx, cy, cz)

    def walk_deltas(self, x, y, z, levels, walk_seed, cap):
        cdef long cx = x, cy = y, cz = z
        cdef u64 ws = mix64((<u64>(walk_seed & 0xFFFFFFFFFFFFFFFF)) ^ WALK_SALT)
        cdef vector[double] levs
        for lv in levels:
            levs.push_back(lv)
        cdef list times = [-1] * levs.size()
        cdef size_t idx = 0
        cdef u64 t = 0, capv = cap
        cdef double pr = self.cproj(cx, cy, cz)
        while idx < levs.size() and pr >= levs[idx] - COLLAR:
            times[idx] = 0
            idx += 1
        while idx < levs.size() and t < capv:
            self.step_c(&cx, &cy, &cz, ws, t)
            t += 1
            pr = cx * self.l0 + cy * self.l1 + cz * self.l2
            while idx < levs.size() and pr >= levs[idx] - COLLAR:
                times[idx] = t
                idx += 1
        return times, (cx, cy, cz)

    def walk_path(self, x, y, z, nsteps, walk_seed):
        cdef long cx = x, cy = y, cz = z
        cdef u64 ws = mix64((<u64>(walk_seed & 0xFFFFFFFFFFFFFFFF)) ^ WALK_SALT)
        cdef u64 t
        cdef u64 n = nsteps
        cdef list out = [(cx, cy, cz)]
        for t in range(n):
            self.step_c(&cx, &cy, &cz, ws, t)
            out.append((cx, cy, cz))
        return out

    def walk_excursions(self, ax, ay, az, tx, ty, tz, n_exc, walk_seed, cap):
        cdef long sax = ax, say = ay, saz = az
        cdef long stx = tx, sty = ty, stz = tz
        cdef u64 ws = mix64((<u64>(walk_seed & 0xFFFFFFFFFFFFFFFF)) ^ WALK_SALT)
        cdef u64 t = 0
        cdef long hits = 0, censored = 0, i, n = n_exc
        cdef u64 steps, capv = cap
        cdef long cx, cy, cz
        for i in range(n):
            cx = sax; cy = say; cz = saz
            steps = 0
            while True:
                self.step_c(&cx, &cy, &cz, ws, t)
                t += 1
                steps += 1
                if cx == stx and cy == sty and cz == stz:
                    hits += 1
                    break
                if cx == sax and cy == say and cz == saz:
                    break
                if steps >= capv:
                    censored += 1
                    break
        return hits, censored


cdef inline bint lex_less(long ax, long ay, long az, long bx, long by, long bz, int d) nogil:
    if ax != bx:
        return ax < bx
    if ay != by:
        return ay < by
    if d == 3 and az != bz:
        return az < bz
    return False
