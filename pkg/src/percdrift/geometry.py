"""Bias geometry, float-comparison conventions and coordinate packing.

Everything downstream (both compute backends, the cluster searches, the
walk) shares the conventions fixed here:

* projections onto the bias direction are plain double dot products,
* geometric comparisons use strict inequalities with a 1e-9 collar
  (axial directions produce exact integers, so the collar only matters
  for irrational directions),
* lattice vertices and edges are packed into 64-bit keys with 20 bits
  per coordinate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple

COLLAR = 1e-9

# Coordinates must stay in [-PACK_OFFSET, PACK_OFFSET).
PACK_OFFSET = 1 << 19
PACK_BITS = 20
_PACK_MASK = (1 << PACK_BITS) - 1
_MASK64 = (1 << 64) - 1

# Domain-separation salts for the counter-based hash streams.
EDGE_SALT = 0xA0761D6478BD642F
WALK_SALT = 0xE7037ED1A0B428DB
REPLICA_ENV_SALT = 0x8EBC6AF09C88C6E3
REPLICA_WALK_SALT = 0x589965CC75374CC3


def ge(value: float, threshold: float) -> bool:
    """value >= threshold, ties (within the collar) included."""
    return value >= threshold - COLLAR


def le(value: float, threshold: float) -> bool:
    return value <= threshold + COLLAR


def gt(value: float, threshold: float) -> bool:
    """value > threshold, ties (within the collar) excluded."""
    return value > threshold + COLLAR


def lt(value: float, threshold: float) -> bool:
    return value < threshold - COLLAR


def mix64(x: int) -> int:
    """SplitMix64 finalizer; the single source of randomness everywhere."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def unit_double(h: int) -> float:
    """Map a 64-bit hash to a double in [0, 1) using the top 53 bits."""
    return (h >> 11) * 2.0**-53


def derive_seed(master_seed: int, index: int, salt: int) -> int:
    """Per-replica stream seed; disjoint streams come from distinct salts."""
    return mix64(mix64((master_seed ^ salt) & _MASK64) ^ (index & _MASK64))


def pack_vertex(x: int, y: int, z: int = 0) -> int:
    if not (-PACK_OFFSET <= x < PACK_OFFSET and -PACK_OFFSET <= y < PACK_OFFSET
            and -PACK_OFFSET <= z < PACK_OFFSET):
        raise OverflowError(f"coordinate out of packable range: {(x, y, z)}")
    return (x + PACK_OFFSET) | ((y + PACK_OFFSET) << PACK_BITS) | ((z + PACK_OFFSET) << (2 * PACK_BITS))


def unpack_vertex(key: int, d: int) -> Tuple[int, ...]:
    x = (key & _PACK_MASK) - PACK_OFFSET
    y = ((key >> PACK_BITS) & _PACK_MASK) - PACK_OFFSET
    if d == 2:
        return (x, y)
    z = ((key >> (2 * PACK_BITS)) & _PACK_MASK) - PACK_OFFSET
    return (x, y, z)


def pack_edge(base: Sequence[int], axis0: int) -> int:
    """Pack a canonical edge: base is the lower endpoint, axis0 is 0-based."""
    bz = base[2] if len(base) == 3 else 0
    return pack_vertex(base[0], base[1], bz) | (axis0 << (3 * PACK_BITS))


def unpack_edge(key: int, d: int) -> Tuple[Tuple[int, ...], int]:
    axis0 = key >> (3 * PACK_BITS)
    return unpack_vertex(key & ((1 << (3 * PACK_BITS)) - 1), d), axis0


def _norm(v: Sequence[float]) -> float:
    return math.sqrt(sum(c * c for c in v))


def _orthonormal_frame(direction: Tuple[float, ...]) -> Tuple[Tuple[float, ...], ...]:
    """Complete f_1 = direction to an orthonormal basis, deterministically."""
    d = len(direction)
    if d == 2:
        f2 = (-direction[1], direction[0])
        return (direction, f2)
    # d == 3: Gram-Schmidt against the least-aligned coordinate axis.
    k = min(range(3), key=lambda i: abs(direction[i]))
    a = [1.0 if i == k else 0.0 for i in range(3)]
    dot = sum(a[i] * direction[i] for i in range(3))
    f2 = [a[i] - dot * direction[i] for i in range(3)]
    n = _norm(f2)
    f2 = [c / n for c in f2]
    f3 = (
        direction[1] * f2[2] - direction[2] * f2[1],
        direction[2] * f2[0] - direction[0] * f2[2],
        direction[0] * f2[1] - direction[1] * f2[0],
    )
    return (direction, tuple(f2), tuple(f3))


@dataclass(frozen=True)
class BiasSpec:
    """Bias strength and direction, with the derived drift vector and frame.

    ``lam`` is the bias strength; ``direction`` the unit direction of the
    drift. ``ell = lam * direction``. ``frame`` is an orthonormal basis
    whose first vector equals ``direction`` exactly; it defines the lateral
    coordinates of boxes. ``lam = 0`` is accepted so that unbiased sanity
    checks can share the same code paths.
    """

    lam: float
    direction: Tuple[float, ...]
    frame: Tuple[Tuple[float, ...], ...] = field(default=())

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("bias strength must be nonnegative")
        n = _norm(self.direction)
        if abs(n - 1.0) > 1e-12:
            raise ValueError(f"bias direction must be a unit vector, |l|={n!r}")
        d = len(self.direction)
        if d not in (2, 3):
            raise ValueError("supported dimensions are 2 and 3")
        frame = self.frame or _orthonormal_frame(tuple(self.direction))
        if frame[0] != tuple(self.direction):
            raise ValueError("first frame vector must equal the direction exactly")
        for i, fi in enumerate(frame):
            for j, fj in enumerate(frame):
                dot = sum(a * b for a, b in zip(fi, fj))
                want = 1.0 if i == j else 0.0
                if abs(dot - want) > 1e-12:
                    raise ValueError("frame vectors must be orthonormal")
        object.__setattr__(self, "frame", tuple(tuple(f) for f in frame))

    @property
    def d(self) -> int:
        return len(self.direction)

    @property
    def ell(self) -> Tuple[float, ...]:
        return tuple(self.lam * c for c in self.direction)

    def projection(self, x: Sequence[int]) -> float:
        p = 0.0
        for c, l in zip(x, self.direction):
            p += c * l
        return p

    def lateral(self, x: Sequence[int], i: int) -> float:
        """Coordinate of x along frame vector f_{i+1} (i >= 1)."""
        p = 0.0
        for c, f in zip(x, self.frame[i]):
            p += c * f
        return p

    def axes(self) -> Tuple[Tuple[int, ...], ...]:
        """Signed lattice directions sorted by decreasing projection.

        The first entry plays the role of the distinguished forward axis
        (maximal projection onto the direction, >= 1/sqrt(d)); signs are
        chosen so all projections are nonnegative, ties broken by axis
        index.
        """
        d = self.d
        cands = []
        for i in range(d):
            s = 1 if self.direction[i] >= 0 else -1
            v = tuple(s if j == i else 0 for j in range(d))
            cands.append((abs(self.direction[i]), -i, v))
        cands.sort(reverse=True)
        return tuple(v for _, _, v in cands)

    @property
    def forward_axis(self) -> Tuple[int, ...]:
        return self.axes()[0]


def axial_bias(lam: float, d: int = 2) -> BiasSpec:
    """Bias of strength lam along the first coordinate axis."""
    direction = tuple(1.0 if i == 0 else 0.0 for i in range(d))
    return BiasSpec(lam, direction)


def box_vertices(bias: BiasSpec, L: float, Lp: float, max_cells: int = 20_000_000):
    """Lattice points of B(L, Lp): |z.dir| < L and |z.f_i| < Lp (strict,
    with the collar). Returned as an (n, d) int64 array in lexicographic
    order."""
    import numpy as np

    d = bias.d
    bounds = []
    for i in range(d):
        b = L * abs(bias.direction[i])
        for f in bias.frame[1:]:
            b += Lp * abs(f[i])
        bounds.append(int(math.floor(b)) + 1)
    cells = 1
    for b in bounds:
        cells *= 2 * b + 1
    if cells > max_cells:
        raise MemoryError(f"bounding grid for B({L}, {Lp}) has {cells} cells")
    axes = [np.arange(-b, b + 1, dtype=np.int64) for b in bounds]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    proj = grid @ np.asarray(bias.direction)
    keep = np.abs(proj) < L - COLLAR
    for i in range(1, d):
        lat = grid @ np.asarray(bias.frame[i])
        keep &= np.abs(lat) < Lp - COLLAR
    return grid[keep]
