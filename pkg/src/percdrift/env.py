"""Percolation environments on Z^d.

An :class:`Environment` is a deterministic, lazily evaluated bond
configuration: the state of an edge is a threshold test on a 64-bit
counter-based hash of (seed, canonical edge), so the infinite lattice
needs O(1) memory and any two processes agree on every edge. Explicit
overlays (finite edge -> state maps) take precedence over the hash
stream and are the mechanism for building test traps and corridors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Mapping, NamedTuple, Sequence, Tuple

import numpy as np

from . import backend
from .geometry import EDGE_SALT, BiasSpec, mix64, pack_edge

__all__ = [
    "Edge",
    "EnvConfig",
    "Environment",
    "edge_open",
    "conductance",
    "pi",
    "infinite_cluster_status",
    "load_overlay_file",
]

_U64 = np.uint64
_MASK64 = (1 << 64) - 1


class Edge(NamedTuple):
    """Canonical lattice edge: base vertex plus 1-based axis.

    The edge joins ``base`` and ``base + e_axis``; the canonical form has
    the lower endpoint along the axis as base, which makes it unique per
    unordered vertex pair.
    """

    base: Tuple[int, ...]
    axis: int


def edge_between(x: Sequence[int], y: Sequence[int]) -> Edge:
    """Canonical edge for an adjacent pair; raises if x, y are not neighbors."""
    diff = [b - a for a, b in zip(x, y)]
    nz = [i for i, v in enumerate(diff) if v != 0]
    if len(nz) != 1 or abs(diff[nz[0]]) != 1:
        raise ValueError(f"{tuple(x)} and {tuple(y)} are not nearest neighbors")
    i = nz[0]
    base = tuple(x) if diff[i] == 1 else tuple(y)
    return Edge(base, i + 1)


@dataclass(frozen=True)
class EnvConfig:
    """Environment parameters: dimension, density, seed and overlays."""

    d: int
    p: float
    seed: int
    overlays: Tuple[Tuple[Edge, bool], ...] = field(default=())

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError(f"supported dimensions are 2 and 3, got d={self.d}")
        if not (0.0 <= self.p <= 1.0):
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        seen: Dict[Edge, bool] = {}
        for e, state in self.overlays:
            if len(e.base) != self.d:
                raise ValueError(f"overlay edge {e} has wrong dimension")
            if not (1 <= e.axis <= self.d):
                raise ValueError(f"overlay edge axis out of range: {e}")
            if seen.get(e, state) != state:
                raise ValueError(f"conflicting overlay states for edge {e}")
            seen[e] = state
        object.__setattr__(self, "overlays", tuple(sorted(seen.items())))


class Environment:
    """Immutable view of a percolation configuration.

    Safe to share across any number of concurrent readers; all operations
    are pure functions of (seed, p, overlays) and their arguments.
    """

    def __init__(self, config: EnvConfig):
        self.config = config
        self.d = config.d
        self.p = config.p
        self.seed = config.seed & _MASK64
        self._h0 = mix64(self.seed ^ EDGE_SALT)
        self._overlay_packed: Dict[int, int] = {
            pack_edge(e.base, e.axis - 1): int(state) for e, state in config.overlays
        }
        self._kernels: Dict[BiasSpec, object] = {}

    # Kernel instances are cached per bias; they carry the walk weights.
    def kernel(self, bias: BiasSpec):
        k = self._kernels.get(bias)
        if k is None:
            if bias.d != self.d:
                raise ValueError("bias dimension does not match environment")
            k = backend.make_kernel_env(
                self.d, self.p, self.seed, bias.direction, bias.lam, bias.frame,
                self._overlay_packed,
            )
            self._kernels[bias] = k
        return k

    def _null_kernel(self):
        """Kernel with zero bias, used for purely geometric searches."""
        return self.kernel(_null_bias(self.d))

    def edge_state_packed(self, packed: int) -> int:
        s = self._overlay_packed.get(packed)
        if s is not None:
            return s
        from .geometry import unit_double
        return 1 if unit_double(mix64(self._h0 ^ packed)) < self.p else 0

    def __repr__(self):
        return (f"Environment(d={self.d}, p={self.p}, seed={self.seed}, "
                f"overlays={len(self._overlay_packed)})")


def _null_bias(d: int) -> BiasSpec:
    return BiasSpec(0.0, tuple(1.0 if i == 0 else 0.0 for i in range(d)))


# -- spec operations ---------------------------------------------------------

def edge_open(env: Environment, e: Edge) -> bool:
    """State of a canonical edge: overlay if present, else Bernoulli(p) hash."""
    return bool(env.edge_state_packed(pack_edge(e.base, e.axis - 1)))


def conductance(env: Environment, bias: BiasSpec, x: Sequence[int], y: Sequence[int]) -> float:
    """exp((x+y).ell) if x ~ y and the edge is open, else 0."""
    try:
        e = edge_between(x, y)
    except ValueError:
        return 0.0
    if not edge_open(env, e):
        return 0.0
    s = 0.0
    for a, b, l in zip(x, y, bias.ell):
        s += (a + b) * l
    return math.exp(s)


def pi(env: Environment, bias: BiasSpec, x: Sequence[int]) -> float:
    """Invariant measure: sum of incident conductances; 0 iff x is isolated."""
    total = 0.0
    x = tuple(x)
    for i in range(env.d):
        for sgn in (1, -1):
            y = tuple(c + (sgn if j == i else 0) for j, c in enumerate(x))
            total += conductance(env, bias, x, y)
    return total


def infinite_cluster_status(env: Environment, x: Sequence[int], escape_radius: int) -> str:
    """Finite proxy for membership in the infinite cluster.

    'connected' when the open cluster of x reaches L-inf distance
    escape_radius from x, 'disconnected' when it is exhausted first,
    'isolated' when x has no open incident edge.
    """
    if escape_radius < 1:
        raise ValueError("escape_radius must be >= 1")
    k = env._null_kernel()
    xx = tuple(x) + (0,) * (3 - env.d)
    code = k.cluster_status(xx[0], xx[1], xx[2], escape_radius)
    return ("connected", "disconnected", "isolated")[code]


# -- overlay and config files -------------------------------------------------

def load_overlay_file(path: str | Path, d: int) -> Tuple[Tuple[Edge, bool], ...]:
    """Line-oriented overlay patches: "x1 ... xd axis state" per line.

    Blank lines and lines starting with '#' are skipped; state is 0/1.
    """
    out = []
    for ln, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != d + 2:
            raise ValueError(f"{path}:{ln}: expected {d + 2} fields, got {len(parts)}")
        coords = tuple(int(v) for v in parts[:d])
        axis = int(parts[d])
        state = int(parts[d + 1])
        if state not in (0, 1):
            raise ValueError(f"{path}:{ln}: state must be 0 or 1")
        out.append((Edge(coords, axis), bool(state)))
    return tuple(out)


def overlay_from_pairs(pairs: Iterable[Tuple[Sequence[int], Sequence[int], bool]],
                       ) -> Tuple[Tuple[Edge, bool], ...]:
    """Overlay entries from (x, y, state) vertex pairs."""
    return tuple((edge_between(x, y), bool(s)) for x, y, s in pairs)


# -- vectorized edge sampling --------------------------------------------------

def _mix64_np(x: np.ndarray) -> np.ndarray:
    z = x + _U64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
    return z ^ (z >> _U64(31))


def edge_open_bulk(env: Environment, bases: np.ndarray, axes0: np.ndarray) -> np.ndarray:
    """Vectorized edge states for canonical edges (0-based axes).

    bases has shape (n, d); returns a boolean array of length n. Matches
    edge_open exactly, overlays included.
    """
    n, d = bases.shape
    packed = (bases[:, 0].astype(np.int64) + (1 << 19)).astype(_U64)
    packed |= (bases[:, 1].astype(np.int64) + (1 << 19)).astype(_U64) << _U64(20)
    if d == 3:
        zcol = bases[:, 2].astype(np.int64)
    else:
        zcol = np.zeros(n, dtype=np.int64)
    packed |= (zcol + (1 << 19)).astype(_U64) << _U64(40)
    packed |= axes0.astype(_U64) << _U64(60)
    h = _mix64_np(_U64(env._h0) ^ packed)
    u = (h >> _U64(11)).astype(np.float64) * 2.0**-53
    out = u < env.p
    if env._overlay_packed:
        for i, key in enumerate(packed.tolist()):
            s = env._overlay_packed.get(key)
            if s is not None:
                out[i] = bool(s)
    return out
