import math

import pytest

from percdrift.env import Edge, Environment, EnvConfig, overlay_from_pairs
from percdrift.geometry import axial_bias


@pytest.fixture(scope="session")
def env_p07():
    return Environment(EnvConfig(d=2, p=0.7, seed=42))


@pytest.fixture(scope="session")
def env_full():
    return Environment(EnvConfig(d=2, p=1.0, seed=1))


@pytest.fixture(scope="session")
def env_empty():
    return Environment(EnvConfig(d=2, p=0.0, seed=1))


def corridor_trap_overlays(head=(0, 0), depth=3, head_open=True):
    """One-headed trap: open column of `depth` edges above head+e1, the
    head edge itself, and every other edge incident to the trap sealed."""
    hx, hy = head
    pairs = [((hx, hy), (hx + 1, hy), head_open)]
    trap = [(hx + 1 + k, hy) for k in range(depth + 1)]
    for k in range(depth):
        pairs.append(((hx + 1 + k, hy), (hx + 2 + k, hy), True))
    top = trap[-1]
    pairs.append((top, (top[0] + 1, top[1]), False))
    for v in trap:
        pairs.append((v, (v[0], v[1] + 1), False))
        pairs.append((v, (v[0], v[1] - 1), False))
    return overlay_from_pairs(pairs)


def trap_environment(p=0.7, seed=5, depth=3, head=(0, 0), head_open=True):
    return Environment(EnvConfig(
        d=2, p=p, seed=seed,
        overlays=corridor_trap_overlays(head=head, depth=depth, head_open=head_open)))


def sealed_box_overlays(lo=-2, hi=2):
    """Close every edge crossing the boundary of [lo, hi]^2."""
    pairs = []
    for y in range(lo, hi + 1):
        pairs.append(((lo - 1, y), (lo, y), False))
        pairs.append(((hi, y), (hi + 1, y), False))
    for x in range(lo, hi + 1):
        pairs.append(((x, lo - 1), (x, lo), False))
        pairs.append(((x, hi), (x, hi + 1), False))
    return overlay_from_pairs(pairs)


@pytest.fixture(scope="session")
def bias08():
    return axial_bias(0.8, 2)
