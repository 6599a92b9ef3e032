import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from percdrift.env import (
    Edge,
    EnvConfig,
    Environment,
    conductance,
    edge_between,
    edge_open,
    edge_open_bulk,
    infinite_cluster_status,
    load_overlay_file,
    overlay_from_pairs,
    pi,
)
from percdrift.geometry import BiasSpec, axial_bias

from conftest import sealed_box_overlays


def test_degenerate_densities():
    full = Environment(EnvConfig(d=2, p=1.0, seed=3))
    empty = Environment(EnvConfig(d=2, p=0.0, seed=3))
    for e in [Edge((0, 0), 1), Edge((5, -7), 2), Edge((-100, 3), 1)]:
        assert edge_open(full, e)
        assert not edge_open(empty, e)


def test_density_binomial_band(env_p07):
    n = 10**6
    rng = np.random.default_rng(0)
    bases = rng.integers(-50_000, 50_000, size=(n, 2))
    axes = rng.integers(0, 2, size=n)
    frac = edge_open_bulk(env_p07, bases, axes).mean()
    band = 3 * math.sqrt(0.7 * 0.3 / n)
    assert abs(frac - 0.7) < band


def test_bulk_matches_scalar(env_p07):
    rng = np.random.default_rng(1)
    bases = rng.integers(-1000, 1000, size=(2000, 2))
    axes = rng.integers(0, 2, size=2000)
    bulk = edge_open_bulk(env_p07, bases, axes)
    for (x, y), a, b in zip(bases, axes, bulk):
        assert edge_open(env_p07, Edge((int(x), int(y)), int(a) + 1)) == b


@settings(max_examples=200, deadline=None)
@given(x=st.integers(-10**5, 10**5), y=st.integers(-10**5, 10**5),
       axis=st.integers(1, 2))
def test_determinism_across_instances(x, y, axis):
    a = Environment(EnvConfig(d=2, p=0.37, seed=99))
    b = Environment(EnvConfig(d=2, p=0.37, seed=99))
    assert edge_open(a, Edge((x, y), axis)) == edge_open(b, Edge((x, y), axis))


def test_overlay_dominance():
    probe = Edge((3, 4), 1)
    plain = Environment(EnvConfig(d=2, p=0.0, seed=7))
    forced = Environment(EnvConfig(d=2, p=0.0, seed=7,
                                   overlays=((probe, True),)))
    assert not edge_open(plain, probe)
    assert edge_open(forced, probe)
    # non-overlaid edges are untouched
    rng = np.random.default_rng(2)
    hash_env = Environment(EnvConfig(d=2, p=0.5, seed=7))
    hash_env_ov = Environment(EnvConfig(d=2, p=0.5, seed=7,
                                        overlays=((probe, True),)))
    for _ in range(500):
        e = Edge((int(rng.integers(-99, 99)), int(rng.integers(-99, 99))),
                 int(rng.integers(1, 3)))
        if e != probe:
            assert edge_open(hash_env, e) == edge_open(hash_env_ov, e)


def test_overlay_conflict_rejected():
    e = Edge((0, 0), 1)
    with pytest.raises(ValueError, match="conflicting"):
        EnvConfig(d=2, p=0.5, seed=1, overlays=((e, True), (e, False)))


def test_unsupported_dimension_rejected():
    with pytest.raises(ValueError, match="dimensions"):
        EnvConfig(d=4, p=0.5, seed=1)


def test_conductance_values(env_p07):
    b05 = axial_bias(0.5, 2)
    closed = Environment(EnvConfig(d=2, p=0.0, seed=1))
    assert conductance(closed, b05, (0, 0), (1, 0)) == 0.0
    full = Environment(EnvConfig(d=2, p=1.0, seed=1))
    b0 = axial_bias(0.0, 2)
    assert conductance(full, b0, (0, 0), (1, 0)) == 1.0
    assert conductance(full, b05, (0, 0), (1, 0)) == pytest.approx(
        1.6487212707, abs=1e-9)


def test_conductance_symmetry(env_p07, bias08):
    rng = np.random.default_rng(3)
    for _ in range(300):
        x = (int(rng.integers(-40, 40)), int(rng.integers(-40, 40)))
        axis = int(rng.integers(0, 2))
        y = (x[0] + (axis == 0), x[1] + (axis == 1))
        assert conductance(env_p07, bias08, x, y) == conductance(env_p07, bias08, y, x)


def test_pi_values():
    full = Environment(EnvConfig(d=2, p=1.0, seed=1))
    assert pi(full, axial_bias(0.0, 2), (0, 0)) == pytest.approx(4.0)
    assert pi(full, axial_bias(1.0, 2), (0, 0)) == pytest.approx(
        math.e + math.exp(-1) + 2, abs=1e-9)
    iso = Environment(EnvConfig(d=2, p=0.0, seed=1))
    assert pi(iso, axial_bias(1.0, 2), (0, 0)) == 0.0


def test_cluster_status_cases():
    full = Environment(EnvConfig(d=2, p=1.0, seed=1))
    assert infinite_cluster_status(full, (0, 0), 5) == "connected"
    assert infinite_cluster_status(full, (17, -3), 50) == "connected"

    sealed = Environment(EnvConfig(d=2, p=1.0, seed=1,
                                   overlays=sealed_box_overlays(-2, 2)))
    assert infinite_cluster_status(sealed, (0, 0), 10) == "disconnected"

    pairs = [((0, 0), (1, 0), False), ((0, 0), (-1, 0), False),
             ((0, 0), (0, 1), False), ((0, 0), (0, -1), False)]
    iso = Environment(EnvConfig(d=2, p=1.0, seed=1,
                                overlays=overlay_from_pairs(pairs)))
    assert infinite_cluster_status(iso, (0, 0), 10) == "isolated"


def test_overlay_file_roundtrip(tmp_path):
    path = tmp_path / "patch.txt"
    path.write_text("# comment\n0 0 1 1\n2 -3 2 0\n\n")
    ov = load_overlay_file(path, 2)
    assert ov == ((Edge((0, 0), 1), True), (Edge((2, -3), 2), False))
    with pytest.raises(ValueError, match="fields"):
        load_overlay_file(_write(tmp_path, "bad.txt", "0 0 1\n"), 2)
    with pytest.raises(ValueError, match="state"):
        load_overlay_file(_write(tmp_path, "bad2.txt", "0 0 1 7\n"), 2)


def _write(dirpath, name, text):
    p = dirpath / name
    p.write_text(text)
    return p


def test_edge_between_canonical():
    assert edge_between((0, 0), (1, 0)) == Edge((0, 0), 1)
    assert edge_between((1, 0), (0, 0)) == Edge((0, 0), 1)
    assert edge_between((2, 5), (2, 4)) == Edge((2, 4), 2)
    with pytest.raises(ValueError):
        edge_between((0, 0), (1, 1))


def test_d3_environment_basics():
    env = Environment(EnvConfig(d=3, p=1.0, seed=11))
    b = axial_bias(0.5, 3)
    assert pi(env, b, (0, 0, 0)) == pytest.approx(
        math.exp(0.5) + math.exp(-0.5) + 4, abs=1e-9)
    assert infinite_cluster_status(env, (0, 0, 0), 4) == "connected"
