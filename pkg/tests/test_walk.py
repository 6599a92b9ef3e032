import math

import numpy as np
import pytest

from percdrift import oracle, walk
from percdrift.env import EnvConfig, Environment, overlay_from_pairs, pi
from percdrift.geometry import axial_bias
from percdrift.walk import WalkState, kappa_zero

from conftest import corridor_trap_overlays


def _isolated_env():
    pairs = [((0, 0), (1, 0), False), ((0, 0), (-1, 0), False),
             ((0, 0), (0, 1), False), ((0, 0), (0, -1), False)]
    return Environment(EnvConfig(d=2, p=1.0, seed=1, overlays=overlay_from_pairs(pairs)))


def test_step_isolated_holds():
    env = _isolated_env()
    bias = axial_bias(1.0, 2)
    s = walk.initial_state(bias, (0, 0), 4)
    s2 = walk.step(env, bias, s)
    assert s2.position == (0, 0) and s2.time == 1


def test_transition_probabilities(env_full):
    b0 = axial_bias(0.0, 2)
    w = walk.transition_weights(env_full, b0, (0, 0))
    total = sum(v for _, v in w)
    assert len(w) == 4
    for _, v in w:
        assert v / total == pytest.approx(0.25)

    b1 = axial_bias(1.0, 2)
    w = walk.transition_weights(env_full, b1, (0, 0))
    probs = {nb: v / sum(x for _, x in w) for nb, v in w}
    assert probs[(1, 0)] == pytest.approx(math.e / (math.e + math.exp(-1) + 2),
                                          abs=1e-6)
    assert probs[(1, 0)] == pytest.approx(0.534446, abs=1e-6)


def test_transition_sums_and_detailed_balance(env_p07, bias08):
    rng = np.random.default_rng(12)
    checked = 0
    while checked < 100:
        x = (int(rng.integers(-30, 30)), int(rng.integers(-30, 30)))
        w = walk.transition_weights(env_p07, bias08, x)
        if not w:
            continue
        total = sum(v for _, v in w)
        assert sum(v / total for _, v in w) == pytest.approx(1.0, abs=1e-12)
        pix = pi(env_p07, bias08, x)
        for y, v in w:
            piy = pi(env_p07, bias08, y)
            wy = walk.transition_weights(env_p07, bias08, y)
            back = dict(wy)[x] / sum(q for _, q in wy)
            lhs = pix * (v / total)
            rhs = piy * back
            assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), abs(rhs))
            checked += 1
            if checked >= 100:
                break


def test_kappa_zero(env_full):
    b = axial_bias(0.7, 2)
    k = kappa_zero(b)
    assert 0 < k.value <= 1 / 4
    # equals the minimal realized transition probability at a fully open vertex
    w = walk.transition_weights(env_full, b, (0, 0))
    total = sum(v for _, v in w)
    assert min(v / total for _, v in w) == pytest.approx(k.value, rel=1e-12)
    assert kappa_zero(axial_bias(0.0, 2)).value == pytest.approx(0.25)
    assert kappa_zero(axial_bias(0.0, 3)).value == pytest.approx(1 / 6)


def test_every_transition_at_least_kappa_zero(env_full, env_p07):
    b = axial_bias(0.9, 2)
    k = kappa_zero(b).value
    w = walk.transition_weights(env_full, b, (3, -2))
    total = sum(v for _, v in w)
    assert all(v / total >= k - 1e-15 for _, v in w)


def test_run_until(env_full):
    bias = axial_bias(1.0, 2)
    s = walk.initial_state(bias, (0, 0), 9)
    out, hit = walk.run_until(env_full, bias, s, lambda st: True, cap=10)
    assert hit and out.time == 0
    out, hit = walk.run_until(env_full, bias, s, lambda st: False, cap=10)
    assert not hit and out.time == 10
    out, hit = walk.run_until(env_full, bias, s,
                              lambda st: bias.projection(st.position) >= 100,
                              cap=10**6)
    assert hit


def test_record_fields(env_full):
    bias = axial_bias(0.5, 2)
    s = walk.initial_state(bias, (0, 0), 3)
    for _ in range(200):
        s = walk.step(env_full, bias, s)
        assert s.record_level >= bias.projection(s.position) - 1e-12
        assert s.min_since_record <= s.record_level + 1e-12


def test_exit_box_forced_single_step():
    # start adjacent to the plus boundary; the only open edge is forward
    pairs = [((0, 0), (-1, 0), False), ((0, 0), (0, 1), False),
             ((0, 0), (0, -1), False), ((0, 0), (1, 0), True)]
    env = Environment(EnvConfig(d=2, p=1.0, seed=1, overlays=overlay_from_pairs(pairs)))
    bias = axial_bias(1.0, 2)
    res = walk.exit_box(env, bias, (0, 0), 1, 4.0, walk_seed=5)
    assert res.face == "plus" and res.time == 1 and res.position == (1, 0)


def test_exit_box_symmetric_faces(env_full):
    bias = axial_bias(0.0, 2)
    plus = minus = 0
    for i in range(20_000):
        res = walk.exit_box(env_full, bias, (0, 0), 4, 4.0, walk_seed=i, cap=100_000)
        plus += res.face == "plus"
        minus += res.face == "minus"
    n = plus + minus
    # two-sided binomial test at 1%: z = 2.576
    assert abs(plus - n / 2) <= 2.576 * math.sqrt(n / 4)


def test_exit_box_drift_dominates(env_full):
    bias = axial_bias(1.0, 2)
    nonplus = 0
    for i in range(10_000):
        res = walk.exit_box(env_full, bias, (0, 0), 10, 4.0, walk_seed=i, cap=10**6)
        nonplus += res.face != "plus"
    assert nonplus / 10_000 < 0.05


def test_exit_box_start_validation(env_full):
    with pytest.raises(ValueError, match="inside"):
        walk.exit_box(env_full, axial_bias(1.0, 2), (5, 0), 3, 2.0, walk_seed=1)


def test_delta_n_trivial(env_full):
    bias = axial_bias(1.0, 2)
    assert walk.delta_n(env_full, bias, (0, 0), 0, walk_seed=1).value == 0
    assert walk.delta_n(env_full, bias, (3, 0), 2, walk_seed=1).value == 0
    res = walk.delta_n(env_full, bias, (0, 0), 5, walk_seed=1, cap=10)
    res2 = walk.delta_n(env_full, bias, (0, 0), 10**6, walk_seed=1, cap=10)
    assert res2.censored and res2.value == 10


def test_delta_corridor_matches_absorbing_chain():
    # 1D corridor: walk on a line segment with drift; the mean hitting
    # time of level n comes from the absorbing-chain solve.
    n = 6
    lam = 1.0
    pairs = [((-9, 0), (-8, 0), False)]   # sealed bottom: exact finite chain
    for x in range(-8, n + 1):
        pairs.append(((x, 0), (x, 1), False))
        pairs.append(((x, 0), (x, -1), False))
    env = Environment(EnvConfig(d=2, p=1.0, seed=1, overlays=overlay_from_pairs(pairs)))
    bias = axial_bias(lam, 2)
    # exact mean from the chain on the corridor [-8, n]
    verts = [(x, 0) for x in range(-8, n + 1)]
    net = oracle.extract_network(env, bias, verts, include_leaks=False)
    start = verts.index((0, 0))
    target = verts.index((n, 0))
    exact = oracle.expected_exit_time(net, start, [target])
    reps = 4000
    vals = []
    for i in range(reps):
        s = walk.delta_n(env, bias, (0, 0), n, walk_seed=i, cap=100_000)
        assert not s.censored
        vals.append(s.value)
    mean = np.mean(vals)
    se = np.std(vals, ddof=1) / math.sqrt(reps)
    assert abs(mean - exact) <= 3 * se


def test_reproducibility(env_p07, bias08):
    a = walk.walk_positions(env_p07, bias08, (0, 0), 500, walk_seed=77)
    b = walk.walk_positions(env_p07, bias08, (0, 0), 500, walk_seed=77)
    assert (a == b).all()
    c = walk.walk_positions(env_p07, bias08, (0, 0), 500, walk_seed=78)
    assert not (a == c).all()


def test_python_step_matches_kernel_path(env_p07, bias08):
    pos = walk.walk_positions(env_p07, bias08, (0, 0), 300, walk_seed=123)
    s = walk.initial_state(bias08, (0, 0), 123)
    for t in range(1, 301):
        s = walk.step(env_p07, bias08, s)
        assert s.position == tuple(pos[t])
