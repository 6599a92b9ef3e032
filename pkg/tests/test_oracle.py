import math

import numpy as np
import pytest

from percdrift import oracle
from percdrift.env import EnvConfig, Environment, overlay_from_pairs
from percdrift.errors import DisconnectedError
from percdrift.experiments import random_network
from percdrift.geometry import axial_bias

from _oracles import gamblers_ruin
from conftest import corridor_trap_overlays, sealed_box_overlays


def test_extract_network_full_window(env_full):
    b0 = axial_bias(0.0, 2)
    verts = [(0, 0), (1, 0), (0, 1), (1, 1)]
    net = oracle.extract_network(env_full, b0, verts)
    assert net.n == 4 and len(net.edges) == 4
    assert all(c == pytest.approx(1.0) for _, _, c in net.edges)
    assert set(net.boundary) == {0, 1, 2, 3}


def test_extract_network_isolated():
    pairs = [((0, 0), (1, 0), False), ((0, 0), (-1, 0), False),
             ((0, 0), (0, 1), False), ((0, 0), (0, -1), False)]
    env = Environment(EnvConfig(d=2, p=1.0, seed=1, overlays=overlay_from_pairs(pairs)))
    net = oracle.extract_network(env, axial_bias(0.5, 2), [(0, 0)])
    assert net.n == 1 and net.edges == []
    with pytest.raises(ValueError, match="empty"):
        oracle.extract_network(env, axial_bias(0.5, 2), [])


def test_extract_network_corridor_conductances():
    # corridor vertices (i, 0), i = 0..5, axial lam = 0.5: conductance of
    # edge [i, i+1] is exp((2i+1) * 0.5)
    env = Environment(EnvConfig(d=2, p=1.0, seed=1))
    b = axial_bias(0.5, 2)
    verts = [(i, 0) for i in range(6)]
    net = oracle.extract_network(env, b, verts, include_leaks=False)
    got = sorted((min(i, j), math.log(c)) for i, j, c in net.edges)
    want = sorted((i, (2 * i + 1) * 0.5) for i in range(5))
    for (gi, gc), (wi, wc) in zip(got, want):
        assert gi == wi and gc == pytest.approx(wc, abs=1e-12)


def test_series_parallel_laws():
    n = 7
    series = oracle.FiniteNetwork(n + 1, [(i, i + 1, 1.0) for i in range(n)])
    assert oracle.effective_conductance(series, 0, n) == pytest.approx(1 / n)
    k = 5
    par = oracle.FiniteNetwork(2, [(0, 1, 1.0)] * k)
    assert oracle.effective_conductance(par, 0, 1) == pytest.approx(k)


def test_rayleigh_monotonicity():
    rng = np.random.default_rng(14)
    net = random_network(rng, 20)
    base = oracle.effective_conductance(net, 0, 19)
    deletions = 0
    while deletions < 50:
        idx = int(rng.integers(0, len(net.edges)))
        edges = [e for j, e in enumerate(net.edges) if j != idx]
        cand = oracle.FiniteNetwork(20, edges)
        try:
            c = oracle.effective_conductance(cand, 0, 19)
        except DisconnectedError:
            deletions += 1
            continue
        assert c <= base * (1 + 1e-9)
        deletions += 1


def test_escape_probability_basics():
    two = oracle.FiniteNetwork(2, [(0, 1, 1.0)])
    assert oracle.escape_probability(two, 0, 1) == pytest.approx(1.0)
    path2 = oracle.FiniteNetwork(3, [(0, 1, 1.0), (1, 2, 1.0)])
    assert oracle.escape_probability(path2, 0, 2) == pytest.approx(0.5)


def test_escape_methods_agree_random():
    rng = np.random.default_rng(21)
    for _ in range(20):
        net = random_network(rng, 24)
        a, b = 0, 23
        pe = oracle.escape_probability(net, a, b, "electrical")
        pc = oracle.escape_probability(net, a, b, "chain")
        assert abs(pe - pc) < 1e-10


def test_reversibility_identity_escape():
    # pi(b) P_b[T_t < T_b^+] = pi(t) P_t[T_b < T_t^+] (both equal C(b <-> t))
    rng = np.random.default_rng(22)
    for _ in range(10):
        net = random_network(rng, 15)
        piv = net.pi()
        a, b = 2, 11
        lhs = piv[a] * oracle.escape_probability(net, a, b)
        rhs = piv[b] * oracle.escape_probability(net, b, a)
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), abs(rhs))


def test_hitting_probability_cases():
    net = oracle.FiniteNetwork(5, [(i, i + 1, 1.0) for i in range(4)])
    assert oracle.hitting_probability(net, 0, [0], [4]) == 1.0
    assert oracle.hitting_probability(net, 4, [0], [4]) == 0.0
    assert oracle.hitting_probability(net, 2, [4], [0]) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        oracle.hitting_probability(net, 2, [0, 1], [1, 4])


def test_hitting_matches_gamblers_ruin():
    rho = 1.8
    n = 9
    net = oracle.FiniteNetwork(n + 1, [(i, i + 1, rho**i) for i in range(n)])
    for k in range(1, n):
        got = oracle.hitting_probability(net, k, [n], [0])
        assert got == pytest.approx(gamblers_ruin(rho, k, n), rel=1e-10)


def test_expected_exit_time_cases():
    net = oracle.FiniteNetwork(3, [(0, 1, 1.0), (1, 2, 1.0)])
    assert oracle.expected_exit_time(net, 0, [0, 2]) == 0.0
    # single interior vertex leaving with probability q per step: mean 1/q
    q_net = oracle.FiniteNetwork(3, [(0, 1, 3.0), (1, 1, 1.0)])
    # holding loop of weight 1, exit weight 3: q = 3/4 wait; use transition
    P = q_net.transition_matrix()
    q = P[1, 0]
    assert oracle.expected_exit_time(q_net, 1, [0]) == pytest.approx(1 / q)


def test_network_text_roundtrip():
    net = oracle.FiniteNetwork(3, [(0, 1, 1.5), (1, 2, 0.25)], {0: "in", 2: "out"})
    text = net.to_text()
    back = oracle.FiniteNetwork.from_text(text)
    assert back.n == net.n and back.edges == net.edges and back.boundary == net.boundary


def test_dirichlet_empty_intersection():
    env = Environment(EnvConfig(d=2, p=0.0, seed=1))
    sr = oracle.dirichlet_eigenvalue(env, axial_bias(0.5, 2), 3, 1.0)
    assert math.isinf(sr.lambda_min)


def test_dirichlet_segment_matches_dense_and_closed_form():
    # open 1D segment of m = 2k+1 interior vertices with absorbing ends:
    # lambda = 1 - cos(pi / (m + 1)) for the unbiased chain
    k = 5
    m = 2 * k + 1
    pairs = [((-k - 1, 0), (-k, 0), True), ((k, 0), (k + 1, 0), True)]
    pairs += [((x, 0), (x + 1, 0), True) for x in range(-k, k)]
    env = Environment(EnvConfig(d=2, p=0.0, seed=1,
                                overlays=overlay_from_pairs(pairs)))
    b0 = axial_bias(0.0, 2)
    got = oracle.dirichlet_eigenvalue(env, b0, k + 0.5, 1.0, method="power")
    dense = oracle.dirichlet_eigenvalue(env, b0, k + 0.5, 1.0, method="dense")
    assert abs(got.lambda_min - dense.lambda_min) < 1e-8
    assert got.residual < 1e-10
    assert got.lambda_min == pytest.approx(1 - math.cos(math.pi / (m + 1)), abs=1e-9)


def test_dirichlet_power_matches_dense_random(env_p07, bias08):
    for L in (4, 6):
        a = oracle.dirichlet_eigenvalue(env_p07, bias08, L, 1.0, method="power")
        b = oracle.dirichlet_eigenvalue(env_p07, bias08, L, 1.0, method="dense")
        assert abs(a.lambda_min - b.lambda_min) < 1e-8
        assert 0.0 <= a.lambda_min <= 2.0


def test_dirichlet_monotone_in_extra_killing():
    # opening an extra boundary edge (more leak mass) never decreases
    # the eigenvalue
    rng = np.random.default_rng(3)
    checked = 0
    seed = 0
    bias = axial_bias(0.6, 2)
    while checked < 10:
        seed += 1
        env = Environment(EnvConfig(d=2, p=0.75, seed=seed))
        base = oracle._box_operator(env, bias, 5, 1.0)
        if base is None:
            continue
        A, labels = base
        # add killing at a random kept vertex: scale its M row/col down,
        # equivalent to increasing pi(x) by a leak
        n = A.shape[0]
        if n < 3:
            continue
        i = int(rng.integers(0, n))
        scale = np.ones(n)
        scale[i] = 1 / math.sqrt(2.0)   # pi(i) doubled
        M = (np.eye(n) - A.toarray()) * scale[:, None] * scale[None, :]
        lam0 = np.linalg.eigvalsh(np.eye(n) - (np.eye(n) - A.toarray()))[0]
        lam1 = np.linalg.eigvalsh(np.eye(n) - M)[0]
        assert lam1 >= lam0 - 1e-12
        checked += 1


def test_cv_check_trivial_bounds():
    # k = 1, adjacent vertices on the fully open unbiased lattice: the
    # bound 2 e^{-1/2} exceeds any realized transition probability
    assert 2 * math.exp(-0.5) > 0.25
    net = oracle.FiniteNetwork(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)])
    assert oracle.carne_varopoulos_check(net, 20) == 0


def test_cv_check_random_nets():
    rng = np.random.default_rng(5)
    total = 0
    for _ in range(10):
        net = random_network(rng, 30)
        total += oracle.carne_varopoulos_check(net, 30)
    assert total == 0


def test_cv_size_cap():
    rng = np.random.default_rng(6)
    net = random_network(rng, 30)
    with pytest.raises(ValueError, match="too large"):
        oracle.carne_varopoulos_check(net, 5, size_limit=10)
