"""Exact computations on finite weighted networks.

This is the ground-truth layer: effective conductances, absorbing-chain
solves, principal Dirichlet eigenvalues and the universal sub-Gaussian
transition bound, all on explicit finite graphs. Conductances on the
lattice grow like exp(2 * lam * coordinate), so every solve rescales by
a scalar gauge before assembly; the reported quantities are ratios and
do not depend on the gauge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla

from .env import Environment, edge_open_bulk
from .errors import ConvergenceError, DisconnectedError
from .geometry import BiasSpec, box_vertices

DENSE_SOLVE_LIMIT = 500
CG_TOL = 1e-12
EIG_TOL = 1e-10
EIG_MAX_ITER = 10_000


@dataclass
class FiniteNetwork:
    """Finite weighted graph with boundary role tags.

    Vertices are indexed 0..n-1 and may carry labels (e.g. lattice
    coordinates). Parallel edges and self-loops are permitted; loops add
    lazy holding weight. ``extra_pi`` holds conductance mass of edges
    leaving the represented region (it enters the invariant measure and
    the killing, but not internal transitions).
    """

    n: int
    edges: List[Tuple[int, int, float]]
    boundary: Dict[int, str] = field(default_factory=dict)
    labels: Optional[List] = None
    extra_pi: Optional[np.ndarray] = None

    def __post_init__(self):
        for i, j, c in self.edges:
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) out of range")
            if not c > 0:
                raise ValueError(f"conductances must be positive, got {c}")

    # -- assembled quantities ------------------------------------------------

    def conductance_matrix(self) -> sp.csr_matrix:
        """Symmetric matrix of summed edge conductances (loops on diagonal)."""
        rows, cols, vals = [], [], []
        for i, j, c in self.edges:
            rows.append(i); cols.append(j); vals.append(c)
            if i != j:
                rows.append(j); cols.append(i); vals.append(c)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))

    def pi(self) -> np.ndarray:
        """Invariant measure: incident conductance sums plus leak mass."""
        out = np.zeros(self.n)
        for i, j, c in self.edges:
            out[i] += c
            if i != j:
                out[j] += c
        if self.extra_pi is not None:
            out = out + self.extra_pi
        return out

    def transition_matrix(self) -> np.ndarray:
        """Dense kernel P(x, y) = c(x, y) / pi(x); holding at isolated x."""
        c = self.conductance_matrix().toarray()
        piv = self.pi()
        P = np.zeros_like(c)
        live = piv > 0
        P[live] = c[live] / piv[live, None]
        for i in np.flatnonzero(~live):
            P[i, i] = 1.0
        return P

    def distances(self) -> np.ndarray:
        """Graph distances over positive-conductance edges (inf if apart)."""
        adj = self.conductance_matrix()
        adj.data[:] = 1.0
        return csgraph.shortest_path(adj, method="D", unweighted=True, directed=False)

    def component_of(self, v: int) -> np.ndarray:
        _, labels = csgraph.connected_components(self.conductance_matrix(), directed=False)
        return np.flatnonzero(labels == labels[v])

    # -- text round-trip -----------------------------------------------------

    def to_text(self) -> str:
        lines = [f"{self.n} {len(self.edges)}"]
        for i, j, c in self.edges:
            lines.append(f"{i} {j} {c!r}")
        for i in sorted(self.boundary):
            lines.append(f"b {i} {self.boundary[i]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "FiniteNetwork":
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        n, m = (int(v) for v in lines[0].split())
        edges = []
        for ln in lines[1:1 + m]:
            i, j, c = ln.split()
            edges.append((int(i), int(j), float(c)))
        boundary = {}
        for ln in lines[1 + m:]:
            tag, i, role = ln.split()
            if tag != "b":
                raise ValueError(f"unexpected line in network text: {ln!r}")
            boundary[int(i)] = role
        return cls(n, edges, boundary)


@dataclass(frozen=True)
class SpectralResult:
    lambda_min: float
    iterations: int
    residual: float


# -- extraction from environments ----------------------------------------------

def extract_network(env: Environment, bias: BiasSpec, vertices: Sequence[Tuple[int, ...]],
                    include_leaks: bool = True) -> FiniteNetwork:
    """Weighted subgraph induced by a finite vertex region.

    Edges inside the region get conductance exp((x+y).ell); vertices
    lattice-adjacent to the complement are tagged 'boundary' and (when
    include_leaks is set) carry the conductance of their open edges out
    of the region in ``extra_pi``, so network solves see the same
    invariant measure and killing as the full-lattice walk.
    """
    verts = [tuple(v) for v in vertices]
    if not verts:
        raise ValueError("empty region")
    index = {v: i for i, v in enumerate(verts)}
    d = env.d
    ell = bias.ell
    edges: List[Tuple[int, int, float]] = []
    extra = np.zeros(len(verts))
    boundary: Dict[int, str] = {}
    arr = np.asarray(verts, dtype=np.int64)
    for axis in range(d):
        for sgn in (1, -1):
            nb = arr.copy()
            nb[:, axis] += sgn
            bases = arr if sgn == 1 else nb
            states = edge_open_bulk(env, bases, np.full(len(arr), axis, dtype=np.int64))
            for i, (row, st) in enumerate(zip(nb, states)):
                w = tuple(int(c) for c in row)
                j = index.get(w)
                if j is None:
                    boundary[i] = "boundary"
                    if st and include_leaks:
                        s = sum((a + b) * l for a, b, l in zip(verts[i], w, ell))
                        extra[i] += math.exp(s)
                elif st and (sgn == 1):  # each internal edge counted once
                    s = sum((a + b) * l for a, b, l in zip(verts[i], w, ell))
                    edges.append((i, j, math.exp(s)))
    return FiniteNetwork(len(verts), edges, boundary, labels=verts,
                         extra_pi=extra if include_leaks else None)


# -- linear solves ---------------------------------------------------------------

def _solve_spd(A: sp.spmatrix, b: np.ndarray) -> np.ndarray:
    """SPD solve: dense below the size limit, Jacobi-preconditioned CG above."""
    n = A.shape[0]
    if n < DENSE_SOLVE_LIMIT:
        return scipy.linalg.solve(A.toarray(), b, assume_a="pos")
    diag = A.diagonal()
    M = sp.diags(1.0 / np.where(diag > 0, diag, 1.0))
    x, info = spla.cg(A, b, rtol=CG_TOL, atol=0.0, M=M, maxiter=20 * n)
    if info != 0:
        raise ConvergenceError(f"conjugate gradient failed to converge (info={info})")
    return x


def _check_connected(net: FiniteNetwork, a: int, b: int):
    comp = net.component_of(a)
    if b not in comp:
        raise DisconnectedError(f"vertices {a} and {b} lie in different components")


def effective_conductance(net: FiniteNetwork, a: int, b: int) -> float:
    """C(a <-> b): current through the network under unit potential drop."""
    if a == b:
        raise ValueError("endpoints must differ")
    _check_connected(net, a, b)
    comp = net.component_of(a)
    sub = {int(v): k for k, v in enumerate(comp)}
    C = net.conductance_matrix()[comp][:, comp]
    gauge = C.data.max()
    C = C / gauge
    deg = np.asarray(C.sum(axis=1)).ravel()
    lap = sp.diags(deg) - C
    ia, ib = sub[a], sub[b]
    keep = np.array([k for k in range(len(comp)) if k not in (ia, ib)], dtype=np.int64)
    v = np.zeros(len(comp))
    v[ia] = 1.0
    if len(keep):
        rhs = -lap[keep][:, [ia]].toarray().ravel()
        sol = _solve_spd(lap[keep][:, keep].tocsr(), rhs)
        v[keep] = sol
    row = C[ia].toarray().ravel()
    current = float(np.dot(row, v[ia] - v))
    return current * gauge


def escape_probability(net: FiniteNetwork, a: int, b: int, method: str = "electrical") -> float:
    """P_a[T_b < T_a^+], the chance of reaching b before returning to a.

    'electrical' evaluates C(a <-> b) / pi(a); 'chain' runs the absorbing
    harmonic solve. The two must agree (they are cross-checked in the
    tests and the acceptance suite).
    """
    if method == "electrical":
        piv = net.pi()
        if piv[a] <= 0:
            raise DisconnectedError(f"vertex {a} is isolated")
        return effective_conductance(net, a, b) / piv[a]
    if method == "chain":
        _check_connected(net, a, b)
        h = _harmonic(net, ones={b}, zeros={a})
        P = net.transition_matrix()
        return float(P[a] @ h)
    raise ValueError(f"unknown method {method!r}")


def _harmonic(net: FiniteNetwork, ones: set, zeros: set) -> np.ndarray:
    """Solve h = P h away from the absorbing sets, h=1 on ones, 0 on zeros.

    Interior vertices that cannot reach an absorbing vertex get 0.
    """
    piv = net.pi()
    C = net.conductance_matrix()
    absorbing = set(ones) | set(zeros)
    interior = np.array([i for i in range(net.n) if i not in absorbing], dtype=np.int64)
    h = np.zeros(net.n)
    for i in ones:
        h[i] = 1.0
    if len(interior) == 0:
        return h
    # Drop interior vertices with no route to the absorbing set (their
    # harmonic extension is irrelevant and the system would be singular).
    reach = _reaches_absorbing(net, absorbing)
    live = interior[reach[interior]]
    if len(live) == 0:
        return h
    sub = {int(v): k for k, v in enumerate(live)}
    Cll = C[live][:, live]
    gauge = max(piv.max(), 1.0)
    A = sp.diags(piv[live] / gauge) - Cll / gauge
    rhs = np.zeros(len(live))
    for i in ones:
        col = C[live][:, [i]].toarray().ravel()
        rhs += col / gauge
    sol = _solve_spd(A.tocsr(), rhs)
    h[live] = sol
    return h


def _reaches_absorbing(net: FiniteNetwork, absorbing: set) -> np.ndarray:
    ncomp, labels = csgraph.connected_components(net.conductance_matrix(), directed=False)
    good = np.zeros(ncomp, dtype=bool)
    for i in absorbing:
        good[labels[i]] = True
    return good[labels]


def hitting_probability(net: FiniteNetwork, start: int, A: Iterable[int],
                        B: Iterable[int]) -> float:
    """P_start[T_A < T_B] with both sets absorbing."""
    A, B = set(A), set(B)
    if A & B:
        raise ValueError("A and B must be disjoint")
    if start in A:
        return 1.0
    if start in B:
        return 0.0
    if not _reaches_absorbing(net, A | B)[start]:
        raise DisconnectedError(f"vertex {start} cannot reach the absorbing sets")
    h = _harmonic(net, ones=A, zeros=B)
    return float(h[start])


def expected_exit_time(net: FiniteNetwork, start: int, boundary: Iterable[int]) -> float:
    """Expected steps to hit the (absorbing) boundary from start."""
    boundary = set(boundary)
    if start in boundary:
        return 0.0
    if not _reaches_absorbing(net, boundary)[start]:
        raise DisconnectedError(f"vertex {start} cannot reach the boundary")
    piv = net.pi()
    C = net.conductance_matrix()
    interior = np.array([i for i in range(net.n) if i not in boundary], dtype=np.int64)
    reach = _reaches_absorbing(net, boundary)
    live = interior[reach[interior]]
    # pi-weighted system keeps the matrix symmetric: (Pi - C) h = pi.
    gauge = max(piv[live].max(), 1.0)
    A = sp.diags(piv[live] / gauge) - C[live][:, live] / gauge
    sol = _solve_spd(A.tocsr(), piv[live] / gauge)
    h = np.zeros(net.n)
    h[live] = sol
    return float(h[start])


def carne_varopoulos_check(net: FiniteNetwork, n_max: int, size_limit: int = 400) -> int:
    """Count violations of the sub-Gaussian k-step transition bound.

    Checks P_x[X_k = y] <= 2 sqrt(pi(y)/pi(x)) exp(-d(x,y)^2 / 2k) for
    all pairs and k <= n_max; must return 0 for any reversible network.
    """
    if net.n > size_limit:
        raise ValueError(f"network too large for dense powers ({net.n} > {size_limit})")
    P = net.transition_matrix()
    piv = net.pi()
    piv = np.where(piv > 0, piv, 1.0)   # isolated vertices: holding, ratio 1
    dist = net.distances()
    ratio = np.sqrt(piv[None, :] / piv[:, None])
    violations = 0
    Pk = np.eye(net.n)
    for k in range(1, n_max + 1):
        Pk = Pk @ P
        with np.errstate(over="ignore"):
            bound = 2.0 * ratio * np.exp(-dist * dist / (2.0 * k))
        bad = Pk > bound * (1 + 1e-9) + 1e-15
        violations += int(np.sum(bad))
    return violations


# -- principal Dirichlet eigenvalue ---------------------------------------------

def _box_operator(env: Environment, bias: BiasSpec, L: float, alpha: float):
    """Symmetrized killed kernel on the largest boundary-touching cluster
    of B(L, L^alpha); returns (A, labels) with A = I - M sparse, or None
    when the box carries no such cluster."""
    Lp = float(L) ** alpha
    verts = box_vertices(bias, L, Lp)
    if len(verts) == 0:
        return None
    net = extract_network(env, bias, [tuple(v) for v in verts], include_leaks=True)
    C = net.conductance_matrix()
    ncomp, labels = csgraph.connected_components(C, directed=False)
    touching = np.zeros(ncomp, dtype=bool)
    leak = net.extra_pi
    for i in np.flatnonzero(leak > 0):
        touching[labels[i]] = True
    sizes = np.bincount(labels, minlength=ncomp)
    sizes[~touching] = -1
    if sizes.max() <= 0:
        return None
    comp = int(np.argmax(sizes))  # ties: smallest label
    keep = np.flatnonzero(labels == comp)
    piv = net.pi()[keep]
    Ck = C[keep][:, keep].tocoo()
    inv_sqrt = 1.0 / np.sqrt(piv)
    data = Ck.data * inv_sqrt[Ck.row] * inv_sqrt[Ck.col]
    M = sp.csr_matrix((data, (Ck.row, Ck.col)), shape=(len(keep), len(keep)))
    A = (sp.eye(len(keep), format="csr") - M).tocsr()
    return A, [net.labels[i] for i in keep]


def dirichlet_eigenvalue(env: Environment, bias: BiasSpec, L: float, alpha: float,
                         method: str = "power", tol: float = EIG_TOL,
                         max_iter: int = EIG_MAX_ITER) -> SpectralResult:
    """Principal Dirichlet eigenvalue of I - P on the box cluster.

    Computed on the pi-symmetrized operator. Returns the +inf sentinel
    when the box contains no boundary-touching open cluster. 'power'
    runs inverse power iteration (the production path); 'dense' is the
    cross-check route through a full symmetric eigensolver.
    """
    op = _box_operator(env, bias, L, alpha)
    if op is None:
        return SpectralResult(math.inf, 0, 0.0)
    A, _ = op
    n = A.shape[0]
    if method == "dense":
        w = scipy.linalg.eigvalsh(A.toarray())
        return SpectralResult(float(w[0]), 1, 0.0)
    if method != "power":
        raise ValueError(f"unknown method {method!r}")
    rng = np.random.default_rng(12345)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = float(v @ (A @ v))
    residual = math.inf
    for it in range(1, max_iter + 1):
        v = _solve_spd(A, v)
        v /= np.linalg.norm(v)
        Av = A @ v
        lam = float(v @ Av)
        residual = float(np.linalg.norm(Av - lam * v))
        if residual < tol:
            return SpectralResult(lam, it, residual)
    raise ConvergenceError(
        f"inverse power iteration did not converge in {max_iter} iterations "
        f"(residual {residual:.3e})")
