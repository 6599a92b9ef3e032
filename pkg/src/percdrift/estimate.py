"""Estimators: tail exponents, the critical bias, speed and scaling slopes.

The decay rate of P[BK(0) > n] gives zeta; gamma = zeta / (2 lam) and
lambda_c = zeta / 2 follow by arithmetic. In d = 2, zeta can be
cross-estimated from directional inverse correlation lengths of the dual
(subcritical) percolation; in d >= 3 from sausage-connection
frequencies. Fits are weighted least squares on log survival /
log frequency curves; zero-frequency cells enter through the
rule-of-three upper bound instead of being dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .cluster import (
    DEFAULT_N_MAX,
    CensoredSample,
    backtrack_BK_conditioned,
    dual_cluster_hits,
    sausage_connected_to_level,
)
from .env import EnvConfig, Environment
from .errors import DegenerateSampleError, InsufficientDataError
from .geometry import REPLICA_ENV_SALT, REPLICA_WALK_SALT, BiasSpec, derive_seed
from .regen import GapStatistics

__all__ = [
    "TailFit", "PhaseReport", "SpeedEstimate",
    "fit_exponential_tail", "fit_log_frequency",
    "estimate_zeta", "estimate_xi", "estimate_zeta_sausage", "zeta_from_xi",
    "phase_report", "estimate_speed", "displacement_exponent", "exit_face_decay",
]


@dataclass(frozen=True)
class TailFit:
    """Weighted log-linear fit of a survival or frequency curve.

    ``slope`` is the raw regression slope of log S against n (negative
    for decaying tails); ``rate`` is its negation, the exponential decay
    rate.
    """

    slope: float
    stderr: float
    window: Tuple[float, float]
    r2: float
    n_samples: int
    n_censored: int

    @property
    def rate(self) -> float:
        return -self.slope


@dataclass(frozen=True)
class PhaseReport:
    zeta_hat: float
    zeta_stderr: float
    gamma_hat: float
    gamma_stderr: float
    lambda_c_hat: float
    regime: str            # ballistic | sub_ballistic | near_critical
    margin: float


@dataclass(frozen=True)
class SpeedEstimate:
    endpoint: Tuple[float, ...]
    endpoint_ci: Tuple[float, float]       # 95% CI for v . direction
    regeneration: Optional[Tuple[float, ...]]
    regeneration_ci: Optional[Tuple[float, float]]
    n_replicas: int
    n_discarded: int


def _weighted_line(xs: np.ndarray, ys: np.ndarray, ws: np.ndarray):
    """Weighted least squares line; returns slope, intercept, stderr, r2."""
    W = ws.sum()
    xbar = float((ws * xs).sum() / W)
    ybar = float((ws * ys).sum() / W)
    sxx = float((ws * (xs - xbar) ** 2).sum())
    if sxx <= 0:
        raise DegenerateSampleError("fit window has no spread in n")
    slope = float((ws * (xs - xbar) * (ys - ybar)).sum() / sxx)
    intercept = ybar - slope * xbar
    resid = ys - (slope * xs + intercept)
    dof = max(len(xs) - 2, 1)
    sigma2 = float((ws * resid**2).sum() / dof)
    stderr = math.sqrt(sigma2 / sxx)
    syy = float((ws * (ys - ybar) ** 2).sum())
    r2 = 1.0 - float((ws * resid**2).sum()) / syy if syy > 0 else 1.0
    return slope, intercept, stderr, r2


def fit_exponential_tail(samples: Sequence[CensoredSample],
                         window: Tuple[int, int]) -> TailFit:
    """Fit log empirical survival against n over the window.

    Survival at n counts samples with value > n; a censored sample
    (known only as >= value) contributes below its cap only. Requires at
    least 100 uncensored samples with values inside the window.
    """
    n_lo, n_hi = window
    if n_lo >= n_hi:
        raise ValueError("window must satisfy n_lo < n_hi")
    if not samples:
        raise InsufficientDataError("no samples")
    N = len(samples)
    ncens = sum(1 for s in samples if s.censored)
    if ncens == N:
        raise InsufficientDataError("all samples censored")
    uncensored = [s.value for s in samples if not s.censored]
    if len(set(uncensored)) <= 1:
        raise DegenerateSampleError(
            "degenerate variance: uncensored samples form a point mass")
    in_window = sum(1 for v in uncensored if n_lo <= v <= n_hi)
    if in_window < 100:
        raise InsufficientDataError(
            f"need >= 100 uncensored samples in window, got {in_window}")
    values = np.array([s.value for s in samples])
    grid = np.arange(n_lo, n_hi + 1)
    counts = np.array([(values > n).sum() for n in grid], dtype=np.int64)
    return _fit_counts(grid.astype(np.float64), counts, N, (n_lo, n_hi), ncens)


def _fit_counts(xs: np.ndarray, counts: np.ndarray, totals, window, n_censored,
                n_samples: Optional[int] = None) -> TailFit:
    totals = np.broadcast_to(np.asarray(totals, dtype=np.float64), counts.shape)
    ys = np.empty(len(xs))
    ws = np.empty(len(xs))
    pos = counts > 0
    ys[pos] = np.log(counts[pos] / totals[pos])
    ws[pos] = counts[pos]
    # Rule-of-three upper bound for empty cells, with nominal weight.
    ys[~pos] = np.log(3.0 / totals[~pos])
    ws[~pos] = 1.0
    slope, _, stderr, r2 = _weighted_line(xs, ys, ws)
    return TailFit(slope, stderr, window, r2,
                   int(n_samples if n_samples is not None else totals[0]),
                   int(n_censored))


def fit_log_frequency(points: Sequence[Tuple[float, int, int]],
                      window: Optional[Tuple[float, float]] = None) -> TailFit:
    """Fit log(successes/trials) against x for Bernoulli frequency data.

    points are (x, successes, trials); empty cells use rule-of-three.
    """
    pts = sorted(points)
    if window is not None:
        pts = [p for p in pts if window[0] <= p[0] <= window[1]]
    if len(pts) < 2:
        raise InsufficientDataError("need at least two frequency points")
    xs = np.array([p[0] for p in pts], dtype=np.float64)
    ks = np.array([p[1] for p in pts], dtype=np.int64)
    ns = np.array([p[2] for p in pts], dtype=np.float64)
    if window is None:
        window = (float(xs[0]), float(xs[-1]))
    return _fit_counts(xs, ks, ns, window, 0, n_samples=int(ns.sum()))


# -- zeta estimators -----------------------------------------------------------

def default_window(n_max: int) -> Tuple[int, int]:
    """[5, n_max - 5]: drops small-n curvature and the censored tail."""
    return (5, n_max - 5)


def sample_bk(master_seed: int, n_samples: int, d: int, p: float, bias: BiasSpec,
              n_max: int = DEFAULT_N_MAX, escape_radius: Optional[int] = None,
              replica_offset: int = 0) -> List[Tuple[int, Optional[CensoredSample]]]:
    """Backtrack samples at the origin of fresh environments.

    One replica per seed; replicas whose origin fails the connectivity
    proxy yield None (they are conditioned out of the tail fit but kept
    in the output so replica indexing stays deterministic).
    """
    out = []
    origin = (0,) * d
    for i in range(replica_offset, replica_offset + n_samples):
        env_seed = derive_seed(master_seed, i, REPLICA_ENV_SALT)
        env = Environment(EnvConfig(d=d, p=p, seed=env_seed))
        s = backtrack_BK_conditioned(env, bias, origin, n_max=n_max,
                                     escape_radius=escape_radius)
        out.append((i, s))
    return out


def estimate_zeta(samples: Sequence[CensoredSample], n_max: int = DEFAULT_N_MAX,
                  window: Optional[Tuple[int, int]] = None) -> TailFit:
    """Tail fit of P[BK(0) > n | connected] from backtrack samples."""
    if window is None:
        window = default_window(n_max)
    return fit_exponential_tail(samples, window)


def sample_dual_connections(master_seed: int, n_samples: int, p: float,
                            direction: Tuple[float, float], n_grid: Sequence[int],
                            cap: int = 200_000, replica_offset: int = 0,
                            ) -> Tuple[np.ndarray, int]:
    """Counts of {0* <-> floor(-n u)*} in the coupled dual over fresh seeds.

    Returns (hit counts aligned with n_grid, censored replica count).
    The dual of a density-p primal is Bernoulli(1-p): subcritical for
    p > 1/2, so clusters are small and the probe is cheap.
    """
    bias = BiasSpec(1.0, tuple(direction))
    targets = [(int(math.floor(-n * direction[0])), int(math.floor(-n * direction[1])))
               for n in n_grid]
    counts = np.zeros(len(n_grid), dtype=np.int64)
    censored = 0
    for i in range(n_samples):
        env_seed = derive_seed(master_seed, i + replica_offset, REPLICA_ENV_SALT)
        env = Environment(EnvConfig(d=2, p=p, seed=env_seed))
        hits, was_censored = dual_cluster_hits(env, bias, (0, 0), targets, cap=cap)
        if was_censored:
            censored += 1
            continue
        counts += hits
    return counts, censored


def sample_dual_connections_multi(master_seed: int, n_samples: int, p: float,
                                  directions: Sequence[Tuple[float, float]],
                                  n_grid: Sequence[int], cap: int = 200_000,
                                  replica_offset: int = 0) -> Tuple[np.ndarray, int]:
    """Dual connection counts for a whole direction grid at once.

    Each replica grows the dual cluster of the origin once and tests the
    targets of every direction on it, so all directions see the same
    10^5 configurations; estimates across angles are correlated, which
    removes most of the selection noise in the later minimum over
    directions. Returns (counts[len(directions), len(n_grid)], censored).
    """
    probe = BiasSpec(1.0, (1.0, 0.0))
    targets = []
    for u in directions:
        for n in n_grid:
            targets.append((int(math.floor(-n * u[0])), int(math.floor(-n * u[1]))))
    counts = np.zeros(len(targets), dtype=np.int64)
    censored = 0
    for i in range(n_samples):
        env_seed = derive_seed(master_seed, i + replica_offset, REPLICA_ENV_SALT)
        env = Environment(EnvConfig(d=2, p=p, seed=env_seed))
        hits, was_censored = dual_cluster_hits(env, probe, (0, 0), targets, cap=cap)
        if was_censored:
            censored += 1
            continue
        counts += hits
    return counts.reshape(len(directions), len(n_grid)), censored


def estimate_xi(counts: np.ndarray, n_trials: int, n_grid: Sequence[int],
                window: Optional[Tuple[float, float]] = None) -> TailFit:
    """Directional inverse correlation length from dual connection counts."""
    pts = [(float(n), int(c), n_trials) for n, c in zip(n_grid, counts)]
    return fit_log_frequency(pts, window)


def zeta_from_xi(xi_fits: Sequence[Tuple[Sequence[float], TailFit]],
                 bias: BiasSpec) -> float:
    """2 * min over the direction grid of xi(u) / (u . direction).

    The grid must stay in the half-circle with positive alignment to the
    bias direction.
    """
    best = math.inf
    for u, fit in xi_fits:
        align = sum(a * b for a, b in zip(u, bias.direction))
        if align <= 0:
            raise ValueError(f"direction {u} is not forward-aligned with the bias")
        best = min(best, fit.rate / align)
    if not math.isfinite(best):
        raise InsufficientDataError("no usable direction fits")
    return 2.0 * best


def sample_sausage_frequencies(master_seed: int, n_samples: int, d: int, p: float,
                               bias: BiasSpec, n_grid: Sequence[int],
                               cap: int = 50_000, replica_offset: int = 0) -> np.ndarray:
    """Counts of {0 sausage-connected to the layer at level -n} (d >= 3)."""
    counts = np.zeros(len(n_grid), dtype=np.int64)
    for i in range(n_samples):
        env_seed = derive_seed(master_seed, i + replica_offset, REPLICA_ENV_SALT)
        env = Environment(EnvConfig(d=d, p=p, seed=env_seed))
        for j, n in enumerate(n_grid):
            if sausage_connected_to_level(env, bias, n, cap=cap):
                counts[j] += 1
    return counts


def estimate_zeta_sausage(counts: np.ndarray, n_trials: int, n_grid: Sequence[int],
                          window: Optional[Tuple[float, float]] = None) -> TailFit:
    """Exponential fit of sausage-connection frequencies (rate ~ zeta)."""
    usable = [(float(n), int(c), n_trials) for n, c in zip(n_grid, counts) if n >= 3]
    return fit_log_frequency(usable, window)


# -- phase diagnostics -----------------------------------------------------------

def phase_report(zeta_fit: TailFit | float, bias: BiasSpec,
                 zeta_stderr: float = 0.0, margin: Optional[float] = None) -> PhaseReport:
    """gamma = zeta / (2 lam), lambda_c = zeta / 2, and the regime call.

    The regime is ballistic when gamma exceeds 1 by more than the margin
    (default: two combined standard errors), sub-ballistic when below by
    more, near-critical otherwise.
    """
    if isinstance(zeta_fit, TailFit):
        zeta = zeta_fit.rate
        zse = zeta_fit.stderr
    else:
        zeta = float(zeta_fit)
        zse = zeta_stderr
    if bias.lam <= 0:
        raise ValueError("phase classification needs a positive bias strength")
    gamma = zeta / (2.0 * bias.lam)
    gse = zse / (2.0 * bias.lam)
    if margin is None:
        margin = 2.0 * gse
    if gamma > 1.0 + margin:
        regime = "ballistic"
    elif gamma < 1.0 - margin:
        regime = "sub_ballistic"
    else:
        regime = "near_critical"
    return PhaseReport(zeta, zse, gamma, gse, zeta / 2.0, regime, margin)


def estimate_speed(positions: Sequence[np.ndarray], bias: BiasSpec,
                   gap_stats: Optional[GapStatistics] = None,
                   bootstrap: int = 2000, seed: int = 7) -> SpeedEstimate:
    """Speed from trajectory endpoints, and from regeneration gaps when
    available (mean displacement gap over mean time gap)."""
    if not positions:
        raise InsufficientDataError("no trajectories")
    rows = []
    for pos in positions:
        pos = np.asarray(pos)
        steps = len(pos) - 1
        if steps <= 0:
            raise ValueError("trajectories must contain at least one step")
        rows.append((pos[-1] - pos[0]) / steps)
    rows = np.asarray(rows, dtype=np.float64)
    v = rows.mean(axis=0)
    proj = rows @ np.asarray(bias.direction)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(proj), size=(bootstrap, len(proj)))
    boots = proj[idx].mean(axis=1)
    ci = (float(np.quantile(boots, 0.025)), float(np.quantile(boots, 0.975)))

    regen_v = regen_ci = None
    if gap_stats is not None and len(gap_stats.pooled) >= 2:
        tg = gap_stats.pooled_time_gaps().astype(np.float64)
        dg = gap_stats.pooled_displacement_gaps()
        regen_speed = dg.mean() / tg.mean()
        regen_v = tuple(regen_speed * c for c in bias.direction)
        idx = rng.integers(0, len(tg), size=(bootstrap, len(tg)))
        ratios = dg[idx].mean(axis=1) / tg[idx].mean(axis=1)
        regen_ci = (float(np.quantile(ratios, 0.025)), float(np.quantile(ratios, 0.975)))
    return SpeedEstimate(tuple(float(c) for c in v), ci, regen_v, regen_ci,
                         len(positions), 0)


def displacement_exponent(delta_samples: Dict[int, Sequence[CensoredSample]],
                          ) -> TailFit:
    """Slope of log median Delta_n against log n (target: 1/gamma).

    The median is robust to the censored upper tail as long as fewer
    than half the replicas at a level are censored; levels that censor
    more than that are excluded.
    """
    xs, ys = [], []
    ncens = total = 0
    for n, samples in sorted(delta_samples.items()):
        vals = [s.value for s in samples if not s.censored]
        total += len(samples)
        ncens += sum(1 for s in samples if s.censored)
        if len(vals) <= len(samples) / 2 or not vals:
            continue
        med = float(np.median(vals))
        if med <= 0:
            continue
        xs.append(math.log(n))
        ys.append(math.log(med))
    if len(xs) < 2:
        raise InsufficientDataError("need medians at two levels or more")
    xs, ys = np.asarray(xs), np.asarray(ys)
    slope, _, stderr, r2 = _weighted_line(xs, ys, np.ones_like(xs))
    return TailFit(slope, stderr, (float(xs[0]), float(xs[-1])), r2, total, ncens)


def exit_face_decay(face_counts: Dict[int, Tuple[int, int]]) -> Tuple[TailFit, dict]:
    """Fit of log P[face != plus] against L.

    face_counts maps L to (non-plus exits, total uncensored exits).
    Zero-frequency cells get the rule-of-three upper bound. Returns the
    fit and a diagnostics dict: frequencies (with the substitution),
    whether they strictly decrease, and whether decay applies at all
    (a slope CI containing 0 flags non-applicability, e.g. lam = 0).
    """
    pts = [(float(L), k, n) for L, (k, n) in sorted(face_counts.items())]
    fit = fit_log_frequency(pts)
    freqs = {}
    for L, k, n in pts:
        freqs[int(L)] = (k / n) if k > 0 else 3.0 / n
    vals = [freqs[int(L)] for L, _, _ in pts]
    strictly_decreasing = all(b < a for a, b in zip(vals, vals[1:]))
    applicable = fit.slope + 2 * fit.stderr < 0
    diags = {
        "frequencies": freqs,
        "strictly_decreasing": strictly_decreasing,
        "decay_applicable": applicable,
    }
    return fit, diags
