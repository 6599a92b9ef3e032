"""Regeneration times of directionally transient trajectories.

A regeneration candidate is a time whose projection strictly exceeds
every earlier projection and is never undercut later; it is certified
when at least a horizon of trajectory follows it, so that "never
undercut" has been watched for long enough. Uncertified trailing
candidates are kept but flagged, and excluded from gap statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .geometry import BiasSpec

DEFAULT_HORIZON = 10_000


class Trajectory(NamedTuple):
    times: np.ndarray          # (n,), increasing integers
    projections: np.ndarray    # (n,), X_t . direction
    positions: np.ndarray      # (n, d)


def trajectory_from_positions(bias: BiasSpec, positions: np.ndarray,
                              times: Optional[np.ndarray] = None) -> Trajectory:
    positions = np.asarray(positions, dtype=np.int64)
    proj = positions @ np.asarray(bias.direction, dtype=np.float64)
    if times is None:
        times = np.arange(len(positions), dtype=np.int64)
    return Trajectory(np.asarray(times, dtype=np.int64), proj, positions)


@dataclass(frozen=True)
class RegenerationRecord:
    tau: int
    position: Tuple[int, ...]
    certified: bool


def detect_regenerations(traj: Trajectory, horizon: int = DEFAULT_HORIZON,
                         ) -> List[RegenerationRecord]:
    """All fresh-record times that the future never undercuts.

    An index t qualifies when proj[t] > proj[s] for every s < t and
    proj[s] >= proj[t] for every s > t; certified means the trajectory
    extends at least `horizon` time units past t.
    """
    n = len(traj.projections)
    if n == 0:
        return []
    if np.any(np.diff(traj.times) <= 0):
        raise ValueError("trajectory times must be strictly increasing")
    proj = traj.projections
    prior_max = np.empty(n)
    prior_max[0] = -np.inf
    if n > 1:
        prior_max[1:] = np.maximum.accumulate(proj[:-1])
    rmin = np.minimum.accumulate(proj[::-1])[::-1]   # rmin[t] = min over s >= t
    future_min = np.empty(n)
    future_min[-1] = np.inf
    if n > 1:
        future_min[:-1] = rmin[1:]
    ok = (proj > prior_max) & (future_min >= proj)
    end = traj.times[-1]
    out = []
    for i in np.flatnonzero(ok):
        t = int(traj.times[i])
        out.append(RegenerationRecord(t, tuple(int(c) for c in traj.positions[i]),
                                      certified=bool(end - t >= horizon)))
    return out


@dataclass(frozen=True)
class GapSample:
    k: int
    time_gap: int
    displacement_gap: float


@dataclass(frozen=True)
class GapStatistics:
    samples: Tuple[GapSample, ...]
    first: Optional[GapSample]            # the k = 1 gap, reported separately
    pooled: Tuple[GapSample, ...]         # k >= 2 population
    diagnostic: str = ""

    def pooled_time_gaps(self) -> np.ndarray:
        return np.array([g.time_gap for g in self.pooled], dtype=np.int64)

    def pooled_displacement_gaps(self) -> np.ndarray:
        return np.array([g.displacement_gap for g in self.pooled], dtype=np.float64)


def gap_statistics(records: Sequence[RegenerationRecord], bias: BiasSpec) -> GapStatistics:
    """Gaps between consecutive certified records.

    The first gap is reported separately; gaps with k >= 2 form the
    pooled population used for tail fits (only blocks after the first
    share one distribution).
    """
    certified = [r for r in records if r.certified]
    if len(certified) < 2:
        return GapStatistics((), None, (),
                             diagnostic=f"need >= 2 certified records, got {len(certified)}")
    samples = []
    for k in range(1, len(certified)):
        a, b = certified[k - 1], certified[k]
        disp = bias.projection(b.position) - bias.projection(a.position)
        samples.append(GapSample(k, b.tau - a.tau, disp))
    return GapStatistics(tuple(samples), samples[0], tuple(samples[1:]))


def empirical_survival(values: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Right-continuous survival curve S(x) = P[V > x] on the sorted support."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    n = len(v)
    xs, counts = np.unique(v, return_counts=True)
    exceed = n - np.cumsum(counts)
    return xs, exceed / n
