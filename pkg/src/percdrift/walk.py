"""The biased reversible walk and its box-exit / hitting-time experiments.

Transition probabilities at a vertex are proportional to the incident
open conductances; a vertex with no open edge holds the walk in place.
Every walk owns a counter-based uniform stream keyed by its seed, so a
trajectory is a pure function of (environment seed, walk seed) and the
start. Step caps are mandatory; censored outcomes are first-class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from . import backend
from .cluster import CensoredSample
from .env import Environment
from .geometry import WALK_SALT, BiasSpec, ge, lt, mix64, unit_double

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class WalkState:
    position: Tuple[int, ...]
    time: int
    record_level: float          # running max of X . direction
    min_since_record: float
    walk_seed: int


@dataclass(frozen=True)
class ExitResult:
    face: Optional[str]          # plus | minus | side, None when censored
    time: int
    position: Tuple[int, ...]
    censored: bool = False


@dataclass(frozen=True)
class KappaZero:
    """Minimal nonzero transition probability for a fully open vertex."""

    value: float


def kappa_zero(bias: BiasSpec) -> KappaZero:
    """exp(-e1 . ell) over the sum of exp(-e . ell) across all 2d signed
    unit vectors; e1 is the most-forward axis direction."""
    e1 = bias.forward_axis
    num = math.exp(-bias.lam * bias.projection(e1))
    den = 0.0
    for i in range(bias.d):
        li = bias.lam * bias.direction[i]
        den += math.exp(-li) + math.exp(li)
    return KappaZero(num / den)


def initial_state(bias: BiasSpec, position: Sequence[int], walk_seed: int) -> WalkState:
    p = bias.projection(position)
    return WalkState(tuple(position), 0, p, p, walk_seed)


def transition_weights(env: Environment, bias: BiasSpec, x: Sequence[int]):
    """Open-neighbor step weights in the fixed (+e1, -e1, +e2, ...) order.

    The weights are the conductance ratios exp(+-lam * dir_i); their
    normalization gives the transition probabilities.
    """
    k = env.kernel(bias)
    xx = tuple(x) + (0,) * (3 - env.d)
    mask = k.open_mask(*xx)
    out = []
    for ki in range(2 * env.d):
        if mask & (1 << ki):
            axis = ki >> 1
            sgn = -1 if (ki & 1) else 1
            w = math.exp(sgn * bias.lam * bias.direction[axis])
            nb = tuple(c + (sgn if j == axis else 0) for j, c in enumerate(x))
            out.append((nb, w))
    return out


def step(env: Environment, bias: BiasSpec, s: WalkState) -> WalkState:
    """One transition; isolated vertices stay put with probability 1."""
    choices = transition_weights(env, bias, s.position)
    if not choices:
        return replace(s, time=s.time + 1,
                       min_since_record=min(s.min_since_record, bias.projection(s.position)))
    total = sum(w for _, w in choices)
    ws = mix64((s.walk_seed & _MASK64) ^ WALK_SALT)
    r = unit_double(mix64(ws ^ s.time)) * total
    acc = 0.0
    new = choices[-1][0]
    for nb, w in choices:
        acc += w
        if r < acc:
            new = nb
            break
    p = bias.projection(new)
    if p > s.record_level:
        return WalkState(new, s.time + 1, p, p, s.walk_seed)
    return WalkState(new, s.time + 1, s.record_level,
                     min(s.min_since_record, p), s.walk_seed)


def run_until(env: Environment, bias: BiasSpec, s: WalkState,
              stop: Callable[[WalkState], bool], cap: int) -> Tuple[WalkState, bool]:
    """Iterate step until stop holds or cap steps elapsed; hit=False on cap."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    if stop(s):
        return s, True
    for _ in range(cap):
        s = step(env, bias, s)
        if stop(s):
            return s, True
    return s, False


_FACES = {backend.FACE_PLUS: "plus", backend.FACE_MINUS: "minus", backend.FACE_SIDE: "side"}


def in_box(bias: BiasSpec, x: Sequence[int], L: float, Lp: float) -> bool:
    if not lt(abs(bias.projection(x)), L):
        return False
    for i in range(1, bias.d):
        if not lt(abs(bias.lateral(x, i)), Lp):
            return False
    return True


def exit_box(env: Environment, bias: BiasSpec, start: Sequence[int], L: float,
             alpha: float, walk_seed: int, cap: int = 10_000_000) -> ExitResult:
    """Run until the walk leaves B(L, L^alpha); classify the exit face.

    plus means projection >= L, minus means projection <= -L, side
    otherwise (a lateral coordinate reached L^alpha).
    """
    Lp = float(L) ** alpha
    if not in_box(bias, start, L, Lp):
        raise ValueError(f"start {tuple(start)} is not inside B({L}, {L}^{alpha})")
    k = env.kernel(bias)
    xx = tuple(start) + (0,) * (3 - env.d)
    face, t, pos = k.walk_exit_box(xx[0], xx[1], xx[2], float(L), Lp, walk_seed, cap)
    if face == backend.FACE_CENSORED:
        return ExitResult(None, t, pos[: env.d], censored=True)
    return ExitResult(_FACES[face], t, pos[: env.d])


def delta_n(env: Environment, bias: BiasSpec, start: Sequence[int], n: float,
            walk_seed: int, cap: int = 10_000_000) -> CensoredSample:
    """First time the projection reaches the half-space level n."""
    times, _ = delta_profile(env, bias, start, [n], walk_seed, cap)
    return times[0]


def delta_profile(env: Environment, bias: BiasSpec, start: Sequence[int],
                  levels: Sequence[float], walk_seed: int, cap: int,
                  ) -> Tuple[list, Tuple[int, ...]]:
    """Hitting times of several increasing levels from a single trajectory."""
    lv = [float(v) for v in levels]
    if any(b <= a for a, b in zip(lv, lv[1:])):
        raise ValueError("levels must be strictly increasing")
    k = env.kernel(bias)
    xx = tuple(start) + (0,) * (3 - env.d)
    times, pos = k.walk_deltas(xx[0], xx[1], xx[2], lv, walk_seed, cap)
    out = [CensoredSample(t, False) if t >= 0 else CensoredSample(cap, True) for t in times]
    return out, pos[: env.d]


def walk_positions(env: Environment, bias: BiasSpec, start: Sequence[int],
                   nsteps: int, walk_seed: int) -> np.ndarray:
    """(nsteps+1, d) array of positions, start included."""
    k = env.kernel(bias)
    xx = tuple(start) + (0,) * (3 - env.d)
    path = k.walk_path(xx[0], xx[1], xx[2], nsteps, walk_seed)
    return np.asarray(path, dtype=np.int64)[:, : env.d]


def excursion_hits(env: Environment, bias: BiasSpec, a: Sequence[int], b: Sequence[int],
                   n_excursions: int, walk_seed: int, cap: int = 1_000_000,
                   ) -> Tuple[int, int]:
    """Count excursions from a hitting b before returning to a.

    Estimates P_a[T_b < T_a^+]; returns (hits, censored excursions).
    """
    k = env.kernel(bias)
    aa = tuple(a) + (0,) * (3 - env.d)
    bb = tuple(b) + (0,) * (3 - env.d)
    return k.walk_excursions(aa[0], aa[1], aa[2], bb[0], bb[1], bb[2],
                             n_excursions, walk_seed, cap)
