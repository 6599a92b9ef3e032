"""Experiment harness: config loading, validation, deterministic runs.

Every experiment follows the same scheme: a master seed spawns one
environment seed and one walk seed per replica through disjoint hash
streams, replicas are farmed out to a process pool in fixed-size chunks,
and results are merged in replica order before anything is written. The
outputs (CSV tables and the JSON report) are therefore byte-identical
for any worker count; the manifest records the run identity, the config
snapshot and the per-replica seeds.
"""

from __future__ import annotations

import hashlib
import json
import math
import multiprocessing
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from . import __version__
from . import estimate, oracle, regen, walk
from .cluster import (
    CensoredSample,
    backtrack_BK_conditioned,
    sausage_connected_to_level,
)
from .env import EnvConfig, Environment, infinite_cluster_status, load_overlay_file
from .errors import ConfigError
from .geometry import (
    REPLICA_ENV_SALT,
    REPLICA_WALK_SALT,
    BiasSpec,
    derive_seed,
)

EXPERIMENTS = (
    "sample-bk", "estimate-zeta", "dual-xi", "sausage", "walk-speed",
    "delta-scaling", "exit-stats", "eigen", "oracle-check", "regen-stats",
)

_CHUNK = 512          # fixed chunk size keeps runs independent of worker count
SCHEMA_VERSION = 1


@dataclass
class ExperimentConfig:
    experiment: str
    env: dict
    bias: dict
    replicas: int
    params: dict = field(default_factory=dict)
    caps: dict = field(default_factory=dict)
    output: str = "out"
    workers: Optional[int] = None
    fatal_censoring_fraction: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "env": dict(self.env),
            "bias": dict(self.bias),
            "replicas": self.replicas,
            "params": dict(self.params),
            "caps": dict(self.caps),
            "output": self.output,
            "fatal_censoring_fraction": self.fatal_censoring_fraction,
        }

    def master_seed(self) -> int:
        return int(self.env["seed"])

    def bias_spec(self) -> BiasSpec:
        lam = float(self.bias.get("lambda", self.bias.get("lam", 0.0)))
        direction = tuple(float(v) for v in self.bias["direction"])
        return BiasSpec(lam, direction)

    def cap(self, name: str, default: int) -> int:
        return int(self.caps.get(name, default))


def load_config(path: str | Path) -> ExperimentConfig:
    raw = yaml.safe_load(Path(path).read_text())
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    try:
        cfg = ExperimentConfig(
            experiment=raw["experiment"],
            env=dict(raw["env"]),
            bias=dict(raw.get("bias", {"lambda": 0.0, "direction": None})),
            replicas=int(raw.get("replicas", 0)),
            params=dict(raw.get("params", {})),
            caps=dict(raw.get("caps", {})),
            output=str(raw.get("output", "out")),
            fatal_censoring_fraction=raw.get("fatal_censoring_fraction"),
        )
    except KeyError as e:
        raise ConfigError(f"{path}: missing required key {e.args[0]!r}") from None
    if cfg.bias.get("direction") is None:
        d = int(cfg.env.get("d", 2))
        cfg.bias["direction"] = [1.0] + [0.0] * (d - 1)
    if "overlay_file" in cfg.env:
        d = int(cfg.env.get("d", 2))
        pairs = load_overlay_file(Path(path).parent / cfg.env.pop("overlay_file"), d)
        cfg.env["overlays"] = [[*e.base, e.axis, int(s)] for e, s in pairs]
    return cfg


def validate_config(cfg: ExperimentConfig) -> List[Tuple[str, str, str]]:
    """Static checks; returns (level, field path, message) diagnostics."""
    diags: List[Tuple[str, str, str]] = []

    def err(path, msg):
        diags.append(("error", path, msg))

    def warn(path, msg):
        diags.append(("warning", path, msg))

    if cfg.experiment not in EXPERIMENTS:
        err("experiment", f"unknown experiment {cfg.experiment!r}")
        return diags
    d = cfg.env.get("d")
    if d not in (2, 3):
        err("env.d", f"supported dimensions are 2 and 3, got {d}")
    p = cfg.env.get("p")
    if p is None or not (0.0 < float(p) < 1.0):
        err("env.p", f"p must lie in (0, 1), got {p}")
    elif d == 2 and float(p) <= 0.5:
        warn("env.p", f"subcritical primal: p={p} <= 1/2 = p_c(2); "
                      "trap statistics are degenerate")
    if "seed" not in cfg.env:
        err("env.seed", "missing master seed")
    if cfg.replicas <= 0:
        err("replicas", f"replicas must be >= 1, got {cfg.replicas}")
    try:
        bias = cfg.bias_spec()
        if len(bias.direction) != d:
            err("bias.direction", "bias dimension does not match env.d")
    except (ValueError, KeyError, TypeError) as e:
        err("bias", str(e))
        bias = None

    exp = cfg.experiment
    if exp == "dual-xi" and d != 2:
        err("experiment", "dual lattice requires d=2")
    if exp == "sausage" and d != 3:
        err("experiment", "sausage-connections require d=3")
    if exp in ("estimate-zeta", "walk-speed", "delta-scaling", "exit-stats",
               "regen-stats") and bias is not None and bias.lam == 0.0 \
            and exp != "walk-speed":
        warn("bias.lambda", "zero bias: drift-dependent statistics are degenerate")
    if exp == "exit-stats":
        alpha = cfg.params.get("alpha")
        if alpha is None:
            err("params.alpha", "exit-stats requires params.alpha")
        elif float(alpha) <= 1.0:
            warn("params.alpha", f"alpha={alpha} <= 1; the box-exit theorem "
                                 "regime uses alpha > d+3")
        if not cfg.params.get("L_grid"):
            err("params.L_grid", "exit-stats requires params.L_grid")
    if exp == "delta-scaling" and not cfg.params.get("levels"):
        err("params.levels", "delta-scaling requires params.levels")
    if exp == "eigen":
        if not cfg.params.get("L_grid"):
            err("params.L_grid", "eigen requires params.L_grid")
        if cfg.params.get("alpha") is None:
            err("params.alpha", "eigen requires params.alpha")
    if exp in ("dual-xi", "sausage") and not cfg.params.get("n_grid"):
        err("params.n_grid", f"{exp} requires params.n_grid")
    return diags


# -- deterministic parallel map --------------------------------------------------

def _chunks(total: int) -> List[Tuple[int, int]]:
    return [(s, min(_CHUNK, total - s)) for s in range(0, total, _CHUNK)]


_WORKER_CFG: Optional[ExperimentConfig] = None


def _init_worker(cfg_dict):
    global _WORKER_CFG
    _WORKER_CFG = _config_from_dict(cfg_dict)


def _config_from_dict(d: dict) -> ExperimentConfig:
    return ExperimentConfig(
        experiment=d["experiment"], env=dict(d["env"]), bias=dict(d["bias"]),
        replicas=d["replicas"], params=dict(d["params"]), caps=dict(d["caps"]),
        output=d["output"], fatal_censoring_fraction=d.get("fatal_censoring_fraction"),
    )


def _run_chunk(span: Tuple[int, int]):
    start, count = span
    cfg = _WORKER_CFG
    fn = _CHUNK_FNS[cfg.experiment]
    return [fn(cfg, i) for i in range(start, start + count)]


def _parallel_rows(cfg: ExperimentConfig, total: int, workers: int):
    spans = _chunks(total)
    if workers <= 1 or len(spans) <= 1:
        _init_worker(cfg.to_dict())
        nested = [_run_chunk(s) for s in spans]
    else:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(workers, initializer=_init_worker,
                      initargs=(cfg.to_dict(),)) as pool:
            nested = pool.map(_run_chunk, spans)
    rows = []
    for chunk in nested:
        rows.extend(chunk)
    return rows


def _env_for(cfg: ExperimentConfig, index: int) -> Tuple[Environment, int, int]:
    master = cfg.master_seed()
    env_seed = derive_seed(master, index, REPLICA_ENV_SALT)
    walk_seed = derive_seed(master, index, REPLICA_WALK_SALT)
    overlays = cfg.env.get("overlays") or []
    d = int(cfg.env["d"])
    from .env import Edge
    ov = tuple((Edge(tuple(int(c) for c in row[:d]), int(row[d])), bool(row[d + 1]))
               for row in overlays)
    env = Environment(EnvConfig(d=d, p=float(cfg.env["p"]), seed=env_seed, overlays=ov))
    return env, env_seed, walk_seed


# -- per-replica workers -----------------------------------------------------------

def _bk_replica(cfg: ExperimentConfig, i: int):
    env, env_seed, _ = _env_for(cfg, i)
    bias = cfg.bias_spec()
    n_max = int(cfg.params.get("n_max", 30))
    radius = cfg.params.get("escape_radius")
    s = backtrack_BK_conditioned(env, bias, (0,) * env.d, n_max=n_max,
                                 escape_radius=int(radius) if radius else None)
    origin = (0,) * env.d
    if s is None:
        return (i, *origin, -1, 0, env_seed, 0)
    return (i, *origin, s.value, int(s.censored), env_seed, 1)


def _walk_speed_replica(cfg: ExperimentConfig, i: int):
    env, env_seed, walk_seed = _env_for(cfg, i)
    bias = cfg.bias_spec()
    steps = int(cfg.params.get("steps", 10_000))
    stride = int(cfg.params.get("stride", max(1, steps // 100)))
    if infinite_cluster_status(env, (0,) * env.d, int(cfg.params.get("status_radius", 50))) != "connected":
        return (i, env_seed, 0, None, None)
    pos = walk.walk_positions(env, bias, (0,) * env.d, steps, walk_seed)
    proj = pos @ np.asarray(bias.direction)
    checkpoints = [(int(t), float(proj[t])) for t in range(0, steps + 1, stride)]
    traj = regen.trajectory_from_positions(bias, pos)
    recs = regen.detect_regenerations(traj, horizon=int(cfg.params.get("horizon", 10_000)))
    gaps = regen.gap_statistics(recs, bias)
    gap_rows = [(g.k, g.time_gap, g.displacement_gap) for g in gaps.samples]
    endpoint = tuple(int(c) for c in pos[-1])
    return (i, env_seed, 1, checkpoints, (endpoint, steps, gap_rows))


def _delta_replica(cfg: ExperimentConfig, i: int):
    env, env_seed, walk_seed = _env_for(cfg, i)
    bias = cfg.bias_spec()
    levels = [float(v) for v in cfg.params["levels"]]
    cap = cfg.cap("steps", 30_000_000)
    if infinite_cluster_status(env, (0,) * env.d, int(cfg.params.get("status_radius", 50))) != "connected":
        return (i, env_seed, 0, [])
    times, _ = walk.delta_profile(env, bias, (0,) * env.d, levels, walk_seed, cap)
    return (i, env_seed, 1, [(lv, s.value, int(s.censored)) for lv, s in zip(levels, times)])


def _exit_replica(cfg: ExperimentConfig, i: int):
    L_grid = [float(v) for v in cfg.params["L_grid"]]
    per = cfg.replicas
    li, r = divmod(i, per)
    L = L_grid[li]
    env, env_seed, walk_seed = _env_for(cfg, i)
    bias = cfg.bias_spec()
    alpha = float(cfg.params["alpha"])
    cap = cfg.cap("steps", 1_000_000)
    if infinite_cluster_status(env, (0,) * env.d, int(cfg.params.get("status_radius", 30))) != "connected":
        return (i, L, r, env_seed, "skipped", 0)
    res = walk.exit_box(env, bias, (0,) * env.d, L, alpha, walk_seed, cap=cap)
    face = "censored" if res.censored else res.face
    return (i, L, r, env_seed, face, res.time)


def _regen_replica(cfg: ExperimentConfig, i: int):
    env, env_seed, walk_seed = _env_for(cfg, i)
    bias = cfg.bias_spec()
    steps = int(cfg.params.get("steps", 100_000))
    horizon = int(cfg.params.get("horizon", 10_000))
    if infinite_cluster_status(env, (0,) * env.d, int(cfg.params.get("status_radius", 50))) != "connected":
        return (i, env_seed, 0, [])
    pos = walk.walk_positions(env, bias, (0,) * env.d, steps, walk_seed)
    traj = regen.trajectory_from_positions(bias, pos)
    recs = regen.detect_regenerations(traj, horizon=horizon)
    gaps = regen.gap_statistics(recs, bias)
    rows = [(g.k, g.time_gap, g.displacement_gap) for g in gaps.samples]
    return (i, env_seed, 1, rows)


def _eigen_replica(cfg: ExperimentConfig, i: int):
    env, env_seed, _ = _env_for(cfg, i)
    bias = cfg.bias_spec()
    alpha = float(cfg.params["alpha"])
    out = []
    from .cluster import box_backtrack_max
    for L in cfg.params["L_grid"]:
        sr = oracle.dirichlet_eigenvalue(env, bias, float(L), alpha)
        bk, bk_cens = box_backtrack_max(env, bias, float(L), alpha,
                                        n_max=int(cfg.params.get("bk_n_max", 15)))
        if math.isfinite(sr.lambda_min) and sr.lambda_min > 0:
            stat = (math.log(sr.lambda_min) + 2 * bias.lam * bk
                    + 2 * env.d * alpha * math.log(float(L)))
        else:
            stat = math.inf
        out.append((float(L), sr.lambda_min, sr.iterations, sr.residual,
                    bk, int(bk_cens), stat))
    return (i, env_seed, out)


def _oracle_replica(cfg: ExperimentConfig, i: int):
    env_seed = derive_seed(cfg.master_seed(), i, REPLICA_ENV_SALT)
    rng = np.random.default_rng(env_seed)
    n = int(cfg.params.get("net_size", 50))
    net = random_network(rng, n)
    P = net.transition_matrix()
    piv = net.pi()
    rev = float(np.max(np.abs(piv[:, None] * P - (piv[:, None] * P).T)))
    scale = float(np.max(piv[:, None] * P))
    a, b = 0, n - 1
    pe = oracle.escape_probability(net, a, b, "electrical")
    pc = oracle.escape_probability(net, a, b, "chain")
    viol = oracle.carne_varopoulos_check(net, int(cfg.params.get("n_max", 30)))
    return (i, env_seed, n, rev / scale, abs(pe - pc), viol)


def random_network(rng: np.random.Generator, n: int) -> oracle.FiniteNetwork:
    """Connected random graph with log-uniform conductances (test family)."""
    edges = []
    order = rng.permutation(n)
    for k in range(1, n):
        a = int(order[k])
        b = int(order[int(rng.integers(0, k))])
        edges.append((a, b, float(np.exp(rng.uniform(-2, 2)))))
    extra = int(1.5 * n)
    for _ in range(extra):
        a, b = rng.integers(0, n, size=2)
        if a != b:
            edges.append((int(a), int(b), float(np.exp(rng.uniform(-2, 2)))))
    return oracle.FiniteNetwork(n, edges)


_CHUNK_FNS = {
    "sample-bk": _bk_replica,
    "estimate-zeta": _bk_replica,
    "walk-speed": _walk_speed_replica,
    "delta-scaling": _delta_replica,
    "exit-stats": _exit_replica,
    "regen-stats": _regen_replica,
    "eigen": _eigen_replica,
    "oracle-check": _oracle_replica,
}


# -- output helpers ----------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def _fit_dict(fit: estimate.TailFit) -> dict:
    return {
        "slope": fit.slope, "rate": fit.rate, "stderr": fit.stderr,
        "window": list(fit.window), "r2": fit.r2,
        "n_samples": fit.n_samples, "n_censored": fit.n_censored,
    }


def run_id_for(cfg: ExperimentConfig) -> str:
    # The output directory is a destination, not an input: runs of the
    # same experiment share an id regardless of where they land.
    snap = cfg.to_dict()
    snap.pop("output", None)
    blob = json.dumps({"config": snap, "version": __version__},
                      sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class RunManifest:
    run_id: str
    config: dict
    started: float
    finished: float
    outputs: List[str]
    replica_seeds: List[int]

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "schema_version": SCHEMA_VERSION,
            "config": self.config,
            "started": self.started,
            "finished": self.finished,
            "outputs": self.outputs,
            "replica_seeds": self.replica_seeds,
        }

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        d = json.loads(Path(path).read_text())
        return cls(d["run_id"], d["config"], d["started"], d["finished"],
                   d["outputs"], d["replica_seeds"])


def run(cfg: ExperimentConfig, workers: Optional[int] = None,
        output: Optional[str] = None) -> RunManifest:
    """Execute the experiment; writes CSV data, a JSON report and the
    manifest into the output directory. Raises on validation errors."""
    diags = validate_config(cfg)
    errors = [d for d in diags if d[0] == "error"]
    if errors:
        raise ConfigError("; ".join(f"{p}: {m}" for _, p, m in errors))
    if workers is None:
        workers = cfg.workers or int(os.environ.get("PERCDRIFT_WORKERS", "1"))
    outdir = Path(output or cfg.output)
    outdir.mkdir(parents=True, exist_ok=True)
    started = time.time()

    runner = _RUNNERS[cfg.experiment]
    outputs, report = runner(cfg, workers, outdir)

    report_obj = {
        "schema_version": SCHEMA_VERSION,
        "experiment": cfg.experiment,
        "config": cfg.to_dict(),
        "backend": __import__("percdrift.backend", fromlist=["BACKEND_NAME"]).BACKEND_NAME,
        **report,
    }
    report_path = outdir / "report.json"
    report_path.write_text(json.dumps(report_obj, sort_keys=True, indent=2) + "\n")
    outputs.append(report_path.name)

    total = _total_replicas(cfg)
    master = cfg.master_seed()
    seeds = [derive_seed(master, i, REPLICA_ENV_SALT) for i in range(total)]
    manifest = RunManifest(run_id_for(cfg), cfg.to_dict(), started, time.time(),
                           sorted(outputs), seeds)
    (outdir / "manifest.json").write_text(
        json.dumps(manifest.to_dict(), sort_keys=True, indent=2) + "\n")

    frac = cfg.fatal_censoring_fraction
    if frac is not None and report.get("censored_fraction", 0.0) > float(frac):
        raise ConfigError(
            f"censoring fraction {report['censored_fraction']:.3f} exceeds "
            f"the fatal budget {frac}")
    return manifest


def _total_replicas(cfg: ExperimentConfig) -> int:
    if cfg.experiment == "exit-stats":
        return cfg.replicas * len(cfg.params["L_grid"])
    return cfg.replicas


# -- experiment runners ---------------------------------------------------------

def _run_bk(cfg: ExperimentConfig, workers: int, outdir: Path):
    rows = _parallel_rows(cfg, cfg.replicas, workers)
    d = int(cfg.env["d"])
    coord_names = ["x", "y", "z"][:d]
    _write_csv(outdir / "samples.csv",
               ["replica", *coord_names, "bk", "censored", "seed", "accepted"], rows)
    samples = [CensoredSample(r[1 + d], bool(r[2 + d])) for r in rows if r[4 + d] == 1]
    censored = sum(1 for s in samples if s.censored)
    report = {
        "n_replicas": cfg.replicas,
        "n_accepted": len(samples),
        "n_censored": censored,
        "censored_fraction": censored / max(len(samples), 1),
    }
    outputs = ["samples.csv"]
    if cfg.experiment == "estimate-zeta":
        n_max = int(cfg.params.get("n_max", 30))
        window = tuple(cfg.params.get("window", estimate.default_window(n_max)))
        fit = estimate.estimate_zeta(samples, n_max=n_max, window=window)
        report["zeta_fit"] = _fit_dict(fit)
        bias = cfg.bias_spec()
        if bias.lam > 0:
            pr = estimate.phase_report(fit, bias)
            report["phase"] = {
                "zeta_hat": pr.zeta_hat, "zeta_stderr": pr.zeta_stderr,
                "gamma_hat": pr.gamma_hat, "gamma_stderr": pr.gamma_stderr,
                "lambda_c_hat": pr.lambda_c_hat, "regime": pr.regime,
                "margin": pr.margin,
            }
        values = np.array([s.value for s in samples])
        grid = list(range(0, n_max + 1))
        surv = [(n, int((values > n).sum()), len(samples)) for n in grid]
        _write_csv(outdir / "survival.csv", ["n", "exceed", "total"], surv)
        outputs.append("survival.csv")
    return outputs, report


def _run_dual_xi(cfg: ExperimentConfig, workers: int, outdir: Path):
    # One dual-cluster growth serves every direction, so this experiment
    # parallelizes over replica blocks internally.
    params = cfg.params
    n_grid = [int(v) for v in params["n_grid"]]
    angles_deg = params.get("angles_deg")
    if angles_deg is None:
        count = int(params.get("n_angles", 17))
        angles_deg = np.linspace(-80.0, 80.0, count).tolist()
    dirs = [(math.cos(a * math.pi / 180), math.sin(a * math.pi / 180))
            for a in angles_deg]
    spans = _chunks(cfg.replicas)
    args = [(cfg.to_dict(), s, c, dirs, n_grid) for s, c in spans]
    if workers <= 1 or len(spans) <= 1:
        parts = [_dual_span(a) for a in args]
    else:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(workers) as pool:
            parts = pool.map(_dual_span, args)
    counts = np.zeros((len(dirs), len(n_grid)), dtype=np.int64)
    censored = 0
    for c, cen in parts:
        counts += c
        censored += cen
    trials = cfg.replicas - censored
    rows = []
    for ai, (deg, u) in enumerate(zip(angles_deg, dirs)):
        for ni, n in enumerate(n_grid):
            rows.append((float(deg), u[0], u[1], n, int(counts[ai, ni]), trials))
    _write_csv(outdir / "dual_hits.csv",
               ["angle_deg", "ux", "uy", "n", "hits", "trials"], rows)
    window = tuple(params.get("window", (2, 10)))
    fits = []
    per_angle = {}
    for ai, (deg, u) in enumerate(zip(angles_deg, dirs)):
        fit = estimate.estimate_xi(counts[ai], trials, n_grid, window=window)
        fits.append((u, fit))
        per_angle[f"{deg:.6g}"] = _fit_dict(fit)
    bias = cfg.bias_spec()
    zx = estimate.zeta_from_xi(fits, bias)
    report = {
        "n_replicas": cfg.replicas,
        "n_censored": censored,
        "censored_fraction": censored / cfg.replicas,
        "xi_fits": per_angle,
        "zeta_from_xi": zx,
    }
    if bias.lam > 0:
        pr = estimate.phase_report(zx, bias)
        report["phase"] = {"zeta_hat": pr.zeta_hat, "gamma_hat": pr.gamma_hat,
                           "lambda_c_hat": pr.lambda_c_hat, "regime": pr.regime}
    return ["dual_hits.csv"], report


def _dual_span(args):
    cfg_dict, start, count, dirs, n_grid = args
    cfg = _config_from_dict(cfg_dict)
    return estimate.sample_dual_connections_multi(
        cfg.master_seed(), count, float(cfg.env["p"]), dirs, n_grid,
        cap=cfg.cap("dual", 200_000), replica_offset=start)


def _run_sausage(cfg: ExperimentConfig, workers: int, outdir: Path):
    n_grid = [int(v) for v in cfg.params["n_grid"]]
    spans = _chunks(cfg.replicas)
    args = [(cfg.to_dict(), s, c, n_grid) for s, c in spans]
    if workers <= 1 or len(spans) <= 1:
        parts = [_sausage_span(a) for a in args]
    else:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(workers) as pool:
            parts = pool.map(_sausage_span, args)
    counts = np.zeros(len(n_grid), dtype=np.int64)
    for c in parts:
        counts += c
    rows = [(n, int(c), cfg.replicas) for n, c in zip(n_grid, counts)]
    _write_csv(outdir / "sausage_hits.csv", ["n", "hits", "trials"], rows)
    window = cfg.params.get("window")
    fit = estimate.estimate_zeta_sausage(counts, cfg.replicas, n_grid,
                                         window=tuple(window) if window else None)
    report = {"n_replicas": cfg.replicas, "censored_fraction": 0.0,
              "zeta_fit": _fit_dict(fit)}
    return ["sausage_hits.csv"], report


def _sausage_span(args):
    cfg_dict, start, count, n_grid = args
    cfg = _config_from_dict(cfg_dict)
    bias = cfg.bias_spec()
    return estimate.sample_sausage_frequencies(
        cfg.master_seed(), count, int(cfg.env["d"]), float(cfg.env["p"]),
        bias, n_grid, cap=cfg.cap("cluster", 50_000), replica_offset=start)


def _run_walk_speed(cfg: ExperimentConfig, workers: int, outdir: Path):
    rows = _parallel_rows(cfg, cfg.replicas, workers)
    bias = cfg.bias_spec()
    chk_rows = []
    gap_rows = []
    endpoints = []
    discarded = 0
    for (i, env_seed, ok, checkpoints, extra) in rows:
        if not ok:
            discarded += 1
            continue
        for t, proj in checkpoints:
            chk_rows.append((i, t, proj))
        endpoint, steps, gaps = extra
        endpoints.append((i, endpoint, steps))
        for k, tg, dg in gaps:
            gap_rows.append((i, k, tg, dg))
    _write_csv(outdir / "checkpoints.csv", ["replica", "time", "projection"], chk_rows)
    _write_csv(outdir / "gaps.csv",
               ["replica", "k", "time_gap", "displacement_gap"], gap_rows)
    sp_rows = [np.asarray(ep, dtype=np.float64) / s for (_, ep, s) in endpoints]
    report: dict = {"n_replicas": cfg.replicas, "n_discarded": discarded,
                    "censored_fraction": 0.0}
    if sp_rows:
        rowsv = np.asarray(sp_rows)
        proj = rowsv @ np.asarray(bias.direction)
        rng = np.random.default_rng(7)
        idx = rng.integers(0, len(proj), size=(2000, len(proj)))
        boots = proj[idx].mean(axis=1)
        pooled = regen.GapStatistics(
            tuple(), None,
            tuple(regen.GapSample(k, tg, dg) for _, k, tg, dg in gap_rows if k >= 2))
        report["speed"] = {
            "endpoint": [float(v) for v in rowsv.mean(axis=0)],
            "endpoint_ci": [float(np.quantile(boots, 0.025)),
                            float(np.quantile(boots, 0.975))],
        }
        if len(pooled.pooled) >= 2:
            tg = pooled.pooled_time_gaps().astype(float)
            dg = pooled.pooled_displacement_gaps()
            idx = rng.integers(0, len(tg), size=(2000, len(tg)))
            ratios = dg[idx].mean(axis=1) / tg[idx].mean(axis=1)
            report["speed"]["regeneration"] = [
                float(dg.mean() / tg.mean() * c) for c in bias.direction]
            report["speed"]["regeneration_ci"] = [
                float(np.quantile(ratios, 0.025)), float(np.quantile(ratios, 0.975))]
    return ["checkpoints.csv", "gaps.csv"], report


def _run_delta(cfg: ExperimentConfig, workers: int, outdir: Path):
    rows = _parallel_rows(cfg, cfg.replicas, workers)
    out_rows = []
    discarded = 0
    per_level: Dict[float, List[CensoredSample]] = {}
    for (i, env_seed, ok, trip) in rows:
        if not ok:
            discarded += 1
            continue
        for lv, value, cens in trip:
            out_rows.append((i, lv, value, cens))
            per_level.setdefault(lv, []).append(CensoredSample(value, bool(cens)))
    _write_csv(outdir / "deltas.csv", ["replica", "n", "delta", "censored"], out_rows)
    total = sum(len(v) for v in per_level.values())
    ncens = sum(1 for v in per_level.values() for s in v if s.censored)
    report = {
        "n_replicas": cfg.replicas, "n_discarded": discarded,
        "censored_fraction": ncens / max(total, 1),
        "medians": {},
    }
    for lv, samples in sorted(per_level.items()):
        med = censored_median(samples)
        report["medians"][f"{lv:g}"] = med
    try:
        fit = estimate.displacement_exponent(
            {int(lv): v for lv, v in per_level.items()})
        report["delta_slope"] = _fit_dict(fit)
    except Exception as e:  # few levels / heavy censoring
        report["delta_slope_error"] = str(e)
    return ["deltas.csv"], report


def censored_median(samples: Sequence[CensoredSample]) -> Optional[float]:
    """Median treating censored values as +inf; None if censoring reaches 50%."""
    vals = sorted(s.value for s in samples if not s.censored)
    k = len(samples) // 2
    if k >= len(vals):
        return None
    return float(vals[k])


def _run_exit(cfg: ExperimentConfig, workers: int, outdir: Path):
    total = cfg.replicas * len(cfg.params["L_grid"])
    rows = _parallel_rows(cfg, total, workers)
    _write_csv(outdir / "exits.csv",
               ["index", "L", "replica", "seed", "face", "time"], rows)
    counts: Dict[int, Tuple[int, int]] = {}
    censored = 0
    for (_, L, _, _, face, _) in rows:
        if face in ("censored", "skipped"):
            censored += face == "censored"
            continue
        k, n = counts.get(int(L), (0, 0))
        counts[int(L)] = (k + (face != "plus"), n + 1)
    fit, diags = estimate.exit_face_decay(counts)
    report = {
        "n_replicas": total,
        "censored_fraction": censored / total,
        "face_counts": {str(L): list(v) for L, v in sorted(counts.items())},
        "decay_fit": _fit_dict(fit),
        "diagnostics": diags,
    }
    return ["exits.csv"], report


def _run_regen(cfg: ExperimentConfig, workers: int, outdir: Path):
    rows = _parallel_rows(cfg, cfg.replicas, workers)
    gap_rows = []
    discarded = 0
    for (i, env_seed, ok, gaps) in rows:
        if not ok:
            discarded += 1
            continue
        for k, tg, dg in gaps:
            gap_rows.append((i, k, tg, dg, 1))
    _write_csv(outdir / "gaps.csv",
               ["replica", "k", "time_gap", "displacement_gap", "certified"], gap_rows)
    pooled_disp = [dg for _, k, _, dg, _ in gap_rows if k >= 2]
    report = {"n_replicas": cfg.replicas, "n_discarded": discarded,
              "n_gaps": len(gap_rows), "censored_fraction": 0.0}
    if len(pooled_disp) >= 200:
        samples = [CensoredSample(int(round(v)), False) for v in pooled_disp]
        hi = max(int(np.quantile([s.value for s in samples], 0.999)), 5)
        fit = estimate.fit_exponential_tail(samples, (1, hi))
        report["displacement_gap_fit"] = _fit_dict(fit)
    return ["gaps.csv"], report


def _run_eigen(cfg: ExperimentConfig, workers: int, outdir: Path):
    rows = _parallel_rows(cfg, cfg.replicas, workers)
    out_rows = []
    stats: Dict[float, List[float]] = {}
    for (i, env_seed, per_L) in rows:
        for (L, lam_min, iters, resid, bk, bk_cens, stat) in per_L:
            out_rows.append((i, L, lam_min, iters, resid, bk, bk_cens, stat))
            if math.isfinite(stat):
                stats.setdefault(L, []).append(stat)
    _write_csv(outdir / "eigen.csv",
               ["replica", "L", "lambda_min", "iterations", "residual",
                "bk_max", "bk_censored", "shape_stat"], out_rows)
    report = {
        "n_replicas": cfg.replicas,
        "censored_fraction": 0.0,
        "shape_stat": {
            f"{L:g}": {"mean": float(np.mean(v)), "min": float(np.min(v)),
                       "count": len(v)}
            for L, v in sorted(stats.items())
        },
    }
    return ["eigen.csv"], report


def _run_oracle(cfg: ExperimentConfig, workers: int, outdir: Path):
    rows = _parallel_rows(cfg, cfg.replicas, workers)
    _write_csv(outdir / "oracle.csv",
               ["replica", "seed", "n_vertices", "reversibility_err",
                "escape_method_diff", "cv_violations"], rows)
    report = {
        "n_replicas": cfg.replicas,
        "censored_fraction": 0.0,
        "max_reversibility_err": max(r[3] for r in rows),
        "max_escape_method_diff": max(r[4] for r in rows),
        "total_cv_violations": int(sum(r[5] for r in rows)),
    }
    return ["oracle.csv"], report


_RUNNERS = {
    "sample-bk": _run_bk,
    "estimate-zeta": _run_bk,
    "dual-xi": _run_dual_xi,
    "sausage": _run_sausage,
    "walk-speed": _run_walk_speed,
    "delta-scaling": _run_delta,
    "exit-stats": _run_exit,
    "eigen": _run_eigen,
    "oracle-check": _run_oracle,
    "regen-stats": _run_regen,
}
