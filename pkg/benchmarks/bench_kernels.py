#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Runs the three hot loops (edge sampling via cluster growth, backtrack
searches, walk stepping, dual-cluster probes) on identical inputs with
both backends and prints wall times plus the speedup. The outputs are
also compared, which doubles as a coarse parity check.

Usage: python benchmarks/bench_kernels.py [--scale N]
"""

import argparse
import time

from percdrift import backend

ARGS = dict(d=2, p=0.7, seed=20240, direction=(1.0, 0.0), lam=0.8,
            frame=((1.0, 0.0), (-0.0, 1.0)), overlay_packed={})


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return time.perf_counter() - t0, out


def bench(scale: int):
    kc = backend.compiled_kernel_env(**ARGS)
    kp = backend.python_kernel_env(**ARGS)
    if kc is None:
        raise SystemExit("compiled backend not built; run pip install -e .")

    rows = []

    def run(name, work):
        tc, outc = timed(work, kc)
        tp, outp = timed(work, kp)
        match = "ok" if outc == outp else "MISMATCH"
        rows.append((name, tp, tc, tp / tc if tc > 0 else float("inf"), match))

    def bk_work(k):
        out = []
        for s in range(20 * scale):
            out.append(k.backtrack_bk(s, (7 * s) % 23, 0, 20, 400))
        return out

    def search_work(k):
        out = []
        for s in range(20 * scale):
            out.append(k.search(s % 11, s % 13, 0, floor=-4.0, radius=60, cap=20_000)[:4])
        return out

    def walk_work(k):
        return k.walk_path(0, 0, 0, 20_000 * scale, 99)

    def dual_work(k):
        hits = 0
        from percdrift.geometry import pack_vertex
        targets = [pack_vertex(-6, 0, 0), pack_vertex(-3, -3, 0)]
        for s in range(200 * scale):
            h, _, _ = k.dual_search(s % 17, -(s % 5), 50_000, targets=targets)
            hits += sum(h)
        return hits

    run("backtrack searches", bk_work)
    run("half-space searches", search_work)
    run("walk stepping", walk_work)
    run("dual-cluster probes", dual_work)

    name_w = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{name_w}}  {'python':>10}  {'compiled':>10}  {'speedup':>8}  parity")
    for name, tp, tc, sp, match in rows:
        print(f"{name:<{name_w}}  {tp:>9.3f}s  {tc:>9.3f}s  {sp:>7.1f}x  {match}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--scale", type=int, default=5, help="workload multiplier")
    bench(ap.parse_args().scale)
