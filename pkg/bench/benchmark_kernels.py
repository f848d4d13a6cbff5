"""Benchmark the compiled kernels against the numpy fallback.

Times the two hot paths on realistic workloads:

* the label-correcting relaxation rounds behind every rationalizability
  check (dense graphs up to 50 periods);
* packed program evaluation inside the barrier solver (segment reductions
  over the constraint terms), plus one full end-to-end solve.

Run:  python bench/benchmark_kernels.py
"""

from __future__ import annotations

import sys
import time

import numpy as np

import phrp._kernels as kernels
from phrp.collective import build_collective_program
from phrp.convex.packed import PackedProgram
from phrp.datagen import CobbDouglasSpec, gen_cobb_douglas, gen_collective
from phrp.separability import SeparabilityInstance, build_separability_program


def _time(fn, repeats: int) -> float:
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_bf(impl, graphs, repeats=5) -> float:
    def run():
        for w, dist, parent in graphs:
            impl.bf_rounds(w, dist, parent, w.shape[0])

    return _time(run, repeats)


def bench_segments(impl, workloads, repeats=5) -> float:
    def run():
        for z, rowptr, rows, nrows in workloads:
            impl.segment_logsumexp(z, rowptr)
            impl.segment_sum(z, rows, nrows)

    return _time(run, repeats)


def bench_solve(backend_name: str, repeats=3) -> float:
    # packed evaluation reaches the kernels through the package module, so
    # swap its functions for the duration of the measurement
    impl = kernels.available_backends()[backend_name]
    saved = (kernels.segment_logsumexp, kernels.segment_sum, kernels.bf_rounds)
    kernels.segment_logsumexp = impl.segment_logsumexp
    kernels.segment_sum = impl.segment_sum
    kernels.bf_rounds = impl.bf_rounds
    try:
        from phrp import convex

        def run():
            part_spec = CobbDouglasSpec(exponents=np.array([0.5, 0.3, 0.2]), seed=1)
            agg, _ = gen_collective(
                [
                    CobbDouglasSpec(
                        exponents=np.array([0.7, 0.3]),
                        budget=np.linspace(0.5, 2.0, 6),
                        seed=2,
                    ),
                    CobbDouglasSpec(
                        exponents=np.array([0.3, 0.7]),
                        budget=np.linspace(2.0, 0.5, 6),
                        seed=2,
                    ),
                ],
                periods=6,
                seed=2,
            )
            convex.solve(build_collective_program(agg, k=2))

        return _time(run, repeats)
    finally:
        kernels.segment_logsumexp, kernels.segment_sum, kernels.bf_rounds = saved


def main() -> int:
    impls = kernels.available_backends()
    print(f"active backend: {kernels.BACKEND}; available: {sorted(impls)}")
    if len(impls) < 2:
        print("compiled backend not built; nothing to compare")
        return 1

    rng = np.random.default_rng(0)
    graphs = []
    for i in range(40):
        stats = gen_cobb_douglas(
            CobbDouglasSpec(
                exponents=np.full(8, 1.0 / 8.0), seed=i
            ),
            periods=50,
        )
        cross = stats.cross_expenditures()
        w = np.log(cross) - np.log(np.diag(cross))[None, :]
        np.fill_diagonal(w, np.inf)
        graphs.append((w, np.zeros(50), np.full(50, -1, dtype=np.int64)))

    workloads = []
    for i in range(30):
        nrows = 300
        counts = rng.integers(2, 14, nrows)
        rowptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        z = rng.normal(0, 2, int(counts.sum()))
        rows = np.repeat(np.arange(nrows, dtype=np.int64), counts)
        workloads.append((z, rowptr, rows, nrows))

    print(f"{'workload':<34}{'pure':>10}{'fast':>10}{'speedup':>9}")
    rows = [
        ("relaxation rounds (40x T=50)", bench_bf(impls["pure"], graphs),
         bench_bf(impls["fast"], graphs)),
        ("segment reductions (30x m=300)", bench_segments(impls["pure"], workloads),
         bench_segments(impls["fast"], workloads)),
        ("end-to-end collective solve", bench_solve("pure"), bench_solve("fast")),
    ]
    for name, pure_t, fast_t in rows:
        print(f"{name:<34}{pure_t * 1e3:>8.2f}ms{fast_t * 1e3:>8.2f}ms"
              f"{pure_t / fast_t:>8.2f}x")

    # sanity: identical relaxation results across backends
    w, dist, parent = graphs[0]
    out_pure = impls["pure"].bf_rounds(w, dist, parent, w.shape[0])
    out_fast = impls["fast"].bf_rounds(w, dist, parent, w.shape[0])
    assert np.array_equal(out_pure[0], out_fast[0])
    assert np.array_equal(out_pure[1], out_fast[1])
    print("backend agreement: relaxation outputs bitwise identical")
    return 0


if __name__ == "__main__":
    sys.exit(main())
