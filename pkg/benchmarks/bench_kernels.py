"""Compare the numba and pure-numpy kernels: raw kernel calls and end-to-end estimates.

    python benchmarks/bench_kernels.py [--repeat 200] [--bins 16 256 4096]
"""
from __future__ import annotations

import argparse
import statistics
import time
from contextlib import contextmanager

import numpy as np

from joinlb import _kernels, oracle
from joinlb.bounds import estimate
from joinlb.builder import build_catalog
from joinlb.model import BuildConfig, JoinQuery, Or, Range, RelationRef

BACKENDS = {
    "numpy": (_kernels.cell_bounds_numpy, _kernels.holder_denominator_numpy),
    "numba": (_kernels.cell_bounds_numba, _kernels.holder_denominator_numba),
}


@contextmanager
def using(backend: str):
    saved = _kernels.cell_bounds, _kernels.holder_denominator
    _kernels.cell_bounds, _kernels.holder_denominator = BACKENDS[backend]
    try:
        yield
    finally:
        _kernels.cell_bounds, _kernels.holder_denominator = saved


def timed(fn, repeat: int) -> float:
    fn()  # warm-up, includes JIT compilation
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples) * 1e3


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--bins", type=int, nargs="+", default=[16, 256, 4096])
    ap.add_argument("--relations", type=int, default=4)
    args = ap.parse_args(argv)

    backends = [b for b in BACKENDS if BACKENDS[b][0] is not None]
    spec = oracle.InstanceSpec(
        relations=args.relations, key_range=100_000, rows=(300_000,), skew=2.0, density=0.95, seed=1
    )
    inst = oracle.generate_instance(spec)
    plain = JoinQuery(tuple(RelationRef(n, "x") for n in inst.names))
    disj = JoinQuery(
        tuple(RelationRef(n, "x", Or((Range("p0", 0, 3), Range("p0", 4, 7)))) for n in inst.names)
    )

    print(f"{'case':<34}" + "".join(f"{b + ' [ms]':>14}" for b in backends) + f"{'speedup':>10}")
    for bins in args.bins:
        cat = build_catalog(inst.tables.values(), BuildConfig(bins, 16, 32))
        for label, q in (("unfiltered", plain), ("2-way OR per relation", disj)):
            row = {}
            for b in backends:
                with using(b):
                    row[b] = timed(lambda: estimate(cat, q), args.repeat)
            _print(f"estimate B={bins} {label}", row)

    rng = np.random.default_rng(0)
    for n in (4, 6, 8):
        ratios = np.sort(rng.uniform(1, 50, n))
        row = {b: timed(lambda: BACKENDS[b][1](ratios), args.repeat) for b in backends}
        _print(f"holder ordering n={n}", row)


def _print(label, row):
    cells = "".join(f"{v:>14.4f}" for v in row.values())
    speed = f"{row['numpy'] / row['numba']:>9.1f}x" if "numba" in row else ""
    print(f"{label:<34}{cells}{speed}")


if __name__ == "__main__":
    main()
