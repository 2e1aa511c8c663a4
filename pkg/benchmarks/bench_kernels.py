"""Benchmark: compiled vs pure-Python walk kernel on a reference scenario.

Usage: python benchmarks/bench_kernels.py [--hosts N] [--batches N]
Prints walks/second per backend and the speed-up factor, and verifies that
both backends produce identical batches for the benchmark seed.
"""

import argparse
import time

from agx import kernels
from agx.generator import IndexedAttackGraph
from agx.scenario import ScenarioSpec, generate_scenario


def build_arrays(hosts: int):
    spec = ScenarioSpec.from_dict(
        {
            "hosts": hosts,
            "topology": {"kind": "random", "p": 0.3},
            "vulns_per_host": 3,
            "distribution": {"kind": "uniform", "low": 2, "high": 4},
            "heterogeneity": 50,
            "seed": 7,
        }
    )
    net, inv = generate_scenario(spec)
    return IndexedAttackGraph(net, inv)


def bench(backend, ix, batches: int, batch_size: int) -> tuple[float, int]:
    state = 42
    walks = 0
    entries = ix.entry_indices(None)
    start = time.perf_counter()
    for _ in range(batches):
        nodes, vulns, noff, voff, state = backend.walk_batch(
            ix.indptr, ix.succ, ix.vptr, None, entries,
            0.15, 0.0, ix.n_hosts, batch_size, state,
        )
        walks += batch_size
    return time.perf_counter() - start, walks


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--hosts", type=int, default=12)
    parser.add_argument("--batches", type=int, default=200)
    parser.add_argument("--batch-size", type=int, default=100)
    args = parser.parse_args()

    ix = build_arrays(args.hosts)
    print(f"scenario: {ix.n_hosts} hosts, {len(ix.succ)} links, {ix.n_vulns} vulnerabilities")
    print(f"available backends: {', '.join(kernels.available_backends())}")

    # correctness cross-check before timing
    if "compiled" in kernels.available_backends():
        entries = ix.entry_indices(None)
        args_tuple = (ix.indptr, ix.succ, ix.vptr, None, entries, 0.15, 0.0,
                      ix.n_hosts, 500, 42)
        py = kernels.get_backend("python").walk_batch(*args_tuple)
        cc = kernels.get_backend("compiled").walk_batch(*args_tuple)
        identical = (
            list(map(int, py[0])) == list(map(int, cc[0]))
            and list(map(int, py[1])) == list(map(int, cc[1]))
            and int(py[4]) == int(cc[4])
        )
        print(f"backends produce identical batches: {identical}")

    results = {}
    for name in kernels.available_backends():
        backend = kernels.get_backend(name)
        # fewer batches for the slow path so the benchmark stays snappy
        batches = args.batches if name == "compiled" else max(1, args.batches // 10)
        elapsed, walks = bench(backend, ix, batches, args.batch_size)
        rate = walks / elapsed
        results[name] = rate
        print(f"{name:>9}: {walks:>8} walks in {elapsed:7.3f}s  ->  {rate:12,.0f} walks/s")

    if {"python", "compiled"} <= results.keys():
        print(f"speed-up: compiled is {results['compiled'] / results['python']:.1f}x faster")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
