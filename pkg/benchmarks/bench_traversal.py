#!/usr/bin/env python3
"""Compare the compiled traversal kernel against the pure-Python fallback.

Same as `canvox bench`; kept here so the benchmark is discoverable next to
the code it measures.

    python3 benchmarks/bench_traversal.py [--size WxH] [--rays N] [--depth D]
"""

import argparse

from canvox.bench import run_benchmark


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", default="128x128")
    ap.add_argument("--rays", type=int, default=2000)
    ap.add_argument("--depth", type=int, default=16)
    args = ap.parse_args()
    w, h = (int(v) for v in args.size.lower().split("x"))
    run_benchmark(size=(w, h), rays=args.rays, depth=args.depth)


if __name__ == "__main__":
    main()
