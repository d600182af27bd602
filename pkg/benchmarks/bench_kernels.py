"""Time the relation kernels and a full exploration on each backend.

    python3 benchmarks/bench_kernels.py [--repeat N] [--size N]
"""

from __future__ import annotations

import argparse
import random
import timeit
from pathlib import Path

from futurestep import kernels
from futurestep.executor import Options, explore
from futurestep.lang import parse_program

PROGRAMS = Path(__file__).resolve().parent.parent / "programs"


def random_dag(rng: random.Random, n: int, density: float) -> list[tuple[int, int]]:
    return [(a, b) for b in range(n) for a in range(b) if rng.random() < density]


def kernel_cases(n: int, seed: int = 7):
    rng = random.Random(seed)
    edges = random_dag(rng, n, 0.08)
    succ = [0] * n
    for a, b in edges:
        succ[a] |= 1 << b
    closed = kernels.closure(succ)
    sels = [rng.getrandbits(n) for _ in range(64)]
    writes = rng.getrandbits(n)
    direct_pred = [sum(1 << a for a, b in edges if b == e) for e in range(n)]

    def closure():
        kernels.closure(succ)

    def union_over():
        for s in sels:
            kernels.union_over(closed, s)

    def eco_extend():
        pred: list[int] = []
        out: list[int] = []
        for e in range(n):
            kernels.eco_extend(pred, out, e, direct_pred[e], 0)

    def encountered():
        for s in sels:
            kernels.encountered(closed, closed, s, writes)

    return {"closure": closure, "union_over": union_over, "eco_extend": eco_extend, "encountered": encountered}


EXPLORE = {
    "lb.prog": Options(),
    "rng.prog": Options(domain={"x": [0, 1, 2, 99, 100], "y": [0, 1, 2, 3]}),
    "lb_data_ctrl.prog": Options(),
}


def explore_cases():
    out = {}
    for name, opts in EXPLORE.items():
        p = parse_program((PROGRAMS / name).read_text())
        out[f"explore {name}"] = lambda p=p, opts=opts: explore(p, opts)
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", type=int, default=60, help="events in the random DAG (at most 64 for the compiled path)")
    args = ap.parse_args()

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled kernels unavailable; timing the python backend only")
    start = kernels.backend()
    rows: dict[str, dict[str, float]] = {}
    try:
        for name in backends:
            kernels.use_backend(name)
            cases = {**kernel_cases(args.size), **explore_cases()}
            for label, fn in cases.items():
                number = 1 if label.startswith("explore") else 20
                best = min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number
                rows.setdefault(label, {})[name] = best
    finally:
        kernels.use_backend(start)

    head = f"{'case':<28}" + "".join(f"{b:>14}" for b in backends) + ("    speedup" if len(backends) > 1 else "")
    print(head)
    for label, times in rows.items():
        line = f"{label:<28}" + "".join(f"{times[b] * 1e6:>12.1f}us" for b in backends)
        if len(backends) > 1:
            line += f"{times['python'] / times['cython']:>10.2f}x"
        print(line)


if __name__ == "__main__":
    main()
