"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--no-solve]

Micro timings cover each kernel on typical operand sizes; the solve rows
time both fixtures end to end under each backend.
"""
import argparse
import timeit
from pathlib import Path

import numpy as np

from hybridid import kernels
from hybridid.model import load_diagram
from hybridid.solver import solve

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "hybridid" / "fixtures"


def micro_cases():
    rng = np.random.default_rng(0)
    a1, b1 = rng.normal(size=4), rng.normal(size=4)
    a2, b2 = rng.normal(size=(4, 4)), rng.normal(size=(4, 3))
    a3, b3 = rng.normal(size=(4, 3, 2)), rng.normal(size=(3, 3, 2))
    xs = rng.uniform(-1, 1, 10_000)
    cubic = np.array([-0.25, 0.1, 0.9, 1.0])
    return [
        ("conv_nd 1d 4x4", 20_000, lambda: kernels.conv_nd(a1, b1)),
        ("conv_nd 2d 4x4 * 4x3", 5_000, lambda: kernels.conv_nd(a2, b2)),
        ("conv_nd 3d", 2_000, lambda: kernels.conv_nd(a3, b3)),
        ("horner deg 3, 10k points", 2_000, lambda: kernels.horner(cubic, xs)),
        ("shift_axis 4x4", 20_000, lambda: kernels.shift_axis(a2, 0, 0.37)),
        ("refine_root cubic", 20_000, lambda: kernels.refine_root(cubic, 0.0, 1.0, 1e-14)),
    ]


def best_of(fn, number, repeat):
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--no-solve", action="store_true", help="skip the end-to-end solves")
    args = ap.parse_args(argv)

    names = kernels.available()
    if "compiled" not in names:
        print("compiled extension not built; timing the python backend only")
    rows = []
    for label, number, fn in micro_cases():
        times = {}
        for name in names:
            kernels.use(name)
            times[name] = best_of(fn, number, args.repeat) * 1e6
        rows.append((label, "us", times))
    if not args.no_solve:
        for fixture in ("entrepreneur", "put_option"):
            d = load_diagram(FIXTURES / f"{fixture}.yaml")
            times = {}
            for name in names:
                kernels.use(name)
                times[name] = best_of(lambda: solve(d), 1, min(args.repeat, 3))
            rows.append((f"solve {fixture}", "s", times))
    kernels.use(names[0] if "compiled" not in names else "compiled")

    head = f"{'case':<28}" + "".join(f"{n:>14}" for n in names)
    if len(names) > 1:
        head += f"{'speedup':>10}"
    print(head)
    print("-" * len(head))
    for label, unit, times in rows:
        line = f"{label:<28}" + "".join(f"{times[n]:>11.3f} {unit:<2}" for n in names)
        if len(names) > 1:
            line += f"{times['python'] / times['compiled']:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
