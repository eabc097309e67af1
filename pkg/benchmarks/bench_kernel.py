"""Time the compiled kernel against the numpy fallback.

Run: python3 benchmarks/bench_kernel.py [--repeat N]
Both backends are checked for agreement before timing.
"""
import argparse
import timeit

import numpy as np

from pqsteer import _pykernel
from pqsteer._backend import available_backends
from pqsteer.functionals import icd_matrix


def cases(rng):
    def cm(*shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    a, b = cm(8, 8), cm(8, 8)
    big = cm(64, 64)
    A, B = cm(96, 4, 4), cm(96, 4, 4)
    C = rng.standard_normal((10, 8))
    return {
        "kron 8x8": ("kron", (a, b)),
        "trace_product 64": ("trace_product", (big, big)),
        "batched_trace_product 96x4x4": ("batched_trace_product", (A, B)),
        "ptrace_pair 8x8 keep first": ("ptrace_pair", (big, 8, 8, True)),
        "ptrace_pair 8x8 keep second": ("ptrace_pair", (big, 8, 8, False)),
        "correlator_max icd (512)": ("correlator_max", (icd_matrix(),)),
        "correlator_max 10x8": ("correlator_max", (C,)),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=2000)
    args = ap.parse_args()
    backends = {mod.NAME: mod for mod in available_backends()}
    if "compiled" not in backends:
        print("compiled kernel not built; only the numpy fallback is available")
    rng = np.random.default_rng(0)
    print(f"{'case':34s}" + "".join(f"{name:>14s}" for name in backends) + "     speedup")
    for label, (fn, argv) in cases(rng).items():
        ref = getattr(_pykernel, fn)(*argv)
        times = {}
        for name, mod in backends.items():
            out = getattr(mod, fn)(*argv)
            assert np.allclose(out, ref, atol=1e-10), (label, name)
            n = args.repeat if fn != "correlator_max" or argv[0].size < 60 else max(1, args.repeat // 20)
            times[name] = timeit.timeit(lambda: getattr(mod, fn)(*argv), number=n) / n * 1e6
        line = f"{label:34s}" + "".join(f"{times[k]:12.2f}us" for k in backends)
        if "compiled" in times:
            line += f"  {times['python'] / times['compiled']:8.2f}x"
        print(line)


if __name__ == "__main__":
    main()
