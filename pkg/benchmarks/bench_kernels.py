"""Compare the compiled Bessel core with the numpy fallback.

Times the raw kernel on a batch of arguments and one full operator assembly
under each backend, and reports the largest difference between them.

Usage: python benchmarks/bench_kernels.py [--n 200000] [--h 0.1] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from multitrace import specfun
from multitrace.assembly import assemble_calderon, discretize
from multitrace.geometry import build_partition, fig1_config


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200_000, help="kernel batch size")
    ap.add_argument("--h", type=float, default=0.1, help="mesh width for the assembly run")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    if specfun.BACKEND != "compiled":
        print("compiled core not available; only the numpy backend can be timed")
    backends = ["numpy"] + (["compiled"] if specfun.BACKEND == "compiled" else [])

    rng = np.random.default_rng(0)
    x = np.exp(rng.uniform(np.log(1e-4), np.log(50.0), args.n))
    part = build_partition(fig1_config())

    kernel_t, assembly_t, values, blocks = {}, {}, {}, {}
    previous = specfun.BACKEND
    try:
        for name in backends:
            specfun.use_backend(name)
            values[name] = np.array(specfun.bessel01(x))
            kernel_t[name] = _best(lambda: specfun.bessel01(x), args.repeat)
            disc = discretize(part, args.h)
            assembly_t[name] = _best(lambda: assemble_calderon(disc), max(1, args.repeat // 2))
            blocks[name] = assemble_calderon(disc).data
    finally:
        specfun.use_backend(previous)

    print(f"{'backend':<10}{'kernel [ms]':>14}{'ns/point':>11}{'assembly [s]':>15}")
    for name in backends:
        t = kernel_t[name]
        print(f"{name:<10}{1e3 * t:>14.2f}{1e9 * t / args.n:>11.1f}{assembly_t[name]:>15.3f}")
    if len(backends) == 2:
        kv = np.max(np.abs(values["compiled"] - values["numpy"]) / np.maximum(np.abs(values["numpy"]), 1.0))
        dm = np.max(np.abs(blocks["compiled"] - blocks["numpy"])) / np.max(np.abs(blocks["numpy"]))
        print(f"speedup: kernel x{kernel_t['numpy'] / kernel_t['compiled']:.1f}, "
              f"assembly x{assembly_t['numpy'] / assembly_t['compiled']:.2f}")
        print(f"max kernel difference (scaled by max(|v|, 1)) {kv:.1e}, assembled matrix difference {dm:.1e}")


if __name__ == "__main__":
    main()
