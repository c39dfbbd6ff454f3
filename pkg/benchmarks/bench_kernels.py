"""Compare the compiled and numpy kernel backends on realistic workloads.

    python3 benchmarks/bench_kernels.py [--size 256] [--repeat 3]

Reports the best-of-N wall time per kernel and backend, plus the largest
difference between backend outputs.
"""

import argparse
import time

import numpy as np

from fuselens.fuse import fuse_average
from fuselens.image import extract_patches, patch_means
from fuselens.kernels import BACKENDS
from fuselens.losses.mef_ssim import MEF_SPEC, desired_patches
from fuselens.losses.semantic import SL_SPEC, background_mask
from fuselens.metrics import SL_METRIC_SPEC
from fuselens.phantom import make_phantom


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def sl_inputs(x, y, spec):
    ct, mr, fy = (patch_means(im, spec).means for im in (x.ct, x.mr, y))
    keep = ~background_mask(ct, mr, spec.background_threshold)
    return [np.ascontiguousarray(m[keep]) for m in (ct, mr, fy)]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=256)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    x = make_phantom(args.size, seed=0)
    y = fuse_average(x).data
    rows, cols = MEF_SPEC.grid_shape(x.shape)
    targets = np.ascontiguousarray(desired_patches(extract_patches(x.ct, MEF_SPEC),
                                                   extract_patches(x.mr, MEF_SPEC)))
    sl_loss = sl_inputs(x, y, SL_SPEC)
    sl_eval = sl_inputs(x, y, SL_METRIC_SPEC)

    cases = {
        f"sl loss 5/3 + grad (M={len(sl_loss[0])})": lambda k: k.sl_pairwise(*sl_loss, True),
        f"sl index 3/1 (M={len(sl_eval[0])})": lambda k: k.sl_pairwise(*sl_eval),
        "mef-ssim 7/1 + grad": lambda k: k.mef_patch_terms(targets, y, rows, cols, 7, 1, 9e-4, True),
    }
    names = sorted(BACKENDS)
    print(f"{args.size}x{args.size} phantom, best of {args.repeat}")
    print(f"{'kernel':<34}" + "".join(f"{n:>12}" for n in names) + f"{'speedup':>10}{'max diff':>12}")
    for label, fn in cases.items():
        results = {n: best_of(lambda: fn(BACKENDS[n]), args.repeat) for n in names}
        line = f"{label:<34}" + "".join(f"{results[n][0]:>11.3f}s" for n in names)
        if len(names) == 2:
            (t_a, out_a), (t_b, out_b) = results[names[0]], results[names[1]]
            diff = abs(out_a[0] - out_b[0])
            if out_a[1] is not None:
                diff = max(diff, float(np.max(np.abs(out_a[1] - out_b[1]))))
            line += f"{t_b / t_a:>9.1f}x{diff:>12.2e}"
        print(line)


if __name__ == "__main__":
    main()
