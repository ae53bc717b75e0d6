"""Time the numba and numpy kernels on the same inputs.

    python3 benchmarks/bench_backends.py [--scales 65536] [--repeat 3]

Both backend modules are imported directly, so SCALESIM_BACKEND does not
matter here.  The first numba call of each kernel is timed separately as
compilation (or cache load) and excluded from the steady-state figures.
"""

import argparse
import time

import numpy as np

from scalesim.costs import build_template
from scalesim.generator import sample_raw_scale
from scalesim.kernels import numba_backend, numpy_backend


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _parts(out):
    return out if isinstance(out, tuple) else (out,)


def cases(n_scales, seed):
    rng = np.random.default_rng(seed)
    iv = sample_raw_scale(7, rng, low=80.0, size=n_scales)
    pack = build_template(20.0).pack
    samples = rng.uniform(0, 1200, size=n_scales)
    grid = np.arange(0.0, 1201.0)
    notes = np.zeros((n_scales, 8))
    np.cumsum(iv, axis=1, out=notes[:, 1:])
    db = notes[rng.choice(n_scales, 500, replace=False)] + rng.normal(0, 8, size=(500, 8))
    db[:, 0] = 0.0
    small = iv[:4096]
    return {
        "mean_harmonicity": lambda b: b.mean_harmonicity(iv, pack, 1.0),
        "fifths_fraction": lambda b: b.fifths_fraction(iv, 20.0),
        "trans_cost": lambda b: b.trans_cost(small, 2.0, False),
        "kde_on_grid": lambda b: b.kde_on_grid(samples, grid, 10.0),
        "found_flags": lambda b: b.found_flags(db, notes, 10.0),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scales", type=int, default=65536)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if numba_backend is None:
        raise SystemExit("numba is not importable; nothing to compare")

    print(f"{'kernel':<18}{'numba first':>13}{'numba':>11}{'numpy':>11}{'speedup':>10}")
    for name, call in cases(args.scales, args.seed).items():
        t0 = time.perf_counter()
        ref = call(numba_backend)
        first = time.perf_counter() - t0
        t_nb = _best(lambda: call(numba_backend), args.repeat)
        t_np = _best(lambda: call(numpy_backend), args.repeat)
        got = call(numpy_backend)
        same = all(np.allclose(a, b) for a, b in zip(_parts(ref), _parts(got)))
        flag = "" if same else "  MISMATCH"
        print(f"{name:<18}{first:>12.3f}s{t_nb:>10.4f}s{t_np:>10.4f}s{t_np / t_nb:>9.1f}x{flag}")


if __name__ == "__main__":
    main()
