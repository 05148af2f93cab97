"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Shapes follow the default experiment: an LSTM over 28 steps for a batch of
8 windows x 23 districts with 10 hidden units, and mean shift over one
user's night pings.
"""
import argparse
import timeit

import numpy as np

from epiwave.kernels import _fallback

try:
    from epiwave.kernels import _ckernels
except ImportError:
    _ckernels = None


def lstm_case(rng, steps=28, rows=8 * 23, hidden=10):
    xw = rng.normal(size=(steps, rows, 4 * hidden))
    wh = rng.normal(scale=0.3, size=(hidden, 4 * hidden))
    h0 = np.zeros((rows, hidden))
    c0 = np.zeros((rows, hidden))
    return xw, wh, h0, c0


def cases(rng):
    xw, wh, h0, c0 = lstm_case(rng)
    hs, cs, gates = _fallback.lstm_recurrence(xw, wh, h0, c0)
    dhs = rng.normal(size=hs.shape)
    dcs = np.zeros_like(cs)
    pings = np.concatenate([rng.normal([35.7, 139.7], 0.001, (400, 2)), rng.normal([35.72, 139.68], 0.001, (100, 2))])
    return {
        "lstm forward": lambda k: k.lstm_recurrence(xw, wh, h0, c0),
        "lstm backward": lambda k: k.lstm_recurrence_backward(dhs, dcs, wh, h0, c0, hs, cs, gates),
        "mean shift (500 pings)": lambda k: k.flat_mean_shift(pings, 0.005),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=20)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels not built; only the fallback can run")
    rng = np.random.default_rng(0)
    print(f"{'kernel':24s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, fn in cases(rng).items():
        py = min(timeit.repeat(lambda: fn(_fallback), number=args.number, repeat=args.repeat)) / args.number
        if _ckernels is None:
            print(f"{name:24s} {1e3 * py:10.3f} {'-':>10s} {'-':>8s}")
            continue
        cy = min(timeit.repeat(lambda: fn(_ckernels), number=args.number, repeat=args.repeat)) / args.number
        print(f"{name:24s} {1e3 * py:10.3f} {1e3 * cy:10.3f} {py / cy:7.1f}x")


if __name__ == "__main__":
    main()
