"""Compare the compiled kernels against the numpy fallback.

Usage::

    python benchmarks/bench_backends.py [--repeat 5] [--particles 500]

Prints the median wall time per call and the speed-up for each kernel.
"""
import argparse
import statistics
import time

import numpy as np

from molcomm import _pure, _random, detection, ldpc
from molcomm.channel import TxFrame, transmit_frame
from molcomm.diffusion import ChannelParams, analytic_channel_response

try:
    from molcomm import _speedups
except ImportError:
    _speedups = None


def timed(fn, repeat):
    fn()  # warm-up
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def cases(particles):
    params = ChannelParams(n_particles=particles)
    response = analytic_channel_response(params)
    code = ldpc.build_regular_code(200, 100, seed=0)
    rng = np.random.default_rng(0)
    c = ldpc.encode(code, rng.integers(0, 2, 100))
    sigma = 0.9
    llr = 2 * ((1 - 2 * c) + sigma * rng.standard_normal(200)) / sigma**2
    counts = transmit_frame(TxFrame(c, 300.0), response, 1).counts
    key = _random.derive_seed(0, "brownian")
    brownian = (key, 0, particles, params.n_slots * params.steps_per_slot,
                params.steps_per_slot, params.n_slots, params.step_sigma,
                params.tx_distance, params.receiver_radius, True, _random.ZIG_X, _random.ZIG_RATIO)

    return {
        f"brownian ({particles} particles)": lambda k: k.brownian_slot_counts(*brownian),
        "normal_stream (2e4)": lambda k: k.normal_stream(7, 20_000, _random.ZIG_X,
                                                          _random.ZIG_RATIO),
        "bp_decode (n=200)": lambda k: ldpc.decode_bp(code, llr, backend=k),
        "compute_llrs (n=200, L=9)": lambda k: detection.compute_llrs(counts, 300.0, response,
                                                                      backend=k),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--particles", type=int, default=500)
    args = parser.parse_args(argv)
    if _speedups is None:
        print("compiled extension not built; only the numpy fallback is available")
    print(f"{'kernel':<30} {'cython':>12} {'python':>12} {'speed-up':>9}")
    for name, fn in cases(args.particles).items():
        py = timed(lambda: fn(_pure), args.repeat)
        if _speedups is None:
            print(f"{name:<30} {'-':>12} {py * 1e3:>10.3f}ms {'-':>9}")
            continue
        cy = timed(lambda: fn(_speedups), args.repeat)
        print(f"{name:<30} {cy * 1e3:>10.3f}ms {py * 1e3:>10.3f}ms {py / cy:>8.1f}x")


if __name__ == "__main__":
    main()
