#!/usr/bin/env python3
"""Compare the numba-compiled kernels against the pure-numpy fallback.

Set DRILLSIM_DISABLE_NUMBA=1 to force the whole package onto the fallback
path instead (this script then times that path only).
"""

import argparse

from drillsim.bench import run_benchmark

if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=5,
                        help="timing repetitions per kernel")
    args = parser.parse_args()
    run_benchmark(trials=args.trials)
