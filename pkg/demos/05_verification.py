"""Run the structural verification suite and print the report.

Twelve checks, each pairing a claimed property of the process with a
measurable experiment: invariance of the nutrient strip, almost-sure
extinction, closed-form oracles, agreement of the three independent
survival-rate estimators, stationarity of the conditioned law,
memoryless absorption, density structure, the drift condition, and
bit-level reproducibility of the command-line outputs.

Pass --quick for a reduced Monte Carlo scale (about 20 seconds instead
of a couple of minutes).
"""
import sys
import time

from chemostat_qsd.verification import run_all


def main():
    quick = "--quick" in sys.argv[1:]
    t0 = time.perf_counter()
    report = run_all(quick=quick)
    elapsed = time.perf_counter() - t0
    print(report.summary())
    print(f"({elapsed:.1f} s, {'quick' if quick else 'full'} scale)")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
