"""Compare the compiled kernels with the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--n-days 20000] [--repeats 3]

Times model fitting and prediction for every zoo algorithm (desk-scale
hyperparameters) under each available backend, checks that both backends
give the same predictions, and prints a table with the speedup.
"""
import argparse
import time

import numpy as np

from eeaval import _kernels
from eeaval.data import GeneratorConfig, generate_synthetic
from eeaval.models import fit, zoo_specs


def _best_time(fn, repeats):
    best, out = float("inf"), None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def run(n_days=20000, repeats=3, scale="desk"):
    factual, cf, _ = generate_synthetic(GeneratorConfig(n_days=n_days, temperature_shift=-1.2), 0)
    backends = _kernels.available_backends()
    rows = []
    prev = _kernels.backend_name()
    try:
        for spec in zoo_specs(scale, seed=0):
            times, preds = {}, {}
            for b in backends:
                _kernels.set_backend(b)
                t_fit, model = _best_time(lambda: fit(spec, factual), repeats)
                t_pred, p = _best_time(lambda: model.predict_array(cf.features), repeats)
                times[b], preds[b] = (t_fit, t_pred), p
            diff = max(float(np.max(np.abs(preds[b] - preds[backends[0]]))) for b in backends)
            rows.append((spec.algorithm, times, diff))
    finally:
        _kernels.set_backend(prev)
    return backends, rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-days", type=int, default=20000)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--scale", choices=("desk", "full"), default="desk")
    args = ap.parse_args(argv)
    backends, rows = run(args.n_days, args.repeats, args.scale)
    head = f"{'algorithm':<28}" + "".join(f"{b + ' fit':>14}{b + ' pred':>15}" for b in backends)
    if "compiled" in backends:
        head += f"{'fit speedup':>13}"
    print(f"n_days={args.n_days} repeats={args.repeats} scale={args.scale} (best wall time, seconds)")
    print(head + f"{'max |dp|':>11}")
    for algo, times, diff in rows:
        line = f"{algo:<28}" + "".join(f"{times[b][0]:>14.3f}{times[b][1]:>15.4f}" for b in backends)
        if "compiled" in backends:
            line += f"{times['python'][0] / times['compiled'][0]:>12.1f}x"
        print(line + f"{diff:>11.1e}")


if __name__ == "__main__":
    main()
