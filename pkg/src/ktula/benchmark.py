"""Backend benchmark: times the compiled kernel against the numpy fallback
on the same double-well workload and checks their short-horizon agreement.

    python -m ktula.benchmark [--steps N] [--d D] [--chains K]
"""

from __future__ import annotations

import argparse
import os
import time

import numpy as np

from ._kernels import have_compiled
from .sampler import ChainConfig, run_chains


def _run(config: ChainConfig, fallback: bool):
    old = os.environ.get("KTULA_FORCE_FALLBACK")
    os.environ["KTULA_FORCE_FALLBACK"] = "1" if fallback else "0"
    try:
        t0 = time.perf_counter()
        batch = run_chains(config)
        return batch, time.perf_counter() - t0
    finally:
        if old is None:
            os.environ.pop("KTULA_FORCE_FALLBACK", None)
        else:
            os.environ["KTULA_FORCE_FALLBACK"] = old


def run_benchmark(n_steps: int = 200_000, d: int = 2, n_chains: int = 4,
                  quiet: bool = False) -> dict:
    config = ChainConfig(potential="double_well", d=d, beta=1.0,
                         step_size=1e-5, n_steps=n_steps, n_chains=n_chains,
                         seed=7, thinning=max(1, n_steps // 1000))
    out = {"compiled_available": have_compiled()}

    # agreement on a short horizon with identical noise streams
    short = ChainConfig(potential="double_well", d=d, beta=1.0, step_size=1e-5,
                        n_steps=512, n_chains=2, seed=11, thinning=1)
    fb_batch, _ = _run(short, fallback=True)
    if have_compiled():
        co_batch, _ = _run(short, fallback=False)
        gap = max(float(np.max(np.abs(a - b)))
                  for a, b in zip(co_batch.samples, fb_batch.samples))
        out["max_abs_gap_512_steps"] = gap
    else:
        out["max_abs_gap_512_steps"] = 0.0

    _, t_fb = _run(config, fallback=True)
    total = n_steps * n_chains
    out["fallback_steps_per_s"] = total / t_fb
    if have_compiled():
        _, t_co = _run(config, fallback=False)
        out["compiled_steps_per_s"] = total / t_co
        out["speedup"] = t_fb / t_co
    if not quiet:
        print(f"workload: double_well d={d}, {n_chains} chains x {n_steps} steps")
        print(f"compiled extension: {'yes' if out['compiled_available'] else 'no'}")
        print(f"agreement (max |dx| over 512 steps): {out['max_abs_gap_512_steps']:.3e}")
        print(f"fallback:  {out['fallback_steps_per_s']:,.0f} steps/s")
        if "compiled_steps_per_s" in out:
            print(f"compiled:  {out['compiled_steps_per_s']:,.0f} steps/s")
            print(f"speedup:   {out['speedup']:.1f}x")
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--chains", type=int, default=4)
    args = ap.parse_args(argv)
    run_benchmark(args.steps, args.d, args.chains)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
