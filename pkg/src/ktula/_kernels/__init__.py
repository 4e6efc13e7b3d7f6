"""Chain-kernel backends.

The hot loop (one Langevin step per noise row) exists twice: a Cython core
compiled at install time and a vectorized numpy fallback.  Selection happens
at import; KTULA_FORCE_FALLBACK=1 forces the fallback for benchmarking and
portability tests.  Both backends draw noise identically, chain k of a run
with seed s consumes standard normals from

    numpy.random.Generator(numpy.random.Philox(key=[s, k]))

in consecutive blocks of NOISE_BLOCK rows of shape (block, d), so results are
reproducible bitwise per backend and agree statistically across backends.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

try:
    from . import _core
except ImportError:  # extension not built; fallback only
    _core = None

NOISE_BLOCK = 4096

KIND_GENERIC = 0
KIND_QUADRATIC = 1
KIND_DOUBLE_WELL = 2

ALGO_KTULA = 0
ALGO_ULA = 1


def force_fallback() -> bool:
    return os.environ.get("KTULA_FORCE_FALLBACK", "") not in ("", "0")


def have_compiled() -> bool:
    return _core is not None


def backend_name() -> str:
    if have_compiled() and not force_fallback():
        return "compiled"
    return "fallback"


def chain_rng(seed: int, chain: int) -> np.random.Generator:
    """The documented stream derivation: Philox keyed by (seed, chain)."""
    key = np.array([seed, chain], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass
class ChainResult:
    samples: np.ndarray            # (kept, d)
    moment_sums: np.ndarray        # sums of |theta|^2,4,6,8 over accepted steps
    n_acc: int                     # number of accepted steps
    max_running_mean_sq: float     # max over n of (1/n) sum |theta_k|^2
    diverged: bool
    first_divergent_step: int      # -1 if never
    final: np.ndarray              # state at the end (or at divergence)


@dataclass(frozen=True)
class StepParams:
    """Everything the per-step update needs besides the state and noise."""

    kind: int
    algo: int
    pot_a: float          # quadratic gradient slope (unused otherwise)
    a_split: float
    half_m: float         # (l+1) / (2 eps_h), exponent on |theta|^2
    eps_h: float
    lam: float
    noise_coef: float     # sqrt(2 lam / beta)
    thr2: float           # squared divergence threshold


def make_step_params(kind, algo, pot_a, a_split, l, eps_h, lam, beta,
                     threshold) -> StepParams:
    return StepParams(
        kind=kind,
        algo=algo,
        pot_a=float(pot_a),
        a_split=float(a_split),
        half_m=(l + 1) / (2.0 * eps_h),
        eps_h=float(eps_h),
        lam=float(lam),
        noise_coef=float(np.sqrt(2.0 * lam / beta)),
        thr2=float(threshold) ** 2,
    )


def run_chain_compiled(sp: StepParams, theta0: np.ndarray, n_steps: int,
                       burn_in: int, thinning: int, rng) -> ChainResult:
    """Single chain through the Cython kernel, block by block."""
    d = theta0.size
    theta = np.array(theta0, dtype=np.float64)
    n_kept_total = (n_steps - burn_in) // thinning
    kept_out = np.empty((max(n_kept_total, 1), d), dtype=np.float64)
    acc = np.zeros(5, dtype=np.float64)
    n_done = 0
    kept = 0
    diverged = -1
    while n_done < n_steps:
        b = min(NOISE_BLOCK, n_steps - n_done)
        noise = rng.standard_normal((b, d))
        n_done, kept, diverged = _core.run_block(
            sp.kind, sp.algo, theta, sp.pot_a, sp.a_split, sp.half_m,
            sp.eps_h, sp.lam, sp.noise_coef, sp.thr2, noise,
            n_done, burn_in, thinning, kept_out, kept, acc)
        if diverged >= 0:
            break
    n_acc = (diverged - 1) if diverged >= 0 else n_steps
    return ChainResult(
        samples=kept_out[:kept].copy(),
        moment_sums=acc[:4].copy(),
        n_acc=int(n_acc),
        max_running_mean_sq=float(acc[4]),
        diverged=diverged >= 0,
        first_divergent_step=int(diverged),
        final=theta,
    )


from ._fallback import run_chains_fallback  # noqa: E402  (shares the constants above)
