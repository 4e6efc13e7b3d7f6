"""Pure-numpy chain driver.

Runs every chain of a batch simultaneously, one vectorized update per step,
consuming the same per-chain noise streams as the compiled kernel.  Used for
generic potentials (which need Python gradient callbacks) on both backends,
and for everything when the extension is unavailable or disabled.
"""

from __future__ import annotations

import numpy as np


def _batch_gradient(kind, pot_a, model, thetas, r2):
    from . import KIND_DOUBLE_WELL, KIND_QUADRATIC

    if kind == KIND_QUADRATIC:
        return pot_a * thetas
    if kind == KIND_DOUBLE_WELL:
        return thetas * (r2 - 1.0)[:, None]
    if model.grad_batch is not None:
        return model.grad_batch(thetas)
    return np.stack([model.grad(row) for row in thetas])


def run_chains_fallback(sp, model, theta0s, n_steps, burn_in, thinning, rngs):
    """Advance all chains together; returns a list of ChainResult."""
    from . import ALGO_KTULA, ChainResult, NOISE_BLOCK

    theta0s = np.array(theta0s, dtype=np.float64)
    n_chains, d = theta0s.shape
    states = theta0s.copy()
    alive = np.ones(n_chains, dtype=bool)
    div_step = np.full(n_chains, -1, dtype=np.int64)
    sums = np.zeros((n_chains, 4), dtype=np.float64)
    n_acc = np.zeros(n_chains, dtype=np.int64)
    max_rm = np.zeros(n_chains, dtype=np.float64)
    n_kept_total = (n_steps - burn_in) // thinning
    kept = np.empty((n_chains, max(n_kept_total, 1), d), dtype=np.float64)
    kept_n = np.zeros(n_chains, dtype=np.int64)

    n_done = 0
    while n_done < n_steps and alive.any():
        b = min(NOISE_BLOCK, n_steps - n_done)
        noise = np.stack([rng.standard_normal((b, d)) for rng in rngs])
        for j in range(b):
            n = n_done + j + 1
            with np.errstate(all="ignore"):
                r2 = np.einsum("kd,kd->k", states, states)
                h = _batch_gradient(sp.kind, sp.pot_a, model, states, r2)
                if sp.algo == ALGO_KTULA:
                    denom = (1.0 + sp.lam * r2 ** sp.half_m) ** sp.eps_h
                    drift = sp.a_split * states + (h - sp.a_split * states) / denom[:, None]
                else:
                    drift = h
                new = states - sp.lam * drift + sp.noise_coef * noise[:, j, :]
            states = np.where(alive[:, None], new, states)
            with np.errstate(all="ignore"):
                r2n = np.einsum("kd,kd->k", states, states)
            ok = alive & (r2n <= sp.thr2)          # False for NaN as well
            newly_dead = alive & ~ok
            div_step[newly_dead] = n
            if ok.any():
                v2 = r2n[ok]
                v4 = v2 * v2
                sums[ok, 0] += v2
                sums[ok, 1] += v4
                sums[ok, 2] += v4 * v2
                sums[ok, 3] += v4 * v4
                n_acc[ok] += 1
                max_rm[ok] = np.maximum(max_rm[ok], sums[ok, 0] / n_acc[ok])
                since = n - burn_in
                if since > 0 and since % thinning == 0:
                    idx = since // thinning - 1
                    kept[ok, idx, :] = states[ok]
                    kept_n[ok] = idx + 1
            alive = ok
            if not alive.any():
                break
        n_done += b

    results = []
    for k in range(n_chains):
        results.append(ChainResult(
            samples=kept[k, :kept_n[k]].copy(),
            moment_sums=sums[k].copy(),
            n_acc=int(n_acc[k]),
            max_running_mean_sq=float(max_rm[k]),
            diverged=div_step[k] >= 0,
            first_divergent_step=int(div_step[k]),
            final=states[k].copy(),
        ))
    return results
