"""Independent oracles: 1-D quadrature of the Gibbs target, grid
minimization of the potential, and fine-step long-run reference chains.

The quadrature table is the ground truth that every sampling diagnostic in
d=1 is measured against; it never touches the chain code.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ExtentError, ParameterError
from .potentials import PotentialModel
from .taming import lambda_max

#: boundary density must be below this fraction of the peak
DECAY_TOL = 1e-16


def _symmetric_grid(radius: float, n: int) -> np.ndarray:
    # exactly antisymmetric grid: x[i] = -x[n-1-i] bitwise
    step = 2.0 * radius / (n - 1)
    return (np.arange(n) - (n - 1) / 2.0) * step


def _eval_u_grid(model: PotentialModel, pts: np.ndarray) -> np.ndarray:
    if model.u_batch is not None:
        return np.asarray(model.u_batch(pts), dtype=np.float64)
    return np.array([model.u(row) for row in pts], dtype=np.float64)


def _paired_sum(values: np.ndarray) -> float:
    # sum symmetric index pairs first so exactly antisymmetric integrands
    # cancel to 0.0 instead of accumulating rounding noise
    n = values.size
    half = n // 2
    total = float(np.sum(values[:half] + values[n - 1:n - 1 - half:-1]))
    if n % 2:
        total += float(values[half])
    return total


@dataclass(frozen=True)
class ReferenceTarget:
    """Quadrature table of the 1-D Gibbs density exp(-beta*u)/Z."""

    grid: np.ndarray       # uniform, symmetric about 0
    density: np.ndarray    # normalized to unit trapezoid integral
    cdf: np.ndarray        # 0 at the left end, 1 at the right end
    survival: np.ndarray   # 1 at the left end, 0 at the right end
    mean: float
    m2: float
    m4: float
    m6: float
    normalizer: float      # integral of exp(-beta*u); may overflow to inf
    beta: float

    @property
    def step(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def quantile(self, q) -> np.ndarray:
        """Inverse CDF by monotone interpolation of the cumulative table."""
        q = np.clip(np.asarray(q, dtype=np.float64), 0.0, 1.0)
        return np.interp(q, self.cdf, self.grid)

    def cdf_at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return np.interp(x, self.grid, self.cdf, left=0.0, right=1.0)

    def survival_at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return np.interp(x, self.grid, self.survival, left=1.0, right=0.0)

    def bin_masses(self, edges: np.ndarray) -> np.ndarray:
        """Reference mass per bin.  The left half of the axis uses CDF
        differences and the right half survival differences, so tiny tail
        masses resolve on both sides instead of being absorbed near 1."""
        edges = np.asarray(edges, dtype=np.float64)
        from_cdf = np.diff(self.cdf_at(edges))
        sf = self.survival_at(edges)
        from_sf = sf[:-1] - sf[1:]
        mids = 0.5 * (edges[:-1] + edges[1:])
        masses = np.where(self.cdf_at(mids) <= 0.5, from_cdf, from_sf)
        return np.maximum(masses, 0.0)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Inverse-CDF draws, used as the self-consistency oracle."""
        return self.quantile(rng.uniform(size=n))


def quadrature_target_1d(model: PotentialModel, beta: float, radius: float,
                         n_grid: int) -> ReferenceTarget:
    """Tabulate the Gibbs density of a 1-D potential by the trapezoid rule.

    Raises ExtentError unless exp(-beta*u) at +-radius has decayed below
    1e-16 of its peak; raise the radius in that case.
    """
    if model.dimension != 1:
        raise DimensionError("quadrature target requires a 1-D model")
    if not (beta > 0.0 and np.isfinite(beta)):
        raise ParameterError(f"beta must be finite and > 0, got {beta}")
    if not (isinstance(n_grid, int) and n_grid >= 33):
        raise ParameterError("n_grid must be an integer >= 33")
    if not (radius > 0.0):
        raise ParameterError("radius must be > 0")

    x = _symmetric_grid(radius, n_grid)
    u = _eval_u_grid(model, x[:, None])
    umin = float(np.min(u))
    w = np.exp(-beta * (u - umin))
    edge = max(w[0], w[-1])
    if not (edge <= DECAY_TOL):
        raise ExtentError(
            f"density at the boundary is {edge:.3g} of its peak, above "
            f"{DECAY_TOL:g}; raise the radius (currently {radius:g})")

    dx = x[1] - x[0]
    raw_mass = np.trapezoid(w, dx=dx)
    density = w / raw_mass
    with np.errstate(over="ignore"):
        normalizer = float(raw_mass * np.exp(-beta * umin))

    inc = 0.5 * (density[1:] + density[:-1]) * dx
    cdf = np.concatenate([[0.0], np.cumsum(inc)])
    total = cdf[-1]
    cdf /= total
    survival = np.concatenate([np.cumsum(inc[::-1])[::-1], [0.0]]) / total

    def moment(k: int) -> float:
        g = x ** k * density
        g = g.copy()
        g[0] *= 0.5
        g[-1] *= 0.5
        return _paired_sum(g) * dx

    return ReferenceTarget(
        grid=x, density=density, cdf=cdf, survival=survival,
        mean=moment(1), m2=moment(2), m4=moment(4), m6=moment(6),
        normalizer=normalizer, beta=float(beta),
    )


def gaussian_init_kl(model: PotentialModel, beta: float, sigma: float,
                     radius: float = 10.0, n_grid: int = 4097) -> float:
    """KL divergence of an isotropic centered Gaussian from the Gibbs target,
    by quadrature.  Supports d in {1, 2}.

    KL = -d/2 * ln(2 pi e sigma^2) + beta * E_gauss[u] + ln Z_beta.
    """
    d = model.dimension
    if d not in (1, 2):
        raise DimensionError("quadrature KL is available for d in {1, 2} only")
    if d == 2:
        n_grid = min(n_grid, 257)
    x = _symmetric_grid(radius, n_grid)
    dx = x[1] - x[0]
    if d == 1:
        pts = x[:, None]
        u = _eval_u_grid(model, pts)
        w = np.exp(-beta * (u - np.min(u)))
        log_z = np.log(np.trapezoid(w, dx=dx)) - beta * np.min(u)
        phi = np.exp(-0.5 * (x / sigma) ** 2) / (sigma * np.sqrt(2.0 * np.pi))
        e_u = np.trapezoid(phi * u, dx=dx)
    else:
        xx, yy = np.meshgrid(x, x, indexing="ij")
        pts = np.column_stack([xx.ravel(), yy.ravel()])
        u = _eval_u_grid(model, pts).reshape(n_grid, n_grid)
        umin = float(np.min(u))
        w = np.exp(-beta * (u - umin))
        log_z = np.log(np.trapezoid(np.trapezoid(w, dx=dx), dx=dx)) - beta * umin
        r2 = xx ** 2 + yy ** 2
        phi = np.exp(-0.5 * r2 / sigma ** 2) / (2.0 * np.pi * sigma ** 2)
        e_u = np.trapezoid(np.trapezoid(phi * u, dx=dx), dx=dx)
    entropy = 0.5 * d * np.log(2.0 * np.pi * np.e * sigma ** 2)
    return float(-entropy + beta * e_u + log_z)


def grid_minimize(model: PotentialModel, box, resolution: int):
    """Locate the minimum of u: exhaustive grid scan, then 200 shrinking-step
    coordinate-descent sweeps from the best grid point.

    box is a (lo, hi) pair applied to every coordinate or a per-coordinate
    list of pairs.  Returns (theta_star, u_star); u_star never undershoots
    the true infimum since it is an evaluated value.
    """
    d = model.dimension
    box = np.asarray(box, dtype=np.float64)
    if box.ndim == 1:
        box = np.tile(box, (d, 1))
    if box.shape != (d, 2) or not np.all(box[:, 0] < box[:, 1]):
        raise ParameterError("box must be (lo, hi) with lo < hi per coordinate")
    if not (isinstance(resolution, int) and resolution >= 2):
        raise ParameterError("resolution must be an integer >= 2")

    # cap the mesh size; high-dimensional boxes get a coarser per-axis grid
    per_axis = resolution
    while per_axis > 2 and per_axis ** d > 2 ** 21:
        per_axis -= 1
    axes = [np.linspace(box[i, 0], box[i, 1], per_axis) for i in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    with np.errstate(all="ignore"):
        vals = _eval_u_grid(model, pts)
    finite = np.isfinite(vals)
    if not finite.any():
        raise ExtentError("no finite potential values inside the box")
    best = int(np.nanargmin(np.where(finite, vals, np.inf)))
    theta = pts[best].copy()
    u_best = float(vals[best])

    steps = (box[:, 1] - box[:, 0]) / (per_axis - 1)
    for _ in range(200):
        for i in range(d):
            for sgn in (1.0, -1.0):
                cand = theta.copy()
                cand[i] = np.clip(cand[i] + sgn * steps[i], box[i, 0], box[i, 1])
                val = float(model.u(cand))
                if np.isfinite(val) and val < u_best:
                    theta, u_best = cand, val
        steps *= 0.95
    return theta, u_best


def reference_chain(model: PotentialModel, beta: float, lam_ref: float,
                    n_ref: int, seed: int, n_chains: int = 1,
                    thinning: int = 1, eps_h: float = 0.5):
    """Long tamed run at a fine step, the empirical stand-in for the target
    when quadrature is unavailable.  Burn-in is half the run.  Requires
    lam_ref at most a quarter of the admissible cap."""
    from .sampler import ChainConfig, run_chains

    cap = lambda_max(model.constants, eps_h)
    if not (lam_ref <= cap / 4.0):
        raise ParameterError(
            f"reference step {lam_ref:g} must be <= lambda_max/4 = {cap / 4.0:g}")
    config = ChainConfig(
        potential=model.label, d=model.dimension, beta=beta,
        step_size=lam_ref, n_steps=int(n_ref), seed=seed, eps_h=eps_h,
        n_chains=n_chains, burn_in=int(n_ref) // 2, thinning=thinning,
        init="gaussian", init_sigma=1.0,
        quadratic_a=model.params.get("quadratic_a", 1.0),
        nn_eta=model.params.get("nn_eta", 0.5),
    )
    return run_chains(config, model=model)
