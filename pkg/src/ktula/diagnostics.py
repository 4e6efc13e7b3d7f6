"""Sample-based error measures: empirical moments, order-statistics
Wasserstein-1 in d=1, sliced Wasserstein-2, histogram KL against a
quadrature reference, excess risk, and log-log rate fitting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DivergenceError, ExtentError, FitError, ParameterError
from .potentials import PotentialModel
from .reference import ReferenceTarget


def _pooled(obj) -> np.ndarray:
    """Accept a SampleBatch or a raw sample array."""
    if hasattr(obj, "pooled"):
        return obj.pooled()
    arr = np.asarray(obj, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ParameterError("expected a non-empty (n, d) sample array")
    return arr


def empirical_moment(batch, p: int) -> float:
    """Mean of |theta|^(2p) over kept samples, pooled across the
    non-divergent chains."""
    if not (isinstance(p, int) and p >= 1):
        raise ParameterError(f"moment order p must be an integer >= 1, got {p}")
    samples = _pooled(batch)
    if samples.shape[0] == 0:
        raise DivergenceError(batch)
    r2 = np.einsum("nd,nd->n", samples, samples)
    return float(np.mean(r2 ** p))


def wasserstein1_1d(samples, reference) -> float:
    """Order-statistics Wasserstein-1 distance of 1-D samples from a
    reference.

    The reference is either a quadrature table (its quantile function is
    evaluated at the mid-rank grid (i - 1/2)/n) or a second sample set,
    whose empirical quantiles are used at the same ranks.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 2 and samples.shape[1] == 1:
        samples = samples[:, 0]
    if samples.ndim != 1 or samples.size < 1:
        raise DimensionError("wasserstein1_1d needs a non-empty 1-D sample vector")
    xs = np.sort(samples)
    n = xs.size
    ranks = (np.arange(n) + 0.5) / n
    if isinstance(reference, ReferenceTarget):
        q = reference.quantile(ranks)
    else:
        atoms = np.sort(np.asarray(reference, dtype=np.float64).ravel())
        if atoms.size < 1:
            raise ParameterError("empirical reference must be non-empty")
        idx = np.minimum((ranks * atoms.size).astype(np.int64), atoms.size - 1)
        q = atoms[idx]
    return float(np.mean(np.abs(xs - q)))


def _subsample(arr: np.ndarray, n: int) -> np.ndarray:
    """Deterministic stride subsample down to n rows."""
    if arr.shape[0] == n:
        return arr
    idx = (np.arange(n, dtype=np.float64) * arr.shape[0] / n).astype(np.int64)
    return arr[idx]


def sliced_w2(a, b, n_proj: int, seed: int, projections=None) -> float:
    """Projection-based Wasserstein-2 proxy between two sample sets.

    Root of the mean over seeded uniform unit projections of the squared
    1-D Wasserstein-2 between the projected order statistics.  The larger
    set is subsampled deterministically to equal counts.
    """
    xa = _pooled(a)
    xb = _pooled(b)
    if xa.shape[1] != xb.shape[1]:
        raise DimensionError(
            f"sample dimensions differ: {xa.shape[1]} vs {xb.shape[1]}")
    if not (isinstance(n_proj, int) and n_proj >= 1):
        raise ParameterError("n_proj must be an integer >= 1")
    d = xa.shape[1]
    n = min(xa.shape[0], xb.shape[0])
    xa = _subsample(xa, n)
    xb = _subsample(xb, n)
    if projections is None:
        rng = np.random.default_rng(seed)
        projections = rng.standard_normal((n_proj, d))
        projections /= np.linalg.norm(projections, axis=1, keepdims=True)
    else:
        projections = np.asarray(projections, dtype=np.float64)
        if projections.shape != (n_proj, d):
            raise DimensionError("projections must have shape (n_proj, d)")
    total = 0.0
    for v in projections:
        pa = np.sort(xa @ v)
        pb = np.sort(xb @ v)
        total += float(np.mean((pa - pb) ** 2))
    return float(np.sqrt(total / n_proj))


def discrete_kl(p: np.ndarray, q: np.ndarray) -> float:
    """KL divergence between two discrete mass vectors (natural log).
    Nonnegative whenever both sum to one."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise DimensionError("mass vectors must have equal length")
    if np.any(p < 0) or np.any(q < 0):
        raise ParameterError("masses must be nonnegative")
    out = 0.0
    pos = p > 0
    with np.errstate(divide="ignore"):
        terms = p[pos] * (np.log(p[pos]) - np.log(q[pos]))
    return float(np.sum(terms))


def grid_kl_1d(samples, reference: ReferenceTarget, bins: int,
               extent: float) -> float:
    """Histogram KL of 1-D samples against the quadrature reference.

    The sample histogram over [-extent, extent] gets additive smoothing of
    1/(n*bins) per bin; the reference mass per bin comes from its CDF table
    and must cover at least 1 - 1e-6 of the reference inside the extent.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 2 and samples.shape[1] == 1:
        samples = samples[:, 0]
    if samples.ndim != 1 or samples.size < 1:
        raise DimensionError("grid_kl_1d needs a non-empty 1-D sample vector")
    if not (isinstance(bins, int) and bins >= 2):
        raise ParameterError("bins must be an integer >= 2")
    if not (extent > 0.0):
        raise ParameterError("extent must be > 0")
    if np.max(np.abs(samples)) > extent:
        raise ExtentError(
            f"samples reach |x|={np.max(np.abs(samples)):g}, beyond the "
            f"extent {extent:g}")
    edges = np.linspace(-extent, extent, bins + 1)
    q = reference.bin_masses(edges)
    covered = float(np.sum(q))
    if covered < 1.0 - 1e-6:
        raise ExtentError(
            f"reference mass inside the extent is {covered:.9f} < 1 - 1e-6; "
            f"raise the extent")
    q = q / covered
    n = samples.size
    counts, _ = np.histogram(samples, bins=edges)
    p = (counts + 1.0 / bins) / (n + 1.0)
    return discrete_kl(p, q)


def excess_risk(batch, model: PotentialModel, u_star: float) -> float:
    """Mean of u over the final states of non-divergent chains, minus
    u_star.  May be slightly negative when u_star is a grid overestimate;
    no clamping."""
    finals = batch.final_states[~batch.diverged]
    if finals.shape[0] == 0:
        raise DivergenceError(batch)
    if model.u_batch is not None:
        vals = np.asarray(model.u_batch(finals), dtype=np.float64)
    else:
        vals = np.array([model.u(row) for row in finals])
    return float(np.mean(vals) - u_star)


@dataclass(frozen=True)
class ErrorCurve:
    """A (step size, error, error spread) table for one metric."""

    points: tuple                # ((lam, error, error_std), ...)
    metric: str                  # w1_1d | sliced_w2 | kl_grid | moment_gap

    def __post_init__(self):
        pts = tuple((float(l), float(e), float(s)) for l, e, s in self.points)
        lams = [p[0] for p in pts]
        if len(lams) >= 2:
            diffs = np.diff(lams)
            if not (np.all(diffs > 0) or np.all(diffs < 0)):
                raise ParameterError("step sizes must be strictly monotone")
        for lam, err, std in pts:
            if not (lam > 0 and np.isfinite(err) and err >= 0 and std >= 0):
                raise ParameterError("curve entries must be finite, errors >= 0")
        object.__setattr__(self, "points", pts)

    @property
    def lams(self):
        return np.array([p[0] for p in self.points])

    @property
    def errors(self):
        return np.array([p[1] for p in self.points])

    @property
    def stds(self):
        return np.array([p[2] for p in self.points])


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float


def fit_rate(curve: ErrorCurve) -> RateFit:
    """Ordinary least squares of log error against log step size."""
    lams = curve.lams
    errs = curve.errors
    if lams.size < 3:
        raise FitError(f"rate fitting needs at least 3 points, got {lams.size}")
    if np.any(errs <= 0.0):
        raise FitError("rate fitting needs strictly positive errors")
    x = np.log(lams)
    y = np.log(errs)
    xm = x - x.mean()
    ym = y - y.mean()
    sxx = float(xm @ xm)
    slope = float(xm @ ym) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    ss_res = float(resid @ resid)
    ss_tot = float(ym @ ym)
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RateFit(slope=slope, intercept=intercept, r2=r2)
