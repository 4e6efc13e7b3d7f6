"""Multi-chain runners for the tamed (kTULA) and plain (ULA) Langevin
discretizations.

The update at inverse temperature beta and step size lam is

    theta_{n+1} = theta_n - lam * drift(theta_n) + sqrt(2 lam / beta) * xi_{n+1}

with drift either the raw gradient h (plain) or the tamed h_lam (tamed).
Chains are deterministic given (seed, chain index): chain k draws from a
Philox generator keyed by (seed, k), independent of every other chain, so a
batch is reproducible bitwise whatever the worker scheduling.
"""

from __future__ import annotations

import os
import warnings as _warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._kernels import (ALGO_KTULA, ALGO_ULA, KIND_DOUBLE_WELL, KIND_GENERIC,
                       KIND_QUADRATIC, ChainResult, chain_rng)
from .errors import ConfigurationError, DimensionError, DivergenceError, ParameterError
from .potentials import (PotentialModel, load_matrix_csv, load_nn_dataset_csv,
                         make_double_well, make_neural_net_objective,
                         make_quadratic, NeuralNetObjectiveSpec)
from .taming import TamingParams, lambda_max

POTENTIAL_LABELS = ("double_well", "quadratic", "neural_net")
ALGORITHMS = ("ktula", "ula")
INIT_KINDS = ("constant", "gaussian")


@dataclass(frozen=True)
class ChainConfig:
    """A reproducible multi-chain run specification."""

    potential: str
    d: int
    beta: float
    step_size: float
    n_steps: int
    seed: int
    eps_h: float = 0.5
    n_chains: int = 1
    burn_in: int = 0
    thinning: int = 1
    init: str = "constant"
    init_value: tuple = (0.0,)
    init_sigma: float = 1.0
    algorithm: str = "ktula"
    divergence_threshold: float = 1e12
    quadratic_a: float = 1.0
    nn_eta: float = 0.5
    nn_dataset: str = ""
    nn_c0: str = ""

    def __post_init__(self):
        if self.potential not in POTENTIAL_LABELS:
            raise ConfigurationError(
                f"unknown potential '{self.potential}', expected one of "
                f"{POTENTIAL_LABELS}")
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(
                f"unknown algorithm '{self.algorithm}', expected one of {ALGORITHMS}")
        if self.init not in INIT_KINDS:
            raise ConfigurationError(
                f"unknown init '{self.init}', expected one of {INIT_KINDS}")
        if not (isinstance(self.d, int) and self.d >= 1):
            raise ConfigurationError(f"d must be an integer >= 1, got {self.d}")
        if not (self.beta > 0.0):
            raise ConfigurationError(f"beta must be > 0, got {self.beta}")
        if not (self.step_size > 0.0 and np.isfinite(self.step_size)):
            raise ConfigurationError(f"step_size must be finite and > 0, got {self.step_size}")
        if not (0.0 < self.eps_h <= 0.5):
            raise ConfigurationError(f"eps_h must lie in (0, 1/2], got {self.eps_h}")
        if not (isinstance(self.n_steps, int) and self.n_steps >= 1):
            raise ConfigurationError(f"n_steps must be an integer >= 1, got {self.n_steps}")
        if not (isinstance(self.n_chains, int) and self.n_chains >= 1):
            raise ConfigurationError(f"n_chains must be an integer >= 1, got {self.n_chains}")
        if not (isinstance(self.burn_in, int) and 0 <= self.burn_in < self.n_steps):
            raise ConfigurationError(
                f"burn_in must be an integer in [0, n_steps), got {self.burn_in}")
        if not (isinstance(self.thinning, int) and self.thinning >= 1):
            raise ConfigurationError(f"thinning must be an integer >= 1, got {self.thinning}")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2 ** 64):
            raise ConfigurationError(f"seed must be an integer in [0, 2^64), got {self.seed}")
        if not (self.divergence_threshold > 0.0):
            raise ConfigurationError("divergence_threshold must be > 0")
        if not (self.init_sigma > 0.0):
            raise ConfigurationError("init_sigma must be > 0")
        iv = self.init_value
        if np.isscalar(iv):
            iv = (float(iv),)
        else:
            iv = tuple(float(v) for v in iv)
        if len(iv) not in (1, self.d) or not all(np.isfinite(v) for v in iv):
            raise ConfigurationError(
                "init_value must be a finite scalar or a vector of length d")
        object.__setattr__(self, "init_value", iv)

    def init_vector(self) -> np.ndarray:
        v = np.asarray(self.init_value, dtype=np.float64)
        if v.size == 1:
            return np.full(self.d, v[0])
        return v.copy()


def build_model(config: ChainConfig) -> PotentialModel:
    """Resolve the config's potential label into a model."""
    if config.potential == "double_well":
        return make_double_well(config.d)
    if config.potential == "quadratic":
        return make_quadratic(config.d, config.quadratic_a)
    if not config.nn_dataset or not config.nn_c0:
        raise ConfigurationError(
            "neural_net potential needs nn_dataset and nn_c0 file paths")
    inputs, targets = load_nn_dataset_csv(config.nn_dataset)
    c0 = load_matrix_csv(config.nn_c0)
    spec = NeuralNetObjectiveSpec(c0=c0, eta=config.nn_eta, inputs=inputs,
                                  targets=targets)
    if spec.dimension != config.d:
        raise DimensionError(
            f"config d={config.d} but the network parameter dimension is "
            f"{spec.dimension}")
    return make_neural_net_objective(spec)


@dataclass
class SampleBatch:
    """Kept samples plus running moments, divergence flags and config echo.

    samples[k] holds chain k's kept states, (n_steps - burn_in) // thinning
    of them unless the chain diverged earlier.  moment_means[k] are the
    running means of |theta|^2, |theta|^4, |theta|^6, |theta|^8 over the
    n_accumulated[k] accepted steps (divergent tail excluded).
    """

    config: ChainConfig
    samples: list
    moment_means: np.ndarray
    n_accumulated: np.ndarray
    max_running_mean_sq: np.ndarray
    diverged: np.ndarray
    first_divergent_step: np.ndarray
    final_states: np.ndarray
    warnings: tuple = ()

    @property
    def n_chains(self) -> int:
        return len(self.samples)

    @property
    def dimension(self) -> int:
        return self.final_states.shape[1]

    def pooled(self) -> np.ndarray:
        """Kept samples of all non-divergent chains, stacked in chain order."""
        parts = [s for s, dead in zip(self.samples, self.diverged) if not dead]
        if not parts:
            raise DivergenceError(self)
        return np.concatenate(parts, axis=0)


def _kind_of(model: PotentialModel):
    if model.label == "quadratic":
        return KIND_QUADRATIC, model.constants.a
    if model.label == "double_well":
        return KIND_DOUBLE_WELL, 0.0
    return KIND_GENERIC, 0.0


def _threads(n_chains: int) -> int:
    cap = os.cpu_count() or 1
    env = os.environ.get("KTULA_THREADS")
    if env:
        try:
            cap = min(cap, max(1, int(env)))
        except ValueError:
            raise ParameterError(f"KTULA_THREADS must be an integer, got {env!r}")
    return max(1, min(cap, n_chains))


def run_chains(config: ChainConfig, model: PotentialModel | None = None,
               strict: bool = False) -> SampleBatch:
    """Run the configured batch; deterministic given (seed, chain index).

    A step size above the admissible cap is recorded as a warning and the
    run proceeds (step sweeps probe beyond the cap on purpose); with
    strict=True it becomes an error.  If every chain diverges the partial
    batch is raised inside a DivergenceError.
    """
    if model is None:
        model = build_model(config)
    if model.dimension != config.d:
        raise DimensionError(
            f"config d={config.d} does not match model dimension {model.dimension}")

    warn_records = []
    cap = lambda_max(model.constants, config.eps_h)
    if config.step_size > cap:
        msg = (f"step_size {config.step_size:g} exceeds the admissible cap "
               f"{cap:g} for '{model.label}'; bounds do not apply")
        if strict:
            raise ParameterError(msg)
        _warnings.warn(msg, RuntimeWarning, stacklevel=2)
        warn_records.append(msg)

    kind, pot_a = _kind_of(model)
    algo = ALGO_KTULA if config.algorithm == "ktula" else ALGO_ULA
    sp = _kernels.make_step_params(
        kind, algo, pot_a, model.constants.a, model.constants.l,
        config.eps_h, config.step_size, config.beta, config.divergence_threshold)

    rngs = [chain_rng(config.seed, k) for k in range(config.n_chains)]
    if config.init == "constant":
        base = config.init_vector()
        inits = np.tile(base, (config.n_chains, 1))
    else:
        inits = np.stack([config.init_sigma * rng.standard_normal(config.d)
                          for rng in rngs])

    use_compiled = (kind != KIND_GENERIC and _kernels.have_compiled()
                    and not _kernels.force_fallback())
    if use_compiled:
        def one(k: int) -> ChainResult:
            return _kernels.run_chain_compiled(
                sp, inits[k], config.n_steps, config.burn_in, config.thinning,
                rngs[k])

        workers = _threads(config.n_chains)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(one, range(config.n_chains)))
        else:
            results = [one(k) for k in range(config.n_chains)]
    else:
        results = _kernels.run_chains_fallback(
            sp, model, inits, config.n_steps, config.burn_in, config.thinning,
            rngs)

    sums = np.stack([r.moment_sums for r in results])
    n_acc = np.array([r.n_acc for r in results], dtype=np.int64)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = sums / np.maximum(n_acc, 1)[:, None]
    batch = SampleBatch(
        config=config,
        samples=[r.samples for r in results],
        moment_means=means,
        n_accumulated=n_acc,
        max_running_mean_sq=np.array([r.max_running_mean_sq for r in results]),
        diverged=np.array([r.diverged for r in results], dtype=bool),
        first_divergent_step=np.array([r.first_divergent_step for r in results],
                                      dtype=np.int64),
        final_states=np.stack([r.final for r in results]),
        warnings=tuple(warn_records),
    )
    if batch.diverged.all():
        raise DivergenceError(batch)
    return batch


# ---------------------------------------------------------------------------
# single steps (reference implementations of the recursions)
# ---------------------------------------------------------------------------

def _check_step_args(model, theta, xi):
    theta = np.asarray(theta, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    if theta.shape != (model.dimension,) or xi.shape != theta.shape:
        raise DimensionError("theta and xi must both have the model's dimension")
    return theta, xi


def ktula_step(theta, model: PotentialModel, tp: TamingParams, beta: float,
               xi) -> np.ndarray:
    """One tamed update.  A non-finite result signals divergence to the
    caller instead of raising."""
    theta, xi = _check_step_args(model, theta, xi)
    if tp.a != model.constants.a or tp.l != model.constants.l:
        raise ConfigurationError("taming (a, l) must match the model constants")
    with np.errstate(all="ignore"):
        h = np.asarray(model.grad(theta), dtype=np.float64)
        r2 = float(theta @ theta)
        denom = (1.0 + tp.lam * r2 ** ((tp.l + 1) / (2.0 * tp.eps_h))) ** tp.eps_h
        drift = tp.a * theta + (h - tp.a * theta) / denom
        return theta - tp.lam * drift + np.sqrt(2.0 * tp.lam / beta) * xi


def ula_step(theta, model: PotentialModel, lam: float, beta: float, xi) -> np.ndarray:
    """One plain update with the raw gradient as drift."""
    theta, xi = _check_step_args(model, theta, xi)
    if not (lam > 0.0):
        raise ParameterError(f"step size must be > 0, got {lam}")
    with np.errstate(all="ignore"):
        h = np.asarray(model.grad(theta), dtype=np.float64)
        return theta - lam * h + np.sqrt(2.0 * lam / beta) * xi
