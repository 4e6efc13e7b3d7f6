"""Potentials with analytically known regularity constants.

Each bundled potential exposes the scalar objective u, its gradient h and
Hessian H, together with the constants (a, b, L, l, K_H, K_h) that certify

    <h(theta), theta> >= a |theta|^2 - b            (dissipativity)
    ||H(theta)||      <= K_H (1 + |theta|^l)        (Hessian growth)
    |h(theta)|        <= K_h (1 + |theta|^(l+1))    (gradient growth)

The taming, sampler and bounds modules consume these constants; they are
exact for the bundled models, not fitted.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError, EvalOverflowError, ParameterError


@dataclass(frozen=True)
class RegularityConstants:
    """Dissipativity and growth constants of a potential.

    a, b : dissipativity slope and offset
    L    : Hessian polynomial-Lipschitz factor
    l    : growth degree (integer >= 1)
    K_H  : Hessian growth factor
    K_h  : gradient growth factor
    """

    a: float
    b: float
    L: float
    l: int
    K_H: float
    K_h: float

    def __post_init__(self):
        for name in ("a", "b", "L", "K_H", "K_h"):
            v = getattr(self, name)
            if not (v > 0.0 and np.isfinite(v)):
                raise ParameterError(f"constant {name} must be finite and > 0, got {v}")
        if not (isinstance(self.l, int) and self.l >= 1):
            raise ParameterError(f"growth degree l must be an integer >= 1, got {self.l}")


@dataclass(frozen=True)
class PotentialModel:
    """A differentiable potential with declared regularity constants.

    u, grad and hessian act on a single point of shape (d,).  grad_batch,
    when present, evaluates the gradient for a whole (n, d) batch at once
    and is what the sampler's fallback path uses for non-kernel potentials.
    """

    dimension: int
    u: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    constants: RegularityConstants
    label: str
    grad_batch: Optional[Callable[[np.ndarray], np.ndarray]] = None
    u_batch: Optional[Callable[[np.ndarray], np.ndarray]] = None
    # extra scalar parameters, echoed into configs/manifests
    params: dict = field(default_factory=dict)


def _check_point(model: PotentialModel, theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (model.dimension,):
        raise DimensionError(
            f"point has shape {theta.shape}, model '{model.label}' expects "
            f"({model.dimension},)"
        )
    if not np.all(np.isfinite(theta)):
        raise ParameterError("point has non-finite coordinates")
    return theta


def eval_u(model: PotentialModel, theta) -> float:
    """Evaluate u(theta) with dimension and overflow checks."""
    theta = _check_point(model, theta)
    with np.errstate(all="ignore"):
        val = float(model.u(theta))
    if not np.isfinite(val):
        raise EvalOverflowError("u", f"at |theta|={np.linalg.norm(theta):g}")
    return val


def eval_grad(model: PotentialModel, theta) -> np.ndarray:
    """Evaluate the gradient h(theta) = grad u(theta)."""
    theta = _check_point(model, theta)
    with np.errstate(all="ignore"):
        g = np.asarray(model.grad(theta), dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise EvalOverflowError("grad", f"at |theta|={np.linalg.norm(theta):g}")
    return g


def eval_hessian(model: PotentialModel, theta) -> np.ndarray:
    """Evaluate the Hessian H(theta) = grad^2 u(theta)."""
    theta = _check_point(model, theta)
    with np.errstate(all="ignore"):
        H = np.asarray(model.hessian(theta), dtype=np.float64)
    if not np.all(np.isfinite(H)):
        raise EvalOverflowError("hessian", f"at |theta|={np.linalg.norm(theta):g}")
    return H


# ---------------------------------------------------------------------------
# double well
# ---------------------------------------------------------------------------

def make_double_well(d: int) -> PotentialModel:
    """u(theta) = |theta|^4/4 - |theta|^2/2, minimized on the sphere |theta|=1.

    Constants: a=1/2, b=9/4, L=3, l=2, K_H=3, K_h=2.
    """
    if not (isinstance(d, (int, np.integer)) and d >= 1):
        raise DimensionError(f"dimension must be an integer >= 1, got {d}")
    d = int(d)

    def u(theta):
        r2 = float(theta @ theta)
        return 0.25 * r2 * r2 - 0.5 * r2

    def grad(theta):
        r2 = float(theta @ theta)
        return theta * (r2 - 1.0)

    def hess(theta):
        r2 = float(theta @ theta)
        return (r2 - 1.0) * np.eye(d) + 2.0 * np.outer(theta, theta)

    def grad_batch(thetas):
        r2 = np.einsum("nd,nd->n", thetas, thetas)
        return thetas * (r2 - 1.0)[:, None]

    def u_batch(thetas):
        r2 = np.einsum("nd,nd->n", thetas, thetas)
        return 0.25 * r2 * r2 - 0.5 * r2

    return PotentialModel(
        dimension=d,
        u=u,
        grad=grad,
        hessian=hess,
        constants=RegularityConstants(a=0.5, b=2.25, L=3.0, l=2, K_H=3.0, K_h=2.0),
        label="double_well",
        grad_batch=grad_batch,
        u_batch=u_batch,
    )


# ---------------------------------------------------------------------------
# quadratic (exactly linear drift, used for closed-form checks)
# ---------------------------------------------------------------------------

#: strictly positive dissipativity offset for the quadratic model, where the
#: inequality holds with b = 0; kept tiny so it does not distort any bound
QUADRATIC_B = 1e-12


def make_quadratic(d: int, a: float) -> PotentialModel:
    """u(theta) = a |theta|^2 / 2 with gradient a*theta and Hessian a*I."""
    if not (isinstance(d, (int, np.integer)) and d >= 1):
        raise DimensionError(f"dimension must be an integer >= 1, got {d}")
    if not (a > 0.0 and np.isfinite(a)):
        raise ParameterError(f"quadratic coefficient must be finite and > 0, got {a}")
    d = int(d)
    a = float(a)

    return PotentialModel(
        dimension=d,
        u=lambda theta: 0.5 * a * float(theta @ theta),
        grad=lambda theta: a * theta,
        hessian=lambda theta: a * np.eye(d),
        constants=RegularityConstants(a=a, b=QUADRATIC_B, L=a, l=1, K_H=a, K_h=a),
        label="quadratic",
        grad_batch=lambda thetas: a * thetas,
        u_batch=lambda thetas: 0.5 * a * np.einsum("nd,nd->n", thetas, thetas),
        params={"quadratic_a": a},
    )


# ---------------------------------------------------------------------------
# single-hidden-layer network regression objective
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NeuralNetObjectiveSpec:
    """Regression objective for a 1-hidden-layer network with frozen input
    weights.

    The trainable parameter is theta = (W flattened, b) of dimension 2*d1:
    output weights W (1 x d1) and hidden biases b (d1,).  The input weights
    c0 (d1 x (m-1)) are fixed.  The activation is the sigmoid linear unit
    x * sigmoid(x).  The objective is the empirical mean squared error over
    the dataset plus the sextic ridge (eta/6) |theta|^6.
    """

    c0: np.ndarray          # (d1, m-1), fixed input weights, not all zero
    eta: float              # ridge strength, > 0
    inputs: np.ndarray      # (N, m-1)
    targets: np.ndarray     # (N,)

    def __post_init__(self):
        c0 = np.asarray(self.c0, dtype=np.float64)
        Z = np.asarray(self.inputs, dtype=np.float64)
        y = np.asarray(self.targets, dtype=np.float64)
        if c0.ndim != 2 or c0.shape[0] < 1 or c0.shape[1] < 1:
            raise ParameterError("c0 must be a (d1, m-1) matrix with d1, m-1 >= 1")
        if not np.any(c0 != 0.0):
            raise ParameterError("c0 must have at least one nonzero entry")
        if Z.ndim != 2 or Z.shape[0] < 1:
            raise ParameterError("dataset must contain at least one point")
        if Z.shape[1] != c0.shape[1]:
            raise DimensionError(
                f"input dimension {Z.shape[1]} does not match c0 columns {c0.shape[1]}"
            )
        if y.shape != (Z.shape[0],):
            raise DimensionError("targets must be a vector with one entry per input row")
        if not (self.eta > 0.0 and np.isfinite(self.eta)):
            raise ParameterError(f"eta must be finite and > 0, got {self.eta}")
        if not (np.all(np.isfinite(c0)) and np.all(np.isfinite(Z)) and np.all(np.isfinite(y))):
            raise ParameterError("spec arrays must be finite")
        object.__setattr__(self, "c0", c0)
        object.__setattr__(self, "inputs", Z)
        object.__setattr__(self, "targets", y)

    @property
    def hidden(self) -> int:
        return self.c0.shape[0]

    @property
    def dimension(self) -> int:
        return 2 * self.hidden


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _dataset_moments(spec: NeuralNetObjectiveSpec):
    """Empirical means of (1+|X|)^k for k=1,2,6, with X the stacked (z, y) row."""
    X = np.hstack([spec.inputs, spec.targets[:, None]])
    base = 1.0 + np.linalg.norm(X, axis=1)
    return float(np.mean(base)), float(np.mean(base ** 2)), float(np.mean(base ** 6))


def nn_regularity_constants(spec: NeuralNetObjectiveSpec) -> RegularityConstants:
    """Regularity constants of the network objective from dataset moments.

    With E_k := mean of (1+|X|)^k over the dataset and C := 1+|c0| (Frobenius
    norm of the fixed weights):

        L   = (320 d1^2 + 20 eta) E_1 C
        K_H = (256 d1^2 + 5 eta) E_2 C^2
        K_h = (48 d1 + eta) E_2 C^2
        a   = eta/2
        b   = 96 eta d1 E_2 C^2 / min(1, eta)
              + 96^3 d1^3 E_6 C^6 / min(1, eta)^2
        l   = 4
    """
    d1 = spec.hidden
    eta = spec.eta
    e1, e2, e6 = _dataset_moments(spec)
    c = 1.0 + float(np.linalg.norm(spec.c0))
    mn = min(1.0, eta)
    return RegularityConstants(
        a=eta / 2.0,
        b=96.0 * eta * d1 * e2 * c ** 2 / mn + 96.0 ** 3 * d1 ** 3 * e6 * c ** 6 / mn ** 2,
        L=(320.0 * d1 ** 2 + 20.0 * eta) * e1 * c,
        l=4,
        K_H=(256.0 * d1 ** 2 + 5.0 * eta) * e2 * c ** 2,
        K_h=(48.0 * d1 + eta) * e2 * c ** 2,
    )


def make_neural_net_objective(spec: NeuralNetObjectiveSpec) -> PotentialModel:
    """Build the network regression potential from its spec.

    All first and second partial derivatives are closed-form in terms of the
    pre-activations A = Z c0^T + b, their sigmoids, and the residuals; no
    autodiff is involved.
    """
    d1 = spec.hidden
    d = spec.dimension
    c0, Z, y, eta = spec.c0, spec.inputs, spec.targets, spec.eta
    A0 = Z @ c0.T                      # (N, d1), pre-activations at b = 0
    n_data = Z.shape[0]

    def _parts(theta):
        W = theta[:d1]
        b = theta[d1:]
        A = A0 + b[None, :]
        sig = _sigmoid(A)
        s = A * sig                    # unit activations
        phi = sig + s * (1.0 - sig)    # d(activation)/d(pre-activation)
        resid = y - s @ W
        return W, b, A, sig, s, phi, resid

    def u(theta):
        W = theta[:d1]
        b = theta[d1:]
        A = A0 + b[None, :]
        s = A * _sigmoid(A)
        resid = y - s @ W
        r2 = float(theta @ theta)
        return float(np.mean(resid ** 2) + (eta / 6.0) * r2 ** 3)

    def grad(theta):
        W, b, A, sig, s, phi, resid = _parts(theta)
        r2 = float(theta @ theta)
        quart = r2 * r2
        gW = -2.0 * (resid @ s) / n_data + eta * W * quart
        gb = W * (-2.0 * (resid @ phi) / n_data) + eta * b * quart
        return np.concatenate([gW, gb])

    def hessian(theta):
        W, b, A, sig, s, phi, resid = _parts(theta)
        r2 = float(theta @ theta)
        quart = r2 * r2
        # second derivative of the activation wrt its pre-activation
        sp = sig * (1.0 - sig)
        psi = 2.0 * sp + A * sp * (1.0 - 2.0 * sig)
        m_ss = (s.T @ s) / n_data
        m_pp = (phi.T @ phi) / n_data
        m_sp = (s.T @ phi) / n_data
        h_ww = 2.0 * m_ss + np.diag(np.full(d1, eta * quart)) \
            + 4.0 * eta * r2 * np.outer(W, W)
        h_bb = 2.0 * np.outer(W, W) * m_pp + 4.0 * eta * r2 * np.outer(b, b) \
            + np.diag(eta * quart - 2.0 * W * (resid @ psi) / n_data)
        h_wb = 2.0 * m_sp * W[None, :] + 4.0 * eta * r2 * np.outer(W, b) \
            + np.diag(-2.0 * (resid @ phi) / n_data)
        top = np.hstack([h_ww, h_wb])
        bot = np.hstack([h_wb.T, h_bb])
        return np.vstack([top, bot])

    def grad_batch(thetas):
        W = thetas[:, :d1]
        b = thetas[:, d1:]
        A = A0[None, :, :] + b[:, None, :]
        sig = _sigmoid(A)
        s = A * sig
        phi = sig + s * (1.0 - sig)
        resid = y[None, :] - np.einsum("knj,kj->kn", s, W)
        r2 = np.einsum("kd,kd->k", thetas, thetas)
        quart = (r2 * r2)[:, None]
        gW = -2.0 * np.einsum("kn,knj->kj", resid, s) / n_data + eta * W * quart
        gb = W * (-2.0 * np.einsum("kn,knj->kj", resid, phi) / n_data) + eta * b * quart
        return np.hstack([gW, gb])

    def u_batch(thetas):
        W = thetas[:, :d1]
        b = thetas[:, d1:]
        A = A0[None, :, :] + b[:, None, :]
        s = A * _sigmoid(A)
        resid = y[None, :] - np.einsum("knj,kj->kn", s, W)
        r2 = np.einsum("kd,kd->k", thetas, thetas)
        return np.mean(resid ** 2, axis=1) + (eta / 6.0) * r2 ** 3

    return PotentialModel(
        dimension=d,
        u=u,
        grad=grad,
        hessian=hessian,
        constants=nn_regularity_constants(spec),
        label="neural_net",
        grad_batch=grad_batch,
        u_batch=u_batch,
        params={"nn_hidden": d1, "nn_eta": eta},
    )


def synthetic_nn_spec(d1: int, input_dim: int, n_points: int, seed: int,
                      eta: float = 0.5) -> NeuralNetObjectiveSpec:
    """Seeded synthetic teacher-student regression dataset.

    Inputs are standard normal, targets come from a random teacher network of
    the same architecture plus noise of scale 0.1.  Deterministic in seed.
    """
    rng = np.random.default_rng(seed)
    c0 = rng.standard_normal((d1, input_dim)) / np.sqrt(input_dim)
    Z = rng.standard_normal((n_points, input_dim))
    w_true = rng.standard_normal(d1)
    b_true = 0.5 * rng.standard_normal(d1)
    A = Z @ c0.T + b_true[None, :]
    y = (A * _sigmoid(A)) @ w_true + 0.1 * rng.standard_normal(n_points)
    return NeuralNetObjectiveSpec(c0=c0, eta=eta, inputs=Z, targets=y)


# ---------------------------------------------------------------------------
# dataset files
# ---------------------------------------------------------------------------

def load_nn_dataset_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Load a regression dataset CSV with header z_1,...,z_{m-1},y."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParameterError(f"{path}: empty dataset file")
        header = [h.strip() for h in header]
        m1 = len(header) - 1
        expected = [f"z_{i}" for i in range(1, m1 + 1)] + ["y"]
        if m1 < 1 or header != expected:
            raise ParameterError(
                f"{path}: expected header z_1,...,z_{{m-1}},y, got {','.join(header)}"
            )
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise ParameterError(f"{path}: dataset has a header but no rows")
    data = np.asarray(rows, dtype=np.float64)
    if data.shape[1] != m1 + 1:
        raise ParameterError(f"{path}: ragged rows in dataset")
    return data[:, :m1], data[:, m1]


def load_matrix_csv(path) -> np.ndarray:
    """Load a headerless numeric CSV matrix (used for fixed input weights)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    if not rows:
        raise ParameterError(f"{path}: empty matrix file")
    return np.asarray(rows, dtype=np.float64)


# ---------------------------------------------------------------------------
# spectral norm by power iteration (contract method for growth checks)
# ---------------------------------------------------------------------------

def spectral_norm(mat: np.ndarray, iters: int = 50, tol: float = 1e-9,
                  seed: int = 0) -> float:
    """Spectral norm of a symmetric matrix by power iteration."""
    mat = np.asarray(mat, dtype=np.float64)
    d = mat.shape[0]
    if d == 1:
        return abs(float(mat[0, 0]))
    v = np.random.default_rng(seed).standard_normal(d)
    v /= np.linalg.norm(v)
    prev = 0.0
    val = 0.0
    for _ in range(iters):
        w = mat @ v
        val = float(np.linalg.norm(w))
        if val == 0.0:
            return 0.0
        v = w / val
        if abs(val - prev) <= tol * max(1.0, val):
            break
        prev = val
    return val
