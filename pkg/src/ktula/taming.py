"""The taming map, its Jacobian, the admissible step-size cap, and an
executable verification suite for the taming inequalities.

For a potential with gradient h, dissipativity slope a and growth degree l,
the tamed drift at step size lam with taming exponent eps_h in (0, 1/2] is

    h_lam(theta) = a*theta + (h(theta) - a*theta)
                   / (1 + lam * |theta|^((l+1)/eps_h))^eps_h

which keeps the dissipativity of h, grows at most linearly for fixed lam,
and converges to h pointwise as lam -> 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, EvalOverflowError, ParameterError
from .potentials import PotentialModel, RegularityConstants, eval_grad, eval_hessian

# slack applied to inequality margins so rounding at exact-equality cases
# (quadratic model) cannot flip a pass into a fail
MARGIN_SLACK = 1e-9


@dataclass(frozen=True)
class TamingParams:
    """Taming configuration. a and l must equal the model's constants; the
    split and the exponents in the inequalities use the same values."""

    lam: float
    eps_h: float
    a: float
    l: int

    def __post_init__(self):
        if not (self.lam > 0.0 and np.isfinite(self.lam)):
            raise ParameterError(f"step size must be finite and > 0, got {self.lam}")
        if not (0.0 < self.eps_h <= 0.5):
            raise ParameterError(f"eps_h must lie in (0, 1/2], got {self.eps_h}")
        if not (self.a > 0.0):
            raise ParameterError(f"split constant a must be > 0, got {self.a}")
        if not (isinstance(self.l, int) and self.l >= 1):
            raise ParameterError(f"growth degree l must be an integer >= 1, got {self.l}")

    @classmethod
    def for_model(cls, model: PotentialModel, lam: float, eps_h: float) -> "TamingParams":
        return cls(lam=lam, eps_h=eps_h, a=model.constants.a, l=model.constants.l)


def _require_match(model: PotentialModel, tp: TamingParams):
    c = model.constants
    if tp.a != c.a or tp.l != c.l:
        raise ConfigurationError(
            f"taming (a={tp.a}, l={tp.l}) must equal the model constants "
            f"(a={c.a}, l={c.l}) of '{model.label}'"
        )


def _theta_power(theta_sq: float, tp: TamingParams) -> float:
    # |theta|^((l+1)/eps_h), via the squared norm; 0^positive is exactly 0
    return theta_sq ** ((tp.l + 1) / (2.0 * tp.eps_h))


def tamed_drift(model: PotentialModel, tp: TamingParams, theta) -> np.ndarray:
    """Evaluate the tamed drift h_lam at a single point."""
    _require_match(model, tp)
    h = eval_grad(model, theta)
    theta = np.asarray(theta, dtype=np.float64)
    denom = (1.0 + tp.lam * _theta_power(float(theta @ theta), tp)) ** tp.eps_h
    out = tp.a * theta + (h - tp.a * theta) / denom
    if not np.all(np.isfinite(out)):
        raise EvalOverflowError("tamed_drift", f"at |theta|={np.linalg.norm(theta):g}")
    return out


def tamed_drift_batch(model: PotentialModel, tp: TamingParams,
                      thetas: np.ndarray) -> np.ndarray:
    """Tamed drift for an (n, d) batch of points, vectorized."""
    _require_match(model, tp)
    thetas = np.asarray(thetas, dtype=np.float64)
    if model.grad_batch is not None:
        h = model.grad_batch(thetas)
    else:
        h = np.stack([model.grad(row) for row in thetas])
    r2 = np.einsum("nd,nd->n", thetas, thetas)
    denom = (1.0 + tp.lam * r2 ** ((tp.l + 1) / (2.0 * tp.eps_h))) ** tp.eps_h
    return tp.a * thetas + (h - tp.a * thetas) / denom[:, None]


def tamed_drift_jacobian(model: PotentialModel, tp: TamingParams, theta) -> np.ndarray:
    """Jacobian of the tamed drift.

    With rho = |theta|^((l+1)/eps_h):

        a*I + [ (1 + lam*rho) (H - a*I)
                - lam (l+1) |theta|^((l+1)/eps_h - 2) (h - a*theta) theta^T ]
              / (1 + lam*rho)^(1 + eps_h)

    Not symmetric in general; matches central finite differences of
    tamed_drift, which is the test contract.
    """
    _require_match(model, tp)
    H = eval_hessian(model, theta)
    h = eval_grad(model, theta)
    theta = np.asarray(theta, dtype=np.float64)
    d = theta.size
    r2 = float(theta @ theta)
    m = (tp.l + 1) / tp.eps_h
    rho = _theta_power(r2, tp)
    # |theta|^(m-2); m >= 2 because eps_h <= 1/2 and l >= 1, so the origin is regular
    pow_m2 = r2 ** ((m - 2.0) / 2.0) if r2 > 0.0 else 0.0
    eye = np.eye(d)
    outer = np.outer(h - tp.a * theta, theta)
    num = (1.0 + tp.lam * rho) * (H - tp.a * eye) - tp.lam * (tp.l + 1) * pow_m2 * outer
    jac = tp.a * eye + num / (1.0 + tp.lam * rho) ** (1.0 + tp.eps_h)
    if not np.all(np.isfinite(jac)):
        raise EvalOverflowError("tamed_drift_jacobian",
                                f"at |theta|={np.linalg.norm(theta):g}")
    return jac


# ---------------------------------------------------------------------------
# step-size cap
# ---------------------------------------------------------------------------

def drift_lipschitz_l0(rc: RegularityConstants) -> float:
    """L0 = 2a + 4 K_H + (l+1)(2 K_h + a), the lam^(-eps_h) Lipschitz factor
    of the tamed drift."""
    return 2.0 * rc.a + 4.0 * rc.K_H + (rc.l + 1) * (2.0 * rc.K_h + rc.a)


def lambda_max(rc: RegularityConstants, eps_h: float) -> float:
    """Admissible step-size cap min{1, 1/(8a), (1/(6 L0))^(1/(1-eps_h))}.

    All moment and convergence guarantees in the bounds module assume the
    step size does not exceed this value.
    """
    if not (0.0 < eps_h <= 0.5):
        raise ParameterError(f"eps_h must lie in (0, 1/2], got {eps_h}")
    l0 = drift_lipschitz_l0(rc)
    return min(1.0, 1.0 / (8.0 * rc.a), (1.0 / (6.0 * l0)) ** (1.0 / (1.0 - eps_h)))


# ---------------------------------------------------------------------------
# property verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PropertyCheck:
    name: str
    passed: bool
    worst_margin: float      # bound minus observed; negative means violated
    witness_norm: float      # |theta| at the worst margin
    n_points: int


@dataclass(frozen=True)
class TamingReport:
    checks: tuple[PropertyCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> PropertyCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def rows(self):
        for c in self.checks:
            yield (c.name, c.passed, c.worst_margin, c.witness_norm, c.n_points)


def _worst(name, margins, norms, n_points_label=None) -> PropertyCheck:
    margins = np.asarray(margins, dtype=np.float64)
    i = int(np.argmin(margins))
    worst = float(margins[i])
    return PropertyCheck(
        name=name,
        passed=bool(worst >= -MARGIN_SLACK),
        worst_margin=worst,
        witness_norm=float(norms[i]),
        n_points=int(n_points_label if n_points_label is not None else margins.size),
    )


def verify_taming_properties(model: PotentialModel, tp: TamingParams,
                             points, pair_seed: int = 0) -> TamingReport:
    """Check the taming inequalities on a point cloud.

    Per point: dissipativity <h_lam, theta> >= a|theta|^2 - b, the linear
    growth bound |h_lam| <= 2a|theta| + 2 K_h lam^(-1/2), the polynomial
    growth bound |h_lam| <= (2a + K_h)(1 + |theta|^(l+1)), and the taming
    error |h - h_lam|^2 <= 4 lam^2 (K_h+a)^2 (1 + |theta|^(2(l+1)(1+1/eps_h))).
    The lam^(-eps_h) Lipschitz bound is checked on consecutive pairs plus
    100 seeded random pairs.  Requires lam < 1.
    """
    _require_match(model, tp)
    if not (tp.lam < 1.0):
        raise ParameterError(
            f"taming property bounds require step size < 1, got {tp.lam}")
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] != model.dimension:
        raise ParameterError("points must be a non-empty (n, d) array")
    c = model.constants
    n = pts.shape[0]

    if model.grad_batch is not None:
        h = model.grad_batch(pts)
    else:
        h = np.stack([model.grad(row) for row in pts])
    r2 = np.einsum("nd,nd->n", pts, pts)
    norm = np.sqrt(r2)
    denom = (1.0 + tp.lam * r2 ** ((tp.l + 1) / (2.0 * tp.eps_h))) ** tp.eps_h
    hlam = tp.a * pts + (h - tp.a * pts) / denom[:, None]
    hlam_norm = np.linalg.norm(hlam, axis=1)

    dissip = np.einsum("nd,nd->n", hlam, pts) - (c.a * r2 - c.b)
    lin_growth = (2.0 * c.a * norm + 2.0 * c.K_h * tp.lam ** -0.5) - hlam_norm
    poly_growth = (2.0 * c.a + c.K_h) * (1.0 + norm ** (c.l + 1)) - hlam_norm
    tame_err = 4.0 * tp.lam ** 2 * (c.K_h + c.a) ** 2 \
        * (1.0 + norm ** (2.0 * (c.l + 1) * (1.0 + 1.0 / tp.eps_h))) \
        - np.einsum("nd,nd->n", h - hlam, h - hlam)

    # Lipschitz bound on pairs
    idx_a = np.arange(n - 1) if n > 1 else np.zeros(1, dtype=int)
    idx_b = idx_a + 1 if n > 1 else np.zeros(1, dtype=int)
    rng = np.random.default_rng(pair_seed)
    ra = rng.integers(0, n, size=100)
    rb = rng.integers(0, n, size=100)
    ia = np.concatenate([idx_a, ra])
    ib = np.concatenate([idx_b, rb])
    diff = np.linalg.norm(pts[ia] - pts[ib], axis=1)
    hdiff = np.linalg.norm(hlam[ia] - hlam[ib], axis=1)
    l0 = drift_lipschitz_l0(c)
    lip = l0 * tp.lam ** -tp.eps_h * diff - hdiff
    lip_norms = np.linalg.norm(pts[ia], axis=1)

    checks = (
        _worst("dissipativity", dissip, norm),
        _worst("linear_growth", lin_growth, norm),
        _worst("polynomial_growth", poly_growth, norm),
        _worst("lipschitz", lip, lip_norms, n_points_label=ia.size),
        _worst("taming_error", tame_err, norm),
    )
    return TamingReport(checks=checks)
