"""Closed-form evaluation of every constant behind the sampler's
guarantees: moment bounds, log-density gradient constants, the KL and
Wasserstein decay constants, excess-risk constants, and the (step size,
iteration count, inverse temperature) prescriptions for a target accuracy.

Everything is evaluated in 64-bit floats.  Several expressions contain
factors like 2^(6((l+1)/eps_h+l)+8) that legitimately overflow for small
eps_h; results are reported as inf/nan and collected in the report's
non_finite list rather than silently saturated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import MomentOrderError, ParameterError
from .potentials import RegularityConstants
from .taming import drift_lipschitz_l0, lambda_max

F = np.float64


def _ceil(x: float) -> int:
    # guards float noise in ceilings, e.g. 32/0.1 = 319.99999999999994
    return int(math.ceil(x - 1e-12 * max(1.0, abs(x))))


# ---------------------------------------------------------------------------
# initial-condition moment oracles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantInit:
    """Deterministic start at a fixed vector; E|theta0|^(2p) = |c|^(2p).

    A point mass has no density, hence no Fisher information; the default
    contribution to the Fisher constant is 0 and can be overridden through
    BoundInputs.j0.
    """

    norm: float

    @classmethod
    def at(cls, vector) -> "ConstantInit":
        return cls(norm=float(np.linalg.norm(np.asarray(vector, dtype=np.float64))))

    def moment(self, two_p: int) -> float:
        _check_order(two_p)
        with np.errstate(over="ignore"):
            return float(F(self.norm) ** F(two_p))

    def fisher(self) -> float:
        return 0.0


@dataclass(frozen=True)
class GaussianInit:
    """Isotropic centered Gaussian start with scale sigma in dimension d.

    E|theta0|^(2p) = sigma^(2p) * prod_{j=0}^{p-1} (d + 2j), and the Fisher
    information of the initial law is d / sigma^2.
    """

    sigma: float
    d: int

    def moment(self, two_p: int) -> float:
        _check_order(two_p)
        p = two_p // 2
        with np.errstate(over="ignore"):
            out = F(self.sigma) ** F(two_p)
            for j in range(p):
                out = out * F(self.d + 2 * j)
        return float(out)

    def fisher(self) -> float:
        return self.d / self.sigma ** 2


@dataclass(frozen=True)
class TableInit:
    """User-supplied moment table keyed by the (even) order 2p."""

    moments: dict
    fisher_information: Optional[float] = None

    def moment(self, two_p: int) -> float:
        _check_order(two_p)
        if two_p not in self.moments:
            raise MomentOrderError(two_p)
        return float(self.moments[two_p])

    def fisher(self) -> float:
        if self.fisher_information is None:
            raise ParameterError("TableInit needs fisher_information or an explicit j0")
        return self.fisher_information


def _check_order(two_p: int):
    if not (isinstance(two_p, int) and two_p >= 0 and two_p % 2 == 0):
        raise ParameterError(f"moment order must be an even integer >= 0, got {two_p}")


# ---------------------------------------------------------------------------
# inputs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundInputs:
    """Everything the constants need.

    c_ls is the log-Sobolev constant of the target (an analytic input, never
    estimated here); j0 the Fisher information of the initial law; kl0 the
    KL divergence of the initial law from the target, which enters the decay
    terms and the prescriptions.  kl0=None leaves the constants that need it
    as NaN.
    """

    rc: RegularityConstants
    d: int
    beta: float
    eps_h: float
    init: object                    # ConstantInit | GaussianInit | TableInit
    eps: float = 0.1
    c_ls: float = 1.0
    j0: Optional[float] = None
    kl0: Optional[float] = None
    delta: float = 0.01
    hessian_norm_at_zero: float = 0.0

    def __post_init__(self):
        if not (isinstance(self.d, int) and self.d >= 1):
            raise ParameterError(f"d must be an integer >= 1, got {self.d}")
        if not (self.beta > 0.0):
            raise ParameterError(f"beta must be > 0, got {self.beta}")
        if not (0.0 < self.eps_h <= 0.5):
            raise ParameterError(f"eps_h must lie in (0, 1/2], got {self.eps_h}")
        if not (self.eps > 0.0):
            raise ParameterError(f"eps must be > 0, got {self.eps}")
        if not (self.c_ls > 0.0):
            raise ParameterError(f"c_ls must be > 0, got {self.c_ls}")
        if not (self.delta > 0.0):
            raise ParameterError(f"delta must be > 0, got {self.delta}")
        if self.j0 is not None and not (self.j0 >= 0.0):
            raise ParameterError(f"j0 must be >= 0, got {self.j0}")
        if self.kl0 is not None and not (self.kl0 >= 0.0):
            raise ParameterError(f"kl0 must be >= 0, got {self.kl0}")

    def fisher(self) -> float:
        return self.j0 if self.j0 is not None else self.init.fisher()


# ---------------------------------------------------------------------------
# moment constants
# ---------------------------------------------------------------------------

def moment_constants(inputs: BoundInputs, p: int) -> float:
    """The uniform-in-time moment constants.

    p = 0 gives c0 = 2b + 8 K_h^2 + 2 d / beta (second moments); p >= 2
    gives the 2p-th moment constant c_p.  p = 1 is undefined and rejected;
    the growth degree l >= 1 guarantees nothing downstream ever needs it.
    """
    if not (isinstance(p, int) and p >= 0):
        raise ParameterError(f"p must be an integer >= 0, got {p}")
    if p == 1:
        raise ParameterError("c_1 is undefined; moment constants exist for p=0 and p>=2")
    rc, d, beta = inputs.rc, inputs.d, inputs.beta
    if p == 0:
        return float(2.0 * rc.b + 8.0 * rc.K_h ** 2 + 2.0 * d / beta)
    a, b, kh = F(rc.a), F(rc.b), F(rc.K_h)
    pf = F(p)
    with np.errstate(over="ignore"):
        base = F(1.0) + 2.0 * b + 8.0 * kh ** 2
        term1 = (1.0 + 2.0 / a) ** (pf - 1.0) * base ** pf \
            * (1.0 + F(2.0) ** (2.0 * pf - 1.0) * pf * (2.0 * pf - 1.0) * d / beta)
        term2 = F(2.0) ** (2.0 * pf - 4.0) * (2.0 * pf * (2.0 * pf - 1.0)) ** (pf + 1.0) \
            * max(F(1.0), F(d) / F(beta)) ** pf
        term3 = a * max(F(1.0), F(2.0) ** (2.0 * pf) * pf * (2.0 * pf - 1.0) * d / (a * beta)) ** pf
        return float(term1 + term2 + term3)


def second_moment_bound(inputs: BoundInputs) -> float:
    """M2 = E|theta0|^2 + c0 (1 + 1/a), the uniform bound on E|theta_n|^2."""
    c0 = moment_constants(inputs, 0)
    return float(inputs.init.moment(2) + c0 * (1.0 + 1.0 / inputs.rc.a))


def log_density_gradient_constants(inputs: BoundInputs) -> tuple[float, float]:
    """(2 beta, 2 beta sqrt(M2)), the linear growth constants of the chain's
    log-density gradient."""
    c1 = 2.0 * inputs.beta
    return float(c1), float(c1 * np.sqrt(second_moment_bound(inputs)))


# ---------------------------------------------------------------------------
# the full report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Prescription:
    mode: str
    lam: float
    n_steps: float
    exponent: float
    beta_min: Optional[float] = None


@dataclass(frozen=True)
class BoundReport:
    inputs: BoundInputs
    l0: float
    l_grad: float
    k_grad: float
    lam_max: float
    c0: float
    cp: dict                    # {p: c_p} for every order the formulas touched
    c1_tilde: float
    c2_tilde: float
    m2_bound: float
    c_psi: float
    c_j: float
    c_d_eps: float
    c_d: float
    C0: float
    C1: float
    C2: float
    C3: float
    C4: float
    C5: float
    kl: Optional[Prescription] = None
    w2: Optional[Prescription] = None
    excess_risk: Optional[Prescription] = None
    non_finite: tuple = field(default_factory=tuple)

    def rows(self):
        """(name, value) pairs in CSV order."""
        out = [
            ("L0", self.l0),
            ("L_grad_eps_h", self.l_grad),
            ("K_grad_eps_h", self.k_grad),
            ("lambda_max", self.lam_max),
            ("c0", self.c0),
        ]
        out.extend((f"c_{p}", v) for p, v in sorted(self.cp.items()))
        out.extend([
            ("c1_tilde", self.c1_tilde),
            ("c2_tilde", self.c2_tilde),
            ("M2", self.m2_bound),
            ("C_psi", self.c_psi),
            ("C_J", self.c_j),
            ("C_D_eps", self.c_d_eps),
            ("C_D", self.c_d),
            ("C0", self.C0),
            ("C1", self.C1),
            ("C2", self.C2),
            ("C3", self.C3),
            ("C4", self.C4),
            ("C5", self.C5),
        ])
        for pres, names in ((self.kl, ("lambda_kl", "n_kl")),
                            (self.w2, ("lambda_w2", "n_w2")),
                            (self.excess_risk, ("lambda_opt", "n_opt"))):
            if pres is not None:
                out.append((names[0], pres.lam))
                out.append((names[1], pres.n_steps))
        if self.excess_risk is not None and self.excess_risk.beta_min is not None:
            out.append(("beta_opt", self.excess_risk.beta_min))
        return out


def _rate_exponent(inputs: BoundInputs) -> float:
    return 2.0 - inputs.eps_h - inputs.eps * (1.0 - inputs.eps_h / 2.0)


def convergence_constants(inputs: BoundInputs) -> BoundReport:
    """Evaluate every constant the convergence statements use."""
    rc = inputs.rc
    d, beta, eps_h, eps = inputs.d, inputs.beta, inputs.eps_h, inputs.eps
    a, b, kh, kbig, lip = rc.a, rc.b, rc.K_h, rc.K_H, rc.L
    l = rc.l
    init = inputs.init

    l0 = drift_lipschitz_l0(rc)
    lam_cap = lambda_max(rc, eps_h)
    base_max = max(kbig, lip, kh, a)
    l_grad = (10.0 * np.sqrt(2.0) + 4.0 / eps_h) * (l + 1) ** 2 * base_max
    k_grad = (10.0 * np.sqrt(2.0) + 4.0 / eps_h) * (l + 1) ** 2 \
        * max(base_max, inputs.hessian_norm_at_zero, 1.0)

    c0 = moment_constants(inputs, 0)
    m2 = second_moment_bound(inputs)
    c1t, c2t = log_density_gradient_constants(inputs)

    p_psi = _ceil((l + 1) * (1.0 / eps_h + 1.0) - 2.0)
    p_d = _ceil(2.0 * ((l + 1) / eps_h + l))
    p_deps = _ceil(4.0 * ((l + 1) / eps_h + l) / eps)
    cp = {pp: moment_constants(inputs, pp)
          for pp in sorted({2, l + 1, p_psi, p_d, p_deps})}

    with np.errstate(over="ignore", invalid="ignore"):
        c_psi = float(
            F(2.0) ** (4.0 * (l + 1) * (1.0 / eps_h + 1.0) - 1.0)
            * F(d) ** 2 * F(l_grad) ** 2 * F(cp[p_psi]) * (1.0 + 1.0 / F(a))
            * (1.0 + F(init.moment(2 * p_psi))))
        c_j = float(F(inputs.fisher()) + 4.0 * F(c_psi) / F(l0) ** 2
                    + 6.0 * d * beta * l0)
        c_d_eps = float(
            F(2.0) ** (2.0 * (l + 1) * (1.0 / eps_h + 1.0) + 13.0 * eps / 4.0)
            * F(k_grad) ** 2 * F(beta) ** (eps - 2.0)
            * (1.0 + 1.0 / F(a)) ** (0.75 * eps)
            * F(cp[2]) ** (eps / 4.0) * F(cp[p_deps]) ** (eps / 4.0)
            * (1.0 + F(init.moment(max(2 * p_deps, 4)))) ** (eps / 2.0))
        c_d = float(
            F(2.0) ** (6.0 * ((l + 1) / eps_h + l) + 8.0)
            * F(k_grad) ** 2
            * max(F(l0) ** 2 * d / beta,
                  (1.0 + F(a) + F(kh)) ** 4 + 16.0 * (1.0 + F(d) / F(beta)) ** 2)
            * F(cp[p_d]) * (1.0 + 1.0 / F(a))
            * (1.0 + F(init.moment(2 * p_d))))

        big_c0 = 3.0 * inputs.c_ls / 2.0
        big_c2 = float(np.sqrt(2.0 * inputs.c_ls))
        big_c1 = float((40.0 * beta / (3.0 * inputs.c_ls))
                       * (F(c_d_eps) * F(c_j) ** (1.0 - eps / 2.0) + 2.0 * F(c_d)))
        tail = float(np.sqrt(F(init.moment(2 * l + 2))
                             + F(cp[l + 1]) * (1.0 + 1.0 / F(a)))
                     + (2.0 * (b + (d + 2.0 * l) / beta) / a) ** ((l + 1) / 2.0)
                     + 1.0)
        kl0 = inputs.kl0
        big_c3 = float(2.0 ** l * kh * big_c2 * np.sqrt(kl0) * tail) \
            if kl0 is not None else float("nan")
        big_c4 = float(big_c2 * np.sqrt(F(big_c1)) * tail)
        big_c5 = float(
            d / 2.0
            * np.log(kbig * np.e
                     * (1.0 + 4.0 * max(np.sqrt(b / a), np.sqrt(2.0 * d / (beta * kbig)))) ** l
                     / a * (beta * b / d + 1.0))
            + np.log(2.0))

    base = BoundReport(
        inputs=inputs, l0=float(l0), l_grad=float(l_grad), k_grad=float(k_grad),
        lam_max=float(lam_cap), c0=c0, cp=cp, c1_tilde=c1t, c2_tilde=c2t,
        m2_bound=m2, c_psi=c_psi, c_j=c_j, c_d_eps=c_d_eps, c_d=c_d,
        C0=big_c0, C1=big_c1, C2=big_c2, C3=big_c3, C4=big_c4, C5=big_c5,
    )
    presc = {}
    for mode in ("kl", "w2", "excess_risk"):
        try:
            presc[mode] = prescribe(inputs, mode, _report=base)
        except ParameterError:
            presc[mode] = None
    report = replace(base, kl=presc["kl"], w2=presc["w2"],
                     excess_risk=presc["excess_risk"])
    names = tuple(name for name, val in report.rows() if not np.isfinite(val))
    return replace(report, non_finite=names)


def prescribe(inputs: BoundInputs, mode: str,
              _report: Optional[BoundReport] = None) -> Prescription:
    """(step size, iteration count) guaranteeing accuracy delta in the
    chosen metric; excess_risk mode also returns the inverse-temperature
    threshold.  Needs kl0 (the decay terms start from it)."""
    if mode not in ("kl", "w2", "excess_risk"):
        raise ParameterError(f"mode must be kl, w2 or excess_risk, got {mode!r}")
    if inputs.kl0 is None:
        raise ParameterError(f"prescription mode '{mode}' requires kl0")
    kappa = _rate_exponent(inputs)
    if not (kappa > 0.0):
        raise ParameterError(
            f"rate exponent {kappa:g} is not positive; reduce eps below "
            f"{(2.0 - inputs.eps_h) / (1.0 - inputs.eps_h / 2.0):g}")
    rep = _report if _report is not None else convergence_constants(inputs)
    delta = F(inputs.delta)
    lam_cap = F(rep.lam_max)
    kl0 = F(inputs.kl0)
    rc, d = inputs.rc, inputs.d

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if mode == "kl":
            lam = min((delta / (2.0 * F(rep.C1))) ** (1.0 / kappa), lam_cap)
            n = (1.0 / F(rep.C0)) \
                * max((2.0 * F(rep.C1) / delta) ** (1.0 / kappa), 1.0 / lam_cap) \
                * np.log(2.0 * kl0 / delta)
            return Prescription(mode=mode, lam=float(lam), n_steps=float(n),
                                exponent=kappa)
        if mode == "w2":
            scale = 2.0 * F(rep.C2) * np.sqrt(F(rep.C1))
            lam = min((delta / scale) ** (2.0 / kappa), lam_cap)
            n = (2.0 / F(rep.C0)) \
                * max((scale / delta) ** (2.0 / kappa), 1.0 / lam_cap) \
                * np.log(2.0 * F(rep.C2) * np.sqrt(kl0) / delta)
            return Prescription(mode=mode, lam=float(lam), n_steps=float(n),
                                exponent=kappa)
        beta_min = max(
            F(1.0),
            9.0 * F(d) ** 2 / delta ** 2,
            (3.0 * F(d) / delta)
            * np.log(F(rc.K_H)
                     * (1.0 + 4.0 * (np.sqrt(F(rc.b) / F(rc.a))
                                     + np.sqrt(2.0 * F(d) / F(rc.K_H)))) ** rc.l
                     * (rc.b + 1.0) * (d + 1.0) / (rc.a * d))
            + 6.0 * np.log(F(2.0)) / delta)
        lam = min((delta / (3.0 * F(rep.C4))) ** (2.0 / kappa), lam_cap)
        n = (2.0 / F(rep.C0)) \
            * max((3.0 * F(rep.C4) / delta) ** (2.0 / kappa), 1.0 / lam_cap) \
            * np.log(3.0 * F(rep.C3) / delta)
        return Prescription(mode=mode, lam=float(lam), n_steps=float(n),
                            exponent=kappa, beta_min=float(beta_min))
