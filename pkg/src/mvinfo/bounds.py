"""Closed-form generalization and validation bounds with every constant exposed.

Theorem ids:

1. reconstruction gap, deterministic encoders (entropy complexity)
2. reconstruction gap, stochastic hypothesis space (MI complexity + Rényi term)
3. classification gap, deterministic encoders (conditional MI complexity)
4. classification gap, stochastic hypothesis space
5. leave-one-out validation error
6. supersample validation error
7. fast-rate classification bound (weighted and interpolating forms)
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .errors import RegimeError, ValidationError
from .estimators import InfoProfile
from .multiview import LossEnvelope

XI_FLOOR = -1e6
LAMBDA_MAX_VALIDATION = 0.1


@dataclass(frozen=True)
class BoundParams:
    n: int
    m: int
    d: int = 1
    gamma: float = 1.0
    delta: float = 0.05
    lam: float = 0.1
    beta: float | None = None
    xi: float | None = None
    sigma_u: float | None = None
    sup_loss_rms: float | None = None
    empirical_risk: float = 0.0

    def __post_init__(self):
        if self.n < 0 or self.m < 0 or self.n * self.m == 0:
            raise ValidationError(f"n*m must be positive, got n={self.n}, m={self.m}")
        if self.d < 1:
            raise ValidationError(f"d must be >= 1, got {self.d}")
        if not self.gamma > 0:
            raise ValidationError(f"gamma must be > 0, got {self.gamma}")
        if not 0 < self.delta < 1:
            raise ValidationError(f"delta must lie in (0, 1), got {self.delta}")
        if not 0 < self.lam < 1:
            raise ValidationError(f"lambda must lie in (0, 1), got {self.lam}")
        if self.beta is not None and not self.beta > 0:
            raise ValidationError(f"beta must be > 0, got {self.beta}")
        if self.xi is not None and not self.xi > 0:
            raise ValidationError(f"xi must be > 0, got {self.xi}")
        if self.sigma_u is not None and self.sigma_u < 0:
            raise ValidationError(f"sigma_u must be >= 0, got {self.sigma_u}")
        if self.sup_loss_rms is not None and self.sup_loss_rms < 0:
            raise ValidationError(f"sup_loss_rms must be >= 0, got {self.sup_loss_rms}")
        if self.empirical_risk < 0:
            raise ValidationError(f"empirical_risk must be >= 0, got {self.empirical_risk}")

    @property
    def nm(self) -> int:
        return self.n * self.m


@dataclass(frozen=True)
class BoundBreakdown:
    theorem: int
    bound: float
    constants: dict
    terms: dict
    inputs: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"theorem": self.theorem, "bound": self.bound, "constants": dict(self.constants),
                "terms": dict(self.terms), "inputs": dict(self.inputs)}

    def table(self) -> str:
        rows = [("theorem", str(self.theorem)), ("bound", f"{self.bound:.6f}")]
        rows += [(k, f"{v:.6f}") for k, v in self.constants.items()]
        rows += [(k, f"{v:.6f}") for k, v in self.terms.items()]
        w = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(w)}  {v}" for k, v in rows)


def sensitivity_term(c_phi: float, d: int, nm: int, gamma: float) -> float:
    """``c_phi * sqrt(d * log(sqrt(nm)/gamma) / 2)``."""
    arg = math.log(math.sqrt(nm) / gamma)
    if arg < 0:
        raise RegimeError(f"vacuous regime: log(sqrt(nm)/gamma) = {arg:.6g} < 0 (gamma too large for nm = {nm})")
    return c_phi * math.sqrt(d * arg / 2.0)


def xi_min(beta: float, r: float) -> float:
    """Smallest admissible weight ``log(2 - e^{2 beta r}) / (2 beta r) - 1``."""
    if not beta > 0 or not r > 0:
        raise ValidationError(f"xi_min needs beta > 0 and r > 0, got beta={beta}, r={r}")
    x = 2.0 * beta * r
    if not x < math.log(2.0):
        raise RegimeError(f"fast-rate regime requires 2*beta*R < log 2, got 2*beta*R = {x:.6g}")
    gap = -math.expm1(x)
    if gap <= -1.0:
        raise RegimeError(f"fast-rate regime boundary: 2 - e^(2*beta*R) rounds to 0 at 2*beta*R = {x!r}")
    val = math.log1p(gap) / x - 1.0
    if val < XI_FLOOR:
        raise RegimeError(f"fast-rate regime boundary: xi lower bound {val:.6g} below {XI_FLOOR:g}")
    return val


def _inputs(profile: InfoProfile, envelope: LossEnvelope, params: BoundParams, names) -> dict:
    out = {k: v for k, v in asdict(params).items() if v is not None}
    out.update({k: getattr(profile, k) for k in names})
    out.update(asdict(envelope))
    return out


def _y_card(profile: InfoProfile) -> int:
    return int(profile.y_card)


def evaluate_bound(theorem: int, profile: InfoProfile, envelope: LossEnvelope,
                   params: BoundParams) -> BoundBreakdown:
    """Bound on the reconstruction (1, 2) or classification (3, 4, 7) gap."""
    nm, lam, dl = params.nm, params.lam, params.delta
    rt = math.sqrt(nm)
    q = nm ** 0.25
    if theorem == 1:
        need = ("h_c", "h_u_sum", "c_phi")
        profile.require(*need)
        k1 = 2 * math.sqrt(2) * envelope.r_x
        k2 = sensitivity_term(profile.c_phi, params.d, nm, params.gamma) + math.log(2 / dl)
        k3 = params.gamma * envelope.r_x + envelope.rs_x * math.sqrt(params.gamma) / q * math.sqrt(2 * math.log(2 / dl))
        info = profile.h_c + profile.h_u_sum
        consts = {"K1": k1, "K2": k2, "K3": k3}
    elif theorem == 2:
        need = ("mi_common_sum", "mi_unique_sum", "renyi_phi", "c_phi", "h_c_given_x", "h_u_given_x_sum")
        profile.require(*need)
        k1 = 2 * math.sqrt(2) * envelope.r_x
        tail = math.log(1 / dl) / lam + math.log(4 / dl)
        k2 = (sensitivity_term(profile.c_phi, params.d, nm, params.gamma) + tail
              + profile.h_c_given_x + profile.h_u_given_x_sum)
        k3 = params.gamma * envelope.r_x + math.sqrt(2) * envelope.rs_x * math.sqrt(params.gamma) / q * math.sqrt(
            profile.renyi_phi + tail)
        info = profile.mi_common_sum + profile.mi_unique_sum + profile.renyi_phi
        consts = {"K1": k1, "K2_lambda": k2, "K3_phi": k3}
    elif theorem == 3:
        need = ("cmi_sum", "c_phi", "h_z_given_y_x1", "y_card")
        profile.require(*need)
        yc = _y_card(profile)
        k1 = 2 * math.sqrt(2) * envelope.r_xy * math.sqrt(yc)
        k2 = (sensitivity_term(profile.c_phi, params.d, nm, params.gamma) + math.log(2 * yc / dl)
              + profile.h_z_given_y_x1)
        k3 = params.gamma * envelope.r_xy + envelope.rs_xy * math.sqrt(params.gamma * yc) / q * math.sqrt(
            2 * math.log(2 * yc / dl))
        info = profile.cmi_sum
        consts = {"K1_tilde": k1, "K2_tilde": k2, "K3_tilde": k3}
    elif theorem == 4:
        need = ("cmi_sum", "renyi_phi", "c_phi", "h_z_given_y_x1", "y_card")
        profile.require(*need)
        yc = _y_card(profile)
        k1 = 2 * math.sqrt(2) * envelope.r_xy * math.sqrt(yc)
        tail = math.log(1 / dl) / lam + math.log(4 * yc / dl)
        k2 = sensitivity_term(profile.c_phi, params.d, nm, params.gamma) + tail + profile.h_z_given_y_x1
        k3 = params.gamma * envelope.r_xy + math.sqrt(2) * envelope.rs_xy * math.sqrt(params.gamma * yc) / q * math.sqrt(
            profile.renyi_phi + tail)
        info = profile.cmi_sum + profile.renyi_phi
        consts = {"K1_tilde": k1, "K2_tilde_lambda": k2, "K3_tilde_phi": k3}
    elif theorem == 7:
        return _fast_rate(profile, envelope, params)
    elif theorem in (5, 6):
        raise ValidationError("theorems 5 and 6 bound validation errors; use evaluate_validation_bound")
    else:
        raise ValidationError(f"unknown theorem {theorem!r}; expected one of 1, 2, 3, 4, 7")
    k1, k2, k3 = consts.values()
    sqrt_term = k1 * math.sqrt((info + k2) / nm)
    add_term = k3 / rt
    terms = {"info": info, "sqrt_term": sqrt_term, "additive_term": add_term}
    return BoundBreakdown(theorem, sqrt_term + add_term, consts, terms, _inputs(profile, envelope, params, need))


def _fast_rate(profile: InfoProfile, envelope: LossEnvelope, params: BoundParams) -> BoundBreakdown:
    need = ("cmi_sum", "renyi_phi", "c_phi", "h_z_given_y_x1", "y_card")
    profile.require(*need)
    if params.beta is None:
        raise ValidationError("theorem 7 needs params.beta")
    beta, r = params.beta, envelope.rs_xy
    if not 2 * beta * r < math.log(2.0):
        raise RegimeError(f"fast-rate regime requires 2*beta*R < log 2, got 2*beta*R = {2 * beta * r:.6g}")
    # at r = 0 the lower bound is its limit log(1)/0 - 1 -> -2
    lo = xi_min(beta, r) if r > 0 else -2.0
    lhat = params.empirical_risk
    if lhat > 0 and params.xi is None:
        raise ValidationError("theorem 7 weighted form needs params.xi when empirical_risk > 0")
    xi = params.xi if params.xi is not None else 0.0
    if params.xi is not None and xi < lo:
        raise RegimeError(f"xi = {xi} is below the admissible lower bound {lo:.6g}")
    yc = _y_card(profile)
    khat = (sensitivity_term(profile.c_phi, params.d, params.nm, params.gamma) + math.log(1 / params.delta) / params.lam
            + math.log(4 * yc / params.delta) + profile.h_z_given_y_x1)
    info = profile.cmi_sum + profile.renyi_phi
    rate = (info + khat) / (params.nm * beta)
    weighted = xi * lhat
    consts = {"K_hat": khat, "xi_min": lo, "xi": xi, "beta": beta}
    terms = {"info": info, "fast_rate_term": rate, "weighted_term": weighted}
    return BoundBreakdown(7, weighted + rate, consts, terms, _inputs(profile, envelope, params, need))


def evaluate_validation_bound(theorem: int, profile: InfoProfile, envelope: LossEnvelope,
                              params: BoundParams) -> BoundBreakdown:
    """Bound on the LOO (5) or supersample (6) validation error.

    Both assume lambda -> 0; lambda above 0.1 is rejected. Theorem 5 carries
    no 1/sqrt(nm) factor.
    """
    if params.lam > LAMBDA_MAX_VALIDATION:
        raise ValidationError(f"theorems 5 and 6 assume lambda -> 0; lambda = {params.lam} exceeds "
                              f"{LAMBDA_MAX_VALIDATION}")
    nm, dl, lam = params.nm, params.delta, params.lam
    if theorem == 5:
        need = ("cmi_sum", "mi_phi_u", "c_phi", "h_z_given_y_x1", "h_phi_given_u", "y_card")
        profile.require(*need)
        yc = _y_card(profile)
        sigma = envelope.rs_xy if params.sigma_u is None else params.sigma_u
        if sigma > envelope.rs_xy + 1e-12:
            raise ValidationError(f"sigma_u = {sigma} exceeds the samplewise envelope R^s_xy = {envelope.rs_xy}")
        k1 = math.sqrt(2) * sigma
        k2 = (sensitivity_term(profile.c_phi, params.d, nm, params.gamma) + math.log(1 / dl) / lam
              + math.log(4 * yc / dl) + profile.h_z_given_y_x1 + profile.h_phi_given_u)
        info = profile.cmi_sum + profile.mi_phi_u
        sqrt_term = k1 * math.sqrt(info + k2)
        consts = {"Ku1": k1, "Ku2_lambda": k2, "sigma_u": sigma}
    elif theorem == 6:
        need = ("cmi_sum", "mi_phi_usup", "c_phi", "h_z_given_y_x1", "h_phi_given_usup", "y_card")
        profile.require(*need)
        if params.sup_loss_rms is None:
            raise ValidationError("theorem 6 needs params.sup_loss_rms")
        yc = _y_card(profile)
        k1 = math.sqrt(2) * params.sup_loss_rms
        k2 = (sensitivity_term(profile.c_phi, params.d, nm, params.gamma) + math.log(1 / dl) / lam
              + math.log(4 * yc / dl) + profile.h_z_given_y_x1 + profile.h_phi_given_usup)
        info = profile.cmi_sum + profile.mi_phi_usup
        sqrt_term = k1 * math.sqrt((info + k2) / nm)
        consts = {"Kut1": k1, "Kut2_lambda": k2}
    else:
        raise ValidationError(f"unknown validation theorem {theorem!r}; expected 5 or 6")
    terms = {"info": info, "sqrt_term": sqrt_term}
    return BoundBreakdown(theorem, sqrt_term, consts, terms, _inputs(profile, envelope, params, need))


def reconstruct_bound(bd: BoundBreakdown) -> float:
    """Recompute the bound from the emitted constants and the information sum."""
    c, t, nm = bd.constants, bd.terms, bd.inputs["n"] * bd.inputs["m"]
    info = t["info"]
    if bd.theorem in (1, 2, 3, 4):
        k1, k2, k3 = list(c.values())[:3]
        return k1 * math.sqrt((info + k2) / nm) + k3 / math.sqrt(nm)
    if bd.theorem == 5:
        return c["Ku1"] * math.sqrt(info + c["Ku2_lambda"])
    if bd.theorem == 6:
        return c["Kut1"] * math.sqrt((info + c["Kut2_lambda"]) / nm)
    if bd.theorem == 7:
        return c["xi"] * bd.inputs["empirical_risk"] + (info + c["K_hat"]) / (nm * c["beta"])
    raise ValidationError(f"unknown theorem {bd.theorem}")


def evaluate(theorem: int, profile: InfoProfile, envelope: LossEnvelope, params: BoundParams) -> BoundBreakdown:
    if theorem in (5, 6):
        return evaluate_validation_bound(theorem, profile, envelope, params)
    return evaluate_bound(theorem, profile, envelope, params)
