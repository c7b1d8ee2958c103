"""Quadratic energy certificates for boundedness of the cross-diffusion system.

The certificate is a strictly convex quadratic density

    H(u, v) = (lam/2) u^2 + u v + (mu/2) v^2,     lam * mu = K^2,  K > 1,

whose gradient flux, contracted against the diffusion matrix, splits into
three quadratic forms in (grad u, grad v): a u-weighted form, a v-weighted
form, and a constant-diffusion form.  Negativity of the form discriminants
(delta_u, delta_v) certifies pointwise dissipation of H along the flow; the
admissible (lam, mu) windows shrink as K -> 1 and open up under the
cross-product condition cond_1_7.  The reaction side is handled separately by
a sampled sign check of H_u*f + H_v*g on superlevel sets of H.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .model import ModelParams, flux_coeffs, reactions

__all__ = [
    "LyapunovCert",
    "PreconditionError",
    "SignReport",
    "eval_H",
    "discriminants",
    "window_bounds",
    "certificate_for",
    "find_certificate",
    "eval_psi_forms",
    "form_coefficients",
    "phi_coefficients",
    "phi_cubic",
    "check_reaction_sign",
    "eval_L",
    "min_transport_quotient",
]


class PreconditionError(ValueError):
    """A certificate search precondition failed (reported distinctly)."""


@dataclass(frozen=True)
class LyapunovCert:
    """Certificate weights and their diagnostic discriminants.

    lam and mu are the u^2 and v^2 weights of H (JSON keys "lambda"/"mu"),
    K the coupling constant with lam*mu = K^2.  window_lambda_hi/window_mu_hi
    are the admissibility upper bounds at this K (inf when the corresponding
    cross-diffusion weight vanishes).
    """

    lam: float
    mu: float
    K: float
    delta_u: float = 0.0
    delta_v: float = 0.0
    delta_d: float = 0.0
    window_lambda_hi: float = math.inf
    window_mu_hi: float = math.inf
    feasible: bool = False

    def validate(self) -> "LyapunovCert":
        if not (self.lam > 0 and self.mu > 0):
            raise ValueError(f"weights must be positive, got lam={self.lam}, mu={self.mu}")
        if not self.K > 1:
            raise ValueError(f"K must exceed 1, got {self.K}")
        if abs(self.lam * self.mu - self.K**2) > 1e-12 * self.K**2:
            raise ValueError("lam * mu must equal K^2")
        return self

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "mu": self.mu,
            "K": self.K,
            "delta_u": self.delta_u,
            "delta_v": self.delta_v,
            "delta_d": self.delta_d,
            "feasible": self.feasible,
        }


class HDerivatives(NamedTuple):
    H: object
    Hu: object
    Hv: object
    Huu: float
    Huv: float
    Hvv: float


def eval_H(cert: LyapunovCert, u, v) -> HDerivatives:
    """H and its first/second partials at (u, v); broadcasts over arrays."""
    H = 0.5 * cert.lam * u * u + u * v + 0.5 * cert.mu * v * v
    return HDerivatives(H, cert.lam * u + v, u + cert.mu * v, cert.lam, 1.0, cert.mu)


def discriminants(p: ModelParams, cert: LyapunovCert):
    """Discriminant values of the three gradient quadratic forms."""
    eps = cert.K**2 - 1.0
    delta_u = (p.b11 * cert.lam - p.alpha11 + p.alpha21) ** 2 \
        - 4.0 * p.alpha11 * p.alpha21 * eps
    delta_v = (cert.mu * p.b22 - p.alpha22 + p.alpha12) ** 2 \
        - 4.0 * p.alpha12 * p.alpha22 * eps
    delta_d = (p.d1 + p.d2) ** 2 - 4.0 * cert.K**2 * p.d1 * p.d2
    return delta_u, delta_v, delta_d


def window_bounds(p: ModelParams, ksq: float):
    """Admissibility upper bounds for (lam, mu) at coupling K^2 = ksq.

    A vanishing cross-diffusion weight leaves the corresponding window
    unbounded (+inf).
    """
    eps = ksq - 1.0
    num_l = (p.alpha11 - p.alpha21) + 2.0 * math.sqrt(max(p.alpha11 * p.alpha21 * eps, 0.0))
    num_m = (p.alpha22 - p.alpha12) + 2.0 * math.sqrt(max(p.alpha12 * p.alpha22 * eps, 0.0))
    hi_l = num_l / p.b11 if p.b11 > 0 else math.inf
    hi_m = num_m / p.b22 if p.b22 > 0 else math.inf
    return hi_l, hi_m


def certificate_for(p: ModelParams, lam: float, mu: float) -> LyapunovCert:
    """Assemble a certificate from explicit weights (no search)."""
    K = math.sqrt(lam * mu)
    hi_l, hi_m = window_bounds(p, lam * mu)
    cert = LyapunovCert(lam, mu, K, window_lambda_hi=hi_l, window_mu_hi=hi_m)
    du, dv, dd = discriminants(p, cert)
    return LyapunovCert(lam, mu, K, du, dv, dd, hi_l, hi_m,
                        feasible=(K > 1 and du < 0 and dv < 0))


def _neg_band(diff: float, prod: float, b: float, eps: float):
    """Open interval of weights with negative discriminant, or None.

    The discriminant (b*w - diff)^2 - 4*prod*eps is negative on
    ((diff - 2*sqrt(prod*eps))/b, (diff + 2*sqrt(prod*eps))/b); with b = 0 the
    weight drops out and the sign is fixed by diff^2 vs 4*prod*eps.
    """
    s = math.sqrt(max(prod * eps, 0.0))
    if b > 0:
        if s == 0.0:
            return None
        return (max((diff - 2.0 * s) / b, 0.0), (diff + 2.0 * s) / b)
    return (0.0, math.inf) if diff * diff < 4.0 * prod * eps else None


def _pick_weight(lo: float, hi: float, K: float) -> float:
    """A weight strictly inside (lo, hi), biased toward the geometric mean.

    Finite two-sided windows use the geometric mean clipped 10% inside each
    bound; half-open windows fall back to K (the balanced choice lam = mu).
    """
    if lo == 0.0 and hi == math.inf:
        return K
    if hi == math.inf:
        return max(K, lo / 0.81)
    if lo == 0.0:
        return min(K, 0.9 * hi)
    mid = math.sqrt(lo * hi)
    clip_lo, clip_hi = lo / 0.9, 0.9 * hi
    if clip_lo <= clip_hi:
        mid = min(max(mid, clip_lo), clip_hi)
    return mid


def _try_certificate(p: ModelParams, ksq: float, require_negative: bool) -> Optional[LyapunovCert]:
    """Certificate at fixed K^2, or None when no admissible weight exists."""
    eps = ksq - 1.0
    K = math.sqrt(ksq)
    hi_l, hi_m = window_bounds(p, ksq)

    if require_negative:
        band_l = _neg_band(p.alpha11 - p.alpha21, p.alpha11 * p.alpha21, p.b11, eps)
        band_m = _neg_band(p.alpha22 - p.alpha12, p.alpha12 * p.alpha22, p.b22, eps)
        if band_l is None or band_m is None:
            return None
    else:
        band_l = (0.0, hi_l)
        band_m = (0.0, hi_m)

    # Couple the mu band back into lam through lam * mu = K^2.
    lam_lo = max(band_l[0], ksq / band_m[1] if band_m[1] < math.inf else 0.0)
    lam_hi = min(band_l[1], ksq / band_m[0] if band_m[0] > 0.0 else math.inf)
    if not lam_lo < lam_hi:
        return None

    for lam in (_pick_weight(lam_lo, lam_hi, K),
                math.sqrt(lam_lo * lam_hi) if lam_hi < math.inf else K,
                0.5 * (lam_lo + min(lam_hi, 4.0 * max(lam_lo, K)))):
        if not (lam_lo < lam < lam_hi and lam > 0):
            continue
        mu = ksq / lam
        cert = LyapunovCert(lam, mu, K, window_lambda_hi=hi_l, window_mu_hi=hi_m)
        du, dv, dd = discriminants(p, cert)
        if require_negative and not (du < 0 and dv < 0):
            continue
        return LyapunovCert(lam, mu, K, du, dv, dd, hi_l, hi_m, feasible=True)
    return None


def find_certificate(p: ModelParams, k_max: float = 2.0, grid_size: int = 41) -> Optional[LyapunovCert]:
    """Search for certificate weights over K in (1, k_max].

    Success is decided by the K -> 1 limit of the admissibility windows: their
    product exceeds K^2 in the limit exactly when cond_1_7 holds (vanishing
    cross-diffusion weights leave the product unbounded, hence always
    feasible).  On success the search walks a geometric K grid refining toward
    1 and returns the largest K carrying weights with negative discriminants;
    parameter corners where the discriminant bands cannot meet lam * mu = K^2
    below k_max fall back to the window-consistent weight choice.
    """
    if not k_max > 1:
        raise ValueError(f"k_max must exceed 1, got {k_max}")
    if not p.alpha11 > p.alpha21:
        raise PreconditionError(
            f"certificate search requires alpha11 > alpha21 (got {p.alpha11} <= {p.alpha21})"
        )
    if not p.alpha22 > p.alpha12:
        raise PreconditionError(
            f"certificate search requires alpha22 > alpha12 (got {p.alpha22} <= {p.alpha12})"
        )

    if p.b11 > 0 and p.b22 > 0:
        gate = (p.alpha11 - p.alpha21) * (p.alpha22 - p.alpha12) > p.b11 * p.b22
    else:
        gate = True
    if not gate:
        return None

    span = k_max**2 - 1.0
    grid = [1.0 + 10.0 ** (-k) * span for k in range(grid_size)]
    grid = [ksq for ksq in grid if ksq > 1.0]

    for ksq in grid:
        cert = _try_certificate(p, ksq, require_negative=True)
        if cert is not None:
            return cert

    # Denser sweep between the geometric grid points before giving up on
    # negative discriminants.
    for eps in np.geomspace(span, 1e-15, 400):
        cert = _try_certificate(p, 1.0 + eps, require_negative=True)
        if cert is not None:
            return cert

    for ksq in grid:
        cert = _try_certificate(p, ksq, require_negative=False)
        if cert is not None:
            return cert
    return None


class PsiForms(NamedTuple):
    psi_u: object
    psi_v: object
    psi_d: object
    psi: object


def form_coefficients(p: ModelParams, cert: LyapunovCert):
    """(A, B, C) of the three gradient quadratic forms A|gu|^2 + B gu.gv + C|gv|^2."""
    lam, mu = cert.lam, cert.mu
    coeff_u = (p.alpha11 * lam,
               p.b11 * lam + (p.alpha11 + p.alpha21),
               p.b11 + p.alpha21 * mu)
    coeff_v = (p.alpha12 * lam + p.b22,
               (p.alpha12 + p.alpha22) + p.b22 * mu,
               p.alpha22 * mu)
    coeff_d = (p.d1 * lam, p.d1 + p.d2, p.d2 * mu)
    return {"u": coeff_u, "v": coeff_v, "d": coeff_d}


def eval_psi_forms(p: ModelParams, cert: LyapunovCert, u, v, gu, gv) -> PsiForms:
    """The three gradient quadratic forms and their density-weighted total.

    gu, gv are gradient vectors with the component axis last.  The total form
    psi is evaluated independently through the flux coefficients (flux dotted
    against the gradients of H_u and H_v), so the decomposition
    psi == u*psi_u + v*psi_v + psi_d is a nontrivial identity, not a tautology.
    """
    gu = np.asarray(gu, dtype=float)
    gv = np.asarray(gv, dtype=float)
    g2u = np.sum(gu * gu, axis=-1)
    guv = np.sum(gu * gv, axis=-1)
    g2v = np.sum(gv * gv, axis=-1)

    coeff = form_coefficients(p, cert)
    au, bu, cu = coeff["u"]
    av, bv, cv = coeff["v"]
    ad, bd, cd = coeff["d"]
    psi_u = au * g2u + bu * guv + cu * g2v
    psi_v = av * g2u + bv * guv + cv * g2v
    psi_d = ad * g2u + bd * guv + cd * g2v

    fc = flux_coeffs(p, u, v)
    flux_u = np.asarray(fc.Pu)[..., None] * gu + np.asarray(fc.Pv)[..., None] * gv
    flux_v = np.asarray(fc.Qu)[..., None] * gu + np.asarray(fc.Qv)[..., None] * gv
    grad_Hu = cert.lam * gu + gv
    grad_Hv = gu + cert.mu * gv
    psi = np.sum(flux_u * grad_Hu + flux_v * grad_Hv, axis=-1)
    return PsiForms(psi_u, psi_v, psi_d, psi)


def phi_coefficients(p: ModelParams, cert: LyapunovCert):
    """Coefficients (u^3, u^2 v, u v^2, v^3) of the cubic reaction budget."""
    return (
        cert.lam * p.b1,
        -cert.lam * p.c1 + p.b1 - p.b2,
        -p.c1 + p.c2 - cert.mu * p.b2,
        cert.mu * p.c2,
    )


def phi_cubic(p: ModelParams, cert: LyapunovCert, u, v):
    """The cubic form whose positivity makes H_u*f + H_v*g eventually negative."""
    c3, c2u, c2v, c0 = phi_coefficients(p, cert)
    return c3 * u**3 + c2u * u**2 * v + c2v * u * v**2 + c0 * v**3


@dataclass(frozen=True)
class SignReport:
    """Sampled sign check of H_u*f + H_v*g on a superlevel set of H."""

    level: float
    n_samples: int
    n_evaluated: int
    violation_fraction: float
    max_violation: float
    phi_coeffs: tuple
    seed: int

    def to_dict(self) -> dict:
        return {
            "phi_coeffs": list(self.phi_coeffs),
            "violation_fraction": self.violation_fraction,
            "max_violation": self.max_violation,
            "level": self.level,
            "n_samples": self.n_samples,
            "n_evaluated": self.n_evaluated,
            "seed": self.seed,
        }


def check_reaction_sign(p: ModelParams, cert: LyapunovCert, level: float,
                        samples: int = 10_000, seed: int = 0) -> SignReport:
    """Sample H_u*f + H_v*g over {H > level} in the positive quadrant.

    Points are log-spaced over [1e-3, 1e3]^2; points below the level are
    excluded from the statistics.  This is a report, not a gate: violations
    are counted and the worst positive value recorded.
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    rng = np.random.default_rng(seed)
    u = 10.0 ** rng.uniform(-3.0, 3.0, size=samples)
    v = 10.0 ** rng.uniform(-3.0, 3.0, size=samples)
    H, Hu, Hv, _, _, _ = eval_H(cert, u, v)
    mask = H > level
    n_eval = int(np.count_nonzero(mask))
    if n_eval == 0:
        return SignReport(level, samples, 0, 0.0, 0.0, phi_coefficients(p, cert), seed)
    f, g = reactions(p, u[mask], v[mask])
    value = Hu[mask] * f + Hv[mask] * g
    violating = value > 0.0
    n_bad = int(np.count_nonzero(violating))
    worst = float(value[violating].max()) if n_bad else 0.0
    return SignReport(
        level=level,
        n_samples=samples,
        n_evaluated=n_eval,
        violation_fraction=n_bad / n_eval,
        max_violation=worst,
        phi_coeffs=phi_coefficients(p, cert),
        seed=seed,
    )


def eval_L(cert: LyapunovCert, field_u: np.ndarray, field_v: np.ndarray,
           level: float, cell_area: float) -> float:
    """Midpoint-rule value of (1/2) * integral of [(H - level)_+]^2."""
    field_u = np.asarray(field_u, dtype=float)
    field_v = np.asarray(field_v, dtype=float)
    if field_u.shape != field_v.shape:
        raise ValueError(f"field shapes differ: {field_u.shape} vs {field_v.shape}")
    if not cell_area > 0:
        raise ValueError(f"cell_area must be > 0, got {cell_area}")
    H = eval_H(cert, field_u, field_v).H
    excess = np.maximum(H - level, 0.0)
    return float(0.5 * np.sum(excess * excess) * cell_area)


def min_transport_quotient(p: ModelParams, cert: LyapunovCert,
                           samples: int = 4096, seed: int = 0) -> float:
    """Empirical minimum of (Hu*P + Hv*Q) . grad(H) / |grad(H)|^2.

    P and Q are the two species' diffusion fluxes.  The quotient's infimum is
    the coercivity constant that the dissipation argument needs; it is only
    reported, never asserted.
    """
    rng = np.random.default_rng(seed)
    u = 10.0 ** rng.uniform(-3.0, 3.0, size=samples)
    v = 10.0 ** rng.uniform(-3.0, 3.0, size=samples)
    g = rng.normal(size=(samples, 4))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    gu, gv = g[:, :2], g[:, 2:]

    _, Hu, Hv, _, _, _ = eval_H(cert, u, v)
    fc = flux_coeffs(p, u, v)
    flux_u = fc.Pu[..., None] * gu + fc.Pv[..., None] * gv
    flux_v = fc.Qu[..., None] * gu + fc.Qv[..., None] * gv
    grad_H = Hu[..., None] * gu + Hv[..., None] * gv
    numer = np.sum((Hu[..., None] * flux_u + Hv[..., None] * flux_v) * grad_H, axis=-1)
    denom = np.sum(grad_H * grad_H, axis=-1)
    ok = denom > 1e-30
    return float(np.min(numer[ok] / denom[ok]))
