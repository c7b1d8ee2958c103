"""Projection of the cross-diffusion system onto the cosine basis.

The weak form against a test mode phi is

    <du/dt, phi> = -<P, grad phi> + <f, phi>,       P = Pu grad u + Pv grad v,

with the boundary term dropped by the zero-flux condition.  Expanding u, v in
the basis turns each quadratic term into a triple-product contraction: the
flux terms hit stiff3 (coefficient mode, differentiated mode, test mode) and
the reaction quadratics hit mass3.  The linear diffusion part is diagonal
with eigenvalues j^2 + k^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams, flux_coeffs, reactions
from .spectral import (
    Basis,
    SpectralState,
    TripleTensors,
    analyze,
    cached_tensors,
    laplacian_eigenvalues,
    midpoint_nodes,
    synthesize,
)

__all__ = [
    "RhsAssembler",
    "ProjectionReport",
    "rhs",
    "rhs_oracle",
    "project_initial",
    "ic_field",
    "ic_coefficients",
]


class RhsAssembler:
    """Binds parameters to the triple-product tensors of one truncation order.

    The per-species contraction fuses the three flux terms (and the two
    reaction quadratics) into a single gather + bincount pass over the shared
    sparsity pattern; summation order within each test mode is fixed by the
    coalesced COO layout, so results are deterministic.
    """

    def __init__(self, params: ModelParams, tensors: TripleTensors):
        params.validate()
        self.params = params
        self.tensors = tensors
        self.n = tensors.n
        self._eig = laplacian_eigenvalues(self.n)

    @classmethod
    def for_order(cls, params: ModelParams, n: int) -> "RhsAssembler":
        return cls(params, cached_tensors(n))

    def rhs_flat(self, y: np.ndarray) -> np.ndarray:
        """Derivative of the packed coefficient vector [mu1.ravel(), mu2.ravel()]."""
        p = self.params
        T = self.tensors
        m = T.modes
        x1, x2 = y[:m], y[m:]

        x1a, x1c = x1[T.s_ia], x1[T.s_ic]
        x2a, x2c = x2[T.s_ia], x2[T.s_ic]
        w1 = T.s_val * ((p.alpha11 * x1a + p.alpha12 * x2a) * x1c + p.b11 * x1a * x2c)
        w2 = T.s_val * ((p.alpha21 * x1a + p.alpha22 * x2a) * x2c + p.b22 * x2a * x1c)
        flux1 = np.bincount(T.s_it, weights=w1, minlength=m)
        flux2 = np.bincount(T.s_it, weights=w2, minlength=m)

        y1a, y1c = x1[T.m_ia], x1[T.m_ic]
        y2a, y2c = x2[T.m_ia], x2[T.m_ic]
        q1 = T.m_val * (y1a * (p.b1 * y1c - p.c1 * y2c))
        q2 = T.m_val * (y2a * (p.c2 * y2c - p.b2 * y1c))
        react1 = np.bincount(T.m_it, weights=q1, minlength=m)
        react2 = np.bincount(T.m_it, weights=q2, minlength=m)

        d1 = (p.a1 - p.d1 * self._eig) * x1 - flux1 - react1
        d2 = (p.a2 - p.d2 * self._eig) * x2 - flux2 - react2
        return np.concatenate([d1, d2])

    def rhs(self, state: SpectralState):
        if state.n != self.n:
            raise ValueError(f"state order {state.n} does not match assembler order {self.n}")
        width = self.n + 1
        dy = self.rhs_flat(np.concatenate([state.mu1.ravel(), state.mu2.ravel()]))
        m = width * width
        return dy[:m].reshape(width, width), dy[m:].reshape(width, width)


def rhs(assembler: RhsAssembler, state: SpectralState):
    """Coefficient derivatives (dmu1, dmu2) for both species."""
    return assembler.rhs(state)


def rhs_oracle(params: ModelParams, state: SpectralState, resolution: int):
    """Grid-quadrature evaluation of the weak form, independent of the tensors.

    Synthesizes fields and gradients on the midpoint grid, builds the fluxes
    pointwise, and projects -P.grad(phi) + f*phi mode by mode.  The midpoint
    rule is exact for the band-limited integrands once resolution >= 4(n+1),
    so this matches rhs to roundoff.
    """
    n = state.n
    if resolution < 4 * (n + 1):
        raise ValueError(f"oracle resolution {resolution} below 4(n+1) = {4 * (n + 1)}")
    p = params
    basis = Basis(n)
    nodes = midpoint_nodes(resolution)
    C = basis.cos_table(nodes)
    D = basis.dcos_table(nodes)

    u = C.T @ state.mu1 @ C
    v = C.T @ state.mu2 @ C
    ux = D.T @ state.mu1 @ C
    uy = C.T @ state.mu1 @ D
    vx = D.T @ state.mu2 @ C
    vy = C.T @ state.mu2 @ D

    fc = flux_coeffs(p, u, v)
    Px, Py = fc.Pu * ux + fc.Pv * vx, fc.Pu * uy + fc.Pv * vy
    Qx, Qy = fc.Qu * ux + fc.Qv * vx, fc.Qu * uy + fc.Qv * vy
    f, g = reactions(p, u, v)

    cell = (np.pi / resolution) ** 2
    dmu1 = cell * (-(D @ Px @ C.T) - (C @ Py @ D.T) + C @ f @ C.T)
    dmu2 = cell * (-(D @ Qx @ C.T) - (C @ Qy @ D.T) + C @ g @ C.T)
    return dmu1, dmu2


def ic_field(ic, resolution: int) -> np.ndarray:
    """Evaluate an initial-condition descriptor (or pass through a grid field).

    Descriptors: {"type": "constant", "value": c} (key "u" accepted as an
    alias), {"type": "cosine", "offset": c, "terms": [{"j", "k", "amp"}]},
    {"type": "gaussian", "cx", "cy", "sigma", "amp", "offset"}.
    """
    if isinstance(ic, np.ndarray):
        return ic
    if not isinstance(ic, dict):
        return np.asarray(ic, dtype=float)
    kind = ic.get("type")
    x = midpoint_nodes(resolution)[:, None]
    y = midpoint_nodes(resolution)[None, :]
    if kind == "constant":
        value = float(ic["value"] if "value" in ic else ic["u"])
        return np.full((resolution, resolution), value)
    if kind == "cosine":
        field = np.full((resolution, resolution), float(ic.get("offset", 0.0)))
        for term in ic["terms"]:
            field = field + float(term["amp"]) * np.cos(int(term["j"]) * x) * np.cos(int(term["k"]) * y)
        return field
    if kind == "gaussian":
        r2 = (x - float(ic["cx"])) ** 2 + (y - float(ic["cy"])) ** 2
        return float(ic.get("offset", 0.0)) + float(ic["amp"]) * np.exp(-r2 / (2.0 * float(ic["sigma"]) ** 2))
    raise ValueError(f"unknown initial-condition type {kind!r}")


def ic_coefficients(ic, n: int):
    """Exact coefficients for analytically representable descriptors, else None.

    Constant and cosine descriptors land exactly on basis modes; the Gaussian
    needs quadrature and returns None here.
    """
    if not isinstance(ic, dict):
        return None
    eta = Basis(n).norm1d()
    width = n + 1
    if ic.get("type") == "constant":
        mu = np.zeros((width, width))
        value = float(ic["value"] if "value" in ic else ic["u"])
        mu[0, 0] = value * np.pi
        return mu
    if ic.get("type") == "cosine":
        mu = np.zeros((width, width))
        mu[0, 0] = float(ic.get("offset", 0.0)) * np.pi
        for term in ic["terms"]:
            j, k = int(term["j"]), int(term["k"])
            if not (0 <= j <= n and 0 <= k <= n):
                raise ValueError(f"cosine term ({j}, {k}) beyond truncation order {n}")
            mu[j, k] += float(term["amp"]) / (eta[j] * eta[k])
        return mu
    return None


@dataclass(frozen=True)
class ProjectionReport:
    """Minima of the synthesized truncated fields (negativity is reported, not clipped)."""

    min_u: float
    min_v: float
    resolution: int

    def to_dict(self) -> dict:
        return {"min_u": self.min_u, "min_v": self.min_v, "resolution": self.resolution}


def _project_one(ic, n: int, resolution: int, label: str) -> np.ndarray:
    field = ic_field(ic, resolution) if isinstance(ic, dict) else np.asarray(ic, dtype=float)
    lo = float(field.min())
    # Tolerate synthesis roundoff at zero, nothing more.
    if lo < -1e-12 * max(1.0, float(np.abs(field).max())):
        raise ValueError(f"initial field for {label} has negative values (min = {lo})")
    exact = ic_coefficients(ic, n)
    return exact if exact is not None else analyze(field, n)


def project_initial(u0, v0, n: int, resolution: int | None = None):
    """Project initial data onto the order-n basis.

    Returns (state at t=0, ProjectionReport).  Grid fields are transformed by
    quadrature; constant/cosine descriptors are placed exactly on their modes;
    Gaussians are sampled at the diagnostic resolution 4(n+1) and transformed.
    """
    resolution = resolution if resolution is not None else 4 * (n + 1)
    mu1 = _project_one(u0, n, resolution, "u")
    mu2 = _project_one(v0, n, resolution, "v")
    state = SpectralState(mu1, mu2, t=0.0)
    su, sv = synthesize(state, resolution)
    report = ProjectionReport(float(su.min()), float(sv.min()), resolution)
    return state, report
