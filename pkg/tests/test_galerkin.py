from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sktspec.galerkin import (
    RhsAssembler,
    ic_coefficients,
    ic_field,
    project_initial,
    rhs,
    rhs_oracle,
)
from sktspec.model import coexistence_steady_state, preset, reactions
from sktspec.spectral import Basis, SpectralState, laplacian_eigenvalues, synthesize


def random_state(rng, n, scale=0.3):
    width = n + 1
    decay = 1.0 / (1.0 + np.arange(width)) ** 2
    mu1 = scale * rng.normal(size=(width, width)) * np.outer(decay, decay)
    mu2 = scale * rng.normal(size=(width, width)) * np.outer(decay, decay)
    mu1[0, 0] += 0.8 * np.pi
    mu2[0, 0] += 0.8 * np.pi
    return SpectralState(mu1, mu2, t=0.0)


@pytest.mark.parametrize("name", ["case1", "case2"])
@pytest.mark.parametrize("n", [2, 4, 6])
def test_rhs_matches_quadrature_oracle(name, n, rng):
    p = preset(name)
    asm = RhsAssembler.for_order(p, n)
    for _ in range(5):
        state = random_state(rng, n)
        d1, d2 = asm.rhs(state)
        o1, o2 = rhs_oracle(p, state, 4 * (n + 1))
        scale = max(np.abs(o1).max(), np.abs(o2).max(), 1.0)
        assert np.abs(d1 - o1).max() / scale < 1e-12
        assert np.abs(d2 - o2).max() / scale < 1e-12


def test_rhs_oracle_insensitive_to_extra_resolution(case1, rng):
    state = random_state(rng, 3)
    a1, a2 = rhs_oracle(case1, state, 16)
    b1, b2 = rhs_oracle(case1, state, 37)
    assert np.allclose(a1, b1, atol=1e-13)
    assert np.allclose(a2, b2, atol=1e-13)


def test_module_rhs_wraps_method(case2, rng):
    asm = RhsAssembler.for_order(case2, 3)
    state = random_state(rng, 3)
    d1, d2 = rhs(asm, state)
    e1, e2 = asm.rhs(state)
    assert np.array_equal(d1, e1) and np.array_equal(d2, e2)


def test_homogeneous_equilibrium_is_a_fixed_point(case1, case2):
    for p in (case1, case2):
        eq = coexistence_steady_state(p)
        assert eq is not None
        width = 9
        mu1 = np.zeros((width, width))
        mu2 = np.zeros((width, width))
        mu1[0, 0] = eq[0] * np.pi
        mu2[0, 0] = eq[1] * np.pi
        d1, d2 = RhsAssembler.for_order(p, 8).rhs(SpectralState(mu1, mu2, 0.0))
        assert np.abs(d1).max() < 1e-10
        assert np.abs(d2).max() < 1e-10


def test_linear_regime_reduces_to_diagonal_decay(case1):
    # At infinitesimal amplitude the quadratic terms are O(eps^2) and the
    # derivative is the diagonal linear part.
    n = 5
    eps = 1e-8
    rng = np.random.default_rng(2)
    width = n + 1
    mu1 = eps * rng.normal(size=(width, width))
    mu2 = eps * rng.normal(size=(width, width))
    d1, d2 = RhsAssembler.for_order(case1, n).rhs(SpectralState(mu1, mu2, 0.0))
    eig = laplacian_eigenvalues(n).reshape(width, width)
    assert np.abs(d1 - (case1.a1 - case1.d1 * eig) * mu1).max() < 1e-13
    assert np.abs(d2 - (case1.a2 - case1.d2 * eig) * mu2).max() < 1e-13


def test_mean_mode_sees_only_reactions(case1, rng):
    # Flux terms are orthogonal to the constant test mode, so the (0,0)
    # derivative is independent of every transport coefficient.
    state = random_state(rng, 4)
    base = RhsAssembler.for_order(case1, 4).rhs(state)
    altered = replace(case1, d1=7.0, d2=3.0, alpha11=0.9, alpha12=0.7,
                      alpha21=0.5, alpha22=1.3, b11=1.1, b22=0.8)
    other = RhsAssembler.for_order(altered, 4).rhs(state)
    assert base[0][0, 0] == pytest.approx(other[0][0, 0], rel=1e-12)
    assert base[1][0, 0] == pytest.approx(other[1][0, 0], rel=1e-12)


def test_mean_mode_value_constant_state(case1):
    width = 5
    mu1 = np.zeros((width, width))
    mu2 = np.zeros((width, width))
    mu1[0, 0] = 1.0 * np.pi
    mu2[0, 0] = 1.0 * np.pi
    d1, d2 = RhsAssembler.for_order(case1, 4).rhs(SpectralState(mu1, mu2, 0.0))
    f, g = reactions(case1, 1.0, 1.0)
    assert d1[0, 0] == pytest.approx(f * np.pi, rel=1e-13)
    assert d2[0, 0] == pytest.approx(g * np.pi, rel=1e-13)
    # every other mode of a homogeneous state stays homogeneous
    assert np.abs(d1[1:, :]).max() == 0.0 and np.abs(d1[:, 1:]).max() == 0.0


@given(st.floats(0.0, 2.0))
def test_rhs_affine_in_cross_diffusion_weight(alpha):
    p = preset("case1")
    rng = np.random.default_rng(8)
    state = random_state(rng, 3)
    h = 0.25
    vals = []
    for a in (alpha, alpha + h, alpha + 2 * h):
        d1, d2 = RhsAssembler.for_order(replace(p, alpha11=a), 3).rhs(state)
        vals.append(np.concatenate([d1.ravel(), d2.ravel()]))
    second_diff = vals[2] - 2 * vals[1] + vals[0]
    scale = max(np.abs(vals[1]).max(), 1.0)
    assert np.abs(second_diff).max() < 1e-11 * scale


def test_assembler_rejects_order_mismatch(case1):
    asm = RhsAssembler.for_order(case1, 4)
    with pytest.raises(ValueError, match="order"):
        asm.rhs(SpectralState(np.zeros((3, 3)), np.zeros((3, 3)), 0.0))


def test_oracle_resolution_guard(case1):
    state = SpectralState(np.zeros((5, 5)), np.zeros((5, 5)), 0.0)
    with pytest.raises(ValueError, match="resolution"):
        rhs_oracle(case1, state, 19)


def test_ic_field_constant_and_alias():
    f = ic_field({"type": "constant", "value": 0.5}, 8)
    assert f.shape == (8, 8) and np.all(f == 0.5)
    g = ic_field({"type": "constant", "u": 0.25}, 4)
    assert np.all(g == 0.25)


def test_ic_field_cosine_and_gaussian():
    res = 32
    f = ic_field({"type": "cosine", "offset": 0.5,
                  "terms": [{"j": 1, "k": 0, "amp": 0.3}]}, res)
    from sktspec.spectral import midpoint_nodes

    x = midpoint_nodes(res)
    assert np.allclose(f, 0.5 + 0.3 * np.cos(x)[:, None], atol=1e-14)

    g = ic_field({"type": "gaussian", "cx": np.pi / 2, "cy": np.pi / 2,
                  "sigma": 0.5, "amp": 0.5, "offset": 0.2}, res)
    center = np.unravel_index(np.argmax(g), g.shape)
    assert abs(x[center[0]] - np.pi / 2) < np.pi / res
    assert g.min() >= 0.2
    assert g.max() <= 0.7 + 1e-12


def test_ic_field_passthrough_and_unknown():
    arr = np.ones((4, 4))
    assert ic_field(arr, 4) is arr
    with pytest.raises(ValueError, match="unknown initial-condition type"):
        ic_field({"type": "sawtooth"}, 8)


def test_ic_coefficients_exactness():
    n = 4
    mu = ic_coefficients({"type": "constant", "value": 0.5}, n)
    assert mu[0, 0] == pytest.approx(0.5 * np.pi)
    assert np.count_nonzero(mu) == 1

    eta = Basis(n).norm1d()
    mu = ic_coefficients({"type": "cosine", "offset": 0.2,
                          "terms": [{"j": 1, "k": 1, "amp": 0.1}]}, n)
    assert mu[0, 0] == pytest.approx(0.2 * np.pi)
    assert mu[1, 1] == pytest.approx(0.1 / (eta[1] * eta[1]))

    assert ic_coefficients({"type": "gaussian", "cx": 1.0, "cy": 1.0,
                            "sigma": 0.3, "amp": 0.1, "offset": 0.2}, n) is None
    assert ic_coefficients(np.ones((4, 4)), n) is None


def test_ic_coefficients_rejects_high_modes():
    with pytest.raises(ValueError, match="beyond truncation order"):
        ic_coefficients({"type": "cosine", "offset": 0.0,
                         "terms": [{"j": 7, "k": 0, "amp": 0.1}]}, 4)


def test_project_initial_descriptors():
    state, report = project_initial({"type": "constant", "value": 0.5},
                                    {"type": "cosine", "offset": 0.3,
                                     "terms": [{"j": 2, "k": 1, "amp": 0.1}]},
                                    n=4)
    assert state.t == 0.0 and state.n == 4
    assert state.mu1[0, 0] == pytest.approx(0.5 * np.pi)
    assert report.resolution == 20
    assert report.min_u == pytest.approx(0.5, abs=1e-12)
    # grid minimum of 0.3 + 0.1 cos(2x) cos(y); the midpoint nodes straddle
    # the true minimizer, so the reported value sits just above 0.2
    assert 0.2 <= report.min_v < 0.21
    d = report.to_dict()
    assert set(d) == {"min_u", "min_v", "resolution"}


def test_project_initial_band_limited_grid_round_trip(rng):
    n = 5
    target = random_state(rng, n)
    res = 4 * (n + 1)
    u, v = synthesize(target, res)
    if u.min() < 0 or v.min() < 0:
        shift = max(0.0, -min(u.min(), v.min())) + 0.1
        target.mu1[0, 0] += shift * np.pi
        target.mu2[0, 0] += shift * np.pi
        u, v = synthesize(target, res)
    state, _ = project_initial(u, v, n, resolution=res)
    assert np.abs(state.mu1 - target.mu1).max() < 1e-12
    assert np.abs(state.mu2 - target.mu2).max() < 1e-12


def test_project_initial_rejects_negative_data():
    ok = {"type": "constant", "value": 0.5}
    with pytest.raises(ValueError, match="initial field for u has negative"):
        project_initial({"type": "constant", "value": -0.1}, ok, n=4)
    with pytest.raises(ValueError, match="initial field for v has negative"):
        project_initial(ok, {"type": "cosine", "offset": 0.1,
                             "terms": [{"j": 1, "k": 0, "amp": 0.5}]}, n=4)


def test_projection_report_sees_truncation_undershoot():
    # A narrow positive gaussian overshoots below zero after truncation; the
    # report records it instead of failing.
    ic = {"type": "gaussian", "cx": np.pi / 2, "cy": np.pi / 2,
          "sigma": 0.25, "amp": 1.0, "offset": 0.0}
    state, report = project_initial(ic, {"type": "constant", "value": 0.5}, n=4)
    assert report.min_u < 0.0
    assert report.min_v == pytest.approx(0.5, abs=1e-12)
    assert state.n == 4
