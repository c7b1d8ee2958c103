import json
import math

import numpy as np
import pytest

from sktspec.galerkin import RhsAssembler, project_initial
from sktspec.integrate import (
    RunConfig,
    StepUnderflow,
    diagnostics,
    fd_reference,
    read_snapshot,
    run,
    save_run,
    step_adaptive,
    write_snapshot,
)
from sktspec.lyapunov import LyapunovCert, eval_H
from sktspec.model import coexistence_steady_state, params_from_dict, preset
from sktspec.spectral import SpectralState, synthesize

PURE_DIFFUSION = dict(d1=1.0, d2=1.0, a1=0.0, b1=1e-300, c1=0.0,
                      a2=0.0, b2=0.0, c2=1e-300,
                      alpha11=0.0, alpha12=0.0, alpha21=0.0, alpha22=0.0,
                      b11=0.0, b22=0.0)


def constant_state(n, u, v):
    width = n + 1
    mu1 = np.zeros((width, width))
    mu2 = np.zeros((width, width))
    mu1[0, 0] = u * np.pi
    mu2[0, 0] = v * np.pi
    return SpectralState(mu1, mu2, 0.0)


def test_step_near_fixed_point_is_inert(case1):
    eq = coexistence_steady_state(case1)
    state = constant_state(3, *eq)
    asm = RhsAssembler.for_order(case1, 3)
    new, dt_used, dt_next, err = step_adaptive(asm, state, 10.0, 1e-7, 1e-10,
                                               dt_max=0.5)
    assert dt_used == 0.5
    assert dt_next == 0.5
    assert new.t == 0.5
    assert np.abs(new.mu1 - state.mu1).max() < 1e-12
    assert err < 1e-6


def test_step_guards(case1):
    asm = RhsAssembler.for_order(case1, 2)
    state = constant_state(2, 0.5, 0.5)
    with pytest.raises(ValueError, match="tolerances"):
        step_adaptive(asm, state, 0.1, -1e-7, 1e-10)
    with pytest.raises(ValueError, match="dt_suggest"):
        step_adaptive(asm, state, 0.0, 1e-7, 1e-10)


def test_step_underflow_on_divergent_rhs(case1):
    asm = RhsAssembler.for_order(case1, 2)
    state = constant_state(2, 1e160, 1e160)
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(StepUnderflow):
            step_adaptive(asm, state, 1.0, 1e-7, 1e-10)


def test_rejection_shrinks_step(case2, rng):
    asm = RhsAssembler.for_order(case2, 4)
    width = 5
    mu1 = 0.2 * rng.normal(size=(width, width))
    mu2 = 0.2 * rng.normal(size=(width, width))
    mu1[0, 0] += np.pi
    mu2[0, 0] += np.pi
    state = SpectralState(mu1, mu2, 0.0)
    new, dt_used, dt_next, err = step_adaptive(asm, state, 50.0, 1e-10, 1e-12)
    assert dt_used < 50.0
    assert err <= 1.0
    assert new.t == dt_used


def integrate_fixed(asm, state, dt, n_steps, rtol=1e6, atol=1e6):
    # Tolerances so loose that every step is accepted at exactly dt.
    for _ in range(n_steps):
        state, used, _, _ = step_adaptive(asm, state, dt, rtol, atol, dt_max=dt)
        assert used == dt
    return state


def test_fifth_order_convergence(case1, rng):
    n = 2
    asm = RhsAssembler.for_order(case1, n)
    width = n + 1
    mu1 = 0.1 * rng.normal(size=(width, width))
    mu2 = 0.1 * rng.normal(size=(width, width))
    mu1[0, 0] += 0.8 * np.pi
    mu2[0, 0] += 0.6 * np.pi
    start = SpectralState(mu1, mu2, 0.0)

    T = 0.25
    ref = start
    while ref.t < T - 1e-15:
        ref, _, _, _ = step_adaptive(asm, ref, T - ref.t, 1e-12, 1e-14,
                                     dt_max=T - ref.t)
    ref_y = np.concatenate([ref.mu1.ravel(), ref.mu2.ravel()])

    errs = []
    for k in (8, 16, 32):
        end = integrate_fixed(asm, start, T / k, k)
        y = np.concatenate([end.mu1.ravel(), end.mu2.ravel()])
        errs.append(np.abs(y - ref_y).max())
    slopes = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    for slope in slopes:
        assert 4.3 < slope < 5.9, (slopes, errs)


def test_run_reaches_steady_state(case1):
    config = RunConfig(n=4, t_max=100.0)
    result = run(case1, config, {"type": "constant", "value": 0.5},
                 {"type": "constant", "value": 0.5})
    assert result.outcome == "steady_state"
    eq = coexistence_steady_state(case1)
    assert result.final_state.mu1[0, 0] / np.pi == pytest.approx(eq[0], abs=1e-6)
    assert result.final_state.mu2[0, 0] / np.pi == pytest.approx(eq[1], abs=1e-6)
    assert result.cert is not None and result.cert.feasible
    assert result.conditions.theorem_2_2_applies
    # level is the max of H over the initial fields
    assert result.level == pytest.approx(float(eval_H(result.cert, 0.5, 0.5).H), rel=1e-9)
    assert result.timeseries[0].t == 0.0
    assert len(result.timeseries) == len(result.snapshots)
    assert result.n_steps > 0


def test_steady_state_is_sound_under_restart(case1):
    config = RunConfig(n=4, t_max=100.0)
    first = run(case1, config, {"type": "constant", "value": 0.5},
                {"type": "constant", "value": 0.5})
    assert first.outcome == "steady_state"
    res = 4 * (config.n + 1)
    u, v = synthesize(first.final_state, res)
    again = run(case1, RunConfig(n=4, t_max=10.0), u, v)
    assert again.outcome == "steady_state"
    assert again.final_state.t <= 2.0
    drift = abs(again.final_state.mu1[0, 0] - first.final_state.mu1[0, 0]) * np.pi
    assert drift < 10 * config.steady_tol


def test_mass_conservation_without_reactions():
    p = params_from_dict(dict(PURE_DIFFUSION, alpha11=0.5, alpha12=0.1,
                              alpha21=0.2, alpha22=0.4, b11=0.3, b22=0.2))
    ic_u = {"type": "cosine", "offset": 0.6,
            "terms": [{"j": 1, "k": 1, "amp": 0.2}, {"j": 2, "k": 0, "amp": 0.1}]}
    ic_v = {"type": "gaussian", "cx": 1.2, "cy": 2.0, "sigma": 0.6,
            "amp": 0.4, "offset": 0.3}
    result = run(p, RunConfig(n=6, t_max=5.0), ic_u, ic_v)
    assert result.outcome in ("steady_state", "t_max_reached")
    mass_u = [rec.mass_u for rec in result.timeseries]
    mass_v = [rec.mass_v for rec in result.timeseries]
    assert max(abs(m - mass_u[0]) for m in mass_u) < 1e-8
    assert max(abs(m - mass_v[0]) for m in mass_v) < 1e-8


def test_run_blow_up_outcome():
    # mutual amplification with negligible saturation explodes in finite time
    p = params_from_dict(dict(d1=0.01, d2=0.01, a1=1.0, b1=0.01, c1=2.0,
                              a2=1.0, b2=2.0, c2=0.01,
                              alpha11=0.0, alpha12=0.0, alpha21=0.0,
                              alpha22=0.0, b11=0.0, b22=0.0))
    with np.errstate(over="ignore", invalid="ignore"):
        result = run(p, RunConfig(n=2, t_max=5.0), {"type": "constant", "value": 1.0},
                     {"type": "constant", "value": 1.0})
    assert result.outcome == "blow_up"
    assert result.final_state.t < 5.0
    assert result.cert is None


def test_run_step_budget_outcome(case1):
    config = RunConfig(n=4, t_max=50.0, max_steps=3)
    result = run(case1, config, {"type": "cosine", "offset": 0.5,
                                 "terms": [{"j": 1, "k": 1, "amp": 0.2}]},
                 {"type": "constant", "value": 0.4})
    assert result.outcome == "step_budget_exhausted"
    assert result.n_steps == 3


def test_run_config_validation():
    with pytest.raises(ValueError, match="t_max"):
        RunConfig(t_max=0.0).validate()
    with pytest.raises(ValueError, match="snapshot_dt"):
        RunConfig(t_max=1.0, snapshot_dt=2.0).validate()
    with pytest.raises(ValueError, match="rtol"):
        RunConfig(rtol=0.0).validate()
    with pytest.raises(ValueError, match="max_steps"):
        RunConfig(max_steps=0).validate()
    with pytest.raises(ValueError, match="truncation"):
        RunConfig(n=-1).validate()


def test_diagnostics_reference_values(case1):
    asm = RhsAssembler.for_order(case1, 4)
    cert = LyapunovCert(lam=2.0, mu=1.0, K=math.sqrt(2.0))
    rec = diagnostics(asm, constant_state(4, 1.0, 1.0), cert, level=0.0)
    assert rec.max_H == pytest.approx(2.5, rel=1e-12)
    assert rec.mass_u == pytest.approx(np.pi**2, rel=1e-12)
    assert rec.mass_v == pytest.approx(np.pi**2, rel=1e-12)
    assert rec.min_u == pytest.approx(1.0, rel=1e-12)
    assert rec.max_v == pytest.approx(1.0, rel=1e-12)
    assert rec.L_value == pytest.approx(0.5 * 2.5**2 * np.pi**2, rel=1e-10)
    assert rec.rhs_norm > 0

    empty = diagnostics(asm, constant_state(4, 0.0, 0.0))
    assert empty.max_H == 0.0 and empty.L_value == 0.0
    assert empty.rhs_norm == 0.0 and empty.mass_u == 0.0
    assert set(rec.to_dict()) == {
        "t", "mass_u", "mass_v", "min_u", "max_u", "min_v", "max_v",
        "max_H", "L_value", "rhs_norm",
    }


def test_fd_reference_heat_equation():
    p = params_from_dict(PURE_DIFFUSION)
    N = 64
    x = (np.arange(N) + 0.5) * np.pi / N
    u0 = 1.0 + 0.5 * np.cos(x)[:, None] * np.ones(N)[None, :]
    v0 = np.full((N, N), 1.0)
    u, v = fd_reference(p, u0, v0, N, t_end=1.0)
    exact = 1.0 + 0.5 * math.exp(-1.0) * np.cos(x)[:, None] * np.ones(N)[None, :]
    assert np.abs(u - exact).max() < 1e-4
    assert np.abs(v - 1.0).max() < 1e-12


def test_fd_reference_guards():
    p = params_from_dict(PURE_DIFFUSION)
    ones = np.ones((32, 32))
    with pytest.raises(ValueError, match="at least 16"):
        fd_reference(p, np.ones((8, 8)), np.ones((8, 8)), 8, 1.0)
    with pytest.raises(ValueError, match="initial fields"):
        fd_reference(p, np.ones((16, 16)), ones, 32, 1.0)
    with pytest.raises(ValueError, match="t_end"):
        fd_reference(p, ones, ones, 32, 0.0)
    with pytest.raises(ValueError, match="stability"):
        fd_reference(p, ones, ones, 32, 1.0, dt=1.0)


def test_fd_reference_constant_state_is_fixed(case1):
    eq = coexistence_steady_state(case1)
    N = 16
    u0 = np.full((N, N), eq[0])
    v0 = np.full((N, N), eq[1])
    u, v = fd_reference(case1, u0, v0, N, t_end=0.5)
    assert np.abs(u - eq[0]).max() < 1e-12
    assert np.abs(v - eq[1]).max() < 1e-12


def test_snapshot_round_trip(tmp_path, rng):
    field = rng.normal(size=(7, 7))
    path = tmp_path / "snap.txt"
    write_snapshot(path, 1.25, 6, field)
    first = path.read_text().splitlines()[0]
    assert first == "t=1.25 n=6 grid=7"
    t, n, back = read_snapshot(path)
    assert (t, n) == (1.25, 6)
    assert np.array_equal(back, field)


def test_save_run_manifest_and_determinism(case1, tmp_path):
    config = RunConfig(n=2, t_max=2.0)
    result = run(case1, config, {"type": "constant", "value": 0.52},
                 {"type": "constant", "value": 0.2})
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    manifest = save_run(result, out1)
    save_run(result, out2)

    assert set(manifest) == {
        "params", "config", "outcome", "n_steps", "final_time", "level",
        "conditions", "certificate", "projection", "timeseries", "snapshots",
    }
    assert manifest["outcome"] == result.outcome
    assert len(manifest["snapshots"]) == len(result.snapshots)
    for entry in manifest["snapshots"]:
        assert (out1 / entry["u"]).exists()
        assert (out1 / entry["v"]).exists()

    on_disk = json.loads((out1 / "manifest.json").read_text())
    assert on_disk == manifest
    assert (out1 / "manifest.json").read_bytes() == (out2 / "manifest.json").read_bytes()
    for entry in manifest["snapshots"]:
        assert (out1 / entry["u"]).read_bytes() == (out2 / entry["u"]).read_bytes()

    # snapshot grids agree with direct synthesis of the stored states
    t0, n0, grid = read_snapshot(out1 / manifest["snapshots"][0]["u"])
    assert n0 == config.n
    u0, _ = synthesize(result.snapshots[0], 4 * (config.n + 1))
    assert np.array_equal(grid, u0)


def test_run_summary_shape(case1):
    result = run(case1, RunConfig(n=2, t_max=1.0),
                 {"type": "constant", "value": 0.5},
                 {"type": "constant", "value": 0.3})
    s = result.summary()
    assert s["outcome"] == result.outcome
    assert s["final_time"] == result.final_state.t
    assert s["n_steps"] == result.n_steps
    assert s["final_diagnostics"] == result.timeseries[-1].to_dict()


def test_refinement_consistency_band_limited(case1):
    # Band-limited ICs are represented exactly at both orders, so the two
    # trajectories discretize the same projected system up to the (tiny)
    # mode-8+ content the nonlinearity generates.
    ic_u = {"type": "cosine", "offset": 0.5, "terms": [{"j": 1, "k": 1, "amp": 0.2}]}
    ic_v = {"type": "cosine", "offset": 0.3, "terms": [{"j": 2, "k": 0, "amp": 0.1}]}
    fields = {}
    for n in (8, 12):
        result = run(case1, RunConfig(n=n, t_max=5.0, steady_tol=1e-14), ic_u, ic_v)
        assert result.outcome == "t_max_reached"
        assert result.final_state.t == pytest.approx(5.0, abs=1e-12)
        fields[n] = synthesize(result.final_state, 64)
    for coarse, fine in zip(fields[8], fields[12]):
        rel = np.linalg.norm(coarse - fine) / np.linalg.norm(fine)
        assert rel < 1e-4
