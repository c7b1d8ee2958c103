"""Command-line front end: condition checks, certificate search, runs, sweeps.

Subcommands
    check    print the condition report JSON (exit 0 when the homogenization
             conditions apply, 2 when not, 1 on bad input)
    certify  search for certificate weights (exit 0 feasible, 2 infeasible)
    run      integrate one initial condition and write snapshots + manifest
             (exit 0 steady/t_max, 3 blow-up, 4 step budget, 1 bad config)
    sweep    the nine-initial-condition grid (worst run decides the exit code)
    tensors  build the triple-product tensors and report their sparsity

All JSON output is deterministic: no timestamps, repr-round-trip floats,
sorted keys.  SKTSPEC_THREADS caps sweep parallelism.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .galerkin import ic_field
from .integrate import (
    OUTCOME_BLOWUP,
    OUTCOME_BUDGET,
    OUTCOME_STEADY,
    OUTCOME_TMAX,
    RunConfig,
    run,
    save_run,
)
from .lyapunov import PreconditionError, check_reaction_sign, find_certificate
from .model import (
    ModelParams,
    ParamsError,
    check_conditions,
    coexistence_steady_state,
    params_to_dict,
    resolve_params,
)
from .spectral import build_tensors, save_tensors, synthesize

__all__ = ["main", "parse_ic", "SWEEP_SHAPES"]

# Stand-ins for the nine-simulation initial densities: two offset cosine
# bumps and one Gaussian bump, all nonnegative.
SWEEP_SHAPES = {
    "A": {"type": "cosine", "offset": 0.5, "terms": [{"j": 1, "k": 1, "amp": 0.3}]},
    "B": {"type": "cosine", "offset": 0.5, "terms": [{"j": 2, "k": 0, "amp": 0.3}]},
    "C": {"type": "gaussian", "cx": np.pi / 2, "cy": np.pi / 2,
          "sigma": 0.5, "amp": 0.5, "offset": 0.2},
}

_RUN_EXIT = {OUTCOME_STEADY: 0, OUTCOME_TMAX: 0, OUTCOME_BLOWUP: 3, OUTCOME_BUDGET: 4}
_DEFAULT_SIGN_LEVEL = 100.0


def parse_ic(text: str):
    """Parse one --ic descriptor.

    Forms: "constant:U[,V]" (a pair when two values are given),
    "cosine:OFFSET,AMP,J,K", "gaussian:CX,CY,SIGMA,AMP,OFFSET", or
    "@file.json" holding either a descriptor or {"u": ..., "v": ...}.
    Returns a single descriptor dict or a (u_desc, v_desc) tuple.
    """
    if text.startswith("@"):
        with open(text[1:]) as fh:
            data = json.load(fh)
        if isinstance(data, dict) and set(data) == {"u", "v"}:
            return data["u"], data["v"]
        return data
    kind, _, argstr = text.partition(":")
    args = [float(a) for a in argstr.split(",")] if argstr else []
    if kind == "constant":
        if len(args) == 1:
            return {"type": "constant", "value": args[0]}
        if len(args) == 2:
            return ({"type": "constant", "value": args[0]},
                    {"type": "constant", "value": args[1]})
        raise ValueError(f"constant takes 1 or 2 values, got {len(args)}")
    if kind == "cosine":
        if len(args) != 4:
            raise ValueError("cosine takes OFFSET,AMP,J,K")
        return {"type": "cosine", "offset": args[0],
                "terms": [{"j": int(args[2]), "k": int(args[3]), "amp": args[1]}]}
    if kind == "gaussian":
        if len(args) != 5:
            raise ValueError("gaussian takes CX,CY,SIGMA,AMP,OFFSET")
        return {"type": "gaussian", "cx": args[0], "cy": args[1],
                "sigma": args[2], "amp": args[3], "offset": args[4]}
    raise ValueError(f"unknown initial-condition form {kind!r}")


def _resolve_ics(ic_args):
    """One or two --ic flags resolve to a (u, v) descriptor pair."""
    if not ic_args:
        c = {"type": "constant", "value": 0.5}
        return c, c
    parsed = [parse_ic(a) for a in ic_args]
    if len(parsed) == 1:
        if isinstance(parsed[0], tuple):
            return parsed[0]
        return parsed[0], parsed[0]
    if len(parsed) == 2:
        out = []
        for item in parsed:
            if isinstance(item, tuple):
                raise ValueError("two --ic flags must each describe one species")
            out.append(item)
        return out[0], out[1]
    raise ValueError(f"at most two --ic flags, got {len(parsed)}")


def _params_from_args(args) -> ModelParams:
    source = args.params or args.preset or args.source
    if source is None:
        raise ParamsError("no parameter source: give a preset name, a file, or --params/--preset")
    return resolve_params(source)


def _emit(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _thread_cap() -> int:
    env = os.environ.get("SKTSPEC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"SKTSPEC_THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def cmd_check(args) -> int:
    try:
        p = _params_from_args(args)
        report = check_conditions(p)
    except (ParamsError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    payload = {"params": params_to_dict(p)}
    payload.update(report.to_dict())
    _emit(payload)
    return 0 if report.theorem_2_2_applies else 2


def cmd_certify(args) -> int:
    try:
        p = _params_from_args(args)
    except (ParamsError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        cert = find_certificate(p, k_max=args.kmax)
    except PreconditionError as exc:
        _emit({"feasible": False, "reason": str(exc)})
        return 2
    if cert is None:
        _emit({"feasible": False,
               "reason": f"no admissible coupling in (1, {args.kmax}]: "
                         "window product never exceeds K^2"})
        return 2
    sign = check_reaction_sign(p, cert, _DEFAULT_SIGN_LEVEL, seed=args.seed)
    payload = cert.to_dict()
    payload.update({
        "phi_coeffs": list(sign.phi_coeffs),
        "violation_fraction": sign.violation_fraction,
        "max_violation": sign.max_violation,
    })
    _emit(payload)
    return 0


def _config_from_args(args) -> RunConfig:
    return RunConfig(
        n=args.n, t_max=args.tmax, rtol=args.rtol, atol=args.atol,
        snapshot_dt=args.snapshot_dt, seed=args.seed,
    ).validate()


def cmd_run(args) -> int:
    try:
        p = _params_from_args(args)
        config = _config_from_args(args)
        ic_u, ic_v = _resolve_ics(args.ic)
        result = run(p, config, ic_u, ic_v)
        manifest = save_run(result, args.out)
    except (ParamsError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _emit({"outcome": result.outcome, "final_time": result.final_state.t,
           "n_steps": result.n_steps, "out_dir": args.out,
           "final_diagnostics": manifest["timeseries"][-1]})
    return _RUN_EXIT[result.outcome]


def _sweep_deviation(result, equilibrium) -> float:
    if equilibrium is None:
        return float("nan")
    res = 4 * (result.config.n + 1)
    u, v = synthesize(result.final_state, res)
    return max(float(np.abs(u - equilibrium[0]).max()),
               float(np.abs(v - equilibrium[1]).max()))


def cmd_sweep(args) -> int:
    try:
        p = _params_from_args(args)
        config = _config_from_args(args)
    except (ParamsError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    labels = sorted(SWEEP_SHAPES)
    pairs = [(lu, lv) for lu in labels for lv in labels]
    equilibrium = coexistence_steady_state(p)

    def one(pair):
        lu, lv = pair
        result = run(p, config, SWEEP_SHAPES[lu], SWEEP_SHAPES[lv])
        out_dir = os.path.join(args.out, f"u{lu}_v{lv}")
        save_run(result, out_dir)
        return pair, result, _sweep_deviation(result, equilibrium)

    workers = min(len(pairs), _thread_cap())
    rows = []
    failures = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pair: pool.submit(one, pair) for pair in pairs}
        for pair in pairs:
            try:
                rows.append(futures[pair].result())
            except Exception as exc:  # partial results stay on disk
                failures.append((pair, exc))

    summary = []
    print(f"{'u_ic':>4} {'v_ic':>4} {'outcome':>22} {'max_deviation':>14} {'t_end':>8}")
    for (lu, lv), result, dev in rows:
        print(f"{lu:>4} {lv:>4} {result.outcome:>22} {dev:>14.6e} {result.final_state.t:>8.2f}")
        summary.append({"u_ic": lu, "v_ic": lv, "outcome": result.outcome,
                        "max_deviation": dev, "t_end": result.final_state.t,
                        "out_dir": f"u{lu}_v{lv}"})
    for (lu, lv), exc in failures:
        print(f"{lu:>4} {lv:>4} {'failed':>22} {exc}")

    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "sweep_manifest.json"), "w") as fh:
        json.dump({"params": params_to_dict(p), "config": config.to_dict(),
                   "runs": summary}, fh, indent=2, sort_keys=True)
        fh.write("\n")

    if failures:
        return 1
    outcomes = {result.outcome for _, result, _ in rows}
    if OUTCOME_BLOWUP in outcomes:
        return 3
    if OUTCOME_BUDGET in outcomes:
        return 4
    return 0


def cmd_tensors(args) -> int:
    tensors = build_tensors(args.n)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        save_tensors(tensors, os.path.join(args.out, f"tensors_n{args.n}.npz"))
    _emit({"n": args.n, "modes": tensors.modes,
           "mass_nnz": tensors.mass_nnz, "stiff_nnz": tensors.stiff_nnz,
           "saved": bool(args.out)})
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sktspec",
        description="Cross-diffusion competition system: condition checks, "
                    "certificates, and spectral simulations on [0, pi]^2.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_source(sp):
        sp.add_argument("source", nargs="?", default=None,
                        help="preset name (case1/case2) or parameter JSON file")
        sp.add_argument("--params", default=None, help="parameter JSON file")
        sp.add_argument("--preset", default=None, help="preset name")
        sp.add_argument("--seed", type=int, default=0)

    def add_run_options(sp):
        sp.add_argument("--n", type=int, default=8, help="truncation order")
        sp.add_argument("--tmax", type=float, default=200.0)
        sp.add_argument("--rtol", type=float, default=1e-7)
        sp.add_argument("--atol", type=float, default=1e-10)
        sp.add_argument("--snapshot-dt", type=float, default=1.0, dest="snapshot_dt")
        sp.add_argument("--out", default="sktspec_out", help="output directory")

    sp = sub.add_parser("check", help="evaluate the inequality conditions")
    add_source(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("certify", help="search for certificate weights")
    add_source(sp)
    sp.add_argument("--kmax", type=float, default=2.0)
    sp.set_defaults(func=cmd_certify)

    sp = sub.add_parser("run", help="integrate one initial condition")
    add_source(sp)
    add_run_options(sp)
    sp.add_argument("--ic", action="append", default=None,
                    help="initial condition (repeat for separate u and v)")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="run the 3x3 initial-condition grid")
    add_source(sp)
    add_run_options(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("tensors", help="build triple-product tensors")
    sp.add_argument("--n", type=int, default=8)
    sp.add_argument("--out", default=None, help="directory for the npz cache")
    sp.set_defaults(func=cmd_tensors)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
