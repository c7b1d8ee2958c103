"""Spectral Galerkin solver and boundedness certificates for a two-species
cross-diffusion system on [0, pi]^2 with zero-flux boundaries."""

from .galerkin import RhsAssembler, project_initial, rhs, rhs_oracle
from .integrate import (
    DiagnosticRecord,
    RunConfig,
    RunResult,
    diagnostics,
    fd_reference,
    run,
    save_run,
    step_adaptive,
)
from .lyapunov import (
    LyapunovCert,
    PreconditionError,
    SignReport,
    check_reaction_sign,
    eval_H,
    eval_L,
    eval_psi_forms,
    find_certificate,
)
from .model import (
    ConditionReport,
    ModelParams,
    ParamsError,
    check_conditions,
    coexistence_steady_state,
    flux_coeffs,
    preset,
    reactions,
    resolve_params,
)
from .spectral import (
    Basis,
    SpectralState,
    TripleTensors,
    analyze,
    build_tensors,
    cached_tensors,
    synthesize,
)

__all__ = [
    "Basis",
    "ConditionReport",
    "DiagnosticRecord",
    "LyapunovCert",
    "ModelParams",
    "ParamsError",
    "PreconditionError",
    "RhsAssembler",
    "RunConfig",
    "RunResult",
    "SignReport",
    "SpectralState",
    "TripleTensors",
    "analyze",
    "build_tensors",
    "cached_tensors",
    "check_conditions",
    "check_reaction_sign",
    "coexistence_steady_state",
    "diagnostics",
    "eval_H",
    "eval_L",
    "eval_psi_forms",
    "fd_reference",
    "find_certificate",
    "flux_coeffs",
    "preset",
    "project_initial",
    "reactions",
    "resolve_params",
    "rhs",
    "rhs_oracle",
    "run",
    "save_run",
    "step_adaptive",
    "synthesize",
]
