"""Time integration: exponential predictors, projected steps, run loop.

One projected step is predict-then-correct.  The predictor integrates the
stiff linear part exactly per Fourier mode and approximates the nonlinear
integral: the first-order scheme freezes the nonlinearity at the current
state,

    utilde = phi0(tau L) u + tau phi1(tau L) F(u),

the second-order scheme interpolates it linearly in time through a projected
midpoint stage,

    utilde = phi0(tau L) u + tau [(phi1 - phi2)(tau L) F(u)
                                  + phi2(tau L) F(u_mid)].

The corrector projects the prediction onto {sup|v| <= 1 - delta, fixed mass},
which restores the pointwise bound exactly and, because the predictor already
conserves the discrete mean, keeps the mass constant across every step.  The
classic (unprojected) variants are provided for comparison runs; they may
leave the physical interval, which is reported as a `blowup` and halts the
run instead of feeding complex logarithms downstream.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .config import SimulationConfig
from .grid import Grid, ModelParams, write_pgm, write_snapshot
from .operators import PhiTable, apply_phi, build_phi_table, energy, nonlinear_F
from .projection import ProjectionResult, project

Array = np.ndarray

SCHEMES = ("etd1", "etdrk2", "p-etd1", "p-etdrk2")

DIAGNOSTICS_COLUMNS = (
    "step",
    "t",
    "sup_norm",
    "mass",
    "mass_increment",
    "energy",
    "xi",
    "lambda_sup",
    "projection_iterations",
    "clamped_fraction",
    "status",
)


@dataclass(frozen=True)
class StepState:
    """Solution state between steps; phi tables are tied to the step size."""

    u: Array
    t: float
    step_index: int
    phi: PhiTable
    initial_mass: float


@dataclass
class StepDiagnostics:
    """Per-step scalars mirroring the diagnostics CSV columns.

    energy is filled by the run loop when requested (it costs a transform);
    it stays nan on a terminal blowup record, where the logarithmic terms
    are undefined.
    """

    step: int
    t: float
    sup_norm: float
    mass: float
    mass_increment: float
    energy: float
    xi: float
    lambda_sup: float
    projection_iterations: int
    clamped_fraction: float
    status: str = "ok"


def new_state(u0: Array, params: ModelParams, phi: PhiTable | None = None) -> StepState:
    grid = params.grid()
    u0 = grid.check(u0)
    if phi is None or phi.tau != params.tau or phi.ell.shape != u0.shape:
        phi = build_phi_table(params)
    return StepState(
        u=u0, t=0.0, step_index=0, phi=phi, initial_mass=grid.mass(u0)
    )


def sine_initial(grid: Grid, amplitude: float) -> Array:
    """amplitude * sin(2 pi x / L) sin(2 pi y / L) on the mesh points."""
    X, Y = grid.mesh()
    w = 2.0 * np.pi / grid.L
    return amplitude * np.sin(w * X) * np.sin(w * Y)


def random_initial(grid: Grid, offset: float, amplitude: float, seed: int) -> Array:
    """offset + amplitude * r with r ~ U(-1, 1) per grid point.

    Draws come from a counter-based Philox stream keyed by the seed, one per
    point in row-major order, so a (seed, M) pair pins the field bitwise on
    any platform.
    """
    gen = np.random.Generator(np.random.Philox(seed))
    return offset + amplitude * gen.uniform(-1.0, 1.0, (grid.M, grid.M))


# -- predictors --------------------------------------------------------------


def etd1_predict(state: StepState, params: ModelParams) -> Array:
    """First-order prediction; no bound guarantee on the output."""
    f = nonlinear_F(state.u, params)
    return apply_phi(state.u, state.phi.phi0) + params.tau * apply_phi(
        f, state.phi.phi1
    )


def etdrk2_predict(state: StepState, u_mid: Array, params: ModelParams) -> Array:
    """Second-order prediction from the current state and a midpoint stage."""
    f_n = nonlinear_F(state.u, params)
    f_mid = nonlinear_F(u_mid, params)
    return apply_phi(state.u, state.phi.phi0) + params.tau * (
        apply_phi(f_n, state.phi.phi1m2) + apply_phi(f_mid, state.phi.phi2)
    )


# -- single steps ------------------------------------------------------------


def _advanced(state: StepState, u_new: Array) -> StepState:
    index = state.step_index + 1
    return replace(state, u=u_new, t=index * state.phi.tau, step_index=index)


def _diagnostics(
    state: StepState, grid: Grid, proj: ProjectionResult | None
) -> StepDiagnostics:
    mass = grid.mass(state.u)
    return StepDiagnostics(
        step=state.step_index,
        t=state.t,
        sup_norm=grid.norm_inf(state.u),
        mass=mass,
        mass_increment=mass - state.initial_mass,
        energy=float("nan"),
        xi=proj.xi if proj is not None else 0.0,
        lambda_sup=float(np.max(proj.lam)) if proj is not None else 0.0,
        projection_iterations=proj.iterations if proj is not None else 0,
        clamped_fraction=float(np.mean(proj.lam > 0.0)) if proj is not None else 0.0,
    )


def _target_mass(policy: str, state: StepState) -> float | None:
    # None lets project() fall back to the predictor's own mass
    if policy == "predictor":
        return None
    if policy == "initial":
        return state.initial_mass
    raise ValueError(f"unknown mass target policy {policy!r}")


def p_etd1_step(
    state: StepState,
    params: ModelParams,
    *,
    mass_target: str = "predictor",
    projection_tol: float | None = None,
    projection_max_iter: int = 100,
) -> tuple[StepState, StepDiagnostics]:
    """Projected first-order step."""
    grid = params.grid()
    utilde = etd1_predict(state, params)
    result = project(
        grid,
        utilde,
        params.delta,
        target_mass=_target_mass(mass_target, state),
        tol=projection_tol,
        max_iter=projection_max_iter,
        xi1=params.tau,
    )
    nxt = _advanced(state, result.u)
    return nxt, _diagnostics(nxt, grid, result)


def p_etdrk2_step(
    state: StepState,
    params: ModelParams,
    *,
    mass_target: str = "predictor",
    projection_tol: float | None = None,
    projection_max_iter: int = 100,
) -> tuple[StepState, StepDiagnostics]:
    """Projected second-order step.

    The midpoint stage is a full projected first-order step with its own
    multipliers; diagnostics report the final projection's xi and lam.
    """
    grid = params.grid()
    f_n = nonlinear_F(state.u, params)
    exp_u = apply_phi(state.u, state.phi.phi0)
    utilde_mid = exp_u + params.tau * apply_phi(f_n, state.phi.phi1)
    mid = project(
        grid,
        utilde_mid,
        params.delta,
        target_mass=_target_mass(mass_target, state),
        tol=projection_tol,
        max_iter=projection_max_iter,
        xi1=params.tau,
    )
    f_mid = nonlinear_F(mid.u, params)
    utilde = exp_u + params.tau * (
        apply_phi(f_n, state.phi.phi1m2) + apply_phi(f_mid, state.phi.phi2)
    )
    result = project(
        grid,
        utilde,
        params.delta,
        target_mass=_target_mass(mass_target, state),
        tol=projection_tol,
        max_iter=projection_max_iter,
        xi1=params.tau,
    )
    nxt = _advanced(state, result.u)
    return nxt, _diagnostics(nxt, grid, result)


def etd1_step(
    state: StepState, params: ModelParams, **_: object
) -> tuple[StepState, StepDiagnostics]:
    """Classic first-order step, no correction; flags blowup past |u| >= 1."""
    grid = params.grid()
    nxt = _advanced(state, etd1_predict(state, params))
    diag = _diagnostics(nxt, grid, None)
    if diag.sup_norm >= 1.0:
        diag.status = "blowup"
    return nxt, diag


def etdrk2_step(
    state: StepState, params: ModelParams, **_: object
) -> tuple[StepState, StepDiagnostics]:
    """Classic second-order step; the unprojected midpoint may itself blow up."""
    grid = params.grid()
    f_n = nonlinear_F(state.u, params)
    exp_u = apply_phi(state.u, state.phi.phi0)
    u_mid = exp_u + params.tau * apply_phi(f_n, state.phi.phi1)
    if float(np.max(np.abs(u_mid))) >= 1.0:
        nxt = _advanced(state, u_mid)
        diag = _diagnostics(nxt, grid, None)
        diag.status = "blowup"
        return nxt, diag
    f_mid = nonlinear_F(u_mid, params)
    utilde = exp_u + params.tau * (
        apply_phi(f_n, state.phi.phi1m2) + apply_phi(f_mid, state.phi.phi2)
    )
    nxt = _advanced(state, utilde)
    diag = _diagnostics(nxt, grid, None)
    if diag.sup_norm >= 1.0:
        diag.status = "blowup"
    return nxt, diag


STEPPERS: dict[str, Callable[..., tuple[StepState, StepDiagnostics]]] = {
    "etd1": etd1_step,
    "etdrk2": etdrk2_step,
    "p-etd1": p_etd1_step,
    "p-etdrk2": p_etdrk2_step,
}


# -- run loop ----------------------------------------------------------------


def advance(
    u0: Array,
    params: ModelParams,
    scheme: str,
    n_steps: int,
    *,
    mass_target: str = "predictor",
    projection_tol: float | None = None,
    projection_max_iter: int = 100,
    collect: bool = False,
    with_energy: bool = False,
    on_step: Callable[[StepState, StepDiagnostics | None], None] | None = None,
) -> tuple[StepState, list[StepDiagnostics], str]:
    """March n_steps of the chosen scheme from u0.

    Returns (final_state, diagnostics, status) with status `blowup` when an
    unprojected scheme left the physical interval; the run halts there with
    the offending predictor recorded as the terminal state.
    """
    if scheme not in STEPPERS:
        raise ValueError(f"unknown scheme {scheme!r}, expected one of {SCHEMES}")
    step_fn = STEPPERS[scheme]
    grid = params.grid()
    state = new_state(u0, params)
    diagnostics: list[StepDiagnostics] = []
    if collect:
        diag0 = _diagnostics(state, grid, None)
        if with_energy:
            diag0.energy = energy(state.u, params)
        diagnostics.append(diag0)
    if on_step is not None:
        on_step(state, None)

    for _ in range(n_steps):
        state, diag = step_fn(
            state,
            params,
            mass_target=mass_target,
            projection_tol=projection_tol,
            projection_max_iter=projection_max_iter,
        )
        if collect:
            if with_energy and diag.status == "ok":
                diag.energy = energy(state.u, params)
            diagnostics.append(diag)
        if on_step is not None:
            on_step(state, diag)
        if diag.status == "blowup":
            return state, diagnostics, "blowup"
    return state, diagnostics, "ok"


@dataclass
class RunResult:
    status: str
    state: StepState
    diagnostics: list[StepDiagnostics]
    blowup_time: float | None = None
    output_dir: Path | None = None
    snapshot_paths: list[Path] = field(default_factory=list)
    csv_path: Path | None = None


def _format_value(value) -> str:
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


def write_diagnostics_csv(path, diagnostics: list[StepDiagnostics]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(DIAGNOSTICS_COLUMNS)
        for d in diagnostics:
            writer.writerow(
                [
                    d.step,
                    _format_value(d.t),
                    _format_value(d.sup_norm),
                    _format_value(d.mass),
                    _format_value(d.mass_increment),
                    _format_value(d.energy),
                    _format_value(d.xi),
                    _format_value(d.lambda_sup),
                    d.projection_iterations,
                    _format_value(d.clamped_fraction),
                    d.status,
                ]
            )


def initial_field(config: SimulationConfig, grid: Grid) -> Array:
    spec = config.initial
    if spec.kind == "sine":
        return sine_initial(grid, spec.amplitude)
    if spec.kind == "random":
        return random_initial(grid, spec.offset, spec.amplitude, spec.seed)
    raise ValueError(f"unknown initial condition kind {spec.kind!r}")


def run(config: SimulationConfig, pgm: bool = False) -> RunResult:
    """Execute one configured simulation.

    Writes diagnostics.csv (one row per step, step 0 included) and NCHGRID
    snapshots at the configured times into config.output_dir when it is set;
    otherwise the run stays in memory.  A blowup of an unprojected scheme is
    a normal documented outcome reported through the returned status, not an
    exception.
    """
    params = config.model_params()
    grid = params.grid()
    u0 = initial_field(config, grid)
    n_steps = int(round(config.T_final / params.tau))
    snapshot_steps = {int(round(s / params.tau)): s for s in config.snapshot_times}

    out_dir = Path(config.output_dir) if config.output_dir else None
    snapshot_paths: list[Path] = []
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    def on_step(state: StepState, diag: StepDiagnostics | None) -> None:
        if out_dir is None or state.step_index not in snapshot_steps:
            return
        label = snapshot_steps[state.step_index]
        path = out_dir / f"snapshot_t{label:g}.grid"
        write_snapshot(path, grid, state.u, state.t)
        snapshot_paths.append(path)
        if pgm:
            write_pgm(path.with_suffix(".pgm"), state.u)

    state, diagnostics, status = advance(
        u0,
        params,
        config.scheme,
        n_steps,
        mass_target=config.mass_target,
        projection_tol=config.projection_tol,
        projection_max_iter=config.projection_max_iter,
        collect=True,
        with_energy=True,
        on_step=on_step,
    )

    csv_path = None
    if out_dir is not None:
        csv_path = out_dir / "diagnostics.csv"
        write_diagnostics_csv(csv_path, diagnostics)

    return RunResult(
        status=status,
        state=state,
        diagnostics=diagnostics,
        blowup_time=state.t if status == "blowup" else None,
        output_dir=out_dir,
        snapshot_paths=snapshot_paths,
        csv_path=csv_path,
    )


def thread_budget() -> int:
    """Data-parallel width cap from NCH_THREADS; defaults to the CPU count."""
    raw = os.environ.get("NCH_THREADS", "").strip()
    if raw:
        value = int(raw)
        if value < 1:
            raise ValueError(f"NCH_THREADS must be >= 1, got {value}")
        return value
    return os.cpu_count() or 1
