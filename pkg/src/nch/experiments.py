"""Experiment harness: temporal convergence tables, structure counting and
the nonlocal-strength sweep.

Runs within a sweep are independent; NCH_THREADS > 1 distributes them over a
process pool, otherwise they execute inline in order.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .grid import Grid, ModelParams
from .stepper import advance, random_initial, sine_initial, thread_budget

Array = np.ndarray


@dataclass(frozen=True)
class ConvergenceRow:
    tau: float
    l2_error: float
    rate: float | None


@dataclass(frozen=True)
class ConvergenceReport:
    """Errors against a fine-step benchmark; rate_k = log2(e_{k-1}/e_k)."""

    scheme: str
    rows: tuple[ConvergenceRow, ...]
    benchmark_scheme: str
    benchmark_tau: float
    M: int
    T_final: float

    @property
    def rates(self) -> list[float]:
        return [r.rate for r in self.rows if r.rate is not None]


def convergence_study(
    scheme: str,
    params: ModelParams,
    tau_list: list[float],
    benchmark_tau: float,
    *,
    T_final: float = 0.02,
    amplitude: float = 0.1,
    benchmark_scheme: str = "p-etdrk2",
    mass_target: str = "predictor",
) -> ConvergenceReport:
    """Temporal convergence against a fine-step benchmark solution.

    Each step size runs from the same smooth initial field to T_final on the
    same mesh, so the reported errors are purely temporal.
    """
    if any(b >= a for a, b in zip(tau_list, tau_list[1:])):
        raise ValueError(f"tau values must be strictly decreasing, got {tau_list}")
    if benchmark_tau >= min(tau_list):
        raise ValueError(
            f"benchmark tau {benchmark_tau} must be below min(tau_list) = {min(tau_list)}"
        )
    grid = params.grid()
    u0 = sine_initial(grid, amplitude)

    def final_field(run_scheme: str, tau: float) -> Array:
        n_steps = int(round(T_final / tau))
        state, _, status = advance(
            u0, replace(params, tau=tau), run_scheme, n_steps, mass_target=mass_target
        )
        if status != "ok":
            raise RuntimeError(
                f"{run_scheme} run at tau={tau} ended with status {status}"
            )
        return state.u

    reference = final_field(benchmark_scheme, benchmark_tau)
    rows: list[ConvergenceRow] = []
    previous_error = None
    for tau in tau_list:
        error = grid.norm2(final_field(scheme, tau) - reference)
        rate = None
        if previous_error is not None and error > 0:
            rate = math.log2(previous_error / error)
        rows.append(ConvergenceRow(tau=tau, l2_error=error, rate=rate))
        previous_error = error
    return ConvergenceReport(
        scheme=scheme,
        rows=tuple(rows),
        benchmark_scheme=benchmark_scheme,
        benchmark_tau=benchmark_tau,
        M=params.M,
        T_final=T_final,
    )


def format_convergence_table(report: ConvergenceReport) -> str:
    """Human-readable table: one column per step size, error and rate rows."""
    taus = ["tau"] + [f"{r.tau:.6g}" for r in report.rows]
    errors = ["L2 Error"] + [f"{r.l2_error:.4e}" for r in report.rows]
    rates = ["Rate"] + [
        "-" if r.rate is None else f"{r.rate:.4f}" for r in report.rows
    ]
    widths = [max(len(c[i]) for c in (taus, errors, rates)) for i in range(len(taus))]
    lines = [
        f"scheme {report.scheme}, M={report.M}, T={report.T_final:g}, "
        f"benchmark {report.benchmark_scheme} at tau={report.benchmark_tau:g}"
    ]
    for row in (taus, errors, rates):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
    return "\n".join(lines) + "\n"


def write_convergence_csv(path, report: ConvergenceReport) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["tau", "l2_error", "rate"])
        for r in report.rows:
            writer.writerow(
                ["%.17g" % r.tau, "%.17g" % r.l2_error, "" if r.rate is None else "%.17g" % r.rate]
            )


# -- structure counting -------------------------------------------------------


def count_structures(u: Array, threshold: float = 0.0) -> int:
    """Connected components of {u > threshold} under 4-neighbor periodic adjacency.

    scipy labels the components on the flat torus-unrolled array; components
    touching across the wrap seams are merged by union-find over the two
    boundary pairs.
    """
    mask = np.asarray(u) > threshold
    labels, count = ndimage.label(mask)  # default structure is 4-connectivity
    if count == 0:
        return 0

    parent = list(range(count + 1))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    for a, b in zip(labels[0, :], labels[-1, :]):
        if a and b:
            union(int(a), int(b))
    for a, b in zip(labels[:, 0], labels[:, -1]):
        if a and b:
            union(int(a), int(b))

    return len({find(k) for k in range(1, count + 1)})


@dataclass(frozen=True)
class StructureCount:
    sigma: float
    count: int
    threshold: float
    final_time: float


def fit_loglog_slope(sigmas, counts) -> float | None:
    """Least-squares slope of ln(count) against ln(sigma); None if degenerate."""
    sigmas = np.asarray(sigmas, dtype=float)
    counts = np.asarray(counts, dtype=float)
    if len(sigmas) < 2 or np.any(counts <= 0):
        return None
    return float(np.polyfit(np.log(sigmas), np.log(counts), 1)[0])


def minority_structure_count(grid: Grid, u: Array, threshold: float = 0.0) -> int:
    """Count the droplet phase of a separated field.

    Off-critical mixtures equilibrate as droplets of the minority phase
    inside a connected matrix of the majority phase, so the superlevel set
    of the mean-side phase is a single component; the structures of
    interest live on the other side of the threshold.
    """
    u = np.asarray(u, dtype=float)
    if grid.mean(u) > threshold:
        return count_structures(-u, -threshold)
    return count_structures(u, threshold)


def _sweep_one(args) -> StructureCount:
    params, scheme, T_final, seed, offset, amplitude, threshold, mass_target = args
    grid = params.grid()
    u0 = random_initial(grid, offset, amplitude, seed)
    n_steps = int(round(T_final / params.tau))
    state, _, status = advance(u0, params, scheme, n_steps, mass_target=mass_target)
    if status != "ok":
        raise RuntimeError(f"sweep run at sigma={params.sigma} ended with {status}")
    return StructureCount(
        sigma=params.sigma,
        count=minority_structure_count(grid, state.u, threshold),
        threshold=threshold,
        final_time=n_steps * params.tau,
    )


def sigma_sweep(
    sigma_list: list[float],
    params: ModelParams,
    T_final: float,
    seed: int,
    *,
    scheme: str = "p-etdrk2",
    offset: float = 0.3,
    amplitude: float = 0.05,
    threshold: float = 0.0,
    mass_target: str = "predictor",
) -> tuple[list[StructureCount], float | None]:
    """Count equilibrium structures for each nonlocal strength.

    Every run starts from the same seeded random field (the strength is the
    only thing varied) and is evolved to T_final with the second-order
    projected scheme; returns the counts and the fitted log-log slope
    (None for a single-entry list).
    """
    if any(s <= 0 for s in sigma_list):
        raise ValueError(f"sigma values must be positive, got {sigma_list}")
    if any(b <= a for a, b in zip(sigma_list, sigma_list[1:])):
        raise ValueError(f"sigma values must be strictly increasing, got {sigma_list}")
    jobs = [
        (
            replace(params, sigma=float(s)),
            scheme,
            T_final,
            seed,
            offset,
            amplitude,
            threshold,
            mass_target,
        )
        for s in sigma_list
    ]
    workers = min(thread_budget(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(job) for job in jobs]
    slope = fit_loglog_slope([r.sigma for r in results], [r.count for r in results])
    return results, slope


def write_sweep_csv(path, results: list[StructureCount], slope: float | None) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["sigma", "count", "threshold", "final_time"])
        for r in results:
            writer.writerow(
                ["%.17g" % r.sigma, r.count, "%.17g" % r.threshold, "%.17g" % r.final_time]
            )
        if slope is not None:
            writer.writerow(["# loglog_slope", "%.17g" % slope, "", ""])
