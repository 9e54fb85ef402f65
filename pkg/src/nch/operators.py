"""Spectral operator machinery, phi kernels, nonlinearity and free energy.

The stiff linear operator of the semi-discrete flow,

    eps^2 Lap_h^2 - kappa Lap_h + sigma I,

is diagonalized by the 2-D DFT because the periodic five-point Laplacian is.
Every function of it therefore acts as a per-mode multiplication; the dense
M^2 x M^2 matrix is never formed (O(M^2 log M) per application instead of
O(M^4)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import xlogy

from .errors import BoundViolationError
from .grid import Grid, ModelParams

Array = np.ndarray

# Below this argument phi1 and phi2 are evaluated by their truncated Taylor
# series.  The closed forms lose up to ~5e-14 relative accuracy just above
# the cutoff (cancellation in expm1(-a) + a grows like 1/a), the series
# truncation is below 1e-16 there, so the worst case over all a >= 0 stays
# under 1e-14 relative.
PHI_SERIES_CUTOFF = 0.1
_PHI_SERIES_TERMS = 14


def _phi_series(a: Array, shift: int) -> Array:
    # sum_{j>=0} (-a)^j / (j+shift)!  by Horner
    acc = np.zeros_like(a)
    for j in reversed(range(_PHI_SERIES_TERMS)):
        acc = 1.0 / math.factorial(j + shift) - a * acc
    return acc


def _checked_argument(a):
    arr = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("phi functions require finite arguments")
    if np.any(arr < 0):
        raise ValueError(
            f"phi functions are defined for a >= 0, got min value {arr.min()}"
        )
    scalar = np.ndim(a) == 0
    return np.atleast_1d(arr), scalar


def phi0(a):
    """exp(-a) for a >= 0; scalar in, scalar out, elementwise on arrays."""
    arr, scalar = _checked_argument(a)
    out = np.exp(-arr)
    return float(out[0]) if scalar else out


def phi1(a):
    """(1 - exp(-a))/a with the limit 1 at a = 0."""
    arr, scalar = _checked_argument(a)
    out = np.empty_like(arr)
    small = arr < PHI_SERIES_CUTOFF
    out[small] = _phi_series(arr[small], 1)
    big = ~small
    out[big] = -np.expm1(-arr[big]) / arr[big]
    return float(out[0]) if scalar else out


def phi2(a):
    """(exp(-a) - 1 + a)/a^2 with the limit 1/2 at a = 0."""
    arr, scalar = _checked_argument(a)
    out = np.empty_like(arr)
    small = arr < PHI_SERIES_CUTOFF
    out[small] = _phi_series(arr[small], 2)
    big = ~small
    ab = arr[big]
    out[big] = (np.expm1(-ab) + ab) / (ab * ab)
    return float(out[0]) if scalar else out


@lru_cache(maxsize=16)
def _symbol_cached(M: int, L: float) -> Array:
    h = L / M
    s = np.sin(np.pi * np.arange(M) / M) ** 2
    d = -(4.0 / (h * h)) * (s[:, None] + s[None, :])
    d[0, 0] = 0.0
    d.flags.writeable = False
    return d


def laplace_symbol(grid: Grid) -> Array:
    """DFT eigenvalues of the five-point Laplacian.

    d[k, l] = -(4/h^2)(sin^2(pi k/M) + sin^2(pi l/M)); all entries <= 0 and
    only the (0, 0) mode is zero.  The returned array is cached and
    read-only.
    """
    return _symbol_cached(grid.M, grid.L)


def operator_eigenvalues(params: ModelParams, symbol: Array | None = None) -> Array:
    """Per-mode eigenvalues eps^2 d^2 - kappa d + sigma >= sigma > 0."""
    d = laplace_symbol(params.grid()) if symbol is None else np.asarray(symbol)
    return params.epsilon**2 * d * d - params.kappa * d + params.sigma


@dataclass(frozen=True)
class PhiTable:
    """Per-mode phi kernels evaluated at tau * ell, ready for apply_phi.

    ell holds the eigenvalues of the stiff linear operator; phi1m2 is the
    entrywise difference phi1 - phi2 used by the second-order predictor.
    """

    tau: float
    ell: Array
    phi0: Array
    phi1: Array
    phi2: Array
    phi1m2: Array


def build_phi_table(params: ModelParams, symbol: Array | None = None) -> PhiTable:
    ell = operator_eigenvalues(params, symbol)
    a = params.tau * ell
    p0, p1, p2 = phi0(a), phi1(a), phi2(a)
    return PhiTable(tau=params.tau, ell=ell, phi0=p0, phi1=p1, phi2=p2, phi1m2=p1 - p2)


def apply_phi(v: Array, column: Array) -> Array:
    """Apply a diagonal-in-Fourier operator: IDFT(column * DFT(v)).

    column is one per-mode real table (e.g. a PhiTable column).  A table
    symmetric under (k, l) -> (M-k, M-l) maps real fields to real fields; the
    roundoff imaginary residue is checked against 1e-11 (relative to the
    output magnitude for large fields) and discarded.
    """
    v = np.asarray(v, dtype=float)
    column = np.asarray(column, dtype=float)
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise ValueError(f"expected a square field, got shape {v.shape}")
    if column.shape != v.shape:
        raise ValueError(
            f"table shape {column.shape} does not match field shape {v.shape}"
        )
    out = np.fft.ifft2(column * np.fft.fft2(v))
    real = np.ascontiguousarray(out.real)
    residue = float(np.max(np.abs(out.imag)))
    if residue > 1e-11 * max(1.0, float(np.max(np.abs(real)))):
        raise ValueError(
            f"imaginary residue {residue:.3e} after inverse transform; "
            "table is not symmetric under mode negation"
        )
    return real


def _require_inside_bound(u: Array, limit: float, strict: bool) -> None:
    worst = np.unravel_index(np.argmax(np.abs(u)), u.shape)
    value = u[worst]
    if abs(value) > limit or (strict and abs(value) == limit):
        cmp = ">=" if strict else ">"
        raise BoundViolationError(
            f"|u| {cmp} {limit} at index {tuple(int(k) for k in worst)}: u = {value!r}"
        )


def nonlinear_F(u: Array, params: ModelParams) -> Array:
    """Stabilized nonlinear right-hand side.

    (theta/2) Lap_h[ln(1+u) - ln(1-u)] - (theta_c + kappa) Lap_h u
    + sigma * mean(u), requiring |u| < 1 strictly for the logarithms.
    """
    grid = params.grid()
    u = grid.check(u)
    _require_inside_bound(u, 1.0, strict=True)
    chem = 0.5 * params.theta * (np.log1p(u) - np.log1p(-u))
    chem -= (params.theta_c + params.kappa) * u
    return grid.laplace(chem) + params.sigma * grid.mean(u)


def energy(u: Array, params: ModelParams) -> float:
    """Discrete free energy.

    Entropy and quadratic bulk terms integrated with weight h^2, forward
    gradient for the interface term, and the nonlocal term evaluated
    spectrally as sum_{(k,l) != (0,0)} |u_hat|^2 / (-d_kl) scaled per the
    package Parseval convention (the zero mode carries u - mean(u) = 0, so
    excluding it realizes the inverse Laplacian on mean-free fields).
    Entries at exactly +-1 are admitted through the x ln x -> 0 limit.
    """
    grid = params.grid()
    u = grid.check(u)
    _require_inside_bound(u, 1.0, strict=False)

    up, um = 1.0 + u, 1.0 - u
    entropy = xlogy(up, up) + xlogy(um, um)
    bulk = grid.h**2 * float(
        np.sum(0.5 * params.theta * entropy - 0.5 * params.theta_c * u * u)
    )

    gx, gy = grid.gradient(u)
    interface = 0.5 * params.epsilon**2 * (grid.inner(gx, gx) + grid.inner(gy, gy))

    d = laplace_symbol(grid)
    power = np.abs(np.fft.fft2(u)) ** 2
    power = power.copy()
    power[0, 0] = 0.0
    ratio = power / np.where(d < 0, -d, 1.0)
    nonlocal_sq = (grid.L**2 / grid.M**4) * float(np.sum(ratio))

    return bulk + interface + 0.5 * params.sigma * nonlocal_sq
