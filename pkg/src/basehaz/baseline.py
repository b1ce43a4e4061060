"""Cumulative-hazard and kernel baseline-hazard estimators on [0, tau].

The cumulative estimator is a step function with one jump of size
1 / (n S_n(X_i)) per event; the kernel estimator smooths those increments.
Double smoothing re-convolves a kernel estimate with a second bandwidth,
which the bandwidth-comparison criterion requires.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .data import SurvivalSample, risk_weighted_sums
from .kernels import KernelSpec

#: default number of evaluation-grid points on [0, tau]
DEFAULT_GRID_POINTS = 512
#: relative stopping tolerance of the kernel-convolution quadrature
CONV_REL_TOL = 1e-8
#: resolution of the cached convolution lag table (odd, so lag 0 is a node)
_CONV_TABLE_POINTS = 4097
_MAX_PANELS = 1 << 14


def evaluation_grid(tau: float, points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """Uniform grid of ``points`` values from 0 to tau inclusive."""
    if points < 2:
        raise ValueError("need at least two grid points")
    if tau <= 0:
        raise ValueError("tau must be positive")
    return np.linspace(0.0, float(tau), int(points))


@dataclass(frozen=True)
class JumpRepresentation:
    """Event times in [0, tau] and their increments 1 / (n S_n(u_k)).

    Ties produce repeated times with identical weights; an increment is set
    to zero if its risk set is empty (impossible under the >= convention but
    kept as written).
    """

    jump_times: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if self.jump_times.shape != self.weights.shape:
            raise ValueError("jump_times and weights must have equal length")
        if np.any(self.weights < 0):
            raise ValueError("weights must be non-negative")


@dataclass(frozen=True)
class CurveEstimate:
    """A curve tabulated on a strictly increasing grid over [0, tau].

    ``bandwidth`` is set for kernel estimates and absent (None) for
    cumulative ones. Kernel estimates keep their kernel and jump
    representation attached so they can be re-smoothed.
    """

    grid: np.ndarray
    values: np.ndarray
    bandwidth: float | None = None
    kernel: KernelSpec | None = None
    jumps: JumpRepresentation | None = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape:
            raise ValueError("grid and values must be 1-d arrays of equal length")
        if grid.size < 2 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing with >= 2 points")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)


def jump_representation(sample: SurvivalSample, beta) -> JumpRepresentation:
    """Breslow increments at the event times of the sample, sorted ascending."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (sample.p,):
        raise ValueError(f"beta must have length {sample.p}")
    keep = (sample.events == 1) & (sample.times <= sample.tau)
    u = np.sort(sample.times[keep], kind="stable")
    eta = sample.covariates @ beta
    denom = risk_weighted_sums(sample.times, np.exp(eta), u)
    at_risk = risk_weighted_sums(sample.times, np.ones(sample.n), u)
    with np.errstate(divide="ignore"):
        weights = np.where(at_risk > 0, 1.0 / denom, 0.0)
    return JumpRepresentation(u, weights)


def breslow(sample: SurvivalSample, beta, grid_points: int = DEFAULT_GRID_POINTS) -> CurveEstimate:
    """Step-function estimate of the cumulative baseline hazard on [0, tau].

    Tabulated on the uniform grid joined with the jump times, so every jump
    is visible in the output.
    """
    jumps = jump_representation(sample, beta)
    grid = np.union1d(evaluation_grid(sample.tau, grid_points), jumps.jump_times)
    idx = np.searchsorted(jumps.jump_times, grid, side="right")
    cum = np.concatenate([[0.0], np.cumsum(jumps.weights)])
    return CurveEstimate(grid, cum[idx], bandwidth=None, kernel=None, jumps=jumps)


def _kernel_values(jumps: JumpRepresentation, kernel: KernelSpec, h: float, grid: np.ndarray) -> np.ndarray:
    if jumps.jump_times.size == 0:
        return np.zeros(grid.size)
    lags = grid[:, None] - jumps.jump_times[None, :]
    return (kernel.evaluate(lags / h) @ jumps.weights) / h


def kernel_baseline(
    sample: SurvivalSample,
    beta,
    kernel: KernelSpec,
    h: float,
    grid: np.ndarray | None = None,
    grid_points: int = DEFAULT_GRID_POINTS,
) -> CurveEstimate:
    """Kernel estimate of the baseline hazard, (1/h) sum_k w_k K((t - u_k)/h).

    No boundary correction is applied at 0 or tau. The result keeps its jump
    representation and kernel attached for :func:`double_smooth`.
    """
    if h <= 0:
        raise ValueError("bandwidth h must be positive")
    if grid is None:
        grid = evaluation_grid(sample.tau, grid_points)
    else:
        grid = np.asarray(grid, dtype=float)
        if grid.size and (grid.min() < 0 or grid.max() > sample.tau):
            raise ValueError("evaluation grid must lie inside [0, tau]")
    jumps = jump_representation(sample, beta)
    values = _kernel_values(jumps, kernel, float(h), grid)
    return CurveEstimate(grid, values, bandwidth=float(h), kernel=kernel, jumps=jumps)


def _composite_simpson(outer: KernelSpec, h_outer: float, inner: KernelSpec, h_inner: float,
                       lags: np.ndarray, lo: np.ndarray, hi: np.ndarray, panels: int) -> np.ndarray:
    m = 2 * panels
    frac = np.arange(m + 1) / m
    y = lo[:, None] + (hi - lo)[:, None] * frac[None, :]
    f = outer.evaluate((lags[:, None] - y) / h_outer) * inner.evaluate(y / h_inner)
    w = np.ones(m + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return (f @ w) * (hi - lo) / (3.0 * m * h_outer * h_inner)


def convolve_kernels(outer: KernelSpec, h_outer: float, inner: KernelSpec, h_inner: float,
                     lags, rel_tol: float = CONV_REL_TOL) -> np.ndarray:
    """Pointwise convolution (K_{h_outer} * K_{h_inner})(lag) for compact kernels.

    Composite-Simpson quadrature on the overlap of the two supports, with the
    panel count doubled until successive estimates differ by less than
    ``rel_tol`` relatively (per lag).
    """
    if h_outer <= 0 or h_inner <= 0:
        raise ValueError("bandwidths must be positive")
    r_outer = h_outer * outer.support_radius
    r_inner = h_inner * inner.support_radius
    if not (np.isfinite(r_outer) and np.isfinite(r_inner)):
        raise ValueError("convolution requires compactly supported kernels")
    x = np.atleast_1d(np.asarray(lags, dtype=float))
    lo = np.maximum(-r_inner, x - r_outer)
    hi = np.minimum(r_inner, x + r_outer)
    out = np.zeros(x.shape)
    active = np.nonzero(hi > lo)[0]
    if active.size == 0:
        return out if np.ndim(lags) else float(out[0])

    xa, la, ha = x[active], lo[active], hi[active]
    panels = 8
    vals = _composite_simpson(outer, h_outer, inner, h_inner, xa, la, ha, panels)
    pending = np.arange(active.size)
    while pending.size and panels < _MAX_PANELS:
        panels *= 2
        finer = _composite_simpson(
            outer, h_outer, inner, h_inner, xa[pending], la[pending], ha[pending], panels
        )
        settled = np.abs(finer - vals[pending]) <= rel_tol * np.abs(finer)
        vals[pending] = finer
        pending = pending[~settled]
    out[active] = vals
    return out if np.ndim(lags) else float(out[0])


@functools.lru_cache(maxsize=512)
def _convolution_table(outer: KernelSpec, h_outer: float, inner: KernelSpec, h_inner: float):
    reach = h_outer * outer.support_radius + h_inner * inner.support_radius
    lag_grid = np.linspace(-reach, reach, _CONV_TABLE_POINTS)
    table = convolve_kernels(outer, h_outer, inner, h_inner, lag_grid)
    lag_grid.setflags(write=False)
    table.setflags(write=False)
    return lag_grid, table


def double_smooth(est: CurveEstimate, kernel: KernelSpec, h_prime: float) -> CurveEstimate:
    """Re-smooth a kernel estimate: K_{h'} convolved with the h-estimate.

    Evaluates sum_k w_k (K_{h'} * K_h)(t - u_k) over the estimate's grid. The
    convolution is taken over the whole real line; the tabulation stays on
    the original grid inside [0, tau]. The kernel-kernel convolution comes
    from a dense cached lag table (lag 0 is a table node, hence exact up to
    quadrature) with linear interpolation in between.
    """
    if h_prime <= 0:
        raise ValueError("bandwidth h' must be positive")
    if est.jumps is None or est.kernel is None or est.bandwidth is None:
        raise ValueError("estimate must carry its kernel, bandwidth and jump representation")
    jumps = est.jumps
    if jumps.jump_times.size == 0:
        return CurveEstimate(est.grid, np.zeros(est.grid.size), bandwidth=est.bandwidth)
    lag_grid, table = _convolution_table(kernel, float(h_prime), est.kernel, est.bandwidth)
    lags = est.grid[:, None] - jumps.jump_times[None, :]
    conv = np.interp(lags.ravel(), lag_grid, table, left=0.0, right=0.0).reshape(lags.shape)
    return CurveEstimate(est.grid, conv @ jumps.weights, bandwidth=est.bandwidth)


def l2_dist_sq(a: CurveEstimate, b: CurveEstimate) -> float:
    """Squared L2 distance integral of (a - b)^2 over [0, tau], trapezoid rule."""
    if a.grid.shape != b.grid.shape or not np.array_equal(a.grid, b.grid):
        raise ValueError("curve estimates must share the same grid")
    diff = a.values - b.values
    return float(np.trapezoid(diff * diff, a.grid))
