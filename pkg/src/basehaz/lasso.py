"""L1-penalized Cox partial likelihood: objective, solver, CV and screening.

The solver follows the standard working-response scheme: an outer loop
re-quadratizes the partial likelihood in the linear predictor (diagonal
curvature), an inner cyclic coordinate-descent loop solves the penalized
weighted least-squares subproblem with soft thresholding. Descent of the
penalized objective is enforced by step halving toward the previous iterate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .data import SurvivalSample, risk_weighted_sums

#: curvature below this is treated as zero when forming coordinate updates
_CURVATURE_FLOOR = 1e-300


@dataclass(frozen=True)
class OptimizerOptions:
    """Solver controls.

    ``tol`` bounds the max coordinate change declaring outer convergence;
    ``max_iter`` bounds the total number of coordinate-descent sweeps.
    ``standardize`` rescales covariate columns to unit standard deviation
    before penalizing and returns coefficients on the original scale.
    """

    tol: float = 1e-7
    max_iter: int = 10_000
    standardize: bool = False


@dataclass(frozen=True)
class CoxFit:
    """A fitted regression parameter with its penalty level and diagnostics."""

    beta: np.ndarray
    gamma_n: float
    radius: float
    neg_loglik: float
    iterations: int
    converged: bool

    def to_dict(self) -> dict:
        return {
            "beta": [float(b) for b in self.beta],
            "gamma_n": self.gamma_n,
            "radius": self.radius,
            "neg_loglik": self.neg_loglik,
            "iterations": self.iterations,
            "converged": self.converged,
        }


@dataclass(frozen=True)
class ScreeningResult:
    """Per-covariate score statistics with the threshold that was applied.

    ``kept`` holds exactly the indices j with scores[j] > threshold.
    """

    scores: np.ndarray
    threshold: float
    kept: np.ndarray


def _event_mask(sample: SurvivalSample) -> np.ndarray:
    return (sample.events == 1) & (sample.times <= sample.tau)


def partial_loglik(sample: SurvivalSample, beta) -> float:
    """Cox partial log-likelihood (1/n) sum_events [beta.Z_i - log S_n(X_i)].

    Uses the normalized risk sum S_n; tied event times share the same
    denominator. Returns 0 for a sample without events (empty sum).
    """
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (sample.p,):
        raise ValueError(f"beta must have length {sample.p}")
    if not np.all(np.isfinite(beta)):
        raise ValueError("beta must be finite")
    mask = _event_mask(sample)
    if not mask.any():
        return 0.0
    eta = sample.covariates @ beta
    s = risk_weighted_sums(sample.times, np.exp(eta), sample.times[mask]) / sample.n
    if np.any(s <= 0) or not np.all(np.isfinite(s)):
        raise ValueError("degenerate risk sum at an event time")
    return float((eta[mask].sum() - np.log(s).sum()) / sample.n)


def partial_loglik_gradient(sample: SurvivalSample, beta) -> np.ndarray:
    """Analytic gradient of :func:`partial_loglik` with respect to beta."""
    beta = np.asarray(beta, dtype=float)
    mask = _event_mask(sample)
    if not mask.any():
        return np.zeros(sample.p)
    eta = sample.covariates @ beta
    expeta = np.exp(eta)
    event_times = sample.times[mask]
    s0 = risk_weighted_sums(sample.times, expeta, event_times)
    s1 = risk_weighted_sums(sample.times, expeta[:, None] * sample.covariates, event_times)
    return (sample.covariates[mask].sum(axis=0) - (s1 / s0[:, None]).sum(axis=0)) / sample.n


def _linear_predictor_derivatives(sample: SurvivalSample, eta: np.ndarray):
    """Value, gradient and diagonal curvature of the negative partial
    log-likelihood as a function of the linear predictor eta."""
    mask = _event_mask(sample)
    n = sample.n
    expeta = np.exp(eta)
    if not mask.any():
        return 0.0, np.zeros(n), np.zeros(n)
    event_times = np.sort(sample.times[mask], kind="stable")
    risk = risk_weighted_sums(sample.times, expeta, event_times)
    if np.any(risk <= 0) or not np.all(np.isfinite(risk)):
        raise ValueError("degenerate risk sum at an event time")
    # cumulative 1/R and 1/R^2 over events with X_i <= t
    inv = 1.0 / risk
    cum1 = np.concatenate([[0.0], np.cumsum(inv)])
    cum2 = np.concatenate([[0.0], np.cumsum(inv * inv)])
    pos = np.searchsorted(event_times, sample.times, side="right")
    b = cum1[pos]
    d = cum2[pos]
    value = -(eta[mask].sum() - np.log(risk / n).sum()) / n
    grad = (expeta * b - mask.astype(float)) / n
    curv = (expeta * b - expeta * expeta * d) / n
    return value, grad, np.maximum(curv, 0.0)


def _soft(z: float, threshold: float) -> float:
    if z > threshold:
        return z - threshold
    if z < -threshold:
        return z + threshold
    return 0.0


def project_l1_ball(v: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection of v onto the L1 ball of the given radius."""
    if not np.isfinite(radius):
        return v
    if np.abs(v).sum() <= radius:
        return v
    mags = np.sort(np.abs(v))[::-1]
    css = np.cumsum(mags)
    ranks = np.arange(1, v.size + 1)
    rho = np.nonzero(mags > (css - radius) / ranks)[0][-1]
    theta = (css[rho] - radius) / (rho + 1)
    return np.sign(v) * np.maximum(np.abs(v) - theta, 0.0)


def _cd_sweeps(covariates, beta, residual, curv, gamma, tol, budget):
    """Cyclic coordinate descent on the quadratic model; mutates beta and
    residual (= curv * working residual) in place. Returns sweeps used."""
    denom = curv @ (covariates * covariates)
    sweeps = 0
    while sweeps < budget:
        sweeps += 1
        delta_max = 0.0
        for j in range(beta.size):
            if denom[j] <= _CURVATURE_FLOOR:
                continue
            num = covariates[:, j] @ residual + denom[j] * beta[j]
            new = _soft(num, gamma) / denom[j]
            step = new - beta[j]
            if step != 0.0:
                residual -= curv * covariates[:, j] * step
                beta[j] = new
            delta_max = max(delta_max, abs(step))
        if delta_max < tol:
            break
    return sweeps


def fit_lasso(
    sample: SurvivalSample,
    gamma_n: float,
    radius: float = np.inf,
    opts: OptimizerOptions | None = None,
    beta_start=None,
) -> CoxFit:
    """Minimize -partial_loglik + gamma_n * |beta|_1 over the L1 ball B(0, radius).

    If the returned point leaves the ball (only possible with a finite
    radius) it is projected onto it and re-polished with one more outer pass.
    ``iterations`` counts coordinate-descent sweeps.
    """
    opts = opts or OptimizerOptions()
    if gamma_n < 0:
        raise ValueError("gamma_n must be non-negative")
    if radius <= 0:
        raise ValueError("radius must be positive (np.inf allowed)")
    if opts.standardize and np.isfinite(radius):
        raise ValueError("standardize cannot be combined with a finite radius")

    covariates = sample.covariates
    scale = np.ones(sample.p)
    if opts.standardize:
        scale = covariates.std(axis=0)
        scale[scale == 0] = 1.0
        covariates = covariates / scale

    beta = np.zeros(sample.p) if beta_start is None else np.asarray(beta_start, dtype=float).copy()
    sweeps_used = 0
    converged = False

    def objective(b):
        value, grad, curv = _linear_predictor_derivatives(sample, covariates @ b)
        if not np.isfinite(value):
            raise ValueError(f"non-finite partial likelihood at iterate {b}")
        return value + gamma_n * np.abs(b).sum(), grad, curv

    obj, grad, curv = objective(beta)
    while sweeps_used < opts.max_iter:
        previous = beta.copy()
        # residual = curv * (working response - fitted); equals -grad at the
        # expansion point, which avoids dividing by vanishing curvature
        residual = -grad.copy()
        sweeps_used += _cd_sweeps(
            covariates, beta, residual, curv, gamma_n,
            0.1 * opts.tol, opts.max_iter - sweeps_used,
        )
        new_obj, new_grad, new_curv = objective(beta)
        halvings = 0
        while new_obj > obj + 1e-14 and halvings < 30:
            beta = 0.5 * (beta + previous)
            new_obj, new_grad, new_curv = objective(beta)
            halvings += 1
        if new_obj > obj + 1e-14:
            beta = previous
            converged = True
            break
        obj, grad, curv = new_obj, new_grad, new_curv
        if np.max(np.abs(beta - previous)) < opts.tol:
            converged = True
            break

    if np.isfinite(radius) and np.abs(beta).sum() > radius:
        beta = project_l1_ball(beta, radius)
        obj, grad, curv = objective(beta)
        residual = -grad.copy()
        sweeps_used += _cd_sweeps(
            covariates, beta, residual, curv, gamma_n, 0.1 * opts.tol, opts.max_iter
        )
        beta = project_l1_ball(beta, radius)

    beta_out = beta / scale
    return CoxFit(
        beta=beta_out,
        gamma_n=float(gamma_n),
        radius=float(radius),
        neg_loglik=-partial_loglik(sample, beta_out),
        iterations=sweeps_used,
        converged=converged,
    )


def kkt_residual(sample: SurvivalSample, beta, gamma_n: float) -> float:
    """Max violation of the subgradient optimality conditions at beta."""
    grad = -partial_loglik_gradient(sample, beta)
    beta = np.asarray(beta, dtype=float)
    active = beta != 0
    res_active = np.abs(grad[active] + gamma_n * np.sign(beta[active]))
    res_zero = np.maximum(np.abs(grad[~active]) - gamma_n, 0.0)
    pieces = np.concatenate([res_active, res_zero])
    return float(pieces.max()) if pieces.size else 0.0


def default_gamma_grid(sample: SurvivalSample, size: int = 20, min_ratio: float = 1e-3) -> np.ndarray:
    """Log-spaced decreasing penalty grid from the smallest all-zero gamma."""
    gamma_max = float(np.abs(partial_loglik_gradient(sample, np.zeros(sample.p))).max())
    if gamma_max <= 0:
        raise ValueError("score at zero vanishes; cannot build a penalty grid")
    return np.geomspace(gamma_max, gamma_max * min_ratio, size)


def select_gamma(sample: SurvivalSample, grid, folds: int = 5, seed=0) -> float:
    """Penalty level maximizing the mean out-of-fold partial log-likelihood.

    Folds are stratified on the event indicator and fixed by ``seed``. Folds
    whose training or validation part has no events are dropped with a
    warning. Ties favor the larger gamma (the grid must be strictly
    decreasing).
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("gamma grid is empty")
    if np.any(np.diff(grid) >= 0):
        raise ValueError("gamma grid must be strictly decreasing")
    if folds < 2:
        raise ValueError("need at least two folds")

    rng = np.random.default_rng(seed)
    assignment = np.empty(sample.n, dtype=int)
    for group in (np.nonzero(sample.events == 1)[0], np.nonzero(sample.events == 0)[0]):
        shuffled = rng.permutation(group)
        assignment[shuffled] = np.arange(shuffled.size) % folds

    scores = []
    for fold in range(folds):
        test_idx = np.nonzero(assignment == fold)[0]
        train_idx = np.nonzero(assignment != fold)[0]
        train = sample.subset(train_idx)
        test = sample.subset(test_idx)
        if not _event_mask(train).any() or not _event_mask(test).any():
            warnings.warn(f"fold {fold} has no events on one side; dropped")
            continue
        row = np.empty(grid.size)
        beta = None
        for g, gamma in enumerate(grid):
            fit = fit_lasso(train, gamma, beta_start=beta)
            beta = fit.beta
            row[g] = partial_loglik(test, beta)
        scores.append(row)
    if not scores:
        raise ValueError("every fold was dropped; cannot cross-validate gamma")
    mean_scores = np.mean(scores, axis=0)
    return float(grid[int(np.argmax(mean_scores))])


def score_screen(
    sample: SurvivalSample, alpha_level: float = 0.05, top_k: int | None = None
) -> ScreeningResult:
    """Univariate Cox score statistics at beta = 0 with a chi-squared cut.

    In quantile mode the threshold is the (1 - alpha_level) quantile of
    chi-squared with one degree of freedom. In top-k mode the threshold is
    tuned so that exactly k covariates exceed it; exact ties at the cutoff
    keep every tied covariate, and zero-score covariates are never kept.
    """
    mask = _event_mask(sample)
    if not mask.any():
        raise ValueError("screening needs at least one event")
    z = sample.covariates
    event_times = sample.times[mask]
    ones = np.ones(sample.n)
    at_risk = risk_weighted_sums(sample.times, ones, event_times)
    sum_z = risk_weighted_sums(sample.times, z, event_times)
    sum_z2 = risk_weighted_sums(sample.times, z * z, event_times)
    mean_z = sum_z / at_risk[:, None]
    score = z[mask].sum(axis=0) - mean_z.sum(axis=0)
    info = (sum_z2 / at_risk[:, None] - mean_z * mean_z).sum(axis=0)

    degenerate = z.std(axis=0) == 0
    if degenerate.any():
        warnings.warn(f"{int(degenerate.sum())} zero-variance covariate(s); score set to 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        stats = np.where(info > 0, score * score / info, 0.0)

    if top_k is None:
        if not 0 < alpha_level < 1:
            raise ValueError("alpha_level must be in (0, 1)")
        threshold = float(chi2.ppf(1.0 - alpha_level, df=1))
    else:
        if top_k < 1:
            raise ValueError("top_k must be >= 1")
        positive = int((stats > 0).sum())
        k = min(top_k, positive)
        if k < top_k:
            warnings.warn(f"only {positive} covariates have positive scores; keeping {k}")
        ordered = np.sort(stats)[::-1]
        kth = ordered[k - 1] if k else 0.0
        nxt = ordered[k] if k < stats.size else 0.0
        if k == 0:
            threshold = 1.0
        elif kth > nxt:
            threshold = 0.5 * (kth + nxt)
        else:
            threshold = float(np.nextafter(kth, 0.0))
    kept = np.nonzero(stats > threshold)[0]
    return ScreeningResult(scores=stats, threshold=float(threshold), kept=kept)
