"""Sub-Gaussian SaS vectors (X, Y) = sqrt(A) (G1, G2).

A is the positive alpha/2-stable subordinator with E[exp(-uA)] = exp(-u**(alpha/2))
and (G1, G2) is a centred Gaussian pair with standard deviations sigma1, sigma2
and correlation rho. Under this normalization X ~ S(alpha, sigma1/sqrt(2)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from .linear_mix import CLOSED_FORM, INTERIOR, NUMERIC, ModelError, SlopeResult
from .stable_core import SubordinatorParams, _check_count, positive_stable_sample

MIN_ACCEPT_RATE = 1e-4
TRIM_LEVELS = (0.0, 0.001, 0.01)


@dataclass(frozen=True)
class SubGaussianModel:
    alpha: float
    sigma1: float
    sigma2: float
    rho: float
    beta: float = field(init=False)
    tau2: float = field(init=False)

    def __post_init__(self):
        vals = (self.alpha, self.sigma1, self.sigma2, self.rho)
        if not all(np.isfinite(v) for v in vals):
            raise ModelError("model parameters must be finite")
        if not 0 < self.alpha < 2:
            raise ModelError(f"alpha must lie in (0, 2), got {self.alpha}")
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise ModelError("sigma1 and sigma2 must be > 0")
        if not -1 < self.rho < 1:
            raise ModelError(f"|rho| must be < 1 for a positive-definite covariance, got {self.rho}")
        object.__setattr__(self, "beta", self.rho * self.sigma1 / self.sigma2)
        object.__setattr__(self, "tau2", self.sigma1**2 * (1 - self.rho**2))
        if not self.tau2 > 0:
            raise ModelError("residual variance sigma1^2 (1 - rho^2) underflows to 0")

    @property
    def gammaX(self) -> float:
        return self.sigma1 / math.sqrt(2)

    @property
    def gammaY(self) -> float:
        return self.sigma2 / math.sqrt(2)

    @property
    def covariance(self) -> np.ndarray:
        c = self.rho * self.sigma1 * self.sigma2
        return np.array([[self.sigma1**2, c], [c, self.sigma2**2]])

    def to_dict(self) -> dict:
        return {"model": "sub-gaussian", "sigmas": [self.sigma1, self.sigma2], "rho": self.rho, "alpha": self.alpha}


def build_subgaussian(alpha, sigma1, sigma2, rho) -> SubGaussianModel:
    return SubGaussianModel(float(alpha), float(sigma1), float(sigma2), float(rho))


def sample_subgaussian(model: SubGaussianModel, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` draws of (X, Y) as an ``(n, 2)`` array.

    Uses the Cholesky factor of the covariance: G1 = s1 u, G2 = s2 (rho u + sqrt(1-rho^2) v).
    """
    n = _check_count(n)
    a = positive_stable_sample(SubordinatorParams(model.alpha), rng, n)
    u = rng.standard_normal(n)
    v = rng.standard_normal(n)
    g1 = model.sigma1 * u
    g2 = model.sigma2 * (model.rho * u + math.sqrt(1 - model.rho**2) * v)
    r = np.sqrt(a)
    return np.column_stack([r * g1, r * g2])


def conditional_mean_slope_sg(model: SubGaussianModel) -> float:
    """E[X | Y = y] = beta y with beta = rho sigma1 / sigma2."""
    return model.rho * model.sigma1 / model.sigma2


def gaussian_error_variance(model: SubGaussianModel, b):
    """Var(b G2 - G1) = b^2 s2^2 + s1^2 - 2 b rho s1 s2."""
    b = np.asarray(b, dtype=float)
    out = b**2 * model.sigma2**2 + model.sigma1**2 - 2 * b * model.rho * model.sigma1 * model.sigma2
    return out if out.ndim else float(out)


def error_scale_sg(model: SubGaussianModel, b):
    """Dispersion of b Y - X, namely sqrt(Var(b G2 - G1) / 2)."""
    out = np.sqrt(np.asarray(gaussian_error_variance(model, b)) / 2)
    return out if out.ndim else float(out)


def error_scale_sg_display(model: SubGaussianModel, b):
    """The alternative bookkeeping (Var(b G2 - G1) gamma_A / 2) ** (alpha/2).

    gamma_A is the subordinator dispersion cos(pi alpha/4)**(2/alpha). This is
    a monotone transform of :func:`error_scale_sg`, so it has the same
    minimizer but not the same value; kept for side-by-side reporting.
    """
    gam_a = SubordinatorParams(model.alpha).dispersion
    v = np.asarray(gaussian_error_variance(model, b)) * gam_a / 2
    out = v ** (model.alpha / 2)
    return out if out.ndim else float(out)


def optimal_slope_sg(model: SubGaussianModel) -> SlopeResult:
    """Dispersion-optimal coefficient: the minimizer of Var(b G2 - G1), which is beta."""
    return SlopeResult(model.rho * model.sigma1 / model.sigma2, INTERIOR, CLOSED_FORM)


def minimize_scale_numeric_sg(model: SubGaussianModel, objective=None, tol: float = 1e-12) -> SlopeResult:
    """Bounded Brent search for the minimizer of ``objective`` (default: Var(b G2 - G1)).

    The bracket is beta +/- (1 + |beta|), wide enough to hold the minimizer of
    any monotone transform of the Gaussian error variance.
    """
    f = objective or (lambda b: gaussian_error_variance(model, b))
    beta = conditional_mean_slope_sg(model)
    pad = 1 + abs(beta)
    res = optimize.minimize_scalar(f, bounds=(beta - pad, beta + pad), method="bounded", options={"xatol": tol})
    if not res.success:
        raise RuntimeError(f"bounded search failed: {res.message}")
    return SlopeResult(float(res.x), INTERIOR, NUMERIC)


def map_estimate(model: SubGaussianModel, y):
    """Posterior mode of X given Y = y. Every Gaussian component of the A-mixture peaks at beta y."""
    y = np.asarray(y, dtype=float)
    out = (model.rho * model.sigma1 / model.sigma2) * y
    return out if out.ndim else float(out)


class AcceptanceRateError(RuntimeError):
    pass


def conditional_residual_samples(
    model: SubGaussianModel,
    y: float,
    bandwidth: float,
    rng: np.random.Generator,
    n_target: int,
    chunk: int = 1 << 17,
) -> np.ndarray:
    """Residuals X - beta y of joint draws whose Y falls in [y - bandwidth, y + bandwidth].

    Chunks come from child generators spawned from ``rng`` in a fixed order,
    so the result is reproducible. Raises :class:`AcceptanceRateError` once the
    running acceptance rate is below 1e-4.
    """
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    if n_target < 1000:
        raise ValueError("n_target must be >= 1000")
    beta = conditional_mean_slope_sg(model)
    kept: list[np.ndarray] = []
    n_kept = 0
    drawn = 0
    while n_kept < n_target:
        (child,) = rng.spawn(1)
        xy = sample_subgaussian(model, child, chunk)
        drawn += chunk
        sel = np.abs(xy[:, 1] - y) <= bandwidth
        kept.append(xy[sel, 0] - beta * y)
        n_kept += int(sel.sum())
        if n_kept / drawn < MIN_ACCEPT_RATE:
            raise AcceptanceRateError(
                f"acceptance rate {n_kept / drawn:.2e} < {MIN_ACCEPT_RATE:g}: bandwidth {bandwidth:g} too small"
            )
    return np.concatenate(kept)[:n_target]


@dataclass(frozen=True)
class IntegrabilityCheck:
    trimmed_means: dict
    se: float
    symmetry_pvalue: float
    passed: bool


def residual_integrability_check(residuals, rng: np.random.Generator | None = None) -> IntegrabilityCheck:
    """Finiteness proxy for the conditional residual.

    Trimmed means at 0, 0.1% and 1% must agree within three standard errors
    of the untrimmed mean. Symmetry is tested with a two-sample KS test of the
    residuals against an independently sign-flipped copy.
    """
    r = np.asarray(residuals, dtype=float)
    se = float(r.std(ddof=1) / math.sqrt(r.size))
    means = {lvl: float(stats.trim_mean(r, lvl)) for lvl in TRIM_LEVELS}
    vals = list(means.values())
    agree = max(vals) - min(vals) <= 3 * se
    rng = rng or np.random.default_rng(0)
    half = r.size // 2
    perm = rng.permutation(r.size)
    # disjoint halves so the two samples are independent
    pval = float(stats.ks_2samp(r[perm[:half]], -r[perm[half:]]).pvalue)
    return IntegrabilityCheck(means, se, pval, bool(agree and pval > 0.01))


def random_subgaussian(rng: np.random.Generator, alpha: float | None = None) -> SubGaussianModel:
    """alpha ~ U(0.1, 1.99), sigma_i ~ U(0.2, 5), rho ~ U(-0.99, 0.99)."""
    al = rng.uniform(0.1, 1.99) if alpha is None else alpha
    s1, s2 = rng.uniform(0.2, 5, size=2)
    return build_subgaussian(al, s1, s2, rng.uniform(-0.99, 0.99))
