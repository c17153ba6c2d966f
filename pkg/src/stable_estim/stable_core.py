"""Scalar symmetric alpha-stable primitives.

Dispersion is defined through the characteristic function
``phi(t) = exp(-gamma**alpha * |t|**alpha)`` everywhere in this package.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

#: magnitude below which a characteristic function is treated as zero
TRUNC_DECAY = 1e-16

#: fixed frequency grid of the empirical-CF regression, in standardized units
ECF_GRID = np.round(np.arange(1, 11) * 0.1, 10)


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested accuracy."""

    def __init__(self, what: str, abserr: float, message: str = ""):
        self.abserr = abserr
        super().__init__(f"{what}: quadrature did not converge (error estimate {abserr:.3g}) {message}".rstrip())


class DegenerateSampleError(ValueError):
    """Empirical characteristic function is unusable for a regression fit."""


def _check_alpha(alpha: float, upper_inclusive: bool = True) -> None:
    ok = 0 < alpha <= 2 if upper_inclusive else 0 < alpha < 2
    if not (np.isfinite(alpha) and ok):
        bound = "(0, 2]" if upper_inclusive else "(0, 2)"
        raise ValueError(f"alpha must lie in {bound}, got {alpha}")


@dataclass(frozen=True)
class StableParams:
    """Symmetric alpha-stable law S(alpha, gamma).

    ``alpha == 2`` is the Gaussian with variance ``2 * gamma**2``; it is
    admitted only as a verification limit.
    """

    alpha: float
    gamma: float = 1.0

    def __post_init__(self):
        _check_alpha(self.alpha)
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be positive and finite, got {self.gamma}")


@dataclass(frozen=True)
class SubordinatorParams:
    """Positive (alpha/2)-stable subordinator with Laplace transform exp(-u**(alpha/2))."""

    alpha: float

    def __post_init__(self):
        _check_alpha(self.alpha, upper_inclusive=False)

    @property
    def index(self) -> float:
        return self.alpha / 2

    @property
    def dispersion(self) -> float:
        """Scale in the totally-skewed S(alpha/2, sigma, 1, 0) convention: cos(pi*alpha/4)**(2/alpha)."""
        return math.cos(math.pi * self.alpha / 4) ** (2 / self.alpha)


def sas_cf(params: StableParams, t):
    """Characteristic function exp(-gamma^alpha |t|^alpha)."""
    t = np.asarray(t, dtype=float)
    out = np.exp(-((params.gamma * np.abs(t)) ** params.alpha))
    return out if out.ndim else float(out)


def _check_count(n: int) -> int:
    if int(n) != n or n < 1:
        raise ValueError(f"sample count must be a positive integer, got {n}")
    return int(n)


def sas_sample(params: StableParams, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` i.i.d. SaS variates by the Chambers-Mallows-Stuck transform.

    The symmetric form needs no special case: alpha = 1 reduces to tan(V)
    and alpha = 2 to 2 sin(V) sqrt(W).
    """
    n = _check_count(n)
    a = params.alpha
    v = rng.uniform(-np.pi / 2, np.pi / 2, size=n)
    w = rng.standard_exponential(size=n)
    with np.errstate(over="ignore", divide="ignore"):
        x = np.sin(a * v) / np.cos(v) ** (1 / a) * (np.cos((1 - a) * v) / w) ** ((1 - a) / a)
    return params.gamma * x


def positive_stable_sample(sub: SubordinatorParams, rng: np.random.Generator, n: int) -> np.ndarray:
    """Kanter's representation of the positive stable law with E[exp(-uA)] = exp(-u**(alpha/2)).

    With a = alpha/2, theta ~ U(0, pi) and W ~ Exp(1)::

        A = sin(a theta) / sin(theta)**(1/a) * (sin((1-a) theta) / W)**((1-a)/a)
    """
    n = _check_count(n)
    a = sub.index
    theta = np.pi * rng.uniform(size=n)
    w = rng.standard_exponential(size=n)
    # uniform() may return exactly 0; sin(0) would give 0/0
    theta = np.where(theta == 0.0, np.pi * 2.0**-53, theta)
    with np.errstate(over="ignore", divide="ignore", under="ignore"):
        return np.sin(a * theta) / np.sin(theta) ** (1 / a) * (np.sin((1 - a) * theta) / w) ** ((1 - a) / a)


def kanter_weight(theta, index: float):
    """Kanter's function K(theta) so that A = (K(theta)/W)**((1-a)/a)."""
    a = index
    theta = np.asarray(theta, dtype=float)
    return np.sin(a * theta) ** (a / (1 - a)) * np.sin((1 - a) * theta) / np.sin(theta) ** (1 / (1 - a))


def quad(func, lo, hi, *, what="integral", epsabs=1e-13, epsrel=1e-11, limit=2000, accept=1e-8, **kw):
    """``scipy.integrate.quad`` that raises :class:`QuadratureError` on real failures.

    QUADPACK flags round-off trouble even when the achieved error is tiny, so
    a flagged result is accepted when its error estimate is below ``accept``.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        res = integrate.quad(func, lo, hi, epsabs=epsabs, epsrel=epsrel, limit=limit, full_output=1, **kw)
    value, abserr = res[0], res[1]
    ier_msg = res[3] if len(res) > 3 else ""
    if not np.isfinite(value) or (ier_msg and abserr > max(accept, epsrel * abs(value))):
        raise QuadratureError(what, abserr, str(ier_msg).splitlines()[0] if ier_msg else "")
    return value, abserr


def cf_cutoff(scale_alpha: float, alpha: float, decay: float = TRUNC_DECAY) -> float:
    """Frequency T beyond which exp(-scale_alpha * T**alpha) < decay."""
    return (math.log(1 / decay) / scale_alpha) ** (1 / alpha)


@lru_cache(maxsize=65536)
def _standard_pdf(x: float, alpha: float, epsrel: float) -> float:
    # density of S(alpha, 1) at x >= 0: (1/pi) int_0^T exp(-u^alpha) cos(u x) du
    top = cf_cutoff(1.0, alpha)
    f = lambda u: math.exp(-(u**alpha))
    if x == 0.0:
        val, _ = quad(f, 0.0, top, what="sas_pdf", epsabs=1e-15, epsrel=epsrel)
    else:
        val, _ = quad(f, 0.0, top, what="sas_pdf", weight="cos", wvar=x, epsabs=1e-15, epsrel=epsrel)
    return max(val / math.pi, 0.0)


def sas_pdf(params: StableParams, x, epsrel: float = 1e-11):
    """Density by Fourier inversion of the characteristic function.

    Integrates ``(1/pi) int_0^T exp(-gamma^a t^a) cos(t x) dt`` with QUADPACK's
    oscillatory rule; T is where the integrand drops below 1e-16. Accepts
    scalars or arrays.
    """
    g = params.gamma
    xs = np.abs(np.asarray(x, dtype=float)) / g
    if xs.ndim == 0:
        return _standard_pdf(float(xs), float(params.alpha), epsrel) / g
    out = np.array([_standard_pdf(float(v), float(params.alpha), epsrel) for v in xs.ravel()])
    return out.reshape(xs.shape) / g


@dataclass(frozen=True)
class StableFit:
    alpha: float
    gamma: float
    alpha_se: float
    gamma_se: float
    n: int


def _ecf_fit(absphi: np.ndarray, grid: np.ndarray) -> tuple[float, float]:
    # log(-log|phi(t)|) = alpha log t + alpha log gamma
    yv = np.log(-np.log(absphi))
    xv = np.log(grid)
    slope, intercept = np.polyfit(xv, yv, 1)
    return float(slope), float(math.exp(intercept / slope))


def fit_stable_ecf(samples, grid=ECF_GRID, chunk: int = 1 << 18) -> StableFit:
    """Regression fit of (alpha, gamma) on the empirical characteristic function.

    Samples are first divided by their median absolute value so that the fixed
    frequency grid sees a unit-scale law whatever the input scale; gamma is
    rescaled afterwards. Standard errors come from the delta method applied
    to the sample covariance of (cos tX, sin tX).
    """
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n < 2:
        raise DegenerateSampleError("need at least two samples")
    if not np.all(np.isfinite(x)):
        raise DegenerateSampleError("samples contain non-finite values")
    pilot = float(np.median(np.abs(x)))
    if pilot == 0.0:
        raise DegenerateSampleError("degenerate sample: median |x| is 0, empirical CF is 1 on the grid")
    grid = np.asarray(grid, dtype=float)
    k = grid.size

    sums = np.zeros(2 * k)
    for start in range(0, n, chunk):
        tx = np.outer(x[start : start + chunk] / pilot, grid)
        sums[:k] += np.cos(tx).sum(axis=0)
        sums[k:] += np.sin(tx).sum(axis=0)
    means = sums / n

    def stat(m):
        absphi = np.hypot(m[:k], m[k:])
        if np.any(absphi <= 0) or np.any(absphi >= 1):
            raise DegenerateSampleError("degenerate sample: |empirical CF| outside (0, 1) on the grid")
        a, g = _ecf_fit(absphi, grid)
        return np.array([a, g * pilot])

    est = stat(means)

    # delta method: Jacobian of the fit w.r.t. the 2k ECF means
    jac = np.empty((2, 2 * k))
    for j in range(2 * k):
        h = 1e-7 * max(abs(means[j]), 1e-3)
        up, dn = means.copy(), means.copy()
        up[j] += h
        dn[j] -= h
        try:
            jac[:, j] = (stat(up) - stat(dn)) / (2 * h)
        except DegenerateSampleError:
            jac[:, j] = np.nan
    lin_sum = np.zeros(2)
    lin_sq = np.zeros(2)
    for start in range(0, n, chunk):
        tx = np.outer(x[start : start + chunk] / pilot, grid)
        feats = np.hstack([np.cos(tx), np.sin(tx)])
        proj = feats @ jac.T
        lin_sum += proj.sum(axis=0)
        lin_sq += (proj**2).sum(axis=0)
    var = (lin_sq / n - (lin_sum / n) ** 2) / n
    se = np.sqrt(np.maximum(var, 0.0))
    return StableFit(alpha=float(est[0]), gamma=float(est[1]), alpha_se=float(se[0]), gamma_se=float(se[1]), n=n)


def estimate_stable_params(samples) -> tuple[float, float]:
    """Return ``(alpha_hat, gamma_hat)`` from the empirical-CF regression."""
    fit = fit_stable_ecf(samples)
    return fit.alpha, fit.gamma


def empirical_cf(samples, t) -> np.ndarray:
    """Complex empirical characteristic function mean(exp(i t X)) on a grid."""
    x = np.asarray(samples, dtype=float).ravel()
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(t.size, dtype=complex)
    for i, tv in enumerate(t):
        out[i] = complex(np.cos(tv * x).mean(), np.sin(tv * x).mean())
    return out
