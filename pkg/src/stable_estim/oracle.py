"""Independent numerical oracles for the closed-form estimators.

None of these reuse the algebra behind the closed forms: the conditional mean
of the linear mix is recovered either from a finite difference of the joint
characteristic function or from a change-of-variables density, and the
sub-Gaussian posterior is integrated directly over the subordinator.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .linear_mix import LinearMixModel, joint_cf
from .stable_core import (
    QuadratureError,
    StableParams,
    SubordinatorParams,
    cf_cutoff,
    quad,
    sas_pdf,
)
from .subgaussian import SubGaussianModel

SUBORDINATOR_GRID = (1e-4, 1e4, 2048)
TAIL_DECADES = 12


class OracleDomainError(ValueError):
    """Oracle asked to work where it cannot be accurate."""


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = 1e-13
    trunc_decay: float = 1e-16
    fd_step: float = 1e-3

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be > 0")
        if not 0 < self.trunc_decay < 1:
            raise ValueError("trunc_decay must lie in (0, 1)")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be > 0")


DEFAULT_QUAD = QuadratureConfig()


def _marginal_y(model: LinearMixModel) -> StableParams:
    return StableParams(model.alpha, model.gammaY)


def joint_cf_transform(model: LinearMixModel, t: float, y: float, cfg: QuadratureConfig = DEFAULT_QUAD) -> complex:
    """I(t, y) = int phi_{X,Y}(t, s) exp(-i s y) ds over the truncated s-line.

    The integrand has kinks where a11 t + a21 s or a12 t + a22 s vanish, so the
    line is split there; each piece uses QUADPACK's sine/cosine-weighted rule.
    """
    a = model.alpha
    reach = max(abs(model.k1), abs(model.k2)) * abs(t)
    top = cf_cutoff(model.gammaY**a, a, cfg.trunc_decay) + reach
    kinks = sorted({-model.k1 * t, -model.k2 * t})
    edges = [-top, *kinks, top]
    f = lambda s: joint_cf(model, t, s)
    re = im = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        if y == 0:
            re += quad(f, lo, hi, what="I(t,y)", epsabs=cfg.abs_tol)[0]
            continue
        re += quad(f, lo, hi, what="I(t,y)", weight="cos", wvar=y, epsabs=cfg.abs_tol)[0]
        im -= quad(f, lo, hi, what="I(t,y)", weight="sin", wvar=y, epsabs=cfg.abs_tol)[0]
    return complex(re, im)


def conditional_mean_fd_oracle(model: LinearMixModel, y: float, cfg: QuadratureConfig = DEFAULT_QUAD) -> float:
    """E[X | Y = y] = dI/dt(0, y) / (2 pi i p_Y(y)) with a central difference in t."""
    p_y = float(sas_pdf(_marginal_y(model), y))
    if not p_y > 10 * cfg.abs_tol:
        raise OracleDomainError(f"p_Y({y}) = {p_y:.3g} too small for the finite-difference oracle")
    h = cfg.fd_step
    d_i = (joint_cf_transform(model, h, y, cfg) - joint_cf_transform(model, -h, y, cfg)) / (2 * h)
    return float((d_i / (2j * math.pi * p_y)).real)


def joint_density_cov(model: LinearMixModel, x, y: float):
    """p_{X,Y}(x, y) = p_Z1(z1) p_Z2(z2) / |det| with (z1, z2) = M^{-1} (x, y)."""
    det = model.det
    x = np.asarray(x, dtype=float)
    z1 = (model.a22 * x - model.a12 * y) / det
    z2 = (model.a11 * y - model.a21 * x) / det
    p1 = sas_pdf(StableParams(model.alpha, model.gammaZ1), z1, epsrel=1e-10)
    p2 = sas_pdf(StableParams(model.alpha, model.gammaZ2), z2, epsrel=1e-10)
    return p1 * p2 / abs(det)


def conditional_density_cov_oracle(model: LinearMixModel, x, y: float):
    """p_{X|Y}(x | y) from the change-of-variables joint density and the marginal of Y."""
    return joint_density_cov(model, x, y) / sas_pdf(_marginal_y(model), y)


def _x_pieces(model: LinearMixModel, y: float) -> list[tuple[float, float]]:
    # the joint density peaks where z1 = 0 (x = k2 y) or z2 = 0 (x = k1 y)
    lo, hi = sorted((model.k2 * y, model.k1 * y))
    if hi > lo:
        return [(-np.inf, lo), (lo, hi), (hi, np.inf)]
    return [(-np.inf, lo), (lo, np.inf)]


def _integrate_x(f, model, y, lo=-np.inf, hi=np.inf, epsabs=1e-10):
    total = 0.0
    for a, b in _x_pieces(model, y):
        a, b = max(a, lo), min(b, hi)
        if b > a:
            total += quad(f, a, b, what="change-of-variables integral", epsabs=epsabs, epsrel=1e-8, limit=200)[0]
    return total


def conditional_normalization_cov(model: LinearMixModel, y: float, half_width: float | None = None) -> float:
    """int p_{X|Y}(x | y) dx over [-half_width, half_width] (default 200 gamma_X)."""
    w = 200 * model.gammaX if half_width is None else half_width
    f = lambda x: float(joint_density_cov(model, x, y))
    return _integrate_x(f, model, y, -w, w) / float(sas_pdf(_marginal_y(model), y))


def marginal_y_cov(model: LinearMixModel, y: float) -> float:
    """int p_{X,Y}(x, y) dx over the whole line; should reproduce p_Y(y)."""
    return _integrate_x(lambda x: float(joint_density_cov(model, x, y)), model, y, epsabs=1e-12)


def conditional_mean_cov_oracle(model: LinearMixModel, y: float) -> float:
    """E[X | Y = y] by quadrature of x p_{X,Y}(x, y), normalized by the same quadrature of p_{X,Y}."""
    f0 = lambda x: float(joint_density_cov(model, x, y))
    f1 = lambda x: x * float(joint_density_cov(model, x, y))
    return _integrate_x(f1, model, y) / _integrate_x(f0, model, y)


# -- sub-Gaussian posterior ---------------------------------------------------


def _subordinator_pdf_fourier(x: float, alpha: float) -> float:
    # A >= 0, so the density is twice the even part of the inverse transform:
    # p(x) = (2/pi) int_0^inf exp(-c w^a) cos(s w^a) cos(w x) dw
    a = alpha / 2
    c, s = math.cos(math.pi * a / 2), math.sin(math.pi * a / 2)
    top = cf_cutoff(c, a)
    f = lambda w: math.exp(-c * w**a) * math.cos(s * w**a)
    val, _ = quad(f, 0.0, top, what="subordinator density", weight="cos", wvar=x, epsabs=1e-13, epsrel=1.5e-8,
                  limit=5000, accept=1e-6)
    return max(2 * val / math.pi, 0.0)


_SERIES_K = np.arange(1, 1001)


def _subordinator_pdf_series(x: float, alpha: float) -> float | None:
    """Term-by-term inversion of exp(-u^a):
    p(x) = -(1/pi) sum_k (-1)^k Gamma(a k + 1)/k! sin(pi a k) x^(-a k - 1).

    Returns None when the truncated series has not converged or cancels badly.
    """
    a = alpha / 2
    k = _SERIES_K
    log_mag = special.gammaln(a * k + 1) - special.gammaln(k + 1) - (a * k + 1) * math.log(x)
    if log_mag[-1] > log_mag.max() - 40 or log_mag.max() > 700:
        return None
    terms = -((-1.0) ** k) * np.exp(log_mag) * np.sin(np.pi * a * k)
    total = terms.sum()
    if not total > 0 or np.abs(terms).sum() > 1e3 * total:
        return None
    return float(total / math.pi)


def subordinator_pdf(x: float, alpha: float) -> float:
    """Density of the subordinator at x > 0.

    Uses the convergent power series in x^(-alpha/2) where it converges
    cleanly (large x, or any x when alpha is small) and oscillatory Fourier
    inversion elsewhere. Near alpha = 2 the law concentrates at 1 and the
    Fourier integral stops converging; Kanter's integral takes over there.
    """
    if x <= 0:
        return 0.0
    val = _subordinator_pdf_series(x, alpha)
    if val is not None:
        return val
    try:
        return _subordinator_pdf_fourier(x, alpha)
    except QuadratureError:
        return _subordinator_pdf_kanter(x, alpha)


def _subordinator_pdf_kanter(x: float, alpha: float) -> float:
    # P(A <= x | theta) = exp(-K(theta) x^-r), r = a/(1-a), theta ~ U(0, pi); logs keep
    # K finite when a is close to 1
    a = alpha / 2
    r = a / (1 - a)
    log_xr = -r * math.log(x)

    def f(th):
        log_k = r * math.log(math.sin(a * th)) + math.log(math.sin((1 - a) * th)) - math.log(math.sin(th)) / (1 - a)
        z = log_k + log_xr
        if z > 700:
            return 0.0
        return math.exp(z - math.exp(z))

    eps = 1e-12
    val, _ = quad(f, eps, math.pi - eps, what="subordinator density (Kanter)", epsabs=0.0, epsrel=1e-10, limit=1000,
                  accept=1e-6)
    return r / x / math.pi * val


def subordinator_tail_density(alpha: float, a):
    """Large-a asymptote (alpha/2) a^{-1-alpha/2} / Gamma(1 - alpha/2)."""
    idx = alpha / 2
    return idx / special.gamma(1 - idx) * np.asarray(a, dtype=float) ** (-1 - idx)


@lru_cache(maxsize=16)
def subordinator_density_table(alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Density of the subordinator on the log-spaced grid [1e-4, 1e4] (2048 points).

    Built once per alpha by numerical inversion of the Laplace transform
    exp(-u^(alpha/2)) (see :func:`subordinator_pdf`) and shared read-only afterwards.
    """
    SubordinatorParams(alpha)
    lo, hi, n = SUBORDINATOR_GRID
    grid = np.logspace(math.log10(lo), math.log10(hi), n)
    dens = np.array([subordinator_pdf(float(v), alpha) for v in grid])
    grid.setflags(write=False)
    dens.setflags(write=False)
    return grid, dens


def _mixture_nodes(alpha: float):
    grid, dens = subordinator_density_table(alpha)
    hi = grid[-1]
    step = math.log(grid[1] / grid[0])
    n_tail = int(TAIL_DECADES * math.log(10) / step)
    tail = hi * np.exp(step * np.arange(1, n_tail + 1))
    nodes = np.concatenate([grid, tail])
    dens_all = np.concatenate([dens, subordinator_tail_density(alpha, tail)])
    # trapezoid in log a: da = a dlog(a)
    w = np.full(nodes.size, step)
    w[0] = w[-1] = step / 2
    return nodes, dens_all * nodes * w, grid.size


def posterior_grid_oracle(model: SubGaussianModel, y: float, x_grid, mass_warn: float = 0.999) -> np.ndarray:
    """Unnormalized p_{X|Y}(x | y) on ``x_grid``.

    Marginalizes N(x; beta y, a tau^2) against the subordinator posterior weight
    N(y; 0, a sigma2^2) p_A(a), with the density table extended past 1e4 by its
    power-law asymptote. Warns if the tabulated range holds less than
    ``mass_warn`` of the weight.
    """
    x = np.asarray(x_grid, dtype=float)
    if x.ndim != 1 or not np.all(np.isfinite(x)) or np.any(np.diff(x) <= 0):
        raise ValueError("x_grid must be a finite, strictly increasing 1-D array")
    nodes, wts, n_core = _mixture_nodes(model.alpha)
    var_y = nodes * model.sigma2**2
    w_y = wts * np.exp(-(y**2) / (2 * var_y)) / np.sqrt(2 * math.pi * var_y)
    total = w_y.sum()
    if not total > 0:
        raise OracleDomainError(f"posterior weight vanished at y = {y}")
    captured = w_y[:n_core].sum() / total
    if captured < mass_warn:
        warnings.warn(f"subordinator grid captures only {captured:.5f} of the mixture mass", RuntimeWarning)
    beta = model.rho * model.sigma1 / model.sigma2
    var_x = nodes * model.tau2
    keep = w_y > 0
    out = np.empty(x.size)
    for start in range(0, x.size, 512):
        d = x[start : start + 512, None] - beta * y
        out[start : start + 512] = (
            np.exp(-(d**2) / (2 * var_x[keep])) / np.sqrt(2 * math.pi * var_x[keep]) * w_y[keep]
        ).sum(axis=1)
    return out


def posterior_argmax(model: SubGaussianModel, y: float, step: float = 1e-3, half_width: float = 5.0) -> float:
    """Argmax of the posterior over a grid of multiples of ``step`` covering
    [-half_width, half_width] around 0 and beta y (the grid is not centred on beta y)."""
    beta_y = model.rho * model.sigma1 / model.sigma2 * y
    lo = math.floor((min(0.0, beta_y) - half_width) / step)
    hi = math.ceil((max(0.0, beta_y) + half_width) / step)
    x = np.arange(lo, hi + 1) * step
    return float(x[np.argmax(posterior_grid_oracle(model, y, x))])
