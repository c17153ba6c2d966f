"""Linear mixture of two independent SaS variables.

    (X, Y)^T = [[a11, a12], [a21, a22]] (Z1, Z2)^T,   Zi ~ S(alpha, gamma_Zi)

The observation-space ratios ``k1 = a11/a21`` and ``k2 = a12/a22`` and the
component scales ``gamma1 = |a21| gamma_Z1``, ``gamma2 = |a22| gamma_Z2`` drive
every closed form below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .stable_core import StableParams, _check_count, sas_sample

TIE_RTOL = 1e-12

INTERIOR = "interior-optimum"
ENDPOINT_K1 = "endpoint-k1"
ENDPOINT_K2 = "endpoint-k2"
TIE = "tie"

CLOSED_FORM = "closed-form"
NUMERIC = "numeric-minimization"
MONTE_CARLO = "monte-carlo"


class ModelError(ValueError):
    """Model parameters violate a structural condition."""


@dataclass(frozen=True)
class SlopeResult:
    """Estimator coefficient with its provenance.

    ``value`` is a float, or the pair ``(k1, k2)`` when ``case_tag == "tie"``.
    ``flat_interval`` is set for alpha == 1 ties, where every slope between the
    two candidates is optimal.
    """

    value: float | tuple[float, float]
    case_tag: str = INTERIOR
    provenance: str = CLOSED_FORM
    flat_interval: tuple[float, float] | None = None

    def __post_init__(self):
        if self.case_tag == TIE and not isinstance(self.value, tuple):
            raise ValueError("a tie must carry both candidates")

    @property
    def candidates(self) -> tuple[float, ...]:
        return self.value if isinstance(self.value, tuple) else (self.value,)

    def to_dict(self) -> dict:
        val = list(self.value) if isinstance(self.value, tuple) else self.value
        out = {"value": val, "case": self.case_tag, "provenance": self.provenance}
        if self.flat_interval is not None:
            out["flat_interval"] = list(self.flat_interval)
        return out


@dataclass(frozen=True)
class LinearMixModel:
    a11: float
    a12: float
    a21: float
    a22: float
    gammaZ1: float
    gammaZ2: float
    alpha: float
    k1: float = field(init=False)
    k2: float = field(init=False)
    gamma1: float = field(init=False)
    gamma2: float = field(init=False)
    gammaX: float = field(init=False)
    gammaY: float = field(init=False)

    def __post_init__(self):
        a = self.alpha
        s = object.__setattr__
        s(self, "k1", self.a11 / self.a21)
        s(self, "k2", self.a12 / self.a22)
        s(self, "gamma1", abs(self.a21) * self.gammaZ1)
        s(self, "gamma2", abs(self.a22) * self.gammaZ2)
        gx = (abs(self.a11) * self.gammaZ1) ** a + (abs(self.a12) * self.gammaZ2) ** a
        s(self, "gammaX", gx ** (1 / a))
        s(self, "gammaY", (self.gamma1**a + self.gamma2**a) ** (1 / a))

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, self.a22]])

    @property
    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21

    def with_alpha(self, alpha: float, allow_gaussian: bool = False) -> "LinearMixModel":
        return build_model(self.a11, self.a12, self.a21, self.a22, self.gammaZ1, self.gammaZ2, alpha,
                           allow_gaussian=allow_gaussian)

    def to_dict(self) -> dict:
        return {
            "model": "linear-mix",
            "a": [self.a11, self.a12, self.a21, self.a22],
            "gammas": [self.gammaZ1, self.gammaZ2],
            "alpha": self.alpha,
        }


def build_model(a11, a12, a21, a22, gammaZ1, gammaZ2, alpha, *, allow_gaussian: bool = False) -> LinearMixModel:
    """Validate and construct a :class:`LinearMixModel`.

    ``allow_gaussian`` admits alpha == 2 for Gaussian-limit cross-checks.
    """
    vals = [a11, a12, a21, a22, gammaZ1, gammaZ2, alpha]
    if not all(np.isfinite(v) for v in vals):
        raise ModelError("model parameters must be finite")
    hi_ok = alpha <= 2 if allow_gaussian else alpha < 2
    if not (alpha > 0 and hi_ok):
        raise ModelError(f"alpha must lie in (0, 2), got {alpha}")
    if gammaZ1 <= 0 or gammaZ2 <= 0:
        raise ModelError("component scales gammaZ1, gammaZ2 must be > 0")
    if a21 == 0:
        raise ModelError("a21 = 0: the observation must load on Z1")
    if a22 == 0:
        raise ModelError("a22 = 0: the observation must load on Z2")
    if a11 * a22 - a12 * a21 == 0:
        raise ModelError("singular matrix: a11*a22 - a12*a21 = 0")
    return LinearMixModel(*(float(v) for v in vals))


def joint_cf(model: LinearMixModel, t, s):
    """phi_{X,Y}(t, s) = exp(-gZ1^a |a11 t + a21 s|^a - gZ2^a |a12 t + a22 s|^a)."""
    a = model.alpha
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    e = (model.gammaZ1 * np.abs(model.a11 * t + model.a21 * s)) ** a
    e = e + (model.gammaZ2 * np.abs(model.a12 * t + model.a22 * s)) ** a
    out = np.exp(-e)
    return out if out.ndim else float(out)


def sample_joint(model: LinearMixModel, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` draws of (X, Y) as an ``(n, 2)`` array."""
    n = _check_count(n)
    z1 = sas_sample(StableParams(model.alpha, model.gammaZ1), rng, n)
    z2 = sas_sample(StableParams(model.alpha, model.gammaZ2), rng, n)
    return np.column_stack([model.a11 * z1 + model.a12 * z2, model.a21 * z1 + model.a22 * z2])


def _weighted_ratio(model: LinearMixModel, power: float) -> float:
    # (g1^p k1 + g2^p k2) / (g1^p + g2^p), evaluated through the ratio to avoid overflow
    lr = power * (math.log(model.gamma2) - math.log(model.gamma1))
    if lr > 0:
        w1 = math.exp(-lr) / (1 + math.exp(-lr))
    else:
        w1 = 1 / (1 + math.exp(lr))
    return w1 * model.k1 + (1 - w1) * model.k2


def conditional_mean_slope(model: LinearMixModel) -> float:
    """Slope m of E[X | Y = y] = m y: the gamma_i^alpha-weighted average of k1, k2."""
    return _weighted_ratio(model, model.alpha)


def additive_conditional_mean_slope(model: LinearMixModel) -> float:
    """Additive-noise form (a11 = 1, a12 = 0): gX^a |a21|^a / (gX^a |a21|^a + gZ2^a |a22|^a) / a21."""
    if model.a11 != 1 or model.a12 != 0:
        raise ModelError("additive form needs a11 = 1 and a12 = 0")
    a = model.alpha
    num = model.gammaX**a * abs(model.a21) ** a
    return num / (num + model.gammaZ2**a * abs(model.a22) ** a) / model.a21


def error_scale(model: LinearMixModel, a) -> float:
    """Dispersion of the error a Y - X: (|a21 a - a11|^al gZ1^al + |a22 a - a12|^al gZ2^al)^(1/al)."""
    al = model.alpha
    return error_scale_pow(model, a) ** (1 / al)


def error_scale_pow(model: LinearMixModel, a):
    """gamma_e(a) ** alpha; same minimizer as :func:`error_scale`, better conditioned."""
    al = model.alpha
    a = np.asarray(a, dtype=float)
    # |a2j a - a1j| written as gamma_j |a - kj| so it is exactly zero at each kink; rounding there
    # would otherwise be amplified by the cusp (1e-16 ** 0.15 is about 4e-3)
    out = (model.gamma1 * np.abs(a - model.k1)) ** al + (model.gamma2 * np.abs(a - model.k2)) ** al
    return out if out.ndim else float(out)


def _is_tie(model: LinearMixModel) -> bool:
    return math.isclose(model.gamma1, model.gamma2, rel_tol=TIE_RTOL, abs_tol=0.0)


def optimal_slope(model: LinearMixModel) -> SlopeResult:
    """Dispersion-minimizing slope, closed form.

    For alpha > 1 the weights use the exponent alpha/(alpha-1). For alpha <= 1
    the error dispersion is concave (alpha < 1) or piecewise linear (alpha = 1)
    between k1 and k2, so the optimum sits at the endpoint whose component scale
    dominates; equal scales give a tie.
    """
    al = model.alpha
    if al > 1:
        return SlopeResult(_weighted_ratio(model, al / (al - 1)), INTERIOR, CLOSED_FORM)
    if _is_tie(model):
        flat = (min(model.k1, model.k2), max(model.k1, model.k2)) if al == 1 else None
        return SlopeResult((model.k1, model.k2), TIE, CLOSED_FORM, flat_interval=flat)
    if model.gamma1 > model.gamma2:
        return SlopeResult(model.k1, ENDPOINT_K1, CLOSED_FORM)
    return SlopeResult(model.k2, ENDPOINT_K2, CLOSED_FORM)


def search_bracket(model: LinearMixModel) -> tuple[float, float]:
    lo, hi = min(model.k1, model.k2), max(model.k1, model.k2)
    pad = 1 + (hi - lo)
    return lo - pad, hi + pad


def minimize_error_scale_numeric(model: LinearMixModel, tol: float = 1e-10, grid_points: int = 10_000) -> SlopeResult:
    """Numeric minimizer of gamma_e, independent of the closed form.

    alpha > 1: bounded golden-section/parabolic search (Brent) on the convex
    objective over the padded bracket. alpha <= 1: compare the two kinks and
    confirm on a dense grid that nothing beats them.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    lo, hi = search_bracket(model)
    f = lambda a: error_scale_pow(model, a)
    if model.alpha > 1:
        res = optimize.minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": tol, "maxiter": 5000})
        if not res.success:
            raise RuntimeError(f"bounded search failed: {res.message}")
        x = float(res.x)
        if min(x - lo, hi - x) <= 10 * tol:
            raise RuntimeError(f"minimizer {x} hit the bracket edge [{lo}, {hi}]")
        return SlopeResult(x, INTERIOR, NUMERIC)

    grid = np.linspace(lo, hi, grid_points)
    vals = f(grid)
    f1, f2 = f(model.k1), f(model.k2)
    best = min(f1, f2)
    if vals.min() < best * (1 - 1e-12):
        raise RuntimeError("grid scan found a value below both kinks")
    if math.isclose(f1, f2, rel_tol=1e-12):
        flat = None
        if model.alpha == 1:
            inner = np.linspace(min(model.k1, model.k2), max(model.k1, model.k2), 101)
            if np.allclose(f(inner), best, rtol=1e-12, atol=0):
                flat = (float(inner[0]), float(inner[-1]))
        return SlopeResult((model.k1, model.k2), TIE, NUMERIC, flat_interval=flat)
    if f1 < f2:
        return SlopeResult(model.k1, ENDPOINT_K1, NUMERIC)
    return SlopeResult(model.k2, ENDPOINT_K2, NUMERIC)


def random_model(rng: np.random.Generator, alpha: float | None = None, alpha_range=(0.1, 1.99)) -> LinearMixModel:
    """Random well-conditioned model used by the property and acceptance suites.

    a_ij ~ U(-1, 1) with |a21|, |a22| >= 0.5 and |det| >= 0.1; gamma_Zi ~ U(0.5, 2);
    alpha ~ U(alpha_range) unless fixed.
    """
    while True:
        a11, a12, a21, a22 = rng.uniform(-1, 1, size=4)
        g1, g2 = rng.uniform(0.5, 2, size=2)
        al = rng.uniform(*alpha_range) if alpha is None else alpha
        if min(abs(a21), abs(a22)) < 0.5 or abs(a11 * a22 - a12 * a21) < 0.1:
            continue
        return build_model(a11, a12, a21, a22, g1, g2, al)
