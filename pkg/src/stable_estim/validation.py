"""Monte Carlo checks of the closed forms and a structured report.

One batch of joint draws per run feeds every Monte Carlo record: the binned
conditional-mean regression, the empirical error dispersions and the
marginal empirical-CF checks. Closed forms are compared against the
quadrature oracles alongside.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import linear_mix as lm
from . import oracle
from . import subgaussian as sg
from .stable_core import StableFit, StableParams, empirical_cf, fit_stable_ecf, sas_cf

#: bin centers in units of the dispersion of Y
DEFAULT_BINS = (-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0)
DEFAULT_BANDWIDTH = 0.05
MIN_BIN_COUNT = 30
MIN_SCALE_SAMPLES = 100_000
SAMPLE_CHUNK = 1 << 18

DEFAULT_TOLERANCES = {
    "slope_oracle": 1e-3,  # absolute, closed form vs quadrature oracle
    "slope_numeric": 1e-6,  # absolute, closed form vs numeric minimizer
    "mc_sigma": 3.0,  # Monte Carlo slope within this many SE
    "scale_rel": 0.05,  # relative, empirical vs closed-form dispersion
    "gap_sigma": 2.0,  # optimality gap slack in combined SE
    "ecf_sigma": 4.0,  # empirical CF within this many 1/sqrt(n)
    "map_steps": 1.0,  # posterior argmax within this many grid steps
}

RECORD_KEYS = ("check", "theory", "oracle", "mc", "se", "tol", "pass")


class EmptyBinError(ValueError):
    def __init__(self, center: float, count: int):
        self.center = center
        super().__init__(f"bin at y = {center:g} holds {count} points (< {MIN_BIN_COUNT})")


class DegenerateVarianceError(ValueError):
    pass


@dataclass(frozen=True)
class ValidationConfig:
    """Monte Carlo settings.

    ``bin_centers`` and ``bandwidth`` are absolute Y values; when left as
    None they default to :data:`DEFAULT_BINS` and 0.05 in units of the
    dispersion of Y. ``trim`` None means 1% when alpha <= 1.3, else 0.
    ``cf_grid`` is in units of 1/gamma of the variable being checked.
    """

    n_samples: int = 1_000_000
    seed: int = 0
    bin_centers: tuple[float, ...] | None = None
    bandwidth: float | None = None
    trim: float | None = None
    cf_grid: tuple[float, ...] = tuple(np.round(np.linspace(0.1, 2.0, 20), 10).tolist())
    tolerances: dict = field(default_factory=dict)
    residual_check: bool = False

    def __post_init__(self):
        if int(self.n_samples) != self.n_samples or self.n_samples < 10_000:
            raise ValueError(f"n_samples must be an integer >= 10^4, got {self.n_samples}")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be > 0, got {self.bandwidth}")
        if self.trim is not None and not 0 <= self.trim < 0.5:
            raise ValueError(f"trim must lie in [0, 0.5), got {self.trim}")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ValueError(f"unknown tolerance keys: {sorted(unknown)}")
        if self.bin_centers is not None:
            object.__setattr__(self, "bin_centers", tuple(float(c) for c in self.bin_centers))
        object.__setattr__(self, "cf_grid", tuple(float(t) for t in self.cf_grid))

    def tol(self, key: str) -> float:
        return float(self.tolerances.get(key, DEFAULT_TOLERANCES[key]))

    def centers(self, scale: float = 1.0) -> tuple[float, ...]:
        return self.bin_centers if self.bin_centers is not None else tuple(c * scale for c in DEFAULT_BINS)

    def half_width(self, scale: float = 1.0) -> float:
        return self.bandwidth if self.bandwidth is not None else DEFAULT_BANDWIDTH * scale

    def trim_for(self, alpha: float) -> float:
        if self.trim is not None:
            return self.trim
        return 0.01 if alpha <= 1.3 else 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bin_centers"] = None if self.bin_centers is None else list(self.bin_centers)
        d["cf_grid"] = list(self.cf_grid)
        d["tolerances"] = {k: self.tol(k) for k in DEFAULT_TOLERANCES}
        return d


def _num(v):
    if v is None:
        return None
    if isinstance(v, (tuple, list)):
        return tuple(_num(u) for u in v)
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    v = float(v)
    return v if math.isfinite(v) else None


@dataclass(frozen=True)
class CheckRecord:
    check: str
    theory: float | tuple | None
    oracle: float | tuple | None
    mc: float | None
    se: float | None
    tol: float | None
    passed: bool

    def __post_init__(self):
        for name in ("theory", "oracle", "mc", "se", "tol"):
            object.__setattr__(self, name, _num(getattr(self, name)))
        object.__setattr__(self, "passed", bool(self.passed))

    def to_dict(self) -> dict:
        vals = (self.check, self.theory, self.oracle, self.mc, self.se, self.tol, self.passed)
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in zip(RECORD_KEYS, vals)}

    @classmethod
    def from_dict(cls, d: dict) -> "CheckRecord":
        return cls(*(d[k] for k in RECORD_KEYS))


@dataclass(frozen=True)
class ValidationReport:
    records: tuple[CheckRecord, ...]
    model: dict
    provenance: dict
    errors: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def record(self, name: str) -> CheckRecord:
        for r in self.records:
            if r.check == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "status": "pass" if self.passed else "fail",
            "model": self.model,
            "provenance": self.provenance,
            "records": [r.to_dict() for r in self.records],
            "errors": dict(self.errors),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ValidationReport":
        rep = cls(tuple(CheckRecord.from_dict(r) for r in d["records"]), d["model"], d["provenance"], d.get("errors", {}))
        if d.get("status") not in (None, "pass" if rep.passed else "fail"):
            raise ValueError("status field disagrees with the records")
        return rep

    @classmethod
    def from_json(cls, text: str) -> "ValidationReport":
        return cls.from_dict(json.loads(text))


# -- estimators ----------------------------------------------------------------


def _as_pairs(pairs) -> np.ndarray:
    p = np.asarray(pairs, dtype=float)
    if p.ndim != 2 or p.shape[1] != 2:
        raise ValueError("pairs must be an (n, 2) array of (x, y)")
    return p


def _trimmed_mean_var(x: np.ndarray, trim: float) -> tuple[float, float]:
    # Tukey-McLaughlin: winsorized variance / ((1 - 2g)^2 n)
    n = x.size
    g = int(trim * n)
    xs = np.sort(x)
    mean = float(xs[g : n - g].mean())
    w = np.clip(x, xs[g], xs[n - g - 1])
    var = float(w.var(ddof=1)) / ((1 - 2 * g / n) ** 2 * n)
    return mean, var


def binned_conditional_mean(pairs, cfg: ValidationConfig, scale: float = 1.0, alpha: float | None = None):
    """Slope of E[X | Y] from trimmed bin means regressed on bin centers.

    Weighted least squares through the origin with weights 1/var(bin mean).
    ``scale`` sets the unit of the default bins; ``alpha`` (when known) picks
    the default trim and guards against untrimmed means with alpha <= 1.
    Returns ``(slope, stderr)``.
    """
    p = _as_pairs(pairs)
    trim = cfg.trim_for(alpha) if alpha is not None else (cfg.trim or 0.0)
    if alpha is not None and alpha <= 1 and trim == 0:
        raise ValueError("bin means of an alpha <= 1 law need trim > 0")
    bw = cfg.half_width(scale)
    centers = np.array(cfg.centers(scale))
    if not np.any(centers != 0):
        raise DegenerateVarianceError("all bin centers are 0; the slope is not identified")
    x, y = p[:, 0], p[:, 1]
    means = np.empty(centers.size)
    vars_ = np.empty(centers.size)
    for i, c in enumerate(centers):
        sel = np.abs(y - c) <= bw
        cnt = int(sel.sum())
        if cnt < MIN_BIN_COUNT:
            raise EmptyBinError(float(c), cnt)
        means[i], vars_[i] = _trimmed_mean_var(x[sel], trim)
    if not np.all(np.isfinite(vars_)):
        raise DegenerateVarianceError("non-finite bin variance")
    zero = vars_ == 0
    if zero.all():
        slope = float(centers @ means / (centers @ centers))
        resid = means - slope * centers
        dof = max(centers.size - 1, 1)
        return slope, float(math.sqrt(resid @ resid / dof / (centers @ centers)))
    if zero.any():
        bad = centers[zero & (centers != 0)]
        if bad.size:
            raise DegenerateVarianceError(f"bin at y = {bad[0]:g} has zero variance while others do not")
        keep = ~zero
        centers, means, vars_ = centers[keep], means[keep], vars_[keep]
    w = 1 / vars_
    denom = float(np.sum(w * centers**2))
    slope = float(np.sum(w * centers * means) / denom)
    return slope, float(1 / math.sqrt(denom))


def _error_fit(pairs, a: float) -> StableFit:
    p = _as_pairs(pairs)
    if p.shape[0] < MIN_SCALE_SAMPLES:
        raise ValueError(f"empirical error scale needs n >= {MIN_SCALE_SAMPLES}, got {p.shape[0]}")
    return fit_stable_ecf(a * p[:, 1] - p[:, 0])


def empirical_error_scale(pairs, a: float, cfg: ValidationConfig | None = None) -> float:
    """Dispersion of a*Y - X fitted by the empirical-CF regression."""
    return _error_fit(pairs, a).gamma


def ecf_max_deviation(samples, params: StableParams, grid) -> float:
    t = np.asarray(grid, dtype=float) / params.gamma
    return float(np.max(np.abs(empirical_cf(samples, t) - sas_cf(params, t))))


# -- report ---------------------------------------------------------------------


def draw_pairs(model, n: int, seed: int, chunk: int = SAMPLE_CHUNK) -> np.ndarray:
    """Joint draws in fixed-size chunks, each from its own spawned stream.

    The chunk layout depends only on ``n`` and ``chunk``, so output is
    reproducible from ``seed``.
    """
    sampler = lm.sample_joint if isinstance(model, lm.LinearMixModel) else sg.sample_subgaussian
    n_chunks = -(-n // chunk)
    streams = np.random.SeedSequence(seed).spawn(n_chunks)
    out = np.empty((n, 2))
    for i, ss in enumerate(streams):
        lo = i * chunk
        hi = min(n, lo + chunk)
        out[lo:hi] = sampler(model, np.random.default_rng(ss), hi - lo)
    return out


def config_hash(model, cfg: ValidationConfig) -> str:
    blob = json.dumps({"model": model.to_dict(), "config": cfg.to_dict()}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


class _Battery:
    """Collects records; a failing check becomes a failed record plus an error message."""

    def __init__(self):
        self.records: list[CheckRecord] = []
        self.errors: dict[str, str] = {}

    def run(self, name: str, fn):
        try:
            out = fn()
        except Exception as exc:  # noqa: BLE001 - every sub-error is reported, not raised
            self.errors[name] = f"{type(exc).__name__}: {exc}"
            self.records.append(CheckRecord(name, None, None, None, None, None, False))
            return None
        self.records.append(out)
        return out


def _slope_value(res: lm.SlopeResult):
    return res.value if not isinstance(res.value, tuple) else tuple(res.value)


def _first(v) -> float:
    return v[0] if isinstance(v, tuple) else v


def _scale_record(name, theory, fit: StableFit, tol) -> CheckRecord:
    return CheckRecord(name, theory, None, fit.gamma, fit.gamma_se, tol, abs(fit.gamma / theory - 1) <= tol)


def _ecf_records(bat: _Battery, pairs, gx: float, gy: float, alpha: float, cfg: ValidationConfig):
    n = pairs.shape[0]
    tol = cfg.tol("ecf_sigma") / math.sqrt(n)
    for col, label, g in ((0, "ecf_x", gx), (1, "ecf_y", gy)):
        bat.run(label, lambda col=col, label=label, g=g: _ecf_record(label, pairs[:, col], StableParams(alpha, g),
                                                                        cfg.cf_grid, tol, n))


def _ecf_record(label, samples, params, grid, tol, n) -> CheckRecord:
    dev = ecf_max_deviation(samples, params, grid)
    return CheckRecord(label, 0.0, None, dev, 1 / math.sqrt(n), tol, dev <= tol)


def _scale_checks(bat: _Battery, pairs, slopes: dict, theory_fn, cfg) -> dict:
    fits = {}
    tol = cfg.tol("scale_rel")
    for label, a in slopes.items():
        name = f"error_scale@{label}"

        def check(a=a, label=label, name=name):
            fits[label] = _error_fit(pairs, a)
            return _scale_record(name, theory_fn(a), fits[label], tol)

        bat.run(name, check)
    return fits


def _provenance(model, cfg) -> dict:
    return {"seed": int(cfg.seed), "n": int(cfg.n_samples), "config_hash": config_hash(model, cfg)}


def _validate_linear_mix(m: lm.LinearMixModel, cfg: ValidationConfig, bat: _Battery):
    theory = lm.conditional_mean_slope(m)
    opt = lm.optimal_slope(m)
    o_tol = cfg.tol("slope_oracle")
    pairs = draw_pairs(m, cfg.n_samples, cfg.seed)

    def cond_record():
        fd = oracle.conditional_mean_fd_oracle(m, 1.0)
        mc, se = binned_conditional_mean(pairs, cfg, scale=m.gammaY, alpha=m.alpha)
        ok = abs(fd - theory) <= o_tol and abs(mc - theory) <= cfg.tol("mc_sigma") * se
        return CheckRecord("conditional_slope", theory, fd, mc, se, o_tol, ok)

    def cov_record():
        cov = oracle.conditional_mean_cov_oracle(m, 1.0)
        return CheckRecord("conditional_slope_cov_oracle", theory, cov, None, None, o_tol, abs(cov - theory) <= o_tol)

    def opt_record():
        num = lm.minimize_error_scale_numeric(m)
        tol = cfg.tol("slope_numeric")
        if m.alpha > 1:
            ok = abs(num.value - opt.value) <= tol
        else:
            ok = num.case_tag == opt.case_tag and num.candidates == opt.candidates
        return CheckRecord("optimal_slope", _slope_value(opt), _slope_value(num), None, None, tol, ok)

    bat.run("conditional_slope", cond_record)
    bat.run("conditional_slope_cov_oracle", cov_record)
    bat.run("optimal_slope", opt_record)

    slopes = {"zero": 0.0, "conditional": theory, "optimal": _first(opt.value)}
    fits = _scale_checks(bat, pairs, slopes, lambda a: lm.error_scale(m, a), cfg)

    def gap_record():
        if not {"conditional", "optimal"} <= fits.keys():
            raise RuntimeError("error-scale fits unavailable")
        g_cond, g_opt = fits["conditional"], fits["optimal"]
        th = lm.error_scale(m, theory) - lm.error_scale(m, slopes["optimal"])
        se = math.hypot(g_cond.gamma_se, g_opt.gamma_se)
        mc = g_cond.gamma - g_opt.gamma
        ok = th >= -1e-12 and g_opt.gamma <= g_cond.gamma + cfg.tol("gap_sigma") * se
        return CheckRecord("optimality_gap", th, None, mc, se, cfg.tol("gap_sigma") * se, ok)

    bat.run("optimality_gap", gap_record)
    _ecf_records(bat, pairs, m.gammaX, m.gammaY, m.alpha, cfg)


def _validate_subgaussian(m: sg.SubGaussianModel, cfg: ValidationConfig, bat: _Battery):
    beta = sg.conditional_mean_slope_sg(m)
    opt = sg.optimal_slope_sg(m)
    pairs = draw_pairs(m, cfg.n_samples, cfg.seed)
    # numeric argmins resolve b to ~sqrt(eps) in units of the natural slope scale sigma1/sigma2
    n_tol = cfg.tol("slope_numeric") * max(1.0, m.sigma1 / m.sigma2)

    def cond_record():
        mc, se = binned_conditional_mean(pairs, cfg, scale=m.gammaY, alpha=m.alpha)
        return CheckRecord("conditional_slope", beta, None, mc, se, cfg.tol("mc_sigma") * se,
                           abs(mc - beta) <= cfg.tol("mc_sigma") * se)

    def opt_record():
        num = sg.minimize_scale_numeric_sg(m).value
        return CheckRecord("optimal_slope", opt.value, num, None, None, n_tol, abs(num - opt.value) <= n_tol)

    def identity_record():
        mp = sg.map_estimate(m, 1.0)
        return CheckRecord("estimator_identity", beta, opt.value, mp, None, 0.0, beta == opt.value == mp)

    def display_record():
        num = sg.minimize_scale_numeric_sg(m, lambda b: sg.error_scale_sg_display(m, b)).value
        return CheckRecord("display_convention_argmin", beta, num, None, None, n_tol, abs(num - beta) <= n_tol)

    def map_record():
        step = 1e-3
        x_star = oracle.posterior_argmax(m, 1.0, step=step)
        tol = cfg.tol("map_steps") * step
        return CheckRecord("map_posterior_argmax", beta, x_star, None, None, tol, abs(x_star - beta) <= tol * (1 + 1e-9))

    bat.run("conditional_slope", cond_record)
    bat.run("optimal_slope", opt_record)
    bat.run("estimator_identity", identity_record)
    bat.run("display_convention_argmin", display_record)
    bat.run("map_posterior_argmax", map_record)
    _scale_checks(bat, pairs, {"zero": 0.0, "conditional": beta, "optimal": opt.value},
                  lambda b: sg.error_scale_sg(m, b), cfg)

    if cfg.residual_check:

        def resid_record():
            ss = np.random.SeedSequence(cfg.seed).spawn(2)[1]
            r = sg.conditional_residual_samples(m, m.gammaY, cfg.half_width(m.gammaY), np.random.default_rng(ss),
                                                min(cfg.n_samples, 100_000))
            chk = sg.residual_integrability_check(r, np.random.default_rng(ss.spawn(1)[0]))
            spread = max(chk.trimmed_means.values()) - min(chk.trimmed_means.values())
            return CheckRecord("residual_integrability", 0.0, chk.symmetry_pvalue, spread, chk.se, 3 * chk.se,
                               chk.passed)

        bat.run("residual_integrability", resid_record)
    _ecf_records(bat, pairs, m.gammaX, m.gammaY, m.alpha, cfg)


def run_validation(model, cfg: ValidationConfig | None = None) -> ValidationReport:
    """Full battery for a :class:`LinearMixModel` or :class:`SubGaussianModel`.

    Deterministic given ``cfg.seed``. Failing sub-checks are recorded, not raised.
    """
    cfg = cfg or ValidationConfig()
    bat = _Battery()
    if isinstance(model, lm.LinearMixModel):
        _validate_linear_mix(model, cfg, bat)
    elif isinstance(model, sg.SubGaussianModel):
        _validate_subgaussian(model, cfg, bat)
    else:
        raise TypeError(f"expected LinearMixModel or SubGaussianModel, got {type(model).__name__}")
    return ValidationReport(tuple(bat.records), model.to_dict(), _provenance(model, cfg), bat.errors)


__all__ = [
    "ValidationConfig",
    "ValidationReport",
    "CheckRecord",
    "EmptyBinError",
    "DegenerateVarianceError",
    "binned_conditional_mean",
    "empirical_error_scale",
    "draw_pairs",
    "run_validation",
    "config_hash",
]
