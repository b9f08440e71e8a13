"""Weighted nonlinear least squares and the model library.

The engine is a plain Levenberg-Marquardt loop on sigma-weighted
residuals: forward-difference Jacobian with step sqrt(eps)*max(|theta|,1),
damping starting at 1e-3 (x10 on a rejected step, /10 on an accepted one),
convergence when the relative chi-square change drops below 1e-10, hard
cap of 200 iterations. Damping scales the diagonal of the normal matrix,
which keeps the step invariant under uniform rescaling of all sigmas.

Parameter errors are sqrt(diag(cov)) with the covariance scaled by the
reduced chi-square, matching the usual practice for counting data.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .constants import MEV_IN_KELVIN

_EPS = np.finfo(float).eps
_LAMBDA0 = 1e-3
_MAX_ITER = 200
_CHI2_RTOL = 1e-10


class ModelDomainError(ValueError):
    """Model evaluated outside its domain (e.g. Raman with T <= delta_t)."""


class SingularNormalMatrixError(RuntimeError):
    def __init__(self, cond: float, detail: str = ""):
        msg = f"normal matrix is singular (condition number {cond:.3e})"
        if detail:
            msg += f"; {detail}"
        super().__init__(msg)
        self.cond = cond


# --------------------------------------------------------------------------
# Model library


@dataclass(frozen=True)
class FitModel:
    name: str
    param_names: tuple[str, ...]
    units: tuple[str, ...]
    fn: object
    fixed_default: tuple[bool, ...]
    guess: object = None
    meta: dict = field(default_factory=dict)

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    def __call__(self, x, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ValueError(
                f"{self.name} expects {self.n_params} parameters {self.param_names}"
            )
        return self.fn(np.asarray(x, dtype=float), theta)


_LN2X4 = 4.0 * math.log(2.0)


def _gauss_peak(x, amp, center, fwhm):
    return amp * np.exp(-_LN2X4 * (x - center) ** 2 / fwhm**2)


def _lor_peak(x, amp, center, fwhm):
    h = 0.5 * fwhm
    return amp * h**2 / ((x - center) ** 2 + h**2)


def _fn_gaussian_two_peak(x, th):
    amp0, amp1, center0, sep, fwhm0, fwhm1, base = th
    return _gauss_peak(x, amp0, center0, fwhm0) + _gauss_peak(x, amp1, center0 - sep, fwhm1) + base


def _fn_lorentzian(x, th):
    amp, center, fwhm, base = th
    return _lor_peak(x, amp, center, fwhm) + base


def _fn_lorentzian_two_peak(x, th):
    amp0, amp1, center, sep, fwhm, base = th
    return (
        _lor_peak(x, amp0, center - 0.5 * sep, fwhm)
        + _lor_peak(x, amp1, center + 0.5 * sep, fwhm)
        + base
    )


def _fn_exp_decay(x, th):
    amp, tau, base = th
    return amp * np.exp(-x / tau) + base


def _fn_exp_rise(x, th):
    amp, tau, base = th
    return amp * (1.0 - np.exp(-x / tau)) + base


def _fn_rabi_damped_cosine(x, th):
    amp, decay, freq, base = th
    return amp * np.exp(-x / decay) * np.cos(2 * np.pi * freq * x) + base


def _fn_ramsey(x, th):
    amp, t2s, freq, phase, base = th
    return amp * np.exp(-x / t2s) * np.cos(2 * np.pi * freq * x + phase) + base


def _make_fn_eseem(n_components: int, tau_convention: str):
    tau_factor = 0.5 if tau_convention == "half" else 1.0

    def fn(x, th):
        amp, t2, power = th[0], th[1], th[2]
        ks = th[3 : 3 + n_components]
        fs = th[3 + n_components : 3 + 2 * n_components]
        base = th[-1]
        if np.any(x < 0):
            raise ModelDomainError("eseem model needs t >= 0")
        tau = tau_factor * x
        env = np.exp(-((x / t2) ** power))
        mod = np.ones_like(x)
        for k, f_khz in zip(ks, fs):
            mod = mod * (1.0 - k * np.sin(np.pi * f_khz * 1e-3 * tau) ** 2)
        return amp * env * mod + base

    return fn


def _fn_orbach(x, th):
    a, e_mev = th
    return a * np.exp(-e_mev * MEV_IN_KELVIN / x)


def _make_fn_raman(power: int):
    def fn(x, th):
        a, dt = th
        if np.any(x <= dt):
            raise ModelDomainError(f"raman model needs T > delta_t ({dt} K)")
        return a * (x - dt) ** power

    return fn


def _fn_constant(x, th):
    return np.full_like(x, th[0])


def _fn_linear(x, th):
    return th[0] * x + th[1]


# -- initial-guess heuristics ------------------------------------------------


def _half_width(x, y, base, amp, center_idx):
    above = y - base > 0.5 * amp
    if not above.any():
        return (x[-1] - x[0]) / 5.0
    idx = np.where(above)[0]
    return max(x[idx[-1]] - x[idx[0]], abs(x[1] - x[0]))


def _guess_lorentzian(x, y):
    base = float(np.min(y))
    i = int(np.argmax(y))
    amp = float(y[i] - base)
    return np.array([amp, x[i], _half_width(x, y, base, amp, i), base])


def _guess_gaussian_two_peak(x, y):
    base = float(np.min(y))
    i0 = int(np.argmax(y))
    w = _half_width(x, y, base, y[i0] - base, i0)
    mask = np.abs(x - x[i0]) > 1.5 * w
    i1 = int(np.argmax(np.where(mask, y, -np.inf)))
    c_hi, c_lo = max(x[i0], x[i1]), min(x[i0], x[i1])
    amp_hi = float(y[i0] - base) if x[i0] >= x[i1] else float(y[i1] - base)
    amp_lo = float(y[i1] - base) if x[i0] >= x[i1] else float(y[i0] - base)
    return np.array([amp_hi, amp_lo, c_hi, c_hi - c_lo, w, w, base])


def _guess_lorentzian_two_peak(x, y):
    g = _guess_gaussian_two_peak(x, y)
    amp0 = g[1]  # low-frequency peak first (center - sep/2)
    amp1 = g[0]
    center = g[2] - 0.5 * g[3]
    return np.array([amp0, amp1, center, g[3], g[4], g[6]])


def _guess_exp_decay(x, y):
    base = float(np.mean(y[-max(3, len(y) // 10):]))
    amp = float(y[0] - base)
    z = (y - base) / amp if amp != 0 else None
    tau = (x[-1] - x[0]) / 3.0
    if z is not None:
        good = z > 0.05
        if good.sum() >= 2:
            slope = np.polyfit(x[good], np.log(z[good]), 1)[0]
            if slope < 0:
                tau = -1.0 / slope
    return np.array([amp, tau, base])


def _guess_exp_rise(x, y):
    base = float(y[0])
    amp = float(y[-1] - base)
    g = _guess_exp_decay(x, (base + amp) - y + base)  # mirror into a decay
    return np.array([amp, g[1], base])


def _fft_peak_freq(x, y):
    dx = float(np.mean(np.diff(x)))
    yf = np.fft.rfft(y - np.mean(y))
    freqs = np.fft.rfftfreq(len(y), dx)
    if len(yf) < 2:
        return 1.0 / (x[-1] - x[0])
    return float(freqs[1 + int(np.argmax(np.abs(yf[1:])))])


def _guess_rabi(x, y):
    base = float(np.mean(y))
    amp = float(y[0] - base)
    if amp == 0:
        amp = float((np.max(y) - np.min(y)) / 2)
    return np.array([amp, (x[-1] - x[0]) / 3.0, _fft_peak_freq(x, y), base])


def _guess_ramsey(x, y):
    g = _guess_rabi(x, y)
    return np.array([g[0], g[1], g[2], 0.0, g[3]])


def _make_guess_eseem(n_components, defaults_khz=(87.5, 68.0)):
    def guess(x, y):
        base = float(np.min(y))
        amp = float(y[0] - base)
        dec = _guess_exp_decay(x, y)
        fs = list(defaults_khz[:n_components])
        while len(fs) < n_components:
            fs.append(fs[-1] * 0.8)
        return np.array([amp, max(dec[1], x[1] - x[0]), 2.0] + [0.05] * n_components + fs + [base])

    return guess


def _guess_orbach(x, y):
    good = y > 0
    slope, intercept = np.polyfit(1.0 / x[good], np.log(y[good]), 1)
    return np.array([math.exp(intercept), max(-slope, 1.0) / MEV_IN_KELVIN])


def _make_guess_raman(power):
    def guess(x, y):
        a = float(np.mean(y / np.maximum(x, 1e-12) ** power))
        return np.array([a, 0.5 * float(np.min(x))])

    return guess


def _guess_constant(x, y):
    return np.array([float(np.mean(y))])


def _guess_linear(x, y):
    return np.asarray(np.polyfit(x, y, 1), dtype=float)


# -- registry ----------------------------------------------------------------


def get_model(name: str, **options) -> FitModel:
    """Build a model by id.

    Options: gaussian_two_peak(fix_separation=True), raman(power=9),
    eseem_model(n_components=2, tau_convention="half"),
    lorentzian_two_peak(fix_separation=False).
    """
    if name == "gaussian_two_peak":
        fix_sep = bool(options.pop("fix_separation", True))
        _no_extra(name, options)
        return FitModel(
            name,
            ("amp0", "amp1", "center0", "separation", "fwhm0", "fwhm1", "baseline"),
            ("a.u.", "a.u.", "MHz", "MHz", "MHz", "MHz", "a.u."),
            _fn_gaussian_two_peak,
            (False, False, False, fix_sep, False, False, False),
            _guess_gaussian_two_peak,
        )
    if name == "lorentzian":
        _no_extra(name, options)
        return FitModel(
            name,
            ("amp", "center", "fwhm", "baseline"),
            ("a.u.", "MHz", "MHz", "a.u."),
            _fn_lorentzian,
            (False,) * 4,
            _guess_lorentzian,
        )
    if name == "lorentzian_two_peak":
        fix_sep = bool(options.pop("fix_separation", False))
        _no_extra(name, options)
        return FitModel(
            name,
            ("amp0", "amp1", "center", "separation", "fwhm", "baseline"),
            ("a.u.", "a.u.", "MHz", "MHz", "MHz", "a.u."),
            _fn_lorentzian_two_peak,
            (False, False, False, fix_sep, False, False),
            _guess_lorentzian_two_peak,
        )
    if name == "exp_decay":
        _no_extra(name, options)
        return FitModel(
            name,
            ("amp", "tau", "baseline"),
            ("a.u.", "x-unit", "a.u."),
            _fn_exp_decay,
            (False,) * 3,
            _guess_exp_decay,
        )
    if name == "exp_rise":
        _no_extra(name, options)
        return FitModel(
            name,
            ("amp", "tau", "baseline"),
            ("a.u.", "x-unit", "a.u."),
            _fn_exp_rise,
            (False,) * 3,
            _guess_exp_rise,
        )
    if name == "rabi_damped_cosine":
        _no_extra(name, options)
        return FitModel(
            name,
            ("amp", "decay", "freq", "baseline"),
            ("a.u.", "us", "MHz", "a.u."),
            _fn_rabi_damped_cosine,
            (False,) * 4,
            _guess_rabi,
        )
    if name == "ramsey_model":
        _no_extra(name, options)
        return FitModel(
            name,
            ("amp", "t2_star", "freq", "phase", "baseline"),
            ("a.u.", "us", "MHz", "rad", "a.u."),
            _fn_ramsey,
            (False,) * 5,
            _guess_ramsey,
        )
    if name == "eseem_model":
        n = int(options.pop("n_components", 2))
        tau = options.pop("tau_convention", "half")
        _no_extra(name, options)
        if tau not in ("half", "full"):
            raise ValueError("tau_convention must be 'half' or 'full'")
        names = (
            ("amp", "t2", "power")
            + tuple(f"k{i+1}" for i in range(n))
            + tuple(f"freq{i+1}_khz" for i in range(n))
            + ("baseline",)
        )
        units = ("a.u.", "us", "") + ("",) * n + ("kHz",) * n + ("a.u.",)
        return FitModel(
            name,
            names,
            units,
            _make_fn_eseem(n, tau),
            (False,) * len(names),
            _make_guess_eseem(n),
            {"n_components": n, "tau_convention": tau},
        )
    if name == "orbach":
        _no_extra(name, options)
        return FitModel(
            name,
            ("a_per_s", "e_mev"),
            ("1/s", "meV"),
            _fn_orbach,
            (False, False),
            _guess_orbach,
        )
    if name == "raman":
        power = int(options.pop("power", 9))
        _no_extra(name, options)
        return FitModel(
            name,
            ("a_per_s", "delta_t_k"),
            ("1/(s K^n)", "K"),
            _make_fn_raman(power),
            (False, False),
            _make_guess_raman(power),
            {"power": power},
        )
    if name == "constant":
        _no_extra(name, options)
        return FitModel(name, ("value",), ("a.u.",), _fn_constant, (False,), _guess_constant)
    if name == "linear":
        _no_extra(name, options)
        return FitModel(
            name, ("slope", "intercept"), ("a.u.", "a.u."), _fn_linear, (False, False), _guess_linear
        )
    raise ValueError(f"unknown model id {name!r}; known: {', '.join(MODEL_IDS)}")


def _no_extra(name, options):
    if options:
        raise ValueError(f"unknown options for model {name}: {sorted(options)}")


MODEL_IDS = (
    "gaussian_two_peak",
    "lorentzian",
    "lorentzian_two_peak",
    "exp_decay",
    "exp_rise",
    "rabi_damped_cosine",
    "ramsey_model",
    "eseem_model",
    "orbach",
    "raman",
    "constant",
    "linear",
)


def eval_model(name: str, x, theta, **options):
    return get_model(name, **options)(x, theta)


# --------------------------------------------------------------------------
# Levenberg-Marquardt


@dataclass(frozen=True)
class FitResult:
    model_name: str
    theta: np.ndarray
    errors: np.ndarray
    covariance: np.ndarray
    reduced_chi2: float
    iterations: int
    converged: bool
    n_points: int
    data_hash: str
    param_names: tuple[str, ...] = ()
    units: tuple[str, ...] = ()
    model_meta: dict = field(default_factory=dict)

    def report(self) -> dict:
        return {
            "model": self.model_name,
            "parameters": {
                name: {
                    "value": float(v),
                    "sigma": float(s),
                    "unit": (self.units[i] if i < len(self.units) else ""),
                }
                for i, (name, v, s) in enumerate(
                    zip(self.param_names, self.theta, self.errors)
                )
            },
            "covariance": np.asarray(self.covariance).tolist(),
            "reduced_chi2": float(self.reduced_chi2),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "n_points": int(self.n_points),
            "data_hash": self.data_hash,
            "model_meta": dict(self.model_meta),
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.report(), indent=indent)


def _hash_data(x, y, sigma) -> str:
    h = hashlib.sha256()
    for arr in (x, y, sigma):
        h.update(np.ascontiguousarray(arr, dtype=float).tobytes())
    return h.hexdigest()[:16]


def _safe_eval(model, x, theta):
    try:
        with np.errstate(all="ignore"):
            y = model(x, theta)
    except (ModelDomainError, FloatingPointError):
        return None
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        return None
    return y


def _forward_jacobian(model, x, theta, f0, free_idx):
    jac = np.zeros((len(x), len(free_idx)))
    for col, j in enumerate(free_idx):
        h = math.sqrt(_EPS) * max(abs(theta[j]), 1.0)
        tp = theta.copy()
        tp[j] += h
        fp = _safe_eval(model, x, tp)
        if fp is None:
            tp[j] = theta[j] - h
            fp = _safe_eval(model, x, tp)
            if fp is None:
                raise ModelDomainError(
                    f"cannot differentiate parameter {model.param_names[j]!r} at {theta[j]}"
                )
            jac[:, col] = (f0 - fp) / h
        else:
            jac[:, col] = (fp - f0) / h
    return jac


def fit(
    model: FitModel,
    x,
    y,
    sigma,
    theta0,
    *,
    fixed=None,
    max_iter: int = _MAX_ITER,
) -> FitResult:
    """Weighted Levenberg-Marquardt fit.

    `fixed` is a boolean mask over parameters (defaults to the model's
    mask); fixed parameters keep their theta0 values. Returns the best
    point found even when the iteration cap is hit (converged=False).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    theta = np.array(theta0, dtype=float)
    if theta.shape != (model.n_params,):
        raise ValueError(f"theta0 must have {model.n_params} entries")
    if x.shape != y.shape or x.shape != sigma.shape:
        raise ValueError("x, y, sigma must have identical shapes")
    if np.any(sigma <= 0):
        raise ValueError("all sigmas must be > 0")
    fixed_mask = np.array(model.fixed_default if fixed is None else fixed, dtype=bool)
    if fixed_mask.shape != (model.n_params,):
        raise ValueError("fixed mask length mismatch")
    free_idx = np.where(~fixed_mask)[0]
    k = len(free_idx)
    if k < 1:
        raise ValueError("at least one parameter must be free")
    if len(x) < k + 1:
        raise ValueError(f"need at least {k + 1} points for {k} free parameters")

    f0 = _safe_eval(model, x, theta)
    if f0 is None:
        raise ModelDomainError("model is not finite at theta0")
    resid = (y - f0) / sigma
    chi2 = float(resid @ resid)

    lam = _LAMBDA0
    iterations = 0
    converged = False
    while iterations < max_iter:
        iterations += 1
        jac = -_forward_jacobian(model, x, theta, f0, free_idx) / sigma[:, None]
        normal = jac.T @ jac
        grad = jac.T @ resid
        diag = np.diag(normal).copy()
        if np.any(diag <= 0):
            dead = [model.param_names[free_idx[i]] for i in np.where(diag <= 0)[0]]
            raise SingularNormalMatrixError(
                float(np.linalg.cond(normal)),
                f"parameters with no effect on the data: {dead}",
            )
        accepted = False
        while lam < 1e12:
            try:
                step = np.linalg.solve(normal + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                raise SingularNormalMatrixError(float(np.linalg.cond(normal))) from None
            trial = theta.copy()
            trial[free_idx] += step
            f_try = _safe_eval(model, x, trial)
            if f_try is not None:
                r_try = (y - f_try) / sigma
                chi2_try = float(r_try @ r_try)
                if chi2_try <= chi2:
                    rel_drop = (chi2 - chi2_try) / max(chi2, 1e-300)
                    theta, f0, resid, chi2 = trial, f_try, r_try, chi2_try
                    lam = max(lam / 10.0, 1e-15)
                    accepted = True
                    if rel_drop < _CHI2_RTOL:
                        converged = True
                    break
            lam *= 10.0
        if not accepted:
            # no downhill step exists at any damping: stationary point
            converged = True
        if converged:
            break

    jac = -_forward_jacobian(model, x, theta, f0, free_idx) / sigma[:, None]
    normal = jac.T @ jac
    dof = max(len(x) - k, 1)
    red_chi2 = chi2 / dof
    try:
        cov_free = np.linalg.inv(normal)
    except np.linalg.LinAlgError:
        cov_free = np.linalg.pinv(normal)
    cov_free = cov_free * red_chi2
    cov = np.zeros((model.n_params, model.n_params))
    cov[np.ix_(free_idx, free_idx)] = cov_free
    errors = np.sqrt(np.clip(np.diag(cov), 0.0, None))

    return FitResult(
        model_name=model.name,
        theta=theta,
        errors=errors,
        covariance=cov,
        reduced_chi2=red_chi2,
        iterations=iterations,
        converged=converged,
        n_points=len(x),
        data_hash=_hash_data(x, y, sigma),
        param_names=model.param_names,
        units=model.units,
        model_meta=dict(model.meta),
    )


def fit_auto(model: FitModel, x, y, sigma, **kwargs) -> FitResult:
    """Fit with the model's built-in initial-guess heuristic."""
    if model.guess is None:
        raise ValueError(f"model {model.name} has no guess heuristic")
    theta0 = model.guess(np.asarray(x, float), np.asarray(y, float))
    return fit(model, x, y, sigma, theta0, **kwargs)


def compare_models(fits) -> list[dict]:
    """Rank fits of the same data by ascending reduced chi-square.

    Ties keep input order. Raises ValueError when the fits were not all
    performed on identical data.
    """
    fits = list(fits)
    if not fits:
        return []
    ref = fits[0].data_hash
    for f in fits[1:]:
        if f.data_hash != ref:
            raise ValueError("compare_models requires fits of identical data")
    order = sorted(range(len(fits)), key=lambda i: (fits[i].reduced_chi2, i))
    best = fits[order[0]].reduced_chi2
    return [
        {
            "rank": rank + 1,
            "model": fits[i].model_name,
            "reduced_chi2": fits[i].reduced_chi2,
            "delta": fits[i].reduced_chi2 - best,
            "fit": fits[i],
        }
        for rank, i in enumerate(order)
    ]


def jacobian_check(model: FitModel, x, theta) -> float:
    """Max relative deviation between forward- and central-difference Jacobians."""
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    f0 = _safe_eval(model, x, theta)
    if f0 is None:
        raise ModelDomainError("model is not finite at theta")
    free_idx = np.arange(model.n_params)
    forward = _forward_jacobian(model, x, theta, f0, free_idx)
    central = np.zeros_like(forward)
    for col, j in enumerate(free_idx):
        h = _EPS ** (1.0 / 3.0) * max(abs(theta[j]), 1.0)
        tp, tm = theta.copy(), theta.copy()
        tp[j] += h
        tm[j] -= h
        fp = _safe_eval(model, x, tp)
        fm = _safe_eval(model, x, tm)
        if fp is None or fm is None:
            raise ModelDomainError("central difference left the model domain")
        central[:, col] = (fp - fm) / (2 * h)
    scale = max(float(np.max(np.abs(central))), 1e-300)
    denom = np.maximum(np.abs(central), 1e-8 * scale)
    return float(np.max(np.abs(forward - central) / denom))
