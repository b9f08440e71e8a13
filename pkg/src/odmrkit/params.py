"""Defect and experiment parameters: defaults, validation, config loading.

The central record is `DefectParams`. Default values come from measured
properties of the chromium-ion ensemble this package models; fields that no
measurement pins down are marked "assumed" or "calibrated" in `PROVENANCE`.
A `RunConfig` wraps a `DefectParams` together with field, temperature,
detection settings and a protocol request, and can be loaded from a JSON
document (see README for the schema).

Everything here is immutable after construction and safe to share across
parallel workers.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from typing import Any

from .constants import CONSTANTS

ENV_CONFIG_PATH = "ODMRKIT_CONFIG"

#: Default master seed used whenever a config does not supply one.
DEFAULT_SEED = 1063

_SUM_TOL = 1e-9


class ConfigError(ValueError):
    """A configuration document failed validation; message carries the field path."""


@dataclass(frozen=True)
class T1Model:
    """Temperature model for the longitudinal spin relaxation rate.

    kind "raman":  1/T1 = a * (T - delta_t_k) ** power   [1/s], T > delta_t_k
    kind "orbach": 1/T1 = a * exp(-e_mev / (k_B T))      [1/s]
    """

    kind: str = "raman"
    a: float = 0.0
    e_mev: float = 0.0
    delta_t_k: float = 0.0
    power: int = 9

    def rate_per_s(self, temperature_k: float) -> float:
        if self.kind == "orbach":
            return self.a * math.exp(
                -CONSTANTS.mev_to_kelvin(self.e_mev) / temperature_k
            )
        if self.kind == "raman":
            if temperature_k <= self.delta_t_k:
                raise ValueError(
                    f"raman T1 model needs T > delta_t_k ({self.delta_t_k} K), got {temperature_k} K"
                )
            return self.a * (temperature_k - self.delta_t_k) ** self.power
        raise ValueError(f"unknown T1 model kind {self.kind!r}")

    def t1_seconds(self, temperature_k: float) -> float:
        return 1.0 / self.rate_per_s(temperature_k)


def _default_t1_model() -> T1Model:
    # Raman process with power 9; prefactor pinned so T1(15 K) = 1.6 s.
    a = 1.0 / (1.6 * (15.0 - 3.2) ** 9)
    return T1Model(kind="raman", a=a, delta_t_k=3.2, power=9)


@dataclass(frozen=True)
class DefectParams:
    """All physical parameters of one defect species plus drive settings.

    Frequencies are linear frequencies in the unit named by the field
    suffix; times likewise. `branching` gives the probability of decay
    from the excited state into each ground sublevel (g0, g-, g+).
    """

    d_splitting_mhz: float = 1063.11
    g_parallel: float = 2.00
    zeeman_convention: str = "separation"  # or "shift"; see spincore.ground_levels
    t_opt_us: float = 156.3
    branching: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    inhom_fwhm_ms0_ghz: float = 6.87
    inhom_fwhm_ms1_ghz: float = 3.34
    homog_fwhm_mhz: float = 15.5
    odmr_fwhm_mhz: float = 1.32
    t2_star_ns: float = 307.0
    t2_us: float = 81.0
    echo_n: float = 1.9
    # (amplitude in [0,1], frequency in kHz) per nuclear species at the working field
    eseem_components: tuple[tuple[float, float], ...] = ((0.1, 87.5), (0.1, 68.0))
    eseem_tau_convention: str = "half"  # tau = t/2 ("half") or tau = t ("full")
    t1_model: T1Model = field(default_factory=_default_t1_model)
    rabi_freq_mhz: float = 1.0
    rabi_spread_frac: float = 0.03
    pump_rate_per_us: float = 1.0 / (9.0 * 156.3)

    def validate(self) -> None:
        _require(self.d_splitting_mhz > 0, "defect.d_splitting_mhz must be > 0")
        _require(self.g_parallel > 0, "defect.g_parallel must be > 0")
        _require(
            self.zeeman_convention in ("separation", "shift"),
            "defect.zeeman_convention must be 'separation' or 'shift'",
        )
        _require(self.t_opt_us > 0, "defect.t_opt_us must be > 0")
        b = self.branching
        _require(len(b) == 3, "defect.branching must have 3 entries")
        _require(
            all(0.0 <= x <= 1.0 for x in b),
            "defect.branching entries must lie in [0, 1]",
        )
        if abs(sum(b) - 1.0) > _SUM_TOL:
            raise ConfigError(f"defect.branching sums to {sum(b):g}")
        for name in (
            "inhom_fwhm_ms0_ghz",
            "inhom_fwhm_ms1_ghz",
            "homog_fwhm_mhz",
            "odmr_fwhm_mhz",
            "t2_star_ns",
            "t2_us",
            "rabi_freq_mhz",
            "pump_rate_per_us",
        ):
            _require(getattr(self, name) > 0, f"defect.{name} must be > 0")
        _require(self.echo_n > 0, "defect.echo_n must be > 0")
        _require(self.rabi_spread_frac >= 0, "defect.rabi_spread_frac must be >= 0")
        for k, f_khz in self.eseem_components:
            _require(0.0 <= k <= 1.0, "defect.eseem_components amplitudes must lie in [0, 1]")
            _require(f_khz > 0, "defect.eseem_components frequencies must be > 0")
        _require(
            self.eseem_tau_convention in ("half", "full"),
            "defect.eseem_tau_convention must be 'half' or 'full'",
        )
        _require(self.t1_model.a > 0, "defect.t1_model.a must be > 0")

    # -- convenience accessors -------------------------------------------------

    @property
    def t2_star_us(self) -> float:
        return self.t2_star_ns * 1e-3

    def t1_us(self, temperature_k: float) -> float:
        return self.t1_model.t1_seconds(temperature_k) * 1e6

    def replace(self, **changes) -> "DefectParams":
        out = dataclasses.replace(self, **changes)
        out.validate()
        return out


@dataclass(frozen=True)
class DetectionConfig:
    """Photon-detection settings.

    `probe_reset_rate_per_us` is the strength of the probe-induced spin
    reset (ground-state mixing active only while a probe laser segment
    runs). It is a free, empirically calibrated parameter; see
    calibrate.calibrate_probe_reset.
    """

    collection_efficiency: float = 1.0
    dark_rate_cps: float = 7500.0
    gate_window_us: float = 155.0
    repetitions: int = 20000
    rng_seed: int = DEFAULT_SEED
    probe_reset_rate_per_us: float = 0.0062

    def validate(self) -> None:
        _require(
            0.0 < self.collection_efficiency <= 1.0,
            "detection.collection_efficiency must lie in (0, 1]",
        )
        _require(self.dark_rate_cps >= 0, "detection.dark_rate_cps must be >= 0")
        _require(self.gate_window_us > 0, "detection.gate_window_us must be > 0")
        _require(self.repetitions >= 1, "detection.repetitions must be >= 1")
        _require(self.probe_reset_rate_per_us >= 0, "detection.probe_reset_rate_per_us must be >= 0")


@dataclass(frozen=True)
class EnsembleConfig:
    """Inhomogeneous-averaging settings: quadrature size or Monte Carlo draws."""

    n_nodes: int = 64
    method: str = "quadrature"  # or "montecarlo"
    mc_samples: int = 4096
    seed: int = DEFAULT_SEED

    def validate(self) -> None:
        _require(self.n_nodes >= 16, "ensemble.n_nodes must be >= 16")
        _require(self.method in ("quadrature", "montecarlo"), "ensemble.method unknown")
        _require(self.mc_samples >= 16, "ensemble.mc_samples must be >= 16")


@dataclass(frozen=True)
class ProtocolConfig:
    """Protocol request: id, sweep grid, and per-protocol settings overrides."""

    id: str = "rabi"
    sweep_start: float = 0.0
    sweep_stop: float = 10.0
    sweep_num: int = 81
    sweep_values: tuple[float, ...] | None = None
    settings: dict[str, Any] = field(default_factory=dict)

    def grid(self):
        import numpy as np

        if self.sweep_values is not None:
            return np.asarray(self.sweep_values, dtype=float)
        return np.linspace(self.sweep_start, self.sweep_stop, self.sweep_num)

    def validate(self) -> None:
        g = self.grid()
        _require(g.size >= 2, "protocol sweep grid needs at least 2 points")
        import numpy as np

        if not (np.all(np.diff(g) > 0) or np.all(np.diff(g) < 0)):
            raise ConfigError("protocol sweep grid must be strictly monotone")


@dataclass(frozen=True)
class RunConfig:
    defect: DefectParams = field(default_factory=DefectParams)
    field_b_gauss: float = 158.0
    temperature_k: float = 15.0
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)

    def validate(self) -> None:
        self.defect.validate()
        _require(self.field_b_gauss >= 0, "field_b_gauss must be >= 0")
        _require(self.temperature_k > 0, "temperature_k must be > 0")
        self.detection.validate()
        self.ensemble.validate()
        self.protocol.validate()

    def replace(self, **changes) -> "RunConfig":
        out = dataclasses.replace(self, **changes)
        out.validate()
        return out


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def default_params() -> DefectParams:
    """Return the fully populated default parameter set.

    Every numeric field has a provenance note in `PROVENANCE` saying which
    measurement pins it down, or that it is assumed/calibrated.
    """
    p = DefectParams()
    p.validate()
    return p


#: Provenance of every default in DefectParams: the measurement that pins the
#: value, or "assumed"/"calibrated" when nothing does.
PROVENANCE: dict[str, str] = {
    "d_splitting_mhz": "measured: zero-field ODMR line center",
    "g_parallel": "assumed: free-electron-like g; Zeeman convention left configurable",
    "zeeman_convention": "assumed: lines separated by 2 g muB B / h",
    "t_opt_us": "measured: transient emission decay under resonant excitation",
    "branching": "assumed: symmetric spin-forbidden decay, equal thirds",
    "inhom_fwhm_ms0_ghz": "measured: two-Gaussian fit of the excitation spectrum, ms=0 peak",
    "inhom_fwhm_ms1_ghz": "measured: two-Gaussian fit of the excitation spectrum, ms=+-1 peak",
    "homog_fwhm_mhz": "calibrated: set so the weak-burn hole FWHM (2x homogeneous) is 31 MHz",
    "odmr_fwhm_mhz": "measured: non-power-broadened ODMR linewidth",
    "t2_star_ns": "measured: Ramsey envelope decay (fitted value adopted)",
    "t2_us": "measured: Hahn-echo envelope decay",
    "echo_n": "measured: stretch exponent of the echo decay",
    "eseem_components": "measured: echo-modulation frequencies at 158 G; amplitudes assumed 0.1",
    "eseem_tau_convention": "assumed: tau is half the free evolution; configurable",
    "t1_model": "measured: Raman with power 9, offset 3.2 K; prefactor pinned to T1(15 K) = 1.6 s",
    "rabi_freq_mhz": "assumed: drive strength not reported; 1 MHz default",
    "rabi_spread_frac": "calibrated: drive-amplitude spread set so Rabi envelope decay is 4.76 us",
    "pump_rate_per_us": "assumed: 10% steady excited fraction under resonant CW drive; "
    "rescale with calibrate.calibrate_pump_rate",
}


# --------------------------------------------------------------------------
# JSON (de)serialization


def config_to_dict(cfg: RunConfig) -> dict:
    def clean(obj):
        if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
            return {k: clean(v) for k, v in dataclasses.asdict(obj).items()}
        if isinstance(obj, dict):
            return {k: clean(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [clean(v) for v in obj]
        return obj

    return clean(cfg)


def serialize_config(cfg: RunConfig, indent: int | None = 2) -> str:
    return json.dumps(config_to_dict(cfg), indent=indent, sort_keys=True)


def _build(cls, data: dict, path: str):
    """Construct dataclass `cls` from a dict, reporting unknown keys by path."""
    names = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in names:
            raise ConfigError(f"{path}.{key}: unknown field")
        kwargs[key] = value
    return cls, kwargs


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config document must be a JSON object")

    defect_data = dict(data.get("defect", {}))
    t1_data = defect_data.pop("t1_model", None)
    _, defect_kwargs = _build(DefectParams, defect_data, "defect")
    if "branching" in defect_kwargs:
        defect_kwargs["branching"] = tuple(defect_kwargs["branching"])
    if "eseem_components" in defect_kwargs:
        defect_kwargs["eseem_components"] = tuple(
            tuple(c) for c in defect_kwargs["eseem_components"]
        )
    if t1_data is not None:
        _, t1_kwargs = _build(T1Model, t1_data, "defect.t1_model")
        defect_kwargs["t1_model"] = T1Model(**t1_kwargs)
    defect = DefectParams(**defect_kwargs)

    _, det_kwargs = _build(DetectionConfig, dict(data.get("detection", {})), "detection")
    _, ens_kwargs = _build(EnsembleConfig, dict(data.get("ensemble", {})), "ensemble")
    _, proto_kwargs = _build(ProtocolConfig, dict(data.get("protocol", {})), "protocol")
    if "sweep_values" in proto_kwargs and proto_kwargs["sweep_values"] is not None:
        proto_kwargs["sweep_values"] = tuple(proto_kwargs["sweep_values"])

    top_known = {"defect", "detection", "ensemble", "protocol", "field_b_gauss", "temperature_k"}
    for key in data:
        if key not in top_known:
            raise ConfigError(f"{key}: unknown field")

    cfg = RunConfig(
        defect=defect,
        field_b_gauss=data.get("field_b_gauss", RunConfig.field_b_gauss),
        temperature_k=data.get("temperature_k", RunConfig.temperature_k),
        detection=DetectionConfig(**det_kwargs),
        ensemble=EnsembleConfig(**ens_kwargs),
        protocol=ProtocolConfig(**proto_kwargs),
    )
    cfg.validate()
    return cfg


def load_config(text: str | None = None, path: str | None = None) -> RunConfig:
    """Parse and validate a JSON config document.

    With neither `text` nor `path` given, falls back to the file named by
    the ODMRKIT_CONFIG environment variable, and finally to all defaults.
    Unspecified fields take the package defaults. Raises ConfigError with
    a field path on any invariant breach.
    """
    if text is None and path is None:
        path = os.environ.get(ENV_CONFIG_PATH)
        if path is None:
            return config_from_dict({})
    if text is None:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    text = text.strip()
    if not text:
        return config_from_dict({})
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config document: {exc}") from exc
    return config_from_dict(data)
