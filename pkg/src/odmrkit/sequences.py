"""Pulse sequences, the protocol catalog, and the sweep engine.

`build_protocol` constructs the canonical pulse sequence for every sweep
point; `run_protocol` produces the measured trace. For speed the engine
shares the polarization prefix across sweep points (it does not depend on
the microwave-detuning node), reuses one readout-weight vector (the
photon count is a linear functional of the populations entering the
probe, because nothing couples coherences back into populations once the
microwave is off), and propagates each node's generator through an
eigendecomposition instead of one exponential per point. A test pins the
engine to brute-force evolution of the built sequences.

Coherent protocols average over the Lorentzian spread of microwave
detunings (the frequency-domain face of T2*); packet generators therefore
carry no inhomogeneous dephasing of their own. The Hahn-echo signal is
the simulated pulse outcome multiplied by the phenomenological
echo envelope (stretched exponential times nuclear-modulation product);
Ramsey decay, by contrast, emerges from the detuning ensemble itself.
"""

from __future__ import annotations

import dataclasses
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import detection as det
from .dynamics import (
    DriveSet,
    MicrowaveDrive,
    QuantumState,
    build_generator,
    evolve_sequence,
    propagate_times,
)
from .ensemble import gaussian_nodes, line_nodes, ple_spectrum
from .ensemble import hole_recovery_scan as _hole_scan
from .ensemble import odmr_scan as _odmr_scan
from .params import DefectParams, DetectionConfig, ProtocolConfig, RunConfig, T1Model
from .spincore import ground_levels

PROTOCOL_IDS = (
    "rabi",
    "ramsey",
    "hahn_echo",
    "t1_inversion",
    "polarization_buildup",
    "ple_scan",
    "odmr_scan",
    "hole_scan",
    "optical_lifetime",
)


# --------------------------------------------------------------------------
# Pulse-sequence description


@dataclass(frozen=True)
class LaserPulse:
    duration_us: float
    pump_per_us: tuple[float, float, float]
    is_probe: bool = False


@dataclass(frozen=True)
class MwPulse:
    target: str
    rabi_mhz: float
    duration_us: float
    detuning_mhz: float = 0.0
    phase_rad: float = 0.0


@dataclass(frozen=True)
class WaitSegment:
    duration_us: float


@dataclass(frozen=True)
class ReadoutGate:
    duration_us: float


Segment = LaserPulse | MwPulse | WaitSegment | ReadoutGate


@dataclass(frozen=True)
class PulseSequence:
    """One shot: ordered segments plus the rotating-frame bookkeeping."""

    segments: tuple[Segment, ...]
    frame_target: str = "plus"
    frame_detuning_mhz: float = 0.0

    def __post_init__(self):
        if not any(isinstance(s, ReadoutGate) for s in self.segments):
            raise ValueError("a pulse sequence needs at least one readout gate")
        for s in self.segments:
            if s.duration_us <= 0:
                raise ValueError("all segment durations must be > 0")

    def lower(self, cfg: DetectionConfig) -> list[DriveSet]:
        """Translate to DriveSet segments for the dynamics module."""
        frame = (MicrowaveDrive(self.frame_target, 0.0, self.frame_detuning_mhz),)
        out: list[DriveSet] = []
        for s in self.segments:
            if isinstance(s, LaserPulse):
                out.append(
                    DriveSet(
                        duration_us=s.duration_us,
                        pump_per_us=s.pump_per_us,
                        ground_mixing_per_us=(
                            cfg.probe_reset_rate_per_us if s.is_probe else 0.0
                        ),
                    )
                )
            elif isinstance(s, MwPulse):
                out.append(
                    DriveSet(
                        duration_us=s.duration_us,
                        mw=(
                            MicrowaveDrive(
                                s.target, s.rabi_mhz, s.detuning_mhz, s.phase_rad
                            ),
                        ),
                    )
                )
            elif isinstance(s, WaitSegment):
                out.append(DriveSet(duration_us=s.duration_us, mw=frame))
            elif isinstance(s, ReadoutGate):
                out.append(DriveSet(duration_us=s.duration_us, gate=True))
            else:
                raise TypeError(f"unknown segment {s!r}")
        return out


@dataclass(frozen=True)
class ProtocolSpec:
    """A protocol id, its sweep grid, and fixed settings."""

    id: str
    sweep: np.ndarray
    settings: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.id not in PROTOCOL_IDS:
            raise ValueError(f"unknown protocol {self.id!r}; known: {PROTOCOL_IDS}")
        object.__setattr__(self, "sweep", np.asarray(self.sweep, dtype=float))
        d = np.diff(self.sweep)
        if self.sweep.size < 2 or not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("sweep grid must be strictly monotone with >= 2 points")

    @classmethod
    def from_config(cls, proto: ProtocolConfig) -> "ProtocolSpec":
        return cls(id=proto.id, sweep=proto.grid(), settings=dict(proto.settings))


def _pi_time_us(p: DefectParams) -> float:
    return 1.0 / (2.0 * p.rabi_freq_mhz)


def _resolve(spec: ProtocolSpec, config: RunConfig) -> dict:
    s = {
        "b_gauss": config.field_b_gauss,
        "temperature_k": config.temperature_k,
        "pump_time_us": 5000.0,
        "probe_time_us": 50.0,
        "sideband_ratio": 1.0,
        "mw_target": "plus",
        "detuning_mhz": 5.0,
        "ramsey_pulse_rabi_mhz": 6.0,
        "ramsey_detune_pulses": False,
        "n_amp_nodes": 9,
        "counts_scale": 5e7,
        "pump_t_opt": 0.1,
        "t_burn_us": 500.0,
        "odmr_pump_t_opt": 0.3,
        "t_meas_us": 2000.0,
        "mw_probe_rabi_mhz": 0.05,
        "exc_pump_t_opt": 3.0,
        "exc_time_us": 200.0,
        "bin_width_us": None,
    }
    s.update(spec.settings)
    return s


# --------------------------------------------------------------------------
# Canonical sequences


def build_protocol(spec: ProtocolSpec, p: DefectParams, config: RunConfig | None = None):
    """Canonical pulse sequences, one per sweep point.

    Zero-length sweep values simply omit the corresponding segment, since
    segments must have positive duration.
    """
    config = config or RunConfig(defect=p)
    s = _resolve(spec, config)
    w = p.pump_rate_per_us
    gate = config.detection.gate_window_us
    t_pi = _pi_time_us(p)
    pump = LaserPulse(s["pump_time_us"], (w, s["sideband_ratio"] * w, 0.0))
    probe = LaserPulse(s["probe_time_us"], (w, 0.0, 0.0), is_probe=True)
    target = s["mw_target"]
    out = []

    if spec.id == "rabi":
        for tau in spec.sweep:
            segs = [pump]
            if tau > 0:
                segs.append(MwPulse(target, p.rabi_freq_mhz, tau))
            segs += [probe, ReadoutGate(gate)]
            out.append(PulseSequence(tuple(segs), frame_target=target))
        return out

    if spec.id == "ramsey":
        # The fringe detuning lives in the free-evolution frame; the pi/2
        # pulses themselves are resonant unless ramsey_detune_pulses is
        # set (the source has IQ control, so a frequency jump is cheap).
        dmw = s["detuning_mhz"]
        pulse_rabi = s["ramsey_pulse_rabi_mhz"]
        pulse_det = dmw if s["ramsey_detune_pulses"] else 0.0
        half = MwPulse(target, pulse_rabi, 1.0 / (4.0 * pulse_rabi), detuning_mhz=pulse_det)
        for t in spec.sweep:
            segs = [pump, half]
            if t > 0:
                segs.append(WaitSegment(t))
            segs += [half, probe, ReadoutGate(gate)]
            out.append(
                PulseSequence(tuple(segs), frame_target=target, frame_detuning_mhz=dmw)
            )
        return out

    if spec.id == "hahn_echo":
        for t in spec.sweep:
            for sign in (+1, -1):
                segs = [
                    pump,
                    MwPulse(
                        target,
                        p.rabi_freq_mhz,
                        0.5 * t_pi,
                        phase_rad=0.0 if sign > 0 else math.pi,
                    ),
                ]
                if t > 0:
                    segs.append(WaitSegment(0.5 * t))
                segs.append(MwPulse(target, p.rabi_freq_mhz, t_pi, phase_rad=0.5 * math.pi))
                if t > 0:
                    segs.append(WaitSegment(0.5 * t))
                segs += [
                    MwPulse(target, p.rabi_freq_mhz, 0.5 * t_pi),
                    probe,
                    ReadoutGate(gate),
                ]
                out.append(PulseSequence(tuple(segs), frame_target=target))
        return out

    if spec.id == "t1_inversion":
        for t in spec.sweep:
            for n_pi in (1, 2):
                segs = [pump, MwPulse(target, p.rabi_freq_mhz, n_pi * t_pi)]
                if t > 0:
                    segs.append(WaitSegment(t))
                segs += [probe, ReadoutGate(gate)]
                out.append(PulseSequence(tuple(segs), frame_target=target))
        return out

    if spec.id == "polarization_buildup":
        for t in spec.sweep:
            for with_pi in (True, False):
                segs = []
                if t > 0:
                    segs.append(LaserPulse(t, (w, s["sideband_ratio"] * w, 0.0)))
                if with_pi:
                    segs.append(MwPulse(target, p.rabi_freq_mhz, t_pi))
                segs += [probe, ReadoutGate(gate)]
                out.append(PulseSequence(tuple(segs), frame_target=target))
        return out

    if spec.id == "optical_lifetime":
        exc = LaserPulse(s["exc_time_us"], (s["exc_pump_t_opt"] / p.t_opt_us,) * 3)
        horizon = float(spec.sweep[-1]) + 1.0
        return [PulseSequence((exc, ReadoutGate(horizon)))]

    if spec.id in ("ple_scan", "odmr_scan", "hole_scan"):
        # continuous-tone scans; realized directly by the ensemble module
        return [PulseSequence((probe, ReadoutGate(gate)))]

    raise ValueError(f"unknown protocol {spec.id!r}")


# --------------------------------------------------------------------------
# Phenomenological envelopes and rate models


def echo_envelope(t_free_us, p: DefectParams):
    """Multiplicative coherence factor for a Hahn echo of total free time t.

    Stretched-exponential decay times the nuclear-precession modulation
    product; tau is t/2 by default (each free-evolution arm), switchable
    to tau = t via DefectParams.eseem_tau_convention.
    """
    t = np.asarray(t_free_us, dtype=float)
    if np.any(t < 0):
        raise ValueError("t_free_us must be >= 0")
    tau = 0.5 * t if p.eseem_tau_convention == "half" else t
    with np.errstate(divide="ignore"):
        env = np.exp(-((t / p.t2_us) ** p.echo_n))
    for k, f_khz in p.eseem_components:
        env = env * (1.0 - k * np.sin(np.pi * f_khz * 1e-3 * tau) ** 2)
    return env if env.shape else float(env)


def t1_rate_model(temperature_k: float, model: T1Model) -> float:
    """Longitudinal relaxation rate 1/T1 in 1/s at the given temperature."""
    return model.rate_per_s(temperature_k)


# --------------------------------------------------------------------------
# Sweep results


@dataclass
class SweepResult:
    protocol: str
    sweep_name: str
    sweep_values: np.ndarray
    mean_counts: np.ndarray
    sampled_counts: np.ndarray
    sigma: np.ndarray
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("sweep_value,mean_counts,sampled_counts,sigma\n")
        for x, m, c, s in zip(
            self.sweep_values, self.mean_counts, self.sampled_counts, self.sigma
        ):
            buf.write(f"{x:.12g},{m:.12g},{c:.12g},{s:.12g}\n")
        return buf.getvalue()

    def fit_sigma(self, use_sampled: bool = False) -> np.ndarray:
        """Sigmas for fitting: Poisson errors, floored at one count."""
        if use_sampled:
            return np.maximum(self.sigma, 1.0)
        return np.sqrt(np.maximum(np.abs(self.mean_counts), 1.0))


# --------------------------------------------------------------------------
# Engine helpers


def _detuning_nodes(p: DefectParams, n: int, scale_mhz: float = 2.0):
    """Microwave-detuning nodes weighted by the spin Lorentzian density.

    A plain Cauchy-quadrature grid clusters its nodes inside the 0.66 MHz
    half width, which under-resolves the oscillatory late-time ensemble
    sums (pulse response extends over the drive bandwidth). A wider tan
    grid with explicit density weights integrates the same distribution
    but keeps the oscillations resolved.
    """
    x, jac = line_nodes(max(scale_mhz, 0.5 * p.odmr_fwhm_mhz), n)
    g = 0.5 * p.odmr_fwhm_mhz
    return x, jac * (g / math.pi) / (x**2 + g**2)


def _amplitude_nodes(p: DefectParams, n: int):
    if p.rabi_spread_frac <= 0 or n <= 1:
        return np.array([p.rabi_freq_mhz]), np.array([1.0])
    x, w = gaussian_nodes(p.rabi_spread_frac * p.rabi_freq_mhz * 2.3548200450309493, n)
    omegas = np.maximum(p.rabi_freq_mhz + x, 1e-6)
    return omegas, w


def readout_weights(
    p: DefectParams,
    cfg: DetectionConfig,
    probe_time_us: float,
    *,
    temperature_k: float = 15.0,
    samples: int = 400,
) -> np.ndarray:
    """Expected counts from one unit of population in each basis state.

    The probe + gate block is microwave-free, so counts are linear in the
    four populations entering the probe; these weights capture the whole
    readout including the probe-induced spin reset.
    """
    segments = [
        DriveSet(
            duration_us=probe_time_us,
            pump_per_us=(p.pump_rate_per_us, 0.0, 0.0),
            ground_mixing_per_us=cfg.probe_reset_rate_per_us,
        ),
        DriveSet(duration_us=cfg.gate_window_us, gate=True),
    ]
    w = np.empty(4)
    for i in range(4):
        traj = evolve_sequence(
            QuantumState.basis(i),
            segments,
            p,
            temperature_k=temperature_k,
            free_dephasing_us=math.inf,
            samples_per_segment=samples,
        )
        w[i] = det.expected_counts(traj, p, cfg)
    return w


def polarize_state(
    p: DefectParams,
    pump_time_us: float,
    *,
    sideband_ratio: float = 1.0,
    temperature_k: float = 15.0,
) -> QuantumState:
    """Ground-state polarization by two-tone pumping of ms=0 and ms=-1."""
    state = QuantumState.thermal_ground()
    if pump_time_us <= 0:
        return state
    w = p.pump_rate_per_us
    seg = DriveSet(duration_us=pump_time_us, pump_per_us=(w, sideband_ratio * w, 0.0))
    gen = build_generator(p, seg, temperature_k=temperature_k, free_dephasing_us=math.inf)
    return QuantumState(propagate_times(gen, state, np.array([pump_time_us]))[0])


def _pulse_propagator(p, target, rabi, duration, detuning, phase, temperature_k):
    gen = build_generator(
        p,
        DriveSet(
            duration_us=max(duration, 1e-12),
            mw=(MicrowaveDrive(target, rabi, detuning, phase),),
        ),
        temperature_k=temperature_k,
        free_dephasing_us=math.inf,
    )
    return gen.propagator(duration)

def _wait_generator(p, target, detuning, temperature_k):
    return build_generator(
        p,
        DriveSet(duration_us=1.0, mw=(MicrowaveDrive(target, 0.0, detuning),)),
        temperature_k=temperature_k,
        free_dephasing_us=math.inf,
    )


def _apply_family(gen, vecs: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Apply exp(G t_i) to vecs[i] for every i; vecs shape (nt, 16)."""
    evals, v, vinv, cond = gen.eig()
    if vinv is not None and cond < 1e10:
        coeff = vecs @ vinv.T
        coeff = coeff * np.exp(times[:, None] * evals)
        return coeff @ v.T
    out = np.empty_like(vecs)
    for i, t in enumerate(times):
        out[i] = gen.propagator(float(t)) @ vecs[i]
    return out


def _populations(vecs: np.ndarray) -> np.ndarray:
    rhos = vecs.reshape(-1, 4, 4)
    return np.real(np.einsum("nii->ni", rhos))


# --------------------------------------------------------------------------
# run_protocol


def run_protocol(spec: ProtocolSpec, config: RunConfig) -> SweepResult:
    """Simulate a protocol sweep and return counts with shot noise.

    Deterministic for a fixed detection seed: every sweep point draws
    from its own derived stream, so results do not depend on evaluation
    order.
    """
    impl: dict[str, Callable] = {
        "rabi": _run_rabi,
        "ramsey": _run_ramsey,
        "hahn_echo": _run_hahn,
        "t1_inversion": _run_t1,
        "polarization_buildup": _run_buildup,
        "optical_lifetime": _run_lifetime,
        "ple_scan": _run_ple,
        "odmr_scan": _run_odmr,
        "hole_scan": _run_hole,
    }
    try:
        fn = impl[spec.id]
    except KeyError:
        raise ValueError(f"unknown protocol {spec.id!r}") from None
    return fn(spec, config)


def _poisson_columns(mean, config, *, seed_stream=0):
    """Sample a plain (single-branch) counts trace."""
    cfg = config.detection
    sampled = np.empty_like(mean)
    sigma = np.empty_like(mean)
    for i, m in enumerate(mean):
        rng = det.derive_seed(cfg.rng_seed, seed_stream, i)
        rec = det.poissonize(max(m, 0.0), cfg.dark_rate_cps, cfg.gate_window_us, cfg.repetitions, rng)
        net, s = det.dark_subtract(rec)
        sampled[i] = net
        sigma[i] = s
    return sampled, sigma


def _poisson_difference(mean_a, mean_b, config, *, seed_stream=0):
    """Sample two branches and difference them (common mode cancels)."""
    cfg = config.detection
    sampled = np.empty_like(mean_a)
    sigma = np.empty_like(mean_a)
    for i, (ma, mb) in enumerate(zip(mean_a, mean_b)):
        rng_a = det.derive_seed(cfg.rng_seed, seed_stream, i, 0)
        rng_b = det.derive_seed(cfg.rng_seed, seed_stream, i, 1)
        ra = det.poissonize(max(ma, 0.0), cfg.dark_rate_cps, cfg.gate_window_us, cfg.repetitions, rng_a)
        rb = det.poissonize(max(mb, 0.0), cfg.dark_rate_cps, cfg.gate_window_us, cfg.repetitions, rng_b)
        na, _ = det.dark_subtract(ra)
        nb, _ = det.dark_subtract(rb)
        sampled[i] = na - nb
        sigma[i] = math.sqrt(ra.sampled_counts + rb.sampled_counts)
    return sampled, sigma


def _run_rabi(spec, config):
    p = config.defect
    s = _resolve(spec, config)
    taus = spec.sweep
    pol = polarize_state(
        p, s["pump_time_us"], sideband_ratio=s["sideband_ratio"], temperature_k=s["temperature_k"]
    )
    w = readout_weights(p, config.detection, s["probe_time_us"], temperature_k=s["temperature_k"])
    eps, w_eps = _detuning_nodes(p, config.ensemble.n_nodes)
    omegas, w_om = _amplitude_nodes(p, s["n_amp_nodes"])
    mean = np.zeros_like(taus)
    for om, wo in zip(omegas, w_om):
        for e, we in zip(eps, w_eps):
            gen = build_generator(
                p,
                DriveSet(duration_us=1.0, mw=(MicrowaveDrive(s["mw_target"], om, e),)),
                temperature_k=s["temperature_k"],
                free_dephasing_us=math.inf,
            )
            pops = _populations(
                propagate_times(gen, pol, taus).reshape(len(taus), 16)
            )
            mean += wo * we * (pops @ w)
    sampled, sigma = _poisson_columns(mean, config)
    return SweepResult(
        "rabi", "mw_pulse_us", taus, mean, sampled, sigma,
        {"settings": s, "seed": config.detection.rng_seed, "polarization": pol.populations.tolist()},
    )


def _run_ramsey(spec, config):
    p = config.defect
    s = _resolve(spec, config)
    ts = spec.sweep
    pol = polarize_state(
        p, s["pump_time_us"], sideband_ratio=s["sideband_ratio"], temperature_k=s["temperature_k"]
    )
    w = readout_weights(p, config.detection, s["probe_time_us"], temperature_k=s["temperature_k"])
    eps, w_eps = _detuning_nodes(p, config.ensemble.n_nodes)
    pulse_rabi = s["ramsey_pulse_rabi_mhz"]
    t_half = 1.0 / (4.0 * pulse_rabi)
    pulse_extra = s["detuning_mhz"] if s["ramsey_detune_pulses"] else 0.0
    mean = np.zeros_like(ts)
    for e, we in zip(eps, w_eps):
        pulse = _pulse_propagator(
            p, s["mw_target"], pulse_rabi, t_half, pulse_extra + e, 0.0, s["temperature_k"]
        )
        gen_wait = _wait_generator(p, s["mw_target"], s["detuning_mhz"] + e, s["temperature_k"])
        v1 = pulse @ pol.rho.reshape(-1)
        waited = _apply_family(gen_wait, np.tile(v1, (len(ts), 1)), ts)
        final = waited @ pulse.T
        mean += we * (_populations(final) @ w)
    sampled, sigma = _poisson_columns(mean, config)
    return SweepResult(
        "ramsey", "free_evolution_us", ts, mean, sampled, sigma,
        {"settings": s, "seed": config.detection.rng_seed},
    )


def _run_hahn(spec, config):
    p = config.defect
    s = _resolve(spec, config)
    ts = spec.sweep
    pol = polarize_state(
        p, s["pump_time_us"], sideband_ratio=s["sideband_ratio"], temperature_k=s["temperature_k"]
    )
    w = readout_weights(p, config.detection, s["probe_time_us"], temperature_k=s["temperature_k"])
    eps, w_eps = _detuning_nodes(p, config.ensemble.n_nodes)
    # ideal rotations: the coherence decay is carried entirely by the
    # phenomenological envelope, and imperfect-pulse leakage would
    # otherwise survive the node discretization as spurious structure
    from .dynamics import ideal_mw_rotation, unitary_superoperator

    tgt = s["mw_target"]
    pulse_x = unitary_superoperator(ideal_mw_rotation(tgt, 0.5 * math.pi, 0.0))
    pulse_mx = unitary_superoperator(ideal_mw_rotation(tgt, 0.5 * math.pi, math.pi))
    pulse_y = unitary_superoperator(ideal_mw_rotation(tgt, math.pi, 0.5 * math.pi))
    counts = {+1: np.zeros_like(ts), -1: np.zeros_like(ts)}
    halves = ts / 2.0
    for e, we in zip(eps, w_eps):
        gen_wait = _wait_generator(p, tgt, e, s["temperature_k"])
        for sign, first in ((+1, pulse_x), (-1, pulse_mx)):
            v = first @ pol.rho.reshape(-1)
            arm1 = _apply_family(gen_wait, np.tile(v, (len(ts), 1)), halves)
            arm2 = _apply_family(gen_wait, arm1 @ pulse_y.T, halves)
            final = arm2 @ pulse_x.T
            counts[sign] += we * (_populations(final) @ w)
    common = 0.5 * (counts[+1] + counts[-1])
    coherent = 0.5 * (counts[+1] - counts[-1])
    env = echo_envelope(ts, p)
    branch_p = common + coherent * env
    branch_m = common - coherent * env
    mean = branch_p - branch_m
    sampled, sigma = _poisson_difference(branch_p, branch_m, config)
    return SweepResult(
        "hahn_echo", "free_evolution_us", ts, mean, sampled, sigma,
        {"settings": s, "seed": config.detection.rng_seed,
         "branch_means": (branch_p.tolist(), branch_m.tolist())},
    )


def _run_t1(spec, config):
    p = config.defect
    s = _resolve(spec, config)
    waits = spec.sweep
    pol = polarize_state(
        p, s["pump_time_us"], sideband_ratio=s["sideband_ratio"], temperature_k=s["temperature_k"]
    )
    w = readout_weights(p, config.detection, s["probe_time_us"], temperature_k=s["temperature_k"])
    eps, w_eps = _detuning_nodes(p, config.ensemble.n_nodes)
    t_pi = _pi_time_us(p)
    mean_pi = np.zeros_like(waits)
    mean_2pi = np.zeros_like(waits)
    for e, we in zip(eps, w_eps):
        u_pi = _pulse_propagator(p, s["mw_target"], p.rabi_freq_mhz, t_pi, e, 0.0, s["temperature_k"])
        u_2pi = _pulse_propagator(p, s["mw_target"], p.rabi_freq_mhz, 2 * t_pi, e, 0.0, s["temperature_k"])
        gen_wait = _wait_generator(p, s["mw_target"], e, s["temperature_k"])
        for u, acc in ((u_pi, mean_pi), (u_2pi, mean_2pi)):
            v = u @ pol.rho.reshape(-1)
            waited = _apply_family(gen_wait, np.tile(v, (len(waits), 1)), waits)
            acc += we * (_populations(waited) @ w)
    mean = mean_pi - mean_2pi
    sampled, sigma = _poisson_difference(mean_pi, mean_2pi, config)
    return SweepResult(
        "t1_inversion", "wait_us", waits, mean, sampled, sigma,
        {"settings": s, "seed": config.detection.rng_seed,
         "t1_us": p.t1_us(s["temperature_k"]),
         "branch_means": (mean_pi.tolist(), mean_2pi.tolist())},
    )


def _run_buildup(spec, config):
    p = config.defect
    s = _resolve(spec, config)
    t_pump = spec.sweep
    w = readout_weights(p, config.detection, s["probe_time_us"], temperature_k=s["temperature_k"])
    rate = p.pump_rate_per_us
    pump_gen = build_generator(
        p,
        DriveSet(duration_us=1.0, pump_per_us=(rate, s["sideband_ratio"] * rate, 0.0)),
        temperature_k=s["temperature_k"],
        free_dephasing_us=math.inf,
    )
    pumped = propagate_times(pump_gen, QuantumState.thermal_ground(), t_pump).reshape(
        len(t_pump), 16
    )
    eps, w_eps = _detuning_nodes(p, config.ensemble.n_nodes)
    t_pi = _pi_time_us(p)
    mean_pi = np.zeros_like(t_pump)
    for e, we in zip(eps, w_eps):
        u_pi = _pulse_propagator(p, s["mw_target"], p.rabi_freq_mhz, t_pi, e, 0.0, s["temperature_k"])
        mean_pi += we * (_populations(pumped @ u_pi.T) @ w)
    mean_no = _populations(pumped) @ w
    ref = mean_pi[-1]
    contrast_mean = 100.0 * (mean_pi - mean_no) / ref
    samp_pi, sig_pi = _poisson_columns(mean_pi, config, seed_stream=1)
    samp_no, sig_no = _poisson_columns(mean_no, config, seed_stream=2)
    ref_sampled = samp_pi[-1] if samp_pi[-1] > 0 else ref
    contrast_sampled = 100.0 * (samp_pi - samp_no) / ref_sampled
    sigma = 100.0 * np.sqrt(sig_pi**2 + sig_no**2) / ref_sampled
    return SweepResult(
        "polarization_buildup", "pump_time_us", t_pump,
        contrast_mean, contrast_sampled, sigma,
        {"settings": s, "seed": config.detection.rng_seed, "unit": "percent",
         "reference_counts": float(ref)},
    )


def _run_lifetime(spec, config):
    p = config.defect
    s = _resolve(spec, config)
    ts = spec.sweep
    cfg = config.detection
    exc = DriveSet(
        duration_us=s["exc_time_us"],
        pump_per_us=(s["exc_pump_t_opt"] / p.t_opt_us,) * 3,
    )
    gen_exc = build_generator(p, exc, temperature_k=s["temperature_k"], free_dephasing_us=math.inf)
    state = QuantumState(
        propagate_times(gen_exc, QuantumState.thermal_ground(), np.array([s["exc_time_us"]]))[0]
    )
    gen_dark = build_generator(
        p, DriveSet(duration_us=1.0), temperature_k=s["temperature_k"], free_dephasing_us=math.inf
    )
    rhos = propagate_times(gen_dark, state, ts)
    bin_w = s["bin_width_us"] or float(np.mean(np.diff(ts)))
    mean = (
        cfg.collection_efficiency
        * cfg.repetitions
        * bin_w
        / p.t_opt_us
        * np.real(rhos[:, 3, 3])
    )
    cfg_bin = config.detection
    sampled = np.empty_like(mean)
    sigma = np.empty_like(mean)
    for i, m in enumerate(mean):
        rng = det.derive_seed(cfg_bin.rng_seed, 0, i)
        rec = det.poissonize(max(m, 0.0), cfg_bin.dark_rate_cps, bin_w, cfg_bin.repetitions, rng)
        net, sg = det.dark_subtract(rec)
        sampled[i] = net
        sigma[i] = sg
    return SweepResult(
        "optical_lifetime", "time_us", ts, mean, sampled, sigma,
        {"settings": s, "seed": config.detection.rng_seed,
         "initial_excited": float(np.real(state.rho[3, 3])), "bin_width_us": bin_w},
    )


def _run_ple(spec, config):
    p = config.defect
    s = _resolve(spec, config)
    from .ensemble import EnsembleSpec

    spectrum = ple_spectrum(p, spec.sweep, spec=EnsembleSpec.from_params(p, config.ensemble))
    mean = spectrum.y * s["counts_scale"]
    sampled, sigma = _poisson_columns(mean, config)
    return SweepResult(
        "ple_scan", "laser_offset_mhz", spec.sweep, mean, sampled, sigma,
        {"settings": s, "seed": config.detection.rng_seed},
    )


def _run_odmr(spec, config):
    p = config.defect
    s = _resolve(spec, config)
    from .ensemble import EnsembleSpec

    spectrum = _odmr_scan(
        p,
        spec.sweep,
        s["b_gauss"],
        spec=EnsembleSpec.from_params(p, config.ensemble),
        pump_t_opt=s["odmr_pump_t_opt"],
        mw_rabi_mhz=s["mw_probe_rabi_mhz"],
        t_meas_us=s["t_meas_us"],
        temperature_k=s["temperature_k"],
    )
    mean = spectrum.y * config.detection.collection_efficiency * config.detection.repetitions
    sampled, sigma = _poisson_columns(mean, config)
    return SweepResult(
        "odmr_scan", "mw_frequency_mhz", spec.sweep, mean, sampled, sigma,
        {"settings": s, "seed": config.detection.rng_seed},
    )


def _run_hole(spec, config):
    p = config.defect
    s = _resolve(spec, config)
    from .ensemble import EnsembleSpec

    spectrum = _hole_scan(
        p,
        spec.sweep,
        s["b_gauss"],
        spec=EnsembleSpec.from_params(p, config.ensemble),
        pump_t_opt=s["pump_t_opt"],
        sideband_ratio=s["sideband_ratio"],
        t_burn_us=s["t_burn_us"],
        temperature_k=s["temperature_k"],
    )
    mean = spectrum.y * config.detection.collection_efficiency * config.detection.repetitions
    sampled, sigma = _poisson_columns(mean, config)
    return SweepResult(
        "hole_scan", "sideband_offset_mhz", spec.sweep, mean, sampled, sigma,
        {"settings": s, "seed": config.detection.rng_seed},
    )


# --------------------------------------------------------------------------
# Temperature study


def t1_temperature_study(
    config: RunConfig,
    temperatures_k=(15.0, 18.0, 21.0, 24.0, 27.0, 30.0),
    n_waits: int = 17,
    use_sampled: bool = True,
    seed_offset: int = 0,
    repetitions: int | None = 5_000_000,
):
    """Inversion-recovery study: per-temperature T1 fits plus rate models.

    Runs t1_inversion at each temperature (wait grids scaled to the local
    T1), fits each trace to an exponential, converts to rates with
    propagated errors, then fits both temperature models (activated
    exponential, and fixed-odd-power laws) weighted by those errors and
    ranks them by reduced chi-square.

    The difference traces ride on the dark-count shot noise, so the study
    defaults to more repetitions than a single sweep would use; each
    noisy fit starts from the noiseless-trace fit to keep the exponential
    out of its flat-tau degeneracy.
    """
    from . import fitting

    p = config.defect
    temps = np.asarray(temperatures_k, dtype=float)
    t1_fits = []
    rates = np.empty_like(temps)
    rate_sigmas = np.empty_like(temps)
    model = fitting.get_model("exp_decay")
    for i, temp in enumerate(temps):
        t1_us = p.t1_us(temp)
        waits = np.linspace(0.0, 3.0 * t1_us, n_waits)
        det = dataclasses.replace(
            config.detection,
            rng_seed=config.detection.rng_seed + seed_offset + i,
            repetitions=repetitions or config.detection.repetitions,
        )
        cfg_t = dataclasses.replace(config, temperature_k=float(temp), detection=det)
        res = run_protocol(ProtocolSpec("t1_inversion", waits, {"b_gauss": 0.0}), cfg_t)
        guess = fitting.fit(
            model,
            waits,
            res.mean_counts,
            res.fit_sigma(),
            np.array([max(res.mean_counts[0], 1.0), t1_us, 0.0]),
        )
        if use_sampled:
            sig = np.maximum(res.sigma, 1.0)
            out = fitting.fit(model, waits, res.sampled_counts, sig, guess.theta)
        else:
            out = guess
        t1_fits.append(out)
        tau_us = out.theta[1]
        tau_err = out.errors[1]
        rates[i] = 1e6 / tau_us  # 1/s
        rate_sigmas[i] = 1e6 * tau_err / tau_us**2
    rate_sigmas = np.maximum(rate_sigmas, 1e-12 * np.abs(rates))

    candidates = [fitting.get_model("orbach")] + [
        fitting.get_model("raman", power=n) for n in (3, 5, 7, 9)
    ]
    model_fits = []
    for m in candidates:
        theta0 = m.guess(temps, rates)
        try:
            model_fits.append(fitting.fit(m, temps, rates, rate_sigmas, theta0))
        except (fitting.ModelDomainError, fitting.SingularNormalMatrixError):
            continue
    ranking = fitting.compare_models(model_fits)
    return {
        "temperatures_k": temps,
        "t1_fits": t1_fits,
        "rates_per_s": rates,
        "rate_sigmas": rate_sigmas,
        "model_fits": model_fits,
        "ranking": ranking,
    }


# --------------------------------------------------------------------------
# Canonical sweep grids


def canonical_protocol(protocol_id: str, p: DefectParams, config: RunConfig) -> ProtocolSpec:
    """Default sweep grid and settings for each protocol."""
    d = p.d_splitting_mhz
    grids = {
        "rabi": (np.linspace(0.0, 10.0, 81), {"b_gauss": 158.0}),
        "ramsey": (np.linspace(0.0, 0.9, 91), {"b_gauss": 158.0}),
        "hahn_echo": (np.linspace(0.0, 160.0, 81), {"b_gauss": 158.0}),
        "t1_inversion": (np.linspace(0.0, 4.0e6, 17), {"b_gauss": 0.0}),
        "polarization_buildup": (np.linspace(0.0, 6000.0, 25), {"b_gauss": 158.0}),
        "ple_scan": (np.linspace(-12000.0, 10000.0, 221), {}),
        "odmr_scan": (np.linspace(d - 8.0, d + 8.0, 161), {"b_gauss": 0.8931}),
        "hole_scan": (np.linspace(d - 120.0, d + 120.0, 81), {"b_gauss": 0.0}),
        "optical_lifetime": (np.linspace(2.5, 600.0, 120), {}),
    }
    if protocol_id not in grids:
        raise ValueError(f"unknown protocol {protocol_id!r}")
    sweep, settings = grids[protocol_id]
    return ProtocolSpec(id=protocol_id, sweep=sweep, settings=settings)
