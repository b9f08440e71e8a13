"""Photon-count readout: transient gating, dark counts, shot noise.

Collected photons come from the excited-state decay during the gate that
follows the probe pulse: expected counts are
eta * (1/T_opt) * integral of rho_ee over the gate * repetitions.
Sampling is Poisson on (signal + dark); dark counts are subtracted
afterwards exactly as in the measurement procedure, leaving the Poisson
error of the raw counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import SequenceTrajectory
from .params import DefectParams, DetectionConfig


@dataclass(frozen=True)
class CountRecord:
    expected_counts: float
    sampled_counts: int
    dark_contribution: float
    repetitions: int
    gate_window_us: float

    def __post_init__(self):
        if self.expected_counts < 0:
            raise ValueError("expected_counts must be >= 0")
        if self.sampled_counts < 0:
            raise ValueError("sampled_counts must be >= 0")
        if self.gate_window_us <= 0:
            raise ValueError("gate_window_us must be > 0")


def expected_counts(
    traj: SequenceTrajectory, p: DefectParams, cfg: DetectionConfig
) -> float:
    """Expected collected photons per sweep point (all repetitions).

    Integrates the excited population over every gate span of the
    trajectory; gates must lie inside the simulated time span.
    """
    if not traj.gate_spans_us:
        raise ValueError("trajectory has no gate span")
    t = traj.emission_times_us
    y = traj.emission_excited
    total = 0.0
    for t0, t1 in traj.gate_spans_us:
        if t0 < t[0] - 1e-9 or t1 > t[-1] + 1e-9:
            raise ValueError("gate span lies outside the simulated trajectory")
        mask = (t >= t0 - 1e-12) & (t <= t1 + 1e-12)
        total += float(np.trapezoid(y[mask], t[mask]))
    return cfg.collection_efficiency * total / p.t_opt_us * cfg.repetitions


def derive_seed(master_seed: int, *path: int) -> np.random.Generator:
    """Independent, run-order-free RNG stream for a sweep point.

    SeedSequence spawns use a splitmix-style derivation, so streams for
    different points never collide regardless of evaluation order.
    """
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(path))
    return np.random.Generator(np.random.PCG64(ss))


def poissonize(
    expected: float,
    dark_rate_cps: float,
    gate_us: float,
    repetitions: int,
    seed,
) -> CountRecord:
    """Draw one Poisson count sample; `seed` is an int or a numpy Generator."""
    if expected < 0 or dark_rate_cps < 0 or gate_us < 0 or repetitions < 0:
        raise ValueError("poissonize inputs must be >= 0")
    rng = seed if isinstance(seed, np.random.Generator) else derive_seed(int(seed))
    dark = dark_rate_cps * gate_us * 1e-6 * repetitions
    lam = expected + dark
    sampled = int(rng.poisson(lam)) if lam > 0 else 0
    return CountRecord(
        expected_counts=expected,
        sampled_counts=sampled,
        dark_contribution=dark,
        repetitions=repetitions,
        gate_window_us=gate_us if gate_us > 0 else 1.0,
    )


def dark_subtract(record: CountRecord) -> tuple[float, float]:
    """Net counts after dark subtraction and their Poisson sigma.

    Net counts can be negative after subtraction; the error is the shot
    noise of the raw counts, sqrt(sampled).
    """
    net = record.sampled_counts - record.dark_contribution
    return float(net), float(np.sqrt(record.sampled_counts))


def contrast(signal: float, reference: float, orientation: str = "dip") -> float:
    """Readout contrast in percent.

    "dip": population removed from the probed level dims the signal, so
    contrast = 100 * (reference - signal) / reference. "peak" flips the
    sign convention.
    """
    if reference <= 0:
        raise ValueError("reference must be > 0")
    c = 100.0 * (reference - signal) / reference
    if orientation == "dip":
        return c
    if orientation == "peak":
        return -c
    raise ValueError("orientation must be 'dip' or 'peak'")
