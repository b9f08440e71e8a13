"""Four-level open-system dynamics of a single defect.

Basis ordering is {|g0>, |g->, |g+>, |e>} (indices 0..3). The three
ground sublevels form the spin-1 manifold; |e> is the single optical
excited level, used purely as a decay reservoir with branching back into
the ground sublevels.

Conventions: time in microseconds, frequencies in MHz (linear), rates in
1/us, so the Hamiltonian enters the Liouvillian as 2*pi times MHz values.
Density matrices are propagated in vectorized (row-major) form through
exact matrix exponentials of the piecewise-constant Liouvillian; this
keeps second-long relaxation waits as cheap as microsecond pulses.

Optical excitation is an incoherent pump rate (per ground sublevel,
weighted by a unit-peak Lorentzian in the optical detuning), not a
coherent drive: the measured hole linewidth is orders of magnitude above
the lifetime limit, so optical coherences never build up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .params import ConfigError, DefectParams

DIM = 4
GROUND = (0, 1, 2)
EXCITED = 3
TARGET_INDEX = {"minus": 1, "plus": 2}

_TRACE_TOL = 1e-9


class DegenerateSteadyStateError(RuntimeError):
    """The generator has more than one stationary state."""

    def __init__(self, null_dim: int):
        super().__init__(
            f"steady state is not unique (null-space dimension {null_dim}); "
            "fall back to long-time propagation from a definite initial state"
        )
        self.null_dim = null_dim


# --------------------------------------------------------------------------
# States


@dataclass
class QuantumState:
    """4x4 density matrix over {|g0>, |g->, |g+>, |e>}."""

    rho: np.ndarray

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=complex)
        if self.rho.shape != (DIM, DIM):
            raise ValueError(f"rho must be {DIM}x{DIM}")

    @classmethod
    def thermal_ground(cls) -> "QuantumState":
        """Unpolarized ground manifold: kT >> D, so equal thirds."""
        return cls(np.diag([1 / 3, 1 / 3, 1 / 3, 0.0]).astype(complex))

    @classmethod
    def basis(cls, index: int) -> "QuantumState":
        rho = np.zeros((DIM, DIM), dtype=complex)
        rho[index, index] = 1.0
        return cls(rho)

    @classmethod
    def from_populations(cls, pops) -> "QuantumState":
        pops = np.asarray(pops, dtype=float)
        if pops.shape != (DIM,):
            raise ValueError("need 4 populations")
        return cls(np.diag(pops).astype(complex))

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.rho)).copy()

    @property
    def excited_population(self) -> float:
        return float(np.real(self.rho[EXCITED, EXCITED]))

    def purity(self) -> float:
        return float(np.real(np.trace(self.rho @ self.rho)))

    def validate(self, atol: float = _TRACE_TOL) -> None:
        if np.max(np.abs(self.rho - self.rho.conj().T)) > atol:
            raise ValueError("state is not Hermitian")
        if abs(np.trace(self.rho).real - 1.0) > atol:
            raise ValueError(f"trace is {np.trace(self.rho).real}, not 1")
        if np.linalg.eigvalsh((self.rho + self.rho.conj().T) / 2).min() < -atol:
            raise ValueError("state has a significantly negative eigenvalue")


# --------------------------------------------------------------------------
# Drives


@dataclass(frozen=True)
class MicrowaveDrive:
    """Rotating-frame microwave drive on one 0 <-> +-1 transition.

    detuning_mhz is (transition frequency) - (drive frequency); it stays
    in the Hamiltonian even at zero Rabi frequency, so free evolution
    accrues the rotating-frame phase of the same local oscillator.
    """

    target: str  # "minus" or "plus"
    rabi_mhz: float = 0.0
    detuning_mhz: float = 0.0
    phase_rad: float = 0.0

    def __post_init__(self):
        if self.target not in TARGET_INDEX:
            raise ValueError("target must be 'minus' or 'plus'")
        if self.rabi_mhz < 0:
            raise ValueError("rabi_mhz must be >= 0")


@dataclass(frozen=True)
class DriveSet:
    """Constant controls over one time segment.

    pump_per_us: incoherent optical pump rate out of each ground sublevel
    (peak value; the actual rate is scaled by the Lorentzian overlap with
    that sublevel's optical detuning). ground_mixing_per_us adds uniform
    pairwise mixing between ground sublevels (the probe-induced spin
    reset); gate marks the photon-collection window and has no effect on
    the dynamics.
    """

    duration_us: float
    pump_per_us: tuple[float, float, float] = (0.0, 0.0, 0.0)
    mw: tuple[MicrowaveDrive, ...] = ()
    ground_mixing_per_us: float = 0.0
    gate: bool = False

    def __post_init__(self):
        if self.duration_us <= 0:
            raise ValueError("duration_us must be > 0")
        if any(w < 0 for w in self.pump_per_us):
            raise ValueError("pump rates must be >= 0")
        if self.ground_mixing_per_us < 0:
            raise ValueError("ground_mixing_per_us must be >= 0")
        targets = [d.target for d in self.mw]
        if len(set(targets)) != len(targets):
            raise ValueError("at most one microwave drive per target transition")


def wait(duration_us: float, frame: tuple[MicrowaveDrive, ...] = ()) -> DriveSet:
    """Free evolution; pass `frame` to keep rotating-frame detunings active."""
    mw = tuple(
        MicrowaveDrive(d.target, 0.0, d.detuning_mhz, d.phase_rad) for d in frame
    )
    return DriveSet(duration_us=duration_us, mw=mw)


def mw_pulse(
    target: str,
    rabi_mhz: float,
    duration_us: float,
    detuning_mhz: float = 0.0,
    phase_rad: float = 0.0,
) -> DriveSet:
    return DriveSet(
        duration_us=duration_us,
        mw=(MicrowaveDrive(target, rabi_mhz, detuning_mhz, phase_rad),),
    )


def laser(
    duration_us: float,
    pump_per_us: tuple[float, float, float],
    ground_mixing_per_us: float = 0.0,
) -> DriveSet:
    return DriveSet(
        duration_us=duration_us,
        pump_per_us=tuple(pump_per_us),
        ground_mixing_per_us=ground_mixing_per_us,
    )


# --------------------------------------------------------------------------
# Generator


def lorentzian_peak(detuning_mhz, fwhm_mhz):
    """Unit-peak Lorentzian; weight of a pump tone at the given detuning."""
    hwhm = 0.5 * fwhm_mhz
    return hwhm**2 / (np.asarray(detuning_mhz) ** 2 + hwhm**2)


def ideal_mw_rotation(target: str, angle_rad: float, phase_rad: float = 0.0) -> np.ndarray:
    """Instantaneous microwave rotation on the 0 <-> target transition.

    Returns the 4x4 unitary for a rotation of the given area about the
    in-plane axis set by `phase_rad` (0 = x, pi/2 = y); the idealized
    limit of an infinitely strong, infinitely short pulse.
    """
    t = TARGET_INDEX[target]
    u = np.eye(DIM, dtype=complex)
    c = math.cos(0.5 * angle_rad)
    s = -1j * math.sin(0.5 * angle_rad)
    u[0, 0] = c
    u[t, t] = c
    u[0, t] = s * np.exp(1j * phase_rad)
    u[t, 0] = s * np.exp(-1j * phase_rad)
    return u


def unitary_superoperator(u: np.ndarray) -> np.ndarray:
    """Propagator on vec(rho) (row-major) for rho -> U rho U+."""
    return np.kron(u, u.conj())


@dataclass
class Generator:
    """Liouvillian for one constant-control segment, acting on vec(rho).

    Caches exact propagators per duration and an eigendecomposition for
    many-time propagation; both are derived data, so sharing a Generator
    across threads is read-mostly and cheap to rebuild.
    """

    matrix: np.ndarray
    t_opt_us: float
    _propagators: dict = field(default_factory=dict, repr=False)
    _eig: tuple | None = field(default=None, repr=False)

    def propagator(self, t_us: float) -> np.ndarray:
        key = float(t_us)
        prop = self._propagators.get(key)
        if prop is None:
            prop = expm(self.matrix * t_us)
            self._propagators[key] = prop
        return prop

    def eig(self):
        if self._eig is None:
            evals, vecs = np.linalg.eig(self.matrix)
            try:
                vinv = np.linalg.inv(vecs)
                cond = np.linalg.cond(vecs)
            except np.linalg.LinAlgError:
                cond = np.inf
                vinv = None
            self._eig = (evals, vecs, vinv, cond)
        return self._eig


def _hamiltonian_mhz(drives: DriveSet) -> np.ndarray:
    h = np.zeros((DIM, DIM), dtype=complex)
    for d in drives.mw:
        t = TARGET_INDEX[d.target]
        h[t, t] += d.detuning_mhz
        coupling = 0.5 * d.rabi_mhz * np.exp(1j * d.phase_rad)
        h[0, t] += coupling
        h[t, 0] += np.conj(coupling)
    return h


def _lindblad_matrix(h_mhz: np.ndarray, jumps) -> np.ndarray:
    """Assemble the Liouvillian for row-major vec(rho).

    vec(A rho B) = (A kron B^T) vec(rho) with row-major stacking.
    """
    eye = np.eye(DIM)
    ham = 2.0 * np.pi * h_mhz
    liou = -1j * (np.kron(ham, eye) - np.kron(eye, ham.T))
    for rate, op in jumps:
        if rate == 0.0:
            continue
        opd_op = op.conj().T @ op
        liou += rate * (
            np.kron(op, op.conj())
            - 0.5 * np.kron(opd_op, eye)
            - 0.5 * np.kron(eye, opd_op.T)
        )
    return liou


def _transfer_op(to_idx: int, from_idx: int) -> np.ndarray:
    op = np.zeros((DIM, DIM), dtype=complex)
    op[to_idx, from_idx] = 1.0
    return op


def ground_dephasing_rate(p: DefectParams, t1_us: float) -> float:
    """Pure-dephasing rate that makes free ground coherences decay at 1/T2*.

    The uniform thermalization already dephases ground coherences at
    2/(3 T1); the remainder is added as projector dephasing. A negative
    remainder means the requested T2* is inconsistent with T1.
    """
    budget = 1.0 / p.t2_star_us - (0.0 if math.isinf(t1_us) else 2.0 / (3.0 * t1_us))
    if budget < 0:
        raise ConfigError(
            f"T2* = {p.t2_star_ns} ns is inconsistent with T1 = {t1_us} us "
            "(dephasing budget is negative)"
        )
    return budget


def build_generator(
    p: DefectParams,
    drives: DriveSet,
    optical_detunings=(0.0, 0.0, 0.0),
    *,
    temperature_k: float = 15.0,
    t1_us: float | None = None,
    free_dephasing_us: float | None = None,
) -> Generator:
    """Liouvillian for one constant-control segment.

    optical_detunings are the laser detunings (MHz) from each ground
    sublevel's optical line; they scale the pump rates by a unit-peak
    Lorentzian of the homogeneous width.

    free_dephasing_us sets the total free-evolution ground-coherence
    decay time. The default (None) uses T2*, appropriate when a single
    generator stands in for the whole ensemble. Ensemble-averaged code
    paths model the inhomogeneous spread explicitly and should pass
    numpy.inf so the spread is not counted twice.
    """
    if t1_us is None:
        t1_us = p.t1_us(temperature_k)
    if t1_us <= 0:
        raise ConfigError("t1_us must be > 0 (use numpy.inf to disable)")

    jumps = []
    weights = lorentzian_peak(np.asarray(optical_detunings, dtype=float), p.homog_fwhm_mhz)
    for i, (pump, w) in enumerate(zip(drives.pump_per_us, weights)):
        if pump > 0:
            jumps.append((pump * float(w), _transfer_op(EXCITED, GROUND[i])))

    decay = 1.0 / p.t_opt_us
    for i, b in enumerate(p.branching):
        if b > 0:
            jumps.append((decay * b, _transfer_op(GROUND[i], EXCITED)))

    mixing = (0.0 if math.isinf(t1_us) else 1.0 / (3.0 * t1_us)) + drives.ground_mixing_per_us
    if mixing > 0:
        for i in GROUND:
            for j in GROUND:
                if i != j:
                    jumps.append((mixing, _transfer_op(i, j)))

    if free_dephasing_us is None:
        dephasing = ground_dephasing_rate(p, t1_us)
    elif math.isinf(free_dephasing_us):
        dephasing = 0.0
    else:
        base = 0.0 if math.isinf(t1_us) else 2.0 / (3.0 * t1_us)
        dephasing = 1.0 / free_dephasing_us - base
        if dephasing < 0:
            raise ConfigError("requested free dephasing is faster than the T1 floor allows")
    if dephasing > 0:
        # sqrt(rate) |g_i><g_i| jumps: each ground pair coherence decays at `dephasing`
        for i in GROUND:
            jumps.append((dephasing, _transfer_op(i, i)))

    matrix = _lindblad_matrix(_hamiltonian_mhz(drives), jumps)
    return Generator(matrix=matrix, t_opt_us=p.t_opt_us)


def population_rate_matrix(
    p: DefectParams,
    drives: DriveSet,
    optical_detunings=(0.0, 0.0, 0.0),
    *,
    t1_us: float = math.inf,
) -> np.ndarray:
    """4x4 rate matrix for the populations, valid when no microwave drive runs.

    With every jump operator of the form |a><b|, the population block of
    the Liouvillian closes on itself; this returns exactly that block
    (d p / dt = M p), which the ensemble scans exploit for speed.
    """
    if any(d.rabi_mhz != 0 for d in drives.mw):
        raise ValueError("population rate matrix is only valid without microwave driving")
    m = np.zeros((DIM, DIM))
    weights = lorentzian_peak(np.asarray(optical_detunings, dtype=float), p.homog_fwhm_mhz)
    for i, (pump, w) in enumerate(zip(drives.pump_per_us, weights)):
        rate = pump * float(w)
        m[i, i] -= rate
        m[EXCITED, i] += rate
    decay = 1.0 / p.t_opt_us
    m[EXCITED, EXCITED] -= decay
    for i, b in enumerate(p.branching):
        m[GROUND[i], EXCITED] += decay * b
    mixing = (0.0 if math.isinf(t1_us) else 1.0 / (3.0 * t1_us)) + drives.ground_mixing_per_us
    for i in GROUND:
        for j in GROUND:
            if i != j:
                m[i, j] += mixing
                m[i, i] -= mixing
    return m


# --------------------------------------------------------------------------
# Propagation


def _rehermitize(rho: np.ndarray) -> np.ndarray:
    return 0.5 * (rho + rho.conj().T)


def propagate_segment(state: QuantumState, gen: Generator, t_us: float) -> QuantumState:
    """Evolve a state for t_us under a constant generator (exact exponential)."""
    if t_us < 0:
        raise ValueError("t_us must be >= 0")
    if t_us == 0:
        return QuantumState(state.rho.copy())
    vec = gen.propagator(t_us) @ state.rho.reshape(-1)
    return QuantumState(_rehermitize(vec.reshape(DIM, DIM)))


_EIG_COND_LIMIT = 1e10


def propagate_times(gen: Generator, state: QuantumState, times_us) -> np.ndarray:
    """States at many times under one generator; shape (len(times), 4, 4).

    Uses the eigendecomposition of the Liouvillian when it is well
    conditioned (one O(n^3) factorization, then O(n^2) per time), and
    falls back to per-time exponentials otherwise.
    """
    times = np.asarray(times_us, dtype=float)
    if times.ndim != 1:
        raise ValueError("times_us must be 1-D")
    if np.any(times < 0):
        raise ValueError("times must be >= 0")
    vec0 = state.rho.reshape(-1)
    evals, vecs, vinv, cond = gen.eig()
    if vinv is not None and cond < _EIG_COND_LIMIT:
        coeff = vinv @ vec0
        phases = np.exp(np.outer(times, evals))  # (nt, 16)
        out = (phases * coeff) @ vecs.T  # (nt, 16)
    else:
        out = np.stack([gen.propagator(t) @ vec0 for t in times])
    rhos = out.reshape(-1, DIM, DIM)
    return 0.5 * (rhos + np.conj(np.swapaxes(rhos, -1, -2)))


@dataclass
class SequenceTrajectory:
    """Result of evolve_sequence: boundary states plus an emission trace."""

    boundary_times_us: np.ndarray
    boundary_states: list[QuantumState]
    emission_times_us: np.ndarray
    emission_excited: np.ndarray
    gate_spans_us: list[tuple[float, float]]

    @property
    def final_state(self) -> QuantumState:
        return self.boundary_states[-1]


def evolve_sequence(
    state: QuantumState,
    segments,
    p: DefectParams,
    *,
    optical_detunings=(0.0, 0.0, 0.0),
    temperature_k: float = 15.0,
    t1_us: float | None = None,
    free_dephasing_us: float | None = None,
    samples_per_segment: int = 160,
) -> SequenceTrajectory:
    """Run a list of DriveSet segments, recording the excited population.

    The emission trace is sampled on `samples_per_segment` points per
    segment (dense enough that a trapezoid integral of the gate window is
    accurate to ~1e-6 relative for lifetime-scale decays).
    """
    if not segments:
        raise ValueError("segment list must not be empty")
    boundaries = [QuantumState(state.rho.copy())]
    t0 = 0.0
    boundary_times = [0.0]
    em_t: list[np.ndarray] = []
    em_v: list[np.ndarray] = []
    gate_spans = []
    current = boundaries[0]
    for seg in segments:
        gen = build_generator(
            p,
            seg,
            optical_detunings,
            temperature_k=temperature_k,
            t1_us=t1_us,
            free_dephasing_us=free_dephasing_us,
        )
        local = np.linspace(0.0, seg.duration_us, samples_per_segment + 1)
        rhos = propagate_times(gen, current, local)
        em_t.append(t0 + local)
        em_v.append(np.real(rhos[:, EXCITED, EXCITED]))
        if seg.gate:
            gate_spans.append((t0, t0 + seg.duration_us))
        current = QuantumState(rhos[-1])
        t0 += seg.duration_us
        boundaries.append(current)
        boundary_times.append(t0)
    return SequenceTrajectory(
        boundary_times_us=np.asarray(boundary_times),
        boundary_states=boundaries,
        emission_times_us=np.concatenate(em_t),
        emission_excited=np.concatenate(em_v),
        gate_spans_us=gate_spans,
    )


# --------------------------------------------------------------------------
# Stationary states and integrated emission


def steady_state(gen: Generator, null_tol: float = 1e-10) -> QuantumState:
    """Unique trace-one stationary state of the generator.

    Raises DegenerateSteadyStateError when the null space has dimension
    above one (e.g. absorbing subspaces with T1 = inf); callers should
    then propagate from their actual initial state instead.
    """
    _, svals, vh = np.linalg.svd(gen.matrix)
    scale = max(svals[0], 1.0)
    null_dim = int(np.sum(svals < null_tol * scale))
    if null_dim != 1:
        raise DegenerateSteadyStateError(null_dim)
    rho = vh[-1].conj().reshape(DIM, DIM)
    rho = _rehermitize(rho)
    tr = np.trace(rho).real
    if abs(tr) < 1e-12:
        raise DegenerateSteadyStateError(1)
    return QuantumState(rho / tr)


def integrated_emission(
    gen: Generator, state: QuantumState, t_us: float
) -> tuple[float, QuantumState]:
    """Photons emitted into 4*pi over [0, t]: (1/T_opt) * integral of rho_ee.

    Computed exactly by augmenting vec(rho) with one accumulator row, so
    a single exponential yields both the final state and the integral.
    """
    n = DIM * DIM
    aug = np.zeros((n + 1, n + 1), dtype=complex)
    aug[:n, :n] = gen.matrix
    aug[n, EXCITED * DIM + EXCITED] = 1.0 / gen.t_opt_us
    v0 = np.concatenate([state.rho.reshape(-1), [0.0]])
    v = expm(aug * t_us) @ v0
    final = QuantumState(_rehermitize(v[:n].reshape(DIM, DIM)))
    return float(np.real(v[n])), final


def integrated_emission_rates(
    rate_matrix: np.ndarray, populations, t_us: float, t_opt_us: float
) -> float:
    """Same accumulator trick on a population rate matrix (no microwave)."""
    m = np.asarray(rate_matrix, dtype=float)
    aug = np.zeros((DIM + 1, DIM + 1))
    aug[:DIM, :DIM] = m
    aug[DIM, EXCITED] = 1.0 / t_opt_us
    v0 = np.concatenate([np.asarray(populations, dtype=float), [0.0]])
    return float((expm(aug * t_us) @ v0)[DIM])


def integrated_emission_rates_batch(
    rate_matrices: np.ndarray, populations: np.ndarray, t_us: float, t_opt_us: float
) -> np.ndarray:
    """Vectorized integrated emission for stacked rate matrices (..., 4, 4)."""
    mats = np.asarray(rate_matrices, dtype=float)
    batch = mats.shape[:-2]
    aug = np.zeros(batch + (DIM + 1, DIM + 1))
    aug[..., :DIM, :DIM] = mats
    aug[..., DIM, EXCITED] = 1.0 / t_opt_us
    props = expm(aug * t_us)
    v0 = np.concatenate([np.asarray(populations, dtype=float), [0.0]])
    return np.real(props @ v0)[..., DIM]
