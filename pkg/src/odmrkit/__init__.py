"""odmrkit: simulator and fitting toolkit for optically read spin-1 defects.

A four-level Lindblad model (three ground spin sublevels plus one
long-lived optical excited state) drives everything: optical pumping and
spin polarization, spectral hole burning and its two-tone/microwave
recovery, coherent-control sweeps (Rabi, Ramsey, Hahn echo, T1), and
photon-count readout with shot noise. A Levenberg-Marquardt engine with
the matching model library closes the loop from simulated counts back to
physical parameters.
"""

from .constants import CONSTANTS, PhysicalConstants
from .detection import CountRecord, contrast, dark_subtract, expected_counts, poissonize
from .dynamics import (
    DriveSet,
    Generator,
    MicrowaveDrive,
    QuantumState,
    build_generator,
    evolve_sequence,
    propagate_segment,
    steady_state,
)
from .ensemble import (
    EnsembleSpec,
    Map2D,
    Spectrum,
    addressed_fraction_percent,
    hole_recovery_scan,
    lifetime_limited_linewidth_khz,
    odmr_scan,
    ple_spectrum,
    simultaneous_recovery_map,
)
from .fitting import (
    FitModel,
    FitResult,
    compare_models,
    eval_model,
    fit,
    fit_auto,
    get_model,
    jacobian_check,
)
from .params import (
    DefectParams,
    DetectionConfig,
    EnsembleConfig,
    ProtocolConfig,
    RunConfig,
    T1Model,
    default_params,
    load_config,
    serialize_config,
)
from .sequences import (
    ProtocolSpec,
    PulseSequence,
    SweepResult,
    build_protocol,
    canonical_protocol,
    echo_envelope,
    polarize_state,
    run_protocol,
    t1_rate_model,
)
from .spincore import (
    LevelDiagram,
    SpinOperators,
    ground_levels,
    mw_transition_frequencies,
    nuclear_larmor_khz,
    spin1_operators,
)

__version__ = "0.1.0"
