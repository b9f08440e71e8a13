"""Spin-1 operator algebra and ground-state level diagram.

Basis ordering for the spin-1 matrices is {|+1>, |0>, |-1>}. Level
energies are linear frequencies in MHz relative to the ms=0 sublevel;
the optical excited state is spin-0 and therefore field independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import CONSTANTS
from .params import DefectParams


@dataclass(frozen=True)
class SpinOperators:
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray


def spin1_operators() -> SpinOperators:
    """Standard spin-1 matrices in the {|+1>, |0>, |-1>} basis."""
    s = 1.0 / np.sqrt(2.0)
    sx = s * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex)
    sy = s * np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex)
    sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    return SpinOperators(sx=sx, sy=sy, sz=sz)


@dataclass(frozen=True)
class LevelDiagram:
    """Ground sublevel frequencies and per-sublevel optical detunings.

    f_minus/f_plus are the ms=-1/+1 energies relative to ms=0 (MHz).
    optical_offsets gives, for each ground sublevel (g0, g-, g+), the
    offset of its optical transition relative to the ms=0 transition: a
    sublevel sitting higher in the ground manifold has a lower optical
    transition frequency.
    """

    f_minus_mhz: float
    f_plus_mhz: float
    b_gauss: float
    convention: str

    @property
    def optical_offsets(self) -> tuple[float, float, float]:
        return (0.0, -self.f_minus_mhz, -self.f_plus_mhz)


def zeeman_shift_mhz(g_parallel: float, b_gauss: float, convention: str = "separation") -> float:
    """Shift of each ms=+-1 line from D, in MHz.

    "separation": lines are separated by 2 g muB B / h (each shifts by
    g muB B / h). "shift": the quoted splitting equals g muB B / h, so
    each line moves by half that.
    """
    z = g_parallel * CONSTANTS.mu_b_mhz_per_gauss * b_gauss
    if convention == "separation":
        return z
    if convention == "shift":
        return 0.5 * z
    raise ValueError(f"unknown Zeeman convention {convention!r}")


def ground_levels(p: DefectParams, b_gauss: float, convention: str | None = None) -> LevelDiagram:
    """Ground-state level diagram at axial field `b_gauss` (G)."""
    if b_gauss < 0:
        raise ValueError("b_gauss must be >= 0")
    conv = convention or p.zeeman_convention
    z = zeeman_shift_mhz(p.g_parallel, b_gauss, conv)
    return LevelDiagram(
        f_minus_mhz=p.d_splitting_mhz - z,
        f_plus_mhz=p.d_splitting_mhz + z,
        b_gauss=b_gauss,
        convention=conv,
    )


def mw_transition_frequencies(diagram: LevelDiagram) -> tuple[float, float]:
    """Microwave transition frequencies (0 <-> -1, 0 <-> +1) in MHz."""
    return diagram.f_minus_mhz, diagram.f_plus_mhz


def nuclear_larmor_khz(isotope: str, b_gauss: float) -> float:
    """Nuclear Larmor frequency magnitude in kHz at axial field `b_gauss` (G)."""
    if b_gauss < 0:
        raise ValueError("b_gauss must be >= 0")
    try:
        gamma = CONSTANTS.gyromagnetic_mhz_per_t[isotope]
    except KeyError:
        known = ", ".join(sorted(CONSTANTS.gyromagnetic_mhz_per_t))
        raise ValueError(f"unknown isotope {isotope!r}; known: {known}") from None
    # MHz/T * (G -> T) -> MHz, then kHz
    return gamma * b_gauss * 1e-4 * 1e3
