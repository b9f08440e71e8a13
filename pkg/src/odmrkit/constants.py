"""Reference physical constants and unit conversions.

Everything in this module is a fixed CODATA-style input: these numbers
parameterize the physics but are never adjusted by any fit in this
package. Frequencies are expressed as linear frequencies (value / h)
throughout, which keeps the rest of the code free of factors of h.
"""

from __future__ import annotations

from dataclasses import dataclass, field

# Bohr magneton over Planck constant, GHz per tesla.
BOHR_MAGNETON_GHZ_PER_T = 13.996244936

# Boltzmann constant over Planck constant, Hz per kelvin.
BOLTZMANN_HZ_PER_K = 2.083661912e10

# 1 meV expressed as a frequency, Hz.
MEV_HZ = 2.417989242e11

# Nuclear gyromagnetic ratios (gamma / 2 pi), MHz per tesla, magnitudes.
GYROMAGNETIC_MHZ_PER_T = {
    "13C": 10.7084,
    "29Si": 8.465,
}

# Derived conversions used all over the package.
MHZ_PER_GAUSS_PER_G_FACTOR = BOHR_MAGNETON_GHZ_PER_T * 1e3 / 1e4  # mu_B/h in MHz/G
MEV_IN_KELVIN = MEV_HZ / BOLTZMANN_HZ_PER_K  # 1 meV / k_B, about 11.605 K


@dataclass(frozen=True)
class PhysicalConstants:
    """Bundle of the reference constants, for code that wants them as a value.

    All entries must be strictly positive; `validate` enforces this so a
    hand-edited instance cannot silently poison downstream frequencies.
    """

    bohr_magneton_ghz_per_t: float = BOHR_MAGNETON_GHZ_PER_T
    boltzmann_hz_per_k: float = BOLTZMANN_HZ_PER_K
    mev_hz: float = MEV_HZ
    gyromagnetic_mhz_per_t: dict[str, float] = field(
        default_factory=lambda: dict(GYROMAGNETIC_MHZ_PER_T)
    )

    def validate(self) -> None:
        if self.bohr_magneton_ghz_per_t <= 0:
            raise ValueError("bohr_magneton_ghz_per_t must be positive")
        if self.boltzmann_hz_per_k <= 0:
            raise ValueError("boltzmann_hz_per_k must be positive")
        if self.mev_hz <= 0:
            raise ValueError("mev_hz must be positive")
        for isotope, gamma in self.gyromagnetic_mhz_per_t.items():
            if gamma <= 0:
                raise ValueError(f"gyromagnetic ratio for {isotope} must be positive")

    @property
    def mu_b_mhz_per_gauss(self) -> float:
        return self.bohr_magneton_ghz_per_t * 1e3 / 1e4

    def mev_to_kelvin(self, energy_mev: float) -> float:
        """Convert an energy in meV to the equivalent temperature E / k_B."""
        return energy_mev * self.mev_hz / self.boltzmann_hz_per_k


CONSTANTS = PhysicalConstants()
