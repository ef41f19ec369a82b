"""Energy-density, material-use and nuclear transfer-rate calculators.

Pure functions on plain floats. Conversions use CODATA constants; the two
battery formulas keep their rounded published constants (4.45e-23 Wh/eV,
1.661e-27 kg/u, 1.602e-7 W per eV/ps) so published figures reproduce
exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

EV_IN_J = 1.602176634e-19
AVOGADRO = 6.02214076e23
J_PER_KWH = 3.6e6
HBAR_EV_S = 6.582e-16
NUCLEAR_MAGNETON_EV_PER_T = 3.15e-8

WH_PER_EV = 4.45e-23
KG_PER_U = 1.661e-27
W_PER_EV_PER_PS = 1.602e-7

DEFAULT_VOL_RATIO = 6.26e-12
DEFAULT_DELTA_E = 23.8e6

#: the rate printed for the D2 -> 4He worked example, in 1/s
PUBLISHED_D2_HE_RATE = 1e-34


def _positive(**kw):
    for name, v in kw.items():
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v!r}")


def _non_negative(**kw):
    for name, v in kw.items():
        if not v >= 0:
            raise ValueError(f"{name} must be non-negative, got {v!r}")


def mixture_molar_mass(composition: Sequence[tuple[float, float]]) -> float:
    """Mass-weighted mean molar mass of ``[(mass_fraction, molar_mass), ...]``.

    >>> round(mixture_molar_mass([(0.86, 12.011), (0.14, 1.008)]), 4)
    10.4706
    """
    if not composition:
        raise ValueError("mixture composition is empty; a molar-mass basis is required")
    total = sum(f for f, _ in composition)
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"mass fractions must sum to 1, got {total}")
    for f, m in composition:
        _positive(mass_fraction=f, molar_mass=m)
    return sum(f * m for f, m in composition)


@dataclass(frozen=True)
class EnergyDensityInput:
    """Energy per atom (eV) with either a molar mass (g/mol) or a mixture."""

    energy_per_atom: float
    molar_mass: float | None = None
    composition: tuple[tuple[float, float], ...] | None = None

    @property
    def basis_molar_mass(self) -> float:
        if (self.molar_mass is None) == (self.composition is None):
            raise ValueError("give exactly one of molar_mass or composition")
        if self.molar_mass is not None:
            _positive(molar_mass=self.molar_mass)
            return float(self.molar_mass)
        return mixture_molar_mass(self.composition)


def ev_per_atom_to_kwh_per_kg(energy_per_atom: float, molar_mass: float) -> float:
    """Energy density in kWh/kg from eV per atom and molar mass in g/mol."""
    _positive(energy_per_atom=energy_per_atom, molar_mass=molar_mass)
    return energy_per_atom * EV_IN_J * AVOGADRO / (molar_mass / 1000.0) / J_PER_KWH


def kwh_per_kg_to_ev_per_atom(kwh_per_kg: float, molar_mass: float) -> float:
    _positive(kwh_per_kg=kwh_per_kg, molar_mass=molar_mass)
    return kwh_per_kg * J_PER_KWH * (molar_mass / 1000.0) / (EV_IN_J * AVOGADRO)


def energy_density(inp: EnergyDensityInput) -> float:
    return ev_per_atom_to_kwh_per_kg(inp.energy_per_atom, inp.basis_molar_mass)


def material_use_per_area(thickness: float, density: float) -> float:
    """Areal mass in g/m^2 of a layer (thickness in m, density in kg/m^3)."""
    _non_negative(thickness=thickness, density=density)
    return thickness * density * 1000.0


def material_use_per_watt(areal_mass: float, area: float, peak_power: float) -> float:
    """Grams of material per peak watt."""
    _non_negative(areal_mass=areal_mass, area=area)
    _positive(peak_power=peak_power)
    return areal_mass * area / peak_power


def battery_energy_density(e_max: float, molecular_mass: float) -> float:
    """Wh/kg from the maximum stored energy per molecule (eV) and its mass (u)."""
    _non_negative(e_max=e_max)
    _positive(molecular_mass=molecular_mass)
    return e_max * WH_PER_EV / (molecular_mass * KG_PER_U)


def battery_power_density(p_max: float, mass: float) -> float:
    """kW/kg from the peak power (eV/ps) and the battery mass (kg)."""
    _non_negative(p_max=p_max)
    _positive(mass=mass)
    return p_max * W_PER_EV_PER_PS / mass / 1000.0


def vol_ratio(r_nuc: float, R0: float, delta_R: float) -> float:
    """Nuclear-to-molecular volume ratio ``(4/3 pi r^3) / (2 pi^2 R0 dR^2)``."""
    _non_negative(r_nuc=r_nuc)
    _positive(R0=R0, delta_R=delta_R)
    return (4.0 / 3.0) * math.pi * r_nuc**3 / (2.0 * math.pi**2 * R0 * delta_R**2)


def magnetic_coupling(b_field: float, mu: float = NUCLEAR_MAGNETON_EV_PER_T) -> float:
    """Magnitude of ``-mu.B`` in eV for a field in tesla."""
    _non_negative(b_field=b_field)
    return mu * b_field


@dataclass(frozen=True)
class NuclearTransferInput:
    g_coupling: float  # eV
    gamow_suppression: float  # e^{-G}
    n_donors: float
    n_acceptors: float
    vol_ratio: float = DEFAULT_VOL_RATIO
    delta_E: float = DEFAULT_DELTA_E  # eV

    def __post_init__(self):
        _positive(g_coupling=self.g_coupling, gamow_suppression=self.gamow_suppression,
                  n_donors=self.n_donors, n_acceptors=self.n_acceptors,
                  vol_ratio=self.vol_ratio, delta_E=self.delta_E)
        if self.vol_ratio > 1:
            raise ValueError("vol_ratio must not exceed 1")


def nuclear_transfer_rate(inp: NuclearTransferInput) -> float:
    """Coherent excitation-transfer rate in 1/s.

    ``(g e^-G sqrt(vol_ratio)) g / dE / hbar * sqrt(N_donors) sqrt(N_acceptors)``
    """
    matrix_element = inp.g_coupling * inp.gamow_suppression * math.sqrt(inp.vol_ratio)
    return (matrix_element * inp.g_coupling / inp.delta_E / HBAR_EV_S
            * math.sqrt(inp.n_donors) * math.sqrt(inp.n_acceptors))


#: inputs of the published D2 -> 4He worked example
D2_HE_WORKED_EXAMPLE = NuclearTransferInput(
    g_coupling=1e-7, gamow_suppression=1e-33, n_donors=1e12, n_acceptors=1e6,
    vol_ratio=1e-12, delta_E=24e6,
)


def nuclear_rate_report(inp: NuclearTransferInput = D2_HE_WORKED_EXAMPLE,
                        published: float = PUBLISHED_D2_HE_RATE) -> dict:
    """Literal rate next to a published figure, with the gap in decades."""
    value = nuclear_transfer_rate(inp)
    return {
        "value": value,
        "unit": "1/s",
        "published_value": published,
        "ratio_published_to_literal": published / value,
        "discrepancy_decades": math.log10(published / value),
        "dicke_enhancement": math.sqrt(inp.n_donors) * math.sqrt(inp.n_acceptors),
    }
