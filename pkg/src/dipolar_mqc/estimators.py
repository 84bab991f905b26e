"""Back-of-the-envelope vapor numbers: pulse area, velocity classes,
interatomic distance, Doppler width and thermal collision rates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy import constants as C
from scipy.special import erf

__all__ = [
    "pulse_area",
    "velocity_spread",
    "velocity_class_probability",
    "velocity_class_density",
    "mean_distance",
    "VaporComponent",
    "VaporComposition",
    "CollisionRates",
    "collision_rate",
    "table_ii_composition",
    "DopplerWidth",
    "doppler_rms",
]

AMU = C.physical_constants["atomic mass constant"][0]


def pulse_area(intensity: float, duration: float, dipole: float) -> float:
    """Rotation angle of a Gaussian pulse with peak intensity and FWHM duration.

    theta0 = (d / hbar) sqrt(2 I / (c eps0)) sqrt(pi / (2 ln 2)) sigma.
    A zero intensity gives zero area.
    """
    if intensity < 0 or duration <= 0 or dipole <= 0:
        raise ValueError("need intensity >= 0 and positive duration and dipole")
    field_amp = math.sqrt(2 * intensity / (C.c * C.epsilon_0))
    return dipole / C.hbar * field_amp * math.sqrt(math.pi / (2 * math.log(2))) * duration


def velocity_spread(temperature: float, mass: float) -> float:
    """One-dimensional thermal velocity standard deviation sqrt(kT/m)."""
    if temperature <= 0 or mass <= 0:
        raise ValueError("temperature and mass must be positive")
    return math.sqrt(C.k * temperature / mass)


def velocity_class_probability(delta_v: float, v_bar: float) -> float:
    """Probability that a Gaussian velocity component (std v_bar) lies in (-dv, dv)."""
    if v_bar <= 0 or delta_v < 0:
        raise ValueError("need v_bar > 0 and delta_v >= 0")
    return float(erf(delta_v / (math.sqrt(2) * v_bar)))


def velocity_class_density(n0: float, v_bar: float, wavelength: float, tau_spont: float,
                           displacement_fraction: float) -> float:
    """Density of atoms sharing one velocity class with a given atom.

    Two atoms stay in the same class if their separation drifts by less
    than ``displacement_fraction * wavelength`` within a lifetime; the
    allowed drift is shared equally between the three Cartesian components.
    """
    if not 0 < displacement_fraction < 1:
        raise ValueError("displacement fraction must lie in (0, 1)")
    if n0 < 0 or wavelength <= 0 or tau_spont <= 0:
        raise ValueError("invalid density, wavelength or lifetime")
    dv = wavelength * displacement_fraction / (math.sqrt(3) * tau_spont)
    return n0 * velocity_class_probability(dv, v_bar) ** 3


def mean_distance(n: float) -> float:
    """Mean nearest-neighbour distance 0.554 n^(-1/3) of a Poisson gas."""
    if n <= 0:
        raise ValueError("density must be positive")
    return 0.554 * n ** (-1.0 / 3.0)


@dataclass(frozen=True)
class VaporComponent:
    name: str
    density: float  # m^-3
    radius: float   # m
    mass: float     # kg

    def __post_init__(self):
        if self.density < 0 or self.radius < 0 or self.mass <= 0:
            raise ValueError(f"invalid vapor component {self.name!r}")


@dataclass(frozen=True)
class VaporComposition:
    components: tuple[VaporComponent, ...]
    temperature: float = 295.15

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")

    def __getitem__(self, name: str) -> VaporComponent:
        for c in self.components:
            if c.name == name:
                return c
        raise KeyError(f"species {name!r} not in composition")


@dataclass(frozen=True)
class CollisionRates:
    target: str
    total: float
    partial: dict[str, float] = field(default_factory=dict)
    cross_section: dict[str, float] = field(default_factory=dict)
    relative_velocity: dict[str, float] = field(default_factory=dict)

    @property
    def collision_time(self) -> float:
        return math.inf if self.total == 0 else 1.0 / self.total

    def partial_times(self) -> dict[str, float]:
        return {k: (math.inf if v == 0 else 1.0 / v) for k, v in self.partial.items()}


def collision_rate(composition: VaporComposition, target: str) -> CollisionRates:
    """Hard-sphere collision rate of ``target`` with every vapor component.

    gamma = sum_i n_i pi (r_i + r_t)^2 sqrt(8 k T / (pi mu_it)).
    """
    tgt = composition[target]
    T = composition.temperature
    partial, sigma, vrel = {}, {}, {}
    for c in composition.components:
        mu = c.mass * tgt.mass / (c.mass + tgt.mass)
        sigma[c.name] = math.pi * (c.radius + tgt.radius) ** 2
        vrel[c.name] = math.sqrt(8 * C.k * T / (math.pi * mu))
        partial[c.name] = c.density * sigma[c.name] * vrel[c.name]
    return CollisionRates(target, sum(partial.values()), partial, sigma, vrel)


def table_ii_composition() -> VaporComposition:
    """K/Rb/Cs cell at 22 C with the tabulated densities and atomic radii."""
    return VaporComposition((
        VaporComponent("K", 5.13e14, 2.43e-10, 39.0983 * AMU),
        VaporComponent("Rb", 1.05e16, 2.65e-10, 85.4678 * AMU),
        VaporComponent("Cs", 3.84e16, 2.98e-10, 132.905 * AMU),
    ), temperature=295.15)


@dataclass(frozen=True)
class DopplerWidth:
    rms: float   # rad/s
    fwhm: float  # rad/s


def doppler_rms(temperature: float, mass: float, k0: float) -> DopplerWidth:
    """Doppler shift spread k0 sqrt(kT/m) and the matching Gaussian FWHM."""
    if k0 <= 0:
        raise ValueError("k0 must be positive")
    rms = k0 * velocity_spread(temperature, mass)
    return DopplerWidth(rms, 2 * math.sqrt(2 * math.log(2)) * rms)
