"""Degenerate alkali level structure, angular-momentum algebra and dipole operators.

Phase convention: Condon-Shortley throughout. Spherical unit vectors are

    e_{+1} = -(x + i y)/sqrt(2),   e_0 = z,   e_{-1} = (x - i y)/sqrt(2)

and the lowering operator of an excited manifold is

    D = sum_q sum_mg (-1)^q e_q <Jg mg, 1 q | Je mg+q> |g mg><e mg+q|.

Single-atom basis ordering (shared by every module): ground manifold first,
then the excited manifolds in the order they are listed on the species
(P1/2 before P3/2 for the alkalis); inside a manifold m runs from -J to +J.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import factorial, sqrt
from pathlib import Path

import numpy as np
from scipy import constants as sc

__all__ = [
    "Manifold",
    "Species",
    "VectorOperator",
    "clebsch_gordan",
    "spherical_unit_vectors",
    "lowering_operator",
    "emission_pattern",
    "linear_excitation_populations",
    "potassium39",
    "test_species",
    "load_species",
    "species_preset",
]

AMU = sc.physical_constants["atomic mass constant"][0]


def _twice(j) -> int:
    """Return 2*j as an int, rejecting anything that is not a half-integer."""
    if isinstance(j, (bool, np.bool_)):
        raise TypeError("angular momentum cannot be a bool")
    t = 2 * Fraction(j)
    if t.denominator != 1:
        raise ValueError(f"{j!r} is not a half-integer")
    return int(t)


@lru_cache(maxsize=None)
def _cg_twice(j1: int, m1: int, j2: int, m2: int, J: int, M: int) -> float:
    # arguments are doubled quantum numbers
    if m1 + m2 != M:
        return 0.0
    if not (abs(j1 - j2) <= J <= j1 + j2) or (j1 + j2 + J) % 2:
        return 0.0
    if abs(m1) > j1 or abs(m2) > j2 or abs(M) > J:
        return 0.0
    a = (j1 + j2 - J) // 2
    b = (j1 - j2 + J) // 2
    c = (-j1 + j2 + J) // 2
    pref = Fraction((J + 1) * factorial(a) * factorial(b) * factorial(c),
                    factorial((j1 + j2 + J) // 2 + 1))
    pref *= (factorial((j1 + m1) // 2) * factorial((j1 - m1) // 2)
             * factorial((j2 + m2) // 2) * factorial((j2 - m2) // 2)
             * factorial((J + M) // 2) * factorial((J - M) // 2))
    total = Fraction(0)
    kmin = max(0, (j2 - J - m1) // 2, (j1 - J + m2) // 2)
    kmax = min(a, (j1 - m1) // 2, (j2 + m2) // 2)
    for k in range(kmin, kmax + 1):
        den = (factorial(k) * factorial(a - k) * factorial((j1 - m1) // 2 - k)
               * factorial((j2 + m2) // 2 - k) * factorial((J - j2 + m1) // 2 + k)
               * factorial((J - j1 - m2) // 2 + k))
        total += Fraction((-1) ** k, den)
    # pref is exact; only the final square root is floating point
    return float(total) * sqrt(pref)


def clebsch_gordan(j1, m1, j2, m2, J, M) -> float:
    """Clebsch-Gordan coefficient <j1 m1, j2 m2 | J M> (Condon-Shortley).

    Evaluated from the Racah closed-form sum in exact rational arithmetic.
    Returns 0 when M != m1 + m2 or the triangle rule fails.
    """
    tj1, tm1, tj2, tm2, tJ, tM = (_twice(x) for x in (j1, m1, j2, m2, J, M))
    for tj, tm in ((tj1, tm1), (tj2, tm2), (tJ, tM)):
        if tj < 0:
            raise ValueError("angular momentum must be non-negative")
        if (tj - tm) % 2:
            raise ValueError("m and j must both be integer or both half-integer")
        if abs(tm) > tj:
            raise ValueError("|m| exceeds j")
    return _cg_twice(tj1, tm1, tj2, tm2, tJ, tM)


def spherical_unit_vectors() -> dict[int, np.ndarray]:
    """Spherical basis vectors e_q, q in {-1, 0, +1}, as complex Cartesian 3-vectors."""
    s = 1 / np.sqrt(2)
    return {
        +1: np.array([-s, -1j * s, 0.0]),
        0: np.array([0.0, 0.0, 1.0], dtype=complex),
        -1: np.array([s, -1j * s, 0.0]),
    }


@dataclass(frozen=True)
class Manifold:
    role: str  # "ground" | "excited"
    J: Fraction
    name: str = ""

    def __post_init__(self):
        if self.role not in ("ground", "excited"):
            raise ValueError(f"unknown manifold role {self.role!r}")
        object.__setattr__(self, "J", Fraction(_twice(self.J), 2))

    @property
    def dim(self) -> int:
        return int(2 * self.J) + 1

    @property
    def m_values(self) -> list[Fraction]:
        return [self.J - k for k in range(self.dim)][::-1]


@dataclass(frozen=True)
class Species:
    """An alkali-like atom: one ground manifold and one or two excited manifolds.

    All excited manifolds share the decay rate ``gamma``. ``omegas`` lists the
    angular transition frequencies of the excited manifolds in order.
    """

    name: str
    ground: Manifold
    excited: tuple[Manifold, ...]
    omegas: tuple[float, ...]
    gamma: float
    dipole: float
    mass: float

    def __post_init__(self):
        if self.ground.role != "ground":
            raise ValueError("ground manifold must have role 'ground'")
        if not self.excited or any(m.role != "excited" for m in self.excited):
            raise ValueError("need at least one excited manifold")
        if len(self.omegas) != len(self.excited):
            raise ValueError("one transition frequency per excited manifold")
        if len(set(self.omegas)) != len(self.omegas):
            raise ValueError("excited manifolds need distinct transition frequencies")
        if self.gamma <= 0 or self.mass <= 0:
            raise ValueError("gamma and mass must be positive")

    @property
    def manifolds(self) -> tuple[Manifold, ...]:
        return (self.ground, *self.excited)

    @property
    def dim(self) -> int:
        return sum(m.dim for m in self.manifolds)

    @property
    def n_excited(self) -> int:
        return len(self.excited)

    @property
    def omega1(self) -> float:
        return self.omegas[0]

    @property
    def omega2(self) -> float:
        return self.omegas[-1]

    @property
    def omega0(self) -> float:
        return float(np.mean(self.omegas))

    @property
    def k0(self) -> float:
        """Mean wave number (omega1 + omega2) / 2c."""
        return self.omega0 / sc.c

    @property
    def wavelength(self) -> float:
        return 2 * np.pi / self.k0

    @property
    def tau_spont(self) -> float:
        return 1.0 / self.gamma

    def slices(self) -> list[slice]:
        """Index ranges of ground, excited_1, ... in the single-atom basis."""
        out, start = [], 0
        for m in self.manifolds:
            out.append(slice(start, start + m.dim))
            start += m.dim
        return out

    def projector(self, block: int) -> np.ndarray:
        """Projector onto manifold ``block`` (0 = ground, 1.. = excited)."""
        p = np.zeros((self.dim, self.dim))
        s = self.slices()[block]
        p[s, s] = np.eye(s.stop - s.start)
        return p

    def block_of(self) -> np.ndarray:
        """Manifold label of every basis state."""
        return np.concatenate([np.full(m.dim, i) for i, m in enumerate(self.manifolds)])


@dataclass(frozen=True)
class VectorOperator:
    """Three spherical components of a single-atom vector operator."""

    spherical: dict[int, np.ndarray] = field(repr=False)

    def cartesian(self) -> np.ndarray:
        """Cartesian components, shape (3, dim, dim): sum_q (-1)^q (e_q)_k X_q."""
        eq = spherical_unit_vectors()
        first = next(iter(self.spherical.values()))
        out = np.zeros((3,) + first.shape, dtype=complex)
        for q, X in self.spherical.items():
            out += ((-1) ** q) * eq[q][:, None, None] * X[None]
        return out

    def adjoint(self) -> "VectorOperator":
        return VectorOperator({q: X.conj().T for q, X in self.spherical.items()})


def lowering_operator(species: Species, manifold: int) -> VectorOperator:
    """Lowering operator of excited manifold ``manifold`` (1-based block index).

    Spherical component q holds CG(Jg mg, 1 q | Je mg+q) |g mg><e mg+q|; the
    (-1)^q e_q factors enter through :meth:`VectorOperator.cartesian`.
    """
    if manifold < 1 or manifold > species.n_excited:
        raise ValueError("lowering operator needs an excited manifold (index >= 1)")
    g = species.ground
    e = species.excited[manifold - 1]
    sl = species.slices()
    comps = {}
    for q in (-1, 0, 1):
        X = np.zeros((species.dim, species.dim))
        for ig, mg in enumerate(g.m_values):
            me = mg + q
            if abs(me) > e.J:
                continue
            ie = int(me + e.J)
            X[sl[0].start + ig, sl[manifold].start + ie] = clebsch_gordan(g.J, mg, 1, q, e.J, me)
        comps[q] = X
    return VectorOperator(comps)


def emission_pattern(species: Species, manifold: int, excited_populations,
                     quantization_axis=(0.0, 0.0, 1.0)):
    """Angular fluorescence distribution of an excited manifold.

    Returns a function of theta (angle from the quantization axis, radians)
    giving ``(I_pi, I_sigma, I_total)``. Each decay channel carries its squared
    CG coefficient and the normalized dipole pattern (3/8pi) sin^2 for pi and
    (3/16pi)(1 + cos^2) for sigma transitions. With this normalization the
    integral of I_total over the sphere equals the total excited population.
    """
    e = species.excited[manifold - 1]
    pops = np.asarray(excited_populations, dtype=float)
    if pops.shape != (e.dim,):
        raise ValueError(f"expected {e.dim} populations, got shape {pops.shape}")
    if np.any(pops < 0):
        raise ValueError("populations must be non-negative")
    axis = np.asarray(quantization_axis, dtype=float)
    if not np.isclose(np.linalg.norm(axis), 1.0):
        raise ValueError("quantization axis must be a unit vector")
    g = species.ground
    w_pi = w_sigma = 0.0
    for ie, me in enumerate(e.m_values):
        for mg in g.m_values:
            q = me - mg
            if abs(q) > 1:
                continue
            c2 = clebsch_gordan(g.J, mg, 1, q, e.J, me) ** 2
            if q == 0:
                w_pi += pops[ie] * c2
            else:
                w_sigma += pops[ie] * c2

    def pattern(theta):
        theta = np.asarray(theta, dtype=float)
        c2 = np.cos(theta) ** 2
        i_pi = w_pi * 3 / (8 * np.pi) * (1 - c2)
        i_sigma = w_sigma * 3 / (16 * np.pi) * (1 + c2)
        return i_pi, i_sigma, i_pi + i_sigma

    return pattern


def linear_excitation_populations(species: Species, manifold: int) -> np.ndarray:
    """Excited sublevel populations after weak pi excitation of a uniform ground state.

    The quantization axis is the polarization; populations sum to one.
    """
    e = species.excited[manifold - 1]
    g = species.ground
    p = np.array([sum(clebsch_gordan(g.J, mg, 1, 0, e.J, me) ** 2 for mg in g.m_values if mg == me)
                  for me in e.m_values])
    return p / p.sum()


def potassium39() -> Species:
    return Species(
        name="K39",
        ground=Manifold("ground", Fraction(1, 2), "4S1/2"),
        excited=(Manifold("excited", Fraction(1, 2), "4P1/2"),
                 Manifold("excited", Fraction(3, 2), "4P3/2")),
        omegas=(2 * np.pi * 389.6e12, 2 * np.pi * 391.3e12),
        gamma=1 / 26.37e-9,
        dipole=2.46e-29,
        mass=38.9637064864 * AMU,
    )


def test_species() -> Species:
    """J=0 -> J=1 model atom with the potassium D1 frequency and lifetime."""
    return Species(
        name="test_J0_J1",
        ground=Manifold("ground", 0, "g"),
        excited=(Manifold("excited", 1, "e"),),
        omegas=(2 * np.pi * 389.6e12,),
        gamma=1 / 26.37e-9,
        dipole=2.46e-29,
        mass=38.9637064864 * AMU,
    )


_PRESETS = {"K39": potassium39, "test_J0_J1": test_species}


def species_preset(name: str) -> Species:
    try:
        return _PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown species preset {name!r}; known: {sorted(_PRESETS)}") from None


def load_species(source) -> Species:
    """Build a species from a JSON file path or an already parsed mapping.

    Quantities carry units as strings, e.g. ``{"omegas": ["389.6 THz"]}``;
    see :mod:`dipolar_mqc.units`.
    """
    from .units import parse_quantity

    if isinstance(source, (str, Path)):
        data = json.loads(Path(source).read_text())
    else:
        data = dict(source)
    if "preset" in data:
        return species_preset(data["preset"])
    allowed = {"name", "ground_J", "excited_J", "omegas", "gamma", "tau_spont", "dipole", "mass"}
    unknown = set(data) - allowed
    if unknown:
        raise ValueError(f"unknown species keys: {sorted(unknown)}")
    if "gamma" in data:
        gamma = parse_quantity(data["gamma"], "1/s")
    else:
        gamma = 1.0 / parse_quantity(data["tau_spont"], "s")
    omegas = tuple(parse_quantity(w, "rad/s") for w in data["omegas"])
    return Species(
        name=data.get("name", "custom"),
        ground=Manifold("ground", Fraction(str(data["ground_J"]))),
        excited=tuple(Manifold("excited", Fraction(str(j))) for j in data["excited_J"]),
        omegas=omegas,
        gamma=gamma,
        dipole=parse_quantity(data["dipole"], "C m"),
        mass=parse_quantity(data["mass"], "kg"),
    )
