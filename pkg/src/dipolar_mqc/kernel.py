"""Retarded dipole-dipole interaction tensor and its orientation averages."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

__all__ = [
    "Mode",
    "PairGeometry",
    "InteractionTensor",
    "green_tensor",
    "COUPLING_PHASE",
    "coupling_phase",
    "coupling_tensor",
    "envelope_tensor",
    "SphereQuadrature",
    "sphere_quadrature",
    "pair_orientation_average",
    "SYM_INDEX",
    "to_symmetric",
    "orientation_moments",
]


class Mode(str, Enum):
    FULL = "full"
    NEAR = "near"
    FAR = "far"
    OFF = "off"


@dataclass(frozen=True)
class PairGeometry:
    r: float
    n_hat: tuple[float, float, float]
    k0: float

    def __post_init__(self):
        n = np.asarray(self.n_hat, dtype=float)
        if n.shape != (3,) or abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise ValueError("n_hat must be a unit 3-vector")
        if not self.u > 0:
            raise ValueError("k0 * r must be positive")

    @property
    def u(self) -> float:
        return self.k0 * self.r


@dataclass(frozen=True)
class InteractionTensor:
    matrix: np.ndarray
    mode: Mode
    electrostatic: bool = False


def _coefficients(u: float, mode: Mode, electrostatic: bool):
    """(a, b, phase) with T = (3 gamma / 4) * phase * (a * I + b * n n^T)."""
    if u <= 0:
        raise ValueError("dimensionless separation u = k0 r must be positive")
    if mode is Mode.FULL:
        c = 1j / u - 1 / u**2
        a = (1 + c) / u
        b = (-1 - 3 * c) / u
    elif mode is Mode.FAR:
        a, b = 1 / u, -1 / u
    elif mode is Mode.NEAR:
        a, b = -1 / u**3, 3 / u**3
    elif mode is Mode.OFF:
        a = b = 0.0
    else:
        raise ValueError(f"unknown mode {mode!r}")
    phase = 1.0 if (mode is Mode.NEAR and electrostatic) else np.exp(1j * u)
    return a, b, phase


def green_tensor(geometry: PairGeometry, gamma: float, mode: Mode | str = Mode.FULL,
                 electrostatic: bool = False) -> InteractionTensor:
    """Cartesian coupling tensor between two atoms.

    ``full`` is the complete retarded form with 1/u, 1/u^2 and 1/u^3 terms;
    ``near`` keeps only the 1/u^3 term (and its exp(iu) factor unless
    ``electrostatic``); ``far`` keeps only the transverse 1/u term.
    """
    mode = Mode(mode)
    n = np.asarray(geometry.n_hat, dtype=float)
    a, b, phase = _coefficients(geometry.u, mode, electrostatic)
    T = 0.75 * gamma * phase * (a * np.eye(3) + b * np.outer(n, n))
    return InteractionTensor(T.astype(complex), mode, electrostatic)


# Global factor c multiplying the tensor where it enters the pair generator.
# With "lindblad" (c = -i) the real part of c T is half the collective decay
# rate and its imaginary part the exchange shift, so the pair terms have
# Lindblad form: the near-field 1/u^3 part is a coherent exchange and Im T
# reaches gamma/2 at zero separation. "as_printed" (c = 1) inserts the
# tensor unchanged, which turns the 1/u^3 part into a dissipative term.
COUPLING_PHASE = {"lindblad": -1j, "as_printed": 1.0 + 0j}


def coupling_phase(convention: str) -> complex:
    try:
        return COUPLING_PHASE[convention]
    except KeyError:
        raise ValueError(f"unknown tensor convention {convention!r}; "
                         f"known: {', '.join(COUPLING_PHASE)}") from None


def coupling_tensor(geometry: PairGeometry, gamma: float, mode: Mode | str = Mode.FULL,
                    electrostatic: bool = False, convention: str = "lindblad") -> np.ndarray:
    """``green_tensor`` times the convention factor, as used by the generators."""
    return coupling_phase(convention) * green_tensor(geometry, gamma, mode, electrostatic).matrix


def carries_pair_phase(mode: Mode | str, electrostatic: bool) -> bool:
    """Whether the tensor carries the exp(i k0 r) retardation phase."""
    return not (Mode(mode) is Mode.NEAR and electrostatic)


def envelope_tensor(geometry: PairGeometry, gamma: float, mode: Mode | str = Mode.FULL,
                    electrostatic: bool = False) -> np.ndarray:
    """``green_tensor`` with the fast exp(i k0 r) position phase removed.

    In the electrostatic limit there is no phase to strip and the tensor is
    returned unchanged.
    """
    T = green_tensor(geometry, gamma, mode, electrostatic).matrix
    if carries_pair_phase(mode, electrostatic):
        return T * np.exp(-1j * geometry.u)
    return T


@dataclass(frozen=True)
class SphereQuadrature:
    nodes: np.ndarray    # (n, 3) unit vectors
    weights: np.ndarray  # (n,), summing to 1

    def average(self, values: np.ndarray) -> np.ndarray:
        """Weighted mean along the first axis."""
        return np.tensordot(self.weights, values, axes=(0, 0))


@lru_cache(maxsize=None)
def sphere_quadrature(n_theta: int = 16, n_phi: int = 32) -> SphereQuadrature:
    """Gauss-Legendre in cos(theta) times a uniform grid in phi.

    Exact for spherical polynomials of degree < min(2 n_theta, n_phi); the
    envelope products used here are degree <= 8, which needs n_theta >= 5
    and n_phi >= 9.
    """
    if n_theta < 5 or n_phi < 9:
        raise ValueError("quadrature too coarse to integrate degree-8 polynomials exactly")
    x, w = np.polynomial.legendre.leggauss(n_theta)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    st = np.sqrt(1 - x**2)
    nodes = np.stack(np.broadcast_arrays(
        st[:, None] * np.cos(phi)[None, :],
        st[:, None] * np.sin(phi)[None, :],
        x[:, None] * np.ones(n_phi)[None, :]), axis=-1).reshape(-1, 3)
    weights = np.repeat(w / 2, n_phi) / n_phi
    return SphereQuadrature(nodes, weights)


def pair_orientation_average(contraction, order: tuple[int, int] = (16, 32)):
    """Uniform average of ``contraction(n_hat)`` over the unit sphere."""
    quad = sphere_quadrature(*order)
    vals = np.array([contraction(n) for n in quad.nodes])
    return quad.average(vals)


# symmetric-matrix channels: m_s = M[k, l] for the six pairs k <= l
SYM_INDEX = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))


def to_symmetric(M: np.ndarray) -> np.ndarray:
    """The six independent entries of a symmetric 3x3 matrix (last two axes)."""
    return np.stack([M[..., k, l] for k, l in SYM_INDEX], axis=-1)


def orientation_moments(u: float, gamma: float, mode: Mode | str, electrostatic: bool = False,
                        order: tuple[int, int] = (16, 32)) -> dict[str, np.ndarray]:
    """Second moments of the envelope channels over a uniformly random axis.

    Keys ``"mm"``, ``"mc"``, ``"cm"``, ``"cc"`` hold 6x6 arrays
    <f(m)_s g(m)_t> with f, g the identity (m) or complex conjugation (c).
    """
    quad = sphere_quadrature(*order)
    ms = []
    for n in quad.nodes:
        M = envelope_tensor(PairGeometry(u, tuple(n), 1.0), gamma, mode, electrostatic)
        ms.append(to_symmetric(M))
    ms = np.array(ms)
    w = quad.weights
    out = {}
    for key, (f, g) in {"mm": (ms, ms), "mc": (ms, ms.conj()),
                        "cm": (ms.conj(), ms), "cc": (ms.conj(), ms.conj())}.items():
        out[key] = np.einsum("n,ns,nt->st", w, f, g)
    return out
