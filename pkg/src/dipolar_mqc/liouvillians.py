"""Generators of the driven, decaying, dipole-coupled multi-atom dynamics.

Superoperators act on row-major vectorized density matrices,
vec(A rho B) = kron(A, B.T) vec(rho). Multi-atom superoperators are kept
in *per-atom* vectorized coordinates: an N-atom operator is a tensor with
one axis of length d**2 per atom (composite index i_a * d + j_a).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .atoms import Species, lowering_operator

__all__ = [
    "PulseEvent",
    "PulseUnitary",
    "pulse_unitary",
    "dipole_cartesian",
    "left",
    "right",
    "single_atom_decay",
    "DecayGenerator",
    "decay_generator",
    "pair_channel_superops",
    "CouplingGenerator",
    "coupling_generator",
    "DetectionTensor",
    "detection_tensor",
    "detection_operator",
    "single_atom_detection",
    "embed",
]


@dataclass(frozen=True)
class PulseEvent:
    index: int
    time: float
    area: float
    polarization: tuple[float, float, float]
    modulation: float = 0.0

    def __post_init__(self):
        e = np.asarray(self.polarization, dtype=float)
        if self.area < 0:
            raise ValueError("pulse area must be non-negative")
        if abs(np.linalg.norm(e) - 1) > 1e-12:
            raise ValueError("polarization must be a unit vector")
        if abs(e[2]) > 1e-12:
            raise ValueError("polarization must be transverse to the beam axis z")


def dipole_cartesian(species: Species) -> list[np.ndarray]:
    """Cartesian lowering operators, one (3, d, d) array per excited manifold."""
    return [lowering_operator(species, j).cartesian() for j in range(1, species.n_excited + 1)]


@dataclass(frozen=True)
class PulseUnitary:
    """Delta-pulse propagator U0 at zero phases, plus its phase structure.

    With manifold phases phi the propagator is G U0 G^dagger, where
    G = exp(-i sum_j phi_j P_j) and P_j projects on excited manifold j.
    """

    species: Species
    U0: np.ndarray
    generator: np.ndarray = field(repr=False)

    @cached_property
    def projectors(self) -> list[np.ndarray]:
        return [self.species.projector(b) for b in range(self.species.n_excited + 1)]

    def at_phases(self, phases) -> np.ndarray:
        phases = np.asarray(phases, dtype=float)
        g = np.ones(self.species.dim, dtype=complex)
        blocks = self.species.block_of()
        for j, ph in enumerate(phases, start=1):
            g[blocks == j] = np.exp(-1j * ph)
        return (g[:, None] * self.U0) * g.conj()[None, :]

    def amplitude_harmonics(self) -> dict[tuple[int, ...], np.ndarray]:
        """Split U(phi) = sum_n exp(i n.phi) U_n; returns {n: U_n}."""
        blocks = self.species.block_of()
        ne = self.species.n_excited
        out: dict[tuple[int, ...], np.ndarray] = {}
        for i in range(self.species.dim):
            for j in range(self.species.dim):
                if self.U0[i, j] == 0:
                    continue
                n = tuple(-(int(blocks[i] == t) - int(blocks[j] == t)) for t in range(1, ne + 1))
                out.setdefault(n, np.zeros_like(self.U0))[i, j] = self.U0[i, j]
        return out


def pulse_unitary(species: Species, area: float, polarization) -> PulseUnitary:
    """exp(-i area/2 (D^dag . e + h.c.)) summed over all excited manifolds.

    Both transitions couple to the same real polarization vector, which is
    what the conjugated and unconjugated forms reduce to for linear light.
    """
    e = np.asarray(polarization, dtype=float)
    H = np.zeros((species.dim, species.dim), dtype=complex)
    for D in dipole_cartesian(species):
        raise_e = np.einsum("kij,k->ij", D.conj().transpose(0, 2, 1), e)
        H += raise_e + raise_e.conj().T
    U0 = sla.expm(-0.5j * area * H)
    return PulseUnitary(species, U0, H)


def left(A: np.ndarray) -> np.ndarray:
    """Superoperator rho -> A rho."""
    return np.kron(A, np.eye(A.shape[1]))


def right(B: np.ndarray) -> np.ndarray:
    """Superoperator rho -> rho B."""
    return np.kron(np.eye(B.shape[0]), B.T)


def single_atom_decay(species: Species) -> np.ndarray:
    """Single-atom radiative-decay superoperator (d^2 x d^2), shared rate gamma."""
    d = species.dim
    L = np.zeros((d * d, d * d), dtype=complex)
    for D in dipole_cartesian(species):
        for k in range(3):
            Dk = D[k]
            DdD = Dk.conj().T @ Dk
            L += species.gamma * (np.kron(Dk, Dk.conj()) - 0.5 * left(DdD) - 0.5 * right(DdD))
    return L


def excitation_number(species: Species) -> np.ndarray:
    """Excitation count of each single-atom basis state (0 ground, 1 excited)."""
    return (species.block_of() > 0).astype(int)


@dataclass(frozen=True)
class DecayGenerator:
    """Sum of single-atom decay generators on N atoms, applied matrix-free."""

    species: Species
    n_atoms: int

    @cached_property
    def single(self) -> np.ndarray:
        return single_atom_decay(self.species)

    @cached_property
    def rates(self) -> np.ndarray:
        """Distinct single-atom decay rates (0, gamma/2, gamma)."""
        g = self.species.gamma
        return np.array([0.0, 0.5 * g, g])

    @cached_property
    def spectral_projectors(self) -> list[np.ndarray]:
        """Projectors P_r onto the eigenspaces with eigenvalue -rates[r]."""
        L = self.single
        eye = np.eye(L.shape[0])
        out = []
        for i, lam in enumerate(-self.rates):
            P = eye.astype(complex)
            for j, mu in enumerate(-self.rates):
                if i != j:
                    P = P @ (L - mu * eye) / (lam - mu)
            out.append(P)
        return out

    def grading(self) -> np.ndarray:
        """Total excitation (row + column) of every single-atom operator basis element."""
        ex = excitation_number(self.species)
        return (ex[:, None] + ex[None, :]).ravel()

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Apply to an N-atom operator in per-atom coordinates, shape (d^2,)*N."""
        out = np.zeros_like(x, dtype=complex)
        for a in range(self.n_atoms):
            out += np.moveaxis(np.tensordot(self.single, x, axes=(1, a)), 0, a)
        return out

    def apply_dense(self, rho: np.ndarray) -> np.ndarray:
        """Apply to a full density matrix of shape (D, D), D = d**N."""
        return from_atom_vec(self.apply(to_atom_vec(rho, self.species.dim, self.n_atoms)),
                             self.species.dim, self.n_atoms)


def decay_generator(species: Species, n_atoms: int) -> DecayGenerator:
    if n_atoms < 1:
        raise ValueError("need at least one atom")
    return DecayGenerator(species, n_atoms)


def to_atom_vec(rho: np.ndarray, d: int, n: int) -> np.ndarray:
    """(D, D) matrix -> tensor with one composite (i_a, j_a) axis per atom."""
    t = rho.reshape((d,) * (2 * n))
    perm = [p for a in range(n) for p in (a, n + a)]
    return t.transpose(perm).reshape((d * d,) * n)


def from_atom_vec(x: np.ndarray, d: int, n: int) -> np.ndarray:
    t = x.reshape((d,) * (2 * n))
    inv = [2 * a for a in range(n)] + [2 * a + 1 for a in range(n)]
    return t.transpose(inv).reshape(d**n, d**n)


def pair_channel_superops(species: Species) -> dict[str, list[list[tuple[np.ndarray, np.ndarray]]]]:
    """Kronecker factors of the pair coupling superoperators.

    For an unordered pair (a, b) and symmetric channel s, the superoperators
    multiplying T_s (``"plus"``) and conj(T_s) (``"minus"``) are

        sum over terms  kron(A_term on atom a, B_term on atom b).

    Returned as ``{"plus": [terms for s in 0..5], "minus": [...]}`` with each
    term a pair (A, B) of d^2 x d^2 single-atom superoperators. Only resonant
    couplings (same excited manifold on both atoms) appear.
    """
    from .kernel import SYM_INDEX

    out = {"plus": [], "minus": []}
    Ds = dipole_cartesian(species)
    for k0, l0 in SYM_INDEX:
        kl = [(k0, l0)] if k0 == l0 else [(k0, l0), (l0, k0)]
        plus, minus = [], []
        for D in Ds:
            for k, l in kl:
                Dk_dag = D[k].conj().T
                Dl = D[l]
                # ordered (alpha, beta) = (a, b) -> first factor on a, second on b
                # T term: D_{alpha,l} rho D_{beta,k}^dag - D_{beta,k}^dag D_{alpha,l} rho
                plus.append((left(Dl), right(Dk_dag)))
                plus.append((-left(Dl), left(Dk_dag)))
                # same with (alpha, beta) = (b, a)
                plus.append((right(Dk_dag), left(Dl)))
                plus.append((-left(Dk_dag), left(Dl)))
                # T* term: D_{beta,l} rho D_{alpha,k}^dag - rho D_{alpha,k}^dag D_{beta,l}
                minus.append((right(Dk_dag), left(Dl)))
                minus.append((-right(Dk_dag), right(Dl)))
                minus.append((left(Dl), right(Dk_dag)))
                minus.append((-right(Dl), right(Dk_dag)))
        out["plus"].append(plus)
        out["minus"].append(minus)
    return out


@dataclass
class CouplingGenerator:
    """Resonant dipole-dipole coupling of one atom pair for a given tensor.

    ``apply`` returns ``{+1: part linear in T, -1: part linear in conj(T)}``
    so that callers can track the exp(+-i k0 r) pair phase of each insertion.
    """

    species: Species
    n_atoms: int
    pair: tuple[int, int]
    envelope: np.ndarray

    def __post_init__(self):
        a, b = self.pair
        if a == b:
            raise ValueError("coupling needs two distinct atoms")
        if not (0 <= a < self.n_atoms and 0 <= b < self.n_atoms):
            raise ValueError("atom index out of range")
        self.envelope = np.asarray(self.envelope, dtype=complex)

    @cached_property
    def _terms(self):
        return pair_channel_superops(self.species)

    def apply(self, x: np.ndarray) -> dict[int, np.ndarray]:
        from .kernel import to_symmetric

        m = to_symmetric(self.envelope)
        a, b = self.pair
        res = {}
        for sign, key, coef in ((+1, "plus", m), (-1, "minus", m.conj())):
            acc = np.zeros_like(x, dtype=complex)
            for s in range(6):
                if coef[s] == 0:
                    continue
                for A, B in self._terms[key][s]:
                    y = np.moveaxis(np.tensordot(A, x, axes=(1, a)), 0, a)
                    y = np.moveaxis(np.tensordot(B, y, axes=(1, b)), 0, b)
                    acc += coef[s] * y
            res[sign] = acc
        return res

    def apply_dense(self, rho: np.ndarray) -> dict[int, np.ndarray]:
        d, n = self.species.dim, self.n_atoms
        out = self.apply(to_atom_vec(rho, d, n))
        return {k: from_atom_vec(v, d, n) for k, v in out.items()}


def coupling_generator(species: Species, n_atoms: int, pair: tuple[int, int],
                       envelope: np.ndarray) -> CouplingGenerator:
    return CouplingGenerator(species, n_atoms, tuple(pair), envelope)


@dataclass(frozen=True)
class DetectionTensor:
    K: np.ndarray
    direction: tuple[float, float, float]
    solid_angle: float


def detection_tensor(direction, solid_angle: float, point: bool = False) -> DetectionTensor:
    """Integral of the transverse projector (I - k k) over a circular cone.

    Closed form: along the cone axis the eigenvalue is the integral of
    sin^2(theta), transverse to it it is solid_angle - (1/2) * that integral.
    ``point=True`` uses the projector at the cone axis times the solid angle.
    """
    c = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(c) - 1) > 1e-12:
        raise ValueError("detector direction must be a unit vector")
    if not (0 < solid_angle <= 4 * np.pi + 1e-12):
        raise ValueError("solid angle must lie in (0, 4 pi]")
    cc = np.outer(c, c)
    if point:
        K = (np.eye(3) - cc) * solid_angle
    else:
        cos_c = 1 - solid_angle / (2 * np.pi)
        int_cos2 = 2 * np.pi * (1 - cos_c**3) / 3
        int_sin2 = solid_angle - int_cos2
        K = int_sin2 * cc + (solid_angle - 0.5 * int_sin2) * (np.eye(3) - cc)
    return DetectionTensor(K, tuple(c), float(solid_angle))


def single_atom_detection(species: Species, K: np.ndarray) -> np.ndarray:
    """sum_J D_J^dag . K . D_J on one atom (overall prefactor f^2 = 1)."""
    O = np.zeros((species.dim, species.dim), dtype=complex)
    for D in dipole_cartesian(species):
        O += np.einsum("kji,kl,lje->ie", D.conj(), K, D)
    return O


def embed(op: np.ndarray, atom: int, n_atoms: int) -> np.ndarray:
    d = op.shape[0]
    mats = [np.eye(d)] * n_atoms
    mats[atom] = op
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def detection_operator(species: Species, n_atoms: int, K) -> np.ndarray:
    """N-atom detection observable: sum over atoms of the single-atom term.

    Cross-atom terms are left out; they carry relative position phases that
    vanish in the configuration average.
    """
    K = K.K if isinstance(K, DetectionTensor) else np.asarray(K)
    O1 = single_atom_detection(species, K)
    return sum(embed(O1, a, n_atoms) for a in range(n_atoms))
