"""Phase-tagged propagation of the two-pulse sequence and the detection-window
Dyson expansion in the dipole coupling.

Every pulse multiplies a density-matrix block by integer powers of the
manifold phases it imprints. Those integers (one per atom, pulse and excited
manifold) are the *tag* of a component. Demodulation, the Doppler multiplier
and the position phases are all read off the tags, so the numerics never
see an optical phase.

During the detection window the time integral

    int_0^inf dt Tr[O exp((L_decay + L_int) t) rho]

is the resolvent of the generator. It is expanded in L_int; the decay part
is diagonal in a sparse eigenbasis (see :class:`ModeBasis`), so every
resolvent is an elementwise division. Each coupling insertion is either
linear in T (pair phase +1) or in T* (pair phase -1); only insertion
sequences whose pair phases cancel survive the disorder average, and their
tensor coefficients are contracted with orientation moments of the
phase-stripped envelope.
"""

from __future__ import annotations

import itertools
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .atoms import Species
from .kernel import Mode, carries_pair_phase, coupling_phase, orientation_moments
from .liouvillians import (
    DetectionTensor,
    PulseEvent,
    decay_generator,
    pair_channel_superops,
    pulse_unitary,
    single_atom_detection,
)

log = logging.getLogger(__name__)

__all__ = [
    "AtomTag",
    "TaggedState",
    "initial_state",
    "apply_pulse",
    "evolve_tau",
    "ClassKey",
    "RawTerm",
    "ClassifiedTerm",
    "ModeBasis",
    "DetectionEngine",
    "detect_integrate",
    "disorder_filter",
    "classify",
    "peak_name",
    "EngineConfig",
    "run_engine",
    "propagate_pulses",
    "class_states",
    "STANDARD_PEAKS",
]

# harmonics per pulse: tuple over excited manifolds
AtomTag = tuple[tuple[int, ...], ...]


@dataclass
class TaggedState:
    """Product of per-atom tagged density operators.

    ``atoms[a]`` maps ``(tag, k)`` to a d x d matrix; ``tag`` holds the pulse
    harmonics of atom ``a`` and ``k`` counts the inter-pulse decay in units
    of gamma/2, i.e. the component is multiplied by exp(-k gamma tau / 2).
    Pulses and free decay act atom by atom, so the product form is exact
    until the detection window, where couplings are switched on.
    """

    species: Species
    atoms: list[dict[tuple[AtomTag, int], np.ndarray]]
    n_pulses: int = 0

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    def reduced(self, atom: int) -> dict[tuple[AtomTag, int], np.ndarray]:
        return self.atoms[atom]

    def tag_zero_trace(self, atom: int) -> complex:
        zero = tuple((0,) * self.species.n_excited for _ in range(self.n_pulses))
        return sum(np.trace(m) for (t, k), m in self.atoms[atom].items() if t == zero and k == 0)


def initial_state(species: Species, n_atoms: int) -> TaggedState:
    """All atoms in the maximally mixed ground manifold, untagged."""
    if n_atoms not in (1, 2, 3):
        raise ValueError("supported atom numbers are 1, 2, 3")
    pg = species.projector(0) / species.ground.dim
    return TaggedState(species, [{((), 0): pg.astype(complex)} for _ in range(n_atoms)])


def _pulse_single(species: Species, comps, U0: np.ndarray):
    """Conjugate every block of every component by the harmonic-split pulse."""
    ne = species.n_excited
    projs = [species.projector(b) for b in range(ne + 1)]
    out: dict = defaultdict(lambda: np.zeros((species.dim, species.dim), dtype=complex))
    for (tag, k), X in comps.items():
        for a, b in itertools.product(range(ne + 1), repeat=2):
            Xab = projs[a] @ X @ projs[b]
            if not Xab.any():
                continue
            Y = U0 @ Xab @ U0.conj().T
            for a2, b2 in itertools.product(range(ne + 1), repeat=2):
                Z = projs[a2] @ Y @ projs[b2]
                if np.abs(Z).max() < 1e-300:
                    continue
                n = tuple((int(a == t) - int(b == t)) - (int(a2 == t) - int(b2 == t))
                          for t in range(1, ne + 1))
                out[(tag + (n,), k)] += Z
    return dict(out)


def apply_pulse(state: TaggedState, pulse: PulseEvent, driven_atoms=None) -> TaggedState:
    """Apply one delta pulse to the driven atoms; others just gain a zero tag.

    Decay and coupling are ignored for the duration of the pulse.
    """
    n = state.n_atoms
    driven = set(range(min(n, 2)) if driven_atoms is None else driven_atoms)
    if not driven <= set(range(n)):
        raise ValueError(f"unknown atom index in {sorted(driven)}")
    U0 = pulse_unitary(state.species, pulse.area, pulse.polarization).U0
    zero = (0,) * state.species.n_excited
    atoms = []
    for a, comps in enumerate(state.atoms):
        if a in driven:
            atoms.append(_pulse_single(state.species, comps, U0))
        else:
            atoms.append({(t + (zero,), k): m for (t, k), m in comps.items()})
    return TaggedState(state.species, atoms, state.n_pulses + 1)


def evolve_tau(state: TaggedState) -> TaggedState:
    """Free decay between pulses, split into exponential modes.

    Each component is resolved over the spectral projectors of the
    single-atom decay generator (rates 0, gamma/2, gamma); the decay rate is
    recorded in the component key. Coupling is off in this interval.
    """
    dg = decay_generator(state.species, 1)
    d = state.species.dim
    atoms = []
    for comps in state.atoms:
        new: dict = defaultdict(lambda: np.zeros((d, d), dtype=complex))
        for (tag, k), X in comps.items():
            v = X.reshape(-1)
            floor = 1e-13 * np.abs(v).max()
            for r, P in enumerate(dg.spectral_projectors):
                w = P @ v
                if np.abs(w).max() > floor:
                    new[(tag, k + r)] += w.reshape(d, d)
        atoms.append(dict(new))
    return TaggedState(state.species, atoms, state.n_pulses)


# ---------------------------------------------------------------- classes

@dataclass(frozen=True, order=True)
class ClassKey:
    """Aggregate tag of a multi-atom component after the last pulse.

    ``coeffs[t]`` is the net last-pulse harmonic on manifold t summed over
    atoms (so the tau oscillation frequency is coeffs . omegas), ``kappa``
    their sum and ``k`` the inter-pulse decay in units of gamma/2.
    """

    kappa: int
    coeffs: tuple[int, ...]
    k: int


def _atom_groups(comps, keep_position_phase=False):
    """Sum per-atom components sharing (last-pulse harmonics, k) with p = 0."""
    groups: dict = defaultdict(lambda: 0)
    for (tag, k), X in comps.items():
        p = sum(sum(n) for n in tag)
        if p != 0 and not keep_position_phase:
            continue
        groups[(tag[-1], k)] = groups[(tag[-1], k)] + X
    return dict(groups)


def peak_name(coeffs: tuple[int, ...]) -> str:
    """Standard peak labels; anything else is returned in bracket notation."""
    if len(coeffs) == 1:
        a = coeffs[0]
        return {1: "D1", 2: "2D1"}.get(a, f"[{a}]")
    a, b = coeffs[0], coeffs[-1]
    names = {(1, 0): "D1", (0, 1): "D2", (2, 0): "2D1", (0, 2): "2D2", (1, 1): "D1D2"}
    return names.get((a, b), f"[{a},{b}]")


STANDARD_PEAKS = ("D1", "D2", "2D1", "D1D2", "2D2")
ROUNDOFF_FLOOR = 1e-12


def class_states(state: TaggedState, kappas=(1, 2)):
    """Group the product state into classes with fixed (kappa, peak, k).

    Only components without a net position phase on any atom are kept.
    Returns ``{ClassKey: [per-atom matrices lists]}`` where every entry is a
    list of product terms (one d x d factor per atom).
    """
    per_atom = [_atom_groups(c) for c in state.atoms]
    out: dict = defaultdict(list)
    for combo in itertools.product(*[list(g.items()) for g in per_atom]):
        coeffs = tuple(sum(c[0][0][t] for c in combo) for t in range(state.species.n_excited))
        kappa = sum(coeffs)
        if kappa not in kappas:
            continue
        k = sum(c[0][1] for c in combo)
        out[ClassKey(kappa, coeffs, k)].append([c[1] for c in combo])
    return dict(out)


# ---------------------------------------------------------------- detection

class ModeBasis:
    """Eigenbasis of the single-atom decay generator.

    Operator basis elements with zero or one excitation are exact
    eigenvectors; excited-excited elements acquire the ground population
    they feed. The transformation is therefore I plus a nilpotent shear.
    """

    def __init__(self, species: Species):
        self.species = species
        dg = decay_generator(species, 1)
        grade = dg.grading()
        n = grade.size
        V = np.zeros((n, n), dtype=complex)
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1
            V[:, i] = dg.spectral_projectors[grade[i]] @ e
        V[np.abs(V) < 1e-15] = 0
        self.V = V
        self.Vinv = np.linalg.inv(V)
        self.Vinv[np.abs(self.Vinv) < 1e-15] = 0
        self.rates = dg.rates[grade]  # decay rate of every mode
        L_modes = self.Vinv @ dg.single @ V
        off = L_modes - np.diag(np.diag(L_modes))
        if np.abs(off).max() > 1e-9 * species.gamma:
            raise RuntimeError("decay generator not diagonal in the mode basis")

    def to_modes(self, X: np.ndarray) -> np.ndarray:
        x = self.Vinv @ X.reshape(-1)
        # traceless components leave roundoff on the stationary modes
        x[np.abs(x) < 1e-13 * np.abs(x).max(initial=0.0)] = 0
        return x

    def covector(self, O: np.ndarray) -> np.ndarray:
        """Covector c with c . x_modes = Tr[O X]."""
        return self.V.T @ O.T.reshape(-1)

    def superop(self, S: np.ndarray) -> np.ndarray:
        out = self.Vinv @ S @ self.V
        out[np.abs(out) < 1e-14 * max(1.0, np.abs(out).max())] = 0
        return out


@dataclass(frozen=True)
class RawTerm:
    """Unaveraged detection coefficient of one class and insertion sequence.

    ``sequence`` lists the insertions as ``(pair, kind)`` with kind +1 (T),
    -1 (T*) or 0 (real electrostatic T). ``tensor`` has one symmetric-channel
    axis (length 6) per insertion; order-0 terms carry a scalar.
    """

    key: ClassKey
    order: int
    sequence: tuple[tuple[tuple[int, int], int], ...]
    tensor: np.ndarray

    @property
    def pair_phase(self) -> dict[tuple[int, int], int]:
        ph: dict = defaultdict(int)
        for pair, kind in self.sequence:
            ph[pair] += kind
        return dict(ph)


class DetectionEngine:
    """Resolvent Dyson expansion on N atoms in the decay mode basis.

    N-atom operators are flat vectors of length (d^2)^N in per-atom mode
    coordinates. Pair superoperators are embedded into the full space once,
    so every insertion is a single sparse product. The tensor convention
    factor c (see :data:`kernel.COUPLING_PHASE`) is folded into the
    operators: kind +1 carries c, kind -1 conj(c).
    """

    def __init__(self, species: Species, n_atoms: int, K: np.ndarray,
                 coupled_pairs=None, convention: str = "lindblad"):
        if n_atoms not in (1, 2, 3):
            raise ValueError("supported atom numbers are 1, 2, 3")
        self.convention = convention
        self.c = coupling_phase(convention)
        self.species = species
        self.n = n_atoms
        self.basis = ModeBasis(species)
        self.d2 = species.dim ** 2
        self.size = self.d2 ** n_atoms
        K = K.K if isinstance(K, DetectionTensor) else np.asarray(K)
        O1 = single_atom_detection(species, K)
        self.o1 = self.basis.covector(O1)
        self.id1 = self.basis.covector(np.eye(species.dim))
        if coupled_pairs is None:
            coupled_pairs = list(itertools.combinations(range(n_atoms), 2))
        self.pairs = [tuple(sorted(p)) for p in coupled_pairs]
        for a, b in self.pairs:
            if not (0 <= a < b < n_atoms):
                raise ValueError(f"invalid pair {(a, b)} for {n_atoms} atoms")
        r = self.basis.rates
        total = sum(np.meshgrid(*([r] * n_atoms), indexing="ij")).ravel()
        # all-ground modes are annihilated by the observable and by every
        # coupling insertion, so their (infinite) resolvent is never needed
        self.resolvent = np.zeros_like(total)
        self.resolvent[total > 0] = 1.0 / total[total > 0]
        self._full: dict = {}

    @cached_property
    def observable(self) -> np.ndarray:
        out = np.zeros(self.size, dtype=complex)
        for a in range(self.n):
            t = np.ones(1, dtype=complex)
            for b in range(self.n):
                t = np.kron(t, self.o1 if b == a else self.id1)
            out += t
        return out

    @cached_property
    def _pair_ops(self):
        """Sparse two-atom channel superoperators: {kind: [6 matrices]}."""
        terms = pair_channel_superops(self.species)
        ops = {}
        for kind, key, c in ((+1, "plus", self.c), (-1, "minus", np.conj(self.c))):
            mats = []
            for s in range(6):
                acc = None
                for A, B in terms[key][s]:
                    m = sp.kron(sp.csr_matrix(self.basis.superop(A)),
                                sp.csr_matrix(self.basis.superop(B)), format="csr")
                    acc = m if acc is None else acc + m
                acc.eliminate_zeros()
                mats.append((c * acc).tocsr())
            ops[kind] = mats
        ops[0] = [(ops[1][s] + ops[-1][s]).tocsr() for s in range(6)]
        return ops

    def _embed(self, mat: sp.csr_matrix, pair) -> sp.csr_matrix:
        """Lift a two-atom superoperator to the N-atom space."""
        a, b = pair
        if self.n == 2:
            return mat
        coo = mat.tocoo()
        q = self.d2
        ra, rb = np.divmod(coo.row, q)
        ca, cb = np.divmod(coo.col, q)
        c = [i for i in range(self.n) if i not in pair][0]
        strides = [q ** (self.n - 1 - i) for i in range(self.n)]
        spect = np.arange(q)
        rows = (ra[:, None] * strides[a] + rb[:, None] * strides[b] + spect[None, :] * strides[c]).ravel()
        cols = (ca[:, None] * strides[a] + cb[:, None] * strides[b] + spect[None, :] * strides[c]).ravel()
        vals = np.repeat(coo.data, q)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.size, self.size))

    def op(self, pair, kind, s) -> sp.csr_matrix:
        key = (pair, kind, s)
        if key not in self._full:
            self._full[key] = self._embed(self._pair_ops[kind][s], pair)
        return self._full[key]

    def W(self, pair, kind, s, x):
        return self.op(pair, kind, s) @ x

    def WT(self, pair, kind, s, y):
        return self.op(pair, kind, s).T @ y

    def R(self, x):
        return self.resolvent * x

    def state_vector(self, products) -> np.ndarray:
        """Sum of product terms (lists of d x d factors) in mode coordinates."""
        out = np.zeros(self.size, dtype=complex)
        for factors in products:
            t = np.ones(1, dtype=complex)
            for f in factors:
                t = np.kron(t, self.basis.to_modes(f))
            out += t
        return out

    # -- expansion ---------------------------------------------------------

    def expand(self, x: np.ndarray, kinds, order_max: int = 2, include_order1: bool = True,
               include_recurrent: bool = False):
        """Detection coefficients of ``x`` up to ``order_max`` insertions.

        ``kinds`` are the insertion types per pair: ``(+1, -1)`` for tensors
        carrying the retardation phase, ``(0,)`` for the electrostatic one.
        Yields ``(order, sequence, tensor)``; tensors have one channel axis
        of length 6 per insertion.
        """
        if order_max not in (0, 2, 4):
            raise ValueError("order_max must be 0, 2 or 4")
        x = np.asarray(x, dtype=complex).ravel()
        if x.size != self.size:
            raise ValueError("state vector has the wrong size")
        x0 = self.R(x)
        obs = self.observable
        y0 = self.R(obs)
        yield 0, (), complex(obs @ x0)
        if order_max == 0:
            return
        first_kinds = (1, -1) if 0 not in kinds else (0,)
        f1 = {}
        for pair in self.pairs:
            for kind in first_kinds:
                f1[(pair, kind)] = np.stack([self.R(self.W(pair, kind, s, x0)) for s in range(6)])
        if include_order1:
            for (pair, kind), fs in f1.items():
                if kind != 0:
                    yield 1, ((pair, kind),), fs @ obs
        for seq in _robust_sequences(self.pairs, kinds, n_pairs=1):
            (p1, k1), (p2, k2) = seq
            b2 = np.stack([self.WT(p2, k2, t, y0) for t in range(6)])
            yield 2, seq, f1[(p1, k1)] @ b2.T
        if order_max < 4:
            return
        seqs4 = _robust_sequences(self.pairs, kinds, n_pairs=2, recurrent=include_recurrent)
        by_prefix: dict = defaultdict(list)
        for seq in seqs4:
            by_prefix[seq[:2]].append(seq)
        fw = np.empty((36, self.size), dtype=complex)
        bw_cache: dict = {}
        for prefix, seqs in by_prefix.items():
            (p1, k1), (p2, k2) = prefix
            for s in range(6):
                for t in range(6):
                    fw[6 * s + t] = self.R(self.W(p2, k2, t, f1[(p1, k1)][s]))
            for seq in seqs:
                suffix = seq[2:]
                if suffix not in bw_cache:
                    if len(bw_cache) >= 4:
                        bw_cache.pop(next(iter(bw_cache)))
                    (p3, k3), (p4, k4) = suffix
                    bw = np.empty((36, self.size), dtype=complex)
                    for u in range(6):
                        b4 = self.R(self.WT(p4, k4, u, y0))
                        for s3 in range(6):
                            bw[6 * s3 + u] = self.WT(p3, k3, s3, b4)
                    bw_cache[suffix] = bw
                tens = (fw @ bw_cache[suffix].T).reshape(6, 6, 6, 6)
                yield 4, seq, tens

    def amplitude(self, x, M_by_pair: dict) -> complex:
        """Exact-geometry cross check: sum of *all* sequences to second order.

        ``M_by_pair`` holds full (phase-carrying) coupling tensors per pair.
        Used by tests; not part of the disorder-averaged pipeline.
        """
        x = np.asarray(x, dtype=complex).ravel()
        x0 = self.R(x)
        obs = self.observable
        total = obs @ x0
        y0 = self.R(obs)
        from .kernel import to_symmetric
        fac = {}
        for pair, M in M_by_pair.items():
            m = to_symmetric(np.asarray(M))
            fac[(pair, 1)], fac[(pair, -1)] = m, m.conj()
        f1 = {key: np.stack([self.R(self.W(key[0], key[1], s, x0)) for s in range(6)]) for key in fac}
        g1 = {key: sum(fac[key][s] * f1[key][s] for s in range(6)) for key in fac}
        for key in fac:
            total += obs @ g1[key]
        for k1 in fac:
            for k2 in fac:
                b = sum(fac[k2][t] * self.WT(k2[0], k2[1], t, y0) for t in range(6))
                total += b @ g1[k1]
        return complex(total)


def _robust_sequences(pairs, kinds, n_pairs, recurrent=False):
    """Insertion sequences whose pair phases cancel pair by pair.

    Retarded kinds (+1, -1): each participating pair has one T and one T*.
    Electrostatic kind 0: each participating pair is inserted twice.
    With ``recurrent`` a single pair may also appear four times.
    """
    per_pair = [(1, -1)] if 0 not in kinds else [(0, 0)]
    out = []
    pair_sets = list(itertools.combinations(pairs, n_pairs))
    for ps in pair_sets:
        labels = [(p, k) for p in ps for k in per_pair[0]]
        for perm in set(itertools.permutations(labels)):
            out.append(tuple(perm))
    if recurrent and n_pairs == 2:
        for p in pairs:
            labels = [(p, k) for k in per_pair[0] * 2]
            for perm in set(itertools.permutations(labels)):
                out.append(tuple(perm))
    return sorted(out)


def detect_integrate(state: TaggedState, K, mode: Mode | str = Mode.FULL,
                     electrostatic: bool = False, order_max: int = 2,
                     coupled_pairs=None, include_recurrent: bool = False,
                     kappas=(1, 2), engine: DetectionEngine | None = None,
                     prune: float = 1e-12, offwindow_order: int = 2,
                     convention: str = "lindblad"):
    """Raw detection coefficients for every tagged class of ``state``.

    Returns a list of :class:`RawTerm`. Order-1 terms are included to make
    the pair-phase bookkeeping visible; they never survive the filter.
    Classes outside the five standard peaks are expanded only up to
    ``offwindow_order``; classes whose vector is below ``prune`` times the
    largest one are skipped as numerically empty.
    """
    if order_max % 2 or order_max > 4 or order_max < 0:
        raise ValueError("order_max must be 0, 2 or 4")
    mode = Mode(mode)
    engine = engine or DetectionEngine(state.species, state.n_atoms, K, coupled_pairs, convention)
    if engine.convention != convention:
        raise ValueError(f"engine built for tensor convention {engine.convention!r}, run asks {convention!r}")
    kinds = (+1, -1) if carries_pair_phase(mode, electrostatic) else (0,)
    if mode is Mode.OFF:
        order_max = 0
    classes = class_states(state, kappas)
    vectors = {key: engine.state_vector(classes[key]) for key in sorted(classes)}
    scale = max((np.abs(v).max() for v in vectors.values()), default=0.0)
    terms = []
    for key, x in vectors.items():
        if np.abs(x).max() <= prune * scale:
            log.debug("class %s is numerically empty, skipped", key)
            continue
        top = order_max if peak_name(key.coeffs) in STANDARD_PEAKS else min(order_max, offwindow_order)
        for order, seq, tens in engine.expand(x, kinds, top,
                                              include_recurrent=include_recurrent):
            terms.append(RawTerm(key, order, seq, np.asarray(tens)))
    return terms


def _moment_key(kind_i, kind_j):
    f = lambda k: "c" if k == -1 else "m"  # noqa: E731
    return f(kind_i) + f(kind_j)


def disorder_filter(terms, moments_by_pair) -> dict[tuple[ClassKey, int], complex]:
    """Drop phase-carrying terms and orientation-average the rest.

    ``moments_by_pair`` maps a pair to the dict returned by
    :func:`kernel.orientation_moments`. Returns amplitudes keyed by
    ``(class key, order)``.
    """
    out: dict = defaultdict(complex)
    for term in terms:
        if any(v != 0 for v in term.pair_phase.values()):
            continue
        if term.order == 0:
            out[(term.key, 0)] += complex(term.tensor)
            continue
        positions: dict = defaultdict(list)
        for i, (pair, kind) in enumerate(term.sequence):
            positions[pair].append((i, kind))
        letters = "abcd"
        operands, subs = [term.tensor], letters[: term.order]
        ok = True
        for pair, pos in positions.items():
            if len(pos) != 2:
                ok = False  # recurrent four-fold terms need fourth moments
                break
            (i, ki), (j, kj) = pos
            operands.append(moments_by_pair[pair][_moment_key(ki, kj)])
            subs += "," + letters[i] + letters[j]
        if not ok:
            continue
        out[(term.key, term.order)] += complex(np.einsum(subs + "->", *operands))
    return dict(out)


@dataclass(frozen=True)
class ClassifiedTerm:
    kappa: int
    peak: str
    order: int
    amplitude: complex
    gamma_tau: float
    center: float
    doppler_multiplier: int
    standard: bool = True


def classify(amplitudes: dict, species: Species) -> list[ClassifiedTerm]:
    """Attach peak identity, tau width, center frequency and Doppler multiplier.

    Peaks outside the standard five (e.g. 2 omega1 - omega2) are kept but
    flagged ``standard=False`` and logged.
    """
    # amplitudes far below the largest one of the same order are summation
    # roundoff (e.g. kappa=2 for independent atoms) and are set to zero
    scale: dict = defaultdict(float)
    for (key, order), amp in amplitudes.items():
        scale[order] = max(scale[order], abs(amp))
    out = []
    for (key, order), amp in sorted(amplitudes.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        if abs(amp) < ROUNDOFF_FLOOR * scale[order]:
            amp = 0j
        name = peak_name(key.coeffs)
        center = float(np.dot(key.coeffs, species.omegas))
        standard = name in STANDARD_PEAKS
        if not standard and abs(amp) > 0:
            log.info("non-standard peak %s at order %d, |A| = %.3g", name, order, abs(amp))
        out.append(ClassifiedTerm(key.kappa, name, order, amp, 0.5 * key.k * species.gamma,
                                  center, key.kappa, standard))
    return out


# ---------------------------------------------------------------- driver

@dataclass
class EngineConfig:
    species: Species
    n_atoms: int = 3
    area: float = 0.3
    polarization: tuple[float, float, float] = (1.0, 0.0, 0.0)
    K: np.ndarray | None = None
    mode: Mode | str = Mode.FULL
    electrostatic: bool = False
    u: float = 8.18e4 * 7.5e-3
    order_max: int = 2
    driven_atoms: tuple[int, ...] = (0, 1)
    coupled_pairs: list | None = None
    include_recurrent: bool = False
    couple_during_tau: bool = False
    quadrature: tuple[int, int] = (16, 32)
    kappas: tuple[int, ...] = (1, 2)
    convention: str = "lindblad"
    extra: dict = field(default_factory=dict)


def propagate_pulses(cfg: EngineConfig) -> TaggedState:
    """Initial state -> pulse 1 -> inter-pulse decay -> pulse 2."""
    if cfg.couple_during_tau:
        raise NotImplementedError("dipole coupling between the pulses is not modelled")
    state = initial_state(cfg.species, cfg.n_atoms)
    driven = [a for a in cfg.driven_atoms if a < cfg.n_atoms]
    state = apply_pulse(state, PulseEvent(1, 0.0, cfg.area, cfg.polarization), driven)
    state = evolve_tau(state)
    return apply_pulse(state, PulseEvent(2, 0.0, cfg.area, cfg.polarization), driven)


def run_engine(cfg: EngineConfig, engine: DetectionEngine | None = None,
               raw_terms=None) -> list[ClassifiedTerm]:
    """Full chain for one polarization: tagged pulses, detection, filter, classify."""
    from .liouvillians import detection_tensor

    K = cfg.K if cfg.K is not None else detection_tensor((1.0, 0.0, 0.0), 0.38).K
    mode = Mode(cfg.mode)
    if raw_terms is None:
        state = propagate_pulses(cfg)
        raw_terms = detect_integrate(state, K, mode, cfg.electrostatic, cfg.order_max,
                                     cfg.coupled_pairs, cfg.include_recurrent, cfg.kappas, engine,
                                     convention=cfg.convention)
    moments = {}
    if mode is not Mode.OFF:
        mom = orientation_moments(cfg.u, cfg.species.gamma, mode, cfg.electrostatic, cfg.quadrature)
        pairs = {pair for t in raw_terms for pair, _ in t.sequence}
        moments = {p: mom for p in pairs}
    else:
        raw_terms = [t for t in raw_terms if t.order == 0]
    return classify(disorder_filter(raw_terms, moments), cfg.species)
