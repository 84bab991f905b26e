"""Brute-force lock-in validator.

Atoms are placed explicitly, every excitation cycle gets its numeric
modulation and laser phases, the master equation is integrated exactly
(matrix exponential) or with an adaptive ODE solver for moving atoms, and
the cycle series is demodulated by a discrete Fourier projection. Averaging
over sampled configurations then plays the role of the disorder average.

The Liouvillian here is assembled directly from the operator form of the
master equation on the full Hilbert space, independently of the per-atom
channel superoperators used by the phase-tag engine.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import expm_multiply
from scipy.spatial.transform import Rotation
from scipy.stats import qmc

from .atoms import Species
from .kernel import Mode, PairGeometry, coupling_tensor
from .liouvillians import detection_operator, dipole_cartesian, pulse_unitary

log = logging.getLogger(__name__)

__all__ = [
    "OracleConfig",
    "Configuration",
    "OracleLiouvillian",
    "check_density_matrix",
    "simulate_cycles",
    "lockin_demodulate",
    "spectrum_over_tau",
    "DisorderSample",
    "sample_configurations",
    "MonteCarloResult",
    "monte_carlo_disorder",
]


@dataclass(frozen=True)
class Configuration:
    """One disorder realization.

    ``positions`` and ``velocities`` are (N, 3) arrays in m and m/s.
    ``laser_phases`` (rad, length N) override k_L . r_alpha when given;
    samplers use this to draw the optical phases of distant atoms
    independently of the pair axis.
    """

    positions: np.ndarray
    velocities: np.ndarray | None = None
    laser_phases: np.ndarray | None = None


@dataclass
class OracleConfig:
    species: Species
    n_atoms: int = 2
    area: float = 0.3
    polarization: tuple[float, float, float] = (1.0, 0.0, 0.0)
    driven: tuple[int, ...] = (0, 1)
    k0: float | None = None
    k_laser: tuple[float, float, float] | None = None
    mode: Mode | str = Mode.NEAR
    electrostatic: bool = True
    coupled: bool = True
    convention: str = "lindblad"
    couple_between_pulses: bool = False
    m_cyc: int = 64
    harmonics: tuple[int, int] = (11, 12)
    t_cyc: float | None = None
    taus: tuple[float, ...] = (0.0,)
    rtol: float = 1e-9
    atol: float = 1e-12
    check_invariants: bool = False

    def __post_init__(self):
        self.mode = Mode(self.mode)
        if self.n_atoms < 1:
            raise ValueError("need at least one atom")
        if self.n_atoms > 2:
            log.warning("dense oracle with %d atoms is expensive", self.n_atoms)
        if self.k0 is None:
            self.k0 = self.species.k0
        if self.k_laser is None:
            self.k_laser = (0.0, 0.0, float(self.k0))
        if self.t_cyc is None:
            self.t_cyc = 60.0 / self.species.gamma
        if self.t_cyc * self.species.gamma < 20:
            raise ValueError("cycle time must be much longer than the excited-state lifetime")
        h1, h2 = self.harmonics
        kmax = 2 * self.n_atoms * max(1, self.species.n_excited)
        if self.m_cyc < 4:
            raise ValueError("need at least four cycles")
        if kmax * abs(h2 - h1) >= self.m_cyc / 2:
            raise ValueError("demodulation harmonics alias on the cycle grid")
        if any(t < 0 for t in self.taus):
            raise ValueError("delays must be non-negative")


def check_density_matrix(rho: np.ndarray, tol: float = 1e-8) -> dict:
    """Hermiticity, trace and positivity diagnostics of a density matrix."""
    herm = float(np.abs(rho - rho.conj().T).max())
    tr = complex(np.trace(rho))
    ev = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    return {
        "hermiticity": herm,
        "trace": tr,
        "min_eigenvalue": float(ev.min()),
        "ok": herm < tol and abs(tr - 1) < tol and ev.min() >= -tol,
    }


def _embed(op, atom, n, d):
    out = np.ones((1, 1), dtype=complex)
    for a in range(n):
        out = np.kron(out, op if a == atom else np.eye(d))
    return out


class OracleLiouvillian:
    """Sparse generator of the N-atom master equation, row-major vectorized."""

    def __init__(self, species: Species, n_atoms: int):
        self.species = species
        self.n = n_atoms
        d = species.dim
        self.D = d ** n_atoms
        eye = sps.identity(self.D, format="csr", dtype=complex)
        self._eye = eye
        # lowering operators per atom, manifold and Cartesian component
        self.ops = [[[sps.csr_matrix(_embed(Dm[k], a, n_atoms, d)) for k in range(3)]
                     for Dm in dipole_cartesian(species)] for a in range(n_atoms)]
        g = species.gamma
        L = sps.csr_matrix((self.D ** 2, self.D ** 2), dtype=complex)
        for a in range(n_atoms):
            for Dm in self.ops[a]:
                for A in Dm:
                    AdA = A.conj().T @ A
                    L = L + g * (sps.kron(A, A.conj()) - 0.5 * sps.kron(AdA, eye)
                                 - 0.5 * sps.kron(eye, AdA.T))
        self.decay = L.tocsr()
        self._pair_cache: dict = {}

    def _pair_terms(self, a, b):
        """Superoperators multiplying T*_kl and T_kl for the ordered pair (a, b)."""
        key = (a, b)
        if key not in self._pair_cache:
            eye = self._eye
            minus = [[0] * 3 for _ in range(3)]
            plus = [[0] * 3 for _ in range(3)]
            for Da, Db in zip(self.ops[a], self.ops[b]):
                for k, l in itertools.product(range(3), repeat=2):
                    Aak, Bbl = Da[k], Db[l]
                    Aal, Bbk = Da[l], Db[k]
                    # T* (D_bl rho D_ak^+ - rho D_ak^+ D_bl)
                    minus[k][l] = minus[k][l] + sps.kron(Bbl, Aak.conj()) - sps.kron(eye, (Aak.conj().T @ Bbl).T)
                    # T (D_al rho D_bk^+ - D_bk^+ D_al rho)
                    plus[k][l] = plus[k][l] + sps.kron(Aal, Bbk.conj()) - sps.kron(Bbk.conj().T @ Aal, eye)
            self._pair_cache[key] = ([[m.tocsr() for m in row] for row in minus],
                                     [[m.tocsr() for m in row] for row in plus])
        return self._pair_cache[key]

    def coupling(self, tensors: dict) -> sps.csr_matrix:
        """Sum over ordered pairs; ``tensors[(a, b)]`` is the 3x3 coupling of a < b."""
        L = sps.csr_matrix(self.decay.shape, dtype=complex)
        for (a, b), T in tensors.items():
            for p, q in ((a, b), (b, a)):
                minus, plus = self._pair_terms(p, q)
                for k, l in itertools.product(range(3), repeat=2):
                    if T[k, l] != 0:
                        L = L + np.conj(T[k, l]) * minus[k][l] + T[k, l] * plus[k][l]
        return L

    def total(self, tensors: dict | None):
        L = self.decay if not tensors else self.decay + self.coupling(tensors)
        return L.toarray() if self.D <= 32 else L.tocsr()


def _pair_tensors(cfg: OracleConfig, positions, velocities, t):
    if not cfg.coupled or cfg.mode is Mode.OFF:
        return {}
    out = {}
    for a, b in itertools.combinations(range(cfg.n_atoms), 2):
        r = positions[b] - positions[a]
        if velocities is not None:
            r = r + (velocities[b] - velocities[a]) * t
        dist = float(np.linalg.norm(r))
        geom = PairGeometry(dist, tuple(r / dist), cfg.k0)
        out[(a, b)] = coupling_tensor(geom, cfg.species.gamma, cfg.mode, cfg.electrostatic, cfg.convention)
    return out


def _integral_covector(L: np.ndarray, o: np.ndarray, T: float) -> np.ndarray:
    """c with c . vec(rho0) = int_0^T Tr[O exp(L t) rho0] dt."""
    n = L.shape[0]
    if sps.issparse(L):
        # backward propagation of the observable with an accumulator block
        zero = sps.csr_matrix((n, n), dtype=complex)
        A = sps.bmat([[L.T, zero], [sps.identity(n, dtype=complex), zero]], format="csr")
        y = expm_multiply(A * T, np.concatenate([o, np.zeros(n, dtype=complex)]))
        return y[n:]
    A = np.zeros((2 * n, 2 * n), dtype=complex)
    A[:n, :n] = L
    A[n:, :n] = np.eye(n)
    E = sla.expm(A * T)
    return o @ E[n:, :n]


def _laser_phases(cfg: OracleConfig, conf: Configuration, t: float) -> np.ndarray:
    if conf.laser_phases is not None:
        base = np.asarray(conf.laser_phases, dtype=float)
        if conf.velocities is None:
            return base
        return base + np.asarray(conf.velocities) @ np.asarray(cfg.k_laser) * t
    pos = np.asarray(conf.positions, dtype=float)
    if conf.velocities is not None:
        pos = pos + np.asarray(conf.velocities) * t
    return pos @ np.asarray(cfg.k_laser)


def _pulse_stack(cfg: OracleConfig, phases: np.ndarray):
    """Pulse unitaries for a stack of per-manifold phase vectors (..., n_excited)."""
    pu = pulse_unitary(cfg.species, cfg.area, cfg.polarization)
    blocks = cfg.species.block_of()
    g = np.ones(phases.shape[:-1] + (cfg.species.dim,), dtype=complex)
    for j in range(cfg.species.n_excited):
        g[..., blocks == j + 1] = np.exp(-1j * phases[..., j])[..., None]
    return g[..., :, None] * pu.U0 * g.conj()[..., None, :]


def _cycle_states(cfg: OracleConfig, conf: Configuration, tau: float, decay_single):
    """Per-atom density matrices after both pulses, for every cycle: (N, M, d, d)."""
    sp = cfg.species
    d = sp.dim
    M = cfg.m_cyc
    h1, h2 = cfg.harmonics
    m = np.arange(M)
    om = np.asarray(sp.omegas)
    th1 = _laser_phases(cfg, conf, 0.0)
    th2 = _laser_phases(cfg, conf, tau)
    rho_g = sp.projector(0) / sp.ground.dim
    Ptau = sla.expm(decay_single * tau) if tau > 0 else None
    out = []
    for a in range(cfg.n_atoms):
        rho = np.broadcast_to(rho_g, (M, d, d)).astype(complex)
        if a in cfg.driven:
            ph1 = (2 * np.pi * h1 * m / M + th1[a])[:, None] * np.ones(sp.n_excited)
            U1 = _pulse_stack(cfg, ph1)
            rho = U1 @ rho @ U1.conj().transpose(0, 2, 1)
        if Ptau is not None:
            rho = (rho.reshape(M, -1) @ Ptau.T).reshape(M, d, d)
        if a in cfg.driven:
            ph2 = (2 * np.pi * h2 * m / M + th2[a])[:, None] + om[None, :] * tau
            U2 = _pulse_stack(cfg, ph2)
            rho = U2 @ rho @ U2.conj().transpose(0, 2, 1)
        out.append(rho)
    return out


def _product_vec(states, M):
    """Row-major vec of the N-atom product state, for every cycle: (M, D^2)."""
    n = len(states)
    d = states[0].shape[-1]
    full = states[0]
    for s in states[1:]:
        full = np.einsum("mij,mkl->mikjl", full, s).reshape(M, full.shape[1] * d, full.shape[2] * d)
    return full.reshape(M, -1)


@dataclass
class _Cache:
    liouv: OracleLiouvillian
    o: np.ndarray
    decay_single: np.ndarray
    c_free: np.ndarray | None = None  # uncoupled covector, geometry independent

    def free_covector(self, t_cyc: float) -> np.ndarray:
        if self.c_free is None:
            self.c_free = _integral_covector(self.liouv.total({}), self.o, t_cyc)
        return self.c_free


def _make_cache(cfg: OracleConfig, K) -> _Cache:
    from .liouvillians import single_atom_decay

    liouv = OracleLiouvillian(cfg.species, cfg.n_atoms)
    O = detection_operator(cfg.species, cfg.n_atoms, K)
    return _Cache(liouv, O.T.reshape(-1), single_atom_decay(cfg.species))


def simulate_cycles(cfg: OracleConfig, conf: Configuration, K, cache: _Cache | None = None,
                    phase_offsets=None, part: str = "total") -> np.ndarray:
    """Per-cycle detected intensities, shape (len(taus), m_cyc).

    ``phase_offsets`` (shape (P, N)) evaluates several laser-phase shifts
    of the same geometry at once and adds a leading axis of length P.
    ``part="interaction"`` returns only the coupling-induced change of the
    intensity, evaluated with the difference of the coupled and uncoupled
    detection covectors. This keeps the float64 rounding of the much larger
    independent-atom signal (about 1e-15 of the kappa=1 amplitude) out of
    the weak multi-quantum channels.
    """
    if part not in ("total", "interaction"):
        raise ValueError("part must be 'total' or 'interaction'")
    cache = cache or _make_cache(cfg, K)
    M = cfg.m_cyc
    pos = np.asarray(conf.positions, dtype=float)
    if pos.shape != (cfg.n_atoms, 3):
        raise ValueError("positions must have shape (n_atoms, 3)")
    vel = None if conf.velocities is None else np.asarray(conf.velocities, dtype=float)
    moving = vel is not None and np.any(vel != 0)
    if cfg.couple_between_pulses:
        raise NotImplementedError("coupling between the pulses is not modelled")
    offsets = np.zeros((1, cfg.n_atoms)) if phase_offsets is None else np.atleast_2d(phase_offsets)
    base = _laser_phases(cfg, replace(conf, velocities=None), 0.0)
    if not moving:
        L = cache.liouv.total(_pair_tensors(cfg, pos, None, 0.0))
        c = _integral_covector(L, cache.o, cfg.t_cyc)
        if part == "interaction":
            c = c - cache.free_covector(cfg.t_cyc)
    elif part == "interaction":
        raise NotImplementedError("the interaction split needs static atoms")
    out = np.empty((len(offsets), len(cfg.taus), M))
    for p, off in enumerate(offsets):
        cp = replace(conf, laser_phases=base + off)
        for i, tau in enumerate(cfg.taus):
            states = _cycle_states(cfg, cp, tau, cache.decay_single)
            vecs = _product_vec(states, M)
            if cfg.check_invariants:
                for v in vecs[:: max(1, M // 4)]:
                    rep = check_density_matrix(v.reshape(cache.liouv.D, cache.liouv.D))
                    if not rep["ok"]:
                        raise RuntimeError(f"invalid density matrix after the pulses: {rep}")
            if not moving:
                vals = vecs @ c
                if cfg.check_invariants:
                    _check_trajectory(L, vecs[0], cfg.t_cyc, cache.liouv.D)
            else:
                vals = np.array([_integrate_moving(cfg, cache, pos, vel, tau, v) for v in vecs])
            out[p, i] = vals.real
    return out if phase_offsets is not None else out[0]


def _check_trajectory(L, v0, T, D, n_checks=4):
    for t in np.linspace(0, T, n_checks + 1)[1:]:
        rho = (expm_multiply(sps.csr_matrix(L) * t, v0)).reshape(D, D)
        rep = check_density_matrix(rho)
        if not rep["ok"]:
            raise RuntimeError(f"invalid density matrix at t = {t:.3g}: {rep}")


def _integrate_moving(cfg, cache, pos, vel, tau, v0):
    """Adaptive integration with time-dependent coupling; returns int Tr[O rho]."""
    n = v0.size
    t_start = tau

    def rhs(t, y):
        rho = y[:n] + 1j * y[n:2 * n]
        L = cache.liouv.total(_pair_tensors(cfg, pos, vel, t_start + t))
        dr = L @ rho
        return np.concatenate([dr.real, dr.imag, [float(np.real(cache.o @ rho))]])

    y0 = np.concatenate([v0.real, v0.imag, [0.0]])
    sol = solve_ivp(rhs, (0.0, cfg.t_cyc), y0, method="DOP853", rtol=cfg.rtol, atol=cfg.atol)
    if not sol.success:
        raise RuntimeError(f"integrator failed: {sol.message} after {sol.nfev} evaluations")
    rho_end = (sol.y[:n, -1] + 1j * sol.y[n:2 * n, -1]).reshape(cache.liouv.D, cache.liouv.D)
    if cfg.check_invariants:
        rep = check_density_matrix(rho_end, tol=max(1e-8, 10 * cfg.rtol))
        if not rep["ok"]:
            raise RuntimeError(f"invalid density matrix at the end of the cycle: {rep}")
    return sol.y[-1, -1]


def lockin_demodulate(series: np.ndarray, harmonic: int) -> np.ndarray:
    """Project a cycle series (last axis) onto exp(-2 pi i harmonic m / M)."""
    series = np.asarray(series)
    M = series.shape[-1]
    if not 0 <= abs(harmonic) < M / 2:
        raise ValueError("demodulation harmonic beyond the cycle-grid Nyquist limit")
    m = np.arange(M)
    return series @ np.exp(-2j * np.pi * harmonic * m / M) / M


def spectrum_over_tau(taus: np.ndarray, interferogram: np.ndarray, omegas: np.ndarray) -> np.ndarray:
    """Discrete Fourier transform of a demodulated interferogram over the delay."""
    taus = np.asarray(taus, dtype=float)
    w = np.gradient(taus) if taus.size > 1 else np.ones(1)
    return np.exp(-1j * np.outer(omegas, taus)) @ (w * interferogram)


@dataclass(frozen=True)
class DisorderSample:
    """Orientations (n, 3) and laser-phase offsets per configuration."""

    axes: np.ndarray
    phases: np.ndarray
    block: np.ndarray


def _random_unit_vectors(u):
    z = 2 * u[:, 0] - 1
    phi = 2 * np.pi * u[:, 1]
    s = np.sqrt(1 - z ** 2)
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)


def sample_configurations(n_atoms: int, trials: int, sampler: str, rng: np.random.Generator,
                          phase_grid: int = 5, design: tuple[int, int] = (4, 8)) -> DisorderSample:
    """Random pair axes and laser phases for a two-atom disorder average.

    ``iid``: independent uniform axes and phases. ``sobol``: scrambled
    Sobol points in (axis, phases). ``design``: each block is a randomly
    rotated product rule on the sphere combined with a randomly shifted
    uniform phase grid, an unbiased estimator that integrates low-order
    angular and phase harmonics exactly.
    """
    if trials < 2:
        raise ValueError("need at least two trials")
    dim = 2 + n_atoms
    if sampler == "iid":
        u = rng.random((trials, dim))
        return DisorderSample(_random_unit_vectors(u[:, :2]), 2 * np.pi * u[:, 2:], np.arange(trials))
    if sampler == "sobol":
        eng = qmc.Sobol(dim, scramble=True, seed=rng)
        m = int(np.ceil(np.log2(trials)))
        u = eng.random_base2(m)[:trials]
        return DisorderSample(_random_unit_vectors(u[:, :2]), 2 * np.pi * u[:, 2:], np.arange(trials))
    if sampler == "design":
        quad = _product_rule_nodes(*design)
        grid = np.array(list(itertools.product(range(phase_grid), repeat=n_atoms))) * 2 * np.pi / phase_grid
        per_block = len(quad) * len(grid)
        n_blocks = max(2, int(np.ceil(trials / per_block)))
        axes, phases, block = [], [], []
        for bidx in range(n_blocks):
            R = Rotation.random(random_state=rng)
            shift = rng.random(n_atoms) * 2 * np.pi
            for n in R.apply(quad):
                for g in grid:
                    axes.append(n)
                    phases.append(g + shift)
                    block.append(bidx)
        return DisorderSample(np.array(axes), np.array(phases), np.array(block))
    raise ValueError(f"unknown sampler {sampler!r}")


def _product_rule_nodes(n_theta, n_phi):
    """Gauss-Legendre in cos(theta) times uniform phi; theta index outermost."""
    x, _ = np.polynomial.legendre.leggauss(n_theta)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    st = np.sqrt(1 - x ** 2)
    return np.stack(np.broadcast_arrays(st[:, None] * np.cos(phi), st[:, None] * np.sin(phi),
                                        x[:, None] * np.ones(n_phi)), axis=-1).reshape(-1, 3)


@dataclass
class MonteCarloResult:
    mean: np.ndarray            # demodulated signal per tau
    stderr: np.ndarray
    per_trial: np.ndarray       # (trials, taus)
    robust_per_axis: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


def monte_carlo_disorder(cfg: OracleConfig, K, u: float, kappa: int, trials: int,
                         sampler: str = "iid", seed: int = 0, phase_grid: int = 5,
                         design: tuple[int, int] = (4, 8), robust_split: bool = False,
                         part: str = "total") -> MonteCarloResult:
    """Average the kappa-demodulated signal over sampled pair geometries.

    Atom 0 sits at the origin and atom 1 at distance u / k0 along a random
    axis; laser phases are drawn from the sampler. Standard errors are
    over trials (``iid``, ``sobol``) or over blocks (``design``).
    With ``robust_split`` every axis is also evaluated on an exact laser
    phase grid, giving per-trial phase-averaged (robust) values.
    ``part`` is passed to :func:`simulate_cycles`.
    """
    if cfg.n_atoms != 2:
        raise ValueError("the disorder sampler places exactly two atoms")
    rng = np.random.default_rng(seed)
    smp = sample_configurations(cfg.n_atoms, trials, sampler, rng, phase_grid, design)
    if sampler == "design":
        quad_w = _design_weights(design, phase_grid, cfg.n_atoms)
    cache = _make_cache(cfg, K)
    harmonic = kappa * (cfg.harmonics[1] - cfg.harmonics[0])
    r = u / cfg.k0
    vals = np.empty((len(smp.axes), len(cfg.taus)), dtype=complex)
    robust = np.empty_like(vals) if robust_split else None
    grid = np.array(list(itertools.product(range(phase_grid), repeat=cfg.n_atoms))) * 2 * np.pi / phase_grid
    # group configurations sharing an axis so the propagator is built once
    keys = {}
    for i, n in enumerate(smp.axes):
        keys.setdefault(tuple(np.round(n, 15)), []).append(i)
    for key, idx in keys.items():
        n = np.array(key)
        conf = Configuration(np.array([[0.0, 0.0, 0.0], r * n]), None, np.zeros(cfg.n_atoms))
        offs = np.array([smp.phases[i] for i in idx])
        if robust_split:
            offs = np.vstack([offs, grid])
        series = simulate_cycles(cfg, conf, K, cache, phase_offsets=offs, part=part)
        dem = lockin_demodulate(series, harmonic)
        vals[idx] = dem[: len(idx)]
        if robust_split:
            robust[idx] = dem[len(idx):].mean(axis=0)
    if sampler == "design":
        w = quad_w
        nb = smp.block.max() + 1
        per_block = vals.reshape(nb, -1, vals.shape[1])
        bmeans = np.einsum("j,bjt->bt", w, per_block)
        mean = bmeans.mean(axis=0)
        se = bmeans.std(axis=0, ddof=1) / np.sqrt(nb)
    else:
        mean = vals.mean(axis=0)
        se = vals.std(axis=0, ddof=1) / np.sqrt(len(vals))
    if np.all(se == 0):
        log.warning("zero variance across samples: the sampler may be degenerate")
    return MonteCarloResult(mean, se, vals, robust,
                            {"sampler": sampler, "trials": len(vals), "seed": seed, "u": u,
                             "kappa": kappa, "harmonic": harmonic, "part": part})


def _design_weights(design, phase_grid, n_atoms):
    n_theta, n_phi = design
    x, w = np.polynomial.legendre.leggauss(n_theta)
    wq = np.repeat(w / 2, n_phi) / n_phi
    n_grid = phase_grid ** n_atoms
    return np.repeat(wq, n_grid) / n_grid
