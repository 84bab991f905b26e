"""Canned engine-versus-oracle comparisons used by ``validate`` and the tests."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .atoms import Species
from .engine import EngineConfig, run_engine
from .liouvillians import detection_tensor
from .lockin import (
    Configuration,
    OracleConfig,
    lockin_demodulate,
    monte_carlo_disorder,
    simulate_cycles,
)

log = logging.getLogger(__name__)

__all__ = [
    "Check",
    "engine_amplitude",
    "oracle_vs_engine",
    "coupling_off",
    "single_atom",
    "disorder_scaling",
    "run_suite",
]


@dataclass
class Check:
    name: str
    passed: bool
    values: dict = field(default_factory=dict)

    def line(self) -> str:
        nums = ", ".join(f"{k}={_fmt(v)}" for k, v in self.values.items())
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {nums}"


def _fmt(v):
    if isinstance(v, complex):
        return f"{v.real:.6g}{v.imag:+.6g}j"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _detector():
    return detection_tensor((1.0, 0.0, 0.0), 0.38).K


def engine_amplitude(species: Species, n_atoms: int, u: float, kappa: int, order: int,
                     mode="near", electrostatic=True, area=0.3, convention="lindblad") -> complex:
    """Sum of classified amplitudes of one kappa and scattering order at tau = 0."""
    cfg = EngineConfig(species, n_atoms=n_atoms, area=area, mode=mode, electrostatic=electrostatic,
                       u=u, order_max=max(order, 0), driven_atoms=tuple(range(min(n_atoms, 2))),
                       convention=convention)
    return complex(sum(t.amplitude for t in run_engine(cfg) if t.kappa == kappa and t.order == order))


def oracle_vs_engine(species: Species, u: float, trials: int, seed: int = 0,
                     sampler: str = "design", m_cyc: int = 64, rtol: float = 1e-9,
                     n_sigma: float = 3.0, rel_tol: float = 1e-3, convention: str = "lindblad") -> Check:
    """kappa=2 order-[2] engine amplitude against the disorder-averaged oracle."""
    eng = engine_amplitude(species, 2, u, 2, 2, convention=convention)
    cfg = OracleConfig(species, 2, mode="near", electrostatic=True, m_cyc=m_cyc, rtol=rtol,
                       convention=convention)
    # the independent-atom part has no kappa=2 content (see coupling_off)
    mc = monte_carlo_disorder(cfg, _detector(), u, 2, trials, sampler=sampler, seed=seed, part="interaction")
    diff = abs(mc.mean[0] - eng)
    se = float(mc.stderr[0])
    rel = diff / abs(eng)
    ok = rel <= rel_tol and diff <= n_sigma * se
    return Check("oracle vs engine (kappa=2, order 2)", bool(ok), {
        "u": u, "trials": mc.meta["trials"], "engine": eng, "oracle": complex(mc.mean[0]),
        "stderr": se, "rel_diff": rel, "n_sigma": diff / se if se > 0 else math.inf})


def coupling_off(species: Species, u: float, seed: int = 0, n_conf: int = 4, bound: float = 1e-8) -> Check:
    """Without coupling the kappa=2 channel must vanish against kappa=1."""
    rng = np.random.default_rng(seed)
    cfg = OracleConfig(species, 2, coupled=False)
    K = _detector()
    h = cfg.harmonics[1] - cfg.harmonics[0]
    worst = 0.0
    for _ in range(n_conf):
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        conf = Configuration(np.array([[0.0, 0.0, 0.0], u / cfg.k0 * n]), None, rng.random(2) * 2 * np.pi)
        series = simulate_cycles(cfg, conf, K)
        k1 = abs(lockin_demodulate(series, h)[0])
        k2 = abs(lockin_demodulate(series, 2 * h)[0])
        worst = max(worst, k2 / k1)
    return Check("coupling off silences kappa=2", worst < bound, {"max_ratio": worst, "bound": bound})


def single_atom(species: Species, rel_tol: float = 1e-8) -> Check:
    """One atom: the oracle kappa=1 channel equals the engine's order-[0] term."""
    eng = engine_amplitude(species, 1, 1e3, 1, 0, mode="off", electrostatic=False)
    cfg = OracleConfig(species, 1, driven=(0,), coupled=False)
    conf = Configuration(np.zeros((1, 3)), None, np.zeros(1))
    series = simulate_cycles(cfg, conf, _detector())
    orc = complex(lockin_demodulate(series, cfg.harmonics[1] - cfg.harmonics[0])[0])
    rel = abs(orc - eng) / abs(eng)
    return Check("single atom kappa=1", rel < rel_tol, {"engine": eng, "oracle": orc, "rel_diff": rel})


def _slope(n, y):
    return float(np.polyfit(np.log(n), np.log(y), 1)[0])


def disorder_scaling(species: Species, u: float, trials: int, sizes=(4, 16, 64), repeats: int = 2000,
                     seed: int = 0, tol: float = 0.1, convention: str = "lindblad") -> Check:
    """How position-phase terms and robust terms average down with the trial count.

    Every iid configuration is split into its laser-phase average (robust
    part) and the remainder. For each subset size the rms of subset means
    over many random subsets is fitted against the size on a log-log
    scale: the remainder must fall like n^(-1/2), the robust part must not.
    """
    cfg = OracleConfig(species, 2, mode="near", electrostatic=True, convention=convention)
    mc = monte_carlo_disorder(cfg, _detector(), u, 2, trials, sampler="iid", seed=seed, robust_split=True,
                              part="interaction")
    total = mc.per_trial[:, 0]
    robust = mc.robust_per_axis[:, 0]
    rest = total - robust
    rng = np.random.default_rng(seed + 1)
    sizes = [s for s in sizes if s < trials]
    rms_rest, rms_rob = [], []
    for s in sizes:
        idx = np.array([rng.choice(trials, s, replace=False) for _ in range(repeats)])
        rms_rest.append(np.sqrt(np.mean(np.abs(rest[idx].mean(axis=1)) ** 2)))
        rms_rob.append(np.sqrt(np.mean(np.abs(robust[idx].mean(axis=1)) ** 2)))
    s_rest = _slope(sizes, rms_rest)
    s_rob = _slope(sizes, rms_rob)
    ok = abs(s_rest + 0.5) <= tol and abs(s_rob) <= tol
    return Check("disorder filter scaling", bool(ok), {
        "trials": trials, "slope_phase_terms": s_rest, "slope_robust": s_rob,
        "robust_mean": complex(robust.mean()), "phase_terms_rms_at_1": float(np.sqrt(np.mean(np.abs(rest) ** 2)))})


def run_suite(oracle: dict, seed: int = 0, scaling: bool = True, convention: str = "lindblad") -> list[Check]:
    """Checks driven by the ``oracle`` section of a run configuration."""
    sp = oracle["species"]
    out = [
        single_atom(sp),
        coupling_off(sp, oracle["u"], seed=seed),
        oracle_vs_engine(sp, oracle["u"], oracle["trials"], seed=seed, sampler=oracle["sampler"],
                         m_cyc=oracle["m_cyc"], rtol=oracle["rtol"], convention=convention),
    ]
    if scaling:
        n = oracle["scaling_trials"]
        out.append(disorder_scaling(sp, oracle["u"], n, sizes=(n // 256 or 1, n // 64, n // 16), seed=seed,
                                   convention=convention))
    for c in out:
        log.info(c.line())
    return out
