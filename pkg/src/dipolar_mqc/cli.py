"""Command line entry point.

    dipolar-mqc spectrum --preset fig2 --out runs/fig2
    dipolar-mqc anisotropy --preset fig3 --format json
    dipolar-mqc estimate --preset tableII
    dipolar-mqc emission-pattern --preset fig4 --format svg
    dipolar-mqc validate --preset validate-small
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .atoms import emission_pattern, linear_excitation_populations
from .config import ConfigError, PRESETS, RunConfig, interaction_modes, load_config
from .engine import DetectionEngine, EngineConfig, run_engine
from .estimators import (
    VaporComponent,
    VaporComposition,
    collision_rate,
    doppler_rms,
    mean_distance,
    pulse_area,
    velocity_class_density,
)
from .liouvillians import detection_tensor
from .spectra import (
    PEAKS_BY_KAPPA,
    SpectrumConfig,
    anisotropy,
    default_grid,
    dumps,
    rescale_and_assemble,
    summary_dict,
    write_csv,
)

log = logging.getLogger("dipolar_mqc")

__all__ = ["main", "build_parser", "compute_spectra", "cmd_spectrum", "cmd_anisotropy",
           "cmd_estimate", "cmd_emission_pattern", "cmd_validate"]


# ---------------------------------------------------------------- output


def _provenance(rc: RunConfig, command: str) -> dict:
    return {"package": "dipolar_mqc", "version": __version__, "command": command, "config": rc.document}


def _header(rc: RunConfig, command: str) -> list[str]:
    return [f"dipolar_mqc {__version__} {command}",
            "config " + json.dumps(rc.document, sort_keys=True, separators=(",", ":"))]


def _write_json(path: Path, rc: RunConfig, command: str, payload: dict):
    doc = {"provenance": _provenance(rc, command), **payload}
    path.write_text(dumps(doc) + "\n")
    return path


def _write_rows(path: Path, rc: RunConfig, command: str, header: list[str], rows):
    with open(path, "w", newline="") as fh:
        for line in _header(rc, command):
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    return path


def _svg(path: Path, rc: RunConfig, command: str, draw):
    """Render with matplotlib into a deterministic SVG (fixed hash salt, no date)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "dipolar_mqc", "svg.fonttype": "none"}):
        fig = plt.figure(figsize=(7, 4.5))
        draw(fig)
        fig.savefig(path, format="svg",
                    metadata={"Date": None, "Creator": None,
                              "Description": json.dumps(_provenance(rc, command), sort_keys=True)})
        plt.close(fig)
    return path


def _out(rc: RunConfig, out: Path, name: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    return out / f"{rc.prefix}{name}"


# ---------------------------------------------------------------- spectra


def _detector(rc: RunConfig):
    return detection_tensor(rc.detector_direction, rc.solid_angle, point=rc.point_detector).K


def compute_spectra(rc: RunConfig, mode_label: str, engines: dict | None = None) -> dict:
    """{polarization label: {kappa: Spectrum}} for one interaction mode."""
    mode, electrostatic = interaction_modes(mode_label)
    K = _detector(rc)
    engines = {} if engines is None else engines
    key = (rc.species.name, rc.n_atoms, K.tobytes(), rc.tensor_convention)
    if key not in engines:
        engines[key] = DetectionEngine(rc.species, rc.n_atoms, K, convention=rc.tensor_convention)
    terms = {}
    for label, pol in zip(rc.polarization_labels, rc.polarizations):
        cfg = EngineConfig(rc.species, n_atoms=rc.n_atoms, area=rc.area, polarization=pol, K=K,
                           mode=mode, electrostatic=electrostatic, u=rc.u,
                           order_max=0 if mode == "off" else rc.order_max,
                           driven_atoms=rc.driven_atoms, include_recurrent=rc.include_recurrent,
                           quadrature=rc.quadrature, convention=rc.tensor_convention)
        log.info("engine run: mode=%s polarization=%s", mode_label, label)
        terms[label] = run_engine(cfg, engines[key])

    def spec_cfg(kappa, norm=None):
        return SpectrumConfig(kappa=kappa, N_det=rc.N_det, r_bar=rc.r_bar, k0=rc.k0, delta_bar=rc.delta_bar,
                              grid=default_grid(rc.species.omegas, kappa, rc.delta_bar, rc.n_grid),
                              four_pulse_equivalence=rc.four_pulse_equivalence, prefactor=rc.prefactor,
                              distance_convention=rc.distance_convention, normalize_to=norm,
                              detector="x" if rc.detector_direction == (1.0, 0.0, 0.0) else "custom",
                              mode=mode_label)

    norm = None
    if rc.normalize:
        # reference: last polarization, kappa=1, at the strongest line
        ref_label = rc.polarization_labels[-1]
        ref = rescale_and_assemble(terms[ref_label], spec_cfg(1))
        name = PEAKS_BY_KAPPA[1][-1] if rc.species.n_excited > 1 else PEAKS_BY_KAPPA[1][0]
        norm = ref.peaks[name]["value_at_center"]
    return {label: {k: rescale_and_assemble(terms[label], spec_cfg(k, norm)) for k in rc.kappas}
            for label in rc.polarization_labels}


def _ratios(spectra: dict, labels: list[str], kappa: int) -> dict:
    if len(labels) != 2:
        return {}
    a, b = (spectra[lab][kappa] for lab in labels)
    return {p: anisotropy(p, a, b) for p in PEAKS_BY_KAPPA[kappa] if p in a.peaks and p in b.peaks}


def cmd_spectrum(rc: RunConfig, out: Path, formats) -> list[Path]:
    spectra = compute_spectra(rc, rc.mode)
    files = []
    tables = {}
    for label, by_k in spectra.items():
        for k, sp in by_k.items():
            if "csv" in formats:
                files.append(_out(rc, out, f"spectrum_{rc.mode}_{label}_k{k}.csv"))
                write_csv(sp, files[-1], _header(rc, "spectrum"))
            tables.setdefault(label, {})[f"kappa{k}"] = summary_dict(sp, _ratios(spectra, rc.polarization_labels, k)
                                                                    if label == rc.polarization_labels[-1] else None)
    if "json" in formats:
        files.append(_write_json(_out(rc, out, f"peaks_{rc.mode}.json"), rc, "spectrum", {"spectra": tables}))
    if "svg" in formats:
        for k in rc.kappas:
            def draw(fig, k=k):
                ax = fig.add_subplot()
                for label in rc.polarization_labels:
                    sp = spectra[label][k]
                    ax.plot(sp.omega / (2 * math.pi * 1e12), np.abs(sp.values), label=label, lw=1)
                ax.set_xlabel("frequency (THz)")
                ax.set_ylabel(f"|{k}QC spectrum| (arb.)")
                ax.legend()
            files.append(_svg(_out(rc, out, f"spectrum_{rc.mode}_k{k}.svg"), rc, "spectrum", draw))
    for label in rc.polarization_labels:
        for k in rc.kappas:
            for p, info in spectra[label][k].peaks.items():
                print(f"{rc.mode:>20s} {label:>4s} {p:>5s} center/2pi={info['center'] / (2 * math.pi):.6e} Hz "
                      f"A={info['amplitude']:.6e}")
    return files


def cmd_anisotropy(rc: RunConfig, out: Path, formats) -> list[Path]:
    if len(rc.polarizations) != 2:
        raise ConfigError("field pulses/polarizations: anisotropy needs exactly two (parallel, perpendicular)")
    engines: dict = {}
    rows = []
    for mode_label in rc.modes:
        spectra = compute_spectra(rc, mode_label, engines)
        for k in rc.kappas:
            ratios = _ratios(spectra, rc.polarization_labels, k)
            a, b = (spectra[lab][k] for lab in rc.polarization_labels)
            for p in PEAKS_BY_KAPPA[k]:
                if p in ratios:
                    rows.append((mode_label, p, a.peaks[p]["amplitude"], b.peaks[p]["amplitude"], ratios[p]))
                    print(f"{mode_label:>20s} {p:>5s} A_y/A_x = {ratios[p]:.4f}")
                else:
                    print(f"{mode_label:>20s} {p:>5s} no signal")
    files = []
    header = ["mode", "peak", "A_parallel", "A_perpendicular", "ratio"]
    if "csv" in formats:
        files.append(_write_rows(_out(rc, out, "anisotropy.csv"), rc, "anisotropy", header, rows))
    if "json" in formats:
        files.append(_write_json(_out(rc, out, "anisotropy.json"), rc, "anisotropy",
                                 {"rows": [dict(zip(header, r)) for r in rows]}))
    if "svg" in formats:
        def draw(fig):
            ax = fig.add_subplot()
            peaks = [p for k in rc.kappas for p in PEAKS_BY_KAPPA[k]]
            width = 0.8 / len(rc.modes)
            for i, m in enumerate(rc.modes):
                vals = [next((r[4] for r in rows if r[0] == m and r[1] == p), 0.0) for p in peaks]
                ax.bar(np.arange(len(peaks)) + i * width, vals, width, label=m)
            ax.set_xticks(np.arange(len(peaks)) + 0.4 - width / 2, peaks)
            ax.axhline(1.0, color="k", lw=0.5)
            ax.set_ylabel("A_y / A_x")
            ax.legend()
        files.append(_svg(_out(rc, out, "anisotropy.svg"), rc, "anisotropy", draw))
    return files


# ---------------------------------------------------------------- estimators


def estimate_table(rc: RunConfig) -> dict:
    est = rc.estimate
    comp = VaporComposition(tuple(VaporComponent(c["name"], c["density"], c["radius"], c["mass"])
                                  for c in est["components"]), temperature=est["temperature"])
    rates = collision_rate(comp, est["target"])
    partners = [{"partner": n, "cross_section_m2": rates.cross_section[n],
                 "relative_velocity_m_s": rates.relative_velocity[n], "rate_hz": rates.partial[n],
                 "collision_time_s": rates.partial_times()[n]} for n in rates.partial]
    vc = []
    for f in est["displacement_fractions"]:
        n = velocity_class_density(est["density"], est["velocity_spread"], est["wavelength"], est["tau_spont"], f)
        vc.append({"displacement_fraction": f, "n_vc_m3": n, "r_bar_m": mean_distance(n)})
    dop = doppler_rms(rc.temperature, rc.species.mass, rc.species.k0)
    return {
        "collisions": {"target": rates.target, "total_rate_hz": rates.total,
                       "collision_time_s": rates.collision_time, "partners": partners},
        "pulse_area": pulse_area(est["laser_intensity"], est["pulse_duration"], est["dipole"]),
        "velocity_classes": vc,
        "doppler": {"rms_rad_s": dop.rms, "fwhm_rad_s": dop.fwhm,
                    "rms_hz": dop.rms / (2 * math.pi), "fwhm_hz": dop.fwhm / (2 * math.pi)},
    }


def cmd_estimate(rc: RunConfig, out: Path, formats) -> list[Path]:
    t = estimate_table(rc)
    c = t["collisions"]
    print(f"{'partner':>8s} {'sigma (m^2)':>12s} {'v_rel (m/s)':>12s} {'rate (Hz)':>10s} {'time (s)':>10s}")
    for p in c["partners"]:
        print(f"{p['partner']:>8s} {p['cross_section_m2']:12.4e} {p['relative_velocity_m_s']:12.2f} "
              f"{p['rate_hz']:10.4f} {p['collision_time_s']:10.4f}")
    print(f"{'total':>8s} {'':12s} {'':12s} {c['total_rate_hz']:10.4f} {c['collision_time_s']:10.4f}")
    print(f"pulse area {t['pulse_area']:.4f} rad")
    for v in t["velocity_classes"]:
        print(f"f_d={v['displacement_fraction']:g}: n_vc={v['n_vc_m3']:.4e} m^-3, r_bar={v['r_bar_m'] * 100:.3f} cm")
    d = t["doppler"]
    print(f"Doppler rms/2pi={d['rms_hz'] / 1e6:.1f} MHz, FWHM/2pi={d['fwhm_hz'] / 1e6:.1f} MHz")
    files = []
    if "csv" in formats:
        rows = [(p["partner"], p["cross_section_m2"], p["relative_velocity_m_s"], p["rate_hz"],
                 p["collision_time_s"]) for p in c["partners"]]
        rows.append(("total", "", "", c["total_rate_hz"], c["collision_time_s"]))
        files.append(_write_rows(_out(rc, out, "collisions.csv"), rc, "estimate",
                                 ["partner", "cross_section_m2", "relative_velocity_m_s", "rate_hz",
                                  "collision_time_s"], rows))
    if "json" in formats:
        files.append(_write_json(_out(rc, out, "estimate.json"), rc, "estimate", t))
    return files


# ---------------------------------------------------------------- emission


def emission_curves(rc: RunConfig) -> dict:
    em = rc.emission
    manifolds = range(1, rc.species.n_excited + 1) if em["manifold"] == "all" else [em["manifold"]]
    theta = np.linspace(0.0, math.pi, em["n_theta"])
    curves = {}
    for mf in manifolds:
        if mf > rc.species.n_excited:
            raise ConfigError(f"field emission/manifold: species has {rc.species.n_excited} excited manifolds")
        dim = rc.species.excited[mf - 1].dim
        pops = em["populations"]
        if pops == "uniform":
            p = np.full(dim, 1.0 / dim)
        elif pops == "linear":
            p = linear_excitation_populations(rc.species, mf)
        else:
            p = np.asarray(pops, dtype=float)
            if p.shape != (dim,):
                raise ConfigError(f"field emission/populations: need {dim} values for manifold {mf}")
        # quantization axis along the polarization, theta measured from it
        curves[mf] = (theta, *emission_pattern(rc.species, mf, p)(theta))
    return curves


def cmd_emission_pattern(rc: RunConfig, out: Path, formats) -> list[Path]:
    curves = emission_curves(rc)
    files = []
    for mf, (theta, ipi, isig, itot) in curves.items():
        name = rc.species.excited[mf - 1].name or f"manifold{mf}"
        spread = float(itot.max() - itot.min())
        print(f"{name}: I_total min={itot.min():.5f} max={itot.max():.5f} spread={spread:.2e}")
        safe = name.replace("/", "_")
        if "csv" in formats:
            rows = zip(np.degrees(theta).tolist(), ipi.tolist(), isig.tolist(), itot.tolist())
            files.append(_write_rows(_out(rc, out, f"emission_{safe}.csv"), rc, "emission-pattern",
                                     ["theta_deg", "I_pi", "I_sigma", "I_total"], rows))
        if "json" in formats:
            files.append(_write_json(_out(rc, out, f"emission_{safe}.json"), rc, "emission-pattern",
                                     {"theta_rad": theta.tolist(), "I_pi": ipi.tolist(),
                                      "I_sigma": isig.tolist(), "I_total": itot.tolist()}))
        if "svg" in formats:
            def draw(fig, theta=theta, ipi=ipi, isig=isig, itot=itot, name=name):
                ax = fig.add_subplot(projection="polar")
                full = np.concatenate([theta, 2 * math.pi - theta[::-1]])
                for y, lab in ((ipi, "pi"), (isig, "sigma"), (itot, "total")):
                    ax.plot(full, np.concatenate([y, y[::-1]]), label=lab)
                ax.set_title(name)
                ax.legend(loc="lower right")
            files.append(_svg(_out(rc, out, f"emission_{safe}.svg"), rc, "emission-pattern", draw))
    return files


# ---------------------------------------------------------------- validate


def cmd_validate(rc: RunConfig, out: Path, formats) -> tuple[list[Path], bool]:
    from .validation import run_suite

    checks = run_suite(rc.oracle, seed=rc.seed, convention=rc.tensor_convention)
    for c in checks:
        print(c.line())
    ok = all(c.passed for c in checks)
    print("PASS" if ok else "FAIL")
    files = []
    if "json" in formats:
        files.append(_write_json(_out(rc, out, "validate.json"), rc, "validate",
                                 {"passed": ok, "checks": [{"name": c.name, "passed": c.passed, "values": c.values}
                                                           for c in checks]}))
    return files, ok


# ---------------------------------------------------------------- main


COMMANDS = {
    "spectrum": cmd_spectrum,
    "anisotropy": cmd_anisotropy,
    "estimate": cmd_estimate,
    "emission-pattern": cmd_emission_pattern,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dipolar-mqc", description="Multiple-quantum fluorescence spectra of "
                                "dipole-coupled alkali atoms.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="JSON run configuration")
        s.add_argument("--preset", choices=PRESETS, help="shipped preset, applied before --config")
        s.add_argument("--out", type=Path, default=Path("."), help="output directory")
        s.add_argument("--format", action="append", choices=("csv", "json", "svg"),
                       help="output format; repeat for several (default from the config)")
        s.add_argument("--seed", type=int, help="master seed")
        s.add_argument("--threads", type=int, help="maximum BLAS threads")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {} if args.seed is None else {"seed": args.seed}
    try:
        rc = load_config(args.config, args.preset, overrides)
    except ConfigError as exc:
        print(f"configuration error:\n{exc}", file=sys.stderr)
        return 2
    formats = tuple(args.format) if args.format else rc.formats
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=args.threads):
        try:
            result = COMMANDS[args.command](rc, args.out, formats)
        except ConfigError as exc:
            print(f"configuration error:\n{exc}", file=sys.stderr)
            return 2
        except OSError as exc:
            print(f"output error: {exc}", file=sys.stderr)
            return 3
    ok = True
    if isinstance(result, tuple):
        result, ok = result
    for f in result:
        print(f"wrote {f}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
