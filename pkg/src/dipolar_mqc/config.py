"""Run configuration: JSON files with explicit units, schema validation,
shipped presets and resolution to SI values."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from .atoms import Species, load_species, species_preset
from .units import parse_quantity

__all__ = [
    "ConfigError",
    "DEFAULTS",
    "PRESETS",
    "RunConfig",
    "load_schema",
    "load_preset",
    "load_config",
    "resolve",
    "interaction_modes",
]

PRESETS = ("fig2", "fig3", "tableII", "fig4", "validate-small")

# Physical defaults shared by every preset; a user file overrides any leaf.
DEFAULTS = {
    "seed": 0,
    "species": "K39",
    "geometry": {"detector_direction": [1.0, 0.0, 0.0], "solid_angle": "0.38 sr", "point_detector": False},
    "pulses": {
        "area": 0.3,
        "polarizations": ["x", "y"],
        "modulation_frequencies": ["1.0 kHz", "3.7 kHz"],
    },
    "interaction": {
        "mode": "full",
        "modes": ["full", "near-electrostatic", "off"],
        "order_max": 4,
        "n_atoms": 3,
        "driven_atoms": [0, 1],
        "include_recurrent": False,
        "tensor_convention": "lindblad",
        "quadrature": [16, 32],
    },
    "spectrum": {
        "kappas": [1, 2],
        "N_det": 1e9,
        "r_bar": "7.5 mm",
        "k0": "8.18e4 1/m",
        "delta_bar": "rms",
        "temperature": "295.15 K",
        "n_grid": 2000,
        "four_pulse_equivalence": True,
        "prefactor": "as_printed",
        "distance_convention": "stripped",
        "normalize": False,
    },
    "estimate": {
        "target": "K",
        "temperature": "295.15 K",
        "components": [
            {"name": "K", "density": "5.13e14 1/m^3", "radius": "2.43e-10 m", "mass": "39.0983 u"},
            {"name": "Rb", "density": "1.05e16 1/m^3", "radius": "2.65e-10 m", "mass": "85.4678 u"},
            {"name": "Cs", "density": "3.84e16 1/m^3", "radius": "2.98e-10 m", "mass": "132.905 u"},
        ],
        "laser_intensity": "3.5 MW/cm^2",
        "pulse_duration": "190 fs",
        "dipole": "2.46e-29 C m",
        "density": "5e14 1/m^3",
        "velocity_spread": "247 m/s",
        "wavelength": "767 nm",
        "tau_spont": "26 ns",
        "displacement_fractions": [0.02, 0.01],
    },
    "emission": {"manifold": "all", "populations": "linear", "n_theta": 181},
    "oracle": {
        "species": "test_J0_J1",
        "u": 40.0,
        "trials": 10000,
        "sampler": "design",
        "m_cyc": 64,
        "rtol": 1e-9,
        "scaling_trials": 1024,
    },
    "output": {"formats": ["csv", "json"], "prefix": ""},
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def load_schema(name: str = "run_config") -> dict:
    text = resources.files("dipolar_mqc").joinpath("schema", f"{name}.schema.json").read_text()
    return json.loads(text)


def _parse_json(text: str, origin: str) -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{origin}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{origin}: top level must be an object")
    return data


def load_preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}")
    text = resources.files("dipolar_mqc").joinpath("presets", f"{name}.json").read_text()
    return _parse_json(text, f"preset {name}")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _validate(data: dict, origin: str):
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors:
            path = "/".join(str(p) for p in e.absolute_path) or "<root>"
            lines.append(f"{origin}: field {path}: {e.message}")
        raise ConfigError("\n".join(lines))


_POLS = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}


def _unit(v, name: str) -> tuple[float, float, float]:
    if isinstance(v, str):
        return _POLS[v]
    n = math.sqrt(sum(c * c for c in v))
    if n == 0:
        raise ConfigError(f"field {name}: zero vector")
    return tuple(float(c) / n for c in v)


def interaction_modes(label: str) -> tuple[str, bool]:
    """Config mode label -> (kernel mode, electrostatic flag)."""
    return {
        "full": ("full", False),
        "near": ("near", False),
        "near-electrostatic": ("near", True),
        "off": ("off", False),
    }[label]


def _species(v, where: str) -> Species:
    try:
        if isinstance(v, str):
            return species_preset(v)
        jsonschema.validate(v, load_schema("species"))
        return load_species(v)
    except (ValueError, KeyError, jsonschema.ValidationError) as exc:
        msg = exc.message if isinstance(exc, jsonschema.ValidationError) else str(exc)
        raise ConfigError(f"field {where}: {msg}") from None


@dataclass
class RunConfig:
    """Fully resolved run configuration in SI units.

    ``document`` keeps the merged input (unit strings intact) and is what
    output files embed as their provenance header.
    """

    species: Species
    seed: int
    detector_direction: tuple[float, float, float]
    solid_angle: float
    point_detector: bool
    area: float
    polarizations: list[tuple[float, float, float]]
    polarization_labels: list[str]
    mode: str
    modes: list[str]
    order_max: int
    n_atoms: int
    driven_atoms: tuple[int, ...]
    include_recurrent: bool
    tensor_convention: str
    quadrature: tuple[int, int]
    kappas: tuple[int, ...]
    N_det: float
    r_bar: float
    k0: float
    delta_bar: float
    temperature: float
    n_grid: int
    four_pulse_equivalence: bool
    prefactor: str
    distance_convention: str
    normalize: bool
    estimate: dict
    emission: dict
    oracle: dict
    formats: tuple[str, ...]
    prefix: str
    document: dict = field(default_factory=dict, repr=False)

    @property
    def u(self) -> float:
        return self.k0 * self.r_bar


def resolve(doc: dict, origin: str = "config") -> RunConfig:
    """Validate a merged document and convert quantities to SI."""
    from .estimators import doppler_rms

    _validate(doc, origin)

    def q(section, key, unit):
        try:
            return parse_quantity(doc[section][key], unit)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{origin}: field {section}/{key}: {exc}") from None

    species = _species(doc["species"], "species")
    geo, pul, inter, spec = doc["geometry"], doc["pulses"], doc["interaction"], doc["spectrum"]
    temperature = q("spectrum", "temperature", "K")
    db = spec["delta_bar"]
    if db in ("rms", "fwhm"):
        w = doppler_rms(temperature, species.mass, species.k0)
        delta_bar = w.rms if db == "rms" else w.fwhm
    else:
        delta_bar = q("spectrum", "delta_bar", "rad/s")
    if delta_bar <= 0:
        raise ConfigError(f"{origin}: field spectrum/delta_bar: must be positive")
    n_atoms = inter["n_atoms"]
    driven = tuple(inter["driven_atoms"])
    if any(a >= n_atoms for a in driven):
        raise ConfigError(f"{origin}: field interaction/driven_atoms: atom index beyond n_atoms={n_atoms}")

    est = doc["estimate"]
    try:
        estimate = {
            "target": est["target"],
            "temperature": parse_quantity(est["temperature"], "K"),
            "components": [
                {"name": c["name"], "density": parse_quantity(c["density"], "1/m^3"),
                 "radius": parse_quantity(c["radius"], "m"), "mass": parse_quantity(c["mass"], "kg")}
                for c in est["components"]
            ],
            "laser_intensity": parse_quantity(est["laser_intensity"], "W/m^2"),
            "pulse_duration": parse_quantity(est["pulse_duration"], "s"),
            "dipole": parse_quantity(est["dipole"], "C m"),
            "density": parse_quantity(est["density"], "1/m^3"),
            "velocity_spread": parse_quantity(est["velocity_spread"], "m/s"),
            "wavelength": parse_quantity(est["wavelength"], "m"),
            "tau_spont": parse_quantity(est["tau_spont"], "s"),
            "displacement_fractions": list(est["displacement_fractions"]),
        }
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{origin}: field estimate: {exc}") from None
    if estimate["target"] not in {c["name"] for c in estimate["components"]}:
        raise ConfigError(f"{origin}: field estimate/target: not among the components")

    orc = dict(doc["oracle"])
    orc["species"] = _species(orc["species"], "oracle/species")

    pols = pul["polarizations"]
    labels = [p if isinstance(p, str) else "p" + "_".join(f"{c:g}" for c in p) for p in pols]
    return RunConfig(
        species=species,
        seed=doc["seed"],
        detector_direction=_unit(geo["detector_direction"], "geometry/detector_direction"),
        solid_angle=q("geometry", "solid_angle", "sr"),
        point_detector=geo["point_detector"],
        area=pul["area"],
        polarizations=[_unit(p, "pulses/polarizations") for p in pols],
        polarization_labels=labels,
        mode=inter["mode"],
        modes=list(inter["modes"]),
        order_max=inter["order_max"],
        n_atoms=n_atoms,
        driven_atoms=driven,
        include_recurrent=inter["include_recurrent"],
        tensor_convention=inter["tensor_convention"],
        quadrature=tuple(inter["quadrature"]),
        kappas=tuple(spec["kappas"]),
        N_det=float(spec["N_det"]),
        r_bar=q("spectrum", "r_bar", "m"),
        k0=q("spectrum", "k0", "1/m"),
        delta_bar=delta_bar,
        temperature=temperature,
        n_grid=spec["n_grid"],
        four_pulse_equivalence=spec["four_pulse_equivalence"],
        prefactor=spec["prefactor"],
        distance_convention=spec["distance_convention"],
        normalize=spec["normalize"],
        estimate=estimate,
        emission=dict(doc["emission"]),
        oracle=orc,
        formats=tuple(doc["output"]["formats"]),
        prefix=doc["output"]["prefix"],
        document=doc,
    )


def load_config(path=None, preset: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the preset, then the file, then ``overrides``."""
    doc = copy.deepcopy(DEFAULTS)
    origin = "defaults"
    if preset is not None:
        doc = _merge(doc, load_preset(preset))
        origin = f"preset {preset}"
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
        user = _parse_json(text, str(p))
        _validate(user, str(p))
        doc = _merge(doc, user)
        origin = str(p)
    if overrides:
        doc = _merge(doc, overrides)
    return resolve(doc, origin)
