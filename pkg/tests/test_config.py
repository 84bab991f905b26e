import json
from importlib.resources import files

import jsonschema
import pytest

from dipolar_mqc.config import (
    DEFAULTS,
    PRESETS,
    ConfigError,
    load_config,
    load_preset,
    load_schema,
    resolve,
)
from dipolar_mqc.estimators import doppler_rms


def _write(tmp_path, data, name="run.json"):
    p = tmp_path / name
    p.write_text(data if isinstance(data, str) else json.dumps(data))
    return p


@pytest.mark.parametrize("name", PRESETS)
def test_presets_resolve(name):
    rc = load_config(preset=name)
    assert rc.document["description"]
    assert rc.seed == 0
    assert rc.prefix.endswith("_")


def test_defaults_resolve_to_si():
    rc = resolve(DEFAULTS)
    assert rc.k0 == pytest.approx(8.18e4)
    assert rc.r_bar == pytest.approx(7.5e-3)
    assert rc.u == pytest.approx(613.5)
    assert rc.temperature == pytest.approx(295.15)
    assert rc.polarizations == [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0)]
    assert rc.estimate["laser_intensity"] == pytest.approx(3.5e10)
    assert rc.tensor_convention == "lindblad"


def test_schema_files_are_valid():
    for name in ("run_config", "species"):
        jsonschema.Draft202012Validator.check_schema(load_schema(name))


def test_unknown_key_reports_path(tmp_path):
    p = _write(tmp_path, {"interaction": {"n_atom": 3}})
    with pytest.raises(ConfigError) as err:
        load_config(p)
    msg = str(err.value)
    assert "field interaction" in msg and "n_atom" in msg and str(p) in msg


def test_bad_enum_reports_path(tmp_path):
    p = _write(tmp_path, {"interaction": {"tensor_convention": "hermitian"}})
    with pytest.raises(ConfigError, match="interaction/tensor_convention"):
        load_config(p)


def test_decode_error_has_position(tmp_path):
    p = _write(tmp_path, '{\n  "seed": 3,\n  "species": K39\n}')
    with pytest.raises(ConfigError, match="line 3 column"):
        load_config(p)


def test_top_level_must_be_object(tmp_path):
    with pytest.raises(ConfigError, match="object"):
        load_config(_write(tmp_path, "[1, 2]"))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.json")


def test_unknown_preset():
    with pytest.raises(ConfigError, match="unknown preset"):
        load_preset("fig9")


def test_merge_order(tmp_path):
    # defaults < preset < file < overrides
    p = _write(tmp_path, {"seed": 5, "pulses": {"area": 0.2}, "output": {"prefix": "mine_"}})
    rc = load_config(p, "fig2")
    assert rc.area == 0.2
    assert rc.order_max == 4 and rc.normalize is True
    assert rc.prefix == "mine_"
    assert rc.seed == 5
    assert load_config(p, "fig2", {"seed": 11}).seed == 11
    # untouched leaves of a nested section survive
    assert rc.polarization_labels == ["x", "y"]


def test_tensor_convention_key(tmp_path):
    rc = load_config(_write(tmp_path, {"interaction": {"tensor_convention": "as_printed"}}))
    assert rc.tensor_convention == "as_printed"


def test_driven_atoms_bounds(tmp_path):
    p = _write(tmp_path, {"interaction": {"n_atoms": 2, "driven_atoms": [0, 2]}})
    with pytest.raises(ConfigError, match="driven_atoms"):
        load_config(p)


def test_bad_quantity_names_field(tmp_path):
    p = _write(tmp_path, {"spectrum": {"r_bar": "7.5 kg"}})
    with pytest.raises(ConfigError, match="spectrum/r_bar"):
        load_config(p)


def test_estimate_target_must_be_component(tmp_path):
    p = _write(tmp_path, {"estimate": {"target": "Na"}})
    with pytest.raises(ConfigError, match="estimate/target"):
        load_config(p)


def test_delta_bar_choices(tmp_path):
    rms = load_config()
    fwhm = load_config(_write(tmp_path, {"spectrum": {"delta_bar": "fwhm"}}))
    w = doppler_rms(rms.temperature, rms.species.mass, rms.species.k0)
    assert rms.delta_bar == pytest.approx(w.rms)
    assert fwhm.delta_bar == pytest.approx(w.fwhm)
    explicit = load_config(_write(tmp_path, {"spectrum": {"delta_bar": "1e9 rad/s"}}, "b.json"))
    assert explicit.delta_bar == pytest.approx(1e9)


def test_polarization_vectors_normalized(tmp_path):
    rc = load_config(_write(tmp_path, {"pulses": {"polarizations": [[1, 1, 0], "z"]}}))
    assert rc.polarizations[0] == pytest.approx((2 ** -0.5, 2 ** -0.5, 0.0))
    assert rc.polarization_labels[1] == "z"


def test_inline_species(tmp_path):
    sp = json.loads(files("dipolar_mqc").joinpath("presets", "species_K39.json").read_text())
    sp["name"] = "K39-copy"
    rc = load_config(_write(tmp_path, {"species": sp}))
    assert rc.species.name == "K39-copy"
    assert rc.species.k0 == pytest.approx(load_config().species.k0)


def test_inline_species_invalid(tmp_path):
    with pytest.raises(ConfigError, match="field species"):
        load_config(_write(tmp_path, {"species": {"name": "X"}}))
