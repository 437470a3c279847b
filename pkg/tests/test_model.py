import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eopulse import constants as K
from eopulse.errors import ConfigError
from eopulse.model import derived_quantities, load_config, validate_config
from eopulse.scenarios import field_for_intensity

from conftest import CHI2, phenomenological_config, resistance


def test_regime_clean_model_has_no_warnings():
    raw = phenomenological_config(transient_duration=0.01e-12)
    raw["circuit"]["R"] = resistance(1e-12)
    m = validate_config(raw)
    assert m.warnings == ()


def test_long_device_warns():
    raw = phenomenological_config()
    raw["geometry"]["device_length"] = 2 * K.C_LIGHT * 1e-12 / 3.5
    m = validate_config(raw)
    assert any("L << c T / n violated" in w for w in m.warnings)


@pytest.mark.parametrize("path,value,code", [
    ("circuit.R", -1.0, "NEGATIVE_PARAMETER"),
    ("geometry.cross_section", 0.0, "ZERO_GEOMETRY"),
    ("geometry.device_length", -1e-6, "NEGATIVE_PARAMETER"),
    ("pulse.plateau_duration", -1e-12, "NEGATIVE_PARAMETER"),
    ("material.fill_factor", 1.5, "OUT_OF_RANGE"),
    ("material.relative_permittivity", 0.5, "OUT_OF_RANGE"),
    ("pulse.envelope_shape", "square", "BAD_TYPE"),
    ("circuit.R", "ten", "BAD_TYPE"),
])
def test_bad_values_name_the_field(path, value, code):
    raw = phenomenological_config()
    section, key = path.split(".")
    raw[section][key] = value
    with pytest.raises(ConfigError) as exc:
        validate_config(raw)
    assert exc.value.code == code
    assert exc.value.field == path
    assert path in str(exc.value)


def test_missing_and_unknown_keys():
    raw = phenomenological_config()
    del raw["pulse"]["field_amplitude"]
    with pytest.raises(ConfigError) as exc:
        validate_config(raw)
    assert (exc.value.code, exc.value.field) == ("MISSING_FIELD", "pulse.field_amplitude")

    raw = phenomenological_config()
    raw["circuit"]["resistence"] = 1.0
    with pytest.raises(ConfigError) as exc:
        validate_config(raw)
    assert exc.value.code == "UNKNOWN_KEY"

    raw = phenomenological_config()
    del raw["material"]["chi2_dc"]
    with pytest.raises(ConfigError, match="MISSING_FIELD"):
        validate_config(raw)


def test_capacitance_hand_value(ideal):
    # C0 = eps_r eps0 L = 13 * 8.8541878128e-12 F/m * 1e-6 m
    assert ideal.derived.capacitance == pytest.approx(1.151044e-16, rel=1e-6)
    assert ideal.derived.relaxation_time == pytest.approx(1e-12, rel=1e-12)


def test_zero_field_has_zero_intensity():
    m = validate_config(phenomenological_config(field_amplitude=0.0))
    assert m.derived.plateau_intensity == 0.0


def test_intensity_of_reference_field(ideal):
    assert ideal.derived.plateau_intensity == pytest.approx(1e12, rel=1e-12)
    assert field_for_intensity(1e12) == pytest.approx(ideal.pulse.field_amplitude)


@given(st.floats(min_value=1e-15, max_value=1e-3))
def test_electro_optic_coefficient_is_four_times_rectification(x):
    raw = phenomenological_config()
    raw["material"]["chi2_dc"] = x
    d = validate_config(raw).derived
    assert d.chi2_eo == 4.0 * x


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=1.0, max_value=20.0), st.floats(min_value=1e-7, max_value=1e-5),
       st.floats(min_value=10.0, max_value=1e5))
def test_derived_quantities_are_pure(eps_r, length, R):
    raw = phenomenological_config()
    raw["material"]["relative_permittivity"] = eps_r
    raw["geometry"]["device_length"] = length
    raw["circuit"]["R"] = R
    m = validate_config(raw)
    assert derived_quantities(m) == derived_quantities(m)
    assert derived_quantities(m) == m.derived
    assert validate_config(raw).derived == m.derived


def test_battery_voltage_defaults_to_bias_times_gap(ideal):
    assert ideal.circuit.battery_voltage == ideal.geometry.cross_section * ideal.circuit.bias_field


def test_open_circuit_allowed(raw_ideal):
    raw_ideal["circuit"]["R"] = math.inf
    m = validate_config(raw_ideal)
    assert m.network.is_open and math.isinf(m.derived.relaxation_time)


def test_with_values_revalidates(ideal):
    m = ideal.with_values({"circuit.R": 2 * ideal.network.R})
    assert m.derived.relaxation_time == pytest.approx(2e-12)
    with pytest.raises(ConfigError):
        ideal.with_values({"circuit.R": -3.0})


def test_model_is_immutable(ideal):
    with pytest.raises(Exception):
        ideal.material = None
    assert replace(ideal.material, fill_factor=0.25).fill_factor == 0.25


def test_config_files_load():
    for name in ("mqw_reference", "mqw_adiabatic", "rectangular_resistance", "open_circuit", "rlc_underdamped"):
        m = load_config(f"configs/{name}.toml")
        assert m.derived.capacitance > 0


# Unit audit.  Dimensions as exponents of (kg, m, s, A); each quantity is pushed
# through the Joule-energy closed form and the extra-shift closed form.
KG, M, S, A = np.eye(4, dtype=int)
VOLT = KG + 2 * M - 3 * S - A
UNITS = {
    "W": M, "L": M, "eps0": -KG - 3 * M + 4 * S + 2 * A, "chi2": M - VOLT, "E": VOLT - M,
    "C0": -KG - 2 * M + 4 * S + 2 * A, "R": VOLT - A, "omega": -S, "c": M - S, "n": 0 * M,
}


def _dim(*terms):
    return sum(p * UNITS[name] for name, p in terms)


def test_unit_audit_joule_energy_is_joules():
    # (kappa W L eps0 chi2 E^2)^2 / C0
    q = _dim(("W", 1), ("L", 1), ("eps0", 1), ("chi2", 1), ("E", 2))
    assert np.array_equal(q, S + A)  # coulombs
    joule = 2 * q - UNITS["C0"]
    assert np.array_equal(joule, KG + 2 * M - 2 * S)


def test_unit_audit_extra_shift_is_per_second():
    # eps0 omega chi2^2 E^2 L / (n eps c C0 R)
    dw = _dim(("eps0", 1), ("omega", 1), ("chi2", 2), ("E", 2), ("L", 1), ("eps0", -1), ("c", -1),
              ("C0", -1), ("R", -1))
    assert np.array_equal(dw, -S)


def test_magnitude_sanity(ideal):
    from eopulse.ledger import joule_closed_form
    U = joule_closed_form(ideal)
    # kappa W L eps0 chi2 E^2 ~ 3e-15 C; squared over 1e-16 F ~ 1e-13 J times (1 - 1/e) ~ 1e-19 J range
    assert 1e-22 < U < 1e-16
    assert ideal.derived.plateau_intensity * 1e-12 * 1e-12 > U  # far below the pulse energy
    assert CHI2 > 0
