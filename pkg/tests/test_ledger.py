import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eopulse import constants as K
from eopulse.circuit import integrate_circuit
from eopulse.errors import SimulationError
from eopulse.ledger import (balance_report, battery_work, joule_closed_form, joule_energy,
                            optical_energy_loss, optical_loss_closed_form)
from eopulse.model import validate_config
from eopulse.pipeline import simulate

from conftest import CHI2, TAU, phenomenological_config, resistance


def _charge_scale(model, chi=CHI2):
    g = model.geometry
    return model.material.fill_factor * g.cross_section * g.device_length * K.EPS0 * chi * model.pulse.field_amplitude**2


def test_joule_hand_value(ideal):
    q = _charge_scale(ideal)
    expected = q * q * (1 - math.exp(-1)) / ideal.derived.capacitance
    assert joule_closed_form(ideal) == pytest.approx(expected, rel=1e-14)
    res = simulate(ideal)
    assert res.joule.numerical == pytest.approx(expected, rel=1e-6)


def test_zero_field_has_no_energy():
    res = simulate(validate_config(phenomenological_config(field_amplitude=0.0)))
    assert res.joule.numerical == 0.0 and res.optical.numerical == 0.0 and res.battery.numerical == 0.0


def test_long_plateau_limit():
    m = validate_config(phenomenological_config(plateau_duration=40 * TAU))
    q = _charge_scale(m)
    assert joule_closed_form(m) == pytest.approx(q * q / m.derived.capacitance, rel=1e-15)


def test_battery_work_vanishes_for_complete_runs(ideal, rlc):
    for model in (ideal, rlc):
        res = simulate(model)
        assert res.battery.closed_form == 0.0
        assert abs(res.battery.numerical) <= 1e-10 * res.joule.numerical


def test_truncated_run_moves_net_charge(ideal):
    ch = integrate_circuit(ideal).truncate(0.5 * ideal.pulse.plateau_duration)
    b = battery_work(ch, ideal, require_tail=False)
    area = ideal.geometry.cross_section * ideal.geometry.device_length
    assert b.closed_form == pytest.approx(ideal.circuit.battery_voltage * area * ch.sigma1[-1], rel=1e-15)
    assert b.closed_form != 0.0
    assert b.numerical == pytest.approx(b.closed_form, rel=1e-8)
    with pytest.raises(SimulationError, match="TRUNCATED_TAIL"):
        battery_work(ch, ideal)


def test_short_tail_refused(raw_ideal):
    raw_ideal["numerics"] = {"tail_factor": 2.0}
    m = validate_config(raw_ideal)
    ch = integrate_circuit(m)
    with pytest.raises(SimulationError) as exc:
        joule_energy(ch, m)
    assert exc.value.code == "TRUNCATED_TAIL"


def test_closed_forms_agree(ideal):
    assert optical_loss_closed_form(ideal) == pytest.approx(joule_closed_form(ideal), rel=1e-12)
    res = simulate(ideal)
    r = res.report
    assert r.residuals["closed_form_identity"] <= 1e-12
    assert r.residuals["energy"] <= 1e-6
    assert res.optical.numerical == pytest.approx(res.optical.closed_form, rel=1e-6)
    assert res.optical.sampled_closed_form == pytest.approx(res.optical.closed_form, rel=1e-8)
    assert r.passed


def test_red_shift_dominates_signed_loss(ideal):
    res = simulate(ideal)
    assert res.optical.numerical > 0
    assert res.optical.numerical_unsigned >= res.optical.numerical


def test_smooth_pulse_balances(smooth):
    res = simulate(smooth)
    assert res.report.residuals["energy"] <= 1e-6
    assert res.joule.numerical == pytest.approx(joule_closed_form(smooth), rel=1e-2)
    assert res.report.passed


def test_weak_coupling_and_open_circuit_limits(raw_ideal, ideal):
    base = joule_closed_form(ideal)
    raw_ideal["material"]["fill_factor"] = 1e-3
    assert joule_closed_form(validate_config(raw_ideal)) == pytest.approx(base * (1e-3 / 0.5) ** 2, rel=1e-12)
    raw_ideal["material"]["fill_factor"] = 0.5
    raw_ideal["circuit"]["R"] = resistance(1e6 * TAU)
    far = validate_config(raw_ideal)
    assert joule_closed_form(far) / base < 2e-6
    raw_ideal["circuit"]["R"] = math.inf
    res = simulate(validate_config(raw_ideal))
    assert res.joule.numerical == 0.0 and res.optical.numerical == 0.0


def test_report_thresholds_and_json(ideal):
    res = simulate(ideal, run_id="abc")
    d = json.loads(res.report.to_json())
    for key in ("run_id", "U_R", "U_V0", "U_ERS", "N_in", "N_out", "residuals", "thresholds", "closed_forms", "pass"):
        assert key in d
    assert d["run_id"] == "abc" and d["pass"] is True
    assert d["thresholds"]["energy"] == ideal.numerics.energy_tolerance
    tight = balance_report(res.joule, res.battery, res.optical, res.pulse, ideal, energy_tolerance=0.0)
    assert tight.thresholds["energy"] == 0.0


def test_inconsistent_run_ids(ideal):
    a, b = simulate(ideal, run_id="a"), simulate(ideal, run_id="b")
    with pytest.raises(SimulationError, match="INCONSISTENT_RUN_IDS"):
        balance_report(a.joule, b.battery, a.optical, a.pulse, ideal)


@settings(max_examples=10, deadline=None)
@given(st.floats(min_value=0.25, max_value=4.0), st.floats(min_value=0.25, max_value=4.0))
def test_scaling_laws(chi_factor, field_factor):
    base = validate_config(phenomenological_config())
    m = validate_config(phenomenological_config(field_amplitude=base.pulse.field_amplitude * field_factor))
    a = simulate(base)
    b = simulate(m, chi2=CHI2 * chi_factor)
    k = chi_factor**2 * field_factor**4
    assert b.joule.numerical == pytest.approx(k * a.joule.numerical, rel=1e-6)
    assert b.optical.numerical == pytest.approx(k * a.optical.numerical, rel=1e-6)
    # chirp scales like chi2^2 E^2
    assert np.max(np.abs(b.response.delta_omega_extra)) == pytest.approx(
        chi_factor**2 * field_factor**2 * np.max(np.abs(a.response.delta_omega_extra)), rel=1e-6)


def test_length_scaling_at_fixed_time_constant(raw_ideal, ideal):
    base = simulate(ideal)
    raw_ideal["geometry"]["device_length"] *= 2
    raw_ideal["circuit"]["R"] /= 2
    m = validate_config(raw_ideal)
    assert m.derived.relaxation_time == pytest.approx(TAU, rel=1e-14)
    assert simulate(m).joule.numerical == pytest.approx(2 * base.joule.numerical, rel=1e-6)


def test_fill_factor_scaling(raw_ideal, ideal):
    base = simulate(ideal)
    raw_ideal["material"]["fill_factor"] = 0.25
    assert simulate(validate_config(raw_ideal)).joule.numerical == pytest.approx(base.joule.numerical / 4, rel=1e-6)


def test_dissipated_power_is_nonnegative(smooth):
    ch = simulate(smooth).charge
    assert np.all(ch.R * ch.J**2 >= 0)
    assert np.all(ch.power >= -1e-12 * np.max(np.abs(ch.power)))


def test_optical_loss_uses_signed_extra_shift(ideal):
    res = simulate(ideal)
    again = optical_energy_loss(res.response, ideal)
    assert again.numerical == res.optical.numerical
