import math

import numpy as np
import pytest

from eopulse import constants as K
from eopulse.circuit import integrate_circuit, plateau_fp
from eopulse.envelope import Envelope
from eopulse.errors import SimulationError
from eopulse.model import validate_config
from eopulse.optics import (OPTICAL_COLUMNS, apply_shift_to_pulse, chi2_eo, frequency_shift,
                            refractive_index_shift, spectrum)
from eopulse.pipeline import simulate
from eopulse.quadrature import integrate_segments

from conftest import CHI2, TAU, phenomenological_config, resistance


def _onset_extra(model):
    """|delta_omega_extra| just after a rectangular pulse switches on."""
    kappa, chi, E = model.material.fill_factor, model.material.chi2_dc, model.pulse.field_amplitude
    return (2 * K.EPS0 * model.pulse.carrier_angular_frequency * kappa**2 * chi**2 * E**2
            * model.geometry.device_length
            / (model.material.refractive_index * model.derived.permittivity * K.C_LIGHT
               * model.derived.relaxation_time))


def _response(model):
    ch = integrate_circuit(model)
    return ch, frequency_shift(refractive_index_shift(ch, model), model)


def test_index_shift_hand_values(ideal):
    ch, resp = _response(ideal)
    FP = plateau_fp(ideal)
    # at t = 0+ the charge has not moved: dn = 4 chi2 F_P / (2 n)
    assert resp.delta_n[0] == pytest.approx(4 * CHI2 * FP / (2 * 3.5), rel=1e-12)
    assert resp.delta_n[0] < 0
    # after a long plateau F1 -> -kappa F_P and dn -> (1 - kappa) of its onset value
    m = validate_config(phenomenological_config(plateau_duration=30 * TAU))
    _, r = _response(m)
    i = np.searchsorted(r.t, 30 * TAU) - 1
    assert r.delta_n[i] == pytest.approx(0.5 * 4 * CHI2 * FP / 7.0, rel=1e-9)
    assert chi2_eo(CHI2) == 4 * CHI2


def test_onset_shift_closed_form(ideal):
    _, resp = _response(ideal)
    onset = _onset_extra(ideal)
    assert resp.delta_omega_extra[0] == pytest.approx(-onset, rel=1e-10)
    # the order of magnitude expected for a micron-sized well stack
    assert 1e7 < onset < 1e10


def test_decomposition_is_exact(smooth):
    _, resp = _response(smooth)
    peak = np.max(np.abs(resp.delta_omega))
    assert np.max(np.abs(resp.delta_omega - resp.delta_omega_usual - resp.delta_omega_extra)) <= 1e-14 * peak
    on = (resp.t > 0) & (resp.t < smooth.pulse.plateau_duration)
    assert np.all(resp.delta_omega_usual[on] == 0.0)


def test_shift_is_minus_phase_derivative(smooth):
    _, resp = _response(smooth)
    for a, b in resp.segments:
        t, phi, dw = resp.t[a:b], resp.phase[a:b], resp.delta_omega[a:b]
        fd = -np.gradient(phi, t, edge_order=2)
        scale = np.max(np.abs(resp.delta_omega))
        assert np.max(np.abs(fd[2:-2] - dw[2:-2])) < 1e-3 * scale


def test_plateau_phase_identity(ideal):
    _, resp = _response(ideal)
    a, b = resp.segments[0]
    val, _ = integrate_segments(resp.delta_omega, resp.t, [(a, b)])
    assert val == pytest.approx(-(resp.phase[b - 1] - resp.phase[a]), rel=1e-10)


def test_red_during_pulse_blue_after(ideal):
    _, resp = _response(ideal)
    T = ideal.pulse.plateau_duration
    on = (resp.t >= 0) & (resp.t < T)
    after = resp.t > T
    assert np.all(resp.delta_omega_extra[on] < 0)
    assert np.all(resp.delta_omega_extra[after] >= 0)


def test_peak_at_onset_and_exponential_decay(ideal):
    _, resp = _response(ideal)
    T = ideal.pulse.plateau_duration
    on = (resp.t >= 0) & (resp.t < T)
    d = np.abs(resp.delta_omega_extra[on])
    assert np.argmax(d) == 0
    slope = np.polyfit(resp.t[on][1:], np.log(d[1:]), 1)[0]
    assert abs(-1 / slope - TAU) / TAU < 1e-2


def test_switch_off_mirrors_switch_on():
    m = validate_config(phenomenological_config(plateau_duration=20 * TAU))
    _, resp = _response(m)
    T = m.pulse.plateau_duration
    s = np.linspace(0.01, 3, 40) * TAU
    seg_on, seg_off = resp.segments[0], resp.segments[1]
    on = np.interp(s, resp.t[slice(*seg_on)], resp.delta_omega_extra[slice(*seg_on)])
    off = np.interp(T + s, resp.t[slice(*seg_off)], resp.delta_omega_extra[slice(*seg_off)])
    assert np.max(np.abs(on + off)) < 1e-6 * np.max(np.abs(on))


def test_net_extra_phase_vanishes(smooth):
    ch, resp = _response(smooth)
    val, _ = integrate_segments(resp.delta_omega_extra, resp.t, resp.segments)
    peak = np.max(np.abs(resp.delta_omega_extra))
    assert abs(val) < 1e-6 * peak * TAU


@pytest.mark.filterwarnings("ignore::eopulse.errors.RegimeWarning")
@pytest.mark.parametrize("tau_ratio", [1e-3, 1e3])
def test_extra_shift_vanishes_in_both_resistance_limits(tau_ratio, ideal):
    _, ref = _response(ideal)
    raw = phenomenological_config()
    raw["circuit"]["R"] = resistance(tau_ratio * TAU)
    m = validate_config(raw)
    _, resp = _response(m)
    T = m.pulse.plateau_duration
    probe = 0.5 * T
    i = np.searchsorted(resp.t, probe)
    j = np.searchsorted(ref.t, probe)
    assert abs(resp.delta_omega_extra[i]) < 1e-2 * abs(ref.delta_omega_extra[j])


def test_open_circuit_has_no_extra_shift(raw_ideal):
    raw_ideal["circuit"]["R"] = math.inf
    m = validate_config(raw_ideal)
    _, resp = _response(m)
    assert np.all(resp.delta_omega_extra == 0.0)


def test_photon_number_conserved(smooth):
    res = simulate(smooth)
    assert res.pulse.photons_out == res.pulse.photons_in
    assert res.pulse.photon_discrepancy <= 1e-9
    assert res.pulse.flux_quadrature_discrepancy <= 1e-9


def test_grid_mismatch(ideal):
    ch = integrate_circuit(ideal)
    with pytest.raises(SimulationError, match="GRID_MISMATCH"):
        refractive_index_shift(ch, ideal, E2=np.ones(3))
    resp = frequency_shift(refractive_index_shift(ch, ideal), ideal)
    other = Envelope.from_pulse(ideal.pulse, amplitude=2 * ideal.pulse.field_amplitude)
    with pytest.raises(SimulationError, match="GRID_MISMATCH"):
        apply_shift_to_pulse(resp, ideal, other)


def test_spectrum_centroid_matches_mean_shift(smooth):
    _, resp = _response(smooth)
    w, s = spectrum(resp, samples=1 << 16)
    centroid = np.sum(w * s) / np.sum(s)
    val, _ = integrate_segments(resp.intensity * resp.delta_omega, resp.t, resp.segments)
    norm, _ = integrate_segments(resp.intensity, resp.t, resp.segments)
    assert centroid == pytest.approx(val / norm, rel=2e-2)
    assert centroid < 0


def test_optical_csv(tmp_path, ideal):
    _, resp = _response(ideal)
    resp.to_csv(tmp_path / "optical.csv")
    assert (tmp_path / "optical.csv").read_text().splitlines()[0] == ",".join(OPTICAL_COLUMNS)
