"""Energy bookkeeping: Joule heat, battery work, optical loss, and their balance.

Numerical values integrate sampled trajectories with segmented Simpson
quadrature and add the exact post-grid remainder of the unforced loop.  The
optical loss is the signed net energy removed by the circuit-induced shift,
``-∫ W^2 I dw_extra / w dt``; for a pure red shift it equals the integral of
``W^2 |dI|``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import constants as K
from .circuit import ChargeTrajectory
from .errors import SimulationError
from .model import ValidatedModel
from .network import RESISTANCE
from .optics import OpticalResponse, PulseRecord
from .quadrature import integrate_segments


@dataclass(frozen=True)
class JouleEnergy:
    numerical: float
    closed_form: float | None
    quadrature_error: float
    run_id: str | None = None


@dataclass(frozen=True)
class BatteryWork:
    closed_form: float
    numerical: float
    run_id: str | None = None


@dataclass(frozen=True)
class OpticalLoss:
    numerical: float
    numerical_unsigned: float
    closed_form: float | None
    sampled_closed_form: float | None
    quadrature_error: float
    run_id: str | None = None


def _idealized_resistance(model: ValidatedModel) -> bool:
    net = model.network
    return net.kind == RESISTANCE and not net.is_open and model.pulse.idealized


def _check_tail(charge: ChargeTrajectory, model: ValidatedModel) -> None:
    if not charge.complete:
        raise SimulationError("TRUNCATED_TAIL", "trajectory was truncated before the charge relaxed")
    peak = np.max(np.abs(charge.sigma1))
    if peak > 0 and abs(charge.sigma1[-1]) > model.numerics.tail_threshold * peak:
        raise SimulationError(
            "TRUNCATED_TAIL",
            f"sigma1 decayed only to {abs(charge.sigma1[-1]) / peak:.2e} of its peak; raise numerics.tail_factor",
        )


def joule_closed_form(model: ValidatedModel, chi2: float | None = None) -> float:
    """(kappa W L eps0 chi2 E^2)^2 (1 - exp(-T/C0 R)) / C0."""
    chi = model.material.chi2_dc if chi2 is None else chi2
    g, d = model.geometry, model.derived
    q = model.material.fill_factor * g.cross_section * g.device_length * K.EPS0 * chi * model.pulse.field_amplitude**2
    return q * q * -math.expm1(-model.pulse.plateau_duration / d.relaxation_time) / d.capacitance


def plateau_index_shift(t, model: ValidatedModel, chi2: float | None = None):
    """Closed-form dn on the idealized plateau, 0 <= t <= T."""
    chi = model.material.chi2_dc if chi2 is None else chi2
    d = model.derived
    n = model.material.refractive_index
    kappa = model.material.fill_factor
    amp = 2.0 * K.EPS0 / (n * d.permittivity) * chi**2 * model.pulse.field_amplitude**2
    return -amp * (1.0 - kappa * -np.expm1(-np.asarray(t, dtype=float) / d.relaxation_time))


def optical_loss_closed_form(model: ValidatedModel, chi2: float | None = None, dn0=None, dnT=None) -> float:
    """W^2 I L kappa |dn(0) - dn(T)| / c."""
    if dn0 is None:
        dn0, dnT = plateau_index_shift([0.0, model.pulse.plateau_duration], model, chi2)
    g = model.geometry
    return (g.cross_section**2 * model.derived.plateau_intensity * g.device_length
            * model.material.fill_factor * abs(dn0 - dnT) / K.C_LIGHT)


def joule_energy(charge: ChargeTrajectory, model: ValidatedModel, chi2: float | None = None,
                 require_tail: bool = True, run_id: str | None = None) -> JouleEnergy:
    """Energy dissipated in the network.

    Resistance: integral of R J^2.  Rational network: integral of u J, the total
    energy absorbed; reactive storage returns to zero with the state.
    """
    if require_tail:
        _check_tail(charge, model)
    if charge.network_kind == RESISTANCE:
        integrand = charge.R * charge.J**2 if math.isfinite(charge.R) else np.zeros_like(charge.J)
    else:
        integrand = charge.power
    value, err = integrate_segments(integrand, charge.t, charge.segments)
    if charge.tail is not None:
        value += charge.tail.energy
    closed = joule_closed_form(model, chi2) if _idealized_resistance(model) else None
    return JouleEnergy(value, closed, err, run_id)


def battery_work(charge: ChargeTrajectory, model: ValidatedModel, require_tail: bool = True,
                 run_id: str | None = None) -> BatteryWork:
    """Work V0 ∫J dt.  The closed form uses the net charge moved, V0 W L Δsigma1;
    a complete run ends at sigma1(∞) = 0 because the unforced loop is stable."""
    if require_tail:
        _check_tail(charge, model)
    V0 = model.circuit.battery_voltage
    area = model.geometry.cross_section * model.geometry.device_length
    end = 0.0 if charge.complete else float(charge.sigma1[-1])
    closed = V0 * area * (end - float(charge.sigma1[0]))
    q, _ = integrate_segments(charge.J, charge.t, charge.segments)
    if charge.tail is not None:
        q += charge.tail.charge
    return BatteryWork(closed, V0 * q, run_id)


def optical_energy_loss(response: OpticalResponse, model: ValidatedModel, chi2: float | None = None,
                        run_id: str | None = None) -> OpticalLoss:
    w = model.pulse.carrier_angular_frequency
    area = model.geometry.cross_section**2
    signed = -area * response.intensity * response.delta_omega_extra / w
    value, err = integrate_segments(signed, response.t, response.segments)
    unsigned, _ = integrate_segments(np.abs(signed), response.t, response.segments)
    closed = sampled = None
    if _idealized_resistance(model):
        closed = optical_loss_closed_form(model, chi2)
        a, b = response.segments[0]  # plateau segment of the idealized grid
        sampled = optical_loss_closed_form(model, chi2, response.delta_n[a], response.delta_n[b - 1])
    return OpticalLoss(value, unsigned, closed, sampled, err, run_id)


@dataclass(frozen=True)
class BalanceReport:
    run_id: str | None
    U_R: float
    U_V0: float
    U_ERS: float
    N_in: float
    N_out: float
    residuals: dict
    thresholds: dict
    closed_forms: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.residuals[k] <= self.thresholds[k] for k in self.thresholds)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = self.passed
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, **kw)


def _rel(a: float, b: float, scale: float) -> float:
    if a == b:
        return 0.0
    return abs(a - b) / scale if scale > 0 else math.inf


def balance_report(joule: JouleEnergy, battery: BatteryWork, optical: OpticalLoss, pulse: PulseRecord,
                   model: ValidatedModel, run_id: str | None = None,
                   energy_tolerance: float | None = None) -> BalanceReport:
    """Residuals of every identity against the model's thresholds.

    ``energy_tolerance`` overrides ``numerics.energy_tolerance``; the
    microscopic pipeline uses it because its F_P is proportional to E^2 only
    up to adiabatic corrections.
    """
    ids = {x.run_id for x in (joule, battery, optical)}
    if run_id is not None:
        ids.add(run_id)
    if len(ids) > 1:
        raise SimulationError("INCONSISTENT_RUN_IDS", f"ledger entries come from different runs: {sorted(map(str, ids))}")
    rid = ids.pop()
    scale = max(abs(joule.numerical), abs(optical.numerical))
    num = model.numerics
    residuals = {
        "energy": _rel(optical.numerical, joule.numerical, scale),
        "battery": _rel(battery.numerical, 0.0, abs(joule.numerical)),
        "photon_number": pulse.photon_discrepancy,
    }
    e_tol = num.energy_tolerance if energy_tolerance is None else energy_tolerance
    thresholds = {"energy": e_tol, "battery": num.battery_tolerance,
                  "photon_number": num.photon_tolerance}
    if pulse.flux_quadrature_discrepancy is not None:
        residuals["flux_quadrature"] = pulse.flux_quadrature_discrepancy
        thresholds["flux_quadrature"] = num.photon_tolerance
    closed = {"U_V0": battery.closed_form}
    if joule.closed_form is not None:
        closed["U_R"] = joule.closed_form
    if optical.closed_form is not None:
        closed["U_ERS"] = optical.closed_form
        residuals["closed_form_identity"] = _rel(optical.closed_form, joule.closed_form, joule.closed_form)
        thresholds["closed_form_identity"] = 1e-12
    residuals["quadrature_error_estimate"] = max(joule.quadrature_error, optical.quadrature_error) / scale if scale else 0.0
    return BalanceReport(rid, joule.numerical, battery.numerical, optical.numerical,
                         pulse.photons_in, pulse.photons_out, residuals, thresholds, closed)
