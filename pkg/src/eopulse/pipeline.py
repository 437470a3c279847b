"""End-to-end runs: charge dynamics -> chirp -> pulse record -> energy ledger.

``simulate`` drives the loop with the phenomenological F_P; ``simulate_microscopic``
drives it with the two-level exciton population and uses the extracted chi2 for
the electro-optic index.
"""

from __future__ import annotations

import uuid
import warnings
from dataclasses import dataclass

from .circuit import ChargeTrajectory, integrate_circuit
from .envelope import Envelope
from .exciton import (AdiabaticityReport, Chi2Fit, ExcitonTrajectory, check_adiabaticity, evolve_two_level,
                      extract_chi2)
from .errors import RegimeWarning
from .ledger import (BalanceReport, BatteryWork, JouleEnergy, OpticalLoss, balance_report, battery_work,
                     joule_energy, optical_energy_loss)
from .model import ValidatedModel
from .optics import IndexShift, OpticalResponse, PulseRecord, apply_shift_to_pulse, frequency_shift, refractive_index_shift


@dataclass(frozen=True)
class SimulationResult:
    run_id: str
    model: ValidatedModel
    chi2: float
    envelope: Envelope
    charge: ChargeTrajectory
    index: IndexShift
    response: OpticalResponse
    pulse: PulseRecord
    joule: JouleEnergy
    battery: BatteryWork
    optical: OpticalLoss
    report: BalanceReport


@dataclass(frozen=True)
class MicroscopicResult:
    result: SimulationResult
    exciton: ExcitonTrajectory
    fit: Chi2Fit
    adiabaticity: AdiabaticityReport


def analyse(model: ValidatedModel, charge: ChargeTrajectory, chi2: float, envelope: Envelope,
            run_id: str, energy_tolerance: float | None = None) -> SimulationResult:
    """Optical response and ledger for an already computed charge trajectory."""
    index = refractive_index_shift(charge, model, chi2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        response = frequency_shift(index, model)
    pulse = apply_shift_to_pulse(response, model, envelope)
    joule = joule_energy(charge, model, chi2, run_id=run_id)
    battery = battery_work(charge, model, run_id=run_id)
    optical = optical_energy_loss(response, model, chi2, run_id=run_id)
    report = balance_report(joule, battery, optical, pulse, model, energy_tolerance=energy_tolerance)
    return SimulationResult(run_id, model, chi2, envelope, charge, index, response, pulse, joule, battery,
                            optical, report)


def simulate(model: ValidatedModel, chi2: float | None = None, run_id: str | None = None,
             warn: bool = False) -> SimulationResult:
    """Phenomenological pipeline with ``chi2`` (defaults to the model's value)."""
    if warn:
        for msg in model.warnings:
            warnings.warn(msg, RegimeWarning, stacklevel=2)
    chi = model.material.chi2_dc if chi2 is None else chi2
    if chi is None:
        chi = extract_chi2(model).chi2_dc
    envelope = Envelope.from_pulse(model.pulse)
    charge = integrate_circuit(model, envelope, chi)
    return analyse(model, charge, chi, envelope, run_id or uuid.uuid4().hex)


def simulate_microscopic(model: ValidatedModel, feedback: bool = True, run_id: str | None = None,
                         warn: bool = False, fit: Chi2Fit | None = None) -> MicroscopicResult:
    """Coupled exciton + circuit run and its ledger.

    The energy identity holds here only up to adiabatic corrections, so the
    report uses ``numerics.micro_energy_tolerance``.
    """
    envelope = Envelope.from_pulse(model.pulse)
    report = check_adiabaticity(model, envelope)
    if warn:
        for msg in model.warnings:
            warnings.warn(msg, RegimeWarning, stacklevel=2)
        if not report.adiabatic:
            warnings.warn(f"REGIME: virtual-excitation margin {report.margin:.3g} below {report.threshold:g}",
                          RegimeWarning, stacklevel=2)
    fit = fit or extract_chi2(model)
    exciton = evolve_two_level(model, envelope, feedback=feedback)
    if warn and exciton.peak_occupation > 0 and exciton.residual_occupation > 1e-4 * exciton.peak_occupation:
        warnings.warn(f"REGIME: {exciton.residual_occupation / exciton.peak_occupation:.2e} of the peak exciton "
                      "population remains after the pulse (real transitions)", RegimeWarning, stacklevel=2)
    result = analyse(model, exciton.charge, fit.chi2_dc, envelope, run_id or uuid.uuid4().hex,
                     energy_tolerance=model.numerics.micro_energy_tolerance)
    return MicroscopicResult(result, exciton, fit, report)
