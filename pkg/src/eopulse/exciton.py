"""Two-level model of the lowest deformed exciton.

In a frame rotating at the carrier frequency and under the rotating-wave
approximation the Hamiltonian on (ground, exciton) is

    H = [[0,        -mu E/2             ],
         [-mu E/2,   Delta - l (F_P + F1)]]

with ``E(t)`` the field envelope.  Counter-rotating corrections are smaller by
about ``Delta / (hbar omega)`` and are dropped.  The exciton population sets the
polarization field ``F_P = -l N_x |c_e|^2 / eps0`` where ``N_x`` is the
exciton density; at weak field the adiabatic population is ``(mu E / 2 Delta)^2``
so the effective rectification coefficient is

    chi2 = eps_r l N_x mu^2 / (4 Delta^2 eps0).

``evolve_two_level`` integrates the amplitudes together with the circuit
loop in lock-step, so the loop sees the microscopic ``F_P`` and, with
``feedback=True``, the level sees the loop's ``F1``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp, trapezoid

from . import constants as K
from .circuit import (ChargeTrajectory, LoopSystem, assemble_trajectory, build_grid, check_envelope,
                      check_stability, write_csv)
from .envelope import Envelope
from .errors import ConfigError, RegimeWarning, SimulationError
from .model import PulseSpec, ValidatedModel

EXCITON_COLUMNS = ("t", "occupation", "level_energy", "FP_micro")

# rtol/atol of the amplitude integration; the norm must hold to 1e-10 over
# thousands of detuning periods
AMP_RTOL = 1e-12
AMP_ATOL = 1e-14


@dataclass(frozen=True)
class AdiabaticityReport:
    """Virtual-excitation criterion (T_tr/hbar)^2 >> (mu E / Delta^2)^2 at peak field."""

    lhs: float
    rhs: float
    margin: float
    adiabatic: bool
    threshold: float
    detuning_cycles: float  # Delta T_tr / hbar; ramp ringing is governed by this alone


@dataclass(frozen=True)
class ExcitonTrajectory:
    t: np.ndarray
    amplitude: np.ndarray  # complex exciton amplitude c_e
    ground: np.ndarray  # complex ground amplitude c_g
    occupation: np.ndarray
    level_energy: np.ndarray  # J, eps_x - l (F_P + F1)
    FP_micro: np.ndarray
    norm_error: float
    peak_occupation: float
    residual_occupation: float
    charge: ChargeTrajectory | None = None

    def to_csv(self, path) -> None:
        write_csv(path, EXCITON_COLUMNS, [self.t, self.occupation, self.level_energy, self.FP_micro])


@dataclass(frozen=True)
class Chi2Fit:
    chi2_dc: float
    residual: float
    r_squared: float
    fields: np.ndarray
    fp_plateau: np.ndarray
    analytic: float


def _micro(model: ValidatedModel):
    if model.microscopic is None:
        raise ConfigError("MISSING_FIELD", "the microscopic section is required", "microscopic")
    return model.microscopic


def detuning(model: ValidatedModel) -> float:
    micro = _micro(model)
    delta = micro.exciton_energy - K.HBAR * model.pulse.carrier_angular_frequency
    if delta <= 0:
        raise SimulationError("ZERO_DETUNING", f"detuning {delta:.3e} J is not positive")
    return delta


def chi2_perturbative(model: ValidatedModel) -> float:
    """Weak-field closed form eps_r l N_x mu^2 / (4 Delta^2 eps0)."""
    micro = _micro(model)
    delta = detuning(model)
    return (model.material.relative_permittivity * micro.static_dipole * micro.exciton_density
            * micro.transition_dipole**2 / (4.0 * delta**2 * K.EPS0))


def check_adiabaticity(model: ValidatedModel, envelope: Envelope | None = None) -> AdiabaticityReport:
    micro = _micro(model)
    delta = detuning(model)
    envelope = envelope or Envelope.from_pulse(model.pulse)
    E_peak = envelope.amplitude
    T_tr = model.pulse.transient_duration
    lhs = (T_tr / K.HBAR) ** 2
    rhs = (micro.transition_dipole * E_peak / delta**2) ** 2
    margin = math.inf if rhs == 0 else lhs / rhs
    threshold = model.numerics.adiabatic_threshold
    return AdiabaticityReport(lhs, rhs, margin, margin >= threshold, threshold, delta * T_tr / K.HBAR)


# --------------------------------------------------------------------------- lock-step dynamics

class _Coupled:
    """Right-hand side in scaled time s = t / t_ref for z = [Re c_g, Im c_g, Re c_e, Im c_e, loop...]."""

    def __init__(self, model: ValidatedModel, loop: LoopSystem | None, feedback: bool, t_ref: float):
        micro = _micro(model)
        self.delta = detuning(model)
        self.eps_x = micro.exciton_energy
        self.mu = micro.transition_dipole
        self.l = micro.static_dipole
        self.fp_gain = -micro.static_dipole * micro.exciton_density / K.EPS0
        self.eps = model.derived.permittivity
        self.loop = loop
        self.feedback = feedback
        self.t_ref = t_ref

    def fields(self, z, on):
        cg = z[0] + 1j * z[1]
        ce = z[2] + 1j * z[3]
        occ = ce.real**2 + ce.imag**2
        fp = self.fp_gain * occ
        drive = fp if on else np.zeros_like(fp)
        f1 = self.loop.sigma(z[4:]) / self.eps if self.loop is not None else 0.0 * occ
        shift = self.l * (fp + f1)
        level = self.delta - shift if self.feedback else self.delta + 0.0 * occ
        return cg, ce, occ, fp, drive, level, self.eps_x - shift

    def rhs(self, s, z, efield, on):
        cg, ce, _, _, drive, level, _ = self.fields(z, on)
        half_rabi = 0.5 * self.mu * efield(s)
        k = self.t_ref / K.HBAR
        dcg = 1j * k * half_rabi * ce
        dce = 1j * k * (half_rabi * cg - level * ce)
        parts = [np.real(dcg), np.imag(dcg), np.real(dce), np.imag(dce)]
        out = np.vstack([np.atleast_1d(p) for p in parts]) if np.ndim(z) > 1 else np.array(parts)
        if self.loop is None:
            return out
        dy = self.loop.rhs(z[4:], drive)
        return np.concatenate([out, dy.reshape(self.loop.dim, *np.shape(drive))])


def _field_function(piece, t_ref):
    if piece is None:
        return lambda s: 0.0 * np.asarray(s, dtype=float)
    return lambda s: np.sqrt(np.maximum(piece.e2(np.asarray(s, dtype=float) * t_ref), 0.0))


def detuning_period(model: ValidatedModel) -> float:
    return 2.0 * math.pi * K.HBAR / detuning(model)


def evolve_two_level(model: ValidatedModel, envelope: Envelope | None = None, feedback: bool = False,
                     circuit: bool = True, steps_per_period: int = 40,
                     times: np.ndarray | None = None) -> ExcitonTrajectory:
    """Integrate the exciton amplitudes, optionally with the circuit loop in lock-step.

    With ``circuit=True`` the returned trajectory carries a ``ChargeTrajectory``
    driven by the microscopic ``F_P`` on the same grid.  Once the pulse is
    over the loop drive is switched off: whatever population is left is a
    real excitation, reported as ``residual_occupation`` and never fed back.
    ``times`` replaces the circuit grid when ``circuit=False``.
    """
    if steps_per_period < 20:
        raise SimulationError("STEP_TOO_COARSE",
                              f"{steps_per_period} steps per detuning period; at least 20 are required")
    envelope = envelope or Envelope.from_pulse(model.pulse)
    check_envelope(envelope)
    if feedback and not circuit:
        raise SimulationError("UNSUPPORTED_MODE", "feedback needs the circuit loop")
    max_step = detuning_period(model) / steps_per_period
    tr = model.pulse.plateau_duration

    if circuit:
        check_stability(model)
        micro = _micro(model)
        fp_scale = micro.static_dipole * micro.exciton_density / K.EPS0 * (
            micro.transition_dipole * envelope.amplitude / (2.0 * detuning(model))) ** 2
        loop = LoopSystem(model, fp_scale)
        segments = build_grid(model, envelope, max_step_cap=max_step)
        plan = [(seg.t0, seg.t1, seg.piece, seg.times, seg.max_step) for seg in segments]
    else:
        loop = None
        t_out = np.asarray(times, dtype=float) if times is not None else np.linspace(envelope.start, envelope.end, 2001)
        plan = []
        for p in envelope.pieces:
            sel = t_out[(t_out >= p.t0) & (t_out <= p.t1)]
            plan.append((p.t0, p.t1, p, np.unique(np.concatenate([[p.t0], sel, [p.t1]])), max_step))
    sys = _Coupled(model, loop, feedback, tr)

    z0 = np.zeros(4 + (loop.dim if loop else 0))
    z0[0] = 1.0
    rtol = min(AMP_RTOL, model.numerics.rtol)
    atol = np.full(z0.size, AMP_ATOL)
    if loop is not None:
        atol[4:] = model.numerics.atol
    ts, zs, dzs, on_mask, fields, seg_idx, norms = [], [], [], [], [], [], []
    start = 0
    for t0, t1, piece, t_seg, step in plan:
        on = piece is not None
        efield = _field_function(piece, tr)
        sol = solve_ivp(lambda s, z: sys.rhs(s, z, efield, on), (t0 / tr, t1 / tr), z0, method="DOP853",
                        rtol=rtol, atol=atol, max_step=min(step, max_step) / tr, dense_output=True)
        if not sol.success:
            raise SimulationError("INTEGRATION_FAILED", sol.message)
        norms.append(np.abs(sol.y[0] ** 2 + sol.y[1] ** 2 + sol.y[2] ** 2 + sol.y[3] ** 2 - 1.0).max())
        s_out = t_seg / tr
        z_s = sol.sol(s_out)
        dz_s = sys.rhs(s_out, z_s, efield, on)
        z0 = sol.y[:, -1]
        ts.append(t_seg)
        zs.append(z_s)
        dzs.append(dz_s)
        on_mask.append(np.full(t_seg.size, on))
        fields.append(efield(s_out) ** 2)
        seg_idx.append((start, start + t_seg.size))
        start += t_seg.size

    t = np.concatenate(ts)
    z = np.concatenate(zs, axis=1)
    dz = np.concatenate(dzs, axis=1)
    on = np.concatenate(on_mask)
    e2 = np.concatenate(fields)
    cg, ce, occ, fp, _, _, level = sys.fields(z, True)
    peak = float(occ[on].max()) if np.any(on) else 0.0
    residual = float(occ[-1])

    charge = None
    if loop is not None:
        # d|c_e|^2/dt from the exact right-hand side
        occ_rate = 2.0 * (z[2] * dz[2] + z[3] * dz[3]) / tr
        fp_drive = np.where(on, fp, 0.0)
        fp_rate = np.where(on, sys.fp_gain * occ_rate, 0.0)
        tail = loop.tail_remainder(z[4:, -1])
        charge = assemble_trajectory(model, loop, t, z[4:], dz[4:], fp_drive, fp_rate, e2, seg_idx, tail)
    return ExcitonTrajectory(t, ce, cg, occ, level, fp, float(max(norms)), peak, residual, charge)


# --------------------------------------------------------------------------- chi2 extraction

def probe_pulse(model: ValidatedModel, amplitude: float) -> PulseSpec:
    """Adiabatic probe: gaussian-smoothed edges 80 hbar/Delta long, plateau of 20 detuning periods."""
    delta = detuning(model)
    return PulseSpec(
        carrier_angular_frequency=model.pulse.carrier_angular_frequency,
        field_amplitude=amplitude,
        plateau_duration=20.0 * 2.0 * math.pi * K.HBAR / delta,
        transient_duration=80.0 * K.HBAR / delta,
        envelope_shape="gaussian",
    )


def plateau_occupation(model: ValidatedModel, amplitudes, samples: int = 801) -> np.ndarray:
    """Mean exciton population over the probe plateau for each field amplitude.

    The ladder points are independent, so their amplitudes are stacked into a
    single linear system and integrated together (no circuit, no feedback).
    """
    fields = np.atleast_1d(np.asarray(amplitudes, dtype=float))
    micro = _micro(model)
    delta = detuning(model)
    pulse = probe_pulse(model, 1.0)
    env = Envelope.from_pulse(pulse)
    k = 1.0 / K.HBAR
    half_rabi = 0.5 * micro.transition_dipole * fields

    def rhs(t, z):
        c = z.reshape(4, -1)
        piece = env.piece_at(t)
        g = math.sqrt(max(float(piece.e2(t)), 0.0)) if piece is not None else 0.0
        cg, ce = c[0] + 1j * c[1], c[2] + 1j * c[3]
        dcg = 1j * k * g * half_rabi * ce
        dce = 1j * k * (g * half_rabi * cg - delta * ce)
        return np.concatenate([dcg.real, dcg.imag, dce.real, dce.imag])

    z0 = np.zeros((4, fields.size))
    z0[0] = 1.0
    t_plateau = np.linspace(0.0, pulse.plateau_duration, samples)
    max_step = detuning_period(model) / 20
    # scaled time keeps the step control well conditioned
    tr = K.HBAR / delta
    sol = solve_ivp(lambda s, z: tr * rhs(s * tr, z), (env.start / tr, env.end / tr), z0.ravel(),
                    method="DOP853", rtol=AMP_RTOL, atol=AMP_ATOL, max_step=max_step / tr,
                    t_eval=t_plateau / tr)
    if not sol.success:
        raise SimulationError("INTEGRATION_FAILED", sol.message)
    c = sol.y.reshape(4, fields.size, -1)
    occ = c[2] ** 2 + c[3] ** 2
    return trapezoid(occ, t_plateau, axis=1) / pulse.plateau_duration


def extract_chi2(model: ValidatedModel, points: int = 5, span: float = 10.0,
                 field_ceiling: float | None = None, tolerance: float = 1e-3) -> Chi2Fit:
    """Fit the plateau polarization field over a geometric ladder of fields.

    The ladder runs from ``field_ceiling / sqrt(span)`` to ``field_ceiling``
    (default: the pulse amplitude), so it covers one decade of intensity.
    Least squares through the origin of ``F_P = -(eps0/eps) chi2 E^2``;
    ``residual`` is the largest deviation from the fit relative to the
    largest ``|F_P|``.
    """
    micro = _micro(model)
    delta = detuning(model)
    top = model.pulse.field_amplitude if field_ceiling is None else field_ceiling
    if top <= 0:
        # no field in the model: probe at 1% of the detuning in Rabi units
        top = 0.02 * delta / micro.transition_dipole
    fields = top * np.geomspace(1.0 / math.sqrt(span), 1.0, points)
    occ = plateau_occupation(model, fields)
    fp = -micro.static_dipole * micro.exciton_density * occ / K.EPS0
    x = fields**2
    slope = float(x @ fp / (x @ x))
    fit = slope * x
    residual = float(np.max(np.abs(fp - fit)) / np.max(np.abs(fp)))
    r2 = 1.0 - float(np.sum((fp - fit) ** 2) / np.sum((fp - fp.mean()) ** 2))
    chi2 = -slope * model.derived.permittivity / K.EPS0
    if residual > tolerance:
        raise SimulationError(
            "NONQUADRATIC_RESPONSE",
            f"plateau F_P departs from the E^2 law by {residual:.2e} > {tolerance:.0e}; field too strong",
        )
    return Chi2Fit(chi2, residual, r2, fields, fp, chi2_perturbative(model))


def warn_if_not_adiabatic(report: AdiabaticityReport) -> None:
    if not report.adiabatic:
        warnings.warn(f"virtual-excitation margin {report.margin:.3g} below {report.threshold:g}",
                      RegimeWarning, stacklevel=2)
