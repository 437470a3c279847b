"""Surface-charge dynamics of the biased capacitor coupled to its external network.

The charge deviation ``sigma1`` obeys

    d sigma1/dt = -sigma1/(C0 R) - kappa F_P/(R L),   F_P = -(eps0/eps) chi2 E(t)^2

for a resistance.  For a rational impedance the network is driven by the
terminal-voltage deviation ``u = -W (sigma1/eps + kappa F_P)`` and answers
with the current ``J`` from its admittance realization; ``d sigma1/dt = J/(W L)``.
With ``Z = R`` both forms coincide.

Integration uses the adaptive 8th-order Dormand-Prince method on scaled
variables (time in units of the plateau duration, charge in units of its
plateau equilibrium value).  Output samples come from the integrator's own
7th-order continuous extension, one segment at a time, so kinks of the drive
at segment boundaries never fall inside an interpolation interval.  Breakpoints appear
twice in the output grid, once as the end of a segment and once as the start
of the next, carrying one-sided limits.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import schur, solve_continuous_lyapunov

from . import constants as K
from .envelope import Envelope, Piece
from .errors import SimulationError
from .model import ValidatedModel, loop_matrix, physical_eigenvalues
from .network import RESISTANCE

CSV_COLUMNS = ("t", "sigma1", "F1", "FP", "F_total", "J")
FLOAT_FMT = "{:.11e}"


def sigma_analytic(t, model: ValidatedModel):
    """Closed-form sigma1(t) for a resistance and an idealized rectangular pulse.

    Ramps are treated as instantaneous: the plateau is ``[0, T]``.  Uses
    ``-kappa*eps*F_P``, which equals ``kappa*eps*|F_P|`` for positive chi2.
    """
    net = model.network
    if net.kind != RESISTANCE:
        raise SimulationError("UNSUPPORTED_NETWORK", "closed form exists for a pure resistance only")
    t = np.asarray(t, dtype=float)
    eps = model.derived.permittivity
    FP = plateau_fp(model)
    amp = -model.material.fill_factor * eps * FP
    tau = model.derived.relaxation_time
    T = model.pulse.plateau_duration
    on = amp * -np.expm1(-t / tau)
    off = amp * -math.expm1(-T / tau) * np.exp((T - t) / tau)
    return np.where(t < 0, 0.0, np.where(t <= T, on, off))


def plateau_fp(model: ValidatedModel, chi2: float | None = None) -> float:
    chi = model.material.chi2_dc if chi2 is None else chi2
    return -(K.EPS0 / model.derived.permittivity) * chi * model.pulse.field_amplitude**2


# --------------------------------------------------------------------------- grid

@dataclass(frozen=True)
class Segment:
    t0: float
    t1: float
    piece: Piece | None
    times: np.ndarray
    max_step: float


def build_grid(model: ValidatedModel, envelope: Envelope, max_step_cap: float | None = None) -> list[Segment]:
    """Piecewise-uniform output grid: one segment per envelope piece plus the tail."""
    num = model.numerics
    if num.samples_per_time_constant < num.min_steps_per_feature:
        raise SimulationError("STEP_TOO_COARSE",
                              f"numerics.samples_per_time_constant < {num.min_steps_per_feature}")
    tau_fast = model.derived.fastest_time
    tau_slow = model.derived.relaxation_time
    bounds = [(p.t0, p.t1, p) for p in envelope.pieces]
    tail = num.tail_factor * tau_slow if math.isfinite(tau_slow) else envelope.end - envelope.start
    bounds.append((envelope.end, envelope.end + tail, None))

    features, counts = [], []
    for t0, t1, _ in bounds:
        length = t1 - t0
        feature = min(length, tau_fast)
        features.append(feature)
        counts.append(max(num.min_segment_samples, math.ceil(num.samples_per_time_constant * length / feature)))
    total = sum(counts)
    if total > num.max_samples:
        scale = num.max_samples / total
        counts = [max(num.min_segment_samples, int(c * scale)) for c in counts]
    segments = []
    for (t0, t1, piece), feature, n in zip(bounds, features, counts):
        n = 4 * math.ceil((n - 1) / 4) + 1  # Simpson + Richardson need n = 4k + 1
        if (n - 1) * feature / (t1 - t0) < num.min_steps_per_feature:
            raise SimulationError(
                "STEP_TOO_COARSE",
                f"segment [{t0:.3e}, {t1:.3e}] resolves its time scale {feature:.3e} s by fewer than "
                f"{num.min_steps_per_feature} samples; raise numerics.max_samples",
            )
        step = feature / num.steps_per_time_constant
        if max_step_cap is not None:
            step = min(step, max_step_cap)
        segments.append(Segment(t0, t1, piece, np.linspace(t0, t1, n), step))
    return segments


# --------------------------------------------------------------------------- loop dynamics

class LoopSystem:
    """Scaled linear loop dynamics  dy/ds = M y + b * F_P  with  s = t / t_ref.

    ``y[0]`` is sigma1 / sigma_ref; further entries are network states in
    units of ``u_ref = W sigma_ref / eps``.
    """

    def __init__(self, model: ValidatedModel, fp_scale: float):
        d = model.derived
        g = model.geometry
        self.kappa = model.material.fill_factor
        self.eps = d.permittivity
        self.C0 = d.capacitance
        self.W, self.L = g.cross_section, g.device_length
        self.t_ref = model.pulse.plateau_duration
        self.sigma_ref = self.kappa * self.eps * fp_scale if fp_scale > 0 else 1.0
        self.u_ref = self.W * self.sigma_ref / self.eps
        net = model.network
        self.kind = net.kind
        self.open = net.is_open
        ss = net.realization()
        self.ss = ss
        n = ss.order
        self.dim = n + 1
        tr = self.t_ref
        if self.kind == RESISTANCE:
            R = net.R
            if self.open:
                self.M = np.zeros((1, 1))
                self.b = np.zeros(1)
                self.c_J = np.zeros(1)
            else:
                tau = self.C0 * R
                self.M = np.array([[-tr / tau]])
                self.b = np.array([-tr * self.kappa / (R * self.L * self.sigma_ref)])
                self.c_J = np.array([-self.W * self.L * self.sigma_ref / tau])
            self.c_J_fp = -self.W * self.kappa / R if not self.open else 0.0
        else:
            M = np.zeros((n + 1, n + 1))
            M[0, 0] = -tr * ss.D / self.C0
            M[0, 1:] = tr * ss.C[0] / self.C0
            M[1:, 0] = -tr * ss.B[:, 0]
            M[1:, 1:] = tr * ss.A
            self.M = M
            fp_gain = self.kappa * self.eps / self.sigma_ref
            self.b = -fp_gain * np.concatenate([[tr * ss.D / self.C0], tr * ss.B[:, 0]])
            self.c_J = self.u_ref * np.concatenate([[-ss.D], ss.C[0]])
            self.c_J_fp = -self.u_ref * ss.D * fp_gain
        self.c_u = np.zeros(self.dim)
        self.c_u[0] = -self.u_ref
        self.c_u_fp = -self.W * self.kappa

    def rhs(self, y, fp):
        """dy/ds for state columns ``y`` (dim, ...) and drive ``fp`` (...)."""
        if self.kind == RESISTANCE:
            # resistance: dsigma/dt = -sigma/(C0 R) - kappa F_P/(R L), written out directly
            return self.M[0, 0] * y[:1] + self.b[0] * np.asarray(fp)
        return self.M @ y + np.multiply.outer(self.b, fp)

    def sigma(self, y):
        return self.sigma_ref * y[0]

    def current(self, y, fp):
        return self.c_J @ y + self.c_J_fp * np.asarray(fp)

    def voltage(self, y, fp):
        return self.c_u @ y + self.c_u_fp * np.asarray(fp)

    def sigma_rate(self, dyds):
        return self.sigma_ref * dyds[0] / self.t_ref

    def network_state(self, y):
        return self.u_ref * y[1:]

    def tail_remainder(self, y_end) -> "TailRemainder":
        """Exact integrals from the last sample to infinity of the unforced loop.

        Works in the stable invariant subspace (ordered real Schur form), so
        the conserved mode of a dc-blocking network does not enter.
        """
        if self.open:
            return TailRemainder(0.0, 0.0)
        y_end = np.asarray(y_end, dtype=float)
        tol = 1e-9 * np.max(np.abs(np.linalg.eigvals(self.M)))
        T, Z, sdim = schur(self.M, output="real", sort=lambda re, im: re < -tol)
        V, Ms = Z[:, :sdim], T[:sdim, :sdim]
        z = V.T @ y_end
        if np.linalg.norm(y_end - V @ z) > 1e-8 * max(np.linalg.norm(y_end), 1e-300):
            raise SimulationError("UNSTABLE_NETWORK", "final state has a component outside the decaying modes")
        charge = self.t_ref * float(self.c_J @ V @ np.linalg.solve(-Ms, z))
        Q = 0.5 * (np.outer(self.c_u, self.c_J) + np.outer(self.c_J, self.c_u))
        P = solve_continuous_lyapunov(Ms.T, -(V.T @ Q @ V))
        energy = self.t_ref * float(z @ P @ z)
        return TailRemainder(charge, energy)


@dataclass(frozen=True)
class TailRemainder:
    """Integrals over (t_end, inf) of J and of u*J, for the unforced loop."""

    charge: float
    energy: float


# --------------------------------------------------------------------------- trajectory

@dataclass(frozen=True)
class ChargeTrajectory:
    t: np.ndarray
    sigma1: np.ndarray
    F1: np.ndarray
    FP: np.ndarray
    F_total: np.ndarray
    J: np.ndarray
    sigma1_rate: np.ndarray
    FP_rate: np.ndarray
    E2: np.ndarray
    voltage: np.ndarray
    circuit_state: np.ndarray
    segments: tuple
    tail: TailRemainder | None
    network_kind: str
    R: float | None
    area: float = field(default=0.0)

    @property
    def power(self) -> np.ndarray:
        """Instantaneous power absorbed by the network, u*J."""
        return self.voltage * self.J

    @property
    def complete(self) -> bool:
        return self.tail is not None

    def truncate(self, t_cut: float) -> "ChargeTrajectory":
        """Trajectory restricted to t <= t_cut (no tail remainder)."""
        keep = self.t <= t_cut
        idx = np.flatnonzero(keep)
        segs = []
        for a, b in self.segments:
            lo, hi = a, min(b, idx[-1] + 1)
            if hi - lo >= 2:
                segs.append((lo, hi))
        kw = {name: getattr(self, name)[keep] for name in
              ("t", "sigma1", "F1", "FP", "F_total", "J", "sigma1_rate", "FP_rate", "E2", "voltage")}
        return ChargeTrajectory(**kw, circuit_state=self.circuit_state[:, keep], segments=tuple(segs),
                                tail=None, network_kind=self.network_kind, R=self.R, area=self.area)

    def to_csv(self, path: str | Path) -> None:
        write_csv(path, CSV_COLUMNS, [self.t, self.sigma1, self.F1, self.FP, self.F_total, self.J])


def write_csv(path, header, columns) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([FLOAT_FMT.format(float(v)) for v in row])


def assemble_trajectory(model, loop: LoopSystem, t, y, dyds, fp, fp_rate, e2, segments, tail) -> ChargeTrajectory:
    eps = model.derived.permittivity
    sigma = loop.sigma(y)
    F1 = sigma / eps
    return ChargeTrajectory(
        t=t,
        sigma1=sigma,
        F1=F1,
        FP=fp,
        F_total=model.circuit.bias_field + fp + F1,
        J=loop.current(y, fp),
        sigma1_rate=loop.sigma_rate(dyds),
        FP_rate=fp_rate,
        E2=e2,
        voltage=loop.voltage(y, fp),
        circuit_state=loop.network_state(y),
        segments=tuple(segments),
        tail=tail,
        network_kind=loop.kind,
        R=model.network.R,
        area=loop.W * loop.L,
    )


def segment_drive(piece: Piece | None, fp_gain: float, t_ref: float):
    """F_P and dF_P/dt as functions of scaled time for one grid segment."""
    if piece is None:
        def drive(s):
            return np.zeros_like(np.asarray(s, dtype=float))
        return drive, drive

    def drive(s):
        return fp_gain * piece.e2(np.asarray(s, dtype=float) * t_ref)

    def drive_rate(s):
        return fp_gain * piece.de2(np.asarray(s, dtype=float) * t_ref)
    return drive, drive_rate


def integrate_circuit(model: ValidatedModel, envelope: Envelope | None = None, chi2: float | None = None) -> ChargeTrajectory:
    """Integrate the loop driven by F_P(t) = -(eps0/eps) chi2 E(t)^2.

    ``chi2`` overrides the model's dc coefficient (used when it comes from the
    microscopic extraction).  Returns samples on the grid of ``build_grid``
    plus the exact post-grid remainder of the charge and energy integrals.
    """
    envelope = envelope or Envelope.from_pulse(model.pulse)
    chi = model.material.chi2_dc if chi2 is None else chi2
    if chi is None:
        raise SimulationError("MISSING_CHI2", "no chi2_dc given; extract it from the microscopic model first")
    check_envelope(envelope)
    check_stability(model)
    fp_gain = -(K.EPS0 / model.derived.permittivity) * chi
    loop = LoopSystem(model, abs(fp_gain) * envelope.amplitude**2)
    num = model.numerics
    segments = build_grid(model, envelope)
    tr = loop.t_ref

    y0 = np.zeros(loop.dim)
    ts, ys, dys, fps, fprs, e2s, seg_idx = [], [], [], [], [], [], []
    start = 0
    for seg in segments:
        piece = seg.piece
        drive, drive_rate = segment_drive(piece, fp_gain, tr)
        s_out = seg.times / tr
        if loop.open:
            y_s = np.zeros((loop.dim, seg.times.size))
            dy_s = np.zeros_like(y_s)
        else:
            sol = solve_ivp(lambda s, y: loop.rhs(y, drive(s)).ravel(), (s_out[0], s_out[-1]), y0,
                            method="DOP853", rtol=num.rtol, atol=num.atol, max_step=seg.max_step / tr,
                            dense_output=True)
            if not sol.success:
                raise SimulationError("INTEGRATION_FAILED", sol.message)
            y_s = sol.sol(s_out)
            y_s[:, 0], y_s[:, -1] = sol.y[:, 0], sol.y[:, -1]
            # exact derivative at the samples rather than the spline's
            dy_s = loop.rhs(y_s, drive(s_out))
            y0 = sol.y[:, -1]
        ts.append(seg.times)
        ys.append(y_s)
        dys.append(dy_s.reshape(loop.dim, -1))
        fps.append(drive(s_out))
        fprs.append(drive_rate(s_out))
        e2s.append(piece.e2(seg.times) if piece is not None else np.zeros(seg.times.size))
        seg_idx.append((start, start + seg.times.size))
        start += seg.times.size

    t = np.concatenate(ts)
    y = np.concatenate(ys, axis=1)
    dy = np.concatenate(dys, axis=1)
    tail = loop.tail_remainder(y[:, -1])
    return assemble_trajectory(model, loop, t, y, dy, np.concatenate(fps), np.concatenate(fprs),
                               np.concatenate(e2s), seg_idx, tail)


def check_stability(model: ValidatedModel) -> None:
    net = model.network
    if net.is_open:
        return
    eig = physical_eigenvalues(net, loop_matrix(net, model.derived.capacitance))
    if np.max(eig.real) >= 0:
        raise SimulationError("UNSTABLE_NETWORK", f"loop eigenvalue with Re >= 0: {eig[np.argmax(eig.real)]:.3e}")


def check_envelope(envelope: Envelope) -> None:
    if any(np.any(p.e2(np.linspace(p.t0, p.t1, 33)) < 0) for p in envelope.pieces):
        raise SimulationError("NEGATIVE_ENVELOPE", "E^2(t) must be nonnegative")
