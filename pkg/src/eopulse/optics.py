"""Refractive-index change, chirp and the photon bookkeeping of the transmitted pulse.

Inside the electro-optic layer the dc field deviates from the bias by
``F - F0 = F_P + F1``, giving ``dn = chi2_eo (F - F0) / (2 n)`` with
``chi2_eo = 4 chi2_dc``.  The beam-averaged phase is ``omega L kappa dn / c``
(only a fraction ``kappa`` of the cross-section is electro-optic) and the
frequency shift is minus its time derivative.

The derivative is split by its two sources: the part driven by ``dE^2/dt``
at fixed charge (ordinary self-phase modulation) and the part driven by
``d sigma1/dt`` at fixed intensity (the circuit-induced shift).  Both come
from exact right-hand sides, never from differencing samples.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import constants as K
from .circuit import ChargeTrajectory, write_csv
from .errors import RegimeWarning, SimulationError
from .model import ValidatedModel
from .quadrature import integrate_segments

OPTICAL_COLUMNS = ("t", "delta_n", "phase", "delta_omega", "delta_omega_usual", "delta_omega_extra")
PULSE_COLUMNS = ("t", "flux_in", "flux_out", "carrier_frequency")


@dataclass(frozen=True)
class IndexShift:
    t: np.ndarray
    delta_n: np.ndarray
    rate_usual: np.ndarray
    rate_extra: np.ndarray
    E2: np.ndarray
    segments: tuple

    @property
    def rate(self) -> np.ndarray:
        return self.rate_usual + self.rate_extra


@dataclass(frozen=True)
class OpticalResponse:
    t: np.ndarray
    delta_n: np.ndarray
    phase: np.ndarray
    delta_omega: np.ndarray
    delta_omega_usual: np.ndarray
    delta_omega_extra: np.ndarray
    intensity: np.ndarray
    delta_I: np.ndarray
    segments: tuple

    def to_csv(self, path) -> None:
        write_csv(path, OPTICAL_COLUMNS, [self.t, self.delta_n, self.phase, self.delta_omega,
                                          self.delta_omega_usual, self.delta_omega_extra])


@dataclass(frozen=True)
class PulseRecord:
    t: np.ndarray
    flux_in: np.ndarray
    flux_out: np.ndarray
    carrier_frequency: np.ndarray
    photons_in: float
    photons_out: float
    photons_exact: float | None
    energy_in: float
    energy_out: float
    quadrature_error: float
    segments: tuple

    @property
    def energy_loss(self) -> float:
        return self.energy_in - self.energy_out

    @property
    def photon_discrepancy(self) -> float:
        return abs(self.photons_out - self.photons_in) / self.photons_in if self.photons_in else 0.0

    @property
    def flux_quadrature_discrepancy(self) -> float | None:
        if self.photons_exact is None or self.photons_exact == 0:
            return None
        return abs(self.photons_in - self.photons_exact) / self.photons_exact

    def to_csv(self, path) -> None:
        write_csv(path, PULSE_COLUMNS, [self.t, self.flux_in, self.flux_out, self.carrier_frequency])


def chi2_eo(chi2_dc: float) -> float:
    """Electro-optic coefficient from the rectification one (symmetric relation)."""
    return 4.0 * chi2_dc


def refractive_index_shift(charge: ChargeTrajectory, model: ValidatedModel, chi2: float | None = None,
                           E2: np.ndarray | None = None) -> IndexShift:
    chi = model.material.chi2_dc if chi2 is None else chi2
    if chi is None:
        raise SimulationError("MISSING_CHI2", "chi2_dc is required for the index shift")
    if E2 is not None and np.shape(E2) != charge.t.shape:
        raise SimulationError("GRID_MISMATCH", "envelope samples and charge trajectory differ in length")
    k = chi2_eo(chi) / (2.0 * model.material.refractive_index)
    eps = model.derived.permittivity
    return IndexShift(
        t=charge.t,
        delta_n=k * (charge.FP + charge.F1),
        rate_usual=k * charge.FP_rate,
        rate_extra=k * charge.sigma1_rate / eps,
        E2=charge.E2 if E2 is None else np.asarray(E2, dtype=float),
        segments=charge.segments,
    )


def frequency_shift(index: IndexShift, model: ValidatedModel) -> OpticalResponse:
    if any("C0 R c / n" in w for w in model.warnings):
        warnings.warn("thin-device limit L << C0 R c/n is marginal; chirp may be inaccurate", RegimeWarning,
                      stacklevel=2)
    w = model.pulse.carrier_angular_frequency
    g = w * model.geometry.device_length * model.material.fill_factor / K.C_LIGHT
    intensity = K.EPS0 * K.C_LIGHT * model.material.refractive_index * index.E2 / 2.0
    d_usual = -g * index.rate_usual
    d_extra = -g * index.rate_extra
    d_total = -g * index.rate
    return OpticalResponse(
        t=index.t,
        delta_n=index.delta_n,
        phase=g * index.delta_n,
        delta_omega=d_total,
        delta_omega_usual=d_usual,
        delta_omega_extra=d_extra,
        intensity=intensity,
        delta_I=intensity * d_total / w,
        segments=index.segments,
    )


def apply_shift_to_pulse(response: OpticalResponse, model: ValidatedModel, envelope=None) -> PulseRecord:
    """Photon flux in/out and pulse energies; the flux is passed through unchanged.

    ``envelope`` (an ``Envelope``) supplies the exact fluence used to audit the
    flux quadrature; when given its samples must agree with the response grid.
    """
    w = model.pulse.carrier_angular_frequency
    area = model.geometry.cross_section**2
    hw = K.HBAR * w
    flux_in = area * response.intensity / hw
    flux_out = flux_in.copy()
    exact = None
    if envelope is not None:
        check = envelope.e2(response.t)
        inside = (response.t > envelope.start) & (response.t < envelope.end)
        ref = max(float(np.max(np.abs(response.intensity))), 1e-300)
        I_env = K.EPS0 * K.C_LIGHT * model.material.refractive_index * check / 2.0
        if np.max(np.abs(I_env[inside] - response.intensity[inside]), initial=0.0) > 1e-9 * ref:
            raise SimulationError("GRID_MISMATCH", "envelope does not match the response samples")
        if envelope.fluence_exact is not None:
            exact = area * K.EPS0 * K.C_LIGHT * model.material.refractive_index * envelope.fluence_exact / (2.0 * hw)
    n_in, err_n = integrate_segments(flux_in, response.t, response.segments)
    n_out, _ = integrate_segments(flux_out, response.t, response.segments)
    e_in, err_e = integrate_segments(hw * flux_in, response.t, response.segments)
    e_out, _ = integrate_segments(K.HBAR * (w + response.delta_omega) * flux_out, response.t, response.segments)
    return PulseRecord(
        t=response.t,
        flux_in=flux_in,
        flux_out=flux_out,
        carrier_frequency=w + response.delta_omega,
        photons_in=n_in,
        photons_out=n_out,
        photons_exact=exact,
        energy_in=e_in,
        energy_out=e_out,
        quadrature_error=err_e,
        segments=response.segments,
    )


def spectrum(response: OpticalResponse, samples: int = 8192):
    """Diagnostic power spectrum of the complex envelope sqrt(I) exp(i phase).

    Returns ``(angular frequency offset from the carrier, spectral density)``
    sorted by offset.  Resamples onto a uniform grid covering the pulse.
    """
    mask = response.intensity > 0
    if not np.any(mask):
        return np.zeros(0), np.zeros(0)
    t_lo, t_hi = response.t[mask][0], response.t[mask][-1]
    order = np.argsort(response.t, kind="stable")
    tu = np.linspace(t_lo, t_hi, samples)
    amp = np.sqrt(np.interp(tu, response.t[order], response.intensity[order]))
    phase = np.interp(tu, response.t[order], response.phase[order])
    a = amp * np.exp(1j * phase)
    dt = tu[1] - tu[0]
    spec = np.abs(np.fft.fft(a) * dt) ** 2
    # field ~ a(t) exp(-i w t): offset +dw pairs with exp(+i dw t)
    offsets = -2.0 * np.pi * np.fft.fftfreq(samples, dt)
    idx = np.argsort(offsets)
    return offsets[idx], spec[idx]
