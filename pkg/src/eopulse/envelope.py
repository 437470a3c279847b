"""Optical field envelopes as piecewise-smooth functions of time.

Time origin: the constant-intensity plateau occupies ``[0, T]``; ramps of
duration ``T_tr`` precede and follow it.  Ramp shapes act on the field
amplitude ``E(t) = E * g(t)`` so both ``E`` and ``E^2`` are continuously
differentiable across the ramp ends (the raised cosine has zero slope there).

Every piece exposes ``E^2`` and its exact time derivative; nothing downstream
differentiates sampled data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.integrate import quad
from scipy.special import erfc

from .model import PulseSpec


@dataclass(frozen=True)
class Piece:
    t0: float
    t1: float
    e2: Callable[[np.ndarray], np.ndarray]
    de2: Callable[[np.ndarray], np.ndarray]
    label: str


def _raised_cosine_pieces(E2, T, T_tr):
    w = math.pi / T_tr

    def rise(t):
        g = 0.5 * (1.0 - np.cos(w * (t + T_tr)))
        return E2 * g * g

    def drise(t):
        s = w * (t + T_tr)
        return E2 * (1.0 - np.cos(s)) * 0.5 * w * np.sin(s)

    def fall(t):
        g = 0.5 * (1.0 + np.cos(w * (t - T)))
        return E2 * g * g

    def dfall(t):
        s = w * (t - T)
        return -E2 * (1.0 + np.cos(s)) * 0.5 * w * np.sin(s)

    return [Piece(-T_tr, 0.0, rise, drise, "rise"), Piece(T, T + T_tr, fall, dfall, "fall")], 0.375 * T_tr


def _gaussian_pieces(E2, T, T_tr):
    # field follows a gaussian-smoothed step: erf ramp of standard deviation
    # T_tr/10 centred in the ramp, rescaled to reach exactly 0 and 1 at its
    # ends.  The leftover slope jump there is ~exp(-12.5) of the peak slope.
    w = T_tr / 10.0
    c = -0.5 * T_tr
    root = math.sqrt(2.0) * w
    lo = 0.5 * math.erfc(-(-T_tr - c) / root)
    hi = 0.5 * math.erfc(-(0.0 - c) / root)
    span = hi - lo

    def g(t):
        return (0.5 * erfc(-(t - c) / root) - lo) / span

    def dg(t):
        return np.exp(-((t - c) / root) ** 2) / (math.sqrt(2.0 * math.pi) * w * span)

    def rise(t):
        return E2 * g(t) ** 2

    def drise(t):
        return 2.0 * E2 * g(t) * dg(t)

    def fall(t):
        return E2 * g(T - t) ** 2

    def dfall(t):
        return -2.0 * E2 * g(T - t) * dg(T - t)

    ramp_area, _ = quad(lambda t: float(g(np.array(t))) ** 2, -T_tr, 0.0, epsabs=0.0, epsrel=1e-13, limit=200)
    return [Piece(-T_tr, 0.0, rise, drise, "rise"), Piece(T, T + T_tr, fall, dfall, "fall")], ramp_area


@dataclass(frozen=True)
class Envelope:
    amplitude: float
    pieces: tuple
    fluence_exact: float | None  # integral of E^2 dt, closed form or adaptive quadrature

    @classmethod
    def from_pulse(cls, pulse: PulseSpec, amplitude: float | None = None) -> "Envelope":
        E = pulse.field_amplitude if amplitude is None else amplitude
        E2 = E * E
        T, T_tr = pulse.plateau_duration, pulse.transient_duration

        if pulse.envelope_shape == "tabulated":
            t = np.asarray(pulse.table_time, dtype=float)
            y = np.asarray(pulse.table_field_squared, dtype=float)
            scale = 1.0 if amplitude is None or pulse.field_amplitude == 0 else (amplitude / pulse.field_amplitude) ** 2
            spline = PchipInterpolator(t, y * scale)
            deriv = spline.derivative()
            piece = Piece(t[0], t[-1], lambda s: np.maximum(spline(s), 0.0), deriv, "table")
            return cls(E, (piece,), None)

        plateau = Piece(0.0, T, lambda t: np.full_like(np.asarray(t, dtype=float), E2),
                        lambda t: np.zeros_like(np.asarray(t, dtype=float)), "plateau")
        if T_tr == 0.0:
            return cls(E, (plateau,), E2 * T)
        build = _raised_cosine_pieces if pulse.envelope_shape == "raised_cosine" else _gaussian_pieces
        (rise, fall), ramp_area = build(E2, T, T_tr)
        return cls(E, (rise, plateau, fall), E2 * (T + 2.0 * ramp_area))

    @property
    def start(self) -> float:
        return self.pieces[0].t0

    @property
    def end(self) -> float:
        return self.pieces[-1].t1

    def piece_at(self, t: float) -> Piece | None:
        for p in self.pieces:
            if p.t0 <= t <= p.t1:
                return p
        return None

    def e2(self, t):
        """E^2 at arbitrary times (zero outside the pulse); right-continuous at breakpoints."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for p in self.pieces:
            mask = (t >= p.t0) & (t < p.t1) if p is not self.pieces[-1] else (t >= p.t0) & (t <= p.t1)
            out[mask] = p.e2(t[mask])
        return out

    def de2(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for p in self.pieces:
            mask = (t >= p.t0) & (t < p.t1) if p is not self.pieces[-1] else (t >= p.t0) & (t <= p.t1)
            out[mask] = p.de2(t[mask])
        return out
