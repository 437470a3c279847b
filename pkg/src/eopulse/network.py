"""External two-terminal networks and their admittance state-space realizations.

Polynomials are stored highest power first (``numpy.polyval`` order) in the
Laplace variable ``s``; the impedance is ``Z(s) = numerator(s) / denominator(s)``.

The capacitor drives the network with a voltage and the network answers with a
current, so what gets realized is the admittance ``Y = 1/Z``.  ``Y`` must be
proper, which means the impedance numerator degree must be at least the
denominator degree: ``R``, ``R + sL`` and a series RLC loop are all fine, while
a bare shunt capacitor (``Z = 1/(sC)``) is not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NetworkError

RESISTANCE = "resistance"
RATIONAL = "rational_impedance"


@dataclass(frozen=True)
class StateSpace:
    """Admittance realization: dx/dt = A x + B u, J = C x + D u."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float
    time_scale: float = 1.0

    @property
    def order(self) -> int:
        return self.A.shape[0]

    def admittance(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=complex))
        if self.order == 0:
            return np.full(s.shape, complex(self.D))
        out = np.empty(s.shape, dtype=complex)
        eye = np.eye(self.order)
        for k, sk in enumerate(s):
            x = np.linalg.solve(sk * eye - self.A, self.B[:, 0])
            out[k] = self.C[0] @ x + self.D
        return out

    def impedance(self, s):
        return 1.0 / self.admittance(s)


def _trim(coeffs, name):
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if c.ndim != 1 or c.size == 0 or not np.all(np.isfinite(c)):
        raise NetworkError("DEGENERATE_DENOMINATOR", f"{name} must be a finite, non-empty 1-D sequence")
    nz = np.flatnonzero(c)
    if nz.size == 0:
        raise NetworkError("DEGENERATE_DENOMINATOR", f"{name} is identically zero")
    return c[nz[0]:]


def realize_impedance(numerator, denominator, time_scale: float | None = None) -> StateSpace:
    """Controllable-canonical realization of the admittance ``denominator/numerator``.

    The Laplace variable is first rescaled to ``p = s * time_scale`` so the
    companion matrix has entries of order one; the returned matrices are in
    physical units regardless.  The default time scale is
    ``|a_n / a_0| ** (1/n)`` for the impedance numerator ``a``.
    """
    a = _trim(numerator, "impedance numerator")
    d = _trim(denominator, "impedance denominator")
    n = a.size - 1
    if d.size - 1 > n:
        raise NetworkError(
            "IMPROPER_IMPEDANCE",
            f"admittance is improper: denominator degree {d.size - 1} exceeds numerator degree {n}",
        )
    if a[-1] == 0.0:
        raise NetworkError("DEGENERATE_DENOMINATOR", "admittance has a pole at s = 0 (Z(0) = 0)")

    if n == 0:
        return StateSpace(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), float(d[-1] / a[-1]), 1.0)

    ts = time_scale if time_scale is not None else abs(a[0] / a[-1]) ** (1.0 / n)
    powers = np.arange(n, -1, -1)
    a_p = a * ts ** (-powers)
    d_p = np.concatenate([np.zeros(n + 1 - d.size), d]) * ts ** (-powers)
    a_p, d_p = a_p / a_p[0], d_p / a_p[0]

    A = np.zeros((n, n))
    A[:-1, 1:] = np.eye(n - 1)
    A[-1, :] = -a_p[1:][::-1]
    B = np.zeros((n, 1))
    B[-1, 0] = 1.0
    D = float(d_p[0])
    C = (d_p[1:][::-1] - D * a_p[1:][::-1]).reshape(1, n)
    return StateSpace(A / ts, B / ts, C, D, ts)


def probe_frequencies(numerator, denominator, count: int = 20) -> np.ndarray:
    """Log-spaced angular frequencies bracketing every finite nonzero root."""
    roots = np.concatenate([np.roots(_trim(numerator, "numerator")), np.roots(_trim(denominator, "denominator"))])
    mags = np.abs(roots[np.abs(roots) > 0])
    if mags.size == 0:
        lo, hi = 1.0, 1e6
    else:
        lo, hi = mags.min() * 1e-2, mags.max() * 1e2
    return np.logspace(math.log10(lo), math.log10(hi), count)


@dataclass(frozen=True)
class CircuitNetwork:
    """Pure resistance (``R`` may be ``inf`` for an open circuit) or rational impedance."""

    kind: str
    R: float | None = None
    numerator: tuple = field(default=())
    denominator: tuple = field(default=())

    @classmethod
    def resistance(cls, R: float) -> "CircuitNetwork":
        return cls(RESISTANCE, R=float(R))

    @classmethod
    def rational(cls, numerator, denominator) -> "CircuitNetwork":
        return cls(RATIONAL, numerator=tuple(float(x) for x in numerator),
                   denominator=tuple(float(x) for x in denominator))

    @classmethod
    def series_rlc(cls, R: float, inductance: float, capacitance: float = math.inf) -> "CircuitNetwork":
        """Series R, L and C; ``capacitance=inf`` drops the capacitor (R + sL)."""
        if math.isinf(capacitance):
            return cls.rational([inductance, R], [1.0])
        return cls.rational([inductance * capacitance, R * capacitance, 1.0], [capacitance, 0.0])

    @property
    def is_open(self) -> bool:
        return self.kind == RESISTANCE and math.isinf(self.R)

    def polynomials(self):
        if self.kind == RESISTANCE:
            return (self.R,), (1.0,)
        return self.numerator, self.denominator

    def realization(self) -> StateSpace:
        if self.kind == RESISTANCE:
            D = 0.0 if self.is_open else 1.0 / self.R
            return StateSpace(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), D, 1.0)
        return realize_impedance(self.numerator, self.denominator)

    @property
    def state_dimension(self) -> int:
        return self.realization().order

    def impedance(self, s):
        num, den = self.polynomials()
        s = np.asarray(s, dtype=complex)
        return np.polyval(num, s) / np.polyval(den, s)

    def is_passive(self, count: int = 200, rtol: float = 1e-12) -> bool:
        """Sampled check of Re Z(i w) >= 0."""
        if self.kind == RESISTANCE:
            return self.R > 0
        num, den = self.polynomials()
        w = probe_frequencies(num, den, count)
        z = self.impedance(1j * w)
        return bool(np.all(z.real >= -rtol * np.abs(z)))

    def dc_resistance(self) -> float:
        """Z(0) when finite, else inf."""
        num, den = self.polynomials()
        d0 = den[-1]
        return math.inf if d0 == 0 else num[-1] / d0

    def describe(self) -> dict:
        if self.kind == RESISTANCE:
            return {"kind": self.kind, "R": self.R}
        return {"kind": self.kind, "numerator": list(self.numerator), "denominator": list(self.denominator)}
