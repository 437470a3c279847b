"""Model description, validation and derived quantities.

A model is described by a nested mapping with the sections ``material``,
``microscopic`` (optional), ``geometry``, ``circuit``, ``pulse`` and
``numerics`` (optional).  All values are SI; see ``SCHEMA`` for the keys and
their units.  Unknown keys are rejected.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import constants as K
from .errors import ConfigError, NetworkError
from .network import RATIONAL, RESISTANCE, CircuitNetwork

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

ENVELOPE_SHAPES = ("raised_cosine", "gaussian", "tabulated")

# key -> (unit, required, default)
SCHEMA: dict[str, dict[str, tuple[str, bool, Any]]] = {
    "material": {
        "relative_permittivity": ("1", True, None),
        "refractive_index": ("1", True, None),
        "chi2_dc": ("m/V", False, None),
        "fill_factor": ("1", True, None),
    },
    "microscopic": {
        "exciton_energy": ("J", True, None),
        "transition_dipole": ("C m", True, None),
        "static_dipole": ("C m", True, None),
        "exciton_density": ("1/m^3", True, None),
    },
    "geometry": {
        "cross_section": ("m", True, None),
        "device_length": ("m", True, None),
    },
    "circuit": {
        "kind": ("-", False, RESISTANCE),
        "R": ("ohm", False, None),
        "numerator": ("polynomial in s, highest power first", False, None),
        "denominator": ("polynomial in s, highest power first", False, None),
        "bias_field": ("V/m", True, None),
        "battery_voltage": ("V", False, None),
    },
    "pulse": {
        "carrier_angular_frequency": ("rad/s", True, None),
        "field_amplitude": ("V/m", True, None),
        "plateau_duration": ("s", True, None),
        "transient_duration": ("s", True, None),
        "envelope_shape": ("-", False, "raised_cosine"),
        "table_time": ("s", False, None),
        "table_field_squared": ("V^2/m^2", False, None),
    },
    "numerics": {
        "rtol": ("1", False, 1e-10),
        "atol": ("1", False, 1e-12),
        "samples_per_time_constant": ("1", False, 1000),
        "min_segment_samples": ("1", False, 401),
        "max_samples": ("1", False, 2_000_000),
        "min_steps_per_feature": ("1", False, 50),
        "steps_per_time_constant": ("1", False, 20),
        "tail_factor": ("1", False, 16.0),
        "tail_threshold": ("1", False, 1e-6),
        "regime_margin": ("1", False, 10.0),
        "adiabatic_threshold": ("1", False, 100.0),
        "energy_tolerance": ("1", False, 1e-6),
        "micro_energy_tolerance": ("1", False, 1e-2),
        "battery_tolerance": ("1", False, 1e-10),
        "photon_tolerance": ("1", False, 1e-9),
    },
}
OPTIONAL_SECTIONS = ("microscopic", "numerics")


@dataclass(frozen=True)
class MaterialParams:
    relative_permittivity: float
    refractive_index: float
    chi2_dc: float | None
    fill_factor: float

    @property
    def permittivity(self) -> float:
        return self.relative_permittivity * K.EPS0


@dataclass(frozen=True)
class MicroscopicParams:
    """Lowest deformed exciton; no dephasing is modelled."""

    exciton_energy: float
    transition_dipole: float
    static_dipole: float
    exciton_density: float


@dataclass(frozen=True)
class Geometry:
    cross_section: float
    device_length: float


@dataclass(frozen=True)
class CircuitParams:
    network: CircuitNetwork
    bias_field: float
    battery_voltage: float


@dataclass(frozen=True)
class PulseSpec:
    carrier_angular_frequency: float
    field_amplitude: float
    plateau_duration: float
    transient_duration: float
    envelope_shape: str = "raised_cosine"
    table_time: tuple = ()
    table_field_squared: tuple = ()

    @property
    def idealized(self) -> bool:
        return self.envelope_shape == "raised_cosine" and self.transient_duration == 0.0


@dataclass(frozen=True)
class NumericsSpec:
    rtol: float = 1e-10
    atol: float = 1e-12
    samples_per_time_constant: int = 1000
    min_segment_samples: int = 401
    max_samples: int = 2_000_000
    min_steps_per_feature: int = 50
    steps_per_time_constant: int = 20
    tail_factor: float = 16.0
    tail_threshold: float = 1e-6
    regime_margin: float = 10.0
    adiabatic_threshold: float = 100.0
    energy_tolerance: float = 1e-6
    micro_energy_tolerance: float = 1e-2
    battery_tolerance: float = 1e-10
    photon_tolerance: float = 1e-9


@dataclass(frozen=True)
class DerivedQuantities:
    permittivity: float
    capacitance: float
    relaxation_time: float
    fastest_time: float
    plateau_intensity: float
    equilibrium_charge: float
    chi2_dc: float | None
    chi2_eo: float | None
    photon_energy: float
    detuning: float | None
    loop_eigenvalues: tuple


@dataclass(frozen=True)
class ValidatedModel:
    material: MaterialParams
    microscopic: MicroscopicParams | None
    geometry: Geometry
    circuit: CircuitParams
    pulse: PulseSpec
    numerics: NumericsSpec
    derived: DerivedQuantities
    warnings: tuple = ()
    raw: Mapping = field(default_factory=dict, repr=False, compare=False)

    def with_values(self, updates: Mapping[str, Any]) -> "ValidatedModel":
        """New validated model with dotted-path overrides, e.g. ``{"circuit.R": 5e3}``."""
        raw = copy.deepcopy(dict(self.raw))
        for path, value in updates.items():
            set_path(raw, path, value)
        return validate_config(raw)

    @property
    def network(self) -> CircuitNetwork:
        return self.circuit.network


def set_path(raw: dict, path: str, value) -> None:
    section, _, key = path.partition(".")
    if not key:
        raise ConfigError("MISSING_FIELD", "expected a dotted path section.key", path)
    if value is None:
        raw.get(section, {}).pop(key, None)
    else:
        raw.setdefault(section, {})[key] = value


def get_path(raw: Mapping, path: str):
    section, _, key = path.partition(".")
    return raw.get(section, {}).get(key)


def loop_matrix(network: CircuitNetwork, capacitance: float) -> np.ndarray:
    """Unforced loop dynamics in (capacitor charge, network state) coordinates."""
    ss = network.realization()
    n = ss.order
    M = np.zeros((n + 1, n + 1))
    M[0, 0] = -ss.D / capacitance
    if n:
        M[0, 1:] = ss.C[0]
        M[1:, 0] = -ss.B[:, 0] / capacitance
        M[1:, 1:] = ss.A
    return M


def physical_eigenvalues(network: CircuitNetwork, M: np.ndarray) -> np.ndarray:
    """Eigenvalues of the loop matrix without the structural zero of a dc-blocking network.

    When Z has a pole at s = 0 (a series capacitor) the charge on that
    capacitor always equals the charge moved through the loop.  The
    realization then carries one conserved combination, an eigenvalue at
    zero that the drive never excites.
    """
    eig = np.linalg.eigvals(M)
    if network.kind != RESISTANCE and network.polynomials()[1][-1] == 0.0 and eig.size > 1:
        drop = int(np.argmin(np.abs(eig)))
        if abs(eig[drop]) <= 1e-9 * np.max(np.abs(eig)):
            eig = np.delete(eig, drop)
    return eig


def _number(value, path, allow_inf=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError("BAD_TYPE", f"expected a number, got {value!r}", path)
    v = float(value)
    if math.isnan(v) or (math.isinf(v) and not allow_inf):
        raise ConfigError("BAD_TYPE", f"expected a finite number, got {value!r}", path)
    return v


def _positive(value, path, allow_inf=False, zero_code="NEGATIVE_PARAMETER") -> float:
    v = _number(value, path, allow_inf)
    if v < 0:
        raise ConfigError("NEGATIVE_PARAMETER", f"must be positive, got {v}", path)
    if v == 0:
        raise ConfigError(zero_code, "must be nonzero", path)
    return v


def _section(raw, name, required=True) -> dict:
    if name not in raw:
        if required:
            raise ConfigError("MISSING_FIELD", f"section [{name}] is required", name)
        return {}
    sec = raw[name]
    if not isinstance(sec, Mapping):
        raise ConfigError("BAD_TYPE", "section must be a table", name)
    unknown = sorted(set(sec) - set(SCHEMA[name]))
    if unknown:
        raise ConfigError("UNKNOWN_KEY", f"unknown key(s) {unknown}", f"{name}.{unknown[0]}")
    out = {}
    for key, (_, required_key, default) in SCHEMA[name].items():
        if key in sec:
            out[key] = sec[key]
        elif required_key:
            raise ConfigError("MISSING_FIELD", "required key is missing", f"{name}.{key}")
        else:
            out[key] = default
    return out


def _network(c: dict) -> CircuitNetwork:
    kind = c["kind"]
    if kind == RESISTANCE:
        if c["R"] is None:
            raise ConfigError("MISSING_FIELD", "resistance network needs R", "circuit.R")
        if c["numerator"] is not None or c["denominator"] is not None:
            raise ConfigError("BAD_TYPE", "numerator/denominator only apply to rational_impedance", "circuit.kind")
        return CircuitNetwork.resistance(_positive(c["R"], "circuit.R", allow_inf=True))
    if kind == RATIONAL:
        for key in ("numerator", "denominator"):
            if c[key] is None:
                raise ConfigError("MISSING_FIELD", "rational network needs both polynomials", f"circuit.{key}")
            if not isinstance(c[key], (list, tuple)):
                raise ConfigError("BAD_TYPE", "expected a list of coefficients", f"circuit.{key}")
            for i, x in enumerate(c[key]):
                _number(x, f"circuit.{key}[{i}]")
        net = CircuitNetwork.rational(c["numerator"], c["denominator"])
        try:
            net.realization()
        except NetworkError as exc:
            raise ConfigError(exc.code, str(exc), "circuit.numerator") from exc
        if not net.is_passive():
            raise ConfigError("NONPASSIVE_NETWORK", "Re Z(iw) < 0 at a sampled frequency", "circuit.numerator")
        return net
    raise ConfigError("BAD_TYPE", f"unknown network kind {kind!r}", "circuit.kind")


def _regime_warnings(pulse: PulseSpec, geom: Geometry, mat: MaterialParams, tau: float, margin: float) -> list[str]:
    out = []
    c_n = K.C_LIGHT / mat.refractive_index
    checks = [
        ("L << c T / n", c_n * pulse.plateau_duration / geom.device_length),
        ("L << C0 R c / n", c_n * tau / geom.device_length),
    ]
    if pulse.transient_duration > 0:
        checks += [
            ("T_tr << C0 R", tau / pulse.transient_duration),
            ("T_tr << T", pulse.plateau_duration / pulse.transient_duration),
        ]
    for name, ratio in checks:
        if ratio < margin:
            out.append(f"REGIME: {name} violated (ratio {ratio:.3g} < margin {margin:g})")
    return out


def _integer_fields(num: NumericsSpec) -> NumericsSpec:
    ints = {k: int(getattr(num, k)) for k in
            ("samples_per_time_constant", "min_segment_samples", "max_samples", "min_steps_per_feature",
             "steps_per_time_constant")}
    return replace(num, **ints)


def derived_quantities(model) -> DerivedQuantities:
    """Derived SI quantities; a pure function of the validated parameters."""
    if isinstance(model, ValidatedModel):
        mat, micro, geom, circ, pulse = model.material, model.microscopic, model.geometry, model.circuit, model.pulse
    else:
        mat, micro, geom, circ, pulse = model
    eps = mat.permittivity
    C0 = eps * geom.device_length
    net = circ.network
    if net.is_open:
        eig = np.array([0.0])
        tau = fastest = math.inf
    else:
        eig = physical_eigenvalues(net, loop_matrix(net, C0))
        if net.kind == RESISTANCE:
            tau = fastest = C0 * net.R
        else:
            tau = 1.0 / np.min(np.abs(eig.real))
            fastest = 1.0 / np.max(np.abs(eig))
    hw = K.HBAR * pulse.carrier_angular_frequency
    return DerivedQuantities(
        permittivity=eps,
        capacitance=C0,
        relaxation_time=tau,
        fastest_time=fastest,
        plateau_intensity=K.EPS0 * K.C_LIGHT * mat.refractive_index * pulse.field_amplitude**2 / 2.0,
        equilibrium_charge=eps * circ.bias_field,
        chi2_dc=mat.chi2_dc,
        chi2_eo=None if mat.chi2_dc is None else 4.0 * mat.chi2_dc,
        photon_energy=hw,
        detuning=None if micro is None else micro.exciton_energy - hw,
        loop_eigenvalues=tuple(complex(x) for x in eig),
    )


def validate_config(raw: Mapping) -> ValidatedModel:
    """Check a raw nested mapping and build an immutable ``ValidatedModel``.

    Raises ``ConfigError`` naming the offending field.  Marginal regime
    assumptions are reported in ``model.warnings`` rather than raised.
    """
    if not isinstance(raw, Mapping):
        raise ConfigError("BAD_TYPE", "configuration must be a mapping")
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ConfigError("UNKNOWN_KEY", f"unknown section(s) {unknown}", unknown[0])

    m = _section(raw, "material")
    mat = MaterialParams(
        relative_permittivity=_number(m["relative_permittivity"], "material.relative_permittivity"),
        refractive_index=_number(m["refractive_index"], "material.refractive_index"),
        chi2_dc=None if m["chi2_dc"] is None else _number(m["chi2_dc"], "material.chi2_dc"),
        fill_factor=_positive(m["fill_factor"], "material.fill_factor"),
    )
    if mat.relative_permittivity < 1:
        raise ConfigError("OUT_OF_RANGE", "relative permittivity must be >= 1", "material.relative_permittivity")
    if mat.refractive_index < 1:
        raise ConfigError("OUT_OF_RANGE", "refractive index must be >= 1", "material.refractive_index")
    if mat.fill_factor > 1:
        raise ConfigError("OUT_OF_RANGE", "fill factor must lie in (0, 1]", "material.fill_factor")

    micro = None
    if "microscopic" in raw:
        x = _section(raw, "microscopic")
        micro = MicroscopicParams(**{k: _positive(v, f"microscopic.{k}") for k, v in x.items()})
    if mat.chi2_dc is None and micro is None:
        raise ConfigError("MISSING_FIELD", "chi2_dc is required without a [microscopic] section", "material.chi2_dc")

    g = _section(raw, "geometry")
    geom = Geometry(
        cross_section=_positive(g["cross_section"], "geometry.cross_section", zero_code="ZERO_GEOMETRY"),
        device_length=_positive(g["device_length"], "geometry.device_length", zero_code="ZERO_GEOMETRY"),
    )

    c = _section(raw, "circuit")
    network = _network(c)
    F0 = _positive(c["bias_field"], "circuit.bias_field")
    V0 = geom.cross_section * F0 if c["battery_voltage"] is None else _number(c["battery_voltage"], "circuit.battery_voltage")
    circ = CircuitParams(network=network, bias_field=F0, battery_voltage=V0)

    p = _section(raw, "pulse")
    shape = p["envelope_shape"]
    if shape not in ENVELOPE_SHAPES:
        raise ConfigError("BAD_TYPE", f"envelope_shape must be one of {ENVELOPE_SHAPES}", "pulse.envelope_shape")
    E = _number(p["field_amplitude"], "pulse.field_amplitude")
    if E < 0:
        raise ConfigError("NEGATIVE_PARAMETER", "must be >= 0", "pulse.field_amplitude")
    T_tr = _number(p["transient_duration"], "pulse.transient_duration")
    if T_tr < 0:
        raise ConfigError("NEGATIVE_PARAMETER", "must be >= 0", "pulse.transient_duration")
    if T_tr == 0 and shape != "raised_cosine":
        raise ConfigError("OUT_OF_RANGE", "zero transient duration needs envelope_shape = raised_cosine", "pulse.transient_duration")
    table_t: tuple = ()
    table_e2: tuple = ()
    if shape == "tabulated":
        for key in ("table_time", "table_field_squared"):
            if p[key] is None:
                raise ConfigError("MISSING_FIELD", "tabulated envelope needs samples", f"pulse.{key}")
        table_t = tuple(_number(v, "pulse.table_time") for v in p["table_time"])
        table_e2 = tuple(_number(v, "pulse.table_field_squared") for v in p["table_field_squared"])
        if len(table_t) != len(table_e2) or len(table_t) < 4:
            raise ConfigError("BAD_TYPE", "need >= 4 (time, E^2) pairs of equal length", "pulse.table_time")
        if np.any(np.diff(table_t) <= 0):
            raise ConfigError("BAD_TYPE", "sample times must increase", "pulse.table_time")
        if min(table_e2) < 0:
            raise ConfigError("NEGATIVE_PARAMETER", "E^2 samples must be >= 0", "pulse.table_field_squared")
    pulse = PulseSpec(
        carrier_angular_frequency=_positive(p["carrier_angular_frequency"], "pulse.carrier_angular_frequency"),
        field_amplitude=E,
        plateau_duration=_positive(p["plateau_duration"], "pulse.plateau_duration"),
        transient_duration=T_tr,
        envelope_shape=shape,
        table_time=table_t,
        table_field_squared=table_e2,
    )

    nraw = _section(raw, "numerics", required=False) or {k: d for k, (_, _, d) in SCHEMA["numerics"].items()}
    numerics = NumericsSpec(**{k: _positive(v, f"numerics.{k}") for k, v in nraw.items()})
    numerics = _integer_fields(numerics)

    if micro is not None and micro.exciton_energy - K.HBAR * pulse.carrier_angular_frequency <= 0:
        raise ConfigError("OUT_OF_RANGE", "detuning exciton_energy - hbar*omega must be > 0", "microscopic.exciton_energy")

    derived = derived_quantities((mat, micro, geom, circ, pulse))
    if not network.is_open and np.max(np.real(derived.loop_eigenvalues)) >= 0:
        raise ConfigError("UNSTABLE_NETWORK", "closed loop has eigenvalues with Re >= 0", "circuit.kind")

    warns = _regime_warnings(pulse, geom, mat, derived.relaxation_time, numerics.regime_margin)
    if c["battery_voltage"] is not None and not math.isclose(V0, geom.cross_section * F0, rel_tol=1e-9):
        warns.append("battery_voltage differs from cross_section * bias_field")
    return ValidatedModel(mat, micro, geom, circ, pulse, numerics, derived, tuple(warns), copy.deepcopy(dict(raw)))


def load_config(path: str | Path) -> ValidatedModel:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return validate_config(raw)


def read_config_bytes(path: str | Path) -> tuple[bytes, dict]:
    data = Path(path).read_bytes()
    return data, tomllib.loads(data.decode("utf-8"))
