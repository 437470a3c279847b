import math

import pytest

from eopulse import constants as K
from eopulse.model import validate_config
from eopulse.scenarios import reference_config, resistance_for_time_constant, underdamped_rlc_config

CHI2 = 3.43e-9
TAU = 1e-12

ACCEPTANCE_LINES = []


def phenomenological_config(**pulse):
    raw = reference_config()
    raw.pop("microscopic")
    raw["material"]["chi2_dc"] = CHI2
    raw["pulse"]["transient_duration"] = 0.0
    raw["pulse"].update(pulse)
    return raw


@pytest.fixture
def raw_ideal():
    return phenomenological_config()


@pytest.fixture
def ideal(raw_ideal):
    """Rectangular pulse into a pure resistance, T = C0 R = 1 ps."""
    return validate_config(raw_ideal)


@pytest.fixture
def smooth(raw_ideal):
    raw_ideal["pulse"]["transient_duration"] = 0.05 * TAU
    return validate_config(raw_ideal)


@pytest.fixture
def rlc():
    raw = underdamped_rlc_config()
    raw.pop("microscopic")
    return validate_config(raw)


@pytest.fixture
def micro_raw():
    """Weak-field, slowly ramped microscopic device (Delta = 20 meV, gaussian ramps)."""
    raw = reference_config()
    delta = 20.0 * K.MEV
    raw["microscopic"]["exciton_energy"] = K.HBAR * raw["pulse"]["carrier_angular_frequency"] + delta
    raw["pulse"].update(field_amplitude=raw["pulse"]["field_amplitude"] / 4, plateau_duration=2e-12,
                        transient_duration=6e-12, envelope_shape="gaussian")
    return raw


@pytest.fixture
def micro(micro_raw):
    return validate_config(micro_raw)


def resistance(tau):
    return resistance_for_time_constant(tau)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def rel(a, b):
    return abs(a - b) / abs(b) if b else abs(a)


isclose = math.isclose
