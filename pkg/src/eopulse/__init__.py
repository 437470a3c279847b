"""Electrical-pulse generation by virtual photo-excitation of an electro-optic capacitor.

An optical pulse polarizes the electro-optic layer of a biased capacitor; the
external circuit answers with a charge transient whose field shifts the
refractive index and red-shifts the light.  The package integrates the charge
dynamics, computes the chirp, and audits the energy and photon-number ledger.
"""

from .circuit import ChargeTrajectory, integrate_circuit, sigma_analytic
from .envelope import Envelope
from .errors import ConfigError, EOPulseError, NetworkError, RegimeWarning, SimulationError
from .exciton import check_adiabaticity, evolve_two_level, extract_chi2
from .ledger import balance_report, battery_work, joule_energy, optical_energy_loss
from .model import ValidatedModel, derived_quantities, load_config, validate_config
from .network import CircuitNetwork, realize_impedance
from .optics import apply_shift_to_pulse, frequency_shift, refractive_index_shift
from .pipeline import simulate, simulate_microscopic

__version__ = "0.1.0"

__all__ = [
    "ChargeTrajectory", "CircuitNetwork", "ConfigError", "EOPulseError", "Envelope", "NetworkError",
    "RegimeWarning", "SimulationError", "ValidatedModel", "apply_shift_to_pulse", "balance_report",
    "battery_work", "check_adiabaticity", "derived_quantities", "evolve_two_level", "extract_chi2",
    "frequency_shift", "integrate_circuit", "joule_energy", "load_config", "optical_energy_loss",
    "realize_impedance", "refractive_index_shift", "sigma_analytic", "simulate", "simulate_microscopic",
    "validate_config",
]
