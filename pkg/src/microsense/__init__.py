"""Simulation and analysis of microwave detection of particles over coplanar electrodes."""

from .analysis import detect_peaks, estimate_bioparticle_voltage, snr_estimate, sweep_frequency
from .dielectrics import ComplexPermittivity, DebyeParams, MaterialTable, clausius_mossotti
from .electrodes import ElectrodeGeometry, GeometryKind, field_at, field_map, hotspot_metrics
from .receiver import ReceiverConfig, heterodyne_chain, homodyne_chain
from .trace import Trace

__version__ = "0.1.0"
