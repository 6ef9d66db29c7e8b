"""Particle kinematics in the channel and the capacitance pulses they produce.

The particle moves along a straight line at fixed height with the channel
centerline speed (Poiseuille profile, peak = 2 x mean). Its signal is
``transducer_gain * dC(x(t))`` with dC from the sphere-in-field expression
evaluated with the electrode field magnitude; traces are AC-coupled.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.constants import epsilon_0

from .dielectrics import ComplexPermittivity, clausius_mossotti
from .electrodes import delta_capacitance, edge_positions, exclusion_radius, field_values
from .errors import DomainError, ProximityError
from .trace import Trace

SQUARE = "square"
CIRCULAR = "circular"


@dataclass(frozen=True)
class ChannelSpec:
    hydraulic_diameter: float
    cross_section: str = SQUARE
    centerline_height: float = None

    def __post_init__(self):
        if not self.hydraulic_diameter > 0:
            raise DomainError("hydraulic diameter must be positive")
        if self.cross_section not in (SQUARE, CIRCULAR):
            raise DomainError(f"unknown cross section {self.cross_section!r}")
        if self.centerline_height is None:
            object.__setattr__(self, "centerline_height", 0.5 * self.hydraulic_diameter)
        if not 0 < self.centerline_height <= self.hydraulic_diameter:
            raise DomainError("centerline height must lie in (0, hydraulic diameter]")

    @property
    def area(self):
        d = self.hydraulic_diameter
        return d * d if self.cross_section == SQUARE else math.pi * d * d / 4.0


@dataclass(frozen=True)
class FlowConditions:
    flow_rate: float
    concentration: float
    detection_fraction: float = 1.0

    def __post_init__(self):
        if not self.flow_rate > 0:
            raise DomainError("flow rate must be positive")
        if self.concentration < 0:
            raise DomainError("concentration must be non-negative")
        if not 0 < self.detection_fraction <= 1:
            raise DomainError("detection fraction must lie in (0, 1]")

    @property
    def arrival_rate(self):
        return self.concentration * self.flow_rate * self.detection_fraction


@dataclass(frozen=True)
class ParticleTransit:
    radius: float
    permittivity: ComplexPermittivity
    height: float
    velocity: float
    sample_rate: float

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError("particle radius must be positive")
        if self.height < self.radius:
            raise DomainError("particle height must be at least its radius")
        if not (self.velocity > 0 and self.sample_rate > 0):
            raise DomainError("velocity and sample rate must be positive")


def mean_velocity(ch, q_flow):
    return q_flow / ch.area


def centerline_velocity(ch, q_flow):
    return 2.0 * mean_velocity(ch, q_flow)


def sensing_halfwidth(geom, height):
    """Half-length of the path segment over which the field is evaluated."""
    edges = edge_positions(geom)
    return 20.0 * (edges.max() - edges.min() + height)


def pulse_profile(geom, p, f, eps_m, v0, x):
    """Capacitance change (F) of particle ``p`` at positions ``x`` along its path."""
    if p.height < exclusion_radius(geom):
        raise ProximityError("particle height lies inside an edge exclusion zone", p.height)
    e = field_values(geom, x, p.height, f, eps_m.eps_real, v0, True)
    k_cm = clausius_mossotti(p.permittivity, eps_m)
    return delta_capacitance(p.radius, eps_m, k_cm, np.abs(e) / v0)


def _add_pulse(out, geom, p, f, eps_m, v0, gain, t_center, fs):
    half = sensing_halfwidth(geom, p.height) / p.velocity
    i0 = max(int(math.floor((t_center - half) * fs)), 0)
    i1 = min(int(math.ceil((t_center + half) * fs)) + 1, out.size)
    if i1 <= i0:
        return
    t = np.arange(i0, i1) / fs
    out[i0:i1] += gain * pulse_profile(geom, p, f, eps_m, v0, p.velocity * (t - t_center))


def medium_noise_density(geom, height, f, eps_m, coupling, n=4001):
    """Capacitance-equivalent noise density (F/sqrt(Hz)) of medium fluctuations.

    Permittivity fluctuations along the particle path perturb the capacitance
    through the same |E/V0|^2 weighting as the particle, so the density is
    ``coupling * eps0 * integral(|E/V0|^2 dx)`` at the particle height, with
    ``coupling`` in m^2/sqrt(Hz).
    """
    if coupling < 0:
        raise DomainError("noise coupling must be non-negative")
    half = sensing_halfwidth(geom, height)
    x = np.linspace(-half, half, n)
    e = field_values(geom, x, height, f, eps_m.eps_real, 1.0, True)
    return coupling * epsilon_0 * float(integrate.trapezoid(np.abs(e) ** 2, x))


def synthesize_pulse(geom, p, f, eps_m, v0, transducer_gain, span, t_center=None):
    """Single-particle trace of length ``span`` seconds, AC-coupled."""
    fs = p.sample_rate
    n = int(round(span * fs))
    if n < 2:
        raise DomainError("span too short for the sample rate")
    if t_center is None:
        t_center = 0.5 * (n - 1) / fs
    out = np.zeros(n)
    _add_pulse(out, geom, p, f, eps_m, v0, transducer_gain, t_center, fs)
    return Trace(out - out.mean(), fs)


def arrival_times(fc, duration, seed):
    """Homogeneous Poisson arrivals in [0, duration), reproducible from ``seed``."""
    if not duration > 0:
        raise DomainError("duration must be positive")
    rate = fc.arrival_rate
    if rate == 0:
        return []
    rng = np.random.default_rng(seed)
    chunk = int(rate * duration + 5.0 * math.sqrt(rate * duration) + 16)
    times = []
    t = 0.0
    while True:
        gaps = rng.exponential(1.0 / rate, size=chunk)
        cum = t + np.cumsum(gaps)
        inside = cum[cum < duration]
        times.extend(inside.tolist())
        if inside.size < cum.size:
            return times
        t = cum[-1]


def pulse_train(geom, p, fc, f, eps_m, v0, transducer_gain, duration, seed, arrivals=None):
    """Linear superposition of single-particle pulses at Poisson arrival times.

    ``arrivals`` overrides the seeded arrival process.
    """
    fs = p.sample_rate
    n = int(round(duration * fs))
    if n < 2:
        raise DomainError("duration too short for the sample rate")
    if arrivals is None:
        arrivals = arrival_times(fc, duration, seed)
    out = np.zeros(n)
    for t_c in arrivals:
        _add_pulse(out, geom, p, f, eps_m, v0, transducer_gain, t_c, fs)
    return Trace(out - out.mean(), fs)


def calibrate_transducer_gain(geom, p, f, eps_m, v0, target_peak, response=1.0):
    """Gain (V/F) that makes the single-pulse peak magnitude equal ``target_peak``.

    ``response`` is any extra frequency-dependent factor applied downstream.
    """
    x = np.linspace(-sensing_halfwidth(geom, p.height), sensing_halfwidth(geom, p.height), 20001)
    peak = np.max(np.abs(pulse_profile(geom, p, f, eps_m, v0, x)))
    return target_peak / (peak * response)
