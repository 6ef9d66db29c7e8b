"""Discrete-time superheterodyne and homodyne receive chains.

The sensed signal double-sideband modulates the carrier, receiver noise is
added before the first mixer, and demodulation ends in a lock-in stage
(phase-locked reference, I/Q products, low-pass filter).

Two simulation modes are available:

``full``
    Real-valued samples at ``sample_rate > 4 * if_freq``. The RF stage is
    represented by a stand-in carrier placed so that both the wanted band and
    its image fall inside the simulated bandwidth; the heterodyne image noise
    then appears without being added explicitly.
``envelope``
    Complex baseband at ``sample_rate``. The heterodyne image band is an
    extra independent complex noise source of the same density.

Both modes use 4th-order Butterworth responses: a band-pass of width
``if_bandwidth`` around the IF (its low-pass equivalent of cutoff
``if_bandwidth / 2`` in envelope mode and on the homodyne path) and a
low-pass at ``lockin_lpf_cutoff``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import DomainError, SampleRateError
from .trace import Trace

FULL = "full"
ENVELOPE = "envelope"


@dataclass(frozen=True)
class ReceiverConfig:
    sample_rate: float
    carrier_freq: float = 1e7
    if_freq: float = 1e7
    if_bandwidth: float = 3e3
    lockin_lpf_cutoff: float = 1.5e3
    noise_density: float = 5e-9
    shielding_rejection: float = 40.0
    phase_offset: float = 0.0
    mode: str = ENVELOPE

    def __post_init__(self):
        if self.mode not in (FULL, ENVELOPE):
            raise DomainError(f"unknown receiver mode {self.mode!r}")
        if min(self.sample_rate, self.carrier_freq, self.if_freq, self.if_bandwidth,
               self.lockin_lpf_cutoff) <= 0:
            raise DomainError("receiver frequencies must be positive")
        if not self.if_bandwidth < self.if_freq:
            raise DomainError("IF bandwidth must be below the IF")
        if self.noise_density < 0:
            raise DomainError("noise density must be non-negative")
        nyquist = 0.5 * self.sample_rate
        if self.lockin_lpf_cutoff >= nyquist:
            raise SampleRateError("lock-in cutoff must lie below Nyquist")
        if 0.5 * self.if_bandwidth >= nyquist:
            raise SampleRateError("IF half-bandwidth must lie below Nyquist")
        if self.mode == FULL:
            if not self.sample_rate > 4.0 * self.if_freq:
                raise SampleRateError("full-rate mode needs sample_rate > 4 * if_freq")
            if self.image_freq <= self.if_bandwidth:
                raise SampleRateError("sample rate too close to 4 * if_freq to place the image band")

    @property
    def image_freq(self):
        """Stand-in image-band centre used by full-rate mode (Hz)."""
        return 0.5 * (0.5 * self.sample_rate - 2.0 * self.if_freq)

    @property
    def rf_freq(self):
        """Stand-in RF carrier used by full-rate mode (Hz)."""
        return 2.0 * self.if_freq + self.image_freq

    @property
    def lo_freq(self):
        return self.rf_freq - self.if_freq


@dataclass
class DemodOutput:
    magnitude_trace: Trace
    phase_trace: Trace
    iq: np.ndarray

    def to_csv(self, fh):
        fh.write("t_s,mag_v,phase_rad\n")
        for t, m, p in zip(self.magnitude_trace.times, self.magnitude_trace.values,
                           self.phase_trace.values):
            fh.write(f"{float(t)!r},{float(m)!r},{float(p)!r}\n")


def _check_input(trace, cfg):
    if trace.sample_rate != cfg.sample_rate:
        raise SampleRateError(
            f"input sampled at {trace.sample_rate:g} Hz, receiver expects {cfg.sample_rate:g} Hz"
        )


def _lowpass(cutoff, fs, order):
    return signal.butter(order, cutoff, btype="low", fs=fs, output="sos")


def _filter(sos, x):
    if np.iscomplexobj(x):
        return signal.sosfilt(sos, x.real) + 1j * signal.sosfilt(sos, x.imag)
    return signal.sosfilt(sos, x)


def _finish(iq, trace):
    mag = np.abs(iq)
    phase = np.angle(iq)
    return DemodOutput(trace.with_values(mag), trace.with_values(phase), iq)


def _complex_noise(rng, n, sigma):
    return sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def _envelope_chain(trace, cfg, seed, image):
    fs = cfg.sample_rate
    n = len(trace)
    rng = np.random.default_rng(seed)
    sigma = cfg.noise_density * math.sqrt(fs)
    x = trace.values.astype(complex) + _complex_noise(rng, n, sigma)
    if image:
        x = x + _complex_noise(rng, n, sigma)
    x = _filter(_lowpass(0.5 * cfg.if_bandwidth, fs, 2), x)
    x = x * np.exp(-1j * cfg.phase_offset)
    return _filter(_lowpass(cfg.lockin_lpf_cutoff, fs, 4), x)


def _rf_samples(trace, cfg, rng):
    fs = cfg.sample_rate
    t = np.arange(len(trace)) / fs
    carrier = np.cos(2.0 * math.pi * cfg.rf_freq * t)
    noise = cfg.noise_density * math.sqrt(0.5 * fs) * rng.standard_normal(len(trace))
    return t, trace.values * carrier + noise


def _lockin(x, t, freq, cfg):
    arg = 2.0 * math.pi * freq * t + cfg.phase_offset
    iq = 2.0 * x * np.cos(arg) - 2j * x * np.sin(arg)
    return iq


def heterodyne_chain(trace, cfg, seed):
    """Superheterodyne receive chain; returns lock-in magnitude and phase."""
    _check_input(trace, cfg)
    if cfg.mode == ENVELOPE:
        return _finish(_envelope_chain(trace, cfg, seed, image=True), trace)
    fs = cfg.sample_rate
    rng = np.random.default_rng(seed)
    t, x = _rf_samples(trace, cfg, rng)
    x = 2.0 * x * np.cos(2.0 * math.pi * cfg.lo_freq * t)
    band = (cfg.if_freq - 0.5 * cfg.if_bandwidth, cfg.if_freq + 0.5 * cfg.if_bandwidth)
    x = signal.sosfilt(signal.butter(2, band, btype="bandpass", fs=fs, output="sos"), x)
    iq = _filter(_lowpass(cfg.lockin_lpf_cutoff, fs, 4), _lockin(x, t, cfg.if_freq, cfg))
    return _finish(iq, trace)


def homodyne_chain(trace, cfg, seed):
    """Direct-conversion reference chain with the same filters and no image band."""
    _check_input(trace, cfg)
    if cfg.mode == ENVELOPE:
        return _finish(_envelope_chain(trace, cfg, seed, image=False), trace)
    fs = cfg.sample_rate
    rng = np.random.default_rng(seed)
    t, x = _rf_samples(trace, cfg, rng)
    iq = _lockin(x, t, cfg.rf_freq, cfg)
    iq = _filter(_lowpass(0.5 * cfg.if_bandwidth, fs, 2), iq)
    iq = _filter(_lowpass(cfg.lockin_lpf_cutoff, fs, 4), iq)
    return _finish(iq, trace)


def shielding_attenuation(interferer, cfg):
    """Scale an interfering trace by the enclosure rejection (dB, amplitude)."""
    return interferer.with_values(interferer.values * 10.0 ** (-cfg.shielding_rejection / 20.0))


def ensemble_snr_db(chain, trace, cfg, seeds, settle):
    """Output SNR (dB) of ``chain`` over a seed ensemble.

    Signal power comes from a noiseless run; noise power is the mean power of
    the difference between noisy and noiseless outputs. Samples before
    ``settle`` seconds are ignored.
    """
    quiet = ReceiverConfig(**{**cfg.__dict__, "noise_density": 0.0})
    i0 = int(round(settle * cfg.sample_rate))
    clean = chain(trace, quiet, 0).iq[i0:]
    p_sig = np.mean(np.abs(clean) ** 2)
    p_noise = np.mean([np.mean(np.abs(chain(trace, cfg, s).iq[i0:] - clean) ** 2) for s in seeds])
    return 10.0 * math.log10(p_sig / p_noise)
