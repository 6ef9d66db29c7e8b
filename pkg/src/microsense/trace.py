"""Uniformly sampled time series shared by the transit, receiver and analysis code."""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass
class Trace:
    values: np.ndarray
    sample_rate: float
    t0: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 1:
            raise DomainError("trace values must be one-dimensional")
        if not self.sample_rate > 0:
            raise DomainError("sample rate must be positive")

    def __len__(self):
        return self.values.size

    @property
    def dt(self):
        return 1.0 / self.sample_rate

    @property
    def times(self):
        return self.t0 + np.arange(self.values.size) / self.sample_rate

    def with_values(self, values):
        return Trace(values, self.sample_rate, self.t0)

    def to_csv(self, fh):
        fh.write("t_s,v_volts\n")
        for t, v in zip(self.times, self.values):
            fh.write(f"{float(t)!r},{float(v)!r}\n")

    @classmethod
    def from_csv(cls, fh):
        """Read a ``t_s,v_volts`` file; the sample rate comes from the time column."""
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["t_s", "v_volts"]:
            raise DomainError("trace CSV header must be t_s,v_volts")
        rows = np.array([[float(a), float(b)] for a, b in reader if a], dtype=float)
        if rows.shape[0] < 2:
            raise DomainError("trace CSV needs at least two samples")
        t = rows[:, 0]
        dt = np.diff(t)
        if np.any(dt <= 0) or np.ptp(dt) > 1e-6 * dt.mean():
            raise DomainError("trace CSV must be uniformly sampled")
        fs = (rows.shape[0] - 1) / (t[-1] - t[0])
        return cls(rows[:, 1], fs, float(t[0]))
