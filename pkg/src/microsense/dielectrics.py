"""Complex permittivity models, tabulated materials and particle polarization.

All permittivities are relative and follow eps* = eps' - j eps'' (time
dependence exp(+j w t)), so lossy media have eps'' >= 0.
"""

import csv
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.constants import epsilon_0

from .errors import DomainError, NotFoundError, RangeError, SingularityError

MATERIALS_ENV = "MICROSENSE_MATERIALS"
MATERIAL_HEADER = ["material", "f_hz", "eps_real", "eps_imag", "d_min_m", "d_max_m"]


@dataclass(frozen=True)
class ComplexPermittivity:
    eps_real: float
    eps_imag: float = 0.0

    @classmethod
    def from_complex(cls, value):
        value = complex(value)
        return cls(value.real, -value.imag)

    @property
    def value(self):
        """The permittivity as a Python complex, eps' - j eps''."""
        return complex(self.eps_real, -self.eps_imag)

    def __complex__(self):
        return self.value


@dataclass(frozen=True)
class DebyeParams:
    eps_static: float
    eps_inf: float
    tau: float
    sigma: float = 0.0

    def __post_init__(self):
        if not (self.eps_static >= self.eps_inf > 0):
            raise DomainError("Debye parameters need eps_static >= eps_inf > 0")
        if self.tau <= 0:
            raise DomainError("Debye relaxation time must be positive")
        if self.sigma < 0:
            raise DomainError("conductivity must be non-negative")


def debye_permittivity(p, f):
    """Single-pole Debye medium with static conductivity, evaluated at ``f`` Hz."""
    if not f > 0:
        raise DomainError(f"frequency must be positive, got {f!r}")
    w = 2.0 * np.pi * f
    eps = p.eps_inf + (p.eps_static - p.eps_inf) / (1.0 + 1j * w * p.tau)
    eps -= 1j * p.sigma / (w * epsilon_0)
    return ComplexPermittivity.from_complex(eps)


@dataclass(frozen=True)
class MaterialRecord:
    name: str
    freqs: tuple
    eps_real: tuple
    eps_imag: tuple
    size_range: tuple

    def at_node(self, i):
        return ComplexPermittivity(self.eps_real[i], self.eps_imag[i])


class MaterialTable:
    """Immutable table of tabulated particle permittivities.

    Lookups interpolate eps' and eps'' independently and linearly in
    log10(f) between bracketing nodes; no extrapolation.
    """

    def __init__(self, records):
        self._records = {r.name: r for r in records}

    @classmethod
    def from_rows(cls, rows):
        grouped = {}
        for name, f, er, ei, dmin, dmax in rows:
            grouped.setdefault(name, []).append((f, er, ei, dmin, dmax))
        records = []
        for name, entries in grouped.items():
            freqs = [e[0] for e in entries]
            if any(b <= a for a, b in zip(freqs, freqs[1:])):
                raise DomainError(f"frequencies for {name!r} must be strictly increasing")
            records.append(MaterialRecord(
                name=name,
                freqs=tuple(freqs),
                eps_real=tuple(e[1] for e in entries),
                eps_imag=tuple(e[2] for e in entries),
                size_range=(entries[0][3], entries[0][4]),
            ))
        return cls(records)

    @classmethod
    def load(cls, path=None):
        """Load a table from CSV.

        Resolution order: explicit ``path``, the ``MICROSENSE_MATERIALS``
        environment variable, then the bundled table.
        """
        if path is None:
            path = os.environ.get(MATERIALS_ENV)
        if path is None:
            text = resources.files("microsense").joinpath("data/materials.csv").read_text("utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        reader = csv.reader(text.splitlines())
        header = next(reader, None)
        if header != MATERIAL_HEADER:
            raise DomainError(f"material table header must be {','.join(MATERIAL_HEADER)}")
        rows = []
        for line in reader:
            if not line:
                continue
            name, f, er, ei, dmin, dmax = line
            rows.append((name, float(f), float(er), float(ei), float(dmin), float(dmax)))
        return cls.from_rows(rows)

    @property
    def names(self):
        return sorted(self._records)

    def record(self, name):
        try:
            return self._records[name]
        except KeyError:
            raise NotFoundError(f"unknown material {name!r}") from None

    def lookup(self, name, f):
        rec = self.record(name)
        freqs = rec.freqs
        if not (freqs[0] <= f <= freqs[-1]):
            raise RangeError(
                f"{f:g} Hz outside tabulated range [{freqs[0]:g}, {freqs[-1]:g}] for {name!r}"
            )
        i = int(np.searchsorted(freqs, f))
        if freqs[i] == f:
            return rec.at_node(i)
        lo, hi = i - 1, i
        t = (np.log10(f) - np.log10(freqs[lo])) / (np.log10(freqs[hi]) - np.log10(freqs[lo]))
        er = rec.eps_real[lo] + t * (rec.eps_real[hi] - rec.eps_real[lo])
        ei = rec.eps_imag[lo] + t * (rec.eps_imag[hi] - rec.eps_imag[lo])
        return ComplexPermittivity(float(er), float(ei))


def material_lookup(table, name, f):
    return table.lookup(name, f)


def clausius_mossotti(eps_p, eps_m):
    """Complex Clausius-Mossotti factor (eps_p - eps_m) / (eps_p + 2 eps_m)."""
    p = complex(eps_p)
    m = complex(eps_m)
    den = p + 2.0 * m
    if abs(den) < 1e-30:
        raise SingularityError("Clausius-Mossotti denominator vanishes")
    return (p - m) / den


def polarizability(a, eps_p):
    """Sphere polarizability 4 pi eps0 eps_p a^3 in F m^2 (complex)."""
    if not a > 0:
        raise DomainError(f"particle radius must be positive, got {a!r}")
    return 4.0 * np.pi * epsilon_0 * complex(eps_p) * a**3
