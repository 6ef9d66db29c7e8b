"""Coplanar electrode geometries and their near-field distributions.

Field model
-----------
Every geometry is a sum of strip-pair terms. Term ``n`` sees the point
(x, z) through a local coordinate ``X_n = s_n * x - o_n`` (``s_n = +-1``)
and the normalized complex position ``zeta = (X_n + j z) / (g / 2)``. The
arccos potential of the pair, ``W_n = V0 - (2 V0 / pi) arccos(zeta)``, gives
the layout coordinate ``l_n = W_n / (2 V0) = 1/2 - arccos(zeta) / pi``. The
field of a term is the derivative of ``E_W * F(l_n)`` with respect to the
physical position, where ``E_W = V0 / (2 K(q^2))`` and
``F'(l) = 1 / sqrt((1 - l^2)(1 - q^2 l^2))``::

    E_n = E_W * F'(l_n) * dl_n/dX_n * cos(k (r - shift_n))

with ``dl/dX = (2 / (pi g)) / sqrt(1 - zeta^2)``, ``r = sqrt(x^2 + z^2)`` and
``k = 2 pi sqrt(eps'_m) / lambda0``; the cosine factor is the retardation
correction and is dropped when retardation is off. Complex term values are
summed and the magnitude of the sum is reported.

Positions within ``g / 100`` of any electrode edge are excluded: samples
there raise :class:`ProximityError` (point evaluation) or are flagged
(maps), never clamped.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as C0
from scipy.constants import epsilon_0, mu_0

from .errors import (
    DomainError,
    EmptyMapError,
    ProximityError,
    RangeError,
    UndefinedMetricsError,
)
from .specfun import carccos, ellipk

EXCLUSION_FRACTION = 0.01
RETARDATION_RATIO = 0.01
DEFAULT_THRESHOLD = math.exp(-1.0)


class GeometryKind(str, enum.Enum):
    PP = "PP"
    ID = "ID"
    DR = "DR"


@dataclass(frozen=True)
class ElectrodeGeometry:
    """Coplanar electrode layout; lengths in meters.

    ``w`` is the strip width (disk and ring width for DR), ``g`` the gap and
    ``pairs`` the ID term index bound N (terms n = -N..N).
    """

    kind: GeometryKind
    w: float
    g: float
    pairs: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", GeometryKind(self.kind))
        if not (self.w > 0 and self.g > 0):
            raise DomainError("electrode width and gap must be positive")
        if self.pairs < 0 or int(self.pairs) != self.pairs:
            raise DomainError("pairs must be a non-negative integer")
        if self.kind is not GeometryKind.ID and self.pairs:
            raise DomainError("pairs only applies to ID electrodes")

    @property
    def pitch(self):
        return self.w + self.g

    @property
    def overall_width(self):
        edges = edge_positions(self)
        return float(edges.max() - edges.min())


def layout_ratio(geom):
    """q = g / (g + 2 w)."""
    return geom.g / (geom.g + 2.0 * geom.w)


def id_term(n, pitch):
    """(sign, offset, retardation shift) of ID term ``n``.

    The local coordinate is ``sign * X - offset``; the four parity/sign cases
    are kept literally.
    """
    if n % 2 == 0:
        if n >= 0:
            return 1.0, n * pitch, n * pitch
        return 1.0, (n + 1) * pitch, n * pitch
    if n > 0:
        return -1.0, (n - 1) * pitch, n * pitch
    return -1.0, n * pitch, n * pitch


def field_terms(geom):
    """List of (sign, offset, retardation shift) for every term of ``geom``."""
    if geom.kind is GeometryKind.PP:
        return [(1.0, 0.0, 0.0)]
    if geom.kind is GeometryKind.ID:
        return [id_term(n, geom.pitch) for n in range(-geom.pairs, geom.pairs + 1)]
    half = 0.5 * geom.pitch
    return [(-1.0, half, -half), (1.0, half, half)]


def edge_positions(geom):
    """Sorted unique x positions of all electrode edges on the z = 0 plane."""
    local = np.array([-geom.g / 2 - geom.w, -geom.g / 2, geom.g / 2, geom.g / 2 + geom.w])
    xs = [sign * (local + off) for sign, off, _ in field_terms(geom)]
    return np.unique(np.round(np.concatenate(xs), 15))


def exclusion_radius(geom):
    return EXCLUSION_FRACTION * geom.g


def edge_distance(geom, x, z):
    """Distance from (x, z) to the nearest electrode edge."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    edges = edge_positions(geom)
    dx = x[..., None] - edges
    return np.sqrt(np.min(dx**2, axis=-1) + z**2)


def wavelength(f, eps_m_real=1.0):
    """Wavelength in a medium of relative permittivity ``eps_m_real``."""
    return C0 / (f * math.sqrt(eps_m_real))


def retardation_threshold(f, eps_m_real):
    """Distance above which retardation must be accounted for (r / lambda > 0.01)."""
    return RETARDATION_RATIO * wavelength(f, eps_m_real)


def retardation_required(r, f, eps_m_real):
    if r < 0 or not f > 0:
        raise DomainError("retardation_required needs r >= 0 and f > 0")
    return bool(r > retardation_threshold(f, eps_m_real))


def _term_values(geom, x, z, f, eps_m_real, v0, retardation):
    """Complex contribution of every term, shape (n_terms,) + broadcast(x, z)."""
    q = layout_ratio(geom)
    e_w = v0 / (2.0 * ellipk(q * q))
    half_gap = 0.5 * geom.g
    r = np.hypot(x, z)
    k = 2.0 * math.pi * math.sqrt(eps_m_real) * f / C0
    out = []
    for sign, off, shift in field_terms(geom):
        zeta = (sign * x - off + 1j * z) / half_gap
        l = 0.5 - carccos(zeta) / math.pi
        dfdl = 1.0 / (np.sqrt(1.0 - l * l) * np.sqrt(1.0 - q * q * l * l))
        dldx = (1.0 / (math.pi * half_gap)) / np.sqrt(1.0 - zeta * zeta)
        term = e_w * dfdl * dldx
        if retardation:
            term = term * np.cos(k * (r - shift))
        out.append(term)
    return np.array(out)


def field_values(geom, x, z, f, eps_m_real, v0=1.0, retardation=True):
    """Vectorized complex field (V/m) at points (x, z).

    Raises ProximityError if any point is inside an edge exclusion zone.
    """
    x, z = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(z, dtype=float))
    _check_field_args(z, f, eps_m_real)
    dist = edge_distance(geom, x, z)
    if np.any(dist < exclusion_radius(geom)):
        d = float(np.min(dist))
        raise ProximityError(
            f"point within {d:.3g} m of an electrode edge (exclusion radius "
            f"{exclusion_radius(geom):.3g} m)",
            d,
        )
    return _term_values(geom, x, z, f, eps_m_real, v0, retardation).sum(axis=0)


def _check_field_args(z, f, eps_m_real):
    if np.any(z < 0):
        raise DomainError("field is defined for z >= 0 only")
    if not f > 0:
        raise DomainError("frequency must be positive")
    if not eps_m_real >= 1:
        raise DomainError("medium eps' must be >= 1")


@dataclass(frozen=True)
class FieldSample:
    x: float
    z: float
    e_complex: complex
    retarded: bool

    @property
    def position(self):
        return (self.x, self.z)

    @property
    def e_magnitude(self):
        return abs(self.e_complex)


def field_at(geom, pos, f, eps_m_real, v0=1.0, retardation=True):
    x, z = pos
    e = field_values(geom, x, z, f, eps_m_real, v0, retardation)
    return FieldSample(float(x), float(z), complex(e), bool(retardation))


@dataclass
class FieldMap:
    """Complex field on a regular (z, x) grid; singular cells hold NaN."""

    x: np.ndarray
    z: np.ndarray
    e: np.ndarray
    singular: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def magnitude(self):
        return np.abs(self.e)

    def rows(self):
        """Samples in row-major order: z outer, x inner."""
        for i, zi in enumerate(self.z):
            for j, xj in enumerate(self.x):
                yield float(xj), float(zi), complex(self.e[i, j]), bool(self.singular[i, j])

    def to_csv(self, fh):
        fh.write("x_m,z_m,e_re,e_im,e_abs,singular\n")
        for xj, zi, e, sing in self.rows():
            if sing:
                fh.write(f"{xj!r},{zi!r},nan,nan,nan,1\n")
            else:
                fh.write(f"{xj!r},{zi!r},{e.real!r},{e.imag!r},{abs(e)!r},0\n")

    def to_pgm(self):
        """8-bit binary PGM of |E|; rows follow map order (first row = lowest z)."""
        mag = self.magnitude
        finite = ~self.singular
        img = np.full(mag.shape, 255, dtype=np.uint8)
        if finite.any():
            lo = mag[finite].min()
            hi = mag[finite].max()
            scale = 254.0 / (hi - lo) if hi > lo else 0.0
            img[finite] = np.round((mag[finite] - lo) * scale).astype(np.uint8)
        nz, nx = img.shape
        return f"P5\n{nx} {nz}\n255\n".encode("ascii") + img.tobytes()


def field_map(geom, window, resolution, f, eps_m_real, v0=1.0, retardation=True):
    """Evaluate the field on an (nz, nx) grid spanning ``window``.

    ``window`` is (x_min, x_max, z_min, z_max); cells inside exclusion zones
    are flagged singular.
    """
    x_min, x_max, z_min, z_max = window
    nx, nz = resolution
    if nx < 2 or nz < 2:
        raise DomainError("field map needs at least 2 x 2 cells")
    if not z_min > 0 or z_max <= z_min or x_max <= x_min:
        raise DomainError("field map window must satisfy 0 < z_min < z_max, x_min < x_max")
    _check_field_args(np.asarray(z_min), f, eps_m_real)
    xs = np.linspace(x_min, x_max, nx)
    zs = np.linspace(z_min, z_max, nz)
    xx, zz = np.meshgrid(xs, zs)
    singular = edge_distance(geom, xx, zz) < exclusion_radius(geom)
    if singular.all():
        raise EmptyMapError("every cell of the window lies inside an exclusion zone")
    e = _term_values(geom, xx, zz, f, eps_m_real, v0, retardation).sum(axis=0)
    e = np.where(singular, np.nan + 0j, e)
    meta = dict(kind=geom.kind.value, f_hz=f, eps_m_real=eps_m_real, v0=v0, retardation=retardation)
    return FieldMap(xs, zs, e, singular, meta)


def default_window(geom, depth_factor=2.0):
    """Map window covering the electrodes plus a margin, and the fluid above."""
    edges = edge_positions(geom)
    span = edges.max() - edges.min()
    centre = 0.5 * (edges.max() + edges.min())
    half = 0.5 * span + geom.pitch
    return (centre - half, centre + half, geom.g / 10.0, depth_factor * span)


@dataclass(frozen=True)
class HotspotMetrics:
    penetration_depth: float
    width: float
    threshold_fraction: float


def _crossing(a0, a1, level):
    """Fraction in [0, 1] where a linear ramp from a0 to a1 reaches level."""
    if a0 == a1:
        return 0.0
    return float(np.clip((a0 - level) / (a0 - a1), 0.0, 1.0))


def hotspot_metrics(fmap, threshold_fraction=DEFAULT_THRESHOLD):
    """Penetration depth and width of the hotspot in ``fmap``.

    The reference is the largest finite |E| on the lowest row holding finite
    samples. Depth is the height where |E| first falls below
    ``threshold_fraction * E_ref`` going up the reference column; width is
    the x extent of the above-threshold set on the reference row. Both edges
    are located by linear interpolation between grid nodes.
    """
    if not 0 < threshold_fraction < 1:
        raise DomainError("threshold_fraction must lie in (0, 1)")
    mag = np.where(fmap.singular, np.nan, fmap.magnitude)
    valid_rows = np.flatnonzero(np.isfinite(mag).any(axis=1))
    if valid_rows.size == 0:
        raise UndefinedMetricsError("field map has no finite samples")
    base = valid_rows[0]
    row = mag[base]
    j_ref = int(np.nanargmax(row))
    e_ref = row[j_ref]
    level = threshold_fraction * e_ref

    z = fmap.z
    col = mag[:, j_ref]
    depth = z[-1]
    for i in range(base, len(z) - 1):
        if not (col[i + 1] >= level):
            a1 = col[i + 1] if np.isfinite(col[i + 1]) else 0.0
            depth = z[i] + _crossing(col[i], a1, level) * (z[i + 1] - z[i])
            break

    x = fmap.x
    above = np.flatnonzero(np.nan_to_num(row, nan=-np.inf) >= level)
    lo, hi = above[0], above[-1]
    x_lo, x_hi = x[lo], x[hi]
    if lo > 0 and np.isfinite(row[lo - 1]):
        x_lo = x[lo] - _crossing(row[lo], row[lo - 1], level) * (x[lo] - x[lo - 1])
    if hi < len(x) - 1 and np.isfinite(row[hi + 1]):
        x_hi = x[hi] + _crossing(row[hi], row[hi + 1], level) * (x[hi + 1] - x[hi])
    return HotspotMetrics(float(depth), float(x_hi - x_lo), threshold_fraction)


def delta_capacitance(a, eps_m, k_cm, e0_over_v0, include_eps0=True):
    """Capacitance change caused by a sphere of radius ``a`` in field |E0|/V0.

    ``include_eps0=False`` reproduces the expression without the vacuum
    permittivity, whose result is in meters rather than farads.
    """
    if not a > 0:
        raise DomainError("particle radius must be positive")
    contrast = (complex(eps_m) * complex(k_cm)).real
    scale = epsilon_0 if include_eps0 else 1.0
    return 4.0 * math.pi * scale * a**3 * contrast * np.abs(e0_over_v0) ** 2


def energy_perturbation(delta_c, v0):
    """Energy change -1/2 dC V0^2 (joules)."""
    return -0.5 * delta_c * v0**2


class Region(str, enum.Enum):
    REACTIVE_NEAR = "ReactiveNear"
    RADIATIVE_NEAR = "RadiativeNear"
    FAR = "Far"


def region_boundaries(d_aperture, f, eps_m_real):
    """(reactive/radiative limit, near/far limit) in meters."""
    lam = wavelength(f, eps_m_real)
    return 0.62 * math.sqrt(d_aperture**3 / lam), 2.0 * d_aperture**2 / lam


def region_classify(d_aperture, f, eps_m_real, r):
    if min(d_aperture, f, eps_m_real) <= 0 or r < 0:
        raise DomainError("region_classify needs positive arguments")
    reactive, far = region_boundaries(d_aperture, f, eps_m_real)
    if r > far:
        return Region.FAR
    if r < reactive:
        return Region.REACTIVE_NEAR
    return Region.RADIATIVE_NEAR


@dataclass(frozen=True)
class DipoleParams:
    current: float
    length: float
    wavenumber: float
    frequency: float

    def __post_init__(self):
        if min(self.current, self.length, self.wavenumber, self.frequency) <= 0:
            raise DomainError("dipole parameters must be positive")


def dipole_phasor(p, r, theta):
    """Complex theta-component amplitude of the short dipole field."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("dipole field needs r > 0")
    amp = 1j * C0 * mu_0 * p.wavenumber * p.current * p.length / (4.0 * math.pi * r)
    return amp * np.sin(theta) * np.exp(-1j * p.wavenumber * r)


def dipole_field(p, r, theta, t):
    """Instantaneous E_theta(r, theta, t) of a short dipole, V/m."""
    w = 2.0 * math.pi * p.frequency
    return np.real(dipole_phasor(p, r, theta) * np.exp(1j * w * np.asarray(t, dtype=float)))


COUPLING_BAND = (1e7, 1e10)
COUPLING_REFERENCE_HZ = 1e7


@dataclass(frozen=True)
class CouplingCalibration:
    """Per-geometry S21 level (dB at 10 MHz) and reactance corner frequency."""

    offset_db: dict = field(default_factory=lambda: {
        GeometryKind.ID: -20.0, GeometryKind.DR: -40.0, GeometryKind.PP: -50.0})
    corner_hz: dict = field(default_factory=lambda: {
        GeometryKind.ID: 1e9, GeometryKind.DR: 1e9, GeometryKind.PP: 1e9})


def coupling_response(geom, f, cal=None):
    """Transmission level in dB: +40 dB/decade up to the corner, flat above."""
    cal = cal or CouplingCalibration()
    lo, hi = COUPLING_BAND
    if not lo <= f <= hi:
        raise RangeError(f"{f:g} Hz outside supported band [{lo:g}, {hi:g}] Hz")
    kind = GeometryKind(geom.kind if isinstance(geom, ElectrodeGeometry) else geom)
    f_eff = min(f, cal.corner_hz[kind])
    return cal.offset_db[kind] + 40.0 * math.log10(f_eff / COUPLING_REFERENCE_HZ)


@dataclass(frozen=True)
class ReactanceRolloff:
    """Low-pass sensing efficiency caused by the electrode reactance.

    ``|H(f)| = 1 / sqrt(1 + (f / corner)^(2 * order))`` per geometry; a fitted
    model, not derived from the field expressions.
    """

    corner_hz: dict = field(default_factory=lambda: {
        GeometryKind.PP: 2.2e9, GeometryKind.ID: 2.5e8, GeometryKind.DR: 1.4e9})
    order: int = 2

    def gain(self, kind, f):
        fc = self.corner_hz[GeometryKind(kind)]
        return 1.0 / math.sqrt(1.0 + (f / fc) ** (2 * self.order))
