import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from microsense.dielectrics import DebyeParams, MaterialTable, debye_permittivity
from microsense.electrodes import (
    ElectrodeGeometry,
    GeometryKind,
    edge_distance,
    edge_positions,
    field_terms,
    layout_ratio,
)
from microsense.specfun import carccos, ellipk

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile("ci")

WATER = DebyeParams(78.4, 5.2, 8.27e-12)


def pp():
    return ElectrodeGeometry(GeometryKind.PP, 45e-6, 10e-6)


def id_(pairs=2):
    return ElectrodeGeometry(GeometryKind.ID, 10e-6, 10e-6, pairs)


def dr():
    return ElectrodeGeometry(GeometryKind.DR, 30e-6, 10e-6)


@pytest.fixture
def geoms():
    return {"PP": pp(), "ID": id_(), "DR": dr()}


@pytest.fixture(scope="session")
def table():
    return MaterialTable.load()


def water(f):
    return debye_permittivity(WATER, f)


# ---------------------------------------------------------------- oracles

_GL_X, _GL_W = np.polynomial.legendre.leggauss(80)


def potential_oracle(geom, x, z, v0=1.0):
    """Per-term mapped potential E_W * int_0^l F'(t) dt by Gauss-Legendre.

    l is taken from the arccos potential W = V0 - (2 V0 / pi) arccos(zeta)
    as l = W / (2 V0).
    """
    q = layout_ratio(geom)
    e_w = v0 / (2.0 * ellipk(q * q))
    s = 0.5 * (_GL_X + 1.0)
    out = []
    for sign, off, _ in field_terms(geom):
        zeta = (sign * x - off + 1j * z) / (0.5 * geom.g)
        w = v0 - (2.0 * v0 / math.pi) * carccos(zeta)
        l = w / (2.0 * v0)
        t = l * s
        integrand = 1.0 / np.sqrt((1.0 - t * t) * (1.0 - q * q * t * t))
        out.append(e_w * l * 0.5 * np.sum(_GL_W * integrand))
    return np.array(out)


def field_oracle(geom, x, z, f, eps_m_real, v0=1.0, retardation=True):
    """Centered finite difference of the mapped potential of every term."""
    h = 1e-4 * 0.5 * geom.g
    k = 2.0 * math.pi * math.sqrt(eps_m_real) * f / 299792458.0
    r = math.hypot(x, z)
    total = 0j
    terms = field_terms(geom)
    for i, (sign, _, shift) in enumerate(terms):
        # derivative with respect to the local coordinate X_n = sign * x - off
        plus = potential_oracle(geom, x + sign * h, z, v0)[i]
        minus = potential_oracle(geom, x - sign * h, z, v0)[i]
        term = (plus - minus) / (2.0 * h)
        if retardation:
            term *= math.cos(k * (r - shift))
        total += term
    return total


def random_points(geom, rng, n, min_edge=None, depth=None):
    """``n`` points in the hotspot region at least ``min_edge`` from every edge."""
    min_edge = geom.g / 10.0 if min_edge is None else min_edge
    edges = edge_positions(geom)
    span = float(np.ptp(edges))
    centre = 0.5 * (edges.max() + edges.min())
    depth = depth or 2.0 * span
    pts = []
    while len(pts) < n:
        x = centre + rng.uniform(-0.75 * span, 0.75 * span)
        z = rng.uniform(geom.g / 20.0, depth)
        if edge_distance(geom, x, z) > min_edge:
            pts.append((x, z))
    return pts


# ------------------------------------------------------------------ sweeps

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def sweep_inputs(kind, **overrides):
    """Sweep components built from the shipped sweep config for ``kind``."""
    from microsense import cli, config

    values = dict(config.load(CONFIGS / f"sweep_{kind.lower()}.cfg").values)
    values.update(overrides)
    table = cli.build_table(values)
    medium = cli.build_medium(values)
    chain_cfg = cli.build_receiver(values)
    setup = cli.build_setup(values, table, medium, chain_cfg)
    return dict(
        geom=cli.build_geometry(values),
        particle=cli.build_particle(values, table),
        medium=medium,
        chain_cfg=chain_cfg,
        seed=values["seed"],
        setup=setup,
        freqs=cli.sweep_frequencies(values),
    )
