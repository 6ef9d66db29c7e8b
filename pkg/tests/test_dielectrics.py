import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.constants import epsilon_0

from microsense.dielectrics import (
    MATERIALS_ENV,
    ComplexPermittivity,
    DebyeParams,
    MaterialTable,
    clausius_mossotti,
    debye_permittivity,
    material_lookup,
    polarizability,
)
from microsense.errors import DomainError, NotFoundError, RangeError, SingularityError


def debye_oracle(es, ei, tau, sigma, f):
    w = 2 * math.pi * f
    num = complex(es - ei, 0.0)
    den = complex(1.0, w * tau)
    eps = complex(ei, 0.0) + num / den - complex(0.0, sigma / (w * epsilon_0))
    return eps.real, -eps.imag


def cm_oracle(p, m):
    # expand (p - m) / (p + 2m) with explicit real arithmetic
    a, b = p.real - m.real, p.imag - m.imag
    c, d = p.real + 2 * m.real, p.imag + 2 * m.imag
    den = c * c + d * d
    return complex((a * c + b * d) / den, (b * c - a * d) / den)


def test_complex_permittivity_sign_convention():
    eps = ComplexPermittivity(80.0, 5.0)
    assert eps.value == complex(80.0, -5.0)
    assert ComplexPermittivity.from_complex(complex(80.0, -5.0)) == eps


def test_debye_static_limit():
    p = DebyeParams(78.4, 5.2, 1e-12)
    eps = debye_permittivity(p, 1.0)
    assert eps.eps_real == pytest.approx(78.4, abs=1e-6)
    assert eps.eps_imag == pytest.approx(0.0, abs=1e-6)


def test_debye_half_relaxation_point():
    p = DebyeParams(80.0, 4.0, 1e-11)
    f = 1.0 / (2 * math.pi * p.tau)
    eps = debye_permittivity(p, f)
    assert eps.eps_real == pytest.approx(4.0 + 76.0 / 2, rel=1e-14)


@given(
    st.floats(1.0, 200.0), st.floats(0.1, 1.0), st.floats(1e-13, 1e-9),
    st.floats(0.0, 2.0), st.floats(1e3, 1e11),
)
def test_debye_matches_direct_oracle(es, frac, tau, sigma, f):
    ei = es * frac
    eps = debye_permittivity(DebyeParams(es, ei, tau, sigma), f)
    re, im = debye_oracle(es, ei, tau, sigma, f)
    assert eps.eps_real == pytest.approx(re, rel=1e-12)
    assert eps.eps_imag == pytest.approx(im, rel=1e-12, abs=1e-12)
    assert eps.eps_imag >= 0


def test_debye_loss_peak_at_relaxation_frequency():
    p = DebyeParams(78.4, 5.2, 8.27e-12)
    f = np.logspace(8, 13, 2001)
    loss = np.array([debye_permittivity(p, fi).eps_imag for fi in f])
    i = int(np.argmax(loss))
    assert 0 < i < len(f) - 1
    assert np.all(np.diff(loss[: i + 1]) > 0) and np.all(np.diff(loss[i:]) < 0)
    assert f[i] == pytest.approx(1 / (2 * math.pi * p.tau), rel=0.01)


@pytest.mark.parametrize("kwargs", [
    dict(eps_static=2.0, eps_inf=3.0, tau=1e-12),
    dict(eps_static=80.0, eps_inf=0.0, tau=1e-12),
    dict(eps_static=80.0, eps_inf=5.0, tau=0.0),
    dict(eps_static=80.0, eps_inf=5.0, tau=1e-12, sigma=-1.0),
])
def test_debye_param_invariants(kwargs):
    with pytest.raises(DomainError):
        DebyeParams(**kwargs)


def test_debye_rejects_non_positive_frequency():
    with pytest.raises(DomainError):
        debye_permittivity(DebyeParams(80.0, 5.0, 1e-12), 0.0)


def test_table_values_at_nodes(table):
    ps = material_lookup(table, "polystyrene", 1e10)
    assert (ps.eps_real, ps.eps_imag) == (2.82, 0.02)
    ec = material_lookup(table, "e_coli", 1e8)
    assert (ec.eps_real, ec.eps_imag) == (75.26, 59.52)


def test_table_exact_at_every_node(table):
    for name in table.names:
        rec = table.record(name)
        for i, f in enumerate(rec.freqs):
            eps = table.lookup(name, f)
            assert eps.eps_real == rec.eps_real[i]
            assert eps.eps_imag == rec.eps_imag[i]


def test_table_log_frequency_midpoint(table):
    eps = table.lookup("yeast", math.sqrt(1e6 * 1e7))
    assert eps.eps_real == pytest.approx(205.0, rel=1e-12)


def test_table_errors(table):
    with pytest.raises(NotFoundError):
        table.lookup("sand", 1e7)
    with pytest.raises(RangeError):
        table.lookup("yeast", 2e10)
    with pytest.raises(RangeError):
        table.lookup("yeast", 1e4)


def test_table_size_ranges(table):
    assert table.record("yeast").size_range == (1e-6, 6e-6)
    assert table.record("e_coli").size_range == (1e-6, 2e-6)


def test_table_env_override(tmp_path, monkeypatch):
    path = tmp_path / "m.csv"
    path.write_text("material,f_hz,eps_real,eps_imag,d_min_m,d_max_m\n"
                    "glass,1e6,6.0,0.1,1e-6,2e-6\nglass,1e8,5.0,0.2,1e-6,2e-6\n")
    monkeypatch.setenv(MATERIALS_ENV, str(path))
    t = MaterialTable.load()
    assert t.names == ["glass"]
    assert t.lookup("glass", 1e7).eps_real == pytest.approx(5.5)


def test_table_bad_header(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("name,f,er,ei,a,b\n")
    with pytest.raises(DomainError):
        MaterialTable.load(path)


def test_cm_identical_media_is_zero():
    eps = ComplexPermittivity(80.0, 3.0)
    assert clausius_mossotti(eps, eps) == 0


def test_cm_conducting_limit():
    assert clausius_mossotti(1e12, 80.0) == pytest.approx(1.0, abs=1e-9)


def test_cm_bead_in_water_oracle():
    p = ComplexPermittivity(2.87, 0.03)
    m = ComplexPermittivity(80.0, 0.0)
    assert clausius_mossotti(p, m) == pytest.approx(cm_oracle(p.value, m.value), rel=1e-14)


def test_cm_random_oracle():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        p = complex(rng.uniform(1, 200), -rng.uniform(0, 100))
        m = complex(rng.uniform(1, 200), -rng.uniform(0, 100))
        assert abs(clausius_mossotti(p, m) - cm_oracle(p, m)) <= 1e-12 * abs(cm_oracle(p, m)) + 1e-15


@given(st.floats(0.01, 1e4), st.floats(0.01, 1e4))
def test_cm_real_bounds(ep, em):
    k = clausius_mossotti(ep, em)
    assert k.imag == 0
    assert -0.5 < k.real < 1.0


def test_cm_singular():
    with pytest.raises(SingularityError):
        clausius_mossotti(-2.0, 1.0)


def test_polarizability():
    assert polarizability(1.0, 1.0) == pytest.approx(4 * math.pi * epsilon_0, rel=1e-15)
    a1 = polarizability(3e-6, ComplexPermittivity(2.82, 0.02))
    a2 = polarizability(6e-6, ComplexPermittivity(2.82, 0.02))
    assert a2 / a1 == pytest.approx(8.0, rel=1e-14)
    direct = 4 * math.pi * epsilon_0 * complex(2.82, -0.02) * 5e-6**3
    assert polarizability(5e-6, ComplexPermittivity(2.82, 0.02)) == pytest.approx(direct, rel=1e-15)
    with pytest.raises(DomainError):
        polarizability(0.0, 1.0)
