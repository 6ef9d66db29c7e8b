"""Acceptance checks. Each criterion prints one PASS/FAIL line.

Run standalone with ``python3 tests/test_acceptance.py`` or through pytest.
"""

import hashlib
import math
import sys
import tempfile
import time
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from conftest import (  # noqa: E402
    CONFIGS,
    dr,
    field_oracle,
    id_,
    pp,
    random_points,
    sweep_inputs,
    water,
)

from microsense import cli  # noqa: E402
from microsense.analysis import (  # noqa: E402
    ScalingReference,
    detect_peaks,
    estimate_bioparticle_voltage,
    pulse_statistics,
    sweep_frequency,
)
from microsense.dielectrics import ComplexPermittivity, clausius_mossotti, polarizability  # noqa: E402
from microsense.electrodes import (  # noqa: E402
    delta_capacitance,
    energy_perturbation,
    field_terms,
    field_values,
    retardation_required,
    wavelength,
)
from microsense.receiver import (  # noqa: E402
    FULL,
    ReceiverConfig,
    ensemble_snr_db,
    heterodyne_chain,
    homodyne_chain,
)
from microsense.specfun import carccos, ellipk  # noqa: E402
from microsense.trace import Trace  # noqa: E402
from microsense.transit import (  # noqa: E402
    FlowConditions,
    ParticleTransit,
    pulse_train,
    sensing_halfwidth,
    synthesize_pulse,
)

C0 = 299792458.0


def crit1():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for geom in (pp(), id_(3), dr()):
        for x, z in random_points(geom, rng, 100):
            e = complex(field_values(geom, x, z, 1e9, 78.4))
            ref = field_oracle(geom, x, z, 1e9, 78.4)
            worst = max(worst, abs(e - ref) / abs(ref))
    dt = time.perf_counter() - t0
    return worst <= 1e-6 and dt < 10, f"max rel err {worst:.2e}, {dt:.1f} s"


def crit2():
    m = np.linspace(0.0, 0.999, 1000)
    a, b = np.ones_like(m), np.sqrt(1.0 - m)
    for _ in range(40):
        a, b = 0.5 * (a + b), np.sqrt(a * b)
    k_err = float(np.max(np.abs(ellipk(m) - math.pi / (2 * a)) / (math.pi / (2 * a))))
    rng = np.random.default_rng(102)
    z = 10 * np.sqrt(rng.uniform(0, 1, 1000)) * np.exp(1j * rng.uniform(0, 2 * np.pi, 1000))
    z = z[~((np.abs(z.imag) < 1e-6) & (np.abs(z.real) > 1 - 1e-6))]
    rt = float(np.max(np.abs(np.cos(carccos(z)) - z) / np.abs(z)))
    return k_err <= 1e-12 and rt <= 1e-12, f"ellipk {k_err:.1e}, round trip {rt:.1e}"


def crit3():
    eps_m = ComplexPermittivity(80.0)
    k = clausius_mossotti(2.9, eps_m)
    radii = [1e-6, 2.5e-6, 5e-6, 10e-6]
    dc = [delta_capacitance(a, eps_m, k, 1e5) for a in radii]
    cubic = max(abs(c / a**3 / (dc[0] / radii[0] ** 3) - 1) for a, c in zip(radii, dc))
    v0, e = 0.25, 2.5e4
    du = -0.5 * (polarizability(5e-6, 1.0) * (eps_m.value * k).real) * e**2
    energy = abs(energy_perturbation(delta_capacitance(5e-6, eps_m, k, e / v0), v0) / du - 1)
    ok = cubic <= 4e-16 and all(c < 0 for c in dc) and energy <= 1e-12
    return ok, f"cubic dev {cubic:.1e}, sign {'-' if dc[0] < 0 else '+'}, energy dev {energy:.1e}"


def crit4():
    rng = np.random.default_rng(104)
    worst = 0.0
    for geom in (pp(), id_(3), dr()):
        for x, z in random_points(geom, rng, 100):
            r = math.hypot(x, z)
            far = max(abs(r - s) for _, _, s in field_terms(geom))
            f = 0.01 * C0 / (math.sqrt(78.4) * far) * rng.uniform(0.01, 1.0)
            a = field_values(geom, x, z, f, 78.4, retardation=True)
            b = field_values(geom, x, z, f, 78.4, retardation=False)
            worst = max(worst, abs(a - b) / abs(b))
    lam = wavelength(3e9, 78.4)
    flips = (not retardation_required(0.01 * lam, 3e9, 78.4)
             and retardation_required(np.nextafter(0.01 * lam, 1.0), 3e9, 78.4))
    return worst < 0.005 and flips, f"max deviation {100 * worst:.3f}%, flip at 0.01: {flips}"


def crit5():
    ref = ScalingReference(0.90, 10e-6, 2.55, 1e7)
    db = 20 * math.log10(estimate_bioparticle_voltage(ref, 1e-6, 2.55) / ref.v_ref)
    same = estimate_bioparticle_voltage(ref, 10e-6, 2.55) == ref.v_ref
    return abs(db + 30.0) <= 0.1 and same, f"{db:.3f} dB, identity exact: {same}"


def crit6():
    t0 = time.perf_counter()
    cfg = ReceiverConfig(sample_rate=5e5, if_freq=1e5, mode=FULL)
    t = np.arange(int(0.1 * cfg.sample_rate)) / cfg.sample_rate
    tr = Trace(1e-6 * np.cos(2 * math.pi * 100 * t), cfg.sample_rate)
    het = ensemble_snr_db(heterodyne_chain, tr, cfg, range(100), 0.02)
    hom = ensemble_snr_db(homodyne_chain, tr, cfg, range(100), 0.02)
    dt = time.perf_counter() - t0
    gap = het - hom
    return abs(gap + 3.0) <= 0.5 and dt < 120, f"gap {gap:.2f} dB, {dt:.1f} s"


@lru_cache(maxsize=None)
def sweeps():
    t0 = time.perf_counter()
    out = {}
    for kind in ("PP", "ID", "DR"):
        p = sweep_inputs(kind)
        out[kind] = sweep_frequency(p["geom"], p["particle"], p["medium"], p["freqs"],
                                    p["chain_cfg"], p["seed"], p["setup"])
    return out, time.perf_counter() - t0


def crit7():
    res, dt = sweeps()
    id_snr = res["ID"].column("snr_db")
    rise = float(np.max(np.diff(id_snr)))
    decay = float(id_snr[0] - id_snr[-1])
    spreads = {k: res[k].snr_variation()[0] for k in ("PP", "DR")}
    low = {k: float(r.column("snr_db")[0]) for k, r in res.items()}
    ok = (rise <= 1.0 and decay >= 20.0 and max(spreads.values()) <= 10.0
          and all(40.0 <= v <= 50.0 for v in low.values()) and dt < 600)
    detail = (f"ID decay {decay:.1f} dB (max rise {rise:.2f}), PP spread {spreads['PP']:.1f} dB, "
              f"DR spread {spreads['DR']:.1f} dB, 10 MHz "
              + "/".join(f"{low[k]:.1f}" for k in ("PP", "ID", "DR")) + f" dB, {dt:.0f} s")
    return ok, detail


def crit8():
    fs, f = 1e6, 1e7
    p = ParticleTransit(5e-6, ComplexPermittivity(2.55, 0.0), 20e-6, 0.2084, fs)
    fc = FlowConditions(10e-9 / 60, 1e11)
    arrivals = 0.01 + 0.02 * np.arange(10)
    widths = []
    for g in (pp(), id_(2), dr()):
        tr = pulse_train(g, p, fc, f, water(f), 0.25, 1e15, 0.21, None, arrivals=arrivals)
        x = np.abs(tr.values)
        x = x + 1e-3 * x.max() * np.random.default_rng(108).standard_normal(x.size)
        widths.append(pulse_statistics(detect_peaks(tr.with_values(x))).mean_width)
    ok = widths[0] < widths[1] < widths[2]
    return ok, "FWHM PP/ID/DR " + "/".join(f"{1e6 * w:.0f}" for w in widths) + " us"


def crit9():
    rng = np.random.default_rng(109)
    gaps = rng.integers(400, 600, 100)
    centers = 300 + np.cumsum(gaps)
    n = int(centers[-1] + 300)
    t = np.arange(n)
    x = sum(10.0 * np.exp(-0.5 * ((t - c) / 8.0) ** 2) for c in centers)
    x = x + rng.standard_normal(n)
    found = np.array([pk.index for pk in detect_peaks(Trace(x, 1e4)).peaks])
    matched = sum(np.any(np.abs(found - c) <= 8) for c in centers)
    false_pos = sum(not np.any(np.abs(centers - i) <= 8) for i in found)
    quiet = sum(not detect_peaks(Trace(np.random.default_rng(s).standard_normal(2000), 1e4)).peaks
                for s in range(1000))
    ok = matched == 100 and false_pos == 0 and quiet >= 990
    return ok, f"recall {matched}/100, false positives {false_pos}, quiet runs {quiet}/1000"


def _digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def crit10():
    mismatched = []
    with tempfile.TemporaryDirectory() as tmp:
        for cfg in sorted(CONFIGS.glob("*.cfg")):
            first = cli.run(cfg, out_dir=Path(tmp) / cfg.stem / "a")
            again = cli.run(first["manifest.cfg"], out_dir=Path(tmp) / cfg.stem / "b", threads=4)
            for name, path in first.items():
                if name.endswith(".csv") and _digest(path) != _digest(again[name]):
                    mismatched.append(f"{cfg.stem}/{name}")
    n = len(list(CONFIGS.glob("*.cfg")))
    return not mismatched, f"{n} experiments, mismatches: {mismatched or 'none'}"


def crit11():
    freqs = [1e8, 1e9, 1e10]
    peaks = {}
    for kind in ("PP", "ID", "DR"):
        p = sweep_inputs(kind)
        setup, g = p["setup"], p["geom"]
        quiet = ReceiverConfig(**{**p["chain_cfg"].__dict__, "noise_density": 0.0})
        row = []
        for f in freqs:
            part = p["particle"](f)
            span = 2 * sensing_halfwidth(g, part.height) / part.velocity + 0.05
            gain = setup.transducer_gain * setup.rolloff.gain(g.kind, f)
            pulse = synthesize_pulse(g, part, f, p["medium"](f), setup.v0, gain, span)
            row.append(float(heterodyne_chain(pulse, quiet, 0).magnitude_trace.values.max()))
        peaks[kind] = row
    ok = all(r[0] > r[1] > r[2] and r[2] < 0.05 for r in peaks.values())
    detail = ", ".join(f"{k} " + "/".join(f"{1e3 * v:.1f}" for v in r) + " mV"
                       for k, r in peaks.items())
    return ok, f"0.1/1/10 GHz: {detail}"


CRITERIA = [
    (1, "field oracle equivalence", crit1),
    (2, "special functions", crit2),
    (3, "capacitance scaling", crit3),
    (4, "retardation threshold", crit4),
    (5, "scaling estimator", crit5),
    (6, "heterodyne image penalty", crit6),
    (7, "frequency trends", crit7),
    (8, "pulse width ordering", crit8),
    (9, "peak detection", crit9),
    (10, "manifest determinism", crit10),
    (11, "calibrated peak continuity", crit11),
]


def report(number, title, check):
    ok, detail = check()
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
    return ok, line


@pytest.mark.parametrize("number,title,check", CRITERIA, ids=[f"criterion_{n}" for n, _, _ in CRITERIA])
def test_criterion(number, title, check, capsys):
    ok, line = report(number, title, check)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [report(*c) for c in CRITERIA]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
