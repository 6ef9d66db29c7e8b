"""Command-line front end: ``microsense run|validate|materials``.

Exit status: 0 success, 2 configuration error, 3 numerical or domain error,
4 I/O error.

Seed derivation: every stream is ``SeedSequence(seed, spawn_key=k)``. Arrival
times use k = (0,); for sweep point i, medium noise uses (1, i) and receiver
noise (2, i). Single-frequency experiments use i = 0.
"""

import argparse
import csv
import hashlib
import io
import logging
import math
import os
import sys
import tempfile
from importlib import resources
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .analysis import (
    ScalingReference,
    SweepSetup,
    calibrate_chain_gain,
    detect_peaks,
    estimate_bioparticle_voltage,
    pulse_statistics,
    simulate_receive,
    snr_estimate,
    sweep_frequency,
    sweep_seed,
)
from .dielectrics import (
    MATERIAL_HEADER,
    ComplexPermittivity,
    DebyeParams,
    MaterialTable,
    debye_permittivity,
)
from .electrodes import (
    ElectrodeGeometry,
    GeometryKind,
    ReactanceRolloff,
    default_window,
    exclusion_radius,
    field_map,
    hotspot_metrics,
)
from .errors import ConfigError, MicrosenseError, NotFoundError
from .receiver import ReceiverConfig
from .trace import Trace
from .transit import (
    ChannelSpec,
    FlowConditions,
    ParticleTransit,
    arrival_times,
    centerline_velocity,
)

log = logging.getLogger("microsense")

MEDIUM_EXPERIMENTS = ("field_map", "hotspot", "transit", "sweep")
EXIT_OK, EXIT_CONFIG, EXIT_DOMAIN, EXIT_IO = 0, 2, 3, 4
CALIBRATION_HZ = 1e7


# ---------------------------------------------------------------- builders

def build_geometry(values, kind=None):
    kind = kind or values["geometry.kind"]
    if kind != values["geometry.kind"]:
        d = cfgmod.GEOMETRY_DEFAULTS[kind]
        return ElectrodeGeometry(GeometryKind(kind), d["geometry.w_m"], d["geometry.g_m"],
                                 d["geometry.pairs"])
    return ElectrodeGeometry(GeometryKind(kind), values["geometry.w_m"], values["geometry.g_m"],
                             values["geometry.pairs"])


def _need(values, key):
    if values[key] is None:
        raise ConfigError(f"{key} is required for medium.model = {values['medium.model']}", key)
    return values[key]


def build_medium(values):
    if values["medium.model"] == "debye":
        params = DebyeParams(_need(values, "medium.eps_static"), _need(values, "medium.eps_inf"),
                             _need(values, "medium.tau_s"), values["medium.sigma_s_per_m"])
        return lambda f: debye_permittivity(params, f)
    eps = ComplexPermittivity(_need(values, "medium.eps_real"), values["medium.eps_imag"])
    return lambda f: eps


def build_table(values):
    return MaterialTable.load(values["io.materials_csv"])


def build_channel(values):
    return ChannelSpec(values["flow.hydraulic_diameter_m"], values["flow.cross_section"])


def build_flow(values):
    return FlowConditions(values["flow.rate_m3_per_s"], values["flow.concentration_per_m3"],
                          values["flow.detection_fraction"])


def particle_height(values):
    h = values["particle.height_m"]
    return build_channel(values).centerline_height if h is None else h


def build_particle(values, table):
    ch = build_channel(values)
    v = centerline_velocity(ch, values["flow.rate_m3_per_s"])
    h = particle_height(values)
    name = values["particle.material"]
    fs = values["receiver.sample_rate_hz"]
    return lambda f: ParticleTransit(values["particle.radius_m"], table.lookup(name, f), h, v, fs)


def build_receiver(values):
    return ReceiverConfig(
        sample_rate=values["receiver.sample_rate_hz"],
        carrier_freq=values["receiver.carrier_hz"],
        if_freq=values["receiver.if_hz"],
        if_bandwidth=values["receiver.if_bandwidth_hz"],
        lockin_lpf_cutoff=values["receiver.lockin_cutoff_hz"],
        noise_density=values["receiver.noise_density_v_per_rthz"],
        shielding_rejection=values["receiver.shielding_db"],
        phase_offset=values["receiver.phase_offset_rad"],
        mode=values["receiver.mode"],
    )


def sweep_frequencies(values):
    if values["analysis.frequencies_hz"]:
        return list(values["analysis.frequencies_hz"])
    n = values["analysis.freq_points"]
    return list(np.logspace(math.log10(values["analysis.freq_start_hz"]),
                            math.log10(values["analysis.freq_stop_hz"]), n))


def build_setup(values, table, medium, chain_cfg):
    """Sweep setup with the transducer gain fitted on the PP default geometry."""
    rolloff = ReactanceRolloff()
    pp = build_geometry(values, "PP")
    gain = calibrate_chain_gain(pp, build_particle(values, table), medium, CALIBRATION_HZ,
                                chain_cfg, values["analysis.target_peak_v"], values["analysis.v0_v"],
                                rolloff.gain(GeometryKind.PP, CALIBRATION_HZ))
    return SweepSetup(
        flow=build_flow(values),
        transducer_gain=gain,
        v0=values["analysis.v0_v"],
        rolloff=rolloff,
        noise_coupling=values["analysis.noise_coupling_m2_per_rthz"],
        chain_gain=values["receiver.chain_gain"],
        n_pulses=values["analysis.n_pulses"],
        k_mad=values["analysis.k_mad"],
        map_resolution=(values["analysis.nx"], values["analysis.nz"]),
    )


# ------------------------------------------------------------- diagnostics

def _positive(values, keys, out):
    for key in keys:
        v = values[key]
        if v is not None and not v > 0:
            out.append(f"{key}: must be positive (got {v!r})")


def _in_band(values, key, f, out):
    lo, hi = cfgmod.BAND_HZ
    if not lo <= f <= hi:
        out.append(f"{key}: {f:g} Hz outside supported band 0.01-10 GHz")


def diagnostics(values):
    """Schema and physics-range problems, as 'key: message' strings."""
    out = []
    _positive(values, [
        "geometry.w_m", "geometry.g_m", "particle.radius_m", "particle.height_m",
        "flow.hydraulic_diameter_m", "flow.rate_m3_per_s", "receiver.sample_rate_hz",
        "receiver.carrier_hz", "receiver.if_hz", "receiver.if_bandwidth_hz",
        "receiver.lockin_cutoff_hz", "receiver.chain_gain", "analysis.v0_v",
        "analysis.target_peak_v", "analysis.duration_s", "analysis.k_mad",
    ], out)
    if values["geometry.kind"] == "ID" and values["geometry.pairs"] < 0:
        out.append("geometry.pairs: must be non-negative")
    if values["flow.concentration_per_m3"] < 0:
        out.append("flow.concentration_per_m3: must be non-negative")
    if not 0 < values["flow.detection_fraction"] <= 1:
        out.append("flow.detection_fraction: must lie in (0, 1]")
    if values["analysis.noise_coupling_m2_per_rthz"] < 0:
        out.append("analysis.noise_coupling_m2_per_rthz: must be non-negative")
    if values["analysis.nx"] < 2 or values["analysis.nz"] < 2:
        out.append("analysis.nx: field maps need at least 2 x 2 cells")
    if not 0 < values["analysis.threshold_fraction"] < 1:
        out.append("analysis.threshold_fraction: must lie in (0, 1)")
    if values["analysis.n_pulses"] < 1:
        out.append("analysis.n_pulses: must be at least 1")

    _in_band(values, "analysis.frequency_hz", values["analysis.frequency_hz"], out)
    if any(not d > 0 for d in values["analysis.diameters_m"]):
        out.append("analysis.diameters_m: must be positive")
    if values["experiment"] in ("sweep", "hotspot"):
        if values["analysis.frequencies_hz"]:
            for f in values["analysis.frequencies_hz"]:
                _in_band(values, "analysis.frequencies_hz", f, out)
            fs = values["analysis.frequencies_hz"]
            if any(b <= a for a, b in zip(fs, fs[1:])):
                out.append("analysis.frequencies_hz: must be strictly increasing")
        else:
            _in_band(values, "analysis.freq_start_hz", values["analysis.freq_start_hz"], out)
            _in_band(values, "analysis.freq_stop_hz", values["analysis.freq_stop_hz"], out)
            if values["analysis.freq_points"] < 1:
                out.append("analysis.freq_points: must be at least 1")

    model = values["medium.model"]
    if model is None:
        if values["experiment"] in MEDIUM_EXPERIMENTS:
            out.append(f"medium.model: required for experiment = {values['experiment']}")
    elif model == "debye":
        for key in ("medium.eps_static", "medium.eps_inf", "medium.tau_s"):
            if values[key] is None:
                out.append(f"{key}: required for medium.model = debye")
    elif values["medium.eps_real"] is None:
        out.append("medium.eps_real: required for medium.model = constant")

    lo, hi = cfgmod.NOISE_DENSITY_BOUNDS
    nd = values["receiver.noise_density_v_per_rthz"]
    if nd < 0:
        out.append("receiver.noise_density_v_per_rthz: must be non-negative")
    elif not lo <= nd <= hi:
        out.append(f"receiver.noise_density_v_per_rthz: {nd:g} outside the nominal "
                   f"{lo:g}-{hi:g} V/sqrt(Hz) range (warning)")

    if values["experiment"] == "detect" and values["io.trace_csv"] is None:
        out.append("io.trace_csv: required for experiment = detect")
    elif values["io.trace_csv"] is not None and not Path(values["io.trace_csv"]).is_file():
        out.append(f"io.trace_csv: file not found: {values['io.trace_csv']}")
    if values["io.materials_csv"] is not None and not Path(values["io.materials_csv"]).is_file():
        out.append(f"io.materials_csv: file not found: {values['io.materials_csv']}")

    if out:
        return out
    # physics checks that need constructed objects
    try:
        geom = build_geometry(values)
        h = particle_height(values)
        if h < exclusion_radius(geom):
            out.append(f"particle.height_m: {h:g} m lies inside the edge exclusion zone "
                       f"({exclusion_radius(geom):g} m)")
        if h < values["particle.radius_m"]:
            out.append("particle.height_m: must be at least particle.radius_m")
        if h > values["flow.hydraulic_diameter_m"]:
            out.append("particle.height_m: above the channel")
        table = build_table(values)
        names = [values["particle.material"]]
        if values["experiment"] == "estimate":
            names += list(values["analysis.materials"])
        for name in names:
            if name not in table.names:
                key = "particle.material" if name == names[0] else "analysis.materials"
                out.append(f"{key}: unknown material {name!r}")
        build_receiver(values)
    except MicrosenseError as exc:
        out.append(f"{getattr(exc, 'key', None) or 'config'}: {exc}")
    return out


def is_warning(diag):
    return diag.endswith("(warning)")


# ------------------------------------------------------------------ output

def write_atomic(path, data):
    """Write bytes to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _text(writer):
    buf = io.StringIO(newline="")
    writer(buf)
    return buf.getvalue().encode("utf-8")


def _rows_csv(header, rows):
    def write(fh):
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else repr(float(v)) for v in row) + "\n")
    return _text(write)


# ------------------------------------------------------------- experiments

def exp_field_map(values, threads):
    geom = build_geometry(values)
    f = values["analysis.frequency_hz"]
    eps_m = build_medium(values)(f)
    fmap = field_map(geom, default_window(geom), (values["analysis.nx"], values["analysis.nz"]),
                     f, eps_m.eps_real, values["analysis.v0_v"])
    return {"field_map.csv": _text(fmap.to_csv), "field_map.pgm": fmap.to_pgm()}


def exp_hotspot(values, threads):
    geom = build_geometry(values)
    medium = build_medium(values)
    rows = []
    for f in sweep_frequencies(values):
        fmap = field_map(geom, default_window(geom), (values["analysis.nx"], values["analysis.nz"]),
                         f, medium(f).eps_real, values["analysis.v0_v"])
        m = hotspot_metrics(fmap, values["analysis.threshold_fraction"])
        rows.append((f, m.penetration_depth, m.width))
    return {"hotspot.csv": _rows_csv(["f_hz", "depth_m", "width_m"], rows)}


def _peaks_outputs(mag, values):
    report = detect_peaks(mag, values["analysis.k_mad"], values["analysis.min_separation_s"])
    stats = pulse_statistics(report)
    snr = snr_estimate(mag, report) if report.peaks else float("nan")
    summary = [(str(stats.count), snr,
                float("nan") if stats.mean_width is None else stats.mean_width,
                float("nan") if stats.mean_interval is None else stats.mean_interval)]
    return {
        "peaks.csv": _text(report.to_csv),
        "summary.csv": _rows_csv(["n_peaks", "snr_db", "mean_fwhm_s", "mean_interval_s"], summary),
    }


def exp_transit(values, threads):
    table = build_table(values)
    medium = build_medium(values)
    chain_cfg = build_receiver(values)
    setup = build_setup(values, table, medium, chain_cfg)
    geom = build_geometry(values)
    f = values["analysis.frequency_hz"]
    seed = values["seed"]
    duration = values["analysis.duration_s"]
    arrivals = arrival_times(setup.flow, duration, sweep_seed(seed, 0))
    trace, out = simulate_receive(geom, build_particle(values, table)(f), medium(f), f, chain_cfg,
                                  setup, arrivals, duration, seed)
    result = {"trace.csv": _text(trace.to_csv), "demod.csv": _text(out.to_csv)}
    result.update(_peaks_outputs(out.magnitude_trace, values))
    return result


def exp_detect(values, threads):
    with open(values["io.trace_csv"], newline="", encoding="utf-8") as fh:
        trace = Trace.from_csv(fh)
    return _peaks_outputs(trace, values)


def exp_sweep(values, threads):
    table = build_table(values)
    medium = build_medium(values)
    chain_cfg = build_receiver(values)
    setup = build_setup(values, table, medium, chain_cfg)
    result = sweep_frequency(build_geometry(values), build_particle(values, table), medium,
                             sweep_frequencies(values), chain_cfg, values["seed"], setup, threads)
    return {"sweep.csv": _text(result.to_csv)}


def load_peak_reference():
    text = resources.files("microsense").joinpath("data/peak_reference.csv").read_text("utf-8")
    return list(csv.DictReader(text.splitlines()))


def reference_voltages(electrode):
    """{f_hz: tabulated peak (V)} for ``electrode``; superheterodyne column, else lock-in."""
    out = {}
    for row in load_peak_reference():
        value = row["superhet_v"] or row["lia_v"]
        if row["electrode"] == electrode and value:
            out[float(row["f_hz"])] = float(value)
    return out


def exp_estimate(values, threads):
    table = build_table(values)
    electrode = values["analysis.reference_electrode"]
    refs = reference_voltages(electrode)
    freqs = values["analysis.frequencies_hz"] or tuple(sorted(refs))
    rows = []
    for f in freqs:
        if f not in refs:
            raise NotFoundError(f"no reference peak for {electrode} at {f:g} Hz")
        ref_eps = table.lookup(values["particle.material"], f).eps_real
        ref = ScalingReference(refs[f], 2.0 * values["particle.radius_m"], ref_eps, f, electrode)
        for name in values["analysis.materials"]:
            eps = table.lookup(name, f).eps_real
            for d in values["analysis.diameters_m"]:
                rows.append((name, f, d, eps, estimate_bioparticle_voltage(ref, d, eps)))
    return {"estimate.csv": _rows_csv(["material", "f_hz", "d_m", "eps_real", "v_est_v"], rows)}


def exp_materials(values, threads):
    table = build_table(values)
    rows = []
    for name in table.names:
        rec = table.record(name)
        for i, f in enumerate(rec.freqs):
            rows.append((name, f, rec.eps_real[i], rec.eps_imag[i], *rec.size_range))
    return {"materials.csv": _rows_csv(MATERIAL_HEADER, rows)}


EXPERIMENTS = {
    "field_map": exp_field_map,
    "hotspot": exp_hotspot,
    "transit": exp_transit,
    "detect": exp_detect,
    "sweep": exp_sweep,
    "estimate": exp_estimate,
    "materials": exp_materials,
}


# ---------------------------------------------------------------- commands

def run(config_path, seed=None, out_dir=None, threads=1):
    """Run the experiment in ``config_path``; returns {artifact name: path}."""
    cfg = cfgmod.load(config_path)
    values = dict(cfg.values)
    if seed is not None:
        values["seed"] = seed
    problems = [d for d in diagnostics(values) if not is_warning(d)]
    if problems:
        key = problems[0].split(":", 1)[0]
        raise ConfigError(problems[0], key)
    for d in diagnostics(values):
        log.warning(d)
    artifacts = EXPERIMENTS[values["experiment"]](values, threads)
    out = Path(out_dir if out_dir is not None else values["io.out_dir"])
    paths = {}
    for name, data in sorted(artifacts.items()):
        write_atomic(out / name, data)
        paths[name] = out / name
    comments = ["microsense run manifest; re-run with: microsense run manifest.cfg"]
    comments += [f"sha256 {hashlib.sha256(artifacts[n]).hexdigest()}  {n}" for n in sorted(artifacts)]
    manifest = cfgmod.dump(cfgmod.RunConfig(values), comments)
    write_atomic(out / "manifest.cfg", manifest.encode("utf-8"))
    paths["manifest.cfg"] = out / "manifest.cfg"
    return paths


def validate(config_path):
    """Diagnostics for ``config_path`` without running it."""
    path = Path(config_path)
    text = path.read_text(encoding="utf-8")
    try:
        values = cfgmod.resolve(cfgmod.parse_lines(text.splitlines()), path.parent)
    except ConfigError as exc:
        return [str(exc) if exc.key is None or str(exc).startswith(exc.key)
                else f"{exc.key}: {exc}"]
    return diagnostics(values)


def _materials_command(args):
    table = MaterialTable.load()
    if args.action == "list":
        for name in table.names:
            print(name)
        return EXIT_OK
    if not args.name:
        print("materials show needs a material name", file=sys.stderr)
        return EXIT_CONFIG
    rec = table.record(args.name)
    print(f"{rec.name}: size {rec.size_range[0]:g}-{rec.size_range[1]:g} m")
    print("f_hz,eps_real,eps_imag")
    for f, er, ei in zip(rec.freqs, rec.eps_real, rec.eps_imag):
        print(f"{f:g},{er:g},{ei:g}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="microsense", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the experiment described by a config file")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, help="override the config seed")
    p_run.add_argument("--out", help="output directory (overrides io.out_dir)")
    p_run.add_argument("--threads", type=int, default=1, help="worker threads (speed only)")
    p_val = sub.add_parser("validate", help="check a config file without running it")
    p_val.add_argument("config")
    p_mat = sub.add_parser("materials", help="inspect the material table")
    p_mat.add_argument("action", choices=["list", "show"])
    p_mat.add_argument("name", nargs="?")
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            if args.threads < 1:
                raise ConfigError("--threads must be at least 1", "--threads")
            paths = run(args.config, args.seed, args.out, args.threads)
            for name, path in paths.items():
                log.info("wrote %s", path)
            return EXIT_OK
        if args.command == "validate":
            diags = validate(args.config)
            for d in diags:
                print(d)
            return EXIT_CONFIG if any(not is_warning(d) for d in diags) else EXIT_OK
        return _materials_command(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    except NotFoundError as exc:
        log.error("%s", exc)
        return EXIT_DOMAIN
    except MicrosenseError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
