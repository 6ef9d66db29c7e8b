"""Line-oriented ``key = value`` run configuration.

Keys are dotted (``geometry.g_m``) and carry their SI unit as a suffix.
``#`` starts a comment; blank lines are ignored; list values are comma
separated. Every key is declared in ``SCHEMA`` with its type and default;
``REQUIRED`` marks keys without one.
"""

import math
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError

REQUIRED = object()
EXPERIMENTS = ("field_map", "hotspot", "transit", "detect", "sweep", "estimate", "materials")
BAND_HZ = (1e7, 1e10)
NOISE_DENSITY_BOUNDS = (2e-9, 8e-9)


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    parse.__name__ = "choice"
    return parse


def _float(text):
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("must be finite")
    return value


def _int(text):
    return int(text)


def _str(text):
    return text


def _floats(text):
    return tuple(_float(t) for t in text.split(",") if t.strip())


def _strs(text):
    return tuple(t.strip() for t in text.split(",") if t.strip())


# key: (parser, default, help)
SCHEMA = {
    "experiment": (_choice(*EXPERIMENTS), REQUIRED, "experiment to run"),
    "seed": (_int, 0, "top-level seed; every random stream derives from it"),

    "geometry.kind": (_choice("PP", "ID", "DR"), "PP", "electrode geometry"),
    "geometry.w_m": (_float, None, "electrode width (default per kind)"),
    "geometry.g_m": (_float, None, "electrode gap (default per kind)"),
    "geometry.pairs": (_int, None, "ID finger pairs (default 2)"),

    "medium.model": (_choice("debye", "constant"), None, "medium permittivity model"),
    "medium.eps_static": (_float, None, "Debye static permittivity"),
    "medium.eps_inf": (_float, None, "Debye high-frequency permittivity"),
    "medium.tau_s": (_float, None, "Debye relaxation time"),
    "medium.sigma_s_per_m": (_float, 0.0, "static conductivity"),
    "medium.eps_real": (_float, None, "constant model eps'"),
    "medium.eps_imag": (_float, 0.0, "constant model eps''"),

    "particle.material": (_str, "polystyrene", "material table entry"),
    "particle.radius_m": (_float, 5e-6, "particle radius"),
    "particle.height_m": (_float, None, "path height (default channel centerline)"),

    "flow.hydraulic_diameter_m": (_float, 40e-6, "channel hydraulic diameter"),
    "flow.cross_section": (_choice("square", "circular"), "square", "channel cross section"),
    "flow.rate_m3_per_s": (_float, 10e-9 / 60.0, "volumetric flow rate"),
    "flow.concentration_per_m3": (_float, 1e11, "particle concentration"),
    "flow.detection_fraction": (_float, 1.0, "fraction of particles crossing the hotspot"),

    "receiver.sample_rate_hz": (_float, 5e4, "simulation sample rate"),
    "receiver.carrier_hz": (_float, 1e7, "carrier frequency"),
    "receiver.if_hz": (_float, 1e7, "intermediate frequency"),
    "receiver.if_bandwidth_hz": (_float, 3e3, "IF bandwidth"),
    "receiver.lockin_cutoff_hz": (_float, 1.5e3, "lock-in low-pass cutoff"),
    "receiver.noise_density_v_per_rthz": (_float, 5e-9, "input noise density"),
    "receiver.shielding_db": (_float, 40.0, "enclosure rejection"),
    "receiver.phase_offset_rad": (_float, 0.0, "lock-in reference phase offset"),
    "receiver.mode": (_choice("envelope", "full"), "envelope", "simulation mode"),
    "receiver.chain_gain": (_float, 1e3, "receiver gain referred to the output"),

    "analysis.frequency_hz": (_float, 1e7, "operating frequency"),
    "analysis.frequencies_hz": (_floats, (), "explicit sweep frequencies"),
    "analysis.freq_start_hz": (_float, 1e7, "sweep start"),
    "analysis.freq_stop_hz": (_float, 1e10, "sweep stop"),
    "analysis.freq_points": (_int, 10, "log-spaced sweep points"),
    "analysis.v0_v": (_float, 0.25, "drive amplitude"),
    "analysis.target_peak_v": (_float, 0.90, "calibration peak at PP / 10 MHz"),
    "analysis.noise_coupling_m2_per_rthz": (_float, 1e-13, "medium-fluctuation noise coupling"),
    "analysis.n_pulses": (_int, 20, "pulses per sweep point"),
    "analysis.duration_s": (_float, 2.0, "transit trace length"),
    "analysis.k_mad": (_float, 5.0, "detection threshold in robust sigmas"),
    "analysis.min_separation_s": (_float, None, "minimum peak spacing (default 10 x FWHM)"),
    "analysis.nx": (_int, 121, "field map columns"),
    "analysis.nz": (_int, 121, "field map rows"),
    "analysis.threshold_fraction": (_float, math.exp(-1.0), "hotspot threshold"),
    "analysis.materials": (_strs, ("yeast", "e_coli", "polystyrene"), "materials to estimate"),
    "analysis.diameters_m": (_floats, (4e-6, 1e-6), "diameters to estimate"),
    "analysis.reference_electrode": (_choice("PP", "ID", "DR"), "PP", "electrode of the peak reference"),

    "io.trace_csv": (_str, None, "input trace for the detect experiment"),
    "io.materials_csv": (_str, None, "material table override"),
    "io.out_dir": (_str, "out", "output directory"),
}

GEOMETRY_DEFAULTS = {
    "PP": {"geometry.w_m": 45e-6, "geometry.g_m": 10e-6, "geometry.pairs": 0},
    "ID": {"geometry.w_m": 10e-6, "geometry.g_m": 10e-6, "geometry.pairs": 2},
    "DR": {"geometry.w_m": 30e-6, "geometry.g_m": 10e-6, "geometry.pairs": 0},
}

PATH_KEYS = ("io.trace_csv", "io.materials_csv")


@dataclass(frozen=True)
class RunConfig:
    values: dict
    source: Path = None

    def __getitem__(self, key):
        return self.values[key]

    @property
    def experiment(self):
        return self.values["experiment"]

    @property
    def seed(self):
        return self.values["seed"]


def format_value(value):
    if isinstance(value, tuple):
        return ",".join(format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_lines(lines):
    """Raw ``{key: text}`` from config lines; syntax errors raise ConfigError."""
    raw = {}
    for number, line in enumerate(lines, 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"line {number}: expected 'key = value'")
        key, value = (part.strip() for part in text.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", key)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r}", key)
        raw[key] = value
    return raw


def resolve(raw, base_dir=None):
    """Typed config with defaults filled in. Errors name the offending key."""
    values = {}
    for key, (parse, default, _) in SCHEMA.items():
        if key in raw:
            try:
                values[key] = parse(raw[key])
            except ValueError as exc:
                raise ConfigError(f"{key}: cannot parse {raw[key]!r} ({exc})", key) from None
        elif default is REQUIRED:
            raise ConfigError(f"missing required key {key!r}", key)
        else:
            values[key] = default
    for key, default in GEOMETRY_DEFAULTS[values["geometry.kind"]].items():
        if values[key] is None:
            values[key] = default
    if base_dir is not None:
        for key in PATH_KEYS:
            if values[key] is not None:
                values[key] = str((Path(base_dir) / values[key]).resolve())
    return values


def load(path):
    """Read and resolve a config file. OSError propagates (I/O failure)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return RunConfig(resolve(parse_lines(text.splitlines()), path.parent), path)


def dump(cfg, comments=()):
    """Config text that ``load`` turns back into ``cfg``; unset keys are omitted."""
    lines = [f"# {c}" for c in comments]
    for key in SCHEMA:
        value = cfg.values.get(key)
        if value is None or value == ():
            continue
        lines.append(f"{key} = {format_value(value)}")
    return "\n".join(lines) + "\n"
