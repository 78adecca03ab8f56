"""Run configuration: sectioned key/value files with unit-suffixed keys.

Example::

    [trap]
    rf_voltage_v = 340
    drive_frequency_mhz = 21
    alpha = 2.0

    [experiment]
    n_ions = 7

    [output]
    format = both

    [run]
    seed = 0

Unknown sections or keys are rejected. Each subcommand has its own set of
experiment keys, and the experiment section must not be empty.
"""

from dataclasses import dataclass, field, replace
import configparser
import math

from .constants import AMU, TWO_PI, YB171, IonSpecies
from .errors import ConfigParseError, ValidationError
from .trap import TrapConfig


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text):
    return tuple(int(v) for v in text.replace(",", " ").split())


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (parser, SI multiplier or None)
TRAP_KEYS = {
    "rf_voltage_v": (float, 1.0),
    "dc_voltage_v": (float, 1.0),
    "radial_extent_um": (float, 1e-6),
    "axial_extent_um": (float, 1e-6),
    "drive_frequency_mhz": (float, TWO_PI * 1e6),
    "geometric_factor": (float, 1.0),
    "radial_asymmetry": (float, 1.0),
    "alpha": (float, 1.0),
}
SPECIES_KEYS = {
    "name": (str, None),
    "mass_amu": (float, AMU),
    "transition_wavelength_nm": (float, 1e-9),
    "raman_wavelength_nm": (float, 1e-9),
    "linewidth_mhz": (float, TWO_PI * 1e6),
}
OUTPUT_KEYS = {"format": (str, None), "svg": (_bool, None), "dir": (str, None)}
RUN_KEYS = {"seed": (int, None), "threads": (int, None)}

EXPERIMENT_KEYS = {
    "equilibrium": {
        "n_ions": (int, None),
        "constraint": (str, None),
        "n_random": (int, None),
    },
    "phase-diagram": {
        "n_min": (int, None),
        "n_max": (int, None),
        "method": (str, None),
        "tol_alpha": (float, None),
        "boundaries": (str, None),
    },
    "modes": {
        "n_ions": (int, None),
        "subspace": (str, None),
    },
    "md": {
        "n_ions": (int, None),
        "mode": (str, None),  # trajectory | heating
        "force_model": (str, None),
        "duration_us": (float, 1e-6),
        "steps_per_period": (int, None),
        "initial_temperature_mk": (float, 1e-3),
        "heat_times_ms": (_floats, 1e-3),
        "n_seeds": (int, None),
        "window_us": (float, 1e-6),
        "field_noise_psd_v2_m2_hz": (float, 1.0),
        "cooling": (_bool, None),
        "cool_time_us": (float, 1e-6),
    },
    "thermometry": {
        "mode": (str, None),  # voigt | heating | sideband | conversion
        "input_csv": (str, None),
        "temperature_r_mk": (float, 1e-3),
        "temperature_z_mk": (float, 1e-3),
        "theta_deg": (float, math.pi / 180),
        "saturation": (float, 1.0),
        "noise_fraction": (float, 1.0),
        "n_points": (int, None),
        "heating_rate_k_per_s": (float, 1.0),
        "heat_times_ms": (_floats, 1e-3),
        "nbar": (float, 1.0),
        "eta": (float, 1.0),
        "rabi_khz": (float, TWO_PI * 1e3),
        "max_time_us": (float, 1e-6),
        "ndot_per_s": (float, 1.0),
        "mode_frequency_khz": (float, TWO_PI * 1e3),
    },
    "validate": {
        "criteria": (_ints, None),
    },
}
SUBCOMMANDS = tuple(EXPERIMENT_KEYS)
SECTIONS = ("trap", "species", "experiment", "output", "run")


@dataclass
class RunConfig:
    subcommand: str
    trap: TrapConfig = field(default_factory=TrapConfig)
    alpha: float | None = None
    species: IonSpecies = YB171
    experiment: dict = field(default_factory=dict)  # SI values keyed without unit suffix
    raw: dict = field(default_factory=dict)  # the file as read, for provenance
    output_format: str = "both"
    svg: bool = False
    out_dir: str | None = None
    seed: int = 0
    threads: int = 1

    def get(self, key, default=None):
        return self.experiment.get(key, default)

    def resolved(self) -> dict:
        """Plain-JSON view of every value the run will use."""
        t = self.trap
        return {
            "subcommand": self.subcommand,
            "seed": self.seed,
            "trap": {
                "rf_voltage_v": t.rf_voltage, "dc_voltage_v": t.dc_voltage,
                "radial_extent_um": t.radial_extent * 1e6, "axial_extent_um": t.axial_extent * 1e6,
                "drive_frequency_mhz": t.drive_frequency / TWO_PI / 1e6,
                "geometric_factor": t.geometric_factor, "radial_asymmetry": t.radial_asymmetry,
                "alpha": self.alpha,
            },
            "species": {
                "name": self.species.name, "mass_amu": self.species.mass / AMU,
                "transition_wavelength_nm": self.species.transition_wavelength * 1e9,
                "raman_wavelength_nm": self.species.raman_wavelength * 1e9,
                "linewidth_mhz": self.species.natural_linewidth / TWO_PI / 1e6,
            },
            "experiment": {k: list(v) if isinstance(v, tuple) else v for k, v in sorted(self.raw_experiment().items())},
            "output": {"format": self.output_format, "svg": self.svg},
        }

    def raw_experiment(self):
        return dict(self.raw.get("experiment", {}))


def _strip_unit(key: str) -> str:
    for suffix in ("_k_per_s", "_per_s", "_v2_m2_hz", "_v", "_um", "_mhz", "_khz", "_nm", "_amu",
                   "_us", "_ms", "_mk", "_deg"):
        if key.endswith(suffix):
            return key[: -len(suffix)]
    return key


def _convert(section: str, schema: dict, items: dict) -> dict:
    out = {}
    for key, text in items.items():
        if key not in schema:
            raise ConfigParseError(f"unknown key {key!r} in [{section}]")
        parse, scale = schema[key]
        try:
            value = parse(text)
        except ValueError as exc:
            raise ConfigParseError(f"[{section}] {key}: {exc}") from exc
        if scale is not None and scale != 1.0:
            value = tuple(v * scale for v in value) if isinstance(value, tuple) else value * scale
        out[key] = value
    return out


def parse_config(text: str, subcommand: str) -> RunConfig:
    if subcommand not in SUBCOMMANDS:
        raise ValidationError(f"unknown subcommand {subcommand!r}")
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigParseError(str(exc)) from exc
    for sec in cp.sections():
        if sec not in SECTIONS:
            raise ConfigParseError(f"unknown section [{sec}]")
    raw = {sec: dict(cp[sec]) for sec in cp.sections()}

    trap_vals = _convert("trap", TRAP_KEYS, raw.get("trap", {}))
    alpha = trap_vals.pop("alpha", None)
    names = {"rf_voltage_v": "rf_voltage", "dc_voltage_v": "dc_voltage", "radial_extent_um": "radial_extent",
             "axial_extent_um": "axial_extent", "drive_frequency_mhz": "drive_frequency",
             "geometric_factor": "geometric_factor", "radial_asymmetry": "radial_asymmetry"}
    try:
        trap = replace(TrapConfig(), **{names[k]: v for k, v in trap_vals.items()})
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc

    sp = _convert("species", SPECIES_KEYS, raw.get("species", {}))
    spnames = {"name": "name", "mass_amu": "mass", "transition_wavelength_nm": "transition_wavelength",
               "raman_wavelength_nm": "raman_wavelength", "linewidth_mhz": "natural_linewidth"}
    species = replace(YB171, **{spnames[k]: v for k, v in sp.items()})

    if subcommand != "validate" and not raw.get("experiment"):
        raise ValidationError("the [experiment] section is missing or empty")
    exp = _convert("experiment", EXPERIMENT_KEYS[subcommand], raw.get("experiment", {}))
    exp = {_strip_unit(k): v for k, v in exp.items()}

    outp = _convert("output", OUTPUT_KEYS, raw.get("output", {}))
    run = _convert("run", RUN_KEYS, raw.get("run", {}))
    fmt = outp.get("format", "both")
    if fmt not in ("csv", "json", "both"):
        raise ValidationError("output format must be csv, json or both")
    if alpha is not None and alpha <= 0:
        raise ValidationError("alpha must be positive")
    if "n_ions" in exp and exp["n_ions"] < 1:
        raise ValidationError("n_ions must be at least 1")
    return RunConfig(subcommand, trap, alpha, species, exp, raw, fmt, outp.get("svg", False),
                     outp.get("dir"), run.get("seed", 0), run.get("threads", 1))


def load_config(path, subcommand: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigParseError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, subcommand)
