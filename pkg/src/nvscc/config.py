"""Run configuration: INI-style file sections, ``key=value`` overrides and CLI flags."""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in str(text).replace(";", ",").split(",") if t.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in str(text).replace(";", ",").split(",") if t.strip())


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional_str(text):
    return None if text in (None, "", "none", "None") else str(text)


def _optional_float(text):
    return None if text in (None, "", "none", "None") else float(text)


# section -> key -> (parser, default)
DEFAULTS = {
    "run": {
        "seed": (int, 0),
        "data_dir": (_optional_str, None),
    },
    "rates": {
        "radiative": (float, 65.3),
        "upper_isc_0": (float, 6.7),
        "upper_isc_pm": (float, 53.0),
        "lower_isc_0": (float, 2.38),
        "lower_isc_pm": (float, 0.35),
    },
    "sideband": {
        "huang_rhys": (float, 3.49),
        "temperature": (float, 300.0),
        "n_max": (int, 8),
        "step_ev": (float, 5e-4),
        "half_range_ev": (float, 1.5),
        "zpl_ev": (float, 1.945),
        "zpl_linewidth_thz": (float, 1.0),
        "one_phonon": (_optional_str, None),
    },
    "protocol": {
        "protocol": (str, "electrode_scc"),
        "runs": (int, 1),
        "sigma_pump": (_optional_float, None),
        "sigma_ion": (_optional_float, None),
        "shared_power": (_bool, True),
        "x_max_mhz": (float, 500.0),
        "i_max_mhz": (float, 5000.0),
        "t_pump_max_us": (float, 5.0),
        "t_ion_max_us": (float, 5.0),
        "starts": (int, 16),
        "curve_starts": (int, 8),
        "x_values_mhz": (_floats, (0, 2, 5, 10, 15, 20, 25, 30, 40, 50, 75, 100, 150, 200, 300, 500)),
        "t_pump_values_us": (_floats, (0, 0.01, 0.02, 0.04, 0.06, 0.08, 0.1, 0.12, 0.15, 0.2, 0.3, 0.5, 1.0)),
        "sigma_values": (_floats, (0, 0.05, 0.1, 0.15, 0.2, 0.26, 0.3, 0.4, 0.5)),
        "sigma_runs": (_ints, (1, 3)),
    },
    "electrode": {
        "v_max": (float, 1.0),
        "n_potentials": (int, 5),
        "radius_nm": (float, 100.0),
        "nv_depth_nm": (float, 10.0),
        "dielectric_constant": (float, 5.7),
        "insulator_thickness_nm": (float, 0.0),
        "m_longitudinal": (float, 1.56),
        "m_transverse": (float, 0.28),
        "radial_extent_nm": (float, 300.0),
        "axial_extent_nm": (float, 120.0),
        "n_radial": (int, 120),
        "n_axial": (int, 480),
    },
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    out: Path
    values: dict = field(default_factory=dict)

    def __getitem__(self, dotted: str):
        section, key = dotted.split(".")
        return self.values[section][key]

    @property
    def seed(self) -> int:
        return self.values["run"]["seed"]

    @property
    def data_dir(self) -> Path | None:
        d = self.values["run"]["data_dir"] or os.environ.get("NVSCC_DATA_DIR")
        return Path(d) if d else None


def _locate(key: str) -> tuple[str, str]:
    if "." in key:
        section, name = key.split(".", 1)
        if section not in DEFAULTS or name not in DEFAULTS[section]:
            raise ConfigError(f"unknown configuration key {key!r}")
        return section, name
    hits = [s for s, keys in DEFAULTS.items() if key in keys]
    if not hits:
        raise ConfigError(f"unknown configuration key {key!r}")
    if len(hits) > 1:
        raise ConfigError(f"ambiguous key {key!r}; qualify it as one of {[h + '.' + key for h in hits]}")
    return hits[0], key


def load_config(
    subcommand: str,
    out,
    config_path=None,
    overrides=(),
    flags: dict | None = None,
) -> RunConfig:
    """Merge defaults, an optional config file, ``key=value`` overrides and flags (in that order)."""
    raw: dict[tuple[str, str], object] = {}
    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        parser = configparser.ConfigParser()
        parser.read(path)
        for section in parser.sections():
            for key, value in parser.items(section):
                raw[_locate(f"{section}.{key}")] = value
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = item.split("=", 1)
        raw[_locate(key.strip().replace("-", "_"))] = value.strip()
    for key, value in (flags or {}).items():
        if value is not None:
            raw[_locate(key)] = value

    values = {s: {k: default for k, (_, default) in keys.items()} for s, keys in DEFAULTS.items()}
    for (section, key), value in raw.items():
        conv = DEFAULTS[section][key][0]
        try:
            values[section][key] = conv(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {section}.{key}: {value!r} ({exc})") from exc
    return RunConfig(subcommand=subcommand, out=Path(out), values=values)
