"""JSON trap configuration with unit-suffixed values.

Example::

    {
      "geometry": {"a": "650um", "b": "3.24mm"},
      "drive": {"v_rf": "300V", "frequency": "8.07MHz", "epsilon": 0.0},
      "species": {"preset": "88Sr+"}
    }

Every value is normalized to plain SI floats at parse time. The normalized
form (what :func:`normalize` returns) is itself a valid config, so reports
that embed it can be fed back in.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
import re

from .constants import ATOMIC_MASS_UNIT, ELEMENTARY_CHARGE, SPECIES_PRESETS
from .fieldcore import IonSpecies, RfDrive, RingGeometry, TrapConfig


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


UNITS = {
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "μm": 1e-6,
               "nm": 1e-9},
    "voltage": {"V": 1.0, "mV": 1e-3, "kV": 1e3},
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "μs": 1e-6, "ns": 1e-9},
    "efield": {"V/m": 1.0, "V/cm": 1e2, "V/mm": 1e3, "mV/m": 1e-3},
    "dimensionless": {},
}

_QUANTITY = re.compile(r"^\s*([+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)\s*(\S*)\s*$")

SCHEMA = {
    "geometry": {"a": "length", "b": "length"},
    "drive": {"v_rf": "voltage", "frequency": "frequency", "epsilon": "dimensionless"},
}
SPECIES_KEYS = {"preset", "mass_amu", "charge_e"}

DEFAULT_CONFIG = {
    # depth-optimal ring scaled to a 1 mm node height, 300 V at 8 MHz, 88Sr+
    "geometry": {"a": "0.651679mm", "b": "3.57668mm"},
    "drive": {"v_rf": "300V", "frequency": "8MHz", "epsilon": 0.0},
    "species": {"preset": "88Sr+"},
}


def parse_quantity(value, dimension: str, where: str = "value") -> float:
    """Convert ``value`` (number or string like "650um") to an SI float."""
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        out = float(value)
    elif isinstance(value, str):
        m = _QUANTITY.match(value)
        if not m:
            raise ConfigError(f"{where}: cannot parse quantity {value!r}")
        number, unit = m.groups()
        if unit:
            table = UNITS[dimension]
            if unit not in table:
                allowed = ", ".join(table) or "none (dimensionless)"
                raise ConfigError(f"{where}: unit {unit!r} not valid here; allowed: {allowed}")
            out = float(number) * table[unit]
        else:
            out = float(number)
    else:
        raise ConfigError(f"{where}: expected a number or string, got {type(value).__name__}")
    if not math.isfinite(out):
        raise ConfigError(f"{where}: value must be finite")
    return out


def _check_keys(section, allowed, where):
    if not isinstance(section, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}; allowed: {sorted(allowed)}")


def normalize(raw: dict) -> dict:
    """Validate ``raw`` and return it with all values as SI floats."""
    _check_keys(raw, set(SCHEMA) | {"species"}, "config")
    out = {}
    for section, fields in SCHEMA.items():
        sec = raw.get(section)
        if sec is None:
            raise ConfigError(f"{section}: missing section")
        _check_keys(sec, fields, section)
        out[section] = {}
        for key, dim in fields.items():
            if key not in sec:
                if key == "epsilon":
                    out[section][key] = 0.0
                    continue
                raise ConfigError(f"{section}.{key}: missing")
            out[section][key] = parse_quantity(sec[key], dim, f"{section}.{key}")

    sp = raw.get("species", {"preset": "88Sr+"})
    _check_keys(sp, SPECIES_KEYS, "species")
    if "preset" in sp:
        if len(sp) > 1:
            raise ConfigError("species: give either 'preset' or 'mass_amu'/'charge_e', not both")
        if sp["preset"] not in SPECIES_PRESETS:
            raise ConfigError(f"species.preset: unknown {sp['preset']!r}; "
                              f"known: {sorted(SPECIES_PRESETS)}")
        mass_amu, charge_e = SPECIES_PRESETS[sp["preset"]]
    else:
        if "mass_amu" not in sp:
            raise ConfigError("species.mass_amu: missing")
        mass_amu = parse_quantity(sp["mass_amu"], "dimensionless", "species.mass_amu")
        charge_e = parse_quantity(sp.get("charge_e", 1), "dimensionless", "species.charge_e")
    out["species"] = {"mass_amu": float(mass_amu), "charge_e": float(charge_e)}
    build(out)  # domain invariants
    return out


def build(norm: dict) -> TrapConfig:
    """TrapConfig from a normalized config dict."""
    g, d, s = norm["geometry"], norm["drive"], norm["species"]
    try:
        geom = RingGeometry(g["a"], g["b"])
    except ValueError as exc:
        raise ConfigError(f"geometry: {exc}") from None
    try:
        drive = RfDrive(d["v_rf"], 2.0 * math.pi * d["frequency"], d["epsilon"])
    except ValueError as exc:
        raise ConfigError(f"drive: {exc}") from None
    try:
        species = IonSpecies(s["charge_e"] * ELEMENTARY_CHARGE, s["mass_amu"] * ATOMIC_MASS_UNIT)
    except ValueError as exc:
        raise ConfigError(f"species: {exc}") from None
    return TrapConfig(geom, drive, species)


def merge(base: dict, overrides: dict) -> dict:
    """Overlay ``overrides`` on ``base``.

    A report (anything with a top-level "config" key) contributes its
    embedded config. Geometry and drive merge key by key; species is
    replaced as a whole.
    """
    if "config" in overrides:
        overrides = overrides["config"]
    out = copy.deepcopy(base)
    for section, value in overrides.items():
        if section in SCHEMA and isinstance(value, dict) and isinstance(out.get(section), dict):
            out[section].update(value)
        else:
            out[section] = copy.deepcopy(value)
    return out


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def load(path=None, overrides_path=None) -> tuple[TrapConfig, dict]:
    """Read, merge and normalize; returns (TrapConfig, normalized dict)."""
    raw = DEFAULT_CONFIG if path is None else _read_json(path)
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be an object")
    if "config" in raw:
        raw = raw["config"]
    if overrides_path is not None:
        ov = _read_json(overrides_path)
        if not isinstance(ov, dict):
            raise ConfigError("overrides: top level must be an object")
        raw = merge(raw, ov)
    try:
        norm = normalize(raw)
    except ConfigError as exc:
        where = path or "default config"
        raise ConfigError(f"{where}: {exc}") from None
    return build(norm), norm


def config_hash(norm: dict, **params) -> str:
    blob = json.dumps({"config": norm, "params": params}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()
