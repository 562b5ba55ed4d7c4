"""JSON run configuration with strict keys and unit-suffix conversion."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .fbl_power import CodingParams, PowerTable, build_power_table
from .queue_model import SystemConfig

SCHEMA = {
    "arrival": {"A": True, "alpha": True},
    "buffer": {"Q": True},
    "coding": {"S": True, "T_seconds": True, "B_hertz": True, "L_bits": True, "epsilon": True,
               "N0_watts_per_hertz": True},
    "power_table": {"powers": True, "T_seconds": False},
    "solve": {"p_th": False},
    "sweep": {"p_min": False, "p_max": False, "grid_points": False},
    "sim": {"n_slots": False, "warmup": False, "seed": False, "replicas": False, "initial_q": False},
}
REQUIRED_SECTIONS = ("arrival", "buffer")

_UNITS = {
    "T_seconds": {"s": 1.0, "ms": 1e-3, "us": 1e-6},
    "B_hertz": {"hz": 1.0, "khz": 1e3, "mhz": 1e6},
    "N0_watts_per_hertz": {"w_per_hz": 1.0, "dbm_per_hz": "dBm", "dbw_per_hz": "dBW"},
}
_NUM_UNIT = re.compile(r"^\s*([-+]?[0-9.]+(?:[eE][-+]?\d+)?)\s*([A-Za-z_]+)\s*$")


class ConfigError(ValueError):
    def __init__(self, path: str, msg: str):
        self.path = path
        super().__init__(f"{path}: {msg}")


@dataclass
class RunConfig:
    system: Optional[SystemConfig]
    power_table: PowerTable
    coding: Optional[CodingParams] = None
    slot_seconds: Optional[float] = None
    p_th: Optional[float] = None
    sweep: dict = field(default_factory=dict)
    sim: dict = field(default_factory=dict)
    conversions: list = field(default_factory=list)
    raw: dict = field(default_factory=dict)

    def delay_ms(self, slots: float) -> Optional[float]:
        return None if self.slot_seconds is None else slots * self.slot_seconds * 1e3


def _convert(key: str, value, path: str, conversions: list) -> float:
    if isinstance(value, bool):
        raise ConfigError(path, "expected a number")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str) or key not in _UNITS:
        raise ConfigError(path, f"expected a number, got {value!r}")
    m = _NUM_UNIT.match(value)
    if not m:
        raise ConfigError(path, f"cannot parse {value!r}; use a number or '<number><unit>'")
    num, unit = float(m.group(1)), m.group(2).lower()
    factor = _UNITS[key].get(unit)
    if factor is None:
        raise ConfigError(path, f"unknown unit {m.group(2)!r}; allowed {sorted(_UNITS[key])}")
    if factor == "dBm":
        si = 10 ** ((num - 30) / 10)
    elif factor == "dBW":
        si = 10 ** (num / 10)
    else:
        si = num * factor
    conversions.append((path, value, si))
    return si


def _int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigError(path, f"expected an integer, got {value!r}")
    return int(value)


def _num(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    return float(value)


def parse_config(doc: dict, need_system: bool = True) -> RunConfig:
    """Validate ``doc``; with ``need_system=False`` an invalid queue setup is tolerated."""
    if not isinstance(doc, dict):
        raise ConfigError("$", "top level must be an object")
    for key in doc:
        if key not in SCHEMA:
            raise ConfigError(key, "unknown section")
    for section in REQUIRED_SECTIONS:
        if section not in doc:
            raise ConfigError(section, "missing section")
    if ("coding" in doc) == ("power_table" in doc):
        raise ConfigError("$", "exactly one of 'coding' or 'power_table' is required")
    for section, body in doc.items():
        if not isinstance(body, dict):
            raise ConfigError(section, "must be an object")
        for key in body:
            if key not in SCHEMA[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")
        for key, required in SCHEMA[section].items():
            if required and key not in body:
                raise ConfigError(f"{section}.{key}", "missing key")

    conversions: list = []
    coding = None
    try:
        if "coding" in doc:
            c = doc["coding"]
            coding = CodingParams(
                slot_duration_T=_convert("T_seconds", c["T_seconds"], "coding.T_seconds", conversions),
                bandwidth_B=_convert("B_hertz", c["B_hertz"], "coding.B_hertz", conversions),
                packet_bits_L=_num(c["L_bits"], "coding.L_bits"),
                error_prob_eps=_num(c["epsilon"], "coding.epsilon"),
                noise_density_N0=_convert("N0_watts_per_hertz", c["N0_watts_per_hertz"],
                                          "coding.N0_watts_per_hertz", conversions),
                max_batch_S=_int(c["S"], "coding.S"),
            )
            table = build_power_table(coding)
            slot = coding.slot_duration_T
        else:
            pt = doc["power_table"]
            if not isinstance(pt["powers"], list):
                raise ConfigError("power_table.powers", "expected a list of watts")
            powers = [_num(p, f"power_table.powers[{i}]") for i, p in enumerate(pt["powers"])]
            table = PowerTable.explicit(powers)
            slot = None
            if "T_seconds" in pt:
                slot = _convert("T_seconds", pt["T_seconds"], "power_table.T_seconds", conversions)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("$", str(exc)) from exc
    A = _int(doc["arrival"]["A"], "arrival.A")
    alpha = _num(doc["arrival"]["alpha"], "arrival.alpha")
    Q = _int(doc["buffer"]["Q"], "buffer.Q")
    try:
        system = SystemConfig(A=A, alpha=alpha, Q=Q, power_table=table)
    except ValueError as exc:
        if need_system:
            raise ConfigError("$", str(exc)) from exc
        system = None

    p_th = None
    if "p_th" in doc.get("solve", {}):
        p_th = _num(doc["solve"]["p_th"], "solve.p_th")
    sweep = {}
    for key, value in doc.get("sweep", {}).items():
        sweep[key] = _int(value, f"sweep.{key}") if key == "grid_points" else _num(value, f"sweep.{key}")
    sim = {key: _int(value, f"sim.{key}") for key, value in doc.get("sim", {}).items()}
    if "initial_q" in sim and not 0 <= sim["initial_q"] <= Q:
        raise ConfigError("sim.initial_q", f"must lie in 0..{Q}")
    return RunConfig(system, table, coding, slot, p_th, sweep, sim, conversions, doc)


def load_config(path, need_system: bool = True) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from exc
    return parse_config(doc, need_system)
