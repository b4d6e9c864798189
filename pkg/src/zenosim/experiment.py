"""Experiment-spec ingestion and tabular result records.

Specs are YAML files with four sections (device, drives, sim, protocol), all
values in MHz/µs as quoted in configuration. Unknown keys are rejected with a
nearest-key suggestion; missing keys take the documented defaults (the device
defaults are the published values). Every output row carries the hash of the
fully resolved spec so results are traceable to their inputs.
"""

from __future__ import annotations

import difflib
import hashlib
import json
import math
from dataclasses import dataclass, field

import yaml

from . import __version__
from .device import DeviceParams, DriveConfig

__all__ = ["SpecError", "ExperimentSpec", "parse_spec", "SweepResult", "PROTOCOLS"]

PROTOCOLS = ("block-sweep", "gate-evolve", "eps-sweep", "bound-table",
             "tomo-roundtrip", "postselect", "calibrate", "trajectories")


class SpecError(Exception):
    """Invalid experiment spec (unknown key, bad type, physical invariant)."""


_DEVICE_KEYS = {
    "chi1_mhz": ("chi1", -4.25),
    "chi2_mhz": ("chi2", -4.35),
    "chif_mhz": ("chif", -10.0),
    "kappa_mhz": ("kappa", 0.15),
    "alpha1_mhz": ("alpha1", -175.0),
    "alpha2_mhz": ("alpha2", -225.0),
    "self_kerr_mhz": ("self_kerr", 0.04),
    "t1_eg_us": ("t1_eg", 52.0),
    "t1_fe_us": ("t1_fe", 12.9),
    "t2s_eg_us": ("t2s_eg", 22.2),
    "t2s_fe_us": ("t2s_fe", 5.8),
    "t1_q2_us": ("t1_q2", 18.9),
    "t2s_q2_us": ("t2s_q2", 15.7),
    "residual_zz_khz": ("residual_zz", 30.0),
    "residual_zz_on": ("residual_zz_on", False),
}

_DRIVE_KEYS = {
    "rabi_mhz": 1.0,
    "zeno_amp_mhz": 2.0,
    "symmetric_on": True,
    "gate_time_us": None,
}

_SIM_KEYS = {
    "fock_dim": 20,
    "dt_ns": None,          # None: solver chooses from the phase budget
    "sample_stride_ns": 100,
    "seed": 12345,
    "jobs": 1,
}

_PROTOCOL_KEYS = {
    "name": "gate-evolve",
    "eps_list_mhz": [0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
    "rabi_list_mhz": [0.1, 1.0, 2.0],
    "markovian_rabi_mhz": 0.02,
    "coherence": "finite",
    "fractions": [0.0, 0.02, 0.05, 0.1],
    "detection_fidelity": 0.75,
    "n_traj": 2000,
    "shots": 0,
    "n_states": 3,
    "ratios": [0.01, 0.02, 0.03, 0.04, 0.05, 0.06],
    "blocking_model": "full-cavity",
}

_BOOL_KEYS = {"residual_zz_on", "symmetric_on"}
_LIST_KEYS = {"eps_list_mhz", "rabi_list_mhz", "fractions", "ratios"}
_STR_KEYS = {"name", "coherence", "blocking_model"}
_OPTIONAL_KEYS = {"gate_time_us", "dt_ns"}
_INT_KEYS = {"fock_dim", "seed", "jobs", "n_traj", "shots", "n_states", "sample_stride_ns"}


def _reject_unknown(section: str, given: dict, known):
    for key in given:
        if key not in known:
            hint = difflib.get_close_matches(key, known, n=1)
            suffix = f"; did you mean {hint[0]!r}?" if hint else ""
            raise SpecError(f"unknown key {section}.{key!r}{suffix}")


def _coerce(section: str, key: str, value, default):
    if value is None and key in _OPTIONAL_KEYS:
        return None
    if key in _BOOL_KEYS:
        if not isinstance(value, bool):
            raise SpecError(f"{section}.{key} must be a boolean, got {value!r}")
        return value
    if key in _STR_KEYS:
        if not isinstance(value, str):
            raise SpecError(f"{section}.{key} must be a string, got {value!r}")
        return value
    if key in _LIST_KEYS:
        if not isinstance(value, (list, tuple)) or not value:
            raise SpecError(f"{section}.{key} must be a non-empty list, got {value!r}")
        try:
            return [float(v) for v in value]
        except (TypeError, ValueError):
            raise SpecError(f"{section}.{key} must contain numbers, got {value!r}") from None
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise SpecError(f"{section}.{key} must be an integer, got {value!r}")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecError(f"{section}.{key} must be a number, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class ExperimentSpec:
    """Fully resolved experiment configuration."""

    device: DeviceParams
    drives: dict
    sim: dict
    protocol: dict
    resolved: dict = field(repr=False)
    spec_hash: str = ""

    def with_sim(self, sim: dict) -> "ExperimentSpec":
        resolved = {k: dict(v) for k, v in self.resolved.items()}
        resolved["sim"] = dict(sim)
        return ExperimentSpec(device=self.device, drives=self.drives, sim=dict(sim),
                              protocol=self.protocol, resolved=resolved,
                              spec_hash=_hash(resolved))

    def dt_us(self):
        return None if self.sim["dt_ns"] is None else self.sim["dt_ns"] * 1e-3

    def drive_config(self, **overrides) -> DriveConfig:
        base = dict(
            rabi_freq=self.drives["rabi_mhz"],
            zeno_amp=self.drives["zeno_amp_mhz"],
            symmetric_on=self.drives["symmetric_on"],
            gate_time=self.drives["gate_time_us"],
        )
        base.update(overrides)
        return DriveConfig(**base)


def _hash(resolved: dict) -> str:
    blob = json.dumps(resolved, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def parse_spec(path=None) -> ExperimentSpec:
    """Load and validate a spec file; None or an empty file yields the full
    default (published-value) spec."""
    raw = {}
    if path is not None:
        try:
            with open(path) as fh:
                raw = yaml.safe_load(fh) or {}
        except FileNotFoundError:
            raise SpecError(f"spec file not found: {path}") from None
        except yaml.YAMLError as exc:
            raise SpecError(f"spec is not valid YAML: {exc}") from None
    if not isinstance(raw, dict):
        raise SpecError("spec must be a mapping of sections")
    _reject_unknown("spec", raw, ("device", "drives", "sim", "protocol"))

    sections = {}
    for section, keys in (
        ("device", {k: d for k, (_, d) in _DEVICE_KEYS.items()}),
        ("drives", _DRIVE_KEYS),
        ("sim", _SIM_KEYS),
        ("protocol", _PROTOCOL_KEYS),
    ):
        given = raw.get(section) or {}
        if not isinstance(given, dict):
            raise SpecError(f"section {section!r} must be a mapping")
        _reject_unknown(section, given, keys)
        out = {}
        for key, default in keys.items():
            value = given.get(key, default)
            if key in given:
                value = _coerce(section, key, value, default)
            out[key] = value
        sections[section] = out

    dev_kwargs = {attr: sections["device"][k] for k, (attr, _) in _DEVICE_KEYS.items()}
    try:
        device = DeviceParams(**dev_kwargs)
    except ValueError as exc:
        raise SpecError(f"device invariant violated: {exc}") from None
    if sections["protocol"]["name"] not in PROTOCOLS:
        raise SpecError(
            f"protocol.name must be one of {PROTOCOLS}, got {sections['protocol']['name']!r}"
        )
    if sections["sim"]["fock_dim"] < 2:
        raise SpecError("sim.fock_dim must be at least 2")
    if sections["protocol"]["coherence"] not in ("finite", "infinite"):
        raise SpecError("protocol.coherence must be 'finite' or 'infinite'")
    resolved = {k: dict(v) for k, v in sections.items()}
    return ExperimentSpec(
        device=device,
        drives=sections["drives"],
        sim=sections["sim"],
        protocol=sections["protocol"],
        resolved=resolved,
        spec_hash=_hash(resolved),
    )


def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return format(value, ".12g")
    if isinstance(value, bool):
        return str(value).lower()
    return str(value)


@dataclass
class SweepResult:
    """Tabular protocol output with fixed column schema per subcommand.

    Every row carries the spec hash; serialization is deterministic (sorted
    JSON metadata, fixed float formatting, '\\n' line ends, no timestamps).
    """

    subcommand: str
    columns: tuple[str, ...]
    rows: list[tuple]
    spec_hash: str
    seed: int
    extra_metadata: dict = field(default_factory=dict)

    def write_csv(self, path):
        cols = tuple(self.columns) + ("spec_hash",)
        lines = [",".join(cols)]
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError("row width does not match the column schema")
            lines.append(",".join([_fmt(v) for v in row] + [self.spec_hash]))
        with open(path, "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")

    def write_meta(self, path):
        meta = {
            "subcommand": self.subcommand,
            "columns": list(self.columns),
            "n_rows": len(self.rows),
            "spec_hash": self.spec_hash,
            "seed": self.seed,
            "version": __version__,
        }
        meta.update(self.extra_metadata)
        with open(path, "w") as fh:
            json.dump(meta, fh, indent=1, sort_keys=True)
            fh.write("\n")
