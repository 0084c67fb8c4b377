"""Run configuration: a flat INI document with strictly validated sections.

Unknown sections or keys are hard errors (anti-typo); every value is parsed
and range-checked before a run starts.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .grid import DomainSpec
from .initial import InitialSpec, PRESETS
from .stepper import Params, default_potential
from . import spectral


class ConfigError(ValueError):
    pass


@dataclass
class DiagnosticsFlags:
    dense_stokes: bool = False
    weak_residuals: bool = False
    energy_check: bool = False
    mass_check: bool = True
    n_lp_list: tuple = (2.0, 4.0)


@dataclass
class GnConfig:
    probes: int = 6
    ascent_iters: int = 200
    seed: int = 0


@dataclass
class RunConfig:
    domain: DomainSpec
    params: Params
    initial: InitialSpec
    t_end: float
    dt_max: float
    record_every: int = 10
    fixed_dt: bool = False
    diagnostics: DiagnosticsFlags = field(default_factory=DiagnosticsFlags)
    gn: GnConfig = field(default_factory=GnConfig)
    output_dir: str = "out"

    def __post_init__(self):
        if not self.t_end > 0:
            raise ConfigError(f"t_end must be positive, got {self.t_end}")
        if not self.dt_max > 0:
            raise ConfigError(f"dt_max must be positive, got {self.dt_max}")
        if self.record_every < 1:
            raise ConfigError(f"record_every must be >= 1, got {self.record_every}")
        if self.diagnostics.dense_stokes:
            n_dof = spectral.velocity_dof_count(self.domain)
            if n_dof > spectral.STOKES_MAX_DOF:
                raise ConfigError(
                    f"dense_stokes enabled but the grid has {n_dof} velocity "
                    f"unknowns (> {spectral.STOKES_MAX_DOF})"
                )
        if self.diagnostics.weak_residuals and not self.fixed_dt:
            raise ConfigError("weak_residuals needs fixed_dt (uniform trajectory samples)")


_SCHEMA = {
    "domain": {
        "length_x": float,
        "length_y": float,
        "cells_x": int,
        "cells_y": int,
    },
    "params": {
        "r": float,
        "mu": float,
        "gamma": float,
        "kappa": float,
        "epsilon": float,
        "sigma": float,
        "gravity": float,
    },
    "initial": {
        "preset": str,
        "seed": int,
        "mass": float,
        "n_level": float,
        "c_level": float,
        "c_amplitude": float,
        "u_amplitude": float,
    },
    "run": {
        "t_end": float,
        "dt_max": float,
        "record_every": int,
        "fixed_dt": bool,
    },
    "diagnostics": {
        "dense_stokes": bool,
        "weak_residuals": bool,
        "energy_check": bool,
        "mass_check": bool,
        "n_lp_list": str,
    },
    "gn": {
        "probes": int,
        "ascent_iters": int,
        "seed": int,
    },
    "output": {
        "dir": str,
    },
}

_REQUIRED = {
    "domain": ("length_x", "length_y", "cells_x", "cells_y"),
    "params": ("r", "mu", "gamma"),
    "run": ("t_end", "dt_max"),
    "initial": ("preset",),
}

_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _parse_value(section: str, key: str, raw: str):
    kind = _SCHEMA[section][key]
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in _BOOL_TRUE:
                return True
            if low in _BOOL_FALSE:
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: expected {kind.__name__}") from exc


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(path.read_text())
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    values: dict[str, dict] = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}] in {path}")
        values[section] = {}
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}] of {path}")
            values[section][key] = _parse_value(section, key, raw)

    for section, keys in _REQUIRED.items():
        if section not in values:
            raise ConfigError(f"missing required section [{section}]")
        for key in keys:
            if key not in values[section]:
                raise ConfigError(f"missing required key '{key}' in [{section}]")

    return build_config(values)


def build_config(values: dict) -> RunConfig:
    dom_kv = values["domain"]
    try:
        domain = DomainSpec(
            dom_kv["length_x"], dom_kv["length_y"], dom_kv["cells_x"], dom_kv["cells_y"]
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    p = values["params"]
    try:
        params = Params(
            r=p["r"],
            mu=p["mu"],
            gamma=p["gamma"],
            kappa=p.get("kappa", 1.0),
            epsilon=p.get("epsilon", 0.0),
            sigma=p.get("sigma", 0.2),
            potential=default_potential(domain, p.get("gravity", 1.0)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    ini = values["initial"]
    if ini["preset"] not in PRESETS:
        raise ConfigError(f"unknown preset {ini['preset']!r}; choose one of {PRESETS}")
    initial = InitialSpec(
        preset=ini["preset"],
        seed=ini.get("seed", 0),
        mass=ini.get("mass", 1.0),
        n_level=ini.get("n_level", 1.0),
        c_level=ini.get("c_level", 0.0),
        c_amplitude=ini.get("c_amplitude", 0.0),
        u_amplitude=ini.get("u_amplitude", 0.0),
    )

    diag_kv = values.get("diagnostics", {})
    n_lp = (2.0, 4.0)
    if "n_lp_list" in diag_kv:
        try:
            n_lp = tuple(float(x) for x in diag_kv["n_lp_list"].split(","))
        except ValueError as exc:
            raise ConfigError(f"n_lp_list must be comma-separated reals") from exc
    diagnostics = DiagnosticsFlags(
        dense_stokes=diag_kv.get("dense_stokes", False),
        weak_residuals=diag_kv.get("weak_residuals", False),
        energy_check=diag_kv.get("energy_check", False),
        mass_check=diag_kv.get("mass_check", True),
        n_lp_list=n_lp,
    )

    gn_kv = values.get("gn", {})
    gn = GnConfig(
        probes=gn_kv.get("probes", 6),
        ascent_iters=gn_kv.get("ascent_iters", 200),
        seed=gn_kv.get("seed", 0),
    )

    run_kv = values["run"]
    return RunConfig(
        domain=domain,
        params=params,
        initial=initial,
        t_end=run_kv["t_end"],
        dt_max=run_kv["dt_max"],
        record_every=run_kv.get("record_every", 10),
        fixed_dt=run_kv.get("fixed_dt", False),
        diagnostics=diagnostics,
        gn=gn,
        output_dir=values.get("output", {}).get("dir", "out"),
    )
