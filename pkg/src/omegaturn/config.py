"""Run configuration: defaults, validation, overrides and hashing.

Configs are JSON documents.  Angles are given in degrees and converted to
radians by the builders at the bottom of this module.  Every key must be
known; the only free-form values are lists and the output directory.
"""

from __future__ import annotations

import copy
import hashlib
import json
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .chain import ChainGeometry, FeasibilitySpec
from .compliance import DEFAULT_DAMPING, DEFAULT_KC, DEFAULT_LOAD, AdmittanceParams
from .drag import FrictionModel
from .gaits import TwoWaveDesign, design_from_dict
from .multileg import STANCE_PATTERNS, MultilegGeometry
from .optimizer import OptimizerConfig

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """The configuration is malformed or fails validation."""


DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "seed": 0,
    "output_dir": "out",
    "geometry": {"num_joints": 8, "link_length": 0.07, "link_width": 0.05, "collision_margin": 0.0},
    "friction": {"mu": 0.3, "epsilon": 1e-8, "samples_per_link": 3},
    "simulation": {"steps_per_cycle": 400, "cycles": 3, "feasibility_samples": 200},
    # degrees except gamma, k_f, k_o (dimensionless) and omega (Hz)
    # shipped optimum for eight joints and k_o = 1
    "design": {"a_f": 41.1328125, "gamma": 0.03125, "phi_f": 120.0, "a_o": 42.890625, "phi_o": 199.375,
               "k_f": 1.5, "k_o": 1.0, "psi": 28.23271382600069, "omega": 0.1, "theta_max": 90.0},
    "sweep": {"parameter": "k_o", "values": [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5], "designs": "fixed"},
    "height": {"space": "turning", "tau_cells": 64, "amp_cells": 33, "k": 1.5, "r_max": 40.0, "cells": 65},
    "optimizer": {"grid_values": 9, "phase_samples": 200, "steps_per_cycle": 100, "tol": 0.05,
                  "max_outer": 6, "top_k": 3, "refine_levels": 3, "tau_cells": 48, "amp_cells": 33,
                  "starts": 8},
    "compliance": {"M": [1.0, 1.0], "B": [8.0, 8.0], "K": [8.0, 8.0], "A0": [45.0, 45.0],
                   "control_dt": 0.025, "k_c": DEFAULT_KC, "damping": DEFAULT_DAMPING, "load": DEFAULT_LOAD,
                   "peg_radius": 0.0125, "spacings": [0.3, 0.45, 0.6], "trials": 5, "cycles": 2},
    "multileg": {"segments": 5, "segment_length": 0.08, "body_width": 0.04, "leg_offset": 0.02,
                 "leg_length": 0.06, "mu_leg": 0.3, "mu_body": 0.03, "duty_factor": 0.5,
                 "body_amplitude": 30.0, "leg_amplitude": 30.0, "stance_pattern": "antiphase",
                 "A3_values": [0.0, 5.0, 10.0, 15.0, 20.0], "omega": 0.1, "cycles": 1,
                 "steps_per_cycle": 400, "phi_cells": 64, "w3_max": 30.0, "w3_cells": 41},
}

SWEEP_PARAMETERS = ("k_o", "theta_max", "k_f", "num_joints")
DESIGN_SOURCES = ("fixed", "frozen", "optimize")
HEIGHT_SPACES = ("turning", "forward", "phase", "geometric")


def _check_types(cfg, ref, path=""):
    for key, val in cfg.items():
        where = f"{path}{key}"
        if key not in ref:
            raise ConfigError(f"unknown key: {where}")
        expect = ref[key]
        if isinstance(expect, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{where} must be an object")
            _check_types(val, expect, where + ".")
        elif isinstance(expect, list):
            if not isinstance(val, list) or not all(_is_number(v) for v in val):
                raise ConfigError(f"{where} must be a list of numbers")
        elif isinstance(expect, bool):
            if not isinstance(val, bool):
                raise ConfigError(f"{where} must be a boolean")
        elif isinstance(expect, int) and not isinstance(expect, bool) and key != "collision_margin":
            if isinstance(val, bool) or not isinstance(val, int):
                raise ConfigError(f"{where} must be an integer")
        elif isinstance(expect, float) or key == "collision_margin":
            if not _is_number(val):
                raise ConfigError(f"{where} must be a number")
        elif isinstance(expect, str) and not isinstance(val, str):
            raise ConfigError(f"{where} must be a string")


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and np.isfinite(v)


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate(cfg: dict) -> dict:
    """Merge ``cfg`` over the defaults and check it; returns the full config."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    version = cfg.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    _check_types(cfg, DEFAULTS)
    full = _merge(DEFAULTS, cfg)
    s = full["sweep"]
    if s["parameter"] not in SWEEP_PARAMETERS:
        raise ConfigError(f"sweep.parameter must be one of {SWEEP_PARAMETERS}")
    if s["designs"] not in DESIGN_SOURCES:
        raise ConfigError(f"sweep.designs must be one of {DESIGN_SOURCES}")
    if not s["values"]:
        raise ConfigError("sweep.values must not be empty")
    if full["height"]["space"] not in HEIGHT_SPACES:
        raise ConfigError(f"height.space must be one of {HEIGHT_SPACES}")
    if full["multileg"]["stance_pattern"] not in STANCE_PATTERNS:
        raise ConfigError(f"multileg.stance_pattern must be one of {STANCE_PATTERNS}")
    if full["seed"] < 0:
        raise ConfigError("seed must be >= 0")
    # build every object once so range errors surface as config errors
    try:
        geometry(full)
        friction(full)
        design(full)
        optimizer_config(full)
        admittance(full)
        multileg_geometry(full)
        if full["simulation"]["steps_per_cycle"] < 100 or full["simulation"]["cycles"] < 1:
            raise ValueError("simulation needs steps_per_cycle >= 100 and cycles >= 1")
        if full["compliance"]["trials"] < 1 or full["compliance"]["cycles"] < 1:
            raise ValueError("compliance trials and cycles must be >= 1")
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return full


def parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, assignments) -> dict:
    """Apply ``key.sub=value`` strings; values are parsed as JSON when possible."""
    out = copy.deepcopy(cfg)
    for item in assignments or ():
        if "=" not in item:
            raise ConfigError(f"override must look like key=value: {item!r}")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot override inside non-object {key!r}")
        node[parts[-1]] = parse_value(raw)
    return out


def shipped_configs() -> list[str]:
    root = resources.files("omegaturn").joinpath("configs")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def read_config_text(path) -> str:
    """Read a config file, or a shipped example when ``path`` is a bare name like ``fig4``."""
    if not Path(path).exists() and str(path) in shipped_configs():
        return resources.files("omegaturn").joinpath(f"configs/{path}.json").read_text()
    with open(path) as fh:
        return fh.read()


def load_config(path=None, overrides=None) -> dict:
    raw = {}
    if path is not None:
        text = read_config_text(path)
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return validate(apply_overrides(raw, overrides))


def dumps(cfg: dict) -> str:
    return json.dumps(cfg, indent=2, sort_keys=True) + "\n"


def config_hash(cfg: dict) -> str:
    # the output location does not change results, so it is left out
    body = {k: v for k, v in cfg.items() if k != "output_dir"}
    payload = json.dumps(body, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(payload).hexdigest()[:16]


def provenance(cfg: dict) -> dict:
    return {"config_hash": config_hash(cfg), "tool_version": __version__}


# builders ------------------------------------------------------------------

def geometry(cfg) -> ChainGeometry:
    g = cfg["geometry"]
    return ChainGeometry(g["num_joints"], g["link_length"], g["link_width"])


def feasibility(cfg) -> FeasibilitySpec:
    return FeasibilitySpec(np.radians(cfg["design"]["theta_max"]), cfg["geometry"]["collision_margin"])


def friction(cfg) -> FrictionModel:
    f = cfg["friction"]
    return FrictionModel(f["mu"], f["epsilon"], f["samples_per_link"])


def design(cfg) -> TwoWaveDesign:
    return design_from_dict(cfg["design"])


def optimizer_config(cfg) -> OptimizerConfig:
    o = dict(cfg["optimizer"])
    return OptimizerConfig(collision_margin=cfg["geometry"]["collision_margin"], seed=cfg["seed"], **o)


def admittance(cfg) -> AdmittanceParams:
    c = cfg["compliance"]
    if any(len(c[k]) != 2 for k in ("M", "B", "K", "A0")):
        raise ValueError("compliance M, B, K and A0 need two entries")
    return AdmittanceParams(tuple(c["M"]), tuple(c["B"]), tuple(c["K"]), tuple(np.radians(c["A0"])),
                            c["control_dt"], c["k_c"])


def multileg_geometry(cfg) -> MultilegGeometry:
    m = cfg["multileg"]
    return MultilegGeometry(m["segments"], m["segment_length"], m["body_width"], m["leg_offset"],
                            m["leg_length"], m["mu_leg"], m["mu_body"], m["duty_factor"],
                            np.radians(m["body_amplitude"]), np.radians(m["leg_amplitude"]),
                            stance_pattern=m["stance_pattern"])
