"""Optimizer outputs shipped with the package.

``data/designs.json`` holds the best design found by :func:`omegaturn.optimizer.optimize`
(eight quasi-random starts, default settings) for each studied combination of
joint count, turning-wave frequency, forward-wave frequency and joint limit.
Regenerate with ``omegaturn optimize`` or ``omegaturn sweep`` with
``sweep.designs = "optimize"``.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

from .gaits import TwoWaveDesign, design_from_dict


@lru_cache(maxsize=1)
def _table() -> tuple:
    text = resources.files("omegaturn").joinpath("data/designs.json").read_text()
    return tuple(json.loads(text)["designs"])


def frozen_entries() -> list[dict]:
    return [dict(e) for e in _table()]


def frozen_design(num_joints: int = 8, k_o: float = 1.0, k_f: float = 1.5, theta_max_deg: float = 90.0) -> TwoWaveDesign:
    """Look up a shipped design; raises ``KeyError`` when the combination was not optimized."""
    for e in _table():
        d = e["design"]
        if (e["num_joints"] == num_joints and abs(d["k_o"] - k_o) < 1e-9 and abs(d["k_f"] - k_f) < 1e-9
                and abs(d["theta_max"] - theta_max_deg) < 1e-9):
            return design_from_dict(d)
    raise KeyError(f"no shipped design for N={num_joints}, k_o={k_o}, k_f={k_f}, theta_max={theta_max_deg}")
