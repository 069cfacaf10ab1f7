"""Built-in model zoo.

Four operators used throughout the test-suite and as CLI shorthands:

* ``scalar_tanh``  -- scalar transport operator with drift tanh(x); single
  mode k(x,E) = E tanh(x), exactly solvable superpositions.
* ``adiabatic2``   -- two-level system H(x,E) = E I + V(x) with
  V = [[tanh x, delta], [delta, -tanh x]]; one avoided crossing at x=0 of
  width 2 delta, the standard two-mode transition scenario.
* ``bo2``          -- second order in x, R = (E - k^2/2) I - V(x) with the
  same V; four modes +-sqrt(2(E - e_pm(x))), quadratic asymptotic
  dispersion, transmitted-wave scenario.
* ``const2``       -- x-independent two-level system; trivial scattering.

Each entry also carries a reference Gaussian energy density used by the
packet-level checks.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Dict

from .symbol import ModelSpec, model_from_dict

__all__ = ["zoo_names", "get_model", "get_model_doc", "density_defaults", "write_zoo"]


def _doc_scalar_tanh() -> Dict:
    return {
        "name": "scalar_tanh",
        "d": 1, "m": 1, "r": 1,
        "delta": 0.0,
        "A": {
            "0,1": [["tanh(x)"]],
            "1,0": [["-1"]],
        },
        "A_limits": {
            "0,1,-": [["-1"]], "0,1,+": [["1"]],
            "1,0,-": [["-1"]], "1,0,+": [["-1"]],
        },
        "energy_window": [1.0, 2.0],
        "strip_half_width": 0.6,
        "decay_exponent": 1.0,
        "truncation": 20.0,
        "quadratic_dispersion": [[1, "-"], [1, "+"]],
    }


def _doc_adiabatic2(delta: float = 0.25) -> Dict:
    return {
        "name": "adiabatic2",
        "d": 2, "m": 1, "r": 1,
        "delta": delta,
        "A": {
            "0,0": [["tanh(x)", "delta"], ["delta", "-tanh(x)"]],
            "0,1": [["1", "0"], ["0", "1"]],
            "1,0": [["-1", "0"], ["0", "-1"]],
        },
        "A_limits": {
            "0,0,-": [["-1", "delta"], ["delta", "1"]],
            "0,0,+": [["1", "delta"], ["delta", "-1"]],
            "0,1,-": [["1", "0"], ["0", "1"]],
            "0,1,+": [["1", "0"], ["0", "1"]],
            "1,0,-": [["-1", "0"], ["0", "-1"]],
            "1,0,+": [["-1", "0"], ["0", "-1"]],
        },
        "energy_window": [1.2, 1.8],
        "strip_half_width": 0.6,
        "decay_exponent": 1.0,
        "truncation": 20.0,
        "quadratic_dispersion": [[1, "-"], [1, "+"], [2, "-"], [2, "+"]],
    }


def _doc_bo2(delta: float = 0.25) -> Dict:
    return {
        "name": "bo2",
        "d": 2, "m": 2, "r": 1,
        "delta": delta,
        "A": {
            "0,0": [["-tanh(x)", "-delta"], ["-delta", "tanh(x)"]],
            "0,1": [["1", "0"], ["0", "1"]],
            "2,0": [["-0.5", "0"], ["0", "-0.5"]],
        },
        "A_limits": {
            "0,0,-": [["1", "-delta"], ["-delta", "-1"]],
            "0,0,+": [["-1", "-delta"], ["-delta", "1"]],
            "0,1,-": [["1", "0"], ["0", "1"]],
            "0,1,+": [["1", "0"], ["0", "1"]],
            "2,0,-": [["-0.5", "0"], ["0", "-0.5"]],
            "2,0,+": [["-0.5", "0"], ["0", "-0.5"]],
        },
        "energy_window": [1.8, 2.72],
        "strip_half_width": 0.6,
        "decay_exponent": 1.0,
        "truncation": 16.0,
        "quadratic_dispersion": [
            [1, "-"], [1, "+"], [2, "-"], [2, "+"],
            [3, "-"], [3, "+"], [4, "-"], [4, "+"],
        ],
    }


def _doc_const2(delta: float = 0.25) -> Dict:
    return {
        "name": "const2",
        "d": 2, "m": 1, "r": 1,
        "delta": delta,
        "A": {
            "0,0": [["0.3", "delta"], ["delta", "-0.3"]],
            "0,1": [["1", "0"], ["0", "1"]],
            "1,0": [["-1", "0"], ["0", "-1"]],
        },
        "A_limits": {
            "0,0,-": [["0.3", "delta"], ["delta", "-0.3"]],
            "0,0,+": [["0.3", "delta"], ["delta", "-0.3"]],
            "0,1,-": [["1", "0"], ["0", "1"]],
            "0,1,+": [["1", "0"], ["0", "1"]],
            "1,0,-": [["-1", "0"], ["0", "-1"]],
            "1,0,+": [["-1", "0"], ["0", "-1"]],
        },
        "energy_window": [1.2, 1.8],
        "strip_half_width": 0.6,
        "decay_exponent": 1.0,
        "truncation": 20.0,
        "quadratic_dispersion": [[1, "-"], [1, "+"], [2, "-"], [2, "+"]],
    }


_BUILDERS = {
    "scalar_tanh": _doc_scalar_tanh,
    "adiabatic2": _doc_adiabatic2,
    "bo2": _doc_bo2,
    "const2": _doc_const2,
}

# Reference Gaussian densities: Q = exp(-G/eps) exp(-iJ/eps) P with
# G = g (E - E0)^2 / 2, J = 0, P = 1.
_DENSITIES = {
    "scalar_tanh": {"E0": 1.5, "g": 1.0},
    "adiabatic2": {"E0": 1.5, "g": 6.0},
    "bo2": {"E0": 2.25, "g": 4.0},
    "const2": {"E0": 1.5, "g": 4.0},
}


def zoo_names():
    return tuple(sorted(_BUILDERS))


def get_model_doc(name: str, **kwargs) -> Dict:
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise KeyError(f"unknown zoo model {name!r}; known: {zoo_names()}") from None
    return builder(**kwargs)


def get_model(name: str, **kwargs) -> ModelSpec:
    return model_from_dict(get_model_doc(name, **kwargs))


def density_defaults(name: str) -> Dict:
    d = dict(_DENSITIES[name])
    e0, g = d["E0"], d["g"]
    d["G"] = f"{g}*(E-{e0})^2/2"
    d["J"] = "0"
    d["P"] = "1"
    return d


def write_zoo(directory) -> list:
    """Write every zoo model as a JSON model file; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in zoo_names():
        path = directory / f"{name}.json"
        path.write_text(json.dumps(get_model_doc(name), indent=2) + "\n")
        paths.append(path)
    return paths
