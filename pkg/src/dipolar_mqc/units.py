"""Unit-carrying strings in config files, parsed to SI.

Only the handful of units the configs need are known. Frequencies given in
Hz/MHz/GHz/THz are cycles per second; asking for ``rad/s`` multiplies by 2 pi.
"""

from __future__ import annotations

import math
import re

from scipy import constants as _C

_SCALE = {
    # length
    "m": ("m", 1.0), "cm": ("m", 1e-2), "mm": ("m", 1e-3), "um": ("m", 1e-6), "nm": ("m", 1e-9),
    # inverse length
    "1/m": ("1/m", 1.0), "1/cm": ("1/m", 1e2),
    # time
    "s": ("s", 1.0), "ms": ("s", 1e-3), "us": ("s", 1e-6), "ns": ("s", 1e-9), "fs": ("s", 1e-15),
    # rates and frequencies
    "1/s": ("1/s", 1.0),
    "Hz": ("Hz", 1.0), "kHz": ("Hz", 1e3), "MHz": ("Hz", 1e6), "GHz": ("Hz", 1e9), "THz": ("Hz", 1e12),
    "rad/s": ("rad/s", 1.0),
    # velocity
    "m/s": ("m/s", 1.0),
    # misc
    "kg": ("kg", 1.0), "u": ("kg", _C.physical_constants["atomic mass constant"][0]),
    "C m": ("C m", 1.0),
    "K": ("K", 1.0),
    "sr": ("sr", 1.0),
    "rad": ("rad", 1.0),
    "1/m^3": ("1/m^3", 1.0), "1/cm^3": ("1/m^3", 1e6),
    "W/m^2": ("W/m^2", 1.0), "W/cm^2": ("W/m^2", 1e4), "MW/cm^2": ("W/m^2", 1e10),
    "": ("", 1.0),
}

_NUM = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(.*?)\s*$")


def parse_quantity(value, target: str) -> float:
    """Convert ``"7.5 mm"``-style strings (or bare numbers, taken as SI) to ``target``."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, str):
        raise TypeError(f"expected a number or a unit string, got {value!r}")
    m = _NUM.match(value)
    if not m:
        raise ValueError(f"cannot parse quantity {value!r}")
    number, unit = float(m.group(1)), m.group(2)
    if unit not in _SCALE:
        raise ValueError(f"unknown unit {unit!r} in {value!r}")
    dim, scale = _SCALE[unit]
    x = number * scale
    if target == "rad/s" and dim == "Hz":
        return 2 * math.pi * x
    if target == "1/s" and dim == "Hz":
        return x
    if target == "Hz" and dim == "rad/s":
        return x / (2 * math.pi)
    if dim != _SCALE.get(target, (target,))[0] and not (dim == "" and target == ""):
        raise ValueError(f"{value!r} has dimension {dim!r}, expected {target!r}")
    return x
