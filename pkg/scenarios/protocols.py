"""
Scalar protocol shapes shared by the trap stiffness and the RLC inductance.
"""

import math
from typing import Callable, Optional, Sequence

from core.errors import ConfigurationError
from core.linear_langevin import tabulated_scalar

ScalarFn = Callable[[float], float]

SHAPES = ("constant", "ramp", "sine", "tabulated")


def scalar_protocol(
    shape: str,
    base: float,
    horizon: float,
    amplitude: float = 0.0,
    table_times: Optional[Sequence[float]] = None,
    table_values: Optional[Sequence[float]] = None,
) -> ScalarFn:
    """
    Build a strictly positive scalar protocol on [0, horizon].

    constant: base
    ramp:     base * (1 + amplitude * t / horizon)
    sine:     base * (1 + amplitude * sin(2 pi t / horizon))
    tabulated: piecewise-linear through (table_times, table_values)
    """
    if shape == "tabulated":
        if table_times is None or table_values is None:
            raise ConfigurationError("tabulated protocol needs table_times and table_values")
        if min(table_values) <= 0.0:
            raise ConfigurationError("tabulated protocol values must be strictly positive")
        return tabulated_scalar(table_times, table_values, horizon)

    if base <= 0.0:
        raise ConfigurationError(f"protocol base value must be positive, got {base}")
    if shape == "constant":
        return lambda t: base
    if shape == "ramp":
        if amplitude <= -1.0:
            raise ConfigurationError(f"ramp amplitude {amplitude} makes the protocol vanish inside [0, tau]")
        return lambda t: base * (1.0 + amplitude * t / horizon)
    if shape == "sine":
        if abs(amplitude) >= 1.0:
            raise ConfigurationError(f"sine amplitude must satisfy |a| < 1, got {amplitude}")
        return lambda t: base * (1.0 + amplitude * math.sin(2.0 * math.pi * t / horizon))
    raise ConfigurationError(f"unknown protocol shape '{shape}', expected one of {SHAPES}")
