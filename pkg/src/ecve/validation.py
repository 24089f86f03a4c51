"""Input validation helpers shared by the solvers and the harness."""
from __future__ import annotations

import numbers

import numpy as np


class InvalidArgumentError(ValueError):
    """Raised when an argument or config field is out of its domain.

    ``field`` names the offending argument or config key when known.
    """

    def __init__(self, message, field=None):
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field


def check_positive(value, field, *, allow_zero=False):
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise InvalidArgumentError(f"expected a real number, got {value!r}", field)
    if not np.isfinite(value):
        raise InvalidArgumentError(f"expected a finite number, got {value!r}", field)
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise InvalidArgumentError(f"must be {bound}, got {value!r}", field)
    return float(value)


def check_positive_int(value, field, *, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise InvalidArgumentError(f"expected an integer, got {value!r}", field)
    if value < minimum:
        raise InvalidArgumentError(f"must be >= {minimum}, got {value!r}", field)
    return int(value)


def check_scenario(scenario):
    """Return ``scenario`` if it looks like a built :class:`~ecve.catalog.Scenario`."""
    from .catalog import Scenario

    if not isinstance(scenario, Scenario):
        raise InvalidArgumentError(
            f"expected a Scenario, got {type(scenario).__name__}", "scenario"
        )
    return scenario


def check_placement(scenario, placement, *, binary=False):
    """Coerce ``placement`` to a float array of shape ``(K, n, F)``.

    Relaxed placements with entries in ``[0, 1]`` are accepted unless
    ``binary`` is set.
    """
    m = np.asarray(placement, dtype=float)
    shape = (scenario.K, scenario.n, scenario.F)
    if m.shape != shape:
        raise InvalidArgumentError(
            f"expected shape {shape}, got {m.shape}", "placement"
        )
    if binary and not np.all((m == 0) | (m == 1)):
        raise InvalidArgumentError("entries must be 0 or 1", "placement")
    return m


def check_plan(scenario, plan):
    """Coerce ``plan`` to a float array of packet sizes with shape ``(n, F)``."""
    s = np.asarray(plan, dtype=float)
    shape = (scenario.n, scenario.F)
    if s.shape != shape:
        raise InvalidArgumentError(f"expected shape {shape}, got {s.shape}", "plan")
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise InvalidArgumentError("packet sizes must be finite and >= 0", "plan")
    return s
