"""Sampling of problem data given as constants, callables, per-phase pairs or arrays."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Union

import numpy as np

Datum = Union[None, float, Callable[..., Any], "Piecewise", np.ndarray]


@dataclass(frozen=True)
class Piecewise:
    """A datum that differs between the fluid and the solid phase."""

    fluid: Any
    solid: Any


def sample(
    datum: Datum,
    x: np.ndarray,
    y: np.ndarray,
    t: float,
    n: int | None = None,
    fluid: np.ndarray | bool | None = None,
) -> np.ndarray:
    """Evaluate `datum` at points (x, y) and time t (time level n for arrays).

    `fluid` selects the branch of a Piecewise datum, per point or globally.
    Arrays carry either the point shape or a leading time axis.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if datum is None:
        return np.zeros(x.shape)
    if isinstance(datum, Piecewise):
        if fluid is None:
            raise ValueError("per-phase datum sampled without a phase selector")
        a = sample(datum.fluid, x, y, t, n, True)
        b = sample(datum.solid, x, y, t, n, False)
        return np.where(fluid, a, b)
    if isinstance(datum, np.ndarray):
        if datum.ndim == x.ndim + 1:
            if n is None:
                raise ValueError("time-dependent array datum sampled without a time level")
            arr = datum[n]
        else:
            arr = datum
        return np.broadcast_to(np.asarray(arr, dtype=float), x.shape).copy()
    if callable(datum):
        return np.broadcast_to(np.asarray(datum(x, y, t), dtype=float), x.shape).copy()
    return np.full(x.shape, float(datum))


def is_zero(datum: Datum) -> bool:
    """True only when the datum is structurally zero (None, 0 or an all-zero array)."""
    if datum is None:
        return True
    if isinstance(datum, Piecewise):
        return is_zero(datum.fluid) and is_zero(datum.solid)
    if isinstance(datum, np.ndarray):
        return not np.any(datum)
    if callable(datum):
        return False
    return float(datum) == 0.0
