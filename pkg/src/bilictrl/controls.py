"""Real control signals sampled on a uniform time grid."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Interpolation(str, Enum):
    PIECEWISE_LINEAR = "piecewise_linear"
    PIECEWISE_CONSTANT_MIDPOINT = "piecewise_constant_midpoint"


@dataclass
class ControlSignal:
    """Samples of u on t_m = m T / M, m = 0..M, plus an interpolation rule."""

    horizon: float
    samples: np.ndarray = field(repr=False)
    interpolation: Interpolation = Interpolation.PIECEWISE_LINEAR

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1 or s.size < 2:
            raise ValueError("need at least two samples (M >= 1)")
        if not np.all(np.isfinite(s)):
            raise ValueError("non-finite control sample")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        self.samples = s

    @classmethod
    def zeros(cls, horizon: float, grid_size: int = 4096) -> "ControlSignal":
        return cls(horizon, np.zeros(grid_size + 1))

    @classmethod
    def from_callable(cls, f, horizon: float, grid_size: int = 4096,
                      interpolation=Interpolation.PIECEWISE_LINEAR) -> "ControlSignal":
        t = np.linspace(0.0, horizon, grid_size + 1)
        return cls(horizon, np.asarray(f(t), dtype=float), interpolation)

    @property
    def grid_size(self) -> int:
        return self.samples.size - 1

    @property
    def dt(self) -> float:
        return self.horizon / self.grid_size

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.samples.size)

    def values(self, t) -> np.ndarray:
        """Interpolated values at arbitrary times in [0, T]."""
        t = np.asarray(t, dtype=float)
        if self.interpolation is Interpolation.PIECEWISE_LINEAR:
            return np.interp(t, self.times, self.samples)
        idx = np.clip((t / self.dt).astype(int), 0, self.grid_size - 1)
        return self.samples[idx]

    def l2_norm(self) -> float:
        """Trapezoid-rule L^2(0, T) norm on the sample grid."""
        return float(np.sqrt(np.trapezoid(self.samples**2, dx=self.dt)))

    def h10_norm(self) -> float:
        """L^2 norm of the piecewise derivative (H^1_0 seminorm)."""
        d = np.diff(self.samples) / self.dt
        return float(np.sqrt(np.sum(d**2) * self.dt))

    def reversed(self) -> "ControlSignal":
        return ControlSignal(self.horizon, self.samples[::-1].copy(),
                             self.interpolation)

    def _check_compatible(self, other: "ControlSignal") -> None:
        if (other.samples.size != self.samples.size
                or abs(other.horizon - self.horizon) > 1e-12 * self.horizon):
            raise ValueError("control signals live on different grids")

    def __add__(self, other: "ControlSignal") -> "ControlSignal":
        self._check_compatible(other)
        return ControlSignal(self.horizon, self.samples + other.samples,
                             self.interpolation)

    def __mul__(self, scalar) -> "ControlSignal":
        return ControlSignal(self.horizon, self.samples * float(scalar),
                             self.interpolation)

    __rmul__ = __mul__


def as_time_function(control):
    """Coerce a control argument to a callable on time arrays.

    Accepts a plain callable, a ControlSignal (interpolated), or any object
    exposing an ``evaluate`` method with exact dense output.
    """
    if callable(control) and not isinstance(control, ControlSignal):
        return control
    if hasattr(control, "evaluate"):
        return control.evaluate
    if isinstance(control, ControlSignal):
        return control.values
    raise TypeError(f"cannot interpret {type(control).__name__} as a control")
