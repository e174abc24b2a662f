"""Time series and damped-mode containers shared by the engine and the estimators."""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from typing import Iterable

import numpy as np


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Samples ``y[k] = <O>(k * dt)`` for ``k = 0 .. L-1``."""

    dt: float
    samples: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.samples, dtype=complex).reshape(-1)
        if y.size < 2:
            raise ValueError(f"a time series needs at least 2 samples, got {y.size}")
        if not np.all(np.isfinite(y)):
            raise ValueError("time series has non-finite samples")
        if not self.dt > 0:
            raise ValueError(f"time step must be positive, got {self.dt}")
        object.__setattr__(self, "samples", y)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self))

    def scaled(self, factor: complex) -> "TimeSeries":
        return TimeSeries(self.dt, factor * self.samples)

    def conj(self) -> "TimeSeries":
        return TimeSeries(self.dt, self.samples.conj())


@dataclass(frozen=True)
class DampedMode:
    """One signal term ``C * r**k * exp(1j * omega * k)``."""

    C: complex
    r: float
    omega: float

    @property
    def pole(self) -> complex:
        return self.r * cmath.exp(1j * self.omega)

    @classmethod
    def from_pole(cls, C: complex, z: complex) -> "DampedMode":
        return cls(complex(C), float(abs(z)), _wrap_phase(cmath.phase(z)))

    def values(self, L: int) -> np.ndarray:
        k = np.arange(L)
        return self.C * self.r**k * np.exp(1j * self.omega * k)


def _wrap_phase(w: float) -> float:
    """Map to (-pi, pi]."""
    w = float(np.angle(np.exp(1j * w)))
    return np.pi if w == -np.pi else w


def synth_series(modes: Iterable[DampedMode], dt: float, L: int) -> TimeSeries:
    y = np.zeros(L, dtype=complex)
    for m in modes:
        if m.r < 0:
            raise ValueError(f"mode decay must be non-negative, got {m.r}")
        y += m.values(L)
    return TimeSeries(dt, y)
