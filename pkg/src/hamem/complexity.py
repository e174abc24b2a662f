"""Sample-complexity estimates for reshaping and rescaling.

All formulas take ``x = d_ab * |D| * T`` with ``T = L * dt`` as the
dimensionless decay over one full record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

SERIES_SWITCH = 1e-6
STRATEGIES = ("reshape-sampled", "reshape-full", "rescale-first", "rescale-second")

_SQRT3 = math.sqrt(3.0)


def _tail(x: float) -> float:
    """``1 - exp(-2x) (1 + 2x + 2x^2)`` without cancellation."""
    if x < 0.5:
        u = 2.0 * x
        term = u**3 / 6.0
        total = 0.0
        j = 3
        while term > 1e-18 * total or total == 0.0:
            total += term
            j += 1
            term *= u / j
        return math.exp(-u) * total
    return 1.0 - math.exp(-2.0 * x) * (1.0 + 2.0 * x + 2.0 * x * x)


def f_factor(x: float) -> float:
    """Record-length penalty on the frequency uncertainty; ``sqrt(3)`` as ``x -> 0``."""
    if not x > 0:
        raise ValueError(f"f_factor needs x > 0, got {x}")
    if x <= SERIES_SWITCH:
        return _SQRT3 + 3.0 * _SQRT3 * x / 4.0
    return (_tail(x) / (4.0 * x**3)) ** -0.5


def big_f(c1: float, c2: float) -> float:
    """Noise amplification of the two-factor rescaling combination."""
    if not (c1 > 1 and c2 > 1) or c1 == c2:
        raise ValueError(f"need distinct factors above 1, got c1={c1}, c2={c2}")
    num = math.sqrt((c2 - c1) ** 2 + (c1 - 1) ** 2 + (c2 - 1) ** 2)
    return num / (abs(1 / c1 - 1 / c2) * (c1 - 1) * (c2 - 1))


@lru_cache(maxsize=None)
def _bernoulli(m: int) -> Fraction:
    """Bernoulli number with ``B_1 = -1/2``."""
    if m == 0:
        return Fraction(1)
    return -sum(math.comb(m + 1, i) * _bernoulli(i) for i in range(m)) / (m + 1)


def _power_sum_ratio(m: int, L: int) -> float:
    """``sum_{k<L} k^m / L^(m+1)`` from Faulhaber's formula, exact before rounding."""
    total = sum(math.comb(m + 1, i) * _bernoulli(i) * Fraction(1, L**i) for i in range(m + 1))
    return float(total / (m + 1))


def weighted_k2_sum(r: float, L: int) -> float:
    """``sum_{k<L} k^2 r^(2k)`` in closed form.

    With ``s = -2 log r`` the rational form is evaluated through ``expm1``; when the
    record barely decays (``s L < 0.5``) the numerator cancels, so a Taylor series
    in ``s`` over Faulhaber power sums is used instead.
    """
    if not 0 < r < 1:
        raise ValueError(f"decay must lie in (0, 1), got {r}")
    L = int(L)
    if L < 2:
        return 0.0
    s = -2.0 * math.log(r)
    if s * L >= 0.5:
        u = -math.expm1(-s)
        q = math.exp(-s)
        w = -math.expm1(-s * L)
        qL = math.exp(-s * L)
        return (q * (1 + q) * w - qL * L * u * (L * u + 2 * q)) / u**3
    x = s * L
    total, coef, j = 0.0, 1.0, 0
    while True:
        term = coef * _power_sum_ratio(j + 2, L)
        total += term
        if abs(term) <= 1e-17 * abs(total):
            break
        j += 1
        coef *= -x / j
    return total * float(L) ** 3


def sigma_omega(n_k: float, c_amp: complex, r: float, L: int) -> float:
    """Standard deviation of a fitted per-step frequency from ``L`` samples of ``n_k`` shots."""
    info = 2.0 * n_k * abs(c_amp) ** 2 * weighted_k2_sum(r, L)
    return info**-0.5


@dataclass(frozen=True)
class ComplexityInputs:
    n_modes: int
    dt: float
    L: int
    noise_strength: float
    d_ab: float
    sigma_target: float
    n_k: float = 1.0
    n_p: int = 1
    c_amp: float | None = None
    c1: float = 2.0
    c2: float | None = 1.5
    c_stat: float = 0.0

    def __post_init__(self):
        for name in ("n_modes", "dt", "L", "d_ab", "sigma_target", "n_k", "n_p"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.noise_strength < 0 or self.c_stat < 0:
            raise ValueError("noise strength and C must be non-negative")

    @property
    def T(self) -> float:
        return self.L * self.dt

    @property
    def x(self) -> float:
        return self.d_ab * self.noise_strength * self.T

    @property
    def amplitude(self) -> float:
        return 1.0 / self.n_modes if self.c_amp is None else self.c_amp


def _base(inp: ComplexityInputs, sigma2: float) -> float:
    f = f_factor(inp.x) if inp.x > 0 else _SQRT3
    return f * f * inp.n_modes**2 / (inp.T**2 * sigma2)


def total_samples(strategy: str, inp: ComplexityInputs) -> float:
    """Total shots ``N_T`` needed to reach ``sigma_target`` on the mitigated energy."""
    s2 = inp.sigma_target**2
    if strategy == "reshape-full":
        return _base(inp, s2)
    if strategy == "reshape-sampled":
        avail = s2 - inp.c_stat * inp.noise_strength**2 / inp.n_p
        if avail <= 0:
            raise ValueError(
                f"target sigma {inp.sigma_target} is below the sampling floor "
                f"sqrt(C |D|^2 / N_P) = {math.sqrt(s2 - avail):.3e}"
            )
        return _base(inp, avail)
    if strategy == "rescale-first":
        c = inp.c1
        if not c > 1:
            raise ValueError(f"c1 must exceed 1, got {c}")
        return 4 * c * c / (c - 1) ** 2 * _base(inp, s2)
    if strategy == "rescale-second":
        if inp.c2 is None:
            raise ValueError("rescale-second needs c2")
        return 3 * big_f(inp.c1, inp.c2) ** 2 * _base(inp, s2)
    raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")


def energy_sigma(inp: ComplexityInputs) -> float:
    """Unmitigated energy standard deviation for ``n_k`` shots per time point."""
    f = f_factor(inp.x) if inp.x > 0 else _SQRT3
    return f * inp.n_modes * inp.n_k**-0.5 * inp.L**-1.5 / inp.dt


def exponential_regime_samples(n_modes: int, L: int, d_ab: float, noise_strength: float, dt: float) -> float:
    """Order-of-magnitude ``N_m^2 L exp(2 d_ab |D| dt)`` for strong noise (advisory only)."""
    return n_modes**2 * L * math.exp(2 * d_ab * noise_strength * dt)


def reshape_constant(biases, noise_strength: float) -> float:
    """``C = N_P var(bias) / |D|^2`` from the imaginary first-order biases of a realized set."""
    b = np.asarray(biases, dtype=float)
    if b.size < 2 or noise_strength <= 0:
        raise ValueError("need at least two biases and a positive noise strength")
    return float(b.size * b.var() / noise_strength**2)
