"""Hamiltonian reshaping, Hamiltonian rescaling and the Richardson baseline."""

from __future__ import annotations

import warnings
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .lindblad import PairObservable, SpectroscopyConfig, evolve_series, noise_action
from .operators import (
    NoiseModel,
    PauliString,
    Spectrum,
    all_pauli_strings,
    as_pauli,
    check_operator,
    conjugate,
    diagonalize,
    pauli_matrix,
    qubit_count,
)
from .signals import TimeSeries
from .spectral import EnergyEstimate, EstimatorConfig, estimate_energy

RESHAPE_CUTOFF = 1e-10
RESCALE_CUTOFF = 1e-2
MAX_SCALE = 20.0

RESHAPE_VARIANTS = ("full-pauli-sample", "tensor-power-4", "tensor-power-2", "explicit")


@dataclass(frozen=True)
class ReshapeSet:
    variant: str
    count: int = 100
    seed: int | None = None
    paulis: tuple = ()

    def __post_init__(self):
        if self.variant not in RESHAPE_VARIANTS:
            raise ValueError(f"unknown reshape set {self.variant!r}; expected one of {RESHAPE_VARIANTS}")
        if self.variant == "full-pauli-sample" and self.count < 1:
            raise ValueError("full-pauli-sample needs a positive count")
        if self.variant == "explicit":
            if not self.paulis:
                raise ValueError("explicit reshape set is empty")
            object.__setattr__(self, "paulis", tuple(as_pauli(p) for p in self.paulis))

    def realize(self, n: int, rng: np.random.Generator | None = None) -> list[PauliString]:
        if self.variant == "tensor-power-4":
            return [PauliString.uniform(c, n) for c in "IXYZ"]
        if self.variant == "tensor-power-2":
            return [PauliString.uniform(c, n) for c in "IX"]
        if self.variant == "explicit":
            if any(p.n != n for p in self.paulis):
                raise ValueError(f"explicit Pauli strings must act on {n} qubits")
            return list(self.paulis)
        if rng is None:
            rng = np.random.default_rng(self.seed)
        # uniform over 4**n strings, with replacement
        draws = rng.integers(0, 4, size=(self.count, n))
        return [PauliString("".join("IXYZ"[i] for i in row)) for row in draws]


@dataclass(frozen=True)
class RescaleConfig:
    c1: float
    c2: float | None = None

    def __post_init__(self):
        for name in ("c1", "c2"):
            c = getattr(self, name)
            if c is None:
                continue
            if not c > 1:
                raise ValueError(f"{name} must exceed 1, got {c}")
            if c > MAX_SCALE:
                warnings.warn(f"{name}={c} is large; the noise may no longer be a small perturbation", stacklevel=3)
                raise ValueError(f"{name}={c} exceeds the supported maximum {MAX_SCALE}")
        if self.c2 is not None and self.c2 == self.c1:
            raise ValueError("c1 and c2 must differ")

    @property
    def factors(self) -> list[float]:
        return [self.c1] if self.c2 is None else [self.c1, self.c2]


@dataclass(frozen=True)
class MitigatedEstimate:
    strategy: str
    value: float
    raw: tuple  # (label, EnergyEstimate) pairs, sorted by label
    diagnostics: dict = field(default_factory=dict)

    @property
    def decays(self) -> list[float]:
        return [est.mode.r for _, est in self.raw]


# ---------------------------------------------------------------------------
# Closed-form combinations


def rescale_first(e0: float, e1: float, c: float) -> float:
    """Cancel a bias that does not depend on the scale factor."""
    if not c > 1:
        raise ValueError(f"scale factor must exceed 1, got {c}")
    return c / (c - 1) * (e0 - e1)


def rescale_second(e0: float, e1: float, e2: float, c1: float, c2: float) -> float:
    """Exact for estimates of the form ``E/c + b1 + c*b2`` with ``c = 1, c1, c2``."""
    if not (c1 > 1 and c2 > 1) or c1 == c2:
        raise ValueError(f"need distinct factors above 1, got c1={c1}, c2={c2}")
    num = c1 * c2 * ((1 - c2) * (e1 - e0) + (c1 - 1) * (e2 - e0))
    return num / ((c2 - c1) * (c1 - 1) * (c2 - 1))


def richardson_weights(factors: Sequence[float]) -> list[float]:
    if len(factors) == 1:
        (c1,) = factors
        return [c1 / (c1 - 1), -1 / (c1 - 1)]
    if len(factors) == 2:
        c1, c2 = factors
        return [
            c1 * c2 / ((c1 - 1) * (c2 - 1)),
            c2 / ((c1 - c2) * (c1 - 1)),
            -c1 / ((c2 - 1) * (c1 - c2)),
        ]
    raise ValueError(f"Richardson needs one or two factors, got {len(factors)}")


def richardson_series(series_list: Sequence[TimeSeries], factors: Sequence[float]) -> TimeSeries:
    """Pointwise extrapolation of ``[O^0, O^1(, O^2)]`` taken at matched step index ``k``."""
    factors = list(factors)
    if len(series_list) != len(factors) + 1:
        raise ValueError(f"{len(factors)} factor(s) need {len(factors) + 1} series, got {len(series_list)}")
    RescaleConfig(*factors)
    lengths = {len(s) for s in series_list}
    if len(lengths) != 1:
        raise ValueError(f"series lengths differ: {sorted(lengths)}")
    w = richardson_weights(factors)
    y = sum(wi * s.samples for wi, s in zip(w, series_list))
    return TimeSeries(series_list[0].dt, y)


# ---------------------------------------------------------------------------
# Experiments


def reshape_experiment(h: np.ndarray, psi0: np.ndarray, obs: PairObservable, p: PauliString | str):
    """Conjugate the Hamiltonian by ``p`` and carry the state and observable along."""
    h = check_operator(h, "Hamiltonian")
    p = as_pauli(p)
    if 2**p.n != h.shape[0]:
        raise ValueError(f"Pauli string on {p.n} qubits does not match dimension {h.shape[0]}")
    pm = pauli_matrix(p)
    psi0 = np.asarray(psi0, dtype=complex).reshape(-1)
    if psi0.size != h.shape[0]:
        raise ValueError("initial state dimension mismatch")
    return conjugate(h, p), pm @ psi0, obs.transformed(pm)


def _pair(h, spectrum, pair):
    if spectrum is None:
        spectrum = diagonalize(h)
    a, b = pair
    if a == b:
        raise ValueError("pair needs two distinct eigenstates")
    return spectrum, PairObservable.from_spectrum(spectrum, a, b)


def _estimator(cutoff, est_cfg):
    if est_cfg is None:
        return EstimatorConfig(cutoff=cutoff)
    return est_cfg


def _map(executor: Executor | None, fn, items):
    if executor is None:
        return [fn(*it) for it in items]
    return list(executor.map(fn, *zip(*items)))


def _reshaped_run(h, noise, obs, cfg, p, backend, est_cfg):
    h_u, psi_u, obs_u = reshape_experiment(h, obs.initial_state(), obs, p)
    series = evolve_series(h_u, noise, psi_u, obs_u, cfg, backend)
    return estimate_energy(series, est_cfg)


def run_reshaping(
    h: np.ndarray,
    noise: NoiseModel,
    pair: tuple[int, int],
    cfg: SpectroscopyConfig,
    reshape_set: ReshapeSet,
    *,
    spectrum: Spectrum | None = None,
    backend: str = "spectral",
    estimator: EstimatorConfig | None = None,
    rng: np.random.Generator | None = None,
    executor: Executor | None = None,
) -> MitigatedEstimate:
    """Average the energy estimates over Pauli-reshaped copies of the experiment."""
    spectrum, obs = _pair(h, spectrum, pair)
    paulis = reshape_set.realize(qubit_count(h.shape[0]), rng)
    if not paulis:
        raise ValueError("empty reshape set")
    est_cfg = _estimator(RESHAPE_CUTOFF, estimator)
    jobs = [(h, noise, obs, cfg, p, backend, est_cfg) for p in paulis]
    estimates = _map(executor, _reshaped_run, jobs)
    raw = tuple(sorted((f"{i:04d}:{p}", e) for i, (p, e) in enumerate(zip(paulis, estimates))))
    value = float(np.mean([e.value for _, e in raw]))
    return MitigatedEstimate(
        strategy="reshape",
        value=value,
        raw=raw,
        diagnostics=_diagnostics(raw, variant=reshape_set.variant),
    )


def _diagnostics(raw, **extra):
    notes = [f"{label}: {w}" for label, e in raw for w in e.warnings]
    return {
        "decay": [e.mode.r for _, e in raw],
        "n_modes": [e.n_modes for _, e in raw],
        "warnings": notes,
        **extra,
    }


def rescaled_series(
    h: np.ndarray,
    noise: NoiseModel,
    obs: PairObservable,
    cfg: SpectroscopyConfig,
    factors: Sequence[float],
    backend: str = "spectral",
    executor: Executor | None = None,
) -> list[TimeSeries]:
    """Series for ``(H, dt)`` followed by ``(H/c, c*dt)`` for each factor; noise is left untouched."""
    psi0 = obs.initial_state()
    jobs = [(h, noise, psi0, obs, cfg, backend)]
    jobs += [(h / c, noise, psi0, obs, cfg.rescaled(c), backend) for c in factors]
    return _map(executor, evolve_series, jobs)


def combine_rescaled(estimates: Sequence[float], rc: RescaleConfig, order: str) -> float:
    if order == "first":
        return rescale_first(estimates[0], estimates[1], rc.c1)
    if order == "second":
        if rc.c2 is None:
            raise ValueError("second-order rescaling needs c2")
        return rescale_second(estimates[0], estimates[1], estimates[2], rc.c1, rc.c2)
    raise ValueError(f"unknown order {order!r}")


def rescaling_from_series(series: Sequence[TimeSeries], rc: RescaleConfig, order: str, estimator=None):
    est_cfg = _estimator(RESCALE_CUTOFF, estimator)
    needed = 2 if order == "first" else 3
    labels = ["c0=1"] + [f"c{i + 1}={c:g}" for i, c in enumerate(rc.factors)]
    raw = tuple((labels[i], estimate_energy(series[i], est_cfg)) for i in range(needed))
    value = combine_rescaled([e.value for _, e in raw], rc, order)
    return MitigatedEstimate(
        strategy="rescale1" if order == "first" else "rescale2",
        value=float(value),
        raw=raw,
        diagnostics=_diagnostics(raw, factors=rc.factors[: needed - 1]),
    )


def run_rescaling(
    h: np.ndarray,
    noise: NoiseModel,
    pair: tuple[int, int],
    cfg: SpectroscopyConfig,
    rc: RescaleConfig,
    order: str = "first",
    *,
    spectrum: Spectrum | None = None,
    backend: str = "spectral",
    estimator: EstimatorConfig | None = None,
    executor: Executor | None = None,
) -> MitigatedEstimate:
    """Combine estimates from the original and energy-rescaled Hamiltonians."""
    if order not in ("first", "second"):
        raise ValueError(f"unknown order {order!r}")
    if order == "second" and rc.c2 is None:
        raise ValueError("second-order rescaling needs c2")
    _, obs = _pair(h, spectrum, pair)
    factors = rc.factors if order == "second" else [rc.c1]
    series = rescaled_series(h, noise, obs, cfg, factors, backend, executor)
    return rescaling_from_series(series, rc, order, estimator)


def richardson_from_series(series: Sequence[TimeSeries], rc: RescaleConfig, estimator=None) -> MitigatedEstimate:
    est_cfg = _estimator(RESCALE_CUTOFF, estimator)
    mitigated = richardson_series(series[: len(rc.factors) + 1], rc.factors)
    est = estimate_energy(mitigated, est_cfg)
    raw = (("richardson", est),)
    return MitigatedEstimate("richardson", float(est.value), raw, _diagnostics(raw, factors=rc.factors))


def run_richardson(
    h: np.ndarray,
    noise: NoiseModel,
    pair: tuple[int, int],
    cfg: SpectroscopyConfig,
    rc: RescaleConfig,
    *,
    spectrum: Spectrum | None = None,
    backend: str = "spectral",
    estimator: EstimatorConfig | None = None,
    executor: Executor | None = None,
) -> MitigatedEstimate:
    """Extrapolate the rescaled series pointwise, then estimate once."""
    _, obs = _pair(h, spectrum, pair)
    series = rescaled_series(h, noise, obs, cfg, rc.factors, backend, executor)
    return richardson_from_series(series, rc, estimator)


def first_order_biases(spectrum: Spectrum, noise: NoiseModel, a: int, b: int, paulis) -> np.ndarray:
    """``Im <a|U^+ D[U|a><b|U^+] U|b>`` for each Pauli ``U``, straight from the dissipator."""
    phi_a, phi_b = spectrum.state(a), spectrum.state(b)
    out = []
    for p in paulis:
        u = pauli_matrix(p)
        ua, ub = u @ phi_a, u @ phi_b
        out.append((ua.conj() @ noise_action(noise, np.outer(ua, ub.conj())) @ ub).imag)
    return np.array(out)


def all_paulis_set(n: int) -> ReshapeSet:
    return ReshapeSet("explicit", paulis=tuple(all_pauli_strings(n)))
