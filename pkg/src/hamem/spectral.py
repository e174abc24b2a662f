"""Damped-mode retrieval from time series: matrix pencil, DFT peaks, least squares."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
import scipy.fft
import scipy.linalg
import scipy.optimize

from .signals import DampedMode, TimeSeries, _wrap_phase

log = logging.getLogger(__name__)

METHODS = ("pencil", "pencil+refine", "dft")


class RetrievalError(RuntimeError):
    pass


class IllConditionedWarning(UserWarning):
    pass


@dataclass(frozen=True)
class MatrixPencilConfig:
    pencil_param: int | None = None  # default floor(L/3)
    cutoff: float = 1e-10

    def __post_init__(self):
        if not 0 < self.cutoff < 1:
            raise ValueError(f"cutoff must lie in (0, 1), got {self.cutoff}")

    def resolve(self, L: int) -> int:
        lp = L // 3 if self.pencil_param is None else int(self.pencil_param)
        if not 1 <= lp <= L - 2:
            raise ValueError(f"pencil parameter {lp} outside [1, {L - 2}] for L={L}")
        return lp


@dataclass(frozen=True)
class EnergyEstimate:
    value: float
    mode: DampedMode
    method: str
    residual: float
    n_modes: int
    warnings: tuple = ()


# ---------------------------------------------------------------------------
# Amplitudes


def _vandermonde(poles: np.ndarray, L: int):
    """Columns ``z**k`` rescaled so no column overflows; returns (matrix, column scales)."""
    k = np.arange(L)[:, None]
    logz = np.log(poles.astype(complex))
    shift = np.maximum(logz.real, 0.0) * (L - 1)
    with np.errstate(under="ignore"):
        v = np.exp(k * logz[None, :] - shift[None, :])
    norms = np.linalg.norm(v, axis=0)
    norms[norms == 0] = 1.0
    return v / norms, np.exp(-shift) / norms


def _fit_amplitudes(y: np.ndarray, poles: np.ndarray, weights=None):
    poles = np.asarray(poles, dtype=complex).reshape(-1)
    if poles.size == 0:
        raise ValueError("need at least one pole")
    if poles.size > y.size:
        raise ValueError(f"{poles.size} poles exceed {y.size} samples")
    if np.any(poles == 0):
        raise ValueError("zero pole")
    if poles.size > 1:
        gaps = np.abs(poles[:, None] - poles[None, :]) + np.eye(poles.size)
        if gaps.min() < 1e-14:
            raise ValueError("poles must be distinct")
    v, scale = _vandermonde(poles, y.size)
    rhs = y
    if weights is not None:
        sw = np.sqrt(np.asarray(weights, dtype=float))
        v, rhs = v * sw[:, None], y * sw
    sol, _, _, sv = np.linalg.lstsq(v, rhs, rcond=None)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    return sol * scale, cond


def fit_amplitudes(series: TimeSeries | np.ndarray, poles: Sequence[complex], weights=None) -> np.ndarray:
    """Least-squares amplitudes ``C`` of ``y[k] ~ sum_j C_j z_j**k`` for fixed poles."""
    y = _samples(series)
    amps, cond = _fit_amplitudes(y, np.asarray(poles), weights)
    if cond > 1e12:
        warnings.warn(f"Vandermonde system ill-conditioned (cond ~ {cond:.2e})", IllConditionedWarning, stacklevel=2)
    return amps


def _samples(series) -> np.ndarray:
    if isinstance(series, TimeSeries):
        return series.samples
    return np.asarray(series, dtype=complex).reshape(-1)


def model_values(modes: Sequence[DampedMode], L: int) -> np.ndarray:
    y = np.zeros(L, dtype=complex)
    for m in modes:
        y += m.values(L)
    return y


def relative_residual(y: np.ndarray, modes: Sequence[DampedMode]) -> float:
    ny = np.linalg.norm(y)
    return float(np.linalg.norm(y - model_values(modes, y.size)) / (ny if ny > 0 else 1.0))


# ---------------------------------------------------------------------------
# Matrix pencil


def _hankel_matmul(y: np.ndarray, rows: int, x: np.ndarray) -> np.ndarray:
    """``H @ x`` for the Hankel matrix ``H[i, j] = y[i + j]`` with ``rows`` rows, via FFT."""
    cols = x.shape[0]
    nfft = scipy.fft.next_fast_len(rows + cols - 1)
    fy = scipy.fft.fft(y[: rows + cols - 1], nfft)
    fx = scipy.fft.fft(x[::-1], nfft, axis=0)
    return scipy.fft.ifft(fy[:, None] * fx, axis=0)[cols - 1 : cols - 1 + rows]


def _dominant_svd(y: np.ndarray, lp: int, cutoff: float):
    """Singular values and right singular vectors of the Hankel matrix above ``cutoff``.

    Small problems use a dense SVD. Large ones sketch the range with a fixed
    random test matrix and grow the sketch until the trailing singular value
    sits far below the cutoff, which captures every retained direction.
    """
    L = y.size
    rows, cols = L - lp, lp + 1
    if min(rows, cols) <= 128:
        _, s, vh = np.linalg.svd(scipy.linalg.hankel(y[:rows], y[rows - 1 :]), full_matrices=False)
        return s, vh
    rng = np.random.default_rng(0x5EED)
    k = 32
    while True:
        omega = rng.standard_normal((cols, k)) + 1j * rng.standard_normal((cols, k))
        q, _ = np.linalg.qr(_hankel_matmul(y, rows, omega))
        # B = Q^H H, and H^T is the Hankel matrix with swapped shape
        b = _hankel_matmul(y, cols, q.conj()).T
        _, s, vh = np.linalg.svd(b, full_matrices=False)
        if s[0] == 0 or s[-1] <= 1e-3 * cutoff * s[0]:
            return s, vh
        if 2 * k >= min(rows, cols) // 2:
            _, s, vh = np.linalg.svd(scipy.linalg.hankel(y[:rows], y[rows - 1 :]), full_matrices=False)
            return s, vh
        k *= 2


def pencil_poles(y: np.ndarray, cfg: MatrixPencilConfig) -> np.ndarray:
    L = y.size
    if L < 4:
        raise ValueError(f"matrix pencil needs at least 4 samples, got {L}")
    lp = cfg.resolve(L)
    s, vh = _dominant_svd(y, lp, cfg.cutoff)
    if s[0] == 0:
        raise RetrievalError("signal is identically zero")
    m = int(np.sum(s > s[0] * cfg.cutoff))
    m = min(m, lp)
    if m == 0:
        raise RetrievalError("no singular value above the cutoff")
    v1h, v2h = vh[:m, :-1], vh[:m, 1:]
    sv1 = np.linalg.svd(v1h, compute_uv=False)
    if sv1[-1] < 1e-12 * sv1[0]:
        raise RetrievalError("rank-deficient pencil")
    # shift invariance of the dominant row space: v2h = A @ v1h, eig(A) = poles
    a = v2h @ np.linalg.pinv(v1h)
    return np.linalg.eigvals(a)


def matrix_pencil(series: TimeSeries | np.ndarray, cfg: MatrixPencilConfig | None = None) -> list[DampedMode]:
    """Retrieve the modes of ``y[k] = sum_j C_j r_j**k exp(1j w_j k)``.

    Keeps the singular values of the Hankel matrix above ``cutoff * s_max``,
    extracts poles from the shifted dominant right singular subspace and fits
    amplitudes on all samples.
    """
    cfg = cfg or MatrixPencilConfig()
    y = _samples(series)
    poles = pencil_poles(y, cfg)
    amps, cond = _fit_amplitudes(y, poles)
    if cond > 1e12:
        warnings.warn(f"Vandermonde system ill-conditioned (cond ~ {cond:.2e})", IllConditionedWarning, stacklevel=2)
    return [DampedMode.from_pole(c, z) for c, z in zip(amps, poles)]


# ---------------------------------------------------------------------------
# DFT


def dft_peak(series: TimeSeries | np.ndarray, rel_threshold: float = 1e-6) -> list[float]:
    """Coarse frequencies at local maxima of ``|DFT(y)|``, strongest first.

    Bins whose magnitude is below ``rel_threshold`` times the largest are ignored.
    """
    y = _samples(series)
    L = y.size
    mag = np.abs(np.fft.fft(y))
    if mag.max() == 0:
        return []
    prev, nxt = np.roll(mag, 1), np.roll(mag, -1)
    peaks = np.nonzero((mag > prev) & (mag >= nxt) & (mag >= rel_threshold * mag.max()))[0]
    if peaks.size == 0:  # flat spectrum
        peaks = np.array([int(np.argmax(mag))])
    peaks = peaks[np.argsort(-mag[peaks], kind="stable")]
    return [_wrap_phase(2 * np.pi * j / L) for j in peaks]


# ---------------------------------------------------------------------------
# Least-squares refinement


class Refinement(NamedTuple):
    modes: list
    cost: float
    initial_cost: float
    converged: bool


def _cost(y, modes, weights):
    res = y - model_values(modes, y.size)
    return float(np.sum(weights * np.abs(res) ** 2))


def refine_least_squares(
    series: TimeSeries | np.ndarray,
    init_modes: Sequence[DampedMode],
    weights=None,
    max_iter: int = 200,
    rel_tol: float = 1e-12,
) -> Refinement:
    """Minimize ``sum_k N_k |y_k - yhat_k|**2`` over all mode parameters.

    Amplitudes are eliminated by a weighted linear solve (variable projection),
    so the optimizer only walks over ``log r`` and ``omega`` of each mode.
    """
    y = _samples(series)
    L = y.size
    w = np.ones(L) if weights is None else np.asarray(weights, dtype=float).reshape(-1)
    if w.size != L or np.any(w < 0):
        raise ValueError("weights must be non-negative with one entry per sample")
    init = list(init_modes)
    if not init:
        raise ValueError("need at least one initial mode")
    c0 = _cost(y, init, w)
    if c0 <= 1e-30 * max(float(np.sum(w * np.abs(y) ** 2)), 1e-300):
        return Refinement(init, c0, c0, True)

    m = len(init)
    sw = np.sqrt(w)
    k = np.arange(L)[:, None]

    def unpack(theta):
        return np.exp(theta[:m] + 1j * theta[m:])

    def residual(theta):
        z = unpack(theta)
        basis = np.exp(k * np.log(z)[None, :])
        amps = np.linalg.lstsq(basis * sw[:, None], y * sw, rcond=None)[0]
        r = sw * (y - basis @ amps)
        return np.concatenate([r.real, r.imag])

    theta0 = np.concatenate([np.log(np.maximum([md.r for md in init], 1e-300)), [md.omega for md in init]])
    try:
        with np.errstate(over="raise", invalid="raise"):
            sol = scipy.optimize.least_squares(
                residual, theta0, method="lm", xtol=1e-15, ftol=rel_tol, gtol=1e-15, max_nfev=max_iter * (2 * m + 1)
            )
        poles = unpack(sol.x)
        amps, _ = _fit_amplitudes(y, poles, w)
        modes = [DampedMode.from_pole(c, z) for c, z in zip(amps, poles)]
        cost = _cost(y, modes, w)
    except (FloatingPointError, ValueError, np.linalg.LinAlgError) as exc:
        log.warning("refinement failed: %s", exc)
        return Refinement(init, c0, c0, False)
    if not np.isfinite(cost) or cost > c0:
        return Refinement(init, c0, c0, False)
    return Refinement(modes, cost, c0, bool(sol.success))


# ---------------------------------------------------------------------------
# Selection and energy


def select_mode(modes: Sequence[DampedMode]) -> DampedMode:
    """Largest ``|C|``; ties go to smaller ``|omega|``, then larger ``r``, then positive ``omega``."""
    if not modes:
        raise ValueError("no modes to select from")
    return min(modes, key=lambda m: (-abs(m.C), abs(m.omega), -m.r, -m.omega))


def _near_degenerate(modes, L) -> bool:
    big = max(abs(m.C) for m in modes)
    strong = [m for m in modes if abs(m.C) >= big / 10]
    for i, p in enumerate(strong):
        for q in strong[i + 1 :]:
            if abs(_wrap_phase(p.omega - q.omega)) < 2 * np.pi / L:
                return True
    return False


@dataclass(frozen=True)
class EstimatorConfig:
    method: str = "pencil"
    cutoff: float = 1e-10
    pencil_param: int | None = None
    weights: tuple | None = None
    dft_init: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown estimator method {self.method!r}; expected one of {METHODS}")

    @property
    def pencil(self) -> MatrixPencilConfig:
        return MatrixPencilConfig(self.pencil_param, self.cutoff)


def estimate_energy(series: TimeSeries, cfg: EstimatorConfig | None = None) -> EnergyEstimate:
    """Energy difference ``omega / dt`` of the dominant retrieved mode."""
    cfg = cfg or EstimatorConfig()
    y = series.samples
    notes = []
    weights = None if cfg.weights is None else np.asarray(cfg.weights, dtype=float)
    coarse = dft_peak(y) if (cfg.dft_init or cfg.method == "dft") else None
    if cfg.method == "dft":
        if not coarse:
            raise RetrievalError("empty spectrum")
        pole = np.exp(1j * coarse[0])
        amp = fit_amplitudes(y, [pole], weights)[0]
        modes = [DampedMode.from_pole(amp, pole)]
    else:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", IllConditionedWarning)
            modes = matrix_pencil(y, cfg.pencil)
        notes.extend(str(w.message) for w in caught)
        if coarse and abs(_wrap_phase(select_mode(modes).omega - coarse[0])) > 2 * np.pi / len(y):
            notes.append("dominant pencil mode disagrees with the DFT peak")
        if cfg.method == "pencil+refine":
            ref = refine_least_squares(y, modes, weights)
            if not ref.converged:
                notes.append("least-squares refinement did not converge; kept pencil modes")
            modes = ref.modes
    if len(modes) > 1 and _near_degenerate(modes, len(y)):
        notes.append("near-degenerate strong modes; selection may be unstable")
    for note in notes:
        log.debug("estimate_energy: %s", note)
    mode = select_mode(modes)
    return EnergyEstimate(
        value=mode.omega / series.dt,
        mode=mode,
        method=cfg.method,
        residual=relative_residual(y, modes),
        n_modes=len(modes),
        warnings=tuple(notes),
    )
