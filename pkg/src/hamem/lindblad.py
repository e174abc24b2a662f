"""Liouvillian construction, noisy time-series generation and perturbative oracles.

Vectorization is column stacking, ``vec(A rho B) = (B.T kron A) vec(rho)``,
which in numpy is ``rho.reshape(-1, order="F")``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sps
from scipy.sparse.linalg import expm_multiply

from .operators import NoiseModel, Spectrum, check_operator, hermiticity_error, max_gap
from .signals import DampedMode, TimeSeries, synth_series

log = logging.getLogger(__name__)

SERIES_RTOL = 1e-9
BACKENDS = ("stepper", "spectral")
# above this Hilbert dimension the stepper uses the sparse exponential action
DENSE_STEPPER_MAX_DIM = 16

__all__ = [
    "BACKENDS",
    "BackendToleranceError",
    "LiouvillianEigensystem",
    "PairObservable",
    "PerturbativePrediction",
    "SpectroscopyConfig",
    "density_matrices",
    "evolve_series",
    "liouvillian_eigensystem",
    "liouvillian_matrix",
    "noise_action",
    "noise_adjoint_action",
    "perturbative_prediction",
    "sparse_liouvillian",
    "synth_series",
    "unvec",
    "vec",
]


class BackendToleranceError(RuntimeError):
    def __init__(self, message: str, error_estimate: float):
        super().__init__(f"{message} (estimated error {error_estimate:.3e})")
        self.error_estimate = error_estimate


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(v.size)))
    return np.asarray(v).reshape((d, d), order="F")


@dataclass(frozen=True, eq=False)
class PairObservable:
    """The rank-one observable ``scale * |b><a|`` and its matching initial state."""

    a_state: np.ndarray
    b_state: np.ndarray
    scale: float = 2.0

    def __post_init__(self):
        for name in ("a_state", "b_state"):
            v = np.asarray(getattr(self, name), dtype=complex).reshape(-1)
            if abs(np.linalg.norm(v) - 1) > 1e-12:
                raise ValueError(f"{name} must have unit norm, got {np.linalg.norm(v)}")
            object.__setattr__(self, name, v)

    @classmethod
    def from_spectrum(cls, spectrum: Spectrum, a: int, b: int) -> "PairObservable":
        return cls(spectrum.state(a), spectrum.state(b))

    def matrix(self) -> np.ndarray:
        return self.scale * np.outer(self.b_state, self.a_state.conj())

    def initial_state(self) -> np.ndarray:
        psi = (self.a_state + self.b_state) / np.sqrt(2)
        return psi / np.linalg.norm(psi)

    def transformed(self, u: np.ndarray) -> "PairObservable":
        return PairObservable(u @ self.a_state, u @ self.b_state, self.scale)


@dataclass(frozen=True)
class SpectroscopyConfig:
    dt: float
    L: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"time step must be positive, got {self.dt}")
        if int(self.L) != self.L or self.L < 2:
            raise ValueError(f"need at least 2 samples, got L={self.L}")

    def aliased(self, energies) -> bool:
        """True when ``dt * max|E_l - E_m| >= pi`` (the pair frequencies can alias)."""
        return self.dt * max_gap(energies) >= np.pi

    def check_alias(self, energies) -> bool:
        bad = self.aliased(energies)
        if bad:
            warnings.warn(
                f"dt={self.dt} with spectral width {max_gap(energies):.6g} violates dt*width < pi; "
                "retrieved frequencies may alias",
                stacklevel=2,
            )
        return bad

    def rescaled(self, c: float) -> "SpectroscopyConfig":
        return SpectroscopyConfig(self.dt * c, self.L)


# ---------------------------------------------------------------------------
# Superoperators


def _generator_parts(h, noise):
    """Validated ``(H + H_err, lindblads)``."""
    h = check_operator(h, "Hamiltonian")
    if hermiticity_error(h) > 1e-10 * max(1.0, float(np.abs(h).max())):
        raise ValueError("Hamiltonian is not Hermitian")
    d = h.shape[0]
    if noise is None:
        return h, ()
    if noise.dim not in (None, d):
        raise ValueError(f"noise acts on dimension {noise.dim}, Hamiltonian on {d}")
    return h + noise.h_err_or_zero(d), noise.lindblads


def liouvillian_matrix(h: np.ndarray, noise: NoiseModel | None = None) -> np.ndarray:
    h_exp, lindblads = _generator_parts(h, noise)
    d = h_exp.shape[0]
    eye = np.eye(d, dtype=complex)
    lv = -1j * (np.kron(eye, h_exp) - np.kron(h_exp.T, eye))
    for l in lindblads:
        ldl = l.conj().T @ l
        lv += np.kron(l.conj(), l) - 0.5 * np.kron(eye, ldl) - 0.5 * np.kron(ldl.T, eye)
    return lv


def noise_action(noise: NoiseModel, x: np.ndarray) -> np.ndarray:
    """``-i[H_err, X] + sum_k (L X L^+ - {L^+ L, X}/2)``."""
    h1 = noise.h_err_or_zero(x.shape[0])
    out = -1j * (h1 @ x - x @ h1)
    for l in noise.lindblads:
        ld = l.conj().T
        ldl = ld @ l
        out += l @ x @ ld - 0.5 * (ldl @ x + x @ ldl)
    return out


def noise_adjoint_action(noise: NoiseModel, x: np.ndarray) -> np.ndarray:
    """Hilbert-Schmidt adjoint of :func:`noise_action`."""
    h1 = noise.h_err_or_zero(x.shape[0])
    out = 1j * (h1 @ x - x @ h1)
    for l in noise.lindblads:
        ld = l.conj().T
        ldl = ld @ l
        out += ld @ x @ l - 0.5 * (ldl @ x + x @ ldl)
    return out


# ---------------------------------------------------------------------------
# Eigensystem


@dataclass(frozen=True, eq=False)
class LiouvillianEigensystem:
    eigenvalues: np.ndarray
    right: np.ndarray
    lu: tuple = field(repr=False)

    def project(self, v: np.ndarray) -> np.ndarray:
        """Mode weights ``w`` with ``right @ w == v``."""
        return scipy.linalg.lu_solve(self.lu, v)

    def residuals(self, lv: np.ndarray) -> np.ndarray:
        r = lv @ self.right - self.right * self.eigenvalues
        return np.linalg.norm(r, axis=0) / np.linalg.norm(self.right, axis=0)


def liouvillian_eigensystem(lv: np.ndarray) -> LiouvillianEigensystem:
    lv = np.asarray(lv, dtype=complex)
    if lv.ndim != 2 or lv.shape[0] != lv.shape[1]:
        raise ValueError(f"Liouvillian must be square, got shape {lv.shape}")
    try:
        evals, right = scipy.linalg.eig(lv, check_finite=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise RuntimeError(f"eigensolver did not converge: {exc}") from exc
    right = right / np.linalg.norm(right, axis=0)
    return LiouvillianEigensystem(evals, right, scipy.linalg.lu_factor(right))


# ---------------------------------------------------------------------------
# Time evolution


def _initial_density(psi0: np.ndarray, d: int) -> np.ndarray:
    psi0 = np.asarray(psi0, dtype=complex).reshape(-1)
    if psi0.size != d:
        raise ValueError(f"initial state has dimension {psi0.size}, expected {d}")
    if abs(np.linalg.norm(psi0) - 1) > 1e-10:
        raise ValueError("initial state must have unit norm")
    return np.outer(psi0, psi0.conj())


def _stepper_samples(lv, rho0, o_row, dt, L):
    prop = scipy.linalg.expm(lv * dt)
    v = vec(rho0)
    y = np.empty(L, dtype=complex)
    for k in range(L):
        y[k] = o_row @ v
        v = prop @ v
    return y


def sparse_liouvillian(h: np.ndarray, noise: NoiseModel | None = None) -> sps.csr_matrix:
    """Same superoperator as :func:`liouvillian_matrix`, assembled in CSR form."""
    h_exp, lindblads = _generator_parts(h, noise)
    d = h_exp.shape[0]
    eye = sps.identity(d, dtype=complex, format="csr")
    h_exp = sps.csr_matrix(h_exp)
    lv = -1j * (sps.kron(eye, h_exp) - sps.kron(h_exp.T, eye))
    for l in lindblads:
        l = sps.csr_matrix(l)
        ldl = l.conj().T @ l
        lv = lv + sps.kron(l.conj(), l) - 0.5 * sps.kron(eye, ldl) - 0.5 * sps.kron(ldl.T, eye)
    return sps.csr_matrix(lv)


def _krylov_samples(lv, rho0, o_row, dt, L):
    states = expm_multiply(lv, vec(rho0), start=0.0, stop=dt * (L - 1), num=L, endpoint=True)
    return states @ o_row


def _spectral_samples(system: LiouvillianEigensystem, rho0, o_row, dt, L):
    v0 = vec(rho0)
    w = system.project(v0)
    coef = (o_row @ system.right) * w
    scale = np.abs(coef).sum()
    keep = np.abs(coef) > 1e-17 * scale
    coef, lam = coef[keep], system.eigenvalues[keep]
    t = dt * np.arange(L)
    y = np.exp(np.outer(t, lam)) @ coef if lam.size * L <= 2**24 else _power_sum(coef, np.exp(lam * dt), L)
    # rounding in the projection is amplified by cancellation between modes
    recon = np.linalg.norm(system.right @ w - v0) / np.linalg.norm(v0)
    err = np.finfo(float).eps * scale * 10 + recon * np.linalg.norm(o_row)
    ref = max(abs(o_row @ v0), np.abs(y).max(), 1e-300)
    return y, err / ref


def _power_sum(coef, z, L):
    y = np.empty(L, dtype=complex)
    zk = np.ones_like(z)
    for k in range(L):
        y[k] = zk @ coef
        zk = zk * z
    return y


def evolve_series(
    h: np.ndarray,
    noise: NoiseModel | None,
    initial_state: np.ndarray,
    obs: PairObservable | np.ndarray,
    cfg: SpectroscopyConfig,
    backend: str = "spectral",
    *,
    eigensystem: LiouvillianEigensystem | None = None,
    rtol: float = SERIES_RTOL,
) -> TimeSeries:
    """Noisy expectation values ``Tr(O rho(k dt))`` starting from a pure state.

    ``obs`` may be a :class:`PairObservable` or any square operator. A
    precomputed ``eigensystem`` of the same Liouvillian can be passed to the
    spectral backend to amortize the factorization.
    """
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
    h = check_operator(h, "Hamiltonian")
    d = h.shape[0]
    rho0 = _initial_density(initial_state, d)
    o = obs.matrix() if isinstance(obs, PairObservable) else check_operator(obs, "observable")
    # Tr(O rho) = vec(O^T) . vec(rho), no conjugation
    o_row = vec(o.T)
    if backend == "stepper" and d > DENSE_STEPPER_MAX_DIM:
        y = _krylov_samples(sparse_liouvillian(h, noise), rho0, o_row, cfg.dt, cfg.L)
    elif backend == "stepper":
        y = _stepper_samples(liouvillian_matrix(h, noise), rho0, o_row, cfg.dt, cfg.L)
    else:
        if eigensystem is None:
            eigensystem = liouvillian_eigensystem(liouvillian_matrix(h, noise))
        y, err = _spectral_samples(eigensystem, rho0, o_row, cfg.dt, cfg.L)
        if err > rtol:
            raise BackendToleranceError("spectral backend missed the series tolerance", err)
    return TimeSeries(cfg.dt, y)


def density_matrices(h, noise, initial_state, dt: float, ks) -> list[np.ndarray]:
    """Exact ``rho(k dt)`` for the requested step indices (stepper propagation)."""
    h = check_operator(h, "Hamiltonian")
    d = h.shape[0]
    lv = liouvillian_matrix(h, noise)
    v0 = vec(_initial_density(initial_state, d))
    return [unvec(scipy.linalg.expm(lv * (dt * k)) @ v0) for k in ks]


# ---------------------------------------------------------------------------
# Perturbation theory


@dataclass(frozen=True)
class PerturbativePrediction:
    lambda0: complex
    lambda1: complex
    lambda2: complex
    r_ab: float
    phase_bias: float
    excluded_terms: int = 0
    excluded_weight: float = 0.0

    @property
    def first_order(self) -> complex:
        return self.lambda0 + self.lambda1

    @property
    def second_order(self) -> complex:
        return self.lambda0 + self.lambda1 + self.lambda2


def _noise_in_eigenbasis(noise: NoiseModel, vectors: np.ndarray):
    vh = vectors.conj().T
    d = vectors.shape[0]
    h1 = vh @ noise.h_err_or_zero(d) @ vectors
    ls = [vh @ l @ vectors for l in noise.lindblads]
    k = sum((l.conj().T @ l for l in ls), np.zeros((d, d), dtype=complex))
    return h1, ls, k


def _dyad_elements(h1, ls, k, a, b):
    """Matrices ``A[p, m] = <a|D[|p><m|]|b>`` and ``B[p, m] = <p|D[|a><b|]|m>``."""
    d = h1.shape[0]
    left = -1j * h1 - 0.5 * k  # acts from the left of the dyad
    right = 1j * h1 - 0.5 * k  # acts from the right
    A = np.zeros((d, d), dtype=complex)
    B = np.zeros((d, d), dtype=complex)
    for l in ls:
        A += np.outer(l[a, :], l[b, :].conj())
        B += np.outer(l[:, a], l[:, b].conj())
    A[:, b] += left[a, :]
    A[a, :] += right[:, b]
    B[:, b] += left[:, a]
    B[a, :] += right[b, :]
    return A, B


def perturbative_prediction(
    spectrum: Spectrum,
    noise: NoiseModel,
    a: int,
    b: int,
    dt: float,
    gap_threshold: float | None = None,
) -> PerturbativePrediction:
    """First- and second-order shifts of the Liouvillian eigenvalue ``i E_ba``.

    Second-order terms whose unperturbed gap ``|E_ba - E_mp|`` falls below
    ``gap_threshold`` (default ``1e-8 * ||H||``) are skipped and counted.
    """
    if a == b:
        raise ValueError("need two distinct eigenstates")
    energies = spectrum.energies
    e_ba = energies[b] - energies[a]
    lam0 = 1j * e_ba
    if noise.kappa == 0 and not noise.lindblads and (noise.h_err is None or not np.any(noise.h_err)):
        return PerturbativePrediction(lam0, 0j, 0j, 1.0, 0.0)
    if gap_threshold is None:
        gap_threshold = 1e-8 * max(float(np.abs(energies).max()), 1e-300)
    h1, ls, k = _noise_in_eigenbasis(noise, spectrum.vectors)
    A, B = _dyad_elements(h1, ls, k, a, b)
    lam1 = complex(A[a, b])

    gaps = e_ba - (energies[None, :] - energies[:, None])  # E_ba - E_mp at [p, m]
    num = B * A
    mask = np.ones_like(num, dtype=bool)
    mask[a, b] = False
    small = mask & (np.abs(gaps) < gap_threshold)
    excluded = int(small.sum())
    excluded_weight = float(np.abs(num[small]).max()) if excluded else 0.0
    if excluded_weight > 1e-12 * max(abs(lam1), 1e-300) ** 2:
        warnings.warn(
            f"{excluded} second-order terms with near-degenerate denominators dropped "
            f"(largest numerator {excluded_weight:.3e})",
            stacklevel=2,
        )
    use = mask & ~small
    lam2 = complex(np.sum(num[use] / (1j * gaps[use])))
    return PerturbativePrediction(
        lambda0=lam0,
        lambda1=lam1,
        lambda2=lam2,
        r_ab=float(np.exp(lam1.real * dt)),
        phase_bias=float(lam1.imag * dt),
        excluded_terms=excluded,
        excluded_weight=excluded_weight,
    )
