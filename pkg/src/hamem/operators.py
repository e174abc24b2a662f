"""Pauli algebra, model Hamiltonians, noise models and exact diagonalization.

Operators are plain complex ``numpy`` arrays over the ``2**n`` dimensional
qubit space. Qubit 0 is the leftmost (most significant) tensor factor.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

PAULI_LETTERS = "IXYZ"

_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

HERMITIAN_ATOL = 1e-12


@dataclass(frozen=True)
class PauliString:
    """Phase-free tensor product of single-qubit Paulis, e.g. ``PauliString("XIZ")``."""

    letters: str

    def __post_init__(self):
        letters = str(self.letters).upper()
        if not letters:
            raise ValueError("a Pauli string needs at least one qubit")
        bad = set(letters) - set(PAULI_LETTERS)
        if bad:
            raise ValueError(f"invalid Pauli letters {sorted(bad)} in {self.letters!r}")
        object.__setattr__(self, "letters", letters)

    @property
    def n(self) -> int:
        return len(self.letters)

    @classmethod
    def uniform(cls, letter: str, n: int) -> "PauliString":
        return cls(letter * n)

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls("I" * n)

    def __mul__(self, other: "PauliString") -> "PauliString":
        """Letterwise product with the global phase discarded."""
        _check_same_size(self, other)
        return PauliString("".join(_letter_product(a, b) for a, b in zip(self.letters, other.letters)))

    def __str__(self) -> str:
        return self.letters


def _letter_product(a: str, b: str) -> str:
    if a == "I":
        return b
    if b == "I":
        return a
    if a == b:
        return "I"
    return ({"X", "Y", "Z"} - {a, b}).pop()


def _check_same_size(p: PauliString, q: PauliString) -> None:
    if p.n != q.n:
        raise ValueError(f"Pauli strings act on different qubit counts ({p.n} vs {q.n})")


def as_pauli(p: PauliString | str) -> PauliString:
    return p if isinstance(p, PauliString) else PauliString(p)


def all_pauli_strings(n: int) -> list[PauliString]:
    """All ``4**n`` strings in lexicographic ``IXYZ`` order."""
    return [PauliString("".join(t)) for t in itertools.product(PAULI_LETTERS, repeat=n)]


def pauli_matrix(p: PauliString | str) -> np.ndarray:
    p = as_pauli(p)
    return reduce(np.kron, (_SINGLE[c] for c in p.letters))


def commutation_sign(p: PauliString | str, q: PauliString | str) -> int:
    """+1 if the two strings commute, -1 if they anticommute."""
    p, q = as_pauli(p), as_pauli(q)
    _check_same_size(p, q)
    clashes = sum(1 for a, b in zip(p.letters, q.letters) if a != "I" and b != "I" and a != b)
    return -1 if clashes % 2 else 1


def embed(op: np.ndarray, site: int, n: int) -> np.ndarray:
    """Place a single-qubit operator on ``site`` of an ``n``-qubit register."""
    if not 0 <= site < n:
        raise ValueError(f"site {site} outside register of {n} qubits")
    factors = [np.eye(2, dtype=complex)] * n
    factors[site] = np.asarray(op, dtype=complex)
    return reduce(np.kron, factors)


def qubit_count(dim: int) -> int:
    n = int(round(np.log2(dim)))
    if n < 1 or 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def check_operator(a: np.ndarray, name: str = "operator") -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {a.shape}")
    qubit_count(a.shape[0])
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def hermiticity_error(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def conjugate(a: np.ndarray, p: PauliString | str) -> np.ndarray:
    """Return ``P A P`` (Paulis are Hermitian and involutory, so this is ``P A P^dagger``)."""
    a = check_operator(a)
    p = as_pauli(p)
    if 2**p.n != a.shape[0]:
        raise ValueError(f"Pauli string on {p.n} qubits does not match operator dimension {a.shape[0]}")
    pm = pauli_matrix(p)
    return pm @ a @ pm


# ---------------------------------------------------------------------------
# Model Hamiltonians


@dataclass(frozen=True)
class HamiltonianSpec:
    """Parameters of one of the two built-in models.

    ``ring`` uses frequency units for ``nu_z``, ``nu_x`` and ``J`` (the builder
    multiplies by 2*pi); ``xx-chain`` uses the dimensionless coupling ``g``.
    """

    variant: str
    n: int
    nu_z: float = 0.0
    nu_x: float = 0.0
    J: float = 0.0
    g: float = 0.0

    def __post_init__(self):
        if self.variant not in ("ring", "xx-chain"):
            raise ValueError(f"unknown Hamiltonian variant {self.variant!r}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"{self.variant} model needs n >= 2, got {self.n}")


def ring_edges(n: int) -> list[tuple[int, int]]:
    """Nearest-neighbour bonds of an ``n``-site ring; a single bond for ``n == 2``."""
    if n == 2:
        return [(0, 1)]
    return [(i, (i + 1) % n) for i in range(n)]


def build_hamiltonian(spec: HamiltonianSpec) -> np.ndarray:
    n = spec.n
    dim = 2**n
    h = np.zeros((dim, dim), dtype=complex)
    if spec.variant == "ring":
        two_pi = 2 * np.pi
        for i in range(n):
            h += 0.5 * two_pi * spec.nu_z * embed(_SINGLE["Z"], i, n)
            h += 0.5 * two_pi * spec.nu_x * embed(_SINGLE["X"], i, n)
        for i, j in ring_edges(n):
            for s in ("X", "Y"):
                h += 0.5 * two_pi * spec.J * (embed(_SINGLE[s], i, n) @ embed(_SINGLE[s], j, n))
    else:
        for j in range(n - 1):
            h -= spec.g * (embed(_SINGLE["X"], j, n) @ embed(_SINGLE["X"], j + 1, n))
        for j in range(n):
            h -= embed(_SINGLE["X"], j, n) + embed(_SINGLE["Y"], j, n)
    # remove rounding asymmetry from the kron products
    return 0.5 * (h + h.conj().T)


# ---------------------------------------------------------------------------
# Noise


NOISE_KINDS = ("paper-default", "amplitude-damping", "custom")

# Rows as written, i.e. ((i, 0), (0, 1)) -> first row (i, 0).
_DEPHASE_PHASE = np.array([[1j, 0], [0, 1]], dtype=complex)
_LOWERING = np.array([[0, 1], [0, 0]], dtype=complex)


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Lindblad operators (already scaled by sqrt(kappa)) plus a systematic error Hamiltonian."""

    kind: str
    kappa: float
    beta: float
    lindblads: tuple = field(default_factory=tuple)
    h_err: np.ndarray | None = None

    @property
    def dim(self) -> int | None:
        if self.h_err is not None:
            return self.h_err.shape[0]
        if self.lindblads:
            return self.lindblads[0].shape[0]
        return None

    def h_err_or_zero(self, dim: int) -> np.ndarray:
        if self.h_err is None:
            return np.zeros((dim, dim), dtype=complex)
        return self.h_err

    def conjugated(self, p: PauliString | str) -> "NoiseModel":
        """Noise seen in a frame rotated by ``p``: every operator mapped to ``P X P``."""
        return NoiseModel(
            kind=self.kind,
            kappa=self.kappa,
            beta=self.beta,
            lindblads=tuple(conjugate(l, p) for l in self.lindblads),
            h_err=None if self.h_err is None else conjugate(self.h_err, p),
        )


def z_sum(n: int) -> np.ndarray:
    return sum(embed(_SINGLE["Z"], j, n) for j in range(n))


def build_noise(kind: str, kappa: float, beta: float, n: int) -> NoiseModel:
    """Single-site noise of a built-in kind with ``H_err = kappa * beta * sum_j Z_j``."""
    if kind not in ("paper-default", "amplitude-damping"):
        raise ValueError(f"unknown noise kind {kind!r}; expected 'paper-default' or 'amplitude-damping'")
    if kappa < 0:
        raise ValueError(f"noise strength must be non-negative, got {kappa}")
    dim = 2**n
    if kappa == 0:
        return NoiseModel(kind, 0.0, beta, (), np.zeros((dim, dim), dtype=complex))
    local = _DEPHASE_PHASE if kind == "paper-default" else _LOWERING
    lindblads = tuple(np.sqrt(kappa) * embed(local, k, n) for k in range(n))
    return NoiseModel(kind, float(kappa), float(beta), lindblads, kappa * beta * z_sum(n))


def custom_noise(lindblads: Iterable[np.ndarray], h_err: np.ndarray | None = None, kappa: float = 1.0) -> NoiseModel:
    """Wrap arbitrary jump operators and a Hermitian error Hamiltonian."""
    ls = tuple(check_operator(l, "Lindblad operator") for l in lindblads)
    dims = {l.shape[0] for l in ls}
    if h_err is not None:
        h_err = check_operator(h_err, "error Hamiltonian")
        if hermiticity_error(h_err) > HERMITIAN_ATOL * max(1.0, np.abs(h_err).max()):
            raise ValueError("error Hamiltonian is not Hermitian")
        dims.add(h_err.shape[0])
    if len(dims) > 1:
        raise ValueError(f"noise operators have mismatched dimensions {sorted(dims)}")
    return NoiseModel("custom", float(kappa), 0.0, ls, h_err)


# ---------------------------------------------------------------------------
# Diagonalization


@dataclass(frozen=True, eq=False)
class Spectrum:
    energies: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.energies)

    def state(self, j: int) -> np.ndarray:
        return self.vectors[:, j]

    def gap(self, a: int, b: int) -> float:
        """``E_b - E_a``."""
        return float(self.energies[b] - self.energies[a])


def diagonalize(h: np.ndarray, atol: float = 1e-10) -> Spectrum:
    h = check_operator(h, "Hamiltonian")
    err = hermiticity_error(h)
    if err > atol * max(1.0, float(np.abs(h).max())):
        raise ValueError(f"Hamiltonian is not Hermitian (max |H - H^dagger| = {err:.3e})")
    energies, vectors = np.linalg.eigh(0.5 * (h + h.conj().T))
    return Spectrum(energies, vectors)


def spectral_norm(h: np.ndarray) -> float:
    return float(np.linalg.norm(h, 2))


def max_gap(energies: Sequence[float]) -> float:
    return float(np.max(energies) - np.min(energies))
