"""Dense Hermitian operators on at most twelve qubits.

Qubit 0 of a matrix is its most significant tensor factor. ``DensityMatrix.qubits``
remembers which register qubits the rows describe, so cuts can be written with
register indices via ``DensityMatrix.cut``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Final, Iterable, NamedTuple, Protocol, Sequence

import numpy as np

from boundchain.errors import DensifyLimitError, InvalidStateError, QubitIndexError

__all__ = [
    "DENSIFY_CAP",
    "DensityMatrix",
    "Cut",
    "PPTCertificate",
    "partial_transpose",
    "partial_trace",
    "negativity",
    "ppt_certificate",
    "fidelity_pure",
    "permute_parties",
    "abe_channel",
    "bell_projector",
    "smolin_density",
    "werner",
    "maximally_mixed",
    "kron",
]


LOGGER: Final = logging.getLogger("boundchain-density")

DENSIFY_CAP: Final = 12
HERMITIAN_TOLERANCE: Final = 1e-12
TRACE_TOLERANCE: Final = 1e-12
PPT_TOLERANCE: Final = 1e-10

_SINGLE_QUBIT_PAULIS: Final = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
_SINGLET: Final = np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2)


class SupportsStatevector(Protocol):
    def to_statevector(self) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    data: np.ndarray
    qubits: tuple[int, ...] = field(default=())

    def __post_init__(self):
        data = np.array(self.data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise InvalidStateError(f"Density matrix must be square, got shape {data.shape}")
        k = int(data.shape[0]).bit_length() - 1
        if data.shape[0] != 1 << k:
            raise InvalidStateError(f"Dimension {data.shape[0]} is not a power of two")
        if k > DENSIFY_CAP:
            raise DensifyLimitError(f"{k} qubits exceed the dense cap of {DENSIFY_CAP}")
        if not np.allclose(data, data.conj().T, rtol=0, atol=HERMITIAN_TOLERANCE):
            raise InvalidStateError("Density matrix is not Hermitian")
        if abs(np.trace(data) - 1) > TRACE_TOLERANCE:
            raise InvalidStateError(f"Density matrix has trace {np.trace(data).real}")
        spectrum = _hermitian_spectrum(data)
        if spectrum[0] < -PPT_TOLERANCE:
            raise InvalidStateError(f"Density matrix has negative eigenvalue {spectrum[0]:.3g}")
        # seeds the cached_property below
        self.__dict__["eigenvalues"] = spectrum
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        qubits = tuple(self.qubits) or tuple(range(k))
        if len(qubits) != k:
            raise QubitIndexError(f"{len(qubits)} qubit labels for a {k}-qubit matrix")
        object.__setattr__(self, "qubits", qubits)

    @property
    def k(self) -> int:
        return len(self.qubits)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """Ascending spectrum."""
        return np.linalg.eigvalsh(self.data)

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[0])

    def is_positive(self, tol: float = PPT_TOLERANCE) -> bool:
        return self.min_eigenvalue >= -tol

    def deviation(self, other: DensityMatrix | np.ndarray) -> float:
        """Largest entrywise distance."""
        other_data = other.data if isinstance(other, DensityMatrix) else np.asarray(other)
        if other_data.shape != self.data.shape:
            raise InvalidStateError(
                f"Cannot compare shapes {self.data.shape} and {other_data.shape}"
            )
        return float(np.max(np.abs(self.data - other_data)))

    def is_close(self, other: DensityMatrix | np.ndarray, tol: float = HERMITIAN_TOLERANCE) -> bool:
        return self.deviation(other) <= tol

    def cut(self, left_qubits: Iterable[int]) -> Cut:
        """Cut given by register qubit labels instead of matrix positions."""
        position = {q: i for i, q in enumerate(self.qubits)}
        try:
            left = [position[q] for q in left_qubits]
        except KeyError as err:
            raise QubitIndexError(f"Qubit {err.args[0]} is not part of this matrix") from err
        return Cut.of(left, self.k)

    def __repr__(self) -> str:
        return f"DensityMatrix(k={self.k}, qubits={self.qubits})"


@dataclass(frozen=True)
class Cut:
    left: frozenset[int]
    right: frozenset[int]

    def __post_init__(self):
        if not self.left or not self.right:
            raise QubitIndexError("Both sides of a cut must be nonempty")
        if self.left & self.right:
            raise QubitIndexError(f"Cut sides overlap on {sorted(self.left & self.right)}")

    @classmethod
    def of(cls, left: Iterable[int], k: int) -> Cut:
        left_set = frozenset(left)
        if any(not 0 <= q < k for q in left_set):
            raise QubitIndexError(f"Cut {sorted(left_set)} out of range for {k} qubits")
        return cls(left_set, frozenset(range(k)) - left_set)

    @property
    def k(self) -> int:
        return len(self.left) + len(self.right)

    def mirrored(self) -> Cut:
        return Cut(self.right, self.left)

    def _check(self, rho: DensityMatrix):
        if self.left | self.right != frozenset(range(rho.k)):
            raise QubitIndexError(
                f"Cut {sorted(self.left)}|{sorted(self.right)} does not cover {rho.k} qubits"
            )


class PPTCertificate(NamedTuple):
    is_ppt: bool
    min_eigenvalue: float


def partial_transpose(rho: DensityMatrix, cut: Cut) -> np.ndarray:
    """Transpose the ``cut.left`` factor."""
    cut._check(rho)
    k = rho.k
    tensor = rho.data.reshape((2,) * (2 * k))
    axes = list(range(2 * k))
    for q in cut.left:
        axes[q], axes[q + k] = axes[q + k], axes[q]
    return tensor.transpose(axes).reshape(rho.dim, rho.dim)


def _hermitian_spectrum(matrix: np.ndarray) -> np.ndarray:
    if not np.allclose(matrix, matrix.conj().T, rtol=0, atol=HERMITIAN_TOLERANCE):
        raise InvalidStateError("Spectrum requested for a non-Hermitian operator")
    try:
        return np.linalg.eigvalsh(matrix)
    except np.linalg.LinAlgError as err:
        raise InvalidStateError(f"Eigensolver failed: {err}") from err


def negativity(rho: DensityMatrix, cut: Cut) -> float:
    spectrum = _hermitian_spectrum(partial_transpose(rho, cut))
    return max(0.0, float((np.sum(np.abs(spectrum)) - 1) / 2))


def ppt_certificate(rho: DensityMatrix, cut: Cut, tol: float = PPT_TOLERANCE) -> PPTCertificate:
    if tol <= 0:
        raise InvalidStateError(f"PPT tolerance must be positive, got {tol}")
    lowest = float(_hermitian_spectrum(partial_transpose(rho, cut))[0])
    return PPTCertificate(lowest >= -tol, lowest)


def partial_trace(rho: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    """Marginal on matrix positions ``keep``, in that order."""
    keep = list(keep)
    k = rho.k
    if len(set(keep)) != len(keep) or any(not 0 <= q < k for q in keep):
        raise QubitIndexError(f"Invalid positions {keep} for {k} qubits")
    traced = [q for q in range(k) if q not in keep]
    tensor = rho.data.reshape((2,) * (2 * k))
    order = keep + traced
    tensor = tensor.transpose(order + [q + k for q in order])
    kept_dim = 1 << len(keep)
    traced_dim = 1 << len(traced)
    reduced = np.einsum(
        "itjt->ij", tensor.reshape(kept_dim, traced_dim, kept_dim, traced_dim)
    )
    return DensityMatrix(reduced, qubits=tuple(rho.qubits[q] for q in keep))


def fidelity_pure(rho: DensityMatrix, target: np.ndarray | SupportsStatevector) -> float:
    vector = np.asarray(
        target if isinstance(target, np.ndarray) else target.to_statevector(), dtype=complex
    )
    if vector.shape != (rho.dim,):
        raise InvalidStateError(
            f"Target of dimension {vector.shape} does not match {rho.dim}"
        )
    vector = vector / np.linalg.norm(vector)
    overlap = np.vdot(vector, rho.data @ vector).real
    return float(min(1.0, max(0.0, overlap)))


def permute_parties(rho: DensityMatrix, perm: Sequence[int]) -> DensityMatrix:
    """Relabel qubits: position ``j`` of the result is position ``perm[j]`` of ``rho``."""
    perm = list(perm)
    if sorted(perm) != list(range(rho.k)):
        raise QubitIndexError(f"{perm} is not a permutation of {rho.k} qubits")
    k = rho.k
    tensor = rho.data.reshape((2,) * (2 * k))
    permuted = tensor.transpose(perm + [p + k for p in perm]).reshape(rho.dim, rho.dim)
    return DensityMatrix(permuted, qubits=tuple(rho.qubits[p] for p in perm))


def abe_channel(rho: DensityMatrix) -> DensityMatrix:
    """Two qubits sent through the two correlated pairs of the four-party state.

    Every Bell pair of the mixture applies the same unknown Pauli to both
    qubits: ``(1/4) sum_i (s_i x s_i) rho (s_i x s_i)``.
    """
    if rho.k != 2:
        raise InvalidStateError(f"The ABE channel acts on two qubits, got {rho.k}")
    out = np.zeros_like(rho.data)
    for sigma in _SINGLE_QUBIT_PAULIS:
        doubled = np.kron(sigma, sigma)
        out += doubled @ rho.data @ doubled.conj().T
    return DensityMatrix(out / 4, qubits=rho.qubits)


def werner(p: float) -> DensityMatrix:
    """``p |Psi-><Psi-| + (1 - p) I/4``."""
    if not 0 <= p <= 1:
        raise InvalidStateError(f"Werner parameter must lie in [0, 1], got {p}")
    singlet = np.outer(_SINGLET, _SINGLET.conj())
    return DensityMatrix(p * singlet + (1 - p) * np.eye(4) / 4)


def maximally_mixed(k: int) -> DensityMatrix:
    return DensityMatrix(np.eye(1 << k, dtype=complex) / (1 << k))


def kron(*rhos: DensityMatrix) -> DensityMatrix:
    data = np.ones((1, 1), dtype=complex)
    qubits: list[int] = []
    for rho in rhos:
        data = np.kron(data, rho.data)
        qubits.extend(rho.qubits)
    if len(set(qubits)) != len(qubits):
        qubits = list(range(len(qubits)))
    return DensityMatrix(data, qubits=tuple(qubits))


def bell_projector(target: np.ndarray | SupportsStatevector) -> DensityMatrix:
    """``|t><t|`` for a two-qubit pure state, usually a ``BellIndex``."""
    vector = np.asarray(
        target if isinstance(target, np.ndarray) else target.to_statevector(), dtype=complex
    )
    if vector.shape != (4,):
        raise InvalidStateError(f"Expected a two-qubit state vector, got shape {vector.shape}")
    vector = vector / np.linalg.norm(vector)
    return DensityMatrix(np.outer(vector, vector.conj()))


def smolin_density() -> DensityMatrix:
    """``(1/16)(IIII + XXXX + YYYY + ZZZZ)``, written without any Bell-state convention."""
    total = np.zeros((16, 16), dtype=complex)
    for sigma in _SINGLE_QUBIT_PAULIS:
        total += np.kron(np.kron(sigma, sigma), np.kron(sigma, sigma))
    return DensityMatrix(total / 16)
