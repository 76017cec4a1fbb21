"""
Two-level linear algebra: Pauli operators, density matrices, Bloch vectors
and Liouville-space superoperators.

Conventions used throughout the package:

* basis ordering {|0>, |1>} with sigma_z|0> = +|0>; |1> is the excited state;
* column-stacking vectorization, vec(A rho B) = (B^T kron A) vec(rho);
* all matrices are ``torch.complex128`` tensors. Functions accept a leading
  batch dimension wherever that is cheap to support.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Tuple, Union

import torch

from sled_qubit.exceptions import (
    InvalidStateError,
    NonFiniteError,
    NonHermitianError,
    UnphysicalVectorError,
)

logger = logging.getLogger(__name__)

DTYPE = torch.complex128
REAL_DTYPE = torch.float64

STATE_TOLERANCE = 1e-12  # Hermiticity / trace tolerance for DensityMatrix
BLOCH_NORM_TOLERANCE = 1e-9
FIDELITY_CLIP = 1e-10  # eigenvalue residues in [-FIDELITY_CLIP, 0) are set to 0


def _mat(rows: list) -> torch.Tensor:
    return torch.tensor(rows, dtype=DTYPE)


IDENTITY = _mat([[1, 0], [0, 1]])
SIGMA_X = _mat([[0, 1], [1, 0]])
SIGMA_Y = _mat([[0, -1j], [1j, 0]])
SIGMA_Z = _mat([[1, 0], [0, -1]])
PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)

# Row vector t with t @ vec(rho) = Tr(rho) under column stacking
TRACE_ROW = torch.tensor([1, 0, 0, 1], dtype=DTYPE)

MatrixLike = Union[torch.Tensor, "DensityMatrix"]


def outer(i: int, j: int) -> torch.Tensor:
    """Return the basis operator |i><j|."""
    if i not in (0, 1) or j not in (0, 1):
        raise ValueError(f"basis indices must be 0 or 1, got ({i}, {j})")
    op = torch.zeros((2, 2), dtype=DTYPE)
    op[i, j] = 1.0
    return op


def as_matrix(value: MatrixLike) -> torch.Tensor:
    """Return the underlying 2x2 complex tensor of a matrix-like value."""
    if isinstance(value, DensityMatrix):
        return value.matrix
    if not isinstance(value, torch.Tensor):
        value = torch.as_tensor(value)
    return value.to(DTYPE)


def hermiticity_deviation(matrix: torch.Tensor) -> float:
    """Largest entrywise |M - M^dagger|."""
    return float((matrix - matrix.conj().transpose(-1, -2)).abs().max().item())


@dataclass(frozen=True)
class BlochVector:
    """
    Bloch-vector representation (<sigma_x>, <sigma_y>, <sigma_z>).

    Construction does not enforce |v| <= 1 because single stochastic
    trajectories can leave the unit ball; :func:`from_bloch` does.
    """

    x: float
    y: float
    z: float

    @property
    def norm(self) -> float:
        return math.sqrt(self.x**2 + self.y**2 + self.z**2)

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.x, self.y, self.z)

    def is_physical(self) -> bool:
        return self.norm <= 1.0 + BLOCH_NORM_TOLERANCE

    def __sub__(self, other: "BlochVector") -> "BlochVector":
        return BlochVector(self.x - other.x, self.y - other.y, self.z - other.z)


@dataclass(frozen=True)
class DensityMatrix:
    """
    Qubit density matrix.

    Attributes:
        matrix: 2x2 complex128 tensor, Hermitian with unit trace
        atol: Tolerance for the Hermiticity and trace checks

    Raises:
        InvalidStateError: If the matrix is not 2x2, not Hermitian or not
            trace one within ``atol``
    """

    matrix: torch.Tensor
    atol: float = field(default=STATE_TOLERANCE, compare=False, repr=False)

    def __post_init__(self) -> None:
        if not isinstance(self.matrix, torch.Tensor):
            raise TypeError(f"matrix must be torch.Tensor, got {type(self.matrix)}")
        if tuple(self.matrix.shape) != (2, 2):
            raise InvalidStateError(f"density matrix must be 2x2, got shape {tuple(self.matrix.shape)}")
        object.__setattr__(self, "matrix", self.matrix.to(DTYPE))
        if not torch.isfinite(torch.view_as_real(self.matrix)).all():
            raise InvalidStateError("density matrix contains non-finite entries")
        deviation = hermiticity_deviation(self.matrix)
        if deviation > self.atol:
            raise InvalidStateError(f"density matrix is not Hermitian (deviation {deviation:.3e})")
        trace = complex(torch.trace(self.matrix).item())
        if abs(trace - 1.0) > self.atol:
            raise InvalidStateError(f"density matrix trace is {trace.real:.15g}, expected 1")

    @classmethod
    def pure(cls, index: int) -> "DensityMatrix":
        """Projector |index><index|."""
        return cls(outer(index, index))

    @classmethod
    def maximally_mixed(cls) -> "DensityMatrix":
        return cls(IDENTITY / 2)

    def eigenvalues(self) -> torch.Tensor:
        """Real eigenvalues in ascending order."""
        return torch.linalg.eigvalsh(self.matrix)

    def is_positive(self, tol: float = STATE_TOLERANCE) -> bool:
        return float(self.eigenvalues()[0].item()) >= -tol

    def determinant(self) -> float:
        return float(torch.linalg.det(self.matrix).real.item())


def to_bloch(rho: MatrixLike) -> BlochVector:
    """
    Bloch components Tr[sigma_i rho].

    Args:
        rho: Density matrix or 2x2 tensor

    Returns:
        BlochVector with the real parts of the traces

    Raises:
        InvalidStateError: If the trace differs from one

    Example:
        >>> to_bloch(DensityMatrix.pure(0))
        BlochVector(x=0.0, y=0.0, z=1.0)
    """
    matrix = as_matrix(rho)
    trace = complex(torch.trace(matrix).item())
    if abs(trace - 1.0) > STATE_TOLERANCE and not isinstance(rho, DensityMatrix):
        raise InvalidStateError(f"density matrix trace is {trace.real:.15g}, expected 1")
    x, y, z = bloch_components(matrix).tolist()
    return BlochVector(x, y, z)


def bloch_components(matrices: torch.Tensor) -> torch.Tensor:
    """
    Batched Bloch components of (..., 2, 2) matrices.

    Returns:
        Real tensor of shape (..., 3)
    """
    rho01 = matrices[..., 0, 1]
    rho10 = matrices[..., 1, 0]
    x = (rho01 + rho10).real
    y = (1j * (rho01 - rho10)).real
    z = (matrices[..., 0, 0] - matrices[..., 1, 1]).real
    return torch.stack([x, y, z], dim=-1).to(REAL_DTYPE)


def from_bloch(v: Union[BlochVector, Tuple[float, float, float]]) -> DensityMatrix:
    """
    Density matrix (I + v . sigma) / 2.

    Raises:
        UnphysicalVectorError: If |v| > 1 + 1e-9
    """
    if not isinstance(v, BlochVector):
        v = BlochVector(*v)
    if not v.is_physical():
        raise UnphysicalVectorError(v.norm)
    matrix = (IDENTITY + v.x * SIGMA_X + v.y * SIGMA_Y + v.z * SIGMA_Z) / 2
    return DensityMatrix(matrix)


def frame_rotation(theta: Union[float, torch.Tensor]) -> torch.Tensor:
    """Diagonal unitary exp(-i sigma_z theta / 2); batched over ``theta``."""
    theta = torch.as_tensor(theta, dtype=REAL_DTYPE)
    phase = torch.exp(-0.5j * theta.to(DTYPE))
    unitary = torch.zeros(theta.shape + (2, 2), dtype=DTYPE)
    unitary[..., 0, 0] = phase
    unitary[..., 1, 1] = phase.conj()
    return unitary


def rotate_to_frame(matrices: torch.Tensor, omega_d: float, times: torch.Tensor) -> torch.Tensor:
    """Apply U rho U^dagger with U = exp(-i sigma_z omega_d t / 2) to a batch of states."""
    unitary = frame_rotation(omega_d * torch.as_tensor(times, dtype=REAL_DTYPE))
    return unitary @ matrices @ unitary.conj().transpose(-1, -2)


def rotating_frame_bloch(rho: MatrixLike, omega_d: float, t: float) -> BlochVector:
    """
    Bloch vector in the frame rotating at ``omega_d``.

    The z component is unchanged; (x, y) are rotated by omega_d * t.
    """
    rotated = rotate_to_frame(as_matrix(rho), omega_d, torch.tensor(t, dtype=REAL_DTYPE))
    x, y, z = bloch_components(rotated).tolist()
    return BlochVector(x, y, z)


def clip_eigenvalues(
    matrix: torch.Tensor, clip: float = FIDELITY_CLIP
) -> Tuple[torch.Tensor, float]:
    """
    Set eigenvalue residues in [-clip, 0) to zero and renormalize the trace.

    Returns:
        Tuple of (clipped matrix, magnitude of the most negative clipped
        eigenvalue)

    Raises:
        InvalidStateError: If an eigenvalue is below ``-clip``
    """
    hermitian = 0.5 * (matrix + matrix.conj().transpose(-1, -2))
    values, vectors = torch.linalg.eigh(hermitian)
    lowest = float(values.min().item())
    if lowest < -clip:
        raise InvalidStateError(f"eigenvalue {lowest:.3e} below clipping threshold -{clip:.1e}")
    if lowest >= 0.0:
        return hermitian, 0.0
    values = values.clamp(min=0.0)
    values = values / values.sum()
    rebuilt = vectors @ torch.diag_embed(values.to(DTYPE)) @ vectors.conj().transpose(-1, -2)
    return rebuilt, -lowest


def fidelity(rho1: MatrixLike, rho2: MatrixLike, clip: float = FIDELITY_CLIP) -> float:
    """
    Qubit state fidelity F = Tr[rho1 rho2] + 2 sqrt(det rho1 det rho2).

    Determinants are taken from eigenvalues after clipping residues in
    [-clip, 0). The result is clamped to [0, 1].

    Raises:
        InvalidStateError: If an eigenvalue is below ``-clip``

    Example:
        >>> fidelity(DensityMatrix.pure(0), DensityMatrix.maximally_mixed())
        0.5
    """
    a, _ = clip_eigenvalues(as_matrix(rho1), clip)
    b, _ = clip_eigenvalues(as_matrix(rho2), clip)
    overlap = float(torch.trace(a @ b).real.item())
    det_a = float(torch.linalg.eigvalsh(a).clamp(min=0.0).prod().item())
    det_b = float(torch.linalg.eigvalsh(b).clamp(min=0.0).prod().item())
    value = overlap + 2.0 * math.sqrt(det_a * det_b)
    return min(1.0, max(0.0, value))


def vectorize(rho: MatrixLike) -> torch.Tensor:
    """Column-stacked Liouville vector (rho00, rho10, rho01, rho11); batched."""
    matrix = as_matrix(rho)
    return matrix.transpose(-1, -2).reshape(matrix.shape[:-2] + (4,))


def devectorize(vec: torch.Tensor) -> torch.Tensor:
    """Inverse of :func:`vectorize`; returns (..., 2, 2) tensors."""
    vec = torch.as_tensor(vec).to(DTYPE)
    return vec.reshape(vec.shape[:-1] + (2, 2)).transpose(-1, -2)


def sandwich_superop(left: torch.Tensor, right: torch.Tensor) -> torch.Tensor:
    """Superoperator of rho -> left @ rho @ right, i.e. right^T kron left."""
    return torch.kron(right.transpose(-1, -2).contiguous(), left)


def commutator_superop(hamiltonian: torch.Tensor, check_hermitian: bool = True) -> torch.Tensor:
    """
    Superoperator of rho -> -i [H, rho].

    Raises:
        NonHermitianError: If ``check_hermitian`` and H is not Hermitian
        NonFiniteError: If H has non-finite entries
    """
    hamiltonian = as_matrix(hamiltonian)
    if not torch.isfinite(torch.view_as_real(hamiltonian)).all():
        raise NonFiniteError("Hamiltonian contains non-finite entries")
    if check_hermitian:
        deviation = hermiticity_deviation(hamiltonian)
        if deviation > 1e-12:
            raise NonHermitianError(deviation)
    return -1j * (sandwich_superop(hamiltonian, IDENTITY) - sandwich_superop(IDENTITY, hamiltonian))


def anticommutator_superop(operator: torch.Tensor) -> torch.Tensor:
    """Superoperator of rho -> {A, rho}."""
    operator = as_matrix(operator)
    return sandwich_superop(operator, IDENTITY) + sandwich_superop(IDENTITY, operator)


def plain_commutator_superop(operator: torch.Tensor) -> torch.Tensor:
    """Superoperator of rho -> [A, rho] without the -i factor."""
    operator = as_matrix(operator)
    return sandwich_superop(operator, IDENTITY) - sandwich_superop(IDENTITY, operator)


def dissipator_superop(i: int, j: int) -> torch.Tensor:
    """
    Lindblad dissipator D_ij(rho) = |i><j| rho |j><i| - {|j><j|, rho} / 2.

    D_01 transfers population from |1> to |0> (emission); D_10 the reverse.
    """
    jump = outer(i, j)
    return sandwich_superop(jump, jump.conj().T) - 0.5 * anticommutator_superop(outer(j, j))


def apply_superop(superop: torch.Tensor, rho: MatrixLike) -> torch.Tensor:
    """Act with a superoperator on a (batch of) 2x2 matrices."""
    vec = vectorize(rho)
    return devectorize((superop @ vec.unsqueeze(-1)).squeeze(-1))


def trace_annihilation_residual(liouvillian: torch.Tensor) -> float:
    """max |TRACE_ROW @ L|; zero for trace-preserving generators."""
    return float((TRACE_ROW @ liouvillian).abs().max().item())


def matrix_exp(superop: torch.Tensor) -> torch.Tensor:
    """
    Matrix exponential of a (batch of) superoperators.

    Uses ``torch.linalg.matrix_exp`` (scaling and squaring with a fixed-order
    Taylor kernel).

    Raises:
        NonFiniteError: If the input has NaN or infinite entries
    """
    superop = torch.as_tensor(superop).to(DTYPE)
    if not torch.isfinite(torch.view_as_real(superop)).all():
        raise NonFiniteError("superoperator contains non-finite entries")
    return torch.linalg.matrix_exp(superop)


def clip_eigenvalues_batch(
    matrices: torch.Tensor, clip: float = FIDELITY_CLIP
) -> Tuple[torch.Tensor, torch.Tensor, float]:
    """
    Batched eigenvalue clipping for (..., 2, 2) states.

    Returns:
        Tuple of (clipped matrices, clipped eigenvalues, largest clip magnitude)

    Raises:
        InvalidStateError: If any eigenvalue is below ``-clip``
    """
    hermitian = 0.5 * (matrices + matrices.conj().transpose(-1, -2))
    values, vectors = torch.linalg.eigh(hermitian)
    lowest = float(values.min().item())
    if lowest < -clip:
        raise InvalidStateError(f"eigenvalue {lowest:.3e} below clipping threshold -{clip:.1e}")
    if lowest >= 0.0:
        return hermitian, values, 0.0
    values = values.clamp(min=0.0)
    values = values / values.sum(dim=-1, keepdim=True)
    rebuilt = vectors @ torch.diag_embed(values.to(DTYPE)) @ vectors.conj().transpose(-1, -2)
    return rebuilt, values, -lowest


def fidelity_batch(
    first: torch.Tensor, second: torch.Tensor, clip: float = FIDELITY_CLIP
) -> Tuple[torch.Tensor, float]:
    """
    Fidelity of matching pairs in two (..., 2, 2) batches.

    Returns:
        Tuple of (real tensor of fidelities clamped to [0, 1], largest clip
        magnitude applied to either batch)
    """
    a, values_a, clip_a = clip_eigenvalues_batch(first, clip)
    b, values_b, clip_b = clip_eigenvalues_batch(second, clip)
    overlap = torch.einsum("...ij,...ji->...", a, b).real
    determinants = values_a.clamp(min=0.0).prod(dim=-1) * values_b.clamp(min=0.0).prod(dim=-1)
    value = overlap + 2.0 * torch.sqrt(determinants)
    return value.clamp(0.0, 1.0), max(clip_a, clip_b)
