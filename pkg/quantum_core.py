"""
Quantum core for the cavity-Rydberg gate lab
Kets, density matrices, operator bases with their duals, and the polarization
conventions shared by every other module.

Polarization (Jones) convention, qubit order control first:
    |D> = (|H> + |V>)/sqrt2    |A> = (|H> - |V>)/sqrt2
    |R> = (|H> - i|V>)/sqrt2   |L> = (|H> + i|V>)/sqrt2
"""

import itertools
import logging
from functools import reduce
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from errors import DimensionMismatchError, SingularMetricError, ValidationError, ZeroTraceError

logger = logging.getLogger(__name__)

SQRT_HALF = 1.0 / np.sqrt(2.0)
METRIC_CONDITION_LIMIT = 1e12

POLARIZATION_VECTORS: Dict[str, np.ndarray] = {
    'H': np.array([1.0, 0.0], dtype=complex),
    'V': np.array([0.0, 1.0], dtype=complex),
    'D': np.array([SQRT_HALF, SQRT_HALF], dtype=complex),
    'A': np.array([SQRT_HALF, -SQRT_HALF], dtype=complex),
    'R': np.array([SQRT_HALF, -1j * SQRT_HALF], dtype=complex),
    'L': np.array([SQRT_HALF, 1j * SQRT_HALF], dtype=complex),
}

PAULI_MATRICES: Tuple[np.ndarray, ...] = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)

LabelLike = Union[str, Sequence[str]]


class Ket:
    """A pure state, possibly unnormalized to carry a survival probability"""

    def __init__(self, amplitudes, labels: Optional[Tuple[str, ...]] = None):
        """
        Args:
            amplitudes: Complex amplitudes in the H/V product basis
            labels: Polarization labels the ket was built from, if any
        """
        self.amplitudes = np.asarray(amplitudes, dtype=complex).reshape(-1)
        self.labels = labels
        norm2 = self.norm2
        if not 0.0 < norm2 <= 1.0 + 1e-9:
            raise ValidationError(f"ket norm^2 must lie in (0, 1], got {norm2:.6g}")

    @property
    def dimension(self) -> int:
        return self.amplitudes.size

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def normalized(self) -> 'Ket':
        return Ket(self.amplitudes / np.sqrt(self.norm2), self.labels)

    def tensor(self, other: 'Ket') -> 'Ket':
        labels = None
        if self.labels is not None and other.labels is not None:
            labels = self.labels + other.labels
        return Ket(np.kron(self.amplitudes, other.amplitudes), labels)

    def density(self) -> 'DensityMatrix':
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))

    def __repr__(self) -> str:
        name = ''.join(self.labels) if self.labels else f"d={self.dimension}"
        return f"Ket({name})"


class DensityMatrix:
    """
    A density matrix whose trace is the success probability of the process
    that produced it, or 1 once postselected
    """

    def __init__(self, entries, postselected: bool = False):
        entries = np.asarray(entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DimensionMismatchError(f"density matrix must be square, got {entries.shape}")
        self.entries = entries
        self.postselected = postselected

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.entries + self.entries.conj().T))

    def check_invariants(self, tol: float = 1e-8) -> List[str]:
        """
        Report violated invariants without repairing them

        Returns:
            List of human-readable violations, empty when all hold
        """
        problems = []
        if not np.allclose(self.entries, self.entries.conj().T, atol=tol):
            problems.append("not Hermitian")
        if self.eigenvalues().min() < -tol:
            problems.append(f"negative eigenvalue {self.eigenvalues().min():.3g}")
        trace = self.trace
        if self.postselected and abs(trace - 1.0) > tol:
            problems.append(f"postselected trace {trace:.6g} != 1")
        if not -tol <= trace <= 1.0 + tol:
            problems.append(f"trace {trace:.6g} outside [0, 1]")
        return problems

    def postselect(self) -> 'DensityMatrix':
        trace = self.trace
        if trace <= 0:
            raise ZeroTraceError("cannot postselect a density matrix with zero trace")
        return DensityMatrix(self.entries / trace, postselected=True)

    def fidelity(self, target: Ket) -> float:
        """Overlap <psi|rho|psi> with a normalized target ket"""
        return state_fidelity(self, target)


class GateUnitary:
    """A d x d unitary with a name"""

    def __init__(self, entries, name: str = "U"):
        entries = np.asarray(entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DimensionMismatchError(f"unitary must be square, got {entries.shape}")
        if not np.allclose(entries.conj().T @ entries, np.eye(entries.shape[0]), atol=1e-10):
            raise ValidationError(f"{name} is not unitary")
        self.entries = entries
        self.name = name

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]


class CnotConvention:
    """
    Basis convention under which the CPHASE acts as a CNOT

    The control is read in H/V, the target in D/A, and control H flips the target.
    """

    def __init__(self):
        self.control_basis = ('H', 'V')
        self.target_basis = ('D', 'A')
        self.flipping_control = 'H'
        # Maps H -> D and V -> A
        self.target_rotation = np.array([[1, 1], [1, -1]], dtype=complex) * SQRT_HALF

    def ideal_output(self, control: str, target: str) -> Tuple[str, str]:
        """Ideal output labels for an input in the CNOT basis"""
        if control == self.flipping_control:
            target = 'A' if target == 'D' else 'D'
        return control, target


class OperatorBasis:
    """
    d^2 operators spanning the d x d matrices

    The metric g_ij = tr(A_i^dagger A_j) is computed on construction; the basis is
    flagged orthonormal when g is the identity.
    """

    def __init__(self, elements, name: str):
        elements = np.asarray(elements, dtype=complex)
        if elements.ndim != 3 or elements.shape[1] != elements.shape[2]:
            raise DimensionMismatchError(f"basis elements must be (m, d, d), got {elements.shape}")
        d = elements.shape[1]
        if elements.shape[0] != d * d:
            raise DimensionMismatchError(f"need {d * d} elements for d={d}, got {elements.shape[0]}")
        self.elements = elements
        self.name = name
        self.metric = np.einsum('iab,jab->ij', elements.conj(), elements)
        self.orthonormal = bool(np.allclose(self.metric, np.eye(d * d), atol=1e-10))
        self._dual: Optional['OperatorBasis'] = None

    @property
    def dimension(self) -> int:
        return self.elements.shape[1]

    @property
    def size(self) -> int:
        return self.elements.shape[0]

    @property
    def dual(self) -> 'OperatorBasis':
        if self._dual is None:
            self._dual = dual_basis(self)
        return self._dual

    def coefficients(self, operator) -> np.ndarray:
        """Coefficients c_i with operator = sum_i c_i A_i, via c_i = tr(A^i^dagger B)"""
        operator = np.asarray(operator, dtype=complex)
        if operator.shape != (self.dimension, self.dimension):
            raise DimensionMismatchError(
                f"operator shape {operator.shape} does not match basis dimension {self.dimension}"
            )
        return np.einsum('iab,ab->i', self.dual.elements.conj(), operator)

    def combine(self, coefficients) -> np.ndarray:
        return np.einsum('i,iab->ab', np.asarray(coefficients, dtype=complex), self.elements)

    def same_as(self, other: 'OperatorBasis') -> bool:
        return (self.name == other.name
                and self.elements.shape == other.elements.shape
                and np.allclose(self.elements, other.elements))

    def __repr__(self) -> str:
        return f"OperatorBasis({self.name}, d={self.dimension})"


def parse_labels(labels: LabelLike) -> Tuple[str, ...]:
    """Split 'HD' or ('H', 'D') into a tuple of single-qubit labels"""
    parsed = tuple(labels)
    if not parsed:
        raise ValidationError("empty polarization label")
    for label in parsed:
        if label not in POLARIZATION_VECTORS:
            raise ValidationError(f"unknown polarization label {label!r}")
    return parsed


def polarization_ket(labels: LabelLike) -> Ket:
    """
    Product ket of single-photon polarization states

    Args:
        labels: One label per qubit from {H, V, D, A, R, L}, control first

    Returns:
        Normalized Ket in the H/V product basis
    """
    parsed = parse_labels(labels)
    kets = [Ket(POLARIZATION_VECTORS[label], (label,)) for label in parsed]
    return reduce(Ket.tensor, kets)


def cphase_unitary() -> GateUnitary:
    """diag(1, -1, 1, 1) in (HH, HV, VH, VV): only control H with target V picks up pi"""
    return GateUnitary(np.diag([1, -1, 1, 1]).astype(complex), "CPHASE")


def cnot_convention() -> CnotConvention:
    return CnotConvention()


def cnot_equivalent_unitary() -> Tuple[GateUnitary, CnotConvention]:
    """
    (I x W) CPHASE (I x W)^dagger with W the H->D, V->A rotation

    Returns:
        The CNOT-equivalent unitary in the H/V basis and its convention
    """
    convention = CnotConvention()
    rotation = np.kron(np.eye(2), convention.target_rotation)
    entries = rotation @ cphase_unitary().entries @ rotation.conj().T
    return GateUnitary(entries, "CNOT"), convention


def target_rotation() -> np.ndarray:
    """Single-qubit unitary mapping |D> -> |V> and |A> -> |H>"""
    return np.array([[1, -1], [1, 1]], dtype=complex) * SQRT_HALF


def analysis_basis(token: str) -> Tuple[np.ndarray, np.ndarray]:
    """
    Kets of the '+' and '-' outcomes of an analysis setting

    Args:
        token: 'HV', 'DA', 'RL' or 'b<theta>' with theta in radians.
            For b<theta>, '+' is (|H> + e^{i theta}|V>)/sqrt2.

    Returns:
        Tuple (plus, minus) of 2-vectors
    """
    if token == 'HV':
        return POLARIZATION_VECTORS['H'], POLARIZATION_VECTORS['V']
    if token == 'DA':
        return POLARIZATION_VECTORS['D'], POLARIZATION_VECTORS['A']
    if token == 'RL':
        return POLARIZATION_VECTORS['R'], POLARIZATION_VECTORS['L']
    if token.startswith('b'):
        try:
            theta = float(token[1:])
        except ValueError:
            raise ValidationError(f"bad parity setting token {token!r}")
        phase = np.exp(1j * theta)
        plus = np.array([SQRT_HALF, SQRT_HALF * phase], dtype=complex)
        minus = np.array([SQRT_HALF, -SQRT_HALF * phase], dtype=complex)
        return plus, minus
    raise ValidationError(f"unknown analysis setting {token!r}")


def pauli_product_basis(n_qubits: int, normalized: bool = False) -> OperatorBasis:
    """
    All n-fold tensor products of (I, X, Y, Z), leftmost factor slowest

    B_1 = I x I, B_2 = I x X, ..., B_16 = Z x Z for two qubits.

    Args:
        n_qubits: Number of qubits
        normalized: Divide by sqrt(2^n) so that the basis is orthonormal
    """
    if n_qubits < 1:
        raise ValidationError("need at least one qubit")
    elements = [reduce(np.kron, [PAULI_MATRICES[i] for i in index])
                for index in itertools.product(range(4), repeat=n_qubits)]
    elements = np.array(elements)
    name = f"pauli{n_qubits}"
    if normalized:
        elements = elements / np.sqrt(2 ** n_qubits)
        name += "-normalized"
    return OperatorBasis(elements, name)


def dual_basis(basis: OperatorBasis) -> OperatorBasis:
    """
    Dual basis A^j = sum_i A_i h_ij with h the inverse metric, so tr(A_i^dagger A^j) = delta_ij

    Raises:
        SingularMetricError: if the metric condition number reaches 1e12
    """
    condition = np.linalg.cond(basis.metric)
    if not np.isfinite(condition) or condition >= METRIC_CONDITION_LIMIT:
        raise SingularMetricError(
            f"metric of basis '{basis.name}' is singular (condition number {condition:.3g})"
        )
    inverse = np.linalg.inv(basis.metric)
    elements = np.einsum('iab,ij->jab', basis.elements, inverse)
    dual = OperatorBasis(elements, basis.name + "*")
    dual._dual = basis
    return dual


def cphase_projector_basis() -> OperatorBasis:
    """The 16 operators |u_i><u_j| on the CPHASE eigenbasis, index 4*i + j"""
    eye = np.eye(4, dtype=complex)
    elements = [np.outer(eye[i], eye[j]) for i in range(4) for j in range(4)]
    return OperatorBasis(np.array(elements), "cphase-projector")


def gate_adapted_basis(unitary: GateUnitary) -> OperatorBasis:
    """A_i = U B_i with unnormalized Pauli products; the ideal gate has chi = delta_11 here"""
    n_qubits = int(round(np.log2(unitary.dimension)))
    if 2 ** n_qubits != unitary.dimension:
        raise DimensionMismatchError(f"dimension {unitary.dimension} is not a qubit register")
    paulis = pauli_product_basis(n_qubits).elements
    elements = np.einsum('ab,ibc->iac', unitary.entries, paulis)
    return OperatorBasis(elements, f"adapted-{unitary.name}")


def state_fidelity(rho: DensityMatrix, target: Ket, postselect: bool = True) -> float:
    """
    <psi|rho|psi> with psi normalized

    Args:
        rho: State, possibly with trace below one
        target: Ideal state
        postselect: Divide by tr(rho) first
    """
    if rho.dimension != target.dimension:
        raise DimensionMismatchError(f"rho has d={rho.dimension}, target d={target.dimension}")
    psi = target.normalized().amplitudes
    overlap = float(np.vdot(psi, rho.entries @ psi).real)
    if postselect:
        trace = rho.trace
        if trace <= 0:
            raise ZeroTraceError("state has zero trace")
        overlap /= trace
    return overlap


def haar_random_ket(dimension: int, rng: np.random.Generator) -> Ket:
    """Haar-distributed normalized ket from normal complex Gaussian amplitudes"""
    z = rng.standard_normal(dimension) + 1j * rng.standard_normal(dimension)
    return Ket(z / np.linalg.norm(z))
