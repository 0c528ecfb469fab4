"""
State and process tomography for lossy, postselected gates
Reconstructs density matrices from Stokes counts, superoperators from
input/output pairs, the process matrix chi, the efficiency matrix Theta and
the postselected process fidelity.
"""

import itertools
import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg, stats

from counts import CountsTable, join_setting, split_setting
from errors import (AlreadyPostselectedError, BasisMismatchError, DimensionMismatchError,
                    EmptyCountsError, MissingSettingError, NonOrthonormalBasisError,
                    SingularInputError, ValidationError, ZeroEfficiencyError, ZeroTraceError)
from quantum_core import (DensityMatrix, GateUnitary, OperatorBasis, cphase_unitary,
                          gate_adapted_basis, parse_labels, pauli_product_basis,
                          polarization_ket)

logger = logging.getLogger(__name__)

TOMOGRAPHY_TOKENS = ('HV', 'DA', 'RL')
TOMOGRAPHY_INPUTS = ('H', 'V', 'D', 'R')

# Pauli index measured by each token, and the eigenvalue carried by its '+' outcome.
# R = (H - iV)/sqrt2 is the -1 eigenstate of Y in this convention.
TOKEN_PAULI: Dict[str, Tuple[int, int]] = {
    'HV': (3, +1),
    'DA': (1, +1),
    'RL': (2, -1),
}

INPUT_SPAN_LIMIT = 1e-12


class Calibration:
    """Absolute scale of the counts: how many events a lossless gate would give"""

    def __init__(self, detection_efficiency: float = 1.0,
                 mean_photon_numbers: Optional[Tuple[float, float]] = None):
        """
        Args:
            detection_efficiency: Probability eta_d that a photon leaving the gate is detected
            mean_photon_numbers: (n_control, n_target) for Poissonian sources,
                None for exactly one photon per mode
        """
        if not 0.0 < detection_efficiency <= 1.0:
            raise ValidationError(f"detection efficiency must lie in (0, 1], got {detection_efficiency}")
        self.detection_efficiency = detection_efficiency
        self.mean_photon_numbers = mean_photon_numbers

    def expected_events(self, invocations: int, n_qubits: int) -> float:
        """Postselected events expected from a lossless gate"""
        eta_d = self.detection_efficiency
        if self.mean_photon_numbers is None:
            return invocations * eta_d ** n_qubits
        n_targets = n_qubits - 1
        nu_c = eta_d * self.mean_photon_numbers[0]
        nu_t = eta_d * self.mean_photon_numbers[1]
        return invocations * stats.poisson.pmf(1, nu_c) * stats.poisson.pmf(n_targets, nu_t)

    def to_dict(self) -> Dict:
        return {
            'detection_efficiency': self.detection_efficiency,
            'mean_photon_numbers': list(self.mean_photon_numbers) if self.mean_photon_numbers else None,
        }


class SuperopMatrix:
    """M with E(D_j) = sum_i D_i M_ij in a stored basis"""

    def __init__(self, entries, basis: OperatorBasis):
        self.entries = np.asarray(entries, dtype=complex)
        self.basis = basis


class BetaTensor:
    """beta_ijkl = tr(D_i^dagger D_k D_j D_l^dagger) for an orthonormal basis"""

    def __init__(self, entries, basis: OperatorBasis):
        self.entries = np.asarray(entries, dtype=complex)
        self.basis = basis

    def as_matrix(self) -> np.ndarray:
        m = self.basis.size
        return self.entries.reshape(m * m, m * m)


class EfficiencyMatrix:
    """Hermitian Theta with eta(rho) = tr(Theta^dagger rho)"""

    def __init__(self, entries):
        entries = np.asarray(entries, dtype=complex)
        if not np.allclose(entries, entries.conj().T, atol=1e-8):
            raise ValidationError("efficiency matrix must be Hermitian")
        self.entries = 0.5 * (entries + entries.conj().T)

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]

    def efficiency(self, rho) -> float:
        rho = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
        return float(np.trace(self.entries.conj().T @ rho).real)

    def eigenvalues(self) -> np.ndarray:
        return linalg.eigvalsh(self.entries)


class ProcessMatrix:
    """
    chi with E(rho) = sum_ij chi_ij A_i rho A_j^dagger

    Attributes:
        entries: d^2 x d^2 complex matrix
        basis: The operator basis A_i
        postselected: True once divided by the average efficiency
    """

    def __init__(self, entries, basis: OperatorBasis, postselected: bool = False):
        entries = np.asarray(entries, dtype=complex)
        if entries.shape != (basis.size, basis.size):
            raise DimensionMismatchError(
                f"chi shape {entries.shape} does not match basis of size {basis.size}"
            )
        self.entries = entries
        self.basis = basis
        self.postselected = postselected

    @property
    def dimension(self) -> int:
        return self.basis.dimension

    def apply(self, rho) -> np.ndarray:
        rho = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
        a = self.basis.elements
        return np.einsum('ij,iab,bc,jdc->ad', self.entries, a, rho, a.conj(), optimize=True)

    def check_invariants(self, tol: float = 1e-6) -> List[str]:
        """Report (not repair) violations of Hermiticity, positivity and the trace bound"""
        problems = []
        if not np.allclose(self.entries, self.entries.conj().T, atol=tol):
            problems.append("chi not Hermitian")
        hermitian = 0.5 * (self.entries + self.entries.conj().T)
        lowest = linalg.eigvalsh(hermitian).min()
        if lowest < -tol:
            problems.append(f"chi has negative eigenvalue {lowest:.3g}")
        eta_bar = average_efficiency(efficiency_matrix_from_chi(self, hermitize=True))
        if self.postselected and abs(eta_bar - 1.0) > tol:
            problems.append(f"postselected chi has average efficiency {eta_bar:.6g}")
        if eta_bar > 1.0 + tol:
            problems.append(f"average efficiency {eta_bar:.6g} above one")
        for problem in problems:
            logger.warning("Process matrix (%s): %s", self.basis.name, problem)
        return problems


class ProcessTomographyResult:
    """Everything process_tomography reconstructs from one counts table"""

    def __init__(self, chi: ProcessMatrix, chi_postselected: ProcessMatrix,
                 theta: EfficiencyMatrix, eta_bar: float, eta_bar_from_trace: float,
                 fidelity_postselected: float, unitary: GateUnitary):
        self.chi = chi
        self.chi_postselected = chi_postselected
        self.theta = theta
        self.eta_bar = eta_bar
        self.eta_bar_from_trace = eta_bar_from_trace
        self.fidelity_postselected = fidelity_postselected
        self.fidelity = eta_bar * fidelity_postselected
        self.unitary = unitary

    def to_dict(self) -> Dict:
        spectrum = efficiency_spectrum(self.theta)
        return {
            'gate': self.unitary.name,
            'process_fidelity_postselected': self.fidelity_postselected,
            'process_fidelity': self.fidelity,
            'process_fidelity_from_map': process_fidelity_from_map(self.chi_postselected.apply,
                                                                   self.unitary),
            'average_gate_fidelity_postselected': average_gate_fidelity(
                self.fidelity_postselected, self.unitary.dimension),
            'average_efficiency': self.eta_bar,
            'average_efficiency_from_trace': self.eta_bar_from_trace,
            'efficiency_min': spectrum['min'],
            'efficiency_max': spectrum['max'],
            'chi_postselected_real': self.chi_postselected.entries.real.tolist(),
            'chi_postselected_imag': self.chi_postselected.entries.imag.tolist(),
        }


def tomography_settings(n_qubits: int) -> List[str]:
    """The 3^n setting labels of a full Stokes measurement"""
    return [join_setting(tokens) for tokens in itertools.product(TOMOGRAPHY_TOKENS, repeat=n_qubits)]


def tomography_inputs(n_qubits: int = 2) -> List[str]:
    """The 4^n product inputs from {H, V, D, R} that span the operator space"""
    return [''.join(labels) for labels in itertools.product(TOMOGRAPHY_INPUTS, repeat=n_qubits)]


def project_to_psd(matrix, trace: Optional[float] = None) -> np.ndarray:
    """
    Frobenius-nearest positive semidefinite matrix with a given trace

    Eigenvalues are projected onto the scaled simplex {w >= 0, sum w = trace}.

    Args:
        matrix: Square matrix, Hermitized first
        trace: Target trace, defaults to the real trace of the input
    """
    matrix = np.asarray(matrix, dtype=complex)
    hermitian = 0.5 * (matrix + matrix.conj().T)
    if trace is None:
        trace = float(np.trace(hermitian).real)
    if trace <= 0:
        return np.zeros_like(hermitian)
    values, vectors = linalg.eigh(hermitian)
    ordered = np.sort(values)[::-1]
    shifted = np.cumsum(ordered) - trace
    index = np.arange(1, values.size + 1)
    keep = ordered - shifted / index > 0
    rank = index[keep][-1]
    tau = shifted[keep][-1] / rank
    clipped = np.maximum(values - tau, 0.0)
    return (vectors * clipped) @ vectors.conj().T


def _single_input(counts: CountsTable, input_label: Optional[str]) -> str:
    inputs = counts.inputs()
    if input_label is not None:
        if input_label not in inputs:
            raise EmptyCountsError(f"no counts for input {input_label!r}")
        return input_label
    if len(inputs) != 1:
        raise ValidationError(f"expected counts for one input, got {len(inputs)}")
    return inputs[0]


def state_tomography(counts: CountsTable, calibration: Calibration,
                     input_label: Optional[str] = None) -> DensityMatrix:
    """
    Linear Stokes inversion followed by projection onto PSD matrices

    Each Pauli expectation pools every setting that measures it. The trace is
    the success probability: postselected events over the events a lossless
    gate would give.

    Args:
        counts: Counts of one input (or pass input_label)
        calibration: Detection efficiency and source statistics
        input_label: Input to reconstruct when counts hold several

    Returns:
        DensityMatrix with trace equal to the gate efficiency for this input

    Raises:
        MissingSettingError: if any of the 3^n settings is absent
    """
    label = _single_input(counts, input_label)
    n_qubits = len(parse_labels(label))
    settings = tomography_settings(n_qubits)
    missing = [s for s in settings if not counts.has_cell(label, s)]
    if missing:
        raise MissingSettingError(f"input {label!r} lacks settings {missing}")

    numerators = np.zeros(4 ** n_qubits)
    denominators = np.zeros(4 ** n_qubits)
    strings = list(itertools.product(range(4), repeat=n_qubits))
    for setting in settings:
        tokens = split_setting(setting)
        invocations = counts.invocations_for(label, setting)
        if invocations <= 0:
            raise ValidationError(f"cell ({label}, {setting}) has no recorded invocations")
        norm = calibration.expected_events(invocations, n_qubits)
        outcomes = counts.outcomes(label, setting)
        for index, pauli_string in enumerate(strings):
            if any(p != 0 and TOKEN_PAULI[token][0] != p for p, token in zip(pauli_string, tokens)):
                continue
            signed = 0
            for outcome, count in outcomes.items():
                sign = 1
                for p, token, symbol in zip(pauli_string, tokens, outcome):
                    if p == 0:
                        continue
                    value = TOKEN_PAULI[token][1]
                    sign *= value if symbol == '+' else -value
                signed += sign * count
            numerators[index] += signed
            denominators[index] += norm

    stokes = numerators / denominators
    paulis = pauli_product_basis(n_qubits).elements
    rho = np.einsum('i,iab->ab', stokes, paulis) / 2 ** n_qubits
    projected = project_to_psd(rho, float(np.trace(rho).real))
    logger.debug("State tomography of %s: trace %.4f", label, stokes[0])
    return DensityMatrix(projected)


def superop_from_pairs(pairs: Sequence[Tuple[np.ndarray, np.ndarray]],
                       basis: OperatorBasis) -> SuperopMatrix:
    """
    Solve E(D_j) = sum_i D_i M_ij from (input, output) density-matrix pairs

    Raises:
        SingularInputError: if the inputs do not span the operator space
    """
    if len(pairs) < basis.size:
        raise SingularInputError(f"need at least {basis.size} input states, got {len(pairs)}")
    inputs = np.array([basis.coefficients(np.asarray(rho_in)) for rho_in, _ in pairs]).T
    outputs = np.array([basis.coefficients(np.asarray(rho_out)) for _, rho_out in pairs]).T
    singular = linalg.svdvals(inputs)
    if singular.min() <= INPUT_SPAN_LIMIT * singular.max():
        raise SingularInputError("input states do not span the operator space")
    # outputs = M inputs, solved in the least-squares sense when over-complete
    solution, *_ = np.linalg.lstsq(inputs.T, outputs.T, rcond=None)
    return SuperopMatrix(solution.T, basis)


def beta_tensor(basis: OperatorBasis) -> BetaTensor:
    """Raises NonOrthonormalBasisError unless the basis is orthonormal"""
    if not basis.orthonormal:
        raise NonOrthonormalBasisError(f"beta tensor needs an orthonormal basis, got '{basis.name}'")
    d = basis.elements
    dc = d.conj()
    entries = np.einsum('iba,kbc,jce,lae->ijkl', dc, d, d, dc, optimize=True)
    return BetaTensor(entries, basis)


def chi_from_superop(superop: SuperopMatrix, beta: BetaTensor) -> ProcessMatrix:
    """chi_ij = sum_kl beta_ijkl M_kl; beta is its own inverse"""
    if not superop.basis.same_as(beta.basis):
        raise BasisMismatchError(
            f"superoperator basis '{superop.basis.name}' != beta basis '{beta.basis.name}'"
        )
    entries = np.einsum('ijkl,kl->ij', beta.entries, superop.entries)
    return ProcessMatrix(entries, superop.basis)


def change_chi_basis(chi: ProcessMatrix, target: OperatorBasis) -> ProcessMatrix:
    """chi' = c chi c^dagger with c_ki = tr(B^k^dagger A_i)"""
    if target.dimension != chi.basis.dimension:
        raise DimensionMismatchError(
            f"cannot move chi from d={chi.basis.dimension} to d={target.dimension}"
        )
    c = np.einsum('kab,iab->ki', target.dual.elements.conj(), chi.basis.elements)
    return ProcessMatrix(c @ chi.entries @ c.conj().T, target, chi.postselected)


def efficiency_matrix_from_chi(chi: ProcessMatrix, hermitize: bool = True) -> EfficiencyMatrix:
    """Theta = sum_ij chi_ij A_j^dagger A_i, so that tr E(rho) = tr(Theta rho)"""
    a = chi.basis.elements
    theta = np.einsum('ij,jba,ibc->ac', chi.entries, a.conj(), a, optimize=True)
    if hermitize:
        theta = 0.5 * (theta + theta.conj().T)
    return EfficiencyMatrix(theta)


def efficiency_matrix_from_measurements(
        measurements: Sequence[Tuple[np.ndarray, float]]) -> EfficiencyMatrix:
    """
    Theta = sum_j A^j conj(eta(A_j)) from efficiencies measured on a spanning set

    Args:
        measurements: (input density matrix, measured efficiency) pairs, d^2 of them
    """
    operators = np.array([np.asarray(op, dtype=complex) for op, _ in measurements])
    etas = np.array([eta for _, eta in measurements], dtype=complex)
    basis = OperatorBasis(operators, "measured-inputs")
    theta = np.einsum('jab,j->ab', basis.dual.elements, etas.conj())
    return EfficiencyMatrix(theta)


def average_efficiency(theta: EfficiencyMatrix) -> float:
    """Average of eta over Haar-random pure inputs: tr(Theta)/d"""
    return float(np.trace(theta.entries).real) / theta.dimension


def harmonic_mean_efficiency(etas: Sequence[float]) -> float:
    """Efficiency of the four-input truth table, the harmonic mean of the etas"""
    etas = np.asarray(etas, dtype=float)
    if etas.size == 0 or np.any(etas <= 0):
        raise ZeroEfficiencyError("harmonic mean needs strictly positive efficiencies")
    return float(stats.hmean(etas))


def efficiency_spectrum(theta: EfficiencyMatrix) -> Dict[str, Optional[float]]:
    """Extremes and harmonic mean of the eigenvalues of Theta"""
    values = theta.eigenvalues()
    harmonic = float(stats.hmean(values)) if np.all(values > 0) else None
    return {
        'min': float(values.min()),
        'max': float(values.max()),
        'mean': float(values.mean()),
        'harmonic_mean': harmonic,
    }


def postselect_chi(chi: ProcessMatrix) -> Tuple[ProcessMatrix, float]:
    """
    Divide chi by the average efficiency

    Returns:
        (postselected chi, eta_bar)
    """
    if chi.postselected:
        raise AlreadyPostselectedError("chi is already postselected")
    eta_bar = average_efficiency(efficiency_matrix_from_chi(chi))
    if eta_bar <= 0:
        raise ZeroTraceError("average efficiency is zero")
    return ProcessMatrix(chi.entries / eta_bar, chi.basis, postselected=True), eta_bar


def process_fidelity(chi_postselected: ProcessMatrix, unitary: GateUnitary) -> float:
    """First diagonal element of chi in the basis A_i = U B_i"""
    if not chi_postselected.postselected:
        raise ValidationError("process fidelity needs a postselected chi")
    if chi_postselected.dimension != unitary.dimension:
        raise DimensionMismatchError(
            f"chi has d={chi_postselected.dimension}, unitary d={unitary.dimension}"
        )
    adapted = change_chi_basis(chi_postselected, gate_adapted_basis(unitary))
    return float(adapted.entries[0, 0].real)


def process_fidelity_from_map(channel: Callable[[np.ndarray], np.ndarray],
                              unitary: GateUnitary) -> float:
    """(1/d^2) sum_i tr([U D_i U^dagger]^dagger E(D_i)) over normalized Pauli products"""
    n_qubits = int(round(np.log2(unitary.dimension)))
    basis = pauli_product_basis(n_qubits, normalized=True)
    u = unitary.entries
    total = 0.0
    for element in basis.elements:
        ideal = u @ element @ u.conj().T
        total += np.trace(ideal.conj().T @ channel(element)).real
    return float(total) / unitary.dimension ** 2


def average_gate_fidelity(fidelity: float, dimension: int) -> float:
    """Haar-averaged state fidelity from the process fidelity"""
    return (dimension * fidelity + 1.0) / (dimension + 1.0)


def _input_density(label: str) -> np.ndarray:
    return polarization_ket(label).density().entries


def process_tomography(counts: CountsTable, calibration: Calibration,
                       unitary: Optional[GateUnitary] = None) -> ProcessTomographyResult:
    """
    Full pipeline: state tomography per input, superoperator, chi, Theta, fidelity

    Args:
        counts: Counts covering the 16 product inputs and 9 settings each
        calibration: Detection efficiency and source statistics
        unitary: Ideal gate, CPHASE by default
    """
    unitary = unitary or cphase_unitary()
    n_qubits = int(round(np.log2(unitary.dimension)))
    labels = tomography_inputs(n_qubits)
    absent = [label for label in labels if label not in counts.inputs()]
    if absent:
        raise MissingSettingError(f"process tomography lacks inputs {absent}")

    pairs = [(_input_density(label), state_tomography(counts, calibration, label).entries)
             for label in labels]
    basis = pauli_product_basis(n_qubits, normalized=True)
    chi = chi_from_superop(superop_from_pairs(pairs, basis), beta_tensor(basis))
    theta = efficiency_matrix_from_chi(chi)
    chi_ps, eta_bar = postselect_chi(chi)
    eta_bar_trace = float(np.trace(chi.entries).real) / unitary.dimension
    fidelity_ps = process_fidelity(chi_ps, unitary)
    logger.info("Process tomography: F_ps=%.4f, eta_bar=%.4f", fidelity_ps, eta_bar)
    return ProcessTomographyResult(chi, chi_ps, theta, eta_bar, eta_bar_trace, fidelity_ps, unitary)


def efficiency_tomography(counts: CountsTable, calibration: Calibration,
                          n_qubits: int = 2) -> EfficiencyMatrix:
    """Theta from the efficiencies measured on the 4^n product inputs"""
    measurements = []
    for label in tomography_inputs(n_qubits):
        rho_out = state_tomography(counts, calibration, label)
        measurements.append((_input_density(label), rho_out.trace))
    return efficiency_matrix_from_measurements(measurements)


def resample_counts(counts: CountsTable, rng: np.random.Generator) -> CountsTable:
    """Multinomial resample of every cell over its outcomes plus 'no event'"""
    resampled = CountsTable(counts.metadata)
    for input_label, setting in counts.cells():
        outcomes = counts.outcomes(input_label, setting)
        names = sorted(outcomes)
        observed = np.array([outcomes[name] for name in names], dtype=float)
        invocations = counts.invocations_for(input_label, setting)
        trials = invocations if invocations > 0 else int(observed.sum())
        resampled.add_invocations(input_label, setting, invocations)
        if trials == 0 or not names:
            continue
        probabilities = np.append(observed / trials, max(0.0, 1.0 - observed.sum() / trials))
        drawn = rng.multinomial(trials, probabilities / probabilities.sum())
        for name, count in zip(names, drawn[:-1]):
            resampled.add(input_label, setting, name, int(count))
    return resampled


def bootstrap_standard_errors(counts: CountsTable,
                              statistic: Callable[[CountsTable], Union[float, Dict[str, float]]],
                              n_resamples: int = 200,
                              rng: Optional[np.random.Generator] = None) -> Dict[str, float]:
    """
    Standard deviation of a statistic over multinomial resamples of the counts

    Args:
        counts: Observed table
        statistic: Function of a table returning a float or a dict of floats
        n_resamples: Number of resamples
        rng: Random generator, seeded by the caller for reproducible errors
    """
    if n_resamples < 2:
        raise ValidationError("bootstrap needs at least two resamples")
    rng = rng or np.random.default_rng()
    samples: Dict[str, List[float]] = {}
    for _ in range(n_resamples):
        value = statistic(resample_counts(counts, rng))
        if not isinstance(value, dict):
            value = {'value': value}
        for key, item in value.items():
            samples.setdefault(key, []).append(float(item))
    return {key: float(np.std(values, ddof=1)) for key, values in samples.items()}
