"""
Phenomenological model of the photon-photon CPHASE gate
Four CPHASE-basis efficiencies and two phase-noise visibilities determine the
reduced process matrix xi, the postselected fidelities and the truth tables.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import least_squares

from counts import CountsTable
from errors import (FitConvergenceError, InconsistentParamsError, ModelConsistencyError,
                    ValidationError, ZeroTraceError)
from quantum_core import (cnot_convention, cphase_projector_basis, cphase_unitary,
                          polarization_ket, target_rotation)
from tomography import ProcessMatrix, change_chi_basis, harmonic_mean_efficiency, process_fidelity

logger = logging.getLogger(__name__)

# Signs of the ideal CPHASE on (HH, HV, VH, VV)
CPHASE_SIGNS = np.array([1.0, -1.0, 1.0, 1.0])
XI_IDEAL = np.outer(CPHASE_SIGNS, CPHASE_SIGNS)
CONSISTENCY_TOLERANCE = 1e-9

PHASE_LAWS = ('gaussian', 'two_point')


@dataclass
class PhysicalEfficiencies:
    """
    Decomposition of the gate efficiencies into physical processes

    Attributes:
        eta_sr: Storage-plus-retrieval efficiency of the control
        eta_f: Transmission of the control through the delay fiber
        reflectivity: |R|^2 of a target with no stored control (EIT)
        blockaded_product: eta_sr,t |R_b|^2, measured as one number
        eta_sr_t: Control efficiency after a target reflection; None means eta_sr
    """
    eta_sr: float
    eta_f: float
    reflectivity: float
    blockaded_product: float
    eta_sr_t: Optional[float] = None

    def __post_init__(self):
        for name in ('eta_sr', 'eta_f', 'reflectivity', 'blockaded_product'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {value}")
        if self.eta_sr_t is None:
            self.eta_sr_t = self.eta_sr
        if self.eta_sr_t <= 0:
            raise ValidationError("eta_sr,t must be positive")

    @property
    def blockaded_reflectivity(self) -> float:
        return self.blockaded_product / self.eta_sr_t

    @property
    def reflection(self) -> float:
        """Real, positive amplitude R of the EIT reflection"""
        return math.sqrt(self.reflectivity)

    @property
    def blockaded_reflection(self) -> float:
        """Real, negative amplitude R_b of the blockaded reflection"""
        return -math.sqrt(self.blockaded_reflectivity)

    def gate_efficiencies(self) -> Tuple[float, float, float, float]:
        return (self.eta_sr, self.blockaded_product, self.eta_f, self.eta_f * self.reflectivity)


@dataclass
class GateParams:
    """CPHASE-basis efficiencies eta_1..eta_4 (HH, HV, VH, VV) and visibilities"""
    etas: Tuple[float, float, float, float]
    visibility_control: float
    visibility_target: float
    physical: Optional[PhysicalEfficiencies] = None

    def __post_init__(self):
        self.etas = tuple(float(eta) for eta in self.etas)
        if len(self.etas) != 4:
            raise ValidationError("need four CPHASE-basis efficiencies")
        if any(not 0.0 <= eta <= 1.0 for eta in self.etas):
            raise ValidationError(f"efficiencies must lie in [0, 1], got {self.etas}")
        for name in ('visibility_control', 'visibility_target'):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1]")
        if self.physical is not None:
            expected = self.physical.gate_efficiencies()
            if not np.allclose(self.etas, expected, rtol=0, atol=CONSISTENCY_TOLERANCE):
                raise InconsistentParamsError(
                    f"efficiencies {self.etas} do not match the physical decomposition {expected}"
                )

    @classmethod
    def from_physical(cls, physical: PhysicalEfficiencies, visibility_control: float,
                      visibility_target: float) -> 'GateParams':
        return cls(physical.gate_efficiencies(), visibility_control, visibility_target, physical)

    @property
    def eta_bar(self) -> float:
        return float(np.mean(self.etas))

    def photon_amplitudes(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Factor the shot map into a control amplitude and a target amplitude per branch

        Returns:
            (c, t) with c[j] the control amplitude for branch j in (H, V) and
            t[j, k] the target amplitude for target polarization k given branch j
        """
        eta1, eta2, eta3, eta4 = self.etas
        if eta1 <= 0 or eta3 <= 0:
            raise ValidationError("per-photon factorization needs eta_1 > 0 and eta_3 > 0")
        control = np.array([math.sqrt(eta1), math.sqrt(eta3)])
        targets = np.array([[1.0, -math.sqrt(eta2 / eta1)],
                            [1.0, math.sqrt(eta4 / eta3)]])
        if np.any(np.abs(targets) > 1.0 + 1e-12):
            raise ValidationError(
                "efficiencies do not factor into per-photon amplitudes below one "
                f"(eta2/eta1 = {eta2 / eta1:.3g}, eta4/eta3 = {eta4 / eta3:.3g})"
            )
        return control, targets

    def to_dict(self) -> Dict:
        return {
            'etas': list(self.etas),
            'eta_bar': self.eta_bar,
            'visibility_control': self.visibility_control,
            'visibility_target': self.visibility_target,
        }


class ReducedProcessMatrix:
    """4 x 4 xi with E(rho) = sum_ik xi_ik |u_i><u_i| rho |u_k><u_k|"""

    def __init__(self, entries, postselected: bool):
        entries = np.asarray(entries, dtype=complex)
        if entries.shape != (4, 4):
            raise ValidationError(f"xi must be 4 x 4, got {entries.shape}")
        self.entries = entries
        self.postselected = postselected

    def to_dict(self) -> Dict:
        return {
            'real': self.entries.real.tolist(),
            'imag': self.entries.imag.tolist(),
            'postselected': self.postselected,
        }


class TruthTable:
    """Postselected output probabilities for the four basis inputs"""

    def __init__(self, basis: str, labels: List[str], probabilities: np.ndarray,
                 efficiencies: Optional[np.ndarray], ideal: Dict[str, str]):
        self.basis = basis
        self.labels = labels
        self.probabilities = probabilities
        self.efficiencies = efficiencies
        self.ideal = ideal

    @property
    def fidelity(self) -> float:
        """Mean probability of the ideal output over the four inputs"""
        hits = [self.probabilities[i, self.labels.index(self.ideal[label])]
                for i, label in enumerate(self.labels)]
        return float(np.mean(hits))

    def to_dict(self) -> Dict:
        result = {
            'basis': self.basis,
            'labels': self.labels,
            'probabilities': self.probabilities.tolist(),
            'fidelity': self.fidelity,
        }
        if self.efficiencies is not None:
            result['efficiencies'] = self.efficiencies.tolist()
            if np.all(self.efficiencies > 0):
                result['harmonic_mean_efficiency'] = harmonic_mean_efficiency(self.efficiencies)
        return result


def visibility_matrix(visibility_control: float, visibility_target: float) -> np.ndarray:
    control = np.array([[1.0, visibility_control], [visibility_control, 1.0]])
    target = np.array([[1.0, visibility_target], [visibility_target, 1.0]])
    return np.kron(control, target)


def shot_map(params: GateParams, beta_c: float, beta_t: float) -> np.ndarray:
    """
    Single-shot diagonal map on (HH, HV, VH, VV)

    diag(sqrt(eta_1), -e^{i b_t} sqrt(eta_2), e^{i b_c} sqrt(eta_3), e^{i(b_c+b_t)} sqrt(eta_4))
    """
    roots = np.sqrt(params.etas)
    return np.diag([
        roots[0],
        -np.exp(1j * beta_t) * roots[1],
        np.exp(1j * beta_c) * roots[2],
        np.exp(1j * (beta_c + beta_t)) * roots[3],
    ])


def xi_model(params: GateParams, postselect: bool = True) -> ReducedProcessMatrix:
    """
    xi_ik = (-1)^(d_i2 + d_k2) V_ik sqrt(eta_i eta_k), divided by eta_bar when postselected
    """
    roots = np.sqrt(params.etas)
    entries = XI_IDEAL * visibility_matrix(params.visibility_control, params.visibility_target)
    entries = entries * np.outer(roots, roots)
    if postselect:
        if params.eta_bar <= 0:
            raise ZeroTraceError("all efficiencies are zero")
        entries = entries / params.eta_bar
    return ReducedProcessMatrix(entries, postselected=postselect)


def chi_from_xi(xi: ReducedProcessMatrix) -> ProcessMatrix:
    """Embed xi into the 16 x 16 chi on the |u_i><u_j| basis: chi_(ii),(kk) = xi_ik"""
    entries = np.zeros((16, 16), dtype=complex)
    diagonal = [5 * i for i in range(4)]
    entries[np.ix_(diagonal, diagonal)] = xi.entries
    return ProcessMatrix(entries, cphase_projector_basis(), postselected=xi.postselected)


def xi_from_chi(chi: ProcessMatrix) -> Tuple[ReducedProcessMatrix, float]:
    """
    Extract xi from a chi in any basis

    Returns:
        (xi, residual) with residual the Frobenius norm of the 240 neglected
        entries relative to that of the whole chi
    """
    projector = cphase_projector_basis()
    if not chi.basis.same_as(projector):
        chi = change_chi_basis(chi, projector)
    diagonal = [5 * i for i in range(4)]
    xi = chi.entries[np.ix_(diagonal, diagonal)]
    neglected = chi.entries.copy()
    neglected[np.ix_(diagonal, diagonal)] = 0.0
    total = np.linalg.norm(chi.entries)
    residual = float(np.linalg.norm(neglected) / total) if total > 0 else 0.0
    return ReducedProcessMatrix(xi, chi.postselected), residual


def bell_state():
    """CPHASE |DD>, the Bell state produced by the ideal gate"""
    amplitudes = cphase_unitary().entries @ polarization_ket('DD').amplitudes
    return amplitudes


def fidelities_from_xi(xi: ReducedProcessMatrix) -> Dict[str, float]:
    """
    Process and Bell-state fidelity of a postselected xi

    Both equal (1/16) tr(xi_id xi); the Bell fidelity is evaluated independently
    by sending |DD> through the channel and the process fidelity through the
    gate-adapted basis.

    Raises:
        ModelConsistencyError: if the three evaluations disagree
    """
    if not xi.postselected:
        raise ValidationError("fidelities need a postselected xi")
    closed_form = float(np.trace(XI_IDEAL @ xi.entries).real) / 16.0
    chi = chi_from_xi(xi)
    output = chi.apply(polarization_ket('DD').density())
    psi = bell_state()
    bell = float(np.vdot(psi, output @ psi).real)
    process = process_fidelity(chi, cphase_unitary())
    if abs(bell - closed_form) > CONSISTENCY_TOLERANCE or abs(process - closed_form) > CONSISTENCY_TOLERANCE:
        raise ModelConsistencyError(
            f"fidelity mismatch: closed form {closed_form}, Bell {bell}, process {process}"
        )
    return {'process_fidelity': process, 'bell_fidelity': bell}


def fit_visibilities(xi: ReducedProcessMatrix, etas: Sequence[float]) -> Dict[str, float]:
    """
    Least-squares V_c, V_t of the model xi to a measured postselected xi

    Returns:
        Dict with visibility_control, visibility_target and their standard errors
    """
    etas = tuple(etas)
    measured = xi.entries.real.ravel()

    def residuals(v: np.ndarray) -> np.ndarray:
        model = xi_model(GateParams(etas, float(v[0]), float(v[1])), postselect=xi.postselected)
        return model.entries.real.ravel() - measured

    result = least_squares(residuals, x0=[0.9, 0.9], bounds=([0.0, 0.0], [1.0, 1.0]),
                           xtol=1e-14, ftol=1e-14, gtol=1e-14)
    if result.status <= 0:
        raise FitConvergenceError(f"visibility fit failed: {result.message}")
    dof = measured.size - 2
    variance = 2.0 * result.cost / dof
    try:
        covariance = np.linalg.inv(result.jac.T @ result.jac) * variance
        errors = np.sqrt(np.clip(np.diag(covariance), 0.0, None))
    except np.linalg.LinAlgError:
        errors = np.full(2, np.nan)
    return {
        'visibility_control': float(result.x[0]),
        'visibility_target': float(result.x[1]),
        'visibility_control_err': float(errors[0]),
        'visibility_target_err': float(errors[1]),
        'cost': float(result.cost),
    }


def sample_phases(visibility: float, size: int, rng: np.random.Generator,
                  law: str = 'gaussian') -> np.ndarray:
    """
    Random shot phases with E[exp(i beta)] = visibility

    Args:
        law: 'gaussian' (sigma = sqrt(-2 ln V)) or 'two_point' (+-arccos V)
    """
    if not 0.0 <= visibility <= 1.0:
        raise ValidationError(f"visibility must lie in [0, 1], got {visibility}")
    if law == 'gaussian':
        if visibility >= 1.0:
            return np.zeros(size)
        if visibility <= 0.0:
            return rng.uniform(-math.pi, math.pi, size)
        return rng.normal(0.0, math.sqrt(-2.0 * math.log(visibility)), size)
    if law == 'two_point':
        return rng.choice([-1.0, 1.0], size) * math.acos(visibility)
    raise ValidationError(f"unknown phase law {law!r}; use one of {PHASE_LAWS}")


def xi_monte_carlo(params: GateParams, samples: int, rng: np.random.Generator,
                   law: str = 'gaussian', postselect: bool = True) -> ReducedProcessMatrix:
    """Average of the per-shot channels over random phases"""
    beta_c = sample_phases(params.visibility_control, samples, rng, law)
    beta_t = sample_phases(params.visibility_target, samples, rng, law)
    roots = np.sqrt(params.etas)
    k = np.stack([
        np.full(samples, roots[0], dtype=complex),
        -np.exp(1j * beta_t) * roots[1],
        np.exp(1j * beta_c) * roots[2],
        np.exp(1j * (beta_c + beta_t)) * roots[3],
    ], axis=1)
    entries = np.einsum('si,sk->ik', k, k.conj()) / samples
    if postselect:
        entries = entries / params.eta_bar
    return ReducedProcessMatrix(entries, postselected=postselect)


def model_channel(params: GateParams) -> ProcessMatrix:
    """Non-postselected phase-averaged channel as a chi on the projector basis"""
    return chi_from_xi(xi_model(params, postselect=False))


def dd_output_prediction(params: GateParams) -> Dict[str, float]:
    """
    |DD> through the averaged gate, then the D->V, A->H target rotation

    Returns:
        efficiency, postselected populations p_H (|HH>), p_V (|VV>) and coherence
        2 Re <HH|rho|VV>
    """
    rho = model_channel(params).apply(polarization_ket('DD').density())
    rotation = np.kron(np.eye(2), target_rotation())
    rho = rotation @ rho @ rotation.conj().T
    efficiency = float(np.trace(rho).real)
    if efficiency <= 0:
        raise ZeroTraceError("no |DD> output survives")
    return {
        'efficiency': efficiency,
        'p_H': float(rho[0, 0].real) / efficiency,
        'p_V': float(rho[3, 3].real) / efficiency,
        'coherence': 2.0 * float(rho[0, 3].real) / efficiency,
    }


def _truth_table_labels(basis: str) -> Tuple[List[str], Dict[str, str]]:
    if basis == 'cphase':
        labels = ['HH', 'HV', 'VH', 'VV']
        return labels, {label: label for label in labels}
    if basis == 'cnot':
        convention = cnot_convention()
        labels = [c + t for c in convention.control_basis for t in convention.target_basis]
        return labels, {label: ''.join(convention.ideal_output(label[0], label[1])) for label in labels}
    raise ValidationError(f"unknown truth-table basis {basis!r}; use 'cphase' or 'cnot'")


ChannelLike = Union[ProcessMatrix, GateParams, Sequence[np.ndarray]]


def _apply_channel(channel: ChannelLike, rho: np.ndarray) -> np.ndarray:
    if isinstance(channel, ProcessMatrix):
        return channel.apply(rho)
    if isinstance(channel, GateParams):
        return model_channel(channel).apply(rho)
    maps = np.asarray(channel, dtype=complex)
    if maps.ndim != 3 or maps.shape[1:] != (4, 4):
        raise ValidationError("a shot-map ensemble must have shape (n, 4, 4)")
    return np.einsum('sab,bc,sdc->ad', maps, rho, maps.conj()) / maps.shape[0]


def truth_table(channel: ChannelLike, basis: str = 'cphase') -> TruthTable:
    """
    Output probabilities for the four inputs of the CPHASE or CNOT basis

    Args:
        channel: ProcessMatrix, GateParams (phase-averaged model) or an ensemble of shot maps
        basis: 'cphase' (H/V both) or 'cnot' (control H/V, target D/A)
    """
    labels, ideal = _truth_table_labels(basis)
    outputs = [polarization_ket(label).amplitudes for label in labels]
    probabilities = np.zeros((4, 4))
    efficiencies = np.zeros(4)
    for i, label in enumerate(labels):
        rho = _apply_channel(channel, polarization_ket(label).density().entries)
        weights = np.array([np.vdot(out, rho @ out).real for out in outputs])
        efficiencies[i] = float(np.trace(rho).real)
        if weights.sum() <= 0:
            raise ZeroTraceError(f"input {label} never survives")
        probabilities[i] = weights / weights.sum()
    return TruthTable(basis, labels, probabilities, efficiencies, ideal)


def truth_table_from_counts(counts: CountsTable, basis: str = 'cphase') -> TruthTable:
    """Truth table from counts of the matching truth-table plan"""
    labels, ideal = _truth_table_labels(basis)
    setting = 'HV,HV' if basis == 'cphase' else 'HV,DA'
    probabilities = np.zeros((4, 4))
    efficiencies = np.zeros(4)
    for i, label in enumerate(labels):
        outcomes = counts.outcomes(label, setting)
        total = sum(outcomes.values())
        if total == 0:
            raise ZeroTraceError(f"no events for input {label}")
        for j, output in enumerate(labels):
            symbols = ''.join('+' if c in 'HD' else '-' for c in output)
            probabilities[i, j] = outcomes.get(symbols, 0) / total
        invocations = counts.invocations_for(label, setting)
        efficiencies[i] = total / invocations if invocations else np.nan
    return TruthTable(basis, labels, probabilities, efficiencies, ideal)
