"""
Multi-target GHZ states from the cascaded CNOT
Parity analysis of measured counts, the closed-form phase-noise model, a Monte
Carlo check of that model, and the Poissonian coincidence-rate model.
"""

import csv
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats
from scipy.optimize import curve_fit

from counts import CountsTable, outcome_parity, split_setting
from errors import (ConfigError, EmptyCountsError, ValidationError, WrongSettingsError,
                    ZeroTraceError)
from gate_model import PhysicalEfficiencies, sample_phases
from quantum_core import target_rotation

logger = logging.getLogger(__name__)

THETA_MATCH_TOLERANCE = 1e-9
MONTE_CARLO_CHUNK = 20000


@dataclass
class ParityDataset:
    """Parity expectations S_theta for an N-photon state"""
    n_photons: int
    thetas: np.ndarray
    values: np.ndarray
    errors: np.ndarray

    def __post_init__(self):
        self.thetas = np.asarray(self.thetas, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.errors = np.asarray(self.errors, dtype=float)
        if not (self.thetas.shape == self.values.shape == self.errors.shape):
            raise ValidationError("thetas, values and errors must have equal length")
        if self.n_photons < 2:
            raise ValidationError("a GHZ state needs at least two photons")
        if np.any(np.abs(self.values) > 1.0 + 1e-12):
            raise ValidationError("parity expectations must lie in [-1, 1]")


@dataclass
class GhzSummary:
    """Population, coherence and fidelity of an N-photon GHZ state"""
    n_photons: int
    p_h: float
    p_v: float
    coherence: float
    errors: Dict[str, float] = field(default_factory=dict)

    @property
    def population(self) -> float:
        return self.p_h + self.p_v

    @property
    def fidelity(self) -> float:
        return 0.5 * (self.population + self.coherence)

    @property
    def genuine_entanglement(self) -> bool:
        """F > 1/2 witnesses genuine N-partite entanglement"""
        return self.fidelity > 0.5

    def to_dict(self) -> Dict:
        result = {
            'n_photons': self.n_photons,
            'p_H': self.p_h,
            'p_V': self.p_v,
            'population': self.population,
            'coherence': self.coherence,
            'fidelity': self.fidelity,
            'genuine_entanglement': self.genuine_entanglement,
            'errors': dict(self.errors),
        }
        if self.errors.get('fidelity'):
            result['p_value'] = witness_p_value(self.fidelity, self.errors['fidelity'])
        return result


@dataclass
class RateParams:
    """Source and detection parameters of the coincidence-rate model"""
    repetition_rate: float
    detection_efficiency: float
    mean_control: float
    mean_target: float

    def __post_init__(self):
        if self.repetition_rate <= 0:
            raise ValidationError("repetition rate must be positive")
        if not 0.0 < self.detection_efficiency <= 1.0:
            raise ValidationError("detection efficiency must lie in (0, 1]")
        if self.mean_control < 0 or self.mean_target < 0:
            raise ValidationError("mean detected photon numbers must be non-negative")

    @classmethod
    def from_parts(cls, repetition_rate: float, detection_efficiency: float,
                   physical: PhysicalEfficiencies, mean_photons_control: float,
                   mean_photons_target: float) -> 'RateParams':
        """nu = eta_d * eta * n_bar with eta_c = (eta_sr + eta_f)/2, eta_t = (2 + |R|^2 + |R_b|^2)/4"""
        eta_c = 0.5 * (physical.eta_sr + physical.eta_f)
        eta_t = 0.25 * (2.0 + physical.reflectivity + physical.blockaded_reflectivity)
        return cls(repetition_rate, detection_efficiency,
                   detection_efficiency * eta_c * mean_photons_control,
                   detection_efficiency * eta_t * mean_photons_target)


def stokes_from_counts(outcomes: Dict[str, int]) -> Tuple[float, float]:
    """
    Parity expectation of one setting

    Returns:
        (S, standard error) with S = sum parity * count / total
    """
    total = sum(outcomes.values())
    if total == 0:
        raise EmptyCountsError("no events for this setting")
    value = sum(outcome_parity(outcome) * count for outcome, count in outcomes.items()) / total
    error = math.sqrt(max(0.0, 1.0 - value ** 2) / total)
    return float(value), error


def coherence_from_parities(dataset: ParityDataset) -> Tuple[float, float]:
    """
    C_N = (1/N) sum_k (-1)^k S_{k pi / N} over the N settings k = 0..N-1

    Raises:
        WrongSettingsError: if any k pi / N setting is missing
    """
    n = dataset.n_photons
    values, variances = [], []
    for k in range(n):
        theta = k * math.pi / n
        matches = np.flatnonzero(np.abs(dataset.thetas - theta) <= THETA_MATCH_TOLERANCE)
        if matches.size == 0:
            raise WrongSettingsError(f"missing parity setting theta = {k} pi / {n}")
        index = matches[0]
        values.append((-1) ** k * dataset.values[index])
        variances.append(dataset.errors[index] ** 2)
    return float(np.mean(values)), float(math.sqrt(sum(variances)) / n)


def fit_parity(dataset: ParityDataset) -> Tuple[float, float]:
    """Weighted fit S = p cos(N theta); the fitted p is projected onto [0, 1]"""
    if dataset.thetas.size < 2:
        raise WrongSettingsError("parity fit needs at least two settings")
    n = dataset.n_photons

    def model(theta, amplitude):
        return amplitude * np.cos(n * theta)

    sigma = dataset.errors if np.all(dataset.errors > 0) else None
    popt, pcov = curve_fit(model, dataset.thetas, dataset.values, p0=[0.5], sigma=sigma,
                           absolute_sigma=sigma is not None)
    amplitude = float(np.clip(popt[0], 0.0, 1.0))
    error = float(math.sqrt(pcov[0, 0])) if np.isfinite(pcov[0, 0]) else float('nan')
    return amplitude, error


def ghz_fidelity(p_h: float, p_v: float, coherence: float, n_photons: int,
                 errors: Optional[Dict[str, float]] = None) -> GhzSummary:
    """F_N = (P_N + C_N) / 2 with Gaussian error propagation when errors are given"""
    errors = dict(errors or {})
    if errors:
        population_err = math.hypot(errors.get('p_H', 0.0), errors.get('p_V', 0.0))
        errors['population'] = population_err
        errors['fidelity'] = 0.5 * math.hypot(population_err, errors.get('coherence', 0.0))
    return GhzSummary(n_photons, p_h, p_v, coherence, errors)


def witness_p_value(fidelity: float, error: float) -> float:
    """Gaussian probability that the true fidelity lies below 1/2"""
    if error <= 0:
        raise ValidationError("p-value needs a positive standard error")
    return float(stats.norm.sf((fidelity - 0.5) / error))


def ghz_closed_forms(physical: PhysicalEfficiencies, visibility_control: float,
                     visibility_target: float, n_photons: int) -> Dict[str, float]:
    """
    Populations, coherence and efficiency of the phase-averaged GHZ state

    Targets reflect with R (no stored control) or R_b (stored control); every
    target carries an independent phase with E[exp(i beta_t)] = V_t.
    """
    if n_photons < 2:
        raise ValidationError("a GHZ state needs at least two photons")
    m = n_photons - 1
    r = complex(physical.reflection)
    r_b = complex(physical.blockaded_reflection)
    v_c, v_t = visibility_control, visibility_target
    eta_sr, eta_f = physical.eta_sr, physical.eta_f

    eta_n = (eta_sr / 2.0) * ((1.0 + abs(r_b) ** 2) / 2.0) ** m + \
        (eta_f / 2.0) * ((1.0 + abs(r) ** 2) / 2.0) ** m
    if eta_n <= 0:
        raise ZeroTraceError("GHZ efficiency vanishes")
    p_h = (eta_sr / 2.0) * ((1.0 + abs(r_b) ** 2 + 2.0 * v_t * (-r_b).real) / 4.0) ** m / eta_n
    p_v = (eta_f / 2.0) * ((1.0 + abs(r) ** 2 + 2.0 * v_t * r.real) / 4.0) ** m / eta_n
    cross = v_c * math.sqrt(eta_sr * eta_f) / 2.0 * \
        ((1.0 - r_b * r.conjugate() + v_t * (r.conjugate() - r_b)) / 4.0) ** m
    coherence = 2.0 * cross.real / eta_n
    return {
        'n_photons': n_photons,
        'efficiency': eta_n,
        'p_H': p_h,
        'p_V': p_v,
        'coherence': coherence,
        'fidelity': 0.5 * (p_h + p_v + coherence),
    }


def monte_carlo_ghz(physical: PhysicalEfficiencies, visibility_control: float,
                    visibility_target: float, n_photons: int, samples: int,
                    rng: np.random.Generator, law: str = 'gaussian',
                    shared_target_phase: bool = False) -> Dict[str, float]:
    """
    Sample the kept GHZ component shot by shot, rotate the targets and postselect

    Args:
        shared_target_phase: Use one beta_t for all targets of a shot instead of
            one per target; the closed forms assume independent phases

    Returns:
        Estimates of p_H, p_V, coherence and efficiency with standard errors
    """
    if n_photons < 2:
        raise ValidationError("a GHZ state needs at least two photons")
    m = n_photons - 1
    rotation = target_rotation()
    reflections = np.array([[1.0, physical.blockaded_reflection],
                            [1.0, physical.reflection]], dtype=complex)
    control = np.array([math.sqrt(physical.eta_sr), math.sqrt(physical.eta_f)]) / math.sqrt(2.0)

    sums = np.zeros(4)
    squares = np.zeros(4)
    done = 0
    while done < samples:
        size = min(MONTE_CARLO_CHUNK, samples - done)
        beta_c = sample_phases(visibility_control, size, rng, law)
        if shared_target_phase:
            beta_t = np.repeat(sample_phases(visibility_target, size, rng, law)[:, None], m, axis=1)
        else:
            beta_t = sample_phases(visibility_target, size * m, rng, law).reshape(size, m)

        branches = []
        for j in range(2):
            amplitude = control[j] * (np.exp(1j * beta_c) if j == 1 else np.ones(size))
            state = amplitude[:, None].astype(complex)
            for target in range(m):
                tau = np.stack([np.full(size, reflections[j, 0]),
                                np.exp(1j * beta_t[:, target]) * reflections[j, 1]], axis=1) / math.sqrt(2.0)
                tau = tau @ rotation.T
                state = (state[:, :, None] * tau[:, None, :]).reshape(size, -1)
            branches.append(state)
        psi = np.concatenate(branches, axis=1)

        first, last = psi[:, 0], psi[:, -1]
        columns = np.stack([np.abs(first) ** 2, np.abs(last) ** 2,
                            2.0 * (first * last.conj()).real,
                            np.sum(np.abs(psi) ** 2, axis=1)], axis=1)
        sums += columns.sum(axis=0)
        squares += (columns ** 2).sum(axis=0)
        done += size

    means = sums / samples
    spread = np.sqrt(np.maximum(squares / samples - means ** 2, 0.0) / samples)
    efficiency = means[3]
    if efficiency <= 0:
        raise ZeroTraceError("GHZ efficiency vanishes")
    return {
        'n_photons': n_photons,
        'efficiency': float(efficiency),
        'p_H': float(means[0] / efficiency),
        'p_V': float(means[1] / efficiency),
        'coherence': float(means[2] / efficiency),
        'p_H_err': float(spread[0] / efficiency),
        'p_V_err': float(spread[1] / efficiency),
        'coherence_err': float(spread[2] / efficiency),
    }


def _parity_theta(tokens: Sequence[str]) -> Optional[float]:
    stripped = [token.lstrip('~') for token in tokens]
    if not all(token.startswith('b') for token in stripped):
        return None
    thetas = {float(token[1:]) for token in stripped}
    if len(thetas) != 1:
        return None
    return thetas.pop()


def parity_dataset_from_counts(counts: CountsTable, n_photons: int,
                               input_label: Optional[str] = None) -> ParityDataset:
    """Collect S_theta from every all-photon b_theta setting of one input"""
    label = input_label or _ghz_input(counts, n_photons)
    thetas, values, errors = [], [], []
    for setting in counts.settings(label):
        tokens = split_setting(setting)
        theta = _parity_theta(tokens)
        if theta is None or len(tokens) != n_photons:
            continue
        outcomes = counts.outcomes(label, setting)
        if sum(outcomes.values()) == 0:
            logger.warning("No events for parity setting %s", setting)
            continue
        value, error = stokes_from_counts(outcomes)
        thetas.append(theta)
        values.append(value)
        errors.append(error)
    if not thetas:
        raise WrongSettingsError(f"no parity settings for input {label!r}")
    order = np.argsort(thetas)
    return ParityDataset(n_photons, np.array(thetas)[order], np.array(values)[order],
                         np.array(errors)[order])


def save_parity_csv(dataset: ParityDataset, path: str):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['theta_rad', 'S', 'S_err', 'N'])
        for theta, value, error in zip(dataset.thetas, dataset.values, dataset.errors):
            writer.writerow([repr(float(theta)), repr(float(value)), repr(float(error)), dataset.n_photons])


def load_parity_csv(path: str) -> ParityDataset:
    if not os.path.exists(path):
        raise ConfigError(f"parity file '{path}' not found")
    with open(path, 'r', newline='') as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise EmptyCountsError(f"parity file '{path}' has no rows")
    photon_numbers = {int(row['N']) for row in rows}
    if len(photon_numbers) != 1:
        raise ValidationError(f"parity file mixes photon numbers {sorted(photon_numbers)}")
    return ParityDataset(photon_numbers.pop(),
                         [float(row['theta_rad']) for row in rows],
                         [float(row['S']) for row in rows],
                         [float(row['S_err']) for row in rows])


def _ghz_input(counts: CountsTable, n_photons: int) -> str:
    candidates = [label for label in counts.inputs() if len(label) == n_photons]
    if len(candidates) != 1:
        raise ValidationError(f"expected one {n_photons}-photon input, found {candidates}")
    return candidates[0]


def ghz_summary_from_counts(counts: CountsTable, n_photons: int, method: Optional[str] = None,
                            input_label: Optional[str] = None) -> GhzSummary:
    """
    GHZ summary from a parity-plan counts table

    Args:
        method: 'alternating' (sum over k pi/N) or 'fit' (cosine fit);
            defaults to the fit from six photons on
    """
    label = input_label or _ghz_input(counts, n_photons)
    method = method or ('fit' if n_photons >= 6 else 'alternating')
    population_setting = None
    for setting in counts.settings(label):
        tokens = split_setting(setting)
        if len(tokens) == n_photons and all(token.lstrip('~') == 'HV' for token in tokens):
            population_setting = setting
    if population_setting is None:
        raise WrongSettingsError("no all-H/V population setting")
    outcomes = counts.outcomes(label, population_setting)
    total = sum(outcomes.values())
    if total == 0:
        raise EmptyCountsError("no events in the population setting")
    p_h = outcomes.get('+' * n_photons, 0) / total
    p_v = outcomes.get('-' * n_photons, 0) / total

    dataset = parity_dataset_from_counts(counts, n_photons, label)
    if method == 'alternating':
        coherence, coherence_err = coherence_from_parities(dataset)
    elif method == 'fit':
        coherence, coherence_err = fit_parity(dataset)
    else:
        raise ValidationError(f"unknown coherence method {method!r}")

    errors = {
        'p_H': math.sqrt(p_h * (1.0 - p_h) / total),
        'p_V': math.sqrt(p_v * (1.0 - p_v) / total),
        'coherence': coherence_err,
    }
    logger.info("GHZ N=%d: P=%.3f C=%.3f (%s)", n_photons, p_h + p_v, coherence, method)
    return ghz_fidelity(p_h, p_v, coherence, n_photons, errors)


def coincidence_rates(rates: RateParams, photon_numbers: Sequence[int]) -> Dict[int, float]:
    """
    Rate of detecting exactly one control and N-1 targets

    p_N = nu_c e^{-nu_c} nu_t^{N-1} e^{-nu_t} / (N-1)!
    """
    result = {}
    for n in photon_numbers:
        if n < 1:
            raise ValidationError("photon number must be at least one")
        probability = stats.poisson.pmf(1, rates.mean_control) * stats.poisson.pmf(n - 1, rates.mean_target)
        result[int(n)] = float(rates.repetition_rate * probability)
    return result


def two_photon_rate(repetition_rate: float, detection_efficiency: float, eta_bar: float,
                    mean_photon_product: float = 1.0) -> float:
    """Two-photon coincidence rate rate * eta_d^2 * eta_bar (per incoming pair unless n_c n_t given)"""
    return repetition_rate * detection_efficiency ** 2 * eta_bar * mean_photon_product


def average_repetition_rate(repetitions: int, cycle_time: float) -> float:
    """Gate invocations per second averaged over the sample-preparation cycle"""
    if cycle_time <= 0:
        raise ValidationError("cycle time must be positive")
    return repetitions / cycle_time


def coincidence_improvement_factor(rate_ratio: float, detection_ratio: float,
                                   efficiency_ratio: float) -> float:
    """Coincidence-rate gain from repetition rate, per-photon detection and gate efficiency"""
    return rate_ratio * detection_ratio ** 2 * efficiency_ratio
