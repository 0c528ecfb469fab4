"""
Monte Carlo generator of postselected counts
Samples photon numbers, shot phases, loss and detection for every cell of a
measurement plan and writes a CountsTable for the analysis modules.
"""

import csv
import functools
import logging
import math
import multiprocessing
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from counts import CountsTable, join_setting, split_setting
from errors import ConfigError, ValidationError
from gate_model import PHASE_LAWS, GateParams, sample_phases
from quantum_core import POLARIZATION_VECTORS, analysis_basis, target_rotation
from tomography import tomography_inputs, tomography_settings

logger = logging.getLogger(__name__)

SIMULATOR_VERSION = "1.0"
DEFAULT_PARTITION_SIZE = 50000

Plan = List[Tuple[str, str]]


class SourceMode(Enum):
    SINGLE = "single"
    POISSONIAN = "poissonian"


@dataclass
class SimConfig:
    """
    Everything a simulation run depends on

    Attributes:
        gate: Efficiencies and visibilities of the gate
        plan: (input labels, setting) cells, control first
        shots: Gate invocations per cell
        n_targets: Target photons per postselected event
        mode: Exactly one photon per mode, or Poissonian pulses
        mean_control: Mean incoming control photons n_c (Poissonian mode)
        mean_target: Mean incoming target photons n_t (Poissonian mode)
        detection_efficiency: eta_d per photon
        dark_count_probability: Mean dark clicks per detector window
        phase_law: 'gaussian' or 'two_point'
        seed: Entropy of the random streams
        workers: Worker processes; results do not depend on it
        partition_size: Shots per random stream
    """
    gate: GateParams
    plan: Plan
    shots: int
    n_targets: int = 1
    mode: SourceMode = SourceMode.SINGLE
    mean_control: float = 0.31
    mean_target: float = 0.41
    detection_efficiency: float = 1.0
    dark_count_probability: float = 0.0
    phase_law: str = 'gaussian'
    seed: int = 0
    workers: int = 1
    partition_size: int = DEFAULT_PARTITION_SIZE

    def __post_init__(self):
        if isinstance(self.mode, str):
            self.mode = SourceMode(self.mode)
        if self.shots < 1:
            raise ValidationError("shots must be at least 1")
        if self.n_targets < 1:
            raise ValidationError("need at least one target photon")
        if not self.plan:
            raise ValidationError("the measurement plan is empty")
        if not 0.0 < self.detection_efficiency <= 1.0:
            raise ValidationError("detection efficiency must lie in (0, 1]")
        if self.dark_count_probability < 0:
            raise ValidationError("dark-count probability must be non-negative")
        if self.mean_control < 0 or self.mean_target < 0:
            raise ValidationError("mean photon numbers must be non-negative")
        if self.phase_law not in PHASE_LAWS:
            raise ValidationError(f"unknown phase law {self.phase_law!r}")
        if self.workers < 1 or self.partition_size < 1:
            raise ValidationError("workers and partition size must be positive")
        self.plan = [(str(label), str(setting)) for label, setting in self.plan]
        for label, setting in self.plan:
            validate_cell(label, setting, self.n_targets)
        # fails early when the efficiencies do not factor per photon
        self.gate.photon_amplitudes()

    def to_dict(self) -> Dict:
        return {
            'gate': self.gate.to_dict(),
            'shots': self.shots,
            'n_targets': self.n_targets,
            'mode': self.mode.value,
            'mean_control': self.mean_control,
            'mean_target': self.mean_target,
            'detection_efficiency': self.detection_efficiency,
            'dark_count_probability': self.dark_count_probability,
            'phase_law': self.phase_law,
            'seed': self.seed,
            'partition_size': self.partition_size,
            'cells': len(self.plan),
        }


def validate_cell(input_label: str, setting: str, n_targets: int):
    tokens = split_setting(setting)
    if len(input_label) != n_targets + 1 or len(tokens) != n_targets + 1:
        raise ValidationError(
            f"cell ({input_label}, {setting}) does not describe {n_targets + 1} photons"
        )
    for symbol in input_label:
        if symbol not in POLARIZATION_VECTORS:
            raise ValidationError(f"unknown polarization {symbol!r} in {input_label!r}")
    if tokens[0].startswith('~'):
        raise ValidationError("the control photon is never rotated")
    for token in tokens:
        analysis_basis(token.lstrip('~'))


def tomography_plan() -> Plan:
    """16 product inputs from H, V, D, R times the 9 two-photon Stokes settings"""
    return [(label, setting) for label in tomography_inputs(2) for setting in tomography_settings(2)]


def parity_setting(theta: float, n_photons: int) -> str:
    token = f"b{theta:.12f}"
    return join_setting([token] + ['~' + token] * (n_photons - 1))


def parity_plan(n_photons: int, thetas: Optional[Sequence[float]] = None) -> Plan:
    """
    |D...D> measured in the parity bases b_theta plus one H/V population setting

    Targets are read after the D->V, A->H rotation. The default grid is
    k pi / (2N) for k = 0..2N-1.
    """
    if n_photons < 2:
        raise ValidationError("a parity plan needs at least two photons")
    if thetas is None:
        thetas = [k * math.pi / (2 * n_photons) for k in range(2 * n_photons)]
    input_label = 'D' * n_photons
    plan = [(input_label, parity_setting(theta, n_photons)) for theta in thetas]
    plan.append((input_label, join_setting(['HV'] + ['~HV'] * (n_photons - 1))))
    return plan


def truth_table_plan(basis: str = 'cphase') -> Plan:
    """The four basis inputs measured in the matching basis"""
    if basis == 'cphase':
        return [(c + t, 'HV,HV') for c in 'HV' for t in 'HV']
    if basis == 'cnot':
        return [(c + t, 'HV,DA') for c in 'HV' for t in 'DA']
    raise ValidationError(f"unknown truth-table basis {basis!r}; use 'cphase' or 'cnot'")


def save_plan(plan: Plan, path: str):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['input', 'setting'])
        writer.writerows(plan)
    logger.info("Saved plan: %s (%d cells)", path, len(plan))


def load_plan(path: str) -> Plan:
    if not os.path.exists(path):
        raise ConfigError(f"plan file '{path}' not found")
    with open(path, 'r', newline='') as f:
        plan = [(row['input'], row['setting']) for row in csv.DictReader(f)]
    if not plan:
        raise ConfigError(f"plan file '{path}' has no cells")
    logger.info("Loaded plan: %s (%d cells)", path, len(plan))
    return plan


def _outer(vectors: np.ndarray) -> np.ndarray:
    return vectors[:, :, None] * vectors.conj()[:, None, :]


def _diagonal(matrices: np.ndarray) -> np.ndarray:
    return np.einsum('gjj->gj', matrices).real


def _choose(rng: np.random.Generator, probabilities: np.ndarray) -> np.ndarray:
    """Index of the sampled record per row of a (G, R) probability array"""
    edges = np.cumsum(probabilities, axis=1)
    draws = rng.random(probabilities.shape[0])[:, None]
    return np.minimum((draws >= edges).sum(axis=1), probabilities.shape[1] - 1)


class _EventRecord:
    """Detections accumulated per shot of a group"""

    def __init__(self, size: int, n_targets: int):
        self.n_targets = n_targets
        self.control_count = np.zeros(size, dtype=int)
        self.control_bit = np.zeros(size, dtype=int)
        self.target_count = np.zeros(size, dtype=int)
        self.target_bits = np.zeros((size, n_targets), dtype=int)

    def control(self, detected: np.ndarray, bits: np.ndarray):
        self.control_bit = np.where(detected, bits, self.control_bit)
        self.control_count += detected

    def target(self, detected: np.ndarray, bits: np.ndarray):
        slot = np.minimum(self.target_count, self.n_targets - 1)
        writable = detected & (self.target_count < self.n_targets)
        rows = np.flatnonzero(writable)
        self.target_bits[rows, slot[rows]] = bits[rows]
        self.target_count += detected

    def codes(self) -> np.ndarray:
        """Outcome codes of the postselected shots, control as the leading bit"""
        keep = (self.control_count == 1) & (self.target_count == self.n_targets)
        weights = 2 ** np.arange(self.n_targets - 1, -1, -1)
        codes = (self.control_bit << self.n_targets) + self.target_bits @ weights
        return codes[keep]


def _simulate_group(config: SimConfig, input_label: str, tokens: List[str], n_control: int,
                    n_target: int, beta_c: np.ndarray, beta_t: np.ndarray,
                    rng: np.random.Generator) -> np.ndarray:
    """Codes of the postselected shots among shots with the same photon numbers"""
    size = beta_c.size
    eta_d = config.detection_efficiency
    control_amplitude, target_amplitude = config.gate.photon_amplitudes()
    control_in = POLARIZATION_VECTORS[input_label[0]]
    record = _EventRecord(size, config.n_targets)

    branch = np.zeros((size, 2), dtype=complex)
    if n_control >= 1:
        branch[:, 0] = control_in[0]
        branch[:, 1] = control_in[1] * np.exp(1j * beta_c)
    else:
        branch[:, 1] = 1.0
    sigma = _outer(branch)

    rotation = target_rotation()
    for i in range(n_target):
        position = min(i, config.n_targets - 1)
        token = tokens[1 + position]
        plus, minus = analysis_basis(token.lstrip('~'))
        target_in = POLARIZATION_VECTORS[input_label[1 + position]]
        phases = np.stack([np.ones(size), np.exp(1j * beta_t[:, i])], axis=1)
        tau = target_in[None, None, :] * target_amplitude[None, :, :] * phases[:, None, :]
        if token.startswith('~'):
            tau = tau @ rotation.T
        factors = []
        for ket in (plus, minus):
            projection = tau @ ket.conj()
            factors.append(eta_d * _outer(projection))
        overlap = np.einsum('gjk,glk->gjl', tau, tau.conj())
        survival = _diagonal(overlap)
        lost = (1.0 - eta_d) * overlap + np.eye(2)[None] * (1.0 - survival)[:, :, None]
        factors.append(lost)
        factors = np.stack(factors, axis=1)

        weights = _diagonal(sigma)
        trace = weights.sum(axis=1)
        probabilities = np.einsum('gj,grj->gr', weights, np.einsum('grjj->grj', factors).real)
        probabilities /= trace[:, None]
        chosen = _choose(rng, probabilities)
        sigma = sigma * factors[np.arange(size), chosen]
        norm = _diagonal(sigma).sum(axis=1)
        sigma = np.where(norm[:, None, None] > 0, sigma / np.where(norm > 0, norm, 1.0)[:, None, None], sigma)
        record.target(chosen < 2, (chosen == 1).astype(int))

    plus, minus = analysis_basis(tokens[0])
    if n_control >= 1:
        factors = []
        for ket in (plus, minus):
            vector = control_amplitude * ket.conj()
            factors.append(eta_d * np.outer(vector, vector.conj()))
        outcome_probabilities = np.einsum('gjl,rjl->gr', sigma, np.stack(factors)).real
        outcome_probabilities /= _diagonal(sigma).sum(axis=1)[:, None]
        outcome_probabilities = np.clip(outcome_probabilities, 0.0, 1.0)
        lost = np.clip(1.0 - outcome_probabilities.sum(axis=1), 0.0, 1.0)
        chosen = _choose(rng, np.column_stack([outcome_probabilities, lost]))
        record.control(chosen < 2, (chosen == 1).astype(int))

    # extra control photons: independent, same shot phase
    for _ in range(max(0, n_control - 1)):
        vector = np.stack([np.full(size, control_in[0] * control_amplitude[0], dtype=complex),
                           control_in[1] * control_amplitude[1] * np.exp(1j * beta_c)], axis=1)
        detected = np.stack([eta_d * np.abs(vector @ ket.conj()) ** 2 for ket in (plus, minus)], axis=1)
        lost = np.clip(1.0 - detected.sum(axis=1), 0.0, 1.0)
        chosen = _choose(rng, np.column_stack([detected, lost]))
        record.control(chosen < 2, (chosen == 1).astype(int))

    if config.dark_count_probability > 0:
        dark_control = rng.poisson(config.dark_count_probability, size)
        for m in range(int(dark_control.max(initial=0))):
            record.control(dark_control > m, rng.integers(0, 2, size))
        dark_target = rng.poisson(config.dark_count_probability * config.n_targets, size)
        for m in range(int(dark_target.max(initial=0))):
            record.target(dark_target > m, rng.integers(0, 2, size))

    return record.codes()


def _photon_numbers(config: SimConfig, size: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    if config.mode is SourceMode.SINGLE:
        return np.ones(size, dtype=int), np.full(size, config.n_targets, dtype=int)
    return rng.poisson(config.mean_control, size), rng.poisson(config.mean_target, size)


def simulate_partition(config: SimConfig, cell_index: int, partition_index: int,
                       shots: int) -> CountsTable:
    """One random stream: `shots` invocations of one plan cell"""
    input_label, setting = config.plan[cell_index]
    seed = np.random.SeedSequence(entropy=config.seed, spawn_key=(cell_index, partition_index))
    rng = np.random.default_rng(seed)
    tokens = split_setting(setting)

    n_control, n_target = _photon_numbers(config, shots, rng)
    beta_c = sample_phases(config.gate.visibility_control, shots, rng, config.phase_law)
    widest = max(int(n_target.max(initial=0)), 1)
    beta_t = sample_phases(config.gate.visibility_target, shots * widest, rng,
                           config.phase_law).reshape(shots, widest)

    codes = []
    groups = sorted(set(zip(n_control.tolist(), n_target.tolist())))
    for nc, nt in groups:
        members = np.flatnonzero((n_control == nc) & (n_target == nt))
        codes.append(_simulate_group(config, input_label, tokens, nc, nt,
                                     beta_c[members], beta_t[members], rng))
    n_photons = config.n_targets + 1
    histogram = np.bincount(np.concatenate(codes), minlength=2 ** n_photons)

    table = CountsTable()
    table.add_invocations(input_label, setting, shots)
    for code, count in enumerate(histogram):
        if count:
            table.add(input_label, setting, outcome_label(code, n_photons), int(count))
    return table


def outcome_label(code: int, n_photons: int) -> str:
    bits = format(code, f'0{n_photons}b')
    return ''.join('+' if bit == '0' else '-' for bit in bits)


def _partitions(config: SimConfig) -> List[Tuple[int, int, int]]:
    tasks = []
    for cell_index in range(len(config.plan)):
        remaining, partition_index = config.shots, 0
        while remaining > 0:
            shots = min(config.partition_size, remaining)
            tasks.append((cell_index, partition_index, shots))
            remaining -= shots
            partition_index += 1
    return tasks


def _run_task(config: SimConfig, task: Tuple[int, int, int]) -> CountsTable:
    return simulate_partition(config, *task)


def run(config: SimConfig) -> CountsTable:
    """
    Simulate every cell of the plan

    Shots are split into fixed partitions with one random stream each, so the
    table depends on the seed and config only, never on the worker count.
    """
    tasks = _partitions(config)
    worker = functools.partial(_run_task, config)
    if config.workers > 1:
        with multiprocessing.Pool(config.workers) as pool:
            tables = pool.map(worker, tasks)
    else:
        tables = [worker(task) for task in tasks]

    counts = CountsTable()
    for table in tables:
        counts = counts.merge(table)
    counts.metadata = {
        'simulator_version': SIMULATOR_VERSION,
        'config': config.to_dict(),
    }
    if config.mode is SourceMode.POISSONIAN:
        counts.metadata['approximation'] = (
            "extra photons propagate independently through the same shot map; "
            "detection resolves photon number"
        )

    for input_label, setting in config.plan:
        kept = counts.total(input_label, setting)
        logger.info("Simulated cell %s/%s: %d of %d shots postselected",
                    input_label, setting, kept, config.shots)
    return counts


def postselected_fractions(counts: CountsTable) -> Dict[Tuple[str, str], float]:
    """Postselected events per invocation for every cell"""
    fractions = {}
    for cell in counts.cells():
        invocations = counts.invocations_for(*cell)
        if invocations > 0:
            fractions[cell] = counts.total(*cell) / invocations
    return fractions
