"""
Tests for the shot simulator and its measurement plans
"""

import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose

from errors import ConfigError, ValidationError
from gate_model import GateParams, PhysicalEfficiencies, truth_table_from_counts
from ghz_model import ghz_closed_forms, ghz_summary_from_counts
from shot_sim import (SimConfig, SourceMode, load_plan, outcome_label, parity_plan,
                      postselected_fractions, run, save_plan, simulate_partition,
                      tomography_plan, truth_table_plan)
from tomography import Calibration, process_tomography

ETAS = (0.351, 0.157, 0.611, 0.549)
IDEAL = GateParams((1.0, 1.0, 1.0, 1.0), 1.0, 1.0)


def measured_gate():
    return GateParams(ETAS, 0.86, 0.78)


def test_plan_sizes():
    assert len(tomography_plan()) == 144
    assert len(parity_plan(6)) == 13
    assert parity_plan(3)[-1] == ('DDD', 'HV,~HV,~HV')
    assert len(truth_table_plan('cnot')) == 4
    with pytest.raises(ValidationError):
        parity_plan(1)


def test_plan_csv_round_trip(tmp_path):
    plan = parity_plan(3)
    path = str(tmp_path / 'plan.csv')
    save_plan(plan, path)
    assert load_plan(path) == plan
    with pytest.raises(ConfigError):
        load_plan(str(tmp_path / 'missing.csv'))


def test_config_rejects_bad_cells():
    with pytest.raises(ValidationError):
        SimConfig(IDEAL, [('HH', '~HV,HV')], 10)
    with pytest.raises(ValidationError):
        SimConfig(IDEAL, [('HHH', 'HV,HV')], 10)
    with pytest.raises(ValidationError):
        SimConfig(IDEAL, [('HH', 'HV,HV')], 0)


def test_outcome_labels_put_control_first():
    assert outcome_label(0, 2) == '++'
    assert outcome_label(0b10, 2) == '-+'
    assert outcome_label(0b101, 3) == '-+-'


def test_partitions_are_reproducible():
    config = SimConfig(measured_gate(), truth_table_plan(), 3000, seed=17, partition_size=1000)
    first = simulate_partition(config, 2, 1, 1000)
    second = simulate_partition(config, 2, 1, 1000)
    assert first.counts == second.counts


def test_worker_count_does_not_change_counts():
    plan = truth_table_plan('cnot')
    serial = run(SimConfig(measured_gate(), plan, 4000, seed=3, partition_size=1500))
    parallel = run(SimConfig(measured_gate(), plan, 4000, seed=3, partition_size=1500, workers=2))
    assert serial.counts == parallel.counts
    assert serial.invocations == parallel.invocations


def test_ideal_cnot_truth_table():
    counts = run(SimConfig(IDEAL, truth_table_plan('cnot'), 2000, seed=1))
    table = truth_table_from_counts(counts, 'cnot')
    assert table.fidelity == 1.0
    assert_allclose(table.efficiencies, 1.0)


def test_postselected_fraction_matches_efficiencies():
    shots = 20000
    counts = run(SimConfig(measured_gate(), truth_table_plan(), shots, seed=5))
    fractions = postselected_fractions(counts)
    for label, eta in zip(('HH', 'HV', 'VH', 'VV'), ETAS):
        sigma = np.sqrt(eta * (1 - eta) / shots)
        assert abs(fractions[(label, 'HV,HV')] - eta) < 5 * sigma


def test_detection_efficiency_scales_fraction():
    shots = 20000
    counts = run(SimConfig(measured_gate(), [('HH', 'HV,HV')], shots, detection_efficiency=0.8,
                           seed=6))
    expected = ETAS[0] * 0.64
    sigma = np.sqrt(expected * (1 - expected) / shots)
    assert abs(postselected_fractions(counts)[('HH', 'HV,HV')] - expected) < 5 * sigma


def test_dark_counts_replace_lost_photons():
    # with eta_d = 1 a dark click only adds a second detection and is postselected away
    counts = run(SimConfig(IDEAL, truth_table_plan('cnot'), 5000, detection_efficiency=0.5,
                           dark_count_probability=0.05, seed=2))
    fidelity = truth_table_from_counts(counts, 'cnot').fidelity
    assert 0.8 < fidelity < 1.0


def ghz_gate():
    return GateParams.from_physical(PhysicalEfficiencies(0.39, 0.65, 0.90, 0.17), 0.72, 0.78)


def test_poissonian_run_records_approximation():
    config = SimConfig(measured_gate(), [('DD', 'DA,DA')], 20000, mode=SourceMode.POISSONIAN,
                       mean_control=0.31, mean_target=0.41, seed=4)
    counts = run(config)
    assert 'approximation' in counts.metadata
    assert counts.metadata['config']['mode'] == 'poissonian'
    fraction = postselected_fractions(counts)[('DD', 'DA,DA')]
    assert 0.0 < fraction < np.mean(ETAS)


def test_multi_photon_events_lower_ghz_coherence():
    single = ghz_summary_from_counts(
        run(SimConfig(ghz_gate(), parity_plan(3), 100000, n_targets=2, seed=9)), 3)
    closed = ghz_closed_forms(PhysicalEfficiencies(0.39, 0.65, 0.90, 0.17), 0.72, 0.78, 3)
    assert abs(single.coherence - closed['coherence']) < 4 * single.errors['coherence'] + 0.005

    config = SimConfig(ghz_gate(), parity_plan(3), 100000, n_targets=2, seed=9,
                       mode=SourceMode.POISSONIAN, mean_control=1.0, mean_target=1.5)
    poissonian = ghz_summary_from_counts(run(config), 3)
    spread = np.hypot(single.errors['coherence'], poissonian.errors['coherence'])
    assert poissonian.coherence < single.coherence - 3 * spread


def test_weak_poissonian_pulses_approach_single_photons():
    cell = ('DD', 'DA,DA')
    single = run(SimConfig(measured_gate(), [cell], 200000, seed=12))
    weak = run(SimConfig(measured_gate(), [cell], 2000000, seed=12, mode=SourceMode.POISSONIAN,
                         mean_control=0.05, mean_target=0.05))
    kept = weak.total(*cell)
    assert kept > 500
    for outcome in ('++', '+-', '-+', '--'):
        p_single = single.outcomes(*cell).get(outcome, 0) / single.total(*cell)
        p_weak = weak.outcomes(*cell).get(outcome, 0) / kept
        sigma = np.sqrt(p_single * (1.0 - p_single) / kept)
        assert abs(p_weak - p_single) < 4 * sigma + 0.005, outcome


def test_ideal_ghz_parity_is_perfect():
    config = SimConfig(IDEAL, parity_plan(3), 2000, n_targets=2, seed=8)
    summary = ghz_summary_from_counts(run(config), 3)
    assert_allclose(summary.population, 1.0)
    assert_allclose(summary.coherence, 1.0)
    assert_allclose(summary.fidelity, 1.0)


def test_tomography_pipeline_recovers_model():
    config = SimConfig(measured_gate(), tomography_plan(), 100000, seed=11, workers=4)
    result = process_tomography(run(config), Calibration())
    assert abs(result.fidelity_postselected - 0.786) < 0.02
    assert abs(result.eta_bar - 0.417) < 0.01
    truth = run(SimConfig(measured_gate(), truth_table_plan(), 100000, seed=11))
    assert truth_table_from_counts(truth, 'cphase').fidelity >= 0.999


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
