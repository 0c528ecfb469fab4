"""
Tests for GHZ parity analysis, the phase-noise model and the rate model
"""

import math
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose

from counts import CountsTable, join_setting
from errors import EmptyCountsError, ValidationError, WrongSettingsError
from gate_model import GateParams, PhysicalEfficiencies, dd_output_prediction
from ghz_model import (ParityDataset, RateParams, average_repetition_rate, coherence_from_parities,
                       coincidence_improvement_factor, coincidence_rates, fit_parity,
                       ghz_closed_forms, ghz_fidelity, ghz_summary_from_counts, load_parity_csv,
                       monte_carlo_ghz, save_parity_csv, stokes_from_counts, two_photon_rate,
                       witness_p_value)
from presets import PresetManager
from shot_sim import parity_setting
from tomography import harmonic_mean_efficiency

PHYSICAL = PhysicalEfficiencies(0.39, 0.65, 0.90, 0.17)


def cosine_dataset(n_photons, amplitude):
    thetas = np.array([k * math.pi / (2 * n_photons) for k in range(2 * n_photons)])
    values = amplitude * np.cos(n_photons * thetas)
    return ParityDataset(n_photons, thetas, values, np.full(thetas.size, 0.01))


def test_two_photon_closed_form_matches_gate_model():
    closed = ghz_closed_forms(PHYSICAL, 0.72, 0.78, 2)
    predicted = dd_output_prediction(GateParams.from_physical(PHYSICAL, 0.72, 0.78))
    for key in ('efficiency', 'p_H', 'p_V', 'coherence'):
        assert_allclose(closed[key], predicted[key], atol=1e-12)


def test_ideal_gate_gives_perfect_ghz_states():
    ideal = PhysicalEfficiencies(1.0, 1.0, 1.0, 1.0)
    for n in (2, 3, 6):
        closed = ghz_closed_forms(ideal, 1.0, 1.0, n)
        assert_allclose(closed['fidelity'], 1.0, atol=1e-12)
        assert_allclose(closed['efficiency'], 1.0, atol=1e-12)


def test_fidelity_falls_with_photon_number():
    fidelities = [ghz_closed_forms(PHYSICAL, 0.72, 0.78, n)['fidelity'] for n in range(2, 7)]
    assert all(a > b for a, b in zip(fidelities, fidelities[1:]))


def random_physical(rng):
    eta_sr = rng.uniform(0.1, 1.0)
    return (PhysicalEfficiencies(eta_sr, rng.uniform(0.1, 1.0), rng.uniform(0.2, 1.0),
                                 eta_sr * rng.uniform(0.0, 1.0)),
            rng.uniform(0.3, 0.99), rng.uniform(0.3, 0.99))


RANDOM_SETS = [random_physical(np.random.default_rng(100 + k)) for k in range(20)]


def assert_monte_carlo_agrees(physical, v_c, v_t, n_photons, seed):
    closed = ghz_closed_forms(physical, v_c, v_t, n_photons)
    sampled = monte_carlo_ghz(physical, v_c, v_t, n_photons, 100000, np.random.default_rng(seed))
    for key in ('p_H', 'p_V', 'coherence'):
        assert abs(sampled[key] - closed[key]) < 4 * sampled[key + '_err'] + 1e-9, key
    # the kept norm does not depend on the phases
    assert_allclose(sampled['efficiency'], closed['efficiency'], rtol=1e-9)


@pytest.mark.parametrize('n_photons', range(2, 7))
def test_monte_carlo_matches_closed_form(n_photons):
    assert_monte_carlo_agrees(PHYSICAL, 0.72, 0.78, n_photons, 12 + n_photons)


@pytest.mark.parametrize('index', range(len(RANDOM_SETS)))
def test_monte_carlo_matches_closed_form_at_random_parameters(index):
    physical, v_c, v_t = RANDOM_SETS[index]
    assert_monte_carlo_agrees(physical, v_c, v_t, 2 + index % 5, 40 + index)


def test_shared_target_phase_changes_coherence():
    independent = monte_carlo_ghz(PHYSICAL, 0.72, 0.5, 4, 50000, np.random.default_rng(1))
    shared = monte_carlo_ghz(PHYSICAL, 0.72, 0.5, 4, 50000, np.random.default_rng(1),
                             shared_target_phase=True)
    assert abs(shared['coherence'] - independent['coherence']) > 0.01


def test_alternating_sum_and_fit_agree_on_clean_data():
    dataset = cosine_dataset(4, 0.6)
    coherence, _ = coherence_from_parities(dataset)
    fitted, error = fit_parity(dataset)
    assert_allclose(coherence, 0.6, atol=1e-12)
    assert_allclose(fitted, 0.6, atol=1e-9)
    assert error > 0


def test_fit_is_projected_onto_unit_interval():
    fitted, _ = fit_parity(cosine_dataset(3, -0.2))
    assert fitted == 0.0


def test_missing_parity_setting():
    dataset = ParityDataset(3, [0.0, 0.1], [1.0, 0.9], [0.01, 0.01])
    with pytest.raises(WrongSettingsError):
        coherence_from_parities(dataset)


def test_parity_dataset_validation():
    with pytest.raises(ValidationError):
        ParityDataset(1, [0.0], [1.0], [0.1])
    with pytest.raises(ValidationError):
        ParityDataset(3, [0.0], [1.5], [0.1])


def test_stokes_from_counts():
    value, error = stokes_from_counts({'++': 75, '+-': 25})
    assert_allclose(value, 0.5)
    assert_allclose(error, math.sqrt(0.75 / 100))
    with pytest.raises(EmptyCountsError):
        stokes_from_counts({'++': 0})
    with pytest.raises(ValidationError):
        stokes_from_counts({'+x': 3})


def test_fidelity_and_witness():
    summary = ghz_fidelity(0.45, 0.40, 0.55, 3, {'p_H': 0.03, 'p_V': 0.04, 'coherence': 0.1})
    assert_allclose(summary.fidelity, 0.7)
    assert_allclose(summary.errors['population'], 0.05)
    assert_allclose(summary.errors['fidelity'], 0.5 * math.hypot(0.05, 0.1))
    assert summary.genuine_entanglement
    assert 'p_value' in summary.to_dict()


def test_witness_p_values():
    assert witness_p_value(0.623, 0.004) < 1e-200
    assert_allclose(witness_p_value(0.546, 0.014), 5e-4, rtol=0.1)
    assert_allclose(witness_p_value(0.548, 0.053), 0.18, atol=0.01)
    with pytest.raises(ValidationError):
        witness_p_value(0.6, 0.0)


def test_summary_from_perfect_ghz_counts():
    counts = CountsTable()
    label = 'DDD'
    population = join_setting(['HV', '~HV', '~HV'])
    counts.add(label, population, '+++', 60)
    counts.add(label, population, '---', 40)
    # S = cos(3 theta): even parity at 0 and 2pi/3, odd at pi/3
    for k, outcome in enumerate(('+++', '-++', '--+')):
        counts.add(label, parity_setting(k * math.pi / 3, 3), outcome, 100)
    summary = ghz_summary_from_counts(counts, 3)
    assert_allclose(summary.p_h, 0.6)
    assert_allclose(summary.coherence, 1.0)
    assert_allclose(summary.fidelity, 1.0)


def test_summary_needs_population_setting():
    counts = CountsTable()
    counts.add('DDD', parity_setting(0.0, 3), '+++', 10)
    with pytest.raises(WrongSettingsError):
        ghz_summary_from_counts(counts, 3)


def test_parity_csv_round_trip(tmp_path):
    dataset = cosine_dataset(3, 0.4)
    path = str(tmp_path / 'parity.csv')
    save_parity_csv(dataset, path)
    loaded = load_parity_csv(path)
    assert loaded.n_photons == 3
    assert_allclose(loaded.values, dataset.values)


def test_coincidence_rates():
    rates = coincidence_rates(RateParams(2300.0, 0.765, 0.12, 0.26), range(1, 6))
    assert_allclose(rates[1], 2300 * 0.12 * math.exp(-0.38))
    assert_allclose(rates[1], 188.7, atol=0.1)
    assert_allclose(rates[2] / rates[1], 0.26)
    assert_allclose(rates[3] / rates[2], 0.13)
    assert all(a > b for a, b in zip(list(rates.values()), list(rates.values())[1:]))


def test_predicted_rates_agree_with_measured_rates():
    preset = PresetManager().get('paper')
    predicted = coincidence_rates(preset.rates(), range(1, 6))
    measured = preset.measured('measured_rate')
    assert [measured[n] for n in (2, 3, 4, 5)] == [46.0, 6.0, 0.46, 0.028]
    for n in (1, 2, 3):
        assert abs(predicted[n] / measured[n] - 1.0) < 0.15, n
    for n in (4, 5):
        assert abs(predicted[n] / measured[n] - 1.0) < 0.30, n


def test_rate_params_from_parts():
    rates = RateParams.from_parts(2300.0, 0.765, PHYSICAL, 0.31, 0.41)
    eta_c = (0.39 + 0.65) / 2
    eta_t = (2.0 + 0.90 + 0.17 / 0.39) / 4
    assert_allclose(rates.mean_control, 0.765 * eta_c * 0.31)
    assert_allclose(rates.mean_target, 0.765 * eta_t * 0.41)


def test_two_photon_rate():
    per_pair = two_photon_rate(2300.0, 0.765, 0.417)
    assert_allclose(per_pair, 561, atol=1)
    assert_allclose(two_photon_rate(2300.0, 0.765, 0.417, 0.14 * 0.13), 10.2, atol=0.1)


def test_repetition_rate_and_improvement_factor():
    assert_allclose(average_repetition_rate(10000, 4.3), 2325.6, atol=0.1)
    previous_efficiency = harmonic_mean_efficiency([0.077, 0.023, 0.015, 0.0045])
    assert_allclose(previous_efficiency, 0.01158, atol=0.00005)
    factor = coincidence_improvement_factor(
        average_repetition_rate(10000, 4.3) / average_repetition_rate(10000, 18.0),
        0.765 / 0.25, 0.417 / previous_efficiency)
    assert_allclose(factor, 1.4e3, rtol=0.05)
    with pytest.raises(ValidationError):
        average_repetition_rate(10000, 0.0)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
