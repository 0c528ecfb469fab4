"""
Tests for the cavity reflection model, spectrum fits and the derived estimates
"""

import math
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cavity_physics import (BlockadeParams, EitParams, GeometryParams, blockade_radius,
                            complete_cavity_params, conditional_phase, coupling_and_cooperativity,
                            effective_cooperativity, fiber_transmission, fit_spectrum,
                            forster_gamma_estimate, load_spectrum_csv, reflection, save_spectrum_csv,
                            storage_retrieval_efficiency, synthetic_spectrum, transverse_factor)
from errors import (FitPreconditionError, InconsistentParamsError, OverdeterminedParamsError,
                    SingularDenominatorError, UnderdeterminedParamsError, ValidationError)
from units import ATOMIC_UNIT_C3, ghz_to_angular, mhz_to_angular, rate_from_lifetime_us, um_to_m


def reference_cavity():
    return complete_cavity_params(ghz_to_angular(1.59), finesse=350, finesse_hr=2.0e4)


def reference_eit(**changes):
    values = dict(cooperativity=21.4, rabi=mhz_to_angular(42.7),
                  gamma_rg=rate_from_lifetime_us(0.22))
    values.update(changes)
    return EitParams(**values)


def test_input_coupler_finesse_and_reflectivity():
    cavity = reference_cavity()
    assert_allclose(cavity.finesse_in, 356.2, atol=0.05)
    assert_allclose(cavity.r_in_intensity, 0.9825, atol=0.0005)
    assert_allclose(cavity.kappa, cavity.kappa_in + cavity.kappa_hr)


def test_two_rates_complete_the_third():
    spacing = ghz_to_angular(1.59)
    cavity = complete_cavity_params(spacing, finesse_in=356.23, finesse_hr=2.0e4)
    assert_allclose(cavity.finesse, 350.0, rtol=1e-4)
    from_rates = complete_cavity_params(spacing, kappa=spacing / 700.0, finesse_hr=2.0e4)
    assert_allclose(from_rates.finesse, 350.0)


def test_cavity_parameter_errors():
    spacing = ghz_to_angular(1.59)
    with pytest.raises(UnderdeterminedParamsError):
        complete_cavity_params(spacing, finesse=350)
    with pytest.raises(OverdeterminedParamsError):
        complete_cavity_params(spacing, finesse=350, kappa=1e7, finesse_hr=2e4)
    with pytest.raises(InconsistentParamsError):
        complete_cavity_params(spacing, finesse=350, finesse_in=400, finesse_hr=2e4)


def test_empty_cavity_reflection():
    r = reflection(EitParams(cooperativity=0.0), reference_cavity())
    assert_allclose(r.real, 0.9651, atol=0.0005)
    assert_allclose(abs(r) ** 2, 0.931, atol=0.002)


def test_effective_cooperativity_on_resonance():
    c_eff = effective_cooperativity(reference_eit())
    assert_allclose(abs(c_eff), 0.0514, atol=0.0005)
    assert_allclose(effective_cooperativity(reference_eit(rabi=0.0)), 21.4)


def test_effective_cooperativity_singular_without_dephasing():
    with pytest.raises(SingularDenominatorError):
        effective_cooperativity(reference_eit(gamma_rg=0.0))


def test_conditional_phase_is_pi_on_resonance():
    assert_allclose(conditional_phase(reference_eit(), reference_cavity()), math.pi, atol=1e-9)


def test_storage_retrieval_efficiency():
    gamma = rate_from_lifetime_us(7.0)
    assert_allclose(storage_retrieval_efficiency(21, 0.9825, gamma, 2e-6), 0.661, atol=0.002)
    assert_allclose(storage_retrieval_efficiency(21, 0.9825, 0.0, 2e-6), 0.880, atol=0.002)
    assert_allclose(storage_retrieval_efficiency(math.inf, 1.0, 0.0, 0.0), 1.0)
    with pytest.raises(ValidationError):
        storage_retrieval_efficiency(21, 1.2, 0.0, 0.0)


def test_forster_dephasing_from_polarizabilities():
    blockade = BlockadeParams(c3=1.2e6 * ATOMIC_UNIT_C3)
    gamma_f = forster_gamma_estimate(rate_from_lifetime_us(0.22), blockade)
    assert_allclose(1e9 / gamma_f, 25.0, atol=1.0)


def test_blockade_radius_window_and_scaling():
    gamma_f = forster_gamma_estimate(rate_from_lifetime_us(0.22), BlockadeParams(c3=1.0))
    blockade = BlockadeParams(c3=1.2e6 * ATOMIC_UNIT_C3, gamma_forster=gamma_f)
    radius = blockade_radius(blockade, 21.4, mhz_to_angular(42.7))
    assert um_to_m(6.0) <= radius <= um_to_m(8.0)
    # R_block goes as C3^(1/3)
    scaled = BlockadeParams(c3=8 * 1.2e6 * ATOMIC_UNIT_C3, gamma_forster=gamma_f)
    assert_allclose(blockade_radius(scaled, 21.4, mhz_to_angular(42.7)), 2.0 * radius)


def test_blockade_radius_needs_dephasing_or_defect():
    with pytest.raises(ValidationError):
        blockade_radius(BlockadeParams(c3=1.0), 21.4, mhz_to_angular(42.7))


def test_transverse_factor():
    assert_allclose(transverse_factor(3.3, 4.5, 8.5), 0.54, atol=0.01)


def test_cooperativity_chain():
    cavity = complete_cavity_params(ghz_to_angular(1.59), kappa=mhz_to_angular(2.3),
                                    finesse_hr=2.0e4, atomic_decay=mhz_to_angular(6.0))
    geometry = GeometryParams(waist=um_to_m(8.5), round_trip_length=0.19, sigma_x=um_to_m(3.3),
                              sigma_y=um_to_m(4.5), atom_number=260, dipole_moment=3.584e-29,
                              transition_frequency=2 * math.pi * 3.84e14,
                              measured_coupling=mhz_to_angular(1.0))
    result = coupling_and_cooperativity(geometry, cavity)
    assert_allclose(result['single_atom_cooperativity'], 0.145, atol=0.002)
    assert_allclose(result['cooperativity_max'], 37.7, atol=0.3)
    assert_allclose(result['cooperativity_estimate'], 20.4, atol=0.3)
    assert result['g_formula'] > 0


def test_fiber_transmission():
    assert_allclose(fiber_transmission(0.4, 4.3), 0.67, atol=0.005)


def test_absorption_fit_recovers_cooperativity():
    cavity = reference_cavity()
    truth = reference_eit(rabi=0.0)
    grid = mhz_to_angular(np.linspace(-10.0, 10.0, 41))
    points = synthetic_spectrum(truth, cavity, grid, 1e-3, 1e-3, np.random.default_rng(4))
    result = fit_spectrum(points, 'absorption', cavity, reference_eit(cooperativity=15.0))
    assert result.free == ['cooperativity']
    assert_allclose(result.params.cooperativity, 21.4, rtol=0.01)
    assert result.errors['cooperativity'] > 0


def test_eit_fit_recovers_rabi_and_dephasing():
    cavity = reference_cavity()
    truth = reference_eit()
    grid = mhz_to_angular(np.linspace(-5.0, 5.0, 41))
    points = synthetic_spectrum(truth, cavity, grid, 1e-4, 1e-4, np.random.default_rng(8))
    start = reference_eit(rabi=mhz_to_angular(38.0), gamma_rg=rate_from_lifetime_us(0.25))
    result = fit_spectrum(points, 'eit', cavity, start)
    assert_allclose(result.params.rabi, truth.rabi, rtol=0.02)
    assert_allclose(result.params.gamma_rg, truth.gamma_rg, rtol=0.02)
    assert result.params.cooperativity == 21.4


def pulls(stage, truth, start, grid, names, seeds=range(10)):
    """(fitted - truth) / reported error at 1 % intensity and 20 mrad phase noise"""
    cavity = reference_cavity()
    found = {name: [] for name in names}
    for seed in seeds:
        points = synthetic_spectrum(truth, cavity, grid, 0.01, 0.02, np.random.default_rng(seed))
        result = fit_spectrum(points, stage, cavity, start)
        for name in names:
            error = result.errors[name]
            assert np.isfinite(error) and error > 0
            found[name].append((getattr(result.params, name) - getattr(truth, name)) / error)
    return {name: np.abs(values) for name, values in found.items()}


def test_absorption_fit_errors_are_calibrated():
    grid = mhz_to_angular(np.linspace(-10.0, 10.0, 41))
    result = pulls('absorption', reference_eit(rabi=0.0), reference_eit(cooperativity=15.0),
                   grid, ['cooperativity'])
    assert np.sum(result['cooperativity'] < 2.0) >= 7
    assert np.all(result['cooperativity'] < 4.0)


def test_eit_fit_errors_are_calibrated():
    grid = mhz_to_angular(np.linspace(-5.0, 5.0, 41))
    start = reference_eit(rabi=mhz_to_angular(38.0), gamma_rg=rate_from_lifetime_us(0.25))
    result = pulls('eit', reference_eit(), start, grid, ['rabi', 'gamma_rg'])
    for name in ('rabi', 'gamma_rg'):
        assert np.sum(result[name] < 2.0) >= 7, name
        assert np.all(result[name] < 4.0), name


def test_fit_preconditions():
    cavity = reference_cavity()
    points = synthetic_spectrum(reference_eit(), cavity, mhz_to_angular(np.linspace(-1, 1, 5)),
                                1e-3, 1e-3, np.random.default_rng(0))
    with pytest.raises(FitPreconditionError):
        fit_spectrum(points, 'eit', cavity, reference_eit())
    with pytest.raises(FitPreconditionError):
        fit_spectrum(points, 'transmission', cavity, reference_eit())


def test_spectrum_csv_round_trip(tmp_path):
    cavity = reference_cavity()
    points = synthetic_spectrum(reference_eit(), cavity, mhz_to_angular(np.linspace(-3, 3, 7)),
                                1e-3, 1e-3, np.random.default_rng(1))
    path = str(tmp_path / 'spectrum.csv')
    save_spectrum_csv(points, path)
    loaded = load_spectrum_csv(path)
    assert_allclose([p.detuning for p in loaded], [p.detuning for p in points])
    assert_allclose([p.phase for p in loaded], [p.phase for p in points])


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
