"""
Tests for preset loading, run configs and the unit boundary
"""

import json
import math
import sys

import pytest
from numpy.testing import assert_allclose

from errors import ConfigError, PresetNotFoundError
from presets import PresetManager, load_run_config, run_config_from_dict
from units import (ATOMIC_UNIT_C3, angular_to_mhz, check_units_block, lifetime_us_from_rate,
                   mhz_to_angular, rate_from_lifetime_us, to_si)

UNITS = {'frequency': 'MHz', 'time': 'us', 'length': 'um'}


def test_unit_conversions():
    assert_allclose(mhz_to_angular(1.0), 2 * math.pi * 1e6)
    assert_allclose(angular_to_mhz(mhz_to_angular(42.7)), 42.7)
    assert_allclose(rate_from_lifetime_us(0.22), 1 / 0.22e-6)
    assert_allclose(lifetime_us_from_rate(rate_from_lifetime_us(0.22)), 0.22)
    assert_allclose(to_si(1.2e6, 'au'), 7.75e-43, rtol=0.01)
    assert_allclose(to_si(2300.0, 'Hz'), 2300.0)
    with pytest.raises(ValueError):
        to_si(1.0, 'furlong')
    with pytest.raises(ValueError):
        rate_from_lifetime_us(0.0)


def test_units_block_must_match_boundary():
    check_units_block(UNITS)
    with pytest.raises(ValueError):
        check_units_block({'frequency': 'Hz', 'time': 'us', 'length': 'um'})


def test_bundled_presets_load():
    manager = PresetManager()
    assert 'reference' in manager.names()
    assert 'ideal' in manager.names()
    with pytest.raises(PresetNotFoundError):
        manager.get('missing')


def test_paper_alias_is_the_default_preset():
    manager = PresetManager()
    assert manager.get('paper') is manager.get('reference')
    assert manager.get() is manager.get('reference')
    assert 'paper' not in manager.names()


def test_every_bundled_value_names_its_source():
    manager = PresetManager()
    for name in manager.names():
        preset = manager.get(name)
        for key in preset.params:
            assert preset.source(key), f"{name}.{key} has no source"
    preset = manager.get('paper').with_overrides({'rabi': 40.0})
    assert preset.source('rabi') == 'run config'


def test_reference_preset_builds_parameter_objects():
    preset = PresetManager().get('reference')
    cavity = preset.cavity()
    assert_allclose(cavity.finesse_in, 356.2, atol=0.05)
    assert_allclose(preset.gate().eta_bar, 0.417)
    assert_allclose(preset.blockade().c3, 1.2e6 * ATOMIC_UNIT_C3)
    assert_allclose(preset.eit().gamma_rg, 1 / 0.22e-6)
    assert preset.measured('ghz_fidelity') == {3: 0.623, 4: 0.546, 5: 0.548, 6: 0.359}
    assert preset.calibration(poissonian=True).mean_photon_numbers == (0.31, 0.41)


def test_overrides_apply_in_preset_units():
    preset = PresetManager().get('reference').with_overrides({'rabi': 40.0})
    assert_allclose(preset.eit().rabi, mhz_to_angular(40.0))
    assert preset.params['rabi']['note'] == 'override'
    with pytest.raises(ConfigError):
        preset.with_overrides({'no_such_parameter': 1.0})


def test_broken_preset_files_are_skipped(tmp_path):
    (tmp_path / 'good.json').write_text(json.dumps({
        'name': 'good', 'units': UNITS,
        'params': {'eta_sr': {'value': 0.5, 'unit': '1'}},
    }))
    (tmp_path / 'bad_units.json').write_text(json.dumps({'name': 'bad', 'units': {}, 'params': {}}))
    (tmp_path / 'not_json.json').write_text('{')
    manager = PresetManager(str(tmp_path))
    assert manager.names() == ['good']


def test_run_config_parsing(tmp_path):
    config = run_config_from_dict({'preset': 'ideal', 'seed': 3, 'units': UNITS,
                                   'params': {'eta_sr': 0.5}, 'shots': 1000})
    assert config.preset == 'ideal'
    assert config.seed == 3
    assert config.options == {'shots': 1000}
    with pytest.raises(ConfigError):
        run_config_from_dict({'params': {'eta_sr': 0.5}})
    with pytest.raises(ConfigError):
        load_run_config(str(tmp_path / 'absent.json'))
    broken = tmp_path / 'broken.json'
    broken.write_text('{"preset": ')
    with pytest.raises(ConfigError):
        load_run_config(str(broken))
    assert load_run_config(None).preset == 'paper'


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
