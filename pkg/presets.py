"""
Parameter presets for the cavity-Rydberg gate lab
Discovers preset JSON files, converts their values to SI and builds the
parameter objects of the physics modules.
"""

import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from scipy import constants

from cavity_physics import (GAMMA_E, BlockadeParams, CavityParams, EitParams, GeometryParams,
                            complete_cavity_params, round_trip_length)
from errors import ConfigError, PresetNotFoundError
from gate_model import GateParams, PhysicalEfficiencies
from ghz_model import RateParams
from tomography import Calibration
from units import check_units_block, rate_from_lifetime_us, to_si

logger = logging.getLogger(__name__)

PRESETS_DIRECTORY = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'assets', 'presets')
DEFAULT_PRESET = 'paper'


class Preset:
    """One named parameter set; every value carries its unit, a note and its source"""

    def __init__(self, preset_data: Dict):
        """
        Args:
            preset_data: Dictionary with name, aliases, description, units and params
        """
        self.name = preset_data.get('name', 'unnamed')
        self.aliases = list(preset_data.get('aliases', []))
        self.description = preset_data.get('description', '')
        self.units = dict(preset_data.get('units', {}))
        self.params: Dict[str, Dict] = {}
        for key, entry in preset_data.get('params', {}).items():
            if not isinstance(entry, dict) or 'value' not in entry or 'unit' not in entry:
                raise ConfigError(f"preset {self.name!r}: parameter {key!r} needs a value and a unit")
            self.params[key] = dict(entry)

    def has(self, key: str) -> bool:
        return key in self.params

    def raw(self, key: str) -> float:
        """Value in the preset's own unit"""
        try:
            return float(self.params[key]['value'])
        except KeyError:
            raise ConfigError(f"preset {self.name!r} has no parameter {key!r}")

    def value(self, key: str) -> float:
        """Value converted to SI"""
        raw = self.raw(key)
        try:
            return to_si(raw, self.params[key]['unit'])
        except ValueError as e:
            raise ConfigError(f"preset {self.name!r}, {key}: {e}")

    def with_overrides(self, overrides: Dict[str, float]) -> 'Preset':
        """Copy with some values replaced; overrides are in each parameter's unit"""
        unknown = sorted(set(overrides) - set(self.params))
        if unknown:
            raise ConfigError(f"preset {self.name!r} has no parameters {unknown}")
        data = self.to_dict()
        for key, value in overrides.items():
            data['params'][key]['value'] = float(value)
            data['params'][key]['note'] = 'override'
            data['params'][key]['source'] = 'run config'
        return Preset(data)

    def source(self, key: str) -> Optional[str]:
        if key not in self.params:
            raise ConfigError(f"preset {self.name!r} has no parameter {key!r}")
        return self.params[key].get('source')

    def to_dict(self) -> Dict:
        return {
            'name': self.name,
            'aliases': list(self.aliases),
            'description': self.description,
            'units': dict(self.units),
            'params': {key: dict(entry) for key, entry in self.params.items()},
        }

    def cavity(self) -> CavityParams:
        coupling = self.value('coupling_g') if self.has('coupling_g') else None
        decay = self.value('atomic_decay') if self.has('atomic_decay') else GAMMA_E
        return complete_cavity_params(self.value('axial_mode_spacing'),
                                      finesse=self.raw('finesse'),
                                      finesse_hr=self.raw('finesse_hr'),
                                      atomic_decay=decay, coupling=coupling)

    def eit(self) -> EitParams:
        return EitParams(cooperativity=self.raw('cooperativity'), rabi=self.value('rabi'),
                         gamma_rg=rate_from_lifetime_us(self.raw('coherence_time')))

    def physical(self) -> PhysicalEfficiencies:
        return PhysicalEfficiencies(self.raw('eta_sr'), self.raw('eta_f'),
                                    self.raw('reflectivity'), self.raw('blockaded_product'))

    def gate(self) -> GateParams:
        """Measured efficiencies with the process-tomography visibilities"""
        etas = tuple(self.raw(key) for key in ('eta_hh', 'eta_hv', 'eta_vh', 'eta_vv'))
        return GateParams(etas, self.raw('visibility_control'), self.raw('visibility_target'))

    def calibration(self, poissonian: bool = False) -> Calibration:
        means = None
        if poissonian:
            means = (self.raw('mean_photons_control'), self.raw('mean_photons_target'))
        return Calibration(self.raw('detection_efficiency'), means)

    def rates(self) -> RateParams:
        return RateParams(self.value('repetition_rate'), self.raw('detection_efficiency'),
                          self.raw('detected_control_mean'), self.raw('detected_target_mean'))

    def blockade(self) -> BlockadeParams:
        return BlockadeParams(c3=self.value('c3'), forster_defect=self.value('forster_defect'))

    def geometry(self) -> GeometryParams:
        wavelength = self.value('signal_wavelength')
        return GeometryParams(
            waist=self.value('waist'),
            round_trip_length=round_trip_length(self.value('axial_mode_spacing')),
            sigma_x=self.value('sigma_x'),
            sigma_y=self.value('sigma_y'),
            atom_number=self.raw('atom_number'),
            dipole_moment=self.value('dipole_moment'),
            transition_frequency=2.0 * math.pi * constants.c / wavelength,
            measured_coupling=self.value('coupling_g') if self.has('coupling_g') else None,
        )

    def measured(self, prefix: str) -> Dict[int, float]:
        """Numbered fixtures such as measured_rate_1..5 keyed by their number"""
        found = {}
        for key in self.params:
            if key.startswith(prefix + '_') and key[len(prefix) + 1:].isdigit():
                found[int(key[len(prefix) + 1:])] = self.value(key)
        return dict(sorted(found.items()))


class PresetManager:
    """Discovers and loads every preset file in a directory"""

    def __init__(self, presets_directory: str = PRESETS_DIRECTORY):
        """
        Args:
            presets_directory: Directory containing preset JSON files
        """
        self.presets_directory = presets_directory
        self.preset_files: List[str] = []
        self.presets: Dict[str, Preset] = {}
        self.aliases: Dict[str, str] = {}

        self._discover_preset_files()
        self._load_all_presets()

    def _discover_preset_files(self):
        self.preset_files.clear()
        if not os.path.exists(self.presets_directory):
            logger.warning("Presets directory '%s' not found", self.presets_directory)
            return
        for filename in os.listdir(self.presets_directory):
            if filename.endswith('.json'):
                self.preset_files.append(os.path.join(self.presets_directory, filename))
        self.preset_files.sort()
        logger.debug("Found %d preset files", len(self.preset_files))

    def _load_all_presets(self):
        self.presets.clear()
        self.aliases.clear()
        for preset_file in self.preset_files:
            try:
                with open(preset_file, 'r') as f:
                    preset_data = json.load(f)
                check_units_block(preset_data.get('units', {}))
                preset = Preset(preset_data)
                self.presets[preset.name] = preset
                for alias in preset.aliases:
                    self.aliases[alias] = preset.name
                logger.info("Loaded preset: %s (%d params)", preset.name, len(preset.params))
            except (OSError, ValueError, ConfigError) as e:
                logger.error("Error loading preset file %s: %s", preset_file, e)

    def names(self) -> List[str]:
        return sorted(self.presets)

    def get(self, name: str = DEFAULT_PRESET) -> Preset:
        """Look a preset up by its name or one of its aliases"""
        try:
            return self.presets[self.aliases.get(name, name)]
        except KeyError:
            known = sorted(set(self.presets) | set(self.aliases))
            raise PresetNotFoundError(f"unknown preset {name!r}; available: {known}")


@dataclass
class RunConfig:
    """Contents of a run config file; command-line flags override it"""
    preset: str = DEFAULT_PRESET
    seed: Optional[int] = None
    params: Dict[str, float] = field(default_factory=dict)
    units: Dict[str, str] = field(default_factory=dict)
    options: Dict = field(default_factory=dict)

    def resolve(self, manager: PresetManager) -> Preset:
        """The named preset with the numeric overrides applied"""
        preset = manager.get(self.preset)
        return preset.with_overrides(self.params) if self.params else preset

    def to_dict(self) -> Dict:
        return {
            'preset': self.preset,
            'seed': self.seed,
            'params': dict(self.params),
            'units': dict(self.units),
            'options': dict(self.options),
        }


def load_run_config(path: Optional[str]) -> RunConfig:
    """
    Read a run config JSON

    Raises:
        ConfigError: missing file, bad JSON, or numeric overrides without a units block
    """
    if path is None:
        return RunConfig()
    if not os.path.exists(path):
        raise ConfigError(f"config file '{path}' not found")
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file '{path}' is not valid JSON: {e}")
    return run_config_from_dict(data)


def run_config_from_dict(data: Dict) -> RunConfig:
    params = data.get('params', {}) or {}
    units = data.get('units', {}) or {}
    if params and not units:
        raise ConfigError("numeric overrides need a 'units' block")
    if units:
        try:
            check_units_block(units)
        except ValueError as e:
            raise ConfigError(str(e))
    known = {'preset', 'seed', 'params', 'units'}
    return RunConfig(
        preset=data.get('preset', DEFAULT_PRESET),
        seed=data.get('seed'),
        params={key: float(value) for key, value in params.items()},
        units=dict(units),
        options={key: value for key, value in data.items() if key not in known},
    )
