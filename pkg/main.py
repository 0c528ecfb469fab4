"""
Cavity-Rydberg gate lab - command line
Each subcommand runs one analysis or simulation and writes a JSON report.
"""

import argparse
import logging
import math
import sys
from dataclasses import replace
from typing import Dict, List, Optional

import numpy as np

from cavity_physics import (blockade_radius, conditional_phase, coupling_and_cooperativity,
                            fiber_transmission, fit_spectrum, forster_gamma_estimate,
                            load_spectrum_csv, reflection, save_spectrum_csv,
                            storage_retrieval_efficiency, synthetic_spectrum)
from counts import CountsTable
from errors import ConfigError, ExitCode, LabError
from gate_model import (GateParams, dd_output_prediction, fidelities_from_xi, truth_table,
                        truth_table_from_counts, xi_model, xi_monte_carlo)
from ghz_model import (RateParams, average_repetition_rate, coincidence_improvement_factor,
                       coincidence_rates, ghz_closed_forms, ghz_summary_from_counts, monte_carlo_ghz,
                       parity_dataset_from_counts, save_parity_csv, two_photon_rate)
from presets import Preset, PresetManager, RunConfig, load_run_config
from quantum_core import cphase_unitary
from reports import build_report, write_csv, write_report
from shot_sim import (SimConfig, load_plan, parity_plan, postselected_fractions, run,
                      tomography_plan, truth_table_plan)
from tomography import (Calibration, bootstrap_standard_errors, efficiency_spectrum,
                        efficiency_tomography, harmonic_mean_efficiency, process_tomography,
                        state_tomography)
from units import (angular_to_mhz, lifetime_us_from_rate, m_to_um, mhz_to_angular,
                   rate_from_lifetime_us, us_to_s)

logger = logging.getLogger(__name__)


def _option(args: argparse.Namespace, run_config: RunConfig, name: str, default=None):
    """Flag value, else the config file value, else the default"""
    value = getattr(args, name, None)
    if value is not None:
        return value
    return run_config.options.get(name, default)


def _seed(args: argparse.Namespace, run_config: RunConfig) -> int:
    if args.seed is not None:
        return args.seed
    return run_config.seed if run_config.seed is not None else 0


def _shots(text: str) -> int:
    """Accepts 1e6 style integers"""
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid shot count {text!r}")
    if value < 1 or value != int(value):
        raise argparse.ArgumentTypeError(f"shot count must be a positive integer, got {text!r}")
    return int(value)


def _calibration(args: argparse.Namespace, preset: Preset, counts: CountsTable) -> Calibration:
    """Detection efficiency and source statistics, taken from the simulator metadata when present"""
    recorded = counts.metadata.get('config', {})
    eta_d = args.detection_efficiency
    if eta_d is None:
        eta_d = recorded.get('detection_efficiency', preset.raw('detection_efficiency'))
    poissonian = args.poissonian or recorded.get('mode') == 'poissonian'
    means = None
    if poissonian:
        means = (recorded.get('mean_control', preset.raw('mean_photons_control')),
                 recorded.get('mean_target', preset.raw('mean_photons_target')))
    return Calibration(eta_d, means)


def cmd_spectrum_gen(args, preset: Preset, run_config: RunConfig) -> Dict:
    cavity = preset.cavity()
    eit = preset.eit()
    if args.no_coupling:
        eit = replace(eit, rabi=0.0)
    span = mhz_to_angular(_option(args, run_config, 'span_mhz', 40.0))
    points = _option(args, run_config, 'points', 201)
    grid = np.linspace(-span, span, points)
    rng = np.random.default_rng(_seed(args, run_config))
    spectrum = synthetic_spectrum(eit, cavity, grid, _option(args, run_config, 'intensity_noise', 0.01),
                                  _option(args, run_config, 'phase_noise_mrad', 20.0) * 1e-3, rng)
    if args.output:
        save_spectrum_csv(spectrum, args.output)
    return {
        'points': len(spectrum),
        'advisory_points': sum(point.advisory for point in spectrum),
        'eit': eit.to_dict(),
        'cavity': cavity.to_dict(),
        'reflection_resonant': reflection(eit, cavity),
        'conditional_phase_rad': conditional_phase(preset.eit(), cavity),
        'output': args.output,
    }


def cmd_spectrum_fit(args, preset: Preset, run_config: RunConfig) -> Dict:
    if not args.input:
        raise ConfigError("spectrum-fit needs --input")
    points = load_spectrum_csv(args.input)
    initial = preset.eit()
    if args.C is not None:
        initial = replace(initial, cooperativity=args.C)
    if args.rabi_mhz is not None:
        initial = replace(initial, rabi=mhz_to_angular(args.rabi_mhz))
    if args.gamma_rg_inv_us is not None:
        initial = replace(initial, gamma_rg=rate_from_lifetime_us(args.gamma_rg_inv_us))
    result = fit_spectrum(points, args.stage, preset.cavity(), initial)
    report = result.to_dict()
    errors = result.errors
    report['summary'] = {
        'C': result.params.cooperativity,
        'C_err': errors.get('cooperativity'),
        'rabi_MHz': angular_to_mhz(result.params.rabi),
        'rabi_err_MHz': angular_to_mhz(errors['rabi']) if 'rabi' in errors else None,
        'coherence_time_us': (lifetime_us_from_rate(result.params.gamma_rg)
                              if result.params.gamma_rg > 0 else None),
    }
    return report


def cmd_sr_efficiency(args, preset: Preset, run_config: RunConfig) -> Dict:
    cooperativity = _option(args, run_config, 'C', None)
    if cooperativity is None:
        cooperativity = preset.raw('sr_cooperativity')
    kappa_ratio = _option(args, run_config, 'kin_ratio', None)
    if kappa_ratio is None:
        kappa_ratio = preset.cavity().kappa_ratio
    lifetime = _option(args, run_config, 'gamma_rg_inv_us', None)
    if lifetime is None:
        lifetime = preset.raw('sr_coherence_time')
    duration = _option(args, run_config, 't_us', None)
    if duration is None:
        duration = preset.raw('sr_duration')
    gamma_rg = 0.0 if math.isinf(lifetime) else rate_from_lifetime_us(lifetime)
    eta_sr = storage_retrieval_efficiency(cooperativity, kappa_ratio, gamma_rg, us_to_s(duration))
    report = {
        'C': cooperativity,
        'kappa_in_over_kappa': kappa_ratio,
        'coherence_time_us': lifetime,
        'duration_us': duration,
        'eta_sr': eta_sr,
        'eta_sr_without_decay': storage_retrieval_efficiency(cooperativity, kappa_ratio, 0.0, 0.0),
    }
    if preset.has('fiber_length') and preset.has('fiber_attenuation'):
        # eta_f of the delay line
        report['fiber_transmission'] = fiber_transmission(preset.raw('fiber_length'),
                                                          preset.raw('fiber_attenuation'))
    return report


def cmd_blockade(args, preset: Preset, run_config: RunConfig) -> Dict:
    eit = preset.eit()
    blockade = preset.blockade()
    if args.gamma_f_inv_ns is not None:
        gamma_f = 1.0 / (args.gamma_f_inv_ns * 1e-9)
    else:
        gamma_f = forster_gamma_estimate(eit.gamma_rg, blockade)
    blockade = replace(blockade, gamma_forster=gamma_f)
    rabi = mhz_to_angular(args.rabi_mhz) if args.rabi_mhz is not None else eit.rabi
    cooperativity = args.C if args.C is not None else eit.cooperativity
    radius = blockade_radius(blockade, cooperativity, rabi, preset.cavity().atomic_decay)
    return {
        'gamma_F_inv_ns': 1e9 / gamma_f,
        'rabi_MHz': angular_to_mhz(rabi),
        'C': cooperativity,
        'R_block_um': m_to_um(radius),
    }


def cmd_coupling(args, preset: Preset, run_config: RunConfig) -> Dict:
    cavity = preset.cavity()
    result = coupling_and_cooperativity(preset.geometry(), cavity)
    return {
        'cavity': cavity.to_dict(),
        'g_formula_MHz': angular_to_mhz(result['g_formula']),
        'g_MHz': angular_to_mhz(result['g']),
        'single_atom_cooperativity': result['single_atom_cooperativity'],
        'transverse_factor': result['transverse_factor'],
        'cooperativity_max': result['cooperativity_max'],
        'cooperativity_estimate': result['cooperativity_estimate'],
    }


def _gate_params(args, preset: Preset) -> GateParams:
    if args.physical:
        gate = GateParams.from_physical(preset.physical(), preset.raw('visibility_control'),
                                        preset.raw('visibility_target'))
    else:
        gate = preset.gate()
    etas = tuple(args.etas) if args.etas else gate.etas
    v_c = args.vc if args.vc is not None else gate.visibility_control
    v_t = args.vt if args.vt is not None else gate.visibility_target
    return GateParams(etas, v_c, v_t)


def cmd_gate_model(args, preset: Preset, run_config: RunConfig) -> Dict:
    gate = _gate_params(args, preset)
    xi = xi_model(gate)
    result = {
        'params': gate.to_dict(),
        'xi_postselected': xi.to_dict(),
        'fidelities': fidelities_from_xi(xi),
        'dd_output': dd_output_prediction(gate),
        'truth_tables': {basis: truth_table(gate, basis).to_dict() for basis in ('cphase', 'cnot')},
    }
    if preset.has('process_fidelity_measured'):
        result['process_fidelity_measured'] = preset.raw('process_fidelity_measured')
    if args.monte_carlo:
        rng = np.random.default_rng(_seed(args, run_config))
        sampled = xi_monte_carlo(gate, args.monte_carlo, rng, args.phase_law)
        result['monte_carlo'] = {
            'samples': args.monte_carlo,
            'max_deviation': float(np.abs(sampled.entries - xi.entries).max()),
        }
    if args.counts:
        counts = CountsTable.load(args.counts)
        result['measured_truth_table'] = truth_table_from_counts(counts, args.basis).to_dict()
    if args.plot_data:
        table = truth_table(gate, args.basis)
        write_csv(args.plot_data, ['input', 'output', 'probability'],
                  [(label, output, table.probabilities[i, j])
                   for i, label in enumerate(table.labels) for j, output in enumerate(table.labels)])
    return result


def cmd_tomo_state(args, preset: Preset, run_config: RunConfig) -> Dict:
    counts = CountsTable.load(args.counts)
    rho = state_tomography(counts, _calibration(args, preset, counts), args.input_label)
    return {
        'trace': rho.trace,
        'eigenvalues': rho.eigenvalues(),
        'rho_real': rho.entries.real,
        'rho_imag': rho.entries.imag,
        'invariant_violations': rho.check_invariants(),
    }


def cmd_tomo_process(args, preset: Preset, run_config: RunConfig) -> Dict:
    counts = CountsTable.load(args.counts)
    calibration = _calibration(args, preset, counts)
    unitary = cphase_unitary()
    result = process_tomography(counts, calibration, unitary)
    report = result.to_dict()
    report['calibration'] = calibration.to_dict()
    report['invariant_violations'] = result.chi.check_invariants()
    if args.bootstrap:
        rng = np.random.default_rng(_seed(args, run_config))

        def statistic(table: CountsTable) -> Dict[str, float]:
            resampled = process_tomography(table, calibration, unitary)
            return {'process_fidelity_postselected': resampled.fidelity_postselected,
                    'average_efficiency': resampled.eta_bar}

        report['standard_errors'] = bootstrap_standard_errors(counts, statistic, args.bootstrap, rng)
    return report


def cmd_tomo_efficiency(args, preset: Preset, run_config: RunConfig) -> Dict:
    counts = CountsTable.load(args.counts)
    theta = efficiency_tomography(counts, _calibration(args, preset, counts))
    return {
        'theta_real': theta.entries.real,
        'theta_imag': theta.entries.imag,
        'spectrum': efficiency_spectrum(theta),
    }


def cmd_ghz_analyze(args, preset: Preset, run_config: RunConfig) -> Dict:
    counts = CountsTable.load(args.counts)
    summary = ghz_summary_from_counts(counts, args.photons, args.method)
    if args.plot_data:
        save_parity_csv(parity_dataset_from_counts(counts, args.photons), args.plot_data)
    return summary.to_dict()


def cmd_ghz_model(args, preset: Preset, run_config: RunConfig) -> Dict:
    physical = preset.physical()
    v_c = args.vc if args.vc is not None else preset.raw('visibility_control_ghz')
    v_t = args.vt if args.vt is not None else preset.raw('visibility_target')
    measured = preset.measured('ghz_fidelity')
    rng = np.random.default_rng(_seed(args, run_config))
    rows = []
    for n in args.photons:
        row = ghz_closed_forms(physical, v_c, v_t, n)
        if args.monte_carlo:
            row['monte_carlo'] = monte_carlo_ghz(physical, v_c, v_t, n, args.monte_carlo, rng,
                                                 args.phase_law)
        if n in measured:
            row['fidelity_measured'] = measured[n]
        rows.append(row)
    if args.plot_data:
        write_csv(args.plot_data, ['N', 'efficiency', 'p_H', 'p_V', 'coherence', 'fidelity'],
                  [(row['n_photons'], row['efficiency'], row['p_H'], row['p_V'],
                    row['coherence'], row['fidelity']) for row in rows])
    return {'visibility_control': v_c, 'visibility_target': v_t, 'models': rows}


def _rate_table(predicted: Dict[int, float], measured: Dict[int, float]) -> List[Dict]:
    table = []
    for n, value in predicted.items():
        row = {'N': n, 'predicted': value}
        if n in measured:
            row['measured'] = measured[n]
            row['ratio'] = value / measured[n]
        table.append(row)
    return table


def cmd_rates(args, preset: Preset, run_config: RunConfig) -> Dict:
    rates = preset.rates()
    photon_numbers = range(1, args.max_photons + 1)
    measured = preset.measured('measured_rate')
    eta_bar = preset.gate().eta_bar
    per_pair = two_photon_rate(rates.repetition_rate, rates.detection_efficiency, eta_bar)
    result = {
        'rates': _rate_table(coincidence_rates(rates, photon_numbers), measured),
        'two_photon_rate_per_pair': per_pair,
        'two_photon_rate': two_photon_rate(rates.repetition_rate, rates.detection_efficiency, eta_bar,
                                           preset.raw('pair_mean_control') * preset.raw('pair_mean_target')),
    }
    if preset.has('mean_photons_control') and preset.has('mean_photons_target'):
        # detected means rebuilt from the efficiency budget instead of the rough estimates
        from_parts = RateParams.from_parts(rates.repetition_rate, rates.detection_efficiency,
                                           preset.physical(), preset.raw('mean_photons_control'),
                                           preset.raw('mean_photons_target'))
        result['from_efficiency_budget'] = {
            'detected_control_mean': from_parts.mean_control,
            'detected_target_mean': from_parts.mean_target,
            'rates': _rate_table(coincidence_rates(from_parts, photon_numbers), measured),
        }
    if preset.has('repetitions_per_cycle') and preset.has('cycle_time'):
        repetition = average_repetition_rate(preset.raw('repetitions_per_cycle'), preset.value('cycle_time'))
        result['average_repetition_rate'] = repetition
        if preset.has('prior_cycle_time'):
            prior_rate = average_repetition_rate(preset.raw('repetitions_per_cycle'),
                                                 preset.value('prior_cycle_time'))
            prior_eta = harmonic_mean_efficiency(
                [preset.raw('prior_eta_' + label) for label in ('hh', 'hv', 'vh', 'vv')])
            result['improvement_over_prior'] = {
                'prior_average_repetition_rate': prior_rate,
                'prior_efficiency': prior_eta,
                'factor': coincidence_improvement_factor(
                    repetition / prior_rate,
                    rates.detection_efficiency / preset.raw('prior_detection_efficiency'),
                    eta_bar / prior_eta),
            }
    return result


def _plan(args, run_config: RunConfig):
    name = _option(args, run_config, 'plan', 'tomography')
    if name == 'tomography':
        return tomography_plan(), 1
    if name == 'parity':
        return parity_plan(args.photons), args.photons - 1
    if name in ('truth-cphase', 'truth-cnot'):
        return truth_table_plan(name.split('-')[1]), 1
    plan = load_plan(name)
    return plan, len(plan[0][0]) - 1


def cmd_sim_run(args, preset: Preset, run_config: RunConfig) -> Dict:
    if not args.output:
        raise ConfigError("sim-run needs --output for the counts table")
    plan, n_targets = _plan(args, run_config)
    gate = _gate_params(args, preset)
    config = SimConfig(
        gate=gate,
        plan=plan,
        shots=_option(args, run_config, 'shots', 100000),
        n_targets=n_targets,
        mode=_option(args, run_config, 'mode', 'single'),
        mean_control=preset.raw('mean_photons_control'),
        mean_target=preset.raw('mean_photons_target'),
        detection_efficiency=(args.detection_efficiency if args.detection_efficiency is not None
                              else preset.raw('detection_efficiency')),
        dark_count_probability=_option(args, run_config, 'dark_count', 0.0),
        phase_law=args.phase_law,
        seed=_seed(args, run_config),
        workers=_option(args, run_config, 'workers', 1),
    )
    counts = run(config)
    counts.save(args.output)
    fractions = postselected_fractions(counts)
    return {
        'output': args.output,
        'cells': len(plan),
        'postselected_fraction_mean': float(np.mean(list(fractions.values()))),
        'sim_config': config.to_dict(),
    }


COMMANDS = {
    'spectrum-gen': cmd_spectrum_gen,
    'spectrum-fit': cmd_spectrum_fit,
    'sr-efficiency': cmd_sr_efficiency,
    'blockade': cmd_blockade,
    'coupling': cmd_coupling,
    'gate-model': cmd_gate_model,
    'tomo-state': cmd_tomo_state,
    'tomo-process': cmd_tomo_process,
    'tomo-efficiency': cmd_tomo_efficiency,
    'ghz-analyze': cmd_ghz_analyze,
    'ghz-model': cmd_ghz_model,
    'rates': cmd_rates,
    'sim-run': cmd_sim_run,
}

STOCHASTIC = {'spectrum-gen', 'sim-run', 'ghz-model', 'gate-model', 'tomo-process'}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Cavity-Rydberg photon-photon gate lab')
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--preset', default=None, help='bundled parameter preset (default: paper)')
    common.add_argument('--config', default=None, help='run config JSON')
    common.add_argument('--out', default=None, help='report path, stdout by default')
    common.add_argument('--seed', type=int, default=None)
    common.add_argument('-v', '--verbose', action='count', default=0)

    counts_input = argparse.ArgumentParser(add_help=False)
    counts_input.add_argument('--counts', required=True, help='counts table CSV')
    counts_input.add_argument('--detection-efficiency', type=float, default=None)
    counts_input.add_argument('--poissonian', action='store_true',
                              help='normalize with Poissonian source statistics')

    gate_input = argparse.ArgumentParser(add_help=False)
    gate_input.add_argument('--etas', type=float, nargs=4, default=None,
                            help='efficiencies of HH, HV, VH, VV')
    gate_input.add_argument('--vc', type=float, default=None, help='control visibility')
    gate_input.add_argument('--vt', type=float, default=None, help='target visibility')
    gate_input.add_argument('--physical', action='store_true',
                            help='use the physical efficiency decomposition')
    gate_input.add_argument('--phase-law', choices=['gaussian', 'two_point'], default='gaussian')

    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('spectrum-gen', parents=[common], help='synthetic reflection spectrum')
    p.add_argument('--output', default=None, help='spectrum CSV')
    p.add_argument('--no-coupling', action='store_true', help='absorption spectrum (Omega = 0)')
    p.add_argument('--span-mhz', type=float, default=None)
    p.add_argument('--points', type=int, default=None)
    p.add_argument('--intensity-noise', type=float, default=None)
    p.add_argument('--phase-noise-mrad', type=float, default=None)

    p = sub.add_parser('spectrum-fit', parents=[common], help='fit a measured spectrum')
    p.add_argument('--input', default=None, help='spectrum CSV')
    p.add_argument('--stage', choices=['absorption', 'eit'], default='eit')
    p.add_argument('--C', type=float, default=None)
    p.add_argument('--rabi-mhz', type=float, default=None)
    p.add_argument('--gamma-rg-inv-us', type=float, default=None)

    p = sub.add_parser('sr-efficiency', parents=[common], help='storage-plus-retrieval efficiency')
    p.add_argument('--C', type=float, default=None)
    p.add_argument('--kin-ratio', type=float, default=None)
    p.add_argument('--gamma-rg-inv-us', type=float, default=None, help="'inf' for no decay")
    p.add_argument('--t-us', type=float, default=None)

    p = sub.add_parser('blockade', parents=[common], help='blockade radius')
    p.add_argument('--rabi-mhz', type=float, default=None)
    p.add_argument('--C', type=float, default=None)
    p.add_argument('--gamma-f-inv-ns', type=float, default=None)

    sub.add_parser('coupling', parents=[common], help='coupling and cooperativity estimate')

    p = sub.add_parser('gate-model', parents=[common, gate_input], help='phase-noise gate model')
    p.add_argument('--monte-carlo', type=_shots, default=None, help='samples for the Monte Carlo check')
    p.add_argument('--counts', default=None, help='truth-table counts to compare')
    p.add_argument('--basis', choices=['cphase', 'cnot'], default='cphase')
    p.add_argument('--plot-data', default=None, help='truth-table CSV')

    p = sub.add_parser('tomo-state', parents=[common, counts_input], help='state tomography')
    p.add_argument('--input-label', default=None)

    p = sub.add_parser('tomo-process', parents=[common, counts_input], help='process tomography')
    p.add_argument('--bootstrap', type=int, default=0, help='resamples for standard errors')

    sub.add_parser('tomo-efficiency', parents=[common, counts_input], help='efficiency tomography')

    p = sub.add_parser('ghz-analyze', parents=[common], help='GHZ fidelity from parity counts')
    p.add_argument('--counts', required=True)
    p.add_argument('--photons', type=int, required=True)
    p.add_argument('--method', choices=['alternating', 'fit'], default=None)
    p.add_argument('--plot-data', default=None, help='parity CSV')

    p = sub.add_parser('ghz-model', parents=[common], help='closed-form GHZ model')
    p.add_argument('--photons', type=int, nargs='+', default=[2, 3, 4, 5, 6])
    p.add_argument('--vc', type=float, default=None)
    p.add_argument('--vt', type=float, default=None)
    p.add_argument('--monte-carlo', type=_shots, default=None)
    p.add_argument('--phase-law', choices=['gaussian', 'two_point'], default='gaussian')
    p.add_argument('--plot-data', default=None)

    p = sub.add_parser('rates', parents=[common], help='coincidence-rate model')
    p.add_argument('--max-photons', type=int, default=5)

    p = sub.add_parser('sim-run', parents=[common, gate_input], help='simulate a measurement plan')
    p.add_argument('--plan', default=None,
                   help="tomography, parity, truth-cphase, truth-cnot or a plan CSV")
    p.add_argument('--photons', type=int, default=3, help='photons of a parity plan')
    p.add_argument('--shots', type=_shots, default=None, help='invocations per cell')
    p.add_argument('--mode', choices=['single', 'poissonian'], default=None)
    p.add_argument('--detection-efficiency', type=float, default=None)
    p.add_argument('--dark-count', type=float, default=None)
    p.add_argument('--workers', type=int, default=None)
    p.add_argument('--output', default=None, help='counts CSV')
    return parser


def configure_logging(verbosity: int):
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        run_config = load_run_config(args.config)
        if args.preset is not None:
            run_config.preset = args.preset
        preset = run_config.resolve(PresetManager())
        result = COMMANDS[args.command](args, preset, run_config)
        config = {
            'preset': preset.to_dict(),
            'run_config': run_config.to_dict(),
            'arguments': {key: value for key, value in sorted(vars(args).items())
                          if key not in ('out', 'verbose')},
        }
        seed = _seed(args, run_config) if args.command in STOCHASTIC else None
        write_report(build_report(args.command, config, seed, result), args.out)
    except LabError as e:
        sys.stderr.write(e.diagnostic() + '\n')
        return e.exit_code.value
    return ExitCode.OK.value


if __name__ == "__main__":
    sys.exit(main())
