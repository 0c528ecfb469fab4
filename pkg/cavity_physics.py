"""
Cavity-Rydberg-EIT forward models and spectrum fits
Finesse and decay-rate bookkeeping, the complex reflection of the single-mode
cavity, storage/retrieval efficiency, blockade radius and the coupling estimate.
All quantities are SI (rad/s, 1/s, s, m); see units.py for the boundary.
"""

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import constants
from scipy.optimize import minimize

from errors import (DegenerateDataError, FitConvergenceError, FitPreconditionError,
                    InconsistentParamsError, OverdeterminedParamsError,
                    SingularDenominatorError, UnderdeterminedParamsError, ValidationError)
from units import angular_to_mhz, mhz_to_angular

logger = logging.getLogger(__name__)

# 87Rb D2 line, full width of the excited state
GAMMA_E = mhz_to_angular(6.0666)

ATOMIC_UNIT_POLARIZABILITY = constants.physical_constants['atomic unit of electric polarizability'][0]

FINESSE_TOLERANCE = 1e-6


@dataclass
class CavityParams:
    """
    Single-mode cavity with an input coupler and highly reflecting mirrors

    Decay rates are HWHM of the field, kappa = kappa_in + kappa_hr.
    """
    axial_mode_spacing: float
    finesse: float
    finesse_in: float
    finesse_hr: float
    atomic_decay: float = GAMMA_E
    coupling: Optional[float] = None
    hr_mirrors: int = 3

    @property
    def kappa(self) -> float:
        return self.axial_mode_spacing / (2.0 * self.finesse)

    @property
    def kappa_in(self) -> float:
        return self.axial_mode_spacing / (2.0 * self.finesse_in)

    @property
    def kappa_hr(self) -> float:
        return self.axial_mode_spacing / (2.0 * self.finesse_hr)

    @property
    def kappa_ratio(self) -> float:
        return self.kappa_in / self.kappa

    @property
    def r_in_intensity(self) -> float:
        return math.exp(-2.0 * math.pi / self.finesse_in)

    @property
    def r_hr_intensity(self) -> float:
        return math.exp(-2.0 * math.pi / self.finesse_hr)

    @property
    def hr_mirror_intensity(self) -> float:
        """Intensity reflectivity of each of the HR mirrors"""
        return self.r_hr_intensity ** (1.0 / self.hr_mirrors)

    @property
    def atomic_halfwidth(self) -> float:
        return self.atomic_decay / 2.0

    @property
    def single_atom_cooperativity(self) -> Optional[float]:
        if self.coupling is None:
            return None
        return self.coupling ** 2 / (self.kappa * self.atomic_halfwidth)

    def to_dict(self) -> Dict:
        return {
            'axial_mode_spacing_MHz': angular_to_mhz(self.axial_mode_spacing),
            'finesse': self.finesse,
            'finesse_in': self.finesse_in,
            'finesse_hr': self.finesse_hr,
            'kappa_MHz': angular_to_mhz(self.kappa),
            'kappa_in_MHz': angular_to_mhz(self.kappa_in),
            'kappa_hr_MHz': angular_to_mhz(self.kappa_hr),
            'r_in_intensity': self.r_in_intensity,
            'r_hr_intensity': self.r_hr_intensity,
            'hr_mirror_intensity': self.hr_mirror_intensity,
            'atomic_decay_MHz': angular_to_mhz(self.atomic_decay),
        }


@dataclass
class EitParams:
    """Atomic-ensemble parameters entering the effective cooperativity"""
    cooperativity: float
    rabi: float = 0.0
    gamma_rg: float = 0.0
    signal_detuning: float = 0.0
    coupling_detuning: float = 0.0
    cavity_detuning: float = 0.0

    def __post_init__(self):
        if self.cooperativity < 0 or self.rabi < 0 or self.gamma_rg < 0:
            raise ValidationError("cooperativity, Rabi frequency and gamma_rg must be non-negative")

    def to_dict(self) -> Dict:
        return {
            'cooperativity': self.cooperativity,
            'rabi_MHz': angular_to_mhz(self.rabi),
            'gamma_rg_per_s': self.gamma_rg,
            'coherence_time_us': 1e6 / self.gamma_rg if self.gamma_rg > 0 else None,
            'signal_detuning_MHz': angular_to_mhz(self.signal_detuning),
            'coupling_detuning_MHz': angular_to_mhz(self.coupling_detuning),
            'cavity_detuning_MHz': angular_to_mhz(self.cavity_detuning),
        }


@dataclass
class SpectrumPoint:
    """One cavity detuning with the modeled and/or measured reflection"""
    detuning: float
    reflection: Optional[complex] = None
    intensity: Optional[float] = None
    intensity_err: Optional[float] = None
    phase: Optional[float] = None
    phase_err: Optional[float] = None
    advisory: bool = False


@dataclass
class BlockadeParams:
    """Foerster-resonant pair interaction and the static polarizabilities"""
    c3: float
    forster_defect: float = 0.0
    gamma_forster: Optional[float] = None
    alpha_r_prime: float = 0.15e12 * ATOMIC_UNIT_POLARIZABILITY
    alpha_r: float = 0.20e12 * ATOMIC_UNIT_POLARIZABILITY
    alpha_gamma_prime: float = 1.9e12 * ATOMIC_UNIT_POLARIZABILITY

    def __post_init__(self):
        if self.c3 <= 0:
            raise ValidationError("C3 must be positive")
        if self.gamma_forster is not None and self.gamma_forster <= 0:
            raise ValidationError("gamma_F must be positive")


@dataclass
class GeometryParams:
    """Cavity mode and atomic-cloud geometry for the coupling estimate"""
    waist: float
    round_trip_length: float
    sigma_x: float
    sigma_y: float
    atom_number: float
    dipole_moment: float
    transition_frequency: float
    measured_coupling: Optional[float] = None

    def __post_init__(self):
        lengths = (self.waist, self.round_trip_length, self.sigma_x, self.sigma_y)
        if any(length <= 0 for length in lengths):
            raise ValidationError("all geometry lengths must be positive")


@dataclass
class FitResult:
    """Best fit of a spectrum stage with curvature-derived errors"""
    params: EitParams
    free: List[str]
    errors: Dict[str, float]
    chi_square: float
    reduced_chi_square: float
    n_points: int
    covariance: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> Dict:
        return {
            'params': self.params.to_dict(),
            'free': list(self.free),
            'errors': dict(self.errors),
            'chi_square': self.chi_square,
            'reduced_chisq': self.reduced_chi_square,
            'n_points': self.n_points,
        }


def complete_cavity_params(axial_mode_spacing: float,
                           finesse: Optional[float] = None,
                           finesse_in: Optional[float] = None,
                           finesse_hr: Optional[float] = None,
                           kappa: Optional[float] = None,
                           kappa_in: Optional[float] = None,
                           kappa_hr: Optional[float] = None,
                           atomic_decay: float = GAMMA_E,
                           coupling: Optional[float] = None,
                           hr_mirrors: int = 3) -> CavityParams:
    """
    Fill in the finesses from any two of them (or the matching decay rates)

    Args:
        axial_mode_spacing: Free spectral range in rad/s
        finesse, finesse_in, finesse_hr: Total, input-coupler and HR finesse
        kappa, kappa_in, kappa_hr: The same information as HWHM decay rates in rad/s

    Raises:
        OverdeterminedParamsError: a quantity given both as finesse and as rate
        UnderdeterminedParamsError: fewer than two quantities given
        InconsistentParamsError: three given that violate 1/F = 1/F_in + 1/F_H
    """
    if axial_mode_spacing <= 0:
        raise ValidationError("axial mode spacing must be positive")

    values = {}
    for name, f_value, k_value in (('F', finesse, kappa),
                                   ('F_in', finesse_in, kappa_in),
                                   ('F_H', finesse_hr, kappa_hr)):
        if f_value is not None and k_value is not None:
            raise OverdeterminedParamsError(f"{name} given both as finesse and as decay rate")
        if k_value is not None:
            if k_value <= 0:
                raise ValidationError(f"decay rate for {name} must be positive")
            f_value = axial_mode_spacing / (2.0 * k_value)
        if f_value is not None:
            if f_value <= 0:
                raise ValidationError(f"{name} must be positive")
            values[name] = f_value

    if len(values) < 2:
        raise UnderdeterminedParamsError(f"need two of F, F_in, F_H; got {sorted(values)}")

    if len(values) == 3:
        lhs = 1.0 / values['F']
        rhs = 1.0 / values['F_in'] + 1.0 / values['F_H']
        if abs(lhs - rhs) > FINESSE_TOLERANCE * lhs:
            raise InconsistentParamsError(
                f"1/F = {lhs:.9g} but 1/F_in + 1/F_H = {rhs:.9g}"
            )
    elif 'F' not in values:
        values['F'] = 1.0 / (1.0 / values['F_in'] + 1.0 / values['F_H'])
    else:
        known, missing = ('F_in', 'F_H') if 'F_in' in values else ('F_H', 'F_in')
        inverse = 1.0 / values['F'] - 1.0 / values[known]
        if inverse <= 0:
            raise InconsistentParamsError(f"{known} must exceed the total finesse")
        values[missing] = 1.0 / inverse

    return CavityParams(axial_mode_spacing, values['F'], values['F_in'], values['F_H'],
                        atomic_decay=atomic_decay, coupling=coupling, hr_mirrors=hr_mirrors)


def effective_cooperativity(eit: EitParams, atomic_decay: float = GAMMA_E,
                            signal_detuning=None):
    """
    C_eff = C Gamma_e / (Gamma_e - 2i Delta_s + |Omega|^2 / (gamma_rg - 2i(Delta_co + Delta_s)))

    Args:
        eit: Ensemble parameters
        atomic_decay: Gamma_e in rad/s
        signal_detuning: Optional array of Delta_s overriding eit.signal_detuning

    Raises:
        SingularDenominatorError: gamma_rg = 0 with compensating detunings, or a zero denominator
    """
    delta_s = np.asarray(eit.signal_detuning if signal_detuning is None else signal_detuning, dtype=float)
    denominator = atomic_decay - 2j * delta_s
    if eit.rabi > 0:
        inner = eit.gamma_rg - 2j * (eit.coupling_detuning + delta_s)
        if np.any(np.abs(inner) == 0):
            raise SingularDenominatorError("gamma_rg = 0 with Delta_co + Delta_s = 0")
        denominator = denominator + eit.rabi ** 2 / inner
    if np.any(np.abs(denominator) == 0):
        raise SingularDenominatorError("effective cooperativity denominator vanishes")
    result = eit.cooperativity * atomic_decay / denominator
    return complex(result) if result.ndim == 0 else result


def single_mode_valid(c_eff, finesse: float):
    """The single-axial-mode model holds while |C_eff| < F/pi"""
    return np.abs(c_eff) < finesse / math.pi


def _reflection_from_c_eff(c_eff, cavity: CavityParams, cavity_detuning):
    return -1.0 + 2.0 * cavity.kappa_in / (cavity.kappa * (1.0 + c_eff) - 1j * cavity_detuning)


def reflection(eit: EitParams, cavity: CavityParams) -> complex:
    """Complex reflection amplitude R = -1 + 2 kappa_in / (kappa (1 + C_eff) - i Delta_c)"""
    c_eff = effective_cooperativity(eit, cavity.atomic_decay)
    if not single_mode_valid(c_eff, cavity.finesse):
        logger.warning("|C_eff| = %.3g exceeds F/pi: single-mode model is outside its validity",
                       abs(c_eff))
    return complex(_reflection_from_c_eff(c_eff, cavity, eit.cavity_detuning))


def spectrum(eit: EitParams, cavity: CavityParams, grid: Sequence[float],
             atom_cavity_offset: float = 0.0, phase_offset: float = 0.0) -> List[SpectrumPoint]:
    """
    Reflection over a grid of cavity detunings with Delta_s = Delta_c + offset

    Args:
        grid: Cavity detunings Delta_c in rad/s
        atom_cavity_offset: Constant added to Delta_c to give Delta_s (mode splitting)
        phase_offset: Convention offset added to arg(R) in the reported phase
    """
    grid = np.asarray(grid, dtype=float)
    if not np.all(np.isfinite(grid)):
        raise ValidationError("spectrum grid must be finite")
    c_eff = effective_cooperativity(eit, cavity.atomic_decay, signal_detuning=grid + atom_cavity_offset)
    amplitudes = _reflection_from_c_eff(c_eff, cavity, grid)
    valid = single_mode_valid(c_eff, cavity.finesse)
    phases = np.angle(amplitudes * np.exp(1j * phase_offset))
    return [SpectrumPoint(detuning=float(d), reflection=complex(r), intensity=float(abs(r) ** 2),
                          phase=float(p), advisory=not bool(v))
            for d, r, p, v in zip(grid, amplitudes, phases, valid)]


def conditional_phase(eit: EitParams, cavity: CavityParams) -> float:
    """|arg R(Omega = 0) - arg R(Omega)| at the chosen detunings, folded into [0, pi]"""
    blocked = reflection(replace(eit, rabi=0.0), cavity)
    transparent = reflection(eit, cavity)
    difference = abs(np.angle(blocked) - np.angle(transparent)) % (2.0 * math.pi)
    return float(2.0 * math.pi - difference if difference > math.pi else difference)


def synthetic_spectrum(eit: EitParams, cavity: CavityParams, grid: Sequence[float],
                       intensity_noise: float, phase_noise: float,
                       rng: np.random.Generator, atom_cavity_offset: float = 0.0,
                       phase_offset: float = 0.0) -> List[SpectrumPoint]:
    """Model spectrum with Gaussian noise; the noise levels are reported as errors"""
    points = spectrum(eit, cavity, grid, atom_cavity_offset, phase_offset)
    for point in points:
        point.intensity += intensity_noise * rng.standard_normal()
        point.phase = float(np.angle(np.exp(1j * (point.phase + phase_noise * rng.standard_normal()))))
        point.intensity_err = intensity_noise
        point.phase_err = phase_noise
    return points


def save_spectrum_csv(points: Sequence[SpectrumPoint], path: str):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['detuning_MHz', 'intensity', 'intensity_err', 'phase_rad', 'phase_err'])
        for point in points:
            writer.writerow([repr(angular_to_mhz(point.detuning)), repr(point.intensity),
                             repr(point.intensity_err or 0.0), repr(point.phase),
                             repr(point.phase_err or 0.0)])


def load_spectrum_csv(path: str) -> List[SpectrumPoint]:
    points = []
    with open(path, 'r', newline='') as f:
        for row in csv.DictReader(f):
            points.append(SpectrumPoint(
                detuning=mhz_to_angular(float(row['detuning_MHz'])),
                intensity=float(row['intensity']),
                intensity_err=float(row['intensity_err']),
                phase=float(row['phase_rad']),
                phase_err=float(row['phase_err']),
            ))
    logger.info("Loaded spectrum: %s (%d points)", path, len(points))
    return points


FIT_STAGES = {
    'absorption': ['cooperativity'],
    'eit': ['rabi', 'gamma_rg'],
}
FITTABLE = ('cooperativity', 'rabi', 'gamma_rg', 'coupling_detuning')


def _fit_scale(name: str, value: float) -> float:
    if value != 0:
        return abs(value)
    return mhz_to_angular(1.0) if name in ('rabi', 'coupling_detuning') else 1.0


def _numerical_hessian(func, x: np.ndarray, step: float = 1e-4) -> np.ndarray:
    """Central-difference Hessian of a scalar function"""
    n = x.size
    hessian = np.zeros((n, n))
    f0 = func(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = step
        hessian[i, i] = (func(x + ei) - 2.0 * f0 + func(x - ei)) / step ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = step
            value = (func(x + ei + ej) - func(x + ei - ej) - func(x - ei + ej) + func(x - ei - ej))
            hessian[i, j] = hessian[j, i] = value / (4.0 * step ** 2)
    return hessian


def fit_spectrum(points: Sequence[SpectrumPoint], stage: str, cavity: CavityParams,
                 initial: EitParams, free: Optional[Sequence[str]] = None,
                 atom_cavity_offset: float = 0.0, phase_offset: float = 0.0,
                 max_restarts: int = 3) -> FitResult:
    """
    Weighted least squares of |R|^2 and wrapped arg(R) with a restarted simplex

    Args:
        points: Measured points, each with intensity, phase and positive errors
        stage: 'absorption' (frees C, Omega = 0) or 'eit' (frees Omega, gamma_rg)
        cavity: Fixed cavity parameters including Gamma_e
        initial: Starting guess; parameters not freed stay at these values
        free: Override of the freed parameter names

    Raises:
        FitPreconditionError: unknown stage, nothing to fit, too few points or missing errors
        DegenerateDataError: all points identical
        FitConvergenceError: simplex did not converge
    """
    if stage not in FIT_STAGES:
        raise FitPreconditionError(f"unknown fit stage {stage!r}")
    free = list(FIT_STAGES[stage] if free is None else free)
    if not free:
        raise FitPreconditionError("no free parameters requested")
    unknown = [name for name in free if name not in FITTABLE]
    if unknown:
        raise FitPreconditionError(f"cannot fit {unknown}")
    if len(points) < 3 * len(free):
        raise FitPreconditionError(f"need at least {3 * len(free)} points, got {len(points)}")
    for point in points:
        if point.intensity is None or point.phase is None:
            raise FitPreconditionError("every point needs a measured intensity and phase")
        if not point.intensity_err or not point.phase_err or point.intensity_err <= 0 or point.phase_err <= 0:
            raise FitPreconditionError("every point needs positive standard errors")

    detunings = np.array([p.detuning for p in points])
    intensities = np.array([p.intensity for p in points])
    phases = np.array([p.phase for p in points])
    if np.ptp(detunings) == 0 and np.ptp(intensities) == 0 and np.ptp(phases) == 0:
        raise DegenerateDataError("all spectrum points are identical")
    intensity_err = np.array([p.intensity_err for p in points])
    phase_err = np.array([p.phase_err for p in points])

    base = replace(initial, rabi=0.0) if stage == 'absorption' and 'rabi' not in free else initial
    scales = np.array([_fit_scale(name, getattr(base, name)) for name in free])
    x0 = np.array([getattr(base, name) for name in free]) / scales

    def params_at(x: np.ndarray) -> EitParams:
        return replace(base, **{name: float(v * s) for name, v, s in zip(free, x, scales)})

    def chi_square(x: np.ndarray) -> float:
        values = x * scales
        for name, value in zip(free, values):
            if name != 'coupling_detuning' and value < 0:
                return 1e30
        try:
            params = params_at(x)
            c_eff = effective_cooperativity(params, cavity.atomic_decay,
                                            signal_detuning=detunings + atom_cavity_offset)
        except (SingularDenominatorError, ValidationError):
            return 1e30
        model = _reflection_from_c_eff(c_eff, cavity, detunings)
        r_int = (np.abs(model) ** 2 - intensities) / intensity_err
        r_phase = np.angle(model * np.exp(1j * (phase_offset - phases))) / phase_err
        return float(np.sum(r_int ** 2) + np.sum(r_phase ** 2))

    options = {'xatol': 1e-6, 'fatol': 1e-10, 'maxiter': 4000 * len(free), 'maxfev': 8000 * len(free)}
    result = minimize(chi_square, x0, method='Nelder-Mead', options=options)
    for _ in range(max_restarts):
        restarted = minimize(chi_square, result.x, method='Nelder-Mead', options=options)
        improved = result.fun - restarted.fun
        if restarted.fun <= result.fun:
            result = restarted
        if improved <= 1e-10 * max(1.0, abs(result.fun)):
            break
    if not result.success:
        raise FitConvergenceError(f"simplex did not converge: {result.message}")

    hessian = _numerical_hessian(chi_square, result.x)
    try:
        covariance_x = 2.0 * np.linalg.inv(hessian)
        variances = np.diag(covariance_x)
        if np.any(variances < 0):
            raise np.linalg.LinAlgError("curvature not positive")
    except np.linalg.LinAlgError:
        logger.warning("Chi-square curvature is not positive definite; errors unavailable")
        covariance_x = np.full((len(free), len(free)), np.nan)
        variances = np.diag(covariance_x)
    covariance = covariance_x * np.outer(scales, scales)
    errors = {name: float(np.sqrt(v) * s) for name, v, s in zip(free, variances, scales)}

    dof = max(1, 2 * len(points) - len(free))
    fitted = params_at(result.x)
    logger.info("Fitted %s stage: chi2/dof = %.3f", stage, result.fun / dof)
    return FitResult(params=fitted, free=free, errors=errors, chi_square=float(result.fun),
                     reduced_chi_square=float(result.fun / dof), n_points=len(points),
                     covariance=covariance)


def storage_retrieval_efficiency(cooperativity: float, kappa_ratio: float,
                                 gamma_rg: float, duration: float) -> float:
    """
    Adiabatic storage-plus-retrieval efficiency

    eta_sr = (kappa_in/kappa * C/(C+1))^2 * exp(-gamma_rg * (t_c + t_dark))

    Args:
        cooperativity: C, may be infinite
        kappa_ratio: kappa_in / kappa
        gamma_rg: Ground-Rydberg coherence decay rate in 1/s
        duration: Coupling pulse plus dark time in s
    """
    if min(cooperativity, kappa_ratio, gamma_rg, duration) < 0:
        raise ValidationError("storage/retrieval inputs must be non-negative")
    if kappa_ratio > 1:
        raise ValidationError("kappa_in / kappa cannot exceed 1")
    saturation = 1.0 if math.isinf(cooperativity) else cooperativity / (cooperativity + 1.0)
    return (kappa_ratio * saturation) ** 2 * math.exp(-gamma_rg * duration)


def forster_gamma_estimate(gamma_rg: float, blockade: BlockadeParams) -> float:
    """gamma_F = |(alpha_gamma' - alpha_r') / alpha_r| gamma_rg, assuming field-noise-limited dephasing"""
    ratio = abs((blockade.alpha_gamma_prime - blockade.alpha_r_prime) / blockade.alpha_r)
    return ratio * gamma_rg


def blockade_radius(blockade: BlockadeParams, cooperativity: float, rabi: float,
                    atomic_decay: float = GAMMA_E) -> float:
    """
    R_block = |(2 C3 / hbar Omega)^2 Gamma_e / (gamma_F - 2i Delta_F) C|^(1/6)

    Returns:
        Blockade radius in m
    """
    if rabi <= 0:
        raise ValidationError("blockade radius needs a positive Rabi frequency")
    gamma_f = blockade.gamma_forster
    if (gamma_f is None or gamma_f == 0) and blockade.forster_defect == 0:
        raise ValidationError("need gamma_F > 0 or a non-zero Foerster defect")
    gamma_f = gamma_f or 0.0
    scale = (2.0 * blockade.c3 / (constants.hbar * rabi)) ** 2
    value = scale * atomic_decay / (gamma_f - 2j * blockade.forster_defect) * cooperativity
    return float(abs(value) ** (1.0 / 6.0))


def transverse_factor(sigma_x: float, sigma_y: float, waist: float) -> float:
    """Reduction of C from averaging the Gaussian mode over the cloud"""
    return ((1.0 + (2.0 * sigma_x / waist) ** 2) ** -0.5 *
            (1.0 + (2.0 * sigma_y / waist) ** 2) ** -0.5)


def coupling_and_cooperativity(geometry: GeometryParams, cavity: CavityParams) -> Dict[str, float]:
    """
    Maximal single-atom coupling and the expected collective cooperativity

    g = d_eg sqrt(2 / (pi w^2 L)) sqrt(omega / (2 hbar eps0)); a measured coupling, when
    given, replaces g in the cooperativity estimate.
    """
    mode_amplitude = math.sqrt(2.0 / (math.pi * geometry.waist ** 2 * geometry.round_trip_length))
    field_per_photon = math.sqrt(geometry.transition_frequency / (2.0 * constants.hbar * constants.epsilon_0))
    g_formula = geometry.dipole_moment * mode_amplitude * field_per_photon
    g = geometry.measured_coupling if geometry.measured_coupling is not None else g_formula
    single = g ** 2 / (cavity.kappa * cavity.atomic_halfwidth)
    factor = transverse_factor(geometry.sigma_x, geometry.sigma_y, geometry.waist)
    maximal = geometry.atom_number * single
    return {
        'g_formula': g_formula,
        'g': g,
        'single_atom_cooperativity': single,
        'transverse_factor': factor,
        'cooperativity_max': maximal,
        'cooperativity_estimate': maximal * factor,
    }


def round_trip_length(axial_mode_spacing: float) -> float:
    """L_c = 2 pi c / Delta_omega_ax"""
    return 2.0 * math.pi * constants.c / axial_mode_spacing


def fiber_transmission(length_km: float, attenuation_db_per_km: float) -> float:
    return 10.0 ** (-attenuation_db_per_km * length_km / 10.0)
