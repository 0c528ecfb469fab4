"""
Unit conversion for the cavity-Rydberg gate lab
All user-facing values are frequencies nu = omega/2pi in MHz, times in microseconds
and lengths in micrometers. Internally everything is SI: rad/s, s, m.
"""

import math
from typing import Callable, Dict

from scipy import constants

TWO_PI = 2.0 * math.pi

# Hartree times Bohr radius cubed, the atomic unit of a C3 coefficient
ATOMIC_UNIT_C3 = constants.physical_constants['atomic unit of energy'][0] * \
    constants.physical_constants['atomic unit of length'][0] ** 3

# Names accepted in a run config "units" block
BOUNDARY_UNITS: Dict[str, str] = {
    'frequency': 'MHz',
    'time': 'us',
    'length': 'um',
}


def mhz_to_angular(nu_mhz: float) -> float:
    """Convert a frequency nu/2pi given in MHz into an angular frequency in rad/s"""
    return TWO_PI * nu_mhz * 1e6


def angular_to_mhz(omega: float) -> float:
    """Convert an angular frequency in rad/s into nu = omega/2pi in MHz"""
    return omega / (TWO_PI * 1e6)


def ghz_to_angular(nu_ghz: float) -> float:
    return TWO_PI * nu_ghz * 1e9


def us_to_s(t_us: float) -> float:
    return t_us * 1e-6


def s_to_us(t_s: float) -> float:
    return t_s * 1e6


def um_to_m(x_um: float) -> float:
    return x_um * 1e-6


def m_to_um(x_m: float) -> float:
    return x_m * 1e6


def rate_from_lifetime_us(lifetime_us: float) -> float:
    """
    Convert a 1/e lifetime in microseconds into a decay rate in 1/s

    Args:
        lifetime_us: Lifetime in microseconds, must be positive

    Returns:
        Decay rate in 1/s
    """
    if lifetime_us <= 0:
        raise ValueError(f"lifetime must be positive, got {lifetime_us}")
    return 1.0 / us_to_s(lifetime_us)


def lifetime_us_from_rate(rate: float) -> float:
    if rate <= 0:
        raise ValueError(f"rate must be positive, got {rate}")
    return s_to_us(1.0 / rate)


def check_units_block(units: Dict[str, str]) -> None:
    """
    Verify that a config "units" block declares the boundary units

    Args:
        units: Mapping of quantity -> unit name

    Raises:
        ValueError: if a quantity is missing or uses another unit
    """
    for quantity, expected in BOUNDARY_UNITS.items():
        declared = units.get(quantity)
        if declared != expected:
            raise ValueError(
                f"units.{quantity} must be '{expected}', got {declared!r}"
            )


def to_si(value: float, unit: str) -> float:
    """
    Convert a preset or config value into SI

    Frequencies in MHz/GHz become angular frequencies; 'Hz' is a plain event
    rate and stays in 1/s. 'au' is the atomic unit of a C3 coefficient.

    Raises:
        ValueError: for an unknown unit
    """
    try:
        return UNIT_CONVERSIONS[unit](value)
    except KeyError:
        raise ValueError(f"unknown unit {unit!r}")


UNIT_CONVERSIONS: Dict[str, Callable[[float], float]] = {
    '1': float,
    'Hz': float,
    's': float,
    'C m': float,
    'MHz': mhz_to_angular,
    'GHz': ghz_to_angular,
    'us': us_to_s,
    'ns': lambda t: t * 1e-9,
    'um': um_to_m,
    'km': float,
    'dB/km': float,
    'au': lambda c3: c3 * ATOMIC_UNIT_C3,
}
