"""Device and protocol parameter sets used by the reproduction jobs.

Frequencies quoted in Hz in the source tables are stored here already
converted to rad/s.
"""

from __future__ import annotations

import numpy as np

from .dynamics import QubitRates
from .noise import TWO_PI, ShotNoiseParams

KHZ = TWO_PI * 1e3
MHZ = TWO_PI * 1e6
US = 1e-6

CHI1 = -29.1 * KHZ
CHI2 = -59.5 * KHZ
KAPPA = 198.0 * KHZ
DELTA_Q1 = -1265.0 * KHZ
DELTA_Q2 = 299.0 * KHZ
GAMMA_PHI1 = 87.7e3
GAMMA_PHI2 = 31.0e3
T1_Q1 = 87.0 * US
T1_Q2 = 54.0 * US

# Stark-shifted detuning plus both dispersive shifts gives the bare detuning.
DELTA_C_SPECTROSCOPY = 2.05 * MHZ + CHI1 + CHI2  # ~ +1.961 MHz
DELTA_C_SPINLOCK_DEMO = -1.95 * MHZ + CHI1 + CHI2  # ~ -2.03 MHz

NBAR_SPECTROSCOPY = 0.127
NBAR_SPINLOCK_DEMO = 0.154

# Evolution times of the spectroscopy design.
SPINLOCK_TIMES = np.concatenate(
    [np.arange(1, 12, 2), np.arange(16, 72, 5), np.arange(81, 152, 10)]
).astype(float) * US

SHOTS = 10_000
SHOTS_OUTLIER_STUDY = 2000


def spectroscopy_noise() -> ShotNoiseParams:
    """Shot-noise parameters of the full spectrum reconstruction."""
    return ShotNoiseParams(CHI1, CHI2, KAPPA, DELTA_C_SPECTROSCOPY, NBAR_SPECTROSCOPY)


def spinlock_demo_noise() -> ShotNoiseParams:
    """Shot-noise parameters of the frequency-selectivity demonstration."""
    return ShotNoiseParams(CHI1, CHI2, KAPPA, DELTA_C_SPINLOCK_DEMO, NBAR_SPINLOCK_DEMO)


def t1_rates() -> QubitRates:
    return QubitRates(gamma1_q1=1 / T1_Q1, gamma1_q2=1 / T1_Q2)


def spinlock_demo_rates() -> QubitRates:
    return QubitRates(
        gamma1_q1=1 / T1_Q1,
        gamma1_q2=1 / T1_Q2,
        gamma_up_q1=2e3,
        gamma_dn_q1=7e3,
        gamma_up_q2=9e3,
        gamma_dn_q2=14e3,
    )


def ramsey_rates() -> QubitRates:
    return QubitRates(
        gamma1_q1=1 / T1_Q1,
        gamma1_q2=1 / T1_Q2,
        gamma_phi_q1=GAMMA_PHI1,
        gamma_phi_q2=GAMMA_PHI2,
    )


def sweep_frequencies(n: int = 26, lo: float = 1.8e6, hi: float = 2.2e6) -> np.ndarray:
    """Uniform Rabi-frequency grid in rad/s."""
    return TWO_PI * np.linspace(lo, hi, n)
