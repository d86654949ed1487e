"""Photon shot-noise model and the spectrum-vector parameterization.

All angular frequencies and spectral densities are in rad/s.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

TWO_PI = 2.0 * np.pi

# Order of the flat parameter array: the 8 spectra at +Omega then -Omega,
# followed by the Rabi-frequency difference.
PARAM_NAMES = (
    "s11_plus",
    "s22_plus",
    "re_s12_plus",
    "im_s12_plus",
    "s11_minus",
    "s22_minus",
    "re_s12_minus",
    "im_s12_minus",
    "delta_omega",
)
N_SPECTRA = 8


@dataclass(frozen=True)
class ShotNoiseParams:
    chi1: float
    chi2: float
    kappa: float
    delta_c: float
    nbar: float

    def __post_init__(self) -> None:
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.nbar < 0:
            raise ValueError(f"nbar must be non-negative, got {self.nbar}")

    @property
    def chi(self) -> np.ndarray:
        return np.array([self.chi1, self.chi2])

    @property
    def epsilon(self) -> float:
        """Resonator drive amplitude giving ``nbar`` in steady state."""
        return drive_for_nbar(self.nbar, self.kappa, self.delta_c)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def shot_noise_spectrum(p: ShotNoiseParams, omega) -> np.ndarray:
    """2x2 spectrum matrix ``S_jk(omega)``; broadcasts over ``omega``.

    Returns an array of shape ``omega.shape + (2, 2)``.
    """
    omega = np.asarray(omega, dtype=float)
    lor = p.nbar * p.kappa / ((omega + p.delta_c) ** 2 + (p.kappa / 2) ** 2)
    chi = p.chi
    return lor[..., None, None] * np.outer(chi, chi)


def correlation_function(p: ShotNoiseParams, t) -> np.ndarray:
    """``C_jk(t) = chi_j chi_k nbar exp(-kappa |t| / 2 - i delta_c t)``."""
    t = np.asarray(t, dtype=float)
    env = p.nbar * np.exp(-p.kappa * np.abs(t) / 2 - 1j * p.delta_c * t)
    chi = p.chi
    return env[..., None, None] * np.outer(chi, chi)


def steady_state_nbar(epsilon: float, kappa: float, delta_c: float) -> float:
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    return epsilon**2 / ((kappa / 2) ** 2 + delta_c**2)


def drive_for_nbar(nbar: float, kappa: float, delta_c: float) -> float:
    return float(np.sqrt(nbar * ((kappa / 2) ** 2 + delta_c**2)))


@dataclass(frozen=True)
class SpectrumVector:
    s11_plus: float = 0.0
    s22_plus: float = 0.0
    re_s12_plus: float = 0.0
    im_s12_plus: float = 0.0
    s11_minus: float = 0.0
    s22_minus: float = 0.0
    re_s12_minus: float = 0.0
    im_s12_minus: float = 0.0
    delta_omega: float = 0.0

    def matrix(self, sign: int) -> np.ndarray:
        """Hermitian 2x2 spectrum matrix at ``+Omega`` (sign=+1) or ``-Omega``."""
        if sign > 0:
            s11, s22, re, im = self.s11_plus, self.s22_plus, self.re_s12_plus, self.im_s12_plus
        else:
            s11, s22, re, im = self.s11_minus, self.s22_minus, self.re_s12_minus, self.im_s12_minus
        s12 = re + 1j * im
        return np.array([[s11, s12], [np.conj(s12), s22]], dtype=complex)

    def is_physical(self, tol: float = 1e-9) -> bool:
        """True when both 2x2 spectrum matrices are positive semidefinite."""
        for sign in (1, -1):
            m = self.matrix(sign)
            scale = max(np.max(np.abs(m)), 1.0)
            if np.min(np.linalg.eigvalsh(m)) < -tol * scale:
                return False
        return True

    @classmethod
    def from_shot_noise(cls, p: ShotNoiseParams, omega: float, delta_omega: float = 0.0) -> "SpectrumVector":
        sp = shot_noise_spectrum(p, omega)
        sm = shot_noise_spectrum(p, -omega)
        return cls(
            sp[0, 0].real, sp[1, 1].real, sp[0, 1].real, sp[0, 1].imag,
            sm[0, 0].real, sm[1, 1].real, sm[0, 1].real, sm[0, 1].imag,
            delta_omega,
        )

    @classmethod
    def uniform(cls, value: float, delta_omega: float = 0.0) -> "SpectrumVector":
        return cls(*([value] * N_SPECTRA), delta_omega)


def pack(s: SpectrumVector) -> np.ndarray:
    return np.array([getattr(s, name) for name in PARAM_NAMES], dtype=float)


def unpack(x) -> SpectrumVector:
    x = np.asarray(x, dtype=float)
    if x.shape != (len(PARAM_NAMES),):
        raise ValueError(f"expected {len(PARAM_NAMES)} parameters, got shape {x.shape}")
    return SpectrumVector(*map(float, x))
