"""Asymptotic covariance and confidence intervals for M-estimates.

The estimator covariance is the sandwich

    Sigma = A^{-1} B A^{-1},   A = J^T Delta J,   B = J^T D^2 J,

with ``D = diag(psi(z))`` and ``Delta = diag(psi'(z))``.  The optional
second-order term adds ``sum_a psi(z_a) d2 z_a / dtheta^2`` to ``A``.
Residuals are treated as independent even though observables sharing a
measurement basis are weakly correlated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from scipy.stats import norm

from .estimation import LossFunction
from .noise import PARAM_NAMES

COND_LIMIT = 1e12


class NonIdentifiableError(np.linalg.LinAlgError):
    """Raised when the curvature matrix is singular at the estimate."""

    def __init__(self, message: str, direction: np.ndarray):
        super().__init__(message)
        self.direction = direction


@dataclass
class CovarianceReport:
    sigma_theta: np.ndarray
    used_second_order: bool = False
    condition: float = 1.0
    names: tuple[str, ...] = PARAM_NAMES
    intervals: np.ndarray | None = field(default=None)

    def __post_init__(self) -> None:
        s = np.asarray(self.sigma_theta, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ValueError("covariance must be square")
        self.sigma_theta = s

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.sigma_theta), 0.0, None))


def _describe(direction: np.ndarray, names: Sequence[str]) -> str:
    order = np.argsort(-np.abs(direction))
    parts = [f"{direction[i]:+.3f}*{names[i]}" for i in order if abs(direction[i]) > 0.05]
    return " ".join(parts[:4]) or "(diffuse)"


def mestimator_covariance(
    jac: np.ndarray,
    z: np.ndarray,
    loss: LossFunction,
    second_order: bool = False,
    hessian_z: np.ndarray | None = None,
    names: Sequence[str] = PARAM_NAMES,
) -> CovarianceReport:
    """Sandwich covariance of an M-estimate.

    Parameters
    ----------
    jac : (n, p) array
        Jacobian of the normalized residuals at the estimate.
    z : (n,) array
        Residuals at the estimate.
    loss : LossFunction
    second_order : bool
        Include the residual-curvature term; requires ``hessian_z``.
    hessian_z : (p, p) array, optional
        Precomputed ``sum_a psi(z_a) d2 z_a/dtheta^2``.

    Raises
    ------
    NonIdentifiableError
        If the curvature matrix is singular to working precision.
    """
    jac = np.asarray(jac, dtype=float)
    z = np.asarray(z, dtype=float)
    if jac.ndim != 2 or jac.shape[0] != z.shape[0]:
        raise ValueError("Jacobian rows must match residuals")
    names = tuple(names) if len(names) == jac.shape[1] else tuple(f"theta{i}" for i in range(jac.shape[1]))
    _, psi, dpsi = loss.eval(z)
    a = jac.T @ (dpsi[:, None] * jac)
    if second_order:
        if hessian_z is None:
            raise ValueError("second_order requires the residual curvature term")
        a = a + np.asarray(hessian_z, dtype=float)
    a = 0.5 * (a + a.T)
    b = jac.T @ ((psi * psi)[:, None] * jac)

    # condition in the column-equilibrated basis, so units do not matter
    d = np.sqrt(np.abs(np.diag(a)))
    d = np.where(d > 0, d, 1.0)
    a_s = a / np.outer(d, d)
    evals, evecs = np.linalg.eigh(a_s)
    amax = np.max(np.abs(evals))
    cond = amax / np.min(np.abs(evals)) if np.min(np.abs(evals)) > 0 else np.inf
    if not np.all(np.isfinite(a)) or amax == 0 or cond >= COND_LIMIT:
        v = evecs[:, np.argmin(np.abs(evals))] / d
        v = v / np.linalg.norm(v)
        raise NonIdentifiableError(
            f"non-identifiable at this point (condition {cond:.3g}); null direction {_describe(v, names)}", v
        )
    a_inv_b = scipy.linalg.solve(a_s, b / d[:, None], assume_a="sym")
    sigma = scipy.linalg.solve(a_s, (a_inv_b / d[None, :]).T, assume_a="sym").T / np.outer(d, d)
    sigma = 0.5 * (sigma + sigma.T)
    return CovarianceReport(sigma, used_second_order=second_order, condition=float(cond), names=names)


def residual_curvature(
    fun: Callable[[np.ndarray], np.ndarray],
    theta: np.ndarray,
    psi: np.ndarray,
    steps: np.ndarray,
) -> np.ndarray:
    """``sum_a psi_a d2 z_a / dtheta_k dtheta_l`` by central differences.

    ``steps`` are the per-parameter finite-difference steps.
    """
    theta = np.asarray(theta, dtype=float)
    p = theta.size
    base = fun(theta)
    g = lambda x: float(psi @ fun(x))  # noqa: E731
    h = np.zeros((p, p))
    f0 = float(psi @ base)
    for k in range(p):
        ek = np.zeros(p)
        ek[k] = steps[k]
        h[k, k] = (g(theta + ek) - 2 * f0 + g(theta - ek)) / steps[k] ** 2
        for l in range(k):
            el = np.zeros(p)
            el[l] = steps[l]
            h[k, l] = h[l, k] = (
                g(theta + ek + el) - g(theta + ek - el) - g(theta - ek + el) + g(theta - ek - el)
            ) / (4 * steps[k] * steps[l])
    return h


def normal_quantile(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise ValueError("confidence level must lie in (0, 1)")
    return float(norm.ppf(0.5 + level / 2))


def confidence_intervals(theta_hat, report: CovarianceReport, level: float = 0.95) -> np.ndarray:
    """Symmetric normal intervals, shape (p, 2) with columns (low, high)."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    half = normal_quantile(level) * report.std
    out = np.stack([theta_hat - half, theta_hat + half], axis=1)
    report.intervals = out
    return out
