"""Robust M-estimation of the spectrum vector at one Rabi frequency.

The total cost ``sum_a loss(z_a)`` over normalized residuals
``z_a = (mean_a - model_a(theta)) / std_a`` is minimized by a bounded
Levenberg-Marquardt iteration on iteratively reweighted least squares.
The loss enters only through ``psi = loss'`` (exact gradient ``J^T psi``)
and the IRLS weights ``psi(z) / z`` (curvature model ``J^T W J``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .dynamics import QubitRates, ReducedModel, observable_table, reduced_states
from .experiment import ObservationSet
from .noise import N_SPECTRA, PARAM_NAMES, TWO_PI, SpectrumVector, pack, unpack

log = logging.getLogger(__name__)

DELTA_OMEGA_BOUND = TWO_PI * 200e3
# A 10 rad/s floor leaves a forward-difference truncation error near 5e-4
# in the cost gradient; 0.1 rad/s keeps it below 1e-4 without roundoff trouble.
FD_FLOOR_SPECTRA = 0.1
FD_FLOOR_DELTA_OMEGA = TWO_PI * 10.0


@dataclass(frozen=True)
class LossFunction:
    kind: str = "huber"
    delta0: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("huber", "quadratic"):
            raise ValueError(f"unknown loss {self.kind!r}")
        if self.kind == "huber" and not self.delta0 > 0:
            raise ValueError("huber tuning parameter must be positive")

    def eval(self, z):
        """Return ``(loss, first derivative, second derivative)`` at ``z``."""
        z = np.asarray(z, dtype=float)
        if self.kind == "quadratic":
            return 0.5 * z * z, z.copy(), np.ones_like(z)
        d = self.delta0
        inner = np.abs(z) <= d
        value = np.where(inner, 0.5 * z * z, d * (np.abs(z) - 0.5 * d))
        psi = np.where(inner, z, d * np.sign(z))
        second = inner.astype(float)
        return value, psi, second

    def weights(self, z) -> np.ndarray:
        """IRLS weights ``psi(z)/z`` with the ``z -> 0`` limit equal to 1."""
        z = np.asarray(z, dtype=float)
        if self.kind == "quadratic":
            return np.ones_like(z)
        az = np.abs(z)
        return np.where(az <= self.delta0, 1.0, self.delta0 / np.maximum(az, self.delta0))


def default_bounds() -> tuple[np.ndarray, np.ndarray]:
    lo = np.full(len(PARAM_NAMES), -np.inf)
    hi = np.full(len(PARAM_NAMES), np.inf)
    for name in ("s11_plus", "s22_plus", "s11_minus", "s22_minus"):
        lo[PARAM_NAMES.index(name)] = 0.0
    lo[8], hi[8] = -DELTA_OMEGA_BOUND, DELTA_OMEGA_BOUND
    return lo, hi


@dataclass(frozen=True)
class FitConfig:
    initial_guess: SpectrumVector = field(default_factory=lambda: SpectrumVector.uniform(1e3))
    lower: tuple = field(default_factory=lambda: tuple(default_bounds()[0]))
    upper: tuple = field(default_factory=lambda: tuple(default_bounds()[1]))
    max_iterations: int = 200
    cost_tol: float = 1e-8
    grad_tol: float = 1e-8
    stationarity_tol: float = 1e-3
    fd_rel_step: float = 1e-6
    weights: Mapping[str, float] | None = None
    restarts: int = 0
    restart_seed: int = 0

    def __post_init__(self) -> None:
        lo, hi = np.asarray(self.lower, float), np.asarray(self.upper, float)
        if lo.shape != (len(PARAM_NAMES),) or hi.shape != lo.shape:
            raise ValueError("bounds must have one entry per parameter")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        for name in ("s11_plus", "s22_plus", "s11_minus", "s22_minus"):
            if lo[PARAM_NAMES.index(name)] < 0:
                raise ValueError(f"self-spectrum {name} must be bounded below by 0")

    def with_guess(self, guess: SpectrumVector) -> "FitConfig":
        return replace(self, initial_guess=guess)

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.lower, float), np.asarray(self.upper, float)


@dataclass
class FitResult:
    theta_hat: SpectrumVector
    final_cost: float
    residuals: np.ndarray
    jacobian: np.ndarray
    converged: bool
    iterations: int
    projected_gradient: float = np.inf
    message: str = ""
    diagnostics: dict = field(default_factory=dict)

    @property
    def theta(self) -> np.ndarray:
        return pack(self.theta_hat)

    @property
    def physical(self) -> bool:
        return self.theta_hat.is_physical()


class ResidualModel:
    """Normalized residuals of one dataset against the reduced model."""

    def __init__(self, data: ObservationSet, rates: QubitRates | None = None,
                 weights: Mapping[str, float] | None = None):
        if len(data) == 0:
            raise ValueError("empty dataset")
        self.data = data
        self.model = ReducedModel(data.omega_rabi, rates)
        self.states = tuple(dict.fromkeys(data.state.tolist()))
        self.times = np.array(sorted(set(data.time.tolist())))
        self.observables = tuple(dict.fromkeys(data.observable.tolist()))
        s_idx = {s: i for i, s in enumerate(self.states)}
        t_idx = {t: i for i, t in enumerate(self.times.tolist())}
        o_idx = {o: i for i, o in enumerate(self.observables)}
        self._index = (
            np.array([s_idx[s] for s in data.state]),
            np.array([t_idx[t] for t in data.time.tolist()]),
            np.array([o_idx[o] for o in data.observable]),
        )
        scale = np.ones(len(data))
        if weights:
            scale = np.array([weights.get(o, 1.0) for o in data.observable], dtype=float)
        self._scale = scale / data.std
        self.n_evals = 0

    def predict(self, theta) -> np.ndarray:
        """Model expectation for every record, in dataset order."""
        self.n_evals += 1
        states = reduced_states(self.model, theta, self.states, self.times)
        table = observable_table(states, self.observables)
        return table[self._index]

    def __call__(self, theta) -> np.ndarray:
        return (self.data.mean - self.predict(theta)) * self._scale

    def steps(self, theta, rel_step: float = 1e-6, floors: tuple[float, float] | None = None) -> np.ndarray:
        """Per-parameter difference steps; ``floors`` = (spectra, delta_omega)."""
        theta = np.asarray(theta, float)
        f_spec, f_dw = floors or (FD_FLOOR_SPECTRA, FD_FLOOR_DELTA_OMEGA)
        floor = np.full(len(theta), f_spec)
        floor[8] = f_dw
        return np.maximum(rel_step * np.abs(theta), floor)

    def jacobian(self, theta, z0=None, rel_step: float = 1e-6, bounds=None) -> np.ndarray:
        """Forward-difference ``dz/dtheta``; steps flip sign at an upper bound."""
        theta = np.asarray(theta, float)
        z0 = self(theta) if z0 is None else z0
        h = self.steps(theta, rel_step)
        if bounds is not None:
            h = np.where(theta + h > bounds[1], -h, h)
        jac = np.empty((len(z0), len(theta)))
        for i in range(len(theta)):
            tp = theta.copy()
            tp[i] += h[i]
            jac[:, i] = (self(tp) - z0) / h[i]
        return jac


def residuals(theta, data: ObservationSet, rates: QubitRates | None = None,
              weights: Mapping[str, float] | None = None) -> np.ndarray:
    """Normalized residuals, one per record in dataset order."""
    theta = np.asarray(theta, float)
    if theta.shape != (len(PARAM_NAMES),):
        raise ValueError(f"expected {len(PARAM_NAMES)} parameters, got {theta.shape}")
    return ResidualModel(data, rates, weights)(theta)


def total_cost(loss: LossFunction, z) -> float:
    return float(np.sum(loss.eval(z)[0]))


def _projected_gradient(theta, grad, lo, hi, scale) -> np.ndarray:
    g = grad * scale
    at_lo = (theta <= lo) & (g > 0)
    at_hi = (theta >= hi) & (g < 0)
    return np.where(at_lo | at_hi, 0.0, g)


def stationarity(theta, jac, psi, lo, hi) -> np.ndarray:
    """Projected gradient in scale-free form.

    Component ``i`` is the cosine between Jacobian column ``i`` and ``psi``,
    zeroed where an active bound blocks descent.  It lies in [-1, 1] and does
    not depend on parameter units or on the overall residual size.  Once
    ``|psi| < 1`` the fit is within one standard error everywhere and the
    unnormalized column-scaled gradient is used instead.
    """
    col = np.linalg.norm(jac, axis=0)
    norm = max(float(np.linalg.norm(psi)), 1.0)
    scale = np.where(col > 0, 1.0 / (np.where(col > 0, col, 1.0) * norm), 0.0)
    return _projected_gradient(theta, jac.T @ psi, lo, hi, scale)


def _solve_damped(h: np.ndarray, g: np.ndarray, mu: float) -> tuple[np.ndarray, bool]:
    diag = np.maximum(np.diag(h), 1e-12 * max(np.max(np.diag(h)), 1e-300))
    a = h + mu * np.diag(diag)
    try:
        return np.linalg.solve(a, -g), False
    except np.linalg.LinAlgError:
        return -g / (mu * diag), True


def _fit_once(rm: ResidualModel, theta0: np.ndarray, config: FitConfig, loss: LossFunction) -> FitResult:
    lo, hi = config.bounds
    theta = np.clip(np.asarray(theta0, float), lo, hi)
    z = rm(theta)
    cost = total_cost(loss, z)
    mu = None
    nu = 2.0
    converged = False
    message = "maximum iterations reached"
    fallbacks = 0
    it = 0
    jac = rm.jacobian(theta, z, config.fd_rel_step, (lo, hi))
    pg_norm = np.inf
    for it in range(1, config.max_iterations + 1):
        _, psi, _ = loss.eval(z)
        w = loss.weights(z)
        grad = jac.T @ psi
        pg = stationarity(theta, jac, psi, lo, hi)
        pg_norm = float(np.max(np.abs(pg)))
        if pg_norm < config.grad_tol:
            converged, message = True, "projected gradient below tolerance"
            break
        free = pg != 0
        hess = jac.T @ (w[:, None] * jac)
        if mu is None:
            mu = 1e-3
        accepted = False
        while not accepted:
            step = np.zeros_like(theta)
            sol, fell_back = _solve_damped(hess[np.ix_(free, free)], grad[free], mu)
            fallbacks += fell_back
            step[free] = sol
            trial = np.clip(theta + step, lo, hi)
            actual = trial - theta
            if not np.any(actual):
                break
            z_trial = rm(trial)
            cost_trial = total_cost(loss, z_trial)
            pred = -(grad @ actual + 0.5 * actual @ hess @ actual)
            if cost_trial < cost:
                rho = (cost - cost_trial) / pred if pred > 0 else 0.0
                mu *= max(1 / 3, 1 - (2 * rho - 1) ** 3)
                nu = 2.0
                accepted = True
            else:
                mu *= nu
                nu *= 2
                if mu > 1e16:
                    break
        if not accepted:
            converged, message = True, "no further decrease possible"
            break
        rel = (cost - cost_trial) / cost if cost > 0 else 0.0
        theta, z, cost = trial, z_trial, cost_trial
        jac = rm.jacobian(theta, z, config.fd_rel_step, (lo, hi))
        if rel < config.cost_tol:
            # a heavily damped step can stall far from a stationary point;
            # keep going there and let max_iterations bound the work
            pg_now = stationarity(theta, jac, loss.eval(z)[1], lo, hi)
            if np.max(np.abs(pg_now)) < config.stationarity_tol:
                converged, message = True, "relative cost decrease below tolerance"
                break
    pg_norm = float(np.max(np.abs(stationarity(theta, jac, loss.eval(z)[1], lo, hi))))
    if converged and not pg_norm < config.stationarity_tol:
        converged = False
        message += f"; not stationary (projected gradient {pg_norm:.2g})"
    return FitResult(
        theta_hat=unpack(theta),
        final_cost=cost,
        residuals=z,
        jacobian=jac,
        converged=converged,
        iterations=it,
        projected_gradient=pg_norm,
        message=message,
        diagnostics={"model_evaluations": rm.n_evals, "step_fallbacks": fallbacks},
    )


def fit_spectrum(
    data: ObservationSet,
    config: FitConfig | None = None,
    loss: LossFunction | None = None,
    rates: QubitRates | None = None,
) -> FitResult:
    """M-estimate of the spectrum vector and Rabi mismatch for one dataset.

    Never raises on non-convergence; inspect ``FitResult.converged``.
    With ``config.restarts > 0`` additional fits start from seeded jitters
    of the initial guess and the lowest-cost result is returned.
    """
    config = config or FitConfig()
    loss = loss or LossFunction()
    rm = ResidualModel(data, rates, config.weights)
    theta0 = pack(config.initial_guess)
    best = _fit_once(rm, theta0, config, loss)
    if config.restarts:
        rng = np.random.default_rng(config.restart_seed)
        for _ in range(config.restarts):
            jitter = theta0.copy()
            jitter[:N_SPECTRA] *= rng.uniform(0.5, 2.0, N_SPECTRA)
            # the cost can be nearly even in delta_omega, so try both signs
            jitter[N_SPECTRA] = rng.uniform(-0.25, 0.25) * DELTA_OMEGA_BOUND
            cand = _fit_once(rm, jitter, config, loss)
            if cand.final_cost < best.final_cost:
                best = cand
        best.diagnostics["restarts"] = config.restarts
    if not best.physical:
        best.diagnostics["non_physical_spectra"] = True
    log.debug("fit at %.4g rad/s: cost %.6g after %d iterations (%s)",
              data.omega_rabi, best.final_cost, best.iterations, best.message)
    return best
