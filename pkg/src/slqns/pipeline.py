"""Frequency sweeps, reproduction jobs and result files.

Configuration documents are JSON with every frequency in Hz and every
time in seconds; conversion to rad/s happens on read.  Each job writes
its outputs plus a ``provenance.json`` whose ``config`` block reproduces
the run bit-for-bit.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from . import __version__, params
from .confidence import (
    CovarianceReport,
    NonIdentifiableError,
    confidence_intervals,
    mestimator_covariance,
    residual_curvature,
)
from .dynamics import (
    INITIAL_STATES,
    OBSERVABLES,
    DriveConfig,
    QubitRates,
    ReducedModel,
    observable_table,
    optical_states,
    ramsey_curves,
    reduced_states,
)
from .estimation import FitConfig, FitResult, LossFunction, ResidualModel, fit_spectrum
from .experiment import (
    MeasurementPlan,
    ObservationSet,
    contaminate,
    exact_observations,
    frequency_key,
    read_dataset,
    record_stream,
    simulate_observations,
    write_dataset,
)
from .noise import PARAM_NAMES, TWO_PI, ShotNoiseParams, SpectrumVector, pack, unpack

log = logging.getLogger(__name__)

# second differences need much larger steps than the Jacobian
CURVATURE_FLOORS = (100.0, TWO_PI * 100.0)
CONTAMINATION_STREAM = 2**31 - 1
COMPONENTS = ("s11", "s22", "re_s12", "im_s12")
SPECTRA_COLUMNS = (
    ("omega_hz",)
    + COMPONENTS
    + tuple(f"{c}_ci_{b}" for c in COMPONENTS for b in ("low", "high"))
    + ("delta_omega_hz", "converged")
)


class ConfigError(ValueError):
    pass


class AllFitsFailed(RuntimeError):
    pass


# -- configuration -----------------------------------------------------------


@dataclass(frozen=True)
class NoiseConfig:
    chi1_hz: float = params.CHI1 / TWO_PI
    chi2_hz: float = params.CHI2 / TWO_PI
    kappa_hz: float = params.KAPPA / TWO_PI
    delta_c_hz: float = params.DELTA_C_SPECTROSCOPY / TWO_PI
    nbar: float = params.NBAR_SPECTROSCOPY

    def to_params(self) -> ShotNoiseParams:
        return ShotNoiseParams(
            TWO_PI * self.chi1_hz, TWO_PI * self.chi2_hz, TWO_PI * self.kappa_hz, TWO_PI * self.delta_c_hz, self.nbar
        )


@dataclass(frozen=True)
class FitSettings:
    initial_guess: float = 1e3
    initial_delta_omega_hz: float = 0.0
    max_iterations: int = 200
    cost_tol: float = 1e-8
    grad_tol: float = 1e-8
    stationarity_tol: float = 1e-3
    fd_rel_step: float = 1e-6
    restarts: int = 0
    weights: dict | None = None

    def to_fit_config(self, seed: int = 0) -> FitConfig:
        guess = SpectrumVector.uniform(self.initial_guess)
        guess = replace(guess, delta_omega=TWO_PI * self.initial_delta_omega_hz)
        return FitConfig(
            initial_guess=guess,
            max_iterations=self.max_iterations,
            cost_tol=self.cost_tol,
            grad_tol=self.grad_tol,
            stationarity_tol=self.stationarity_tol,
            fd_rel_step=self.fd_rel_step,
            weights=self.weights,
            restarts=self.restarts,
            restart_seed=seed,
        )


def _t1_rates_dict() -> dict:
    return params.t1_rates().to_dict()


@dataclass(frozen=True)
class SweepConfig:
    """Everything that determines a sweep's outputs (worker count excluded)."""

    rabi_frequencies_hz: tuple = tuple(np.linspace(1.8e6, 2.2e6, 26))
    times_s: tuple = tuple(params.SPINLOCK_TIMES)
    initial_states: tuple = INITIAL_STATES
    observables: tuple = OBSERVABLES
    shots: int = params.SHOTS
    source: str = "optical"
    dataset_paths: tuple = ()
    exact: bool = False
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    rates: dict = field(default_factory=_t1_rates_dict)
    fock_dim: int = 8
    delta_omega_hz: float = 0.0
    fit: FitSettings = field(default_factory=FitSettings)
    loss: str = "huber"
    delta0: float = 1.0
    contamination: float = 0.0
    warm_start: bool = True
    second_order: bool = False
    level: float = 0.95
    seed: int = 0

    def __post_init__(self) -> None:
        if self.source not in ("reduced", "optical", "datasets"):
            raise ConfigError(f"unknown data source {self.source!r}")
        if self.source == "datasets":
            if not self.dataset_paths:
                raise ConfigError("source 'datasets' needs dataset_paths")
        else:
            f = np.asarray(self.rabi_frequencies_hz, dtype=float)
            if f.size == 0:
                raise ConfigError("at least one Rabi frequency is required")
            if len(np.unique(f)) != f.size:
                raise ConfigError("Rabi frequencies must be distinct")
            if np.any(f <= 0):
                raise ConfigError("Rabi frequencies must be positive")
            if not self.times_s or min(self.times_s) < 0:
                raise ConfigError("evolution times must be non-negative and non-empty")
        if not 0.0 <= self.contamination <= 1.0:
            raise ConfigError("contamination probability must lie in [0, 1]")
        if not 0.0 < self.level < 1.0:
            raise ConfigError("confidence level must lie in (0, 1)")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        try:
            QubitRates(**self.rates)
            LossFunction(self.loss, self.delta0)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def omegas(self) -> np.ndarray:
        """Rabi frequencies in rad/s, ascending."""
        return np.sort(TWO_PI * np.asarray(self.rabi_frequencies_hz, dtype=float))

    @property
    def qubit_rates(self) -> QubitRates:
        return QubitRates(**self.rates)

    @property
    def loss_function(self) -> LossFunction:
        return LossFunction(self.loss, self.delta0)

    def plan(self) -> MeasurementPlan:
        return MeasurementPlan(
            initial_states=tuple(self.initial_states),
            times=tuple(float(t) for t in self.times_s),
            observables=tuple(self.observables),
            shots=self.shots,
            seed=self.seed,
        )

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    @classmethod
    def from_dict(cls, doc: dict) -> "SweepConfig":
        return _from_dict(cls, doc, {"noise": NoiseConfig, "fit": FitSettings})


@dataclass(frozen=True)
class RamseyConfig:
    times_s: tuple = tuple(np.round(np.arange(0, 201) * 0.05e-6, 12))
    nbars: tuple = (0.0, 0.1, 0.2, 0.3)
    delta_q1_hz: float = params.DELTA_Q1 / TWO_PI
    delta_q2_hz: float = params.DELTA_Q2 / TWO_PI
    noise: NoiseConfig = field(default_factory=lambda: NoiseConfig(delta_c_hz=0.0, nbar=0.0))
    rates: dict = field(default_factory=lambda: params.ramsey_rates().to_dict())
    fock_dim: int = 8
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.times_s or not self.nbars:
            raise ConfigError("times and photon numbers must be non-empty")
        if min(self.nbars) < 0:
            raise ConfigError("photon numbers must be non-negative")

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    @classmethod
    def from_dict(cls, doc: dict) -> "RamseyConfig":
        return _from_dict(cls, doc, {"noise": NoiseConfig})


@dataclass(frozen=True)
class SpinlockConfig:
    omega2_hz: float = abs(params.DELTA_C_SPINLOCK_DEMO) / TWO_PI
    omega1_offsets_hz: tuple = tuple(np.linspace(-200e3, 200e3, 21))
    times_s: tuple = tuple(np.round(np.arange(0, 151) * 1e-6, 12))
    initial_state: str = "-x-x"
    noise: NoiseConfig = field(
        default_factory=lambda: NoiseConfig(
            delta_c_hz=params.DELTA_C_SPINLOCK_DEMO / TWO_PI, nbar=params.NBAR_SPINLOCK_DEMO
        )
    )
    rates: dict = field(default_factory=lambda: params.spinlock_demo_rates().to_dict())
    fock_dim: int = 8
    shots: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.times_s or not self.omega1_offsets_hz:
            raise ConfigError("times and Rabi-frequency offsets must be non-empty")
        if self.initial_state not in INITIAL_STATES:
            raise ConfigError(f"unknown initial state {self.initial_state!r}")
        if self.shots < 0:
            raise ConfigError("shots must be non-negative")

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    @classmethod
    def from_dict(cls, doc: dict) -> "SpinlockConfig":
        return _from_dict(cls, doc, {"noise": NoiseConfig})


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _from_dict(cls, doc: dict, nested: dict) -> Any:
    known = {f.name for f in fields(cls)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = {}
    for k, v in doc.items():
        if k in nested and isinstance(v, dict):
            try:
                v = nested[k](**v)
            except TypeError as exc:
                raise ConfigError(f"bad '{k}' block: {exc}") from exc
        elif isinstance(v, list):
            v = tuple(v)
        kwargs[k] = v
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def canonical_json(obj: Any) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"))


def config_digest(config_dict: dict) -> str:
    return hashlib.sha256(canonical_json(config_dict).encode()).hexdigest()


def load_config_document(path: str | os.PathLike) -> tuple[dict, str | None]:
    """Read a config file; a provenance document yields its embedded config.

    Returns the config dict and, for provenance files, the command name.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    if "config" in doc and "command" in doc:
        return doc["config"], doc["command"]
    return doc, None


# -- sweep -------------------------------------------------------------------


@dataclass
class FrequencyFit:
    omega: float
    fit: FitResult | None
    report: CovarianceReport | None = None
    intervals: np.ndarray | None = None
    truth: SpectrumVector | None = None
    error: str | None = None
    data: ObservationSet | None = None

    @property
    def ok(self) -> bool:
        return self.fit is not None and self.fit.converged


@dataclass
class SweepResult:
    config: SweepConfig
    fits: list[FrequencyFit]
    provenance: dict

    @property
    def n_failed(self) -> int:
        return sum(not f.ok for f in self.fits)

    def spectra_rows(self) -> list[dict]:
        """One row per requested frequency per sign, sorted by signed frequency."""
        rows = []
        for ff in self.fits:
            for sign, suffix in ((-1, "minus"), (1, "plus")):
                row = {"omega_hz": sign * ff.omega / TWO_PI}
                idx = [PARAM_NAMES.index(f"{c}_{suffix}") for c in COMPONENTS]
                theta = ff.fit.theta if ff.fit is not None else np.full(len(PARAM_NAMES), np.nan)
                ci = ff.intervals if ff.intervals is not None else np.full((len(PARAM_NAMES), 2), np.nan)
                for c, i in zip(COMPONENTS, idx):
                    row[c] = theta[i] / 1e3
                    row[f"{c}_ci_low"] = ci[i, 0] / 1e3
                    row[f"{c}_ci_high"] = ci[i, 1] / 1e3
                row["delta_omega_hz"] = theta[8] / TWO_PI
                row["converged"] = int(ff.ok)
                rows.append(row)
        return sorted(rows, key=lambda r: r["omega_hz"])

    def truth_rows(self) -> list[dict]:
        rows = []
        for ff in self.fits:
            if ff.truth is None:
                continue
            theta = pack(ff.truth)
            for sign, suffix in ((-1, "minus"), (1, "plus")):
                row = {"omega_hz": sign * ff.omega / TWO_PI}
                for c in COMPONENTS:
                    row[c] = theta[PARAM_NAMES.index(f"{c}_{suffix}")] / 1e3
                rows.append(row)
        return sorted(rows, key=lambda r: r["omega_hz"])


def true_spectrum(config: SweepConfig, omega: float) -> SpectrumVector:
    return SpectrumVector.from_shot_noise(config.noise.to_params(), omega, TWO_PI * config.delta_omega_hz)


def generate_dataset(config: SweepConfig, omega: float) -> ObservationSet:
    """Synthetic dataset at one Rabi frequency from the configured model."""
    plan = config.plan()
    noise = config.noise.to_params()
    delta_omega = TWO_PI * config.delta_omega_hz
    rates = config.qubit_rates
    if config.source == "reduced":
        theta = pack(SpectrumVector.from_shot_noise(noise, omega, delta_omega))
        states = reduced_states(ReducedModel(omega, rates), theta, plan.initial_states, plan.times)
    elif config.source == "optical":
        drive = DriveConfig(omega, delta_omega)
        states = optical_states(noise, drive, rates, plan.initial_states, plan.times, config.fock_dim)
    else:
        raise ConfigError("datasets are read, not generated")
    meta = {
        "model": config.source,
        "params": {"noise": asdict(config.noise), "rates": dict(config.rates), "delta_omega_hz": config.delta_omega_hz},
    }
    if config.exact:
        obs = exact_observations(states, plan, omega, metadata=meta)
    else:
        obs = simulate_observations(states, plan, omega, metadata=meta)
    if config.contamination > 0:
        rng = record_stream(config.seed, frequency_key(omega), CONTAMINATION_STREAM)
        obs = contaminate(obs, config.contamination, rng=rng)
    return obs


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _generate(args: tuple) -> ObservationSet:
    config, omega = args
    return generate_dataset(config, omega)


def analyze(data: ObservationSet, config: SweepConfig, guess: SpectrumVector | None = None) -> FrequencyFit:
    """Fit one dataset and attach its covariance and intervals."""
    fit_cfg = config.fit.to_fit_config(config.seed)
    if guess is not None:
        fit_cfg = fit_cfg.with_guess(guess)
    rates = config.qubit_rates
    loss = config.loss_function
    try:
        fit = fit_spectrum(data, fit_cfg, loss, rates)
    except Exception as exc:  # a failed frequency must not stop the sweep
        log.warning("fit at %.6g Hz failed: %s", data.omega_rabi / TWO_PI, exc)
        return FrequencyFit(data.omega_rabi, None, error=f"{type(exc).__name__}: {exc}", data=data)
    out = FrequencyFit(data.omega_rabi, fit, data=data)
    try:
        hess = None
        if config.second_order:
            rm = ResidualModel(data, rates, fit_cfg.weights)
            _, psi, _ = loss.eval(fit.residuals)
            hess = residual_curvature(rm, fit.theta, psi, rm.steps(fit.theta, 1e-5, CURVATURE_FLOORS))
        out.report = mestimator_covariance(fit.jacobian, fit.residuals, loss, config.second_order, hess)
        out.intervals = confidence_intervals(fit.theta, out.report, config.level)
    except NonIdentifiableError as exc:
        out.error = str(exc)
    return out


def _analyze(args: tuple) -> FrequencyFit:
    data, config = args
    return analyze(data, config)


def load_datasets(paths: Iterable[str | os.PathLike]) -> list[ObservationSet]:
    data = [read_dataset(p) for p in paths]
    omegas = [d.omega_rabi for d in data]
    if len(set(omegas)) != len(omegas):
        raise ConfigError("datasets must have distinct Rabi frequencies")
    return sorted(data, key=lambda d: d.omega_rabi)


def collect_data(config: SweepConfig, workers: int = 1) -> list[ObservationSet]:
    if config.source == "datasets":
        return load_datasets(config.dataset_paths)
    return _map(_generate, [(config, w) for w in config.omegas], workers)


def run_sweep(
    config: SweepConfig,
    workers: int = 1,
    data: Sequence[ObservationSet] | None = None,
    command: str = "sweep",
) -> SweepResult:
    """Reconstruct the spectrum vector at every Rabi frequency, ascending.

    With ``warm_start`` each fit starts from the previous converged
    estimate, so the sweep is sequential; otherwise fits run on ``workers``
    processes and give the same result as a serial run.
    """
    data = list(data) if data is not None else collect_data(config, workers)
    data.sort(key=lambda d: d.omega_rabi)
    if config.warm_start:
        fits, guess = [], None
        for d in data:
            ff = analyze(d, config, guess)
            if ff.ok:
                guess = ff.fit.theta_hat
            fits.append(ff)
    else:
        fits = _map(_analyze, [(d, config) for d in data], workers)
    if config.source != "datasets":
        for ff in fits:
            ff.truth = true_spectrum(config, ff.omega)
    prov = provenance(command, config.to_dict())
    if config.source == "datasets":
        prov["inputs"] = {str(p): hashlib.sha256(Path(p).read_bytes()).hexdigest() for p in config.dataset_paths}
    return SweepResult(config, fits, prov)


# -- reproduction jobs ---------------------------------------------------------


def run_ramsey(config: RamseyConfig) -> list[dict]:
    """Fringes and correlation over the (n̄, t) grid as long-format rows."""
    rows = []
    base = config.noise
    rates = QubitRates(**config.rates)
    drive = DriveConfig(0.0, delta_q1=TWO_PI * config.delta_q1_hz, delta_q2=TWO_PI * config.delta_q2_hz)
    for nbar in config.nbars:
        p = replace(base, nbar=float(nbar)).to_params()
        curves = ramsey_curves(p, drive, rates, config.times_s, config.fock_dim)
        for i, t in enumerate(config.times_s):
            rows.append({"nbar": nbar, "time_s": t, "z1": curves["z1"][i], "z2": curves["z2"][i],
                         "czz": curves["czz"][i]})
    return rows


def run_spinlock(config: SpinlockConfig) -> list[dict]:
    """Dressed-qubit decay curves while sweeping the first Rabi frequency."""
    p = config.noise.to_params()
    rates = QubitRates(**config.rates)
    omega2 = TWO_PI * config.omega2_hz
    labels = ("tz1", "tz2", "Kzz")
    rows = []
    for off in config.omega1_offsets_hz:
        omega1 = omega2 + TWO_PI * off
        drive = DriveConfig(0.5 * (omega1 + omega2), omega1 - omega2)
        states = optical_states(p, drive, rates, [config.initial_state], config.times_s, config.fock_dim)[0]
        if config.shots:
            plan = MeasurementPlan((config.initial_state,), tuple(config.times_s), labels, config.shots, config.seed)
            obs = simulate_observations(states[None], plan, 0.5 * (omega1 + omega2))
            vals = obs.mean.reshape(len(config.times_s), len(labels))
        else:
            vals = observable_table(states, labels)
        for i, t in enumerate(config.times_s):
            rows.append({"omega1_hz": config.omega2_hz + off, "time_s": t, "tz1": vals[i, 0], "tz2": vals[i, 1],
                         "kzz": vals[i, 2]})
    return rows


def compare_losses(config: SweepConfig, workers: int = 1) -> tuple[SweepResult, SweepResult]:
    """Huber and quadratic reconstructions of the same datasets."""
    data = collect_data(config, workers)
    huber = run_sweep(replace(config, loss="huber"), workers, data, "compare-loss")
    quad = run_sweep(replace(config, loss="quadratic"), workers, data, "compare-loss")
    return huber, quad


def loss_comparison_rows(huber: SweepResult, quad: SweepResult) -> list[dict]:
    rows = []
    truth = {r["omega_hz"]: r for r in huber.truth_rows()}
    q_rows = {r["omega_hz"]: r for r in quad.spectra_rows()}
    for h in huber.spectra_rows():
        q = q_rows[h["omega_hz"]]
        tr = truth.get(h["omega_hz"])
        for c in COMPONENTS:
            row = {"omega_hz": h["omega_hz"], "component": c, "huber": h[c], "quadratic": q[c]}
            row["truth"] = tr[c] if tr else np.nan
            row["huber_abs_error"] = abs(h[c] - row["truth"])
            row["quadratic_abs_error"] = abs(q[c] - row["truth"])
            rows.append(row)
    return rows


def loss_summary(rows: list[dict]) -> list[dict]:
    """Median absolute error per component for each loss."""
    out = []
    for c in COMPONENTS:
        sel = [r for r in rows if r["component"] == c]
        out.append({
            "component": c,
            "huber_median_abs_error": float(np.median([r["huber_abs_error"] for r in sel])),
            "quadratic_median_abs_error": float(np.median([r["quadratic_abs_error"] for r in sel])),
        })
    return out


# -- output ------------------------------------------------------------------


def provenance(command: str, config_dict: dict) -> dict:
    return {
        "command": command,
        "config": config_dict,
        "config_digest": config_digest(config_dict),
        "seed": config_dict.get("seed", 0),
        "version": __version__,
    }


def _fmt(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_rows(path: Path, rows: list[dict], columns: Sequence[str], prov: dict) -> None:
    """CSV with a provenance comment line; floats written losslessly."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# config_digest={prov['config_digest']} seed={prov['seed']} version={prov['version']}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def read_rows(path: str | os.PathLike) -> list[dict]:
    """Inverse of :func:`write_rows`; numeric fields become floats."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    out = []
    for r in csv.DictReader(lines):
        row = {}
        for k, v in r.items():
            try:
                row[k] = float(v)
            except ValueError:
                row[k] = v
        out.append(row)
    return out


def write_json(path: Path, obj: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def finalize_provenance(out: Path, prov: dict) -> dict:
    """Hash every output under ``out`` and write ``provenance.json``."""
    hashes = {}
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.name != "provenance.json":
            hashes[p.relative_to(out).as_posix()] = hashlib.sha256(p.read_bytes()).hexdigest()
    prov = dict(prov, outputs=hashes)
    write_json(out / "provenance.json", prov)
    return prov


def omega_tag(omega: float) -> str:
    return f"omega_{omega / TWO_PI:012.3f}hz"


def write_datasets(data: Sequence[ObservationSet], out: Path, prov: dict) -> list[Path]:
    paths = []
    for d in data:
        meta = dict(d.metadata, config_digest=prov["config_digest"], seed=prov["seed"])
        path = out / "data" / f"{omega_tag(d.omega_rabi)}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        write_dataset(d.copy(metadata=meta), path)
        paths.append(path)
    return paths


def write_sweep(result: SweepResult, out: Path, prefix: str = "") -> None:
    """``spectra.csv``, ``truth.csv`` (synthetic sources) and ``fits/``."""
    prov = result.provenance
    write_rows(out / f"{prefix}spectra.csv", result.spectra_rows(), SPECTRA_COLUMNS, prov)
    truth = result.truth_rows()
    if truth:
        write_rows(out / f"{prefix}truth.csv", truth, ("omega_hz",) + COMPONENTS, prov)
    for ff in result.fits:
        tag = omega_tag(ff.omega)
        fdir = out / f"{prefix}fits"
        summary = {
            "config_digest": prov["config_digest"],
            "seed": prov["seed"],
            "omega_hz": ff.omega / TWO_PI,
            "error": ff.error,
        }
        if ff.fit is not None:
            fit = ff.fit
            summary.update(
                theta=dict(zip(PARAM_NAMES, fit.theta.tolist())),
                final_cost=fit.final_cost,
                converged=fit.converged,
                iterations=fit.iterations,
                projected_gradient=fit.projected_gradient,
                message=fit.message,
                physical=fit.physical,
                diagnostics=fit.diagnostics,
            )
            if ff.report is not None:
                summary["covariance"] = ff.report.sigma_theta.tolist()
                summary["intervals"] = ff.intervals.tolist()
            if ff.data is not None:
                d = ff.data
                rm = ResidualModel(d, result.config.qubit_rates)
                model = rm.predict(fit.theta)
                rows = [
                    {"state": d.state[i], "time_s": d.time[i], "observable": d.observable[i], "mean": d.mean[i],
                     "std": d.std[i], "model": model[i], "residual": fit.residuals[i]}
                    for i in range(len(d))
                ]
                write_rows(fdir / f"{tag}_curves.csv", rows,
                           ("state", "time_s", "observable", "mean", "std", "model", "residual"), prov)
        write_json(fdir / f"{tag}.json", summary)
