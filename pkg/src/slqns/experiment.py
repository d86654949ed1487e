"""Synthetic spin-locking measurement campaigns.

Sample means are formed from ideal projective measurements of Pauli-product
bases on the dressed two-qubit state.  Every (state, time, basis) cell draws
from its own counter-based random stream keyed on the master seed, so
datasets do not depend on generation order.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import qcore
from .dynamics import INITIAL_STATES, OBSERVABLES, observable_table

STD_FLOOR = 1e-3
N_BOOTSTRAP = 200
CSV_COLUMNS = ("state", "time_s", "observable", "mean", "std", "shots")
BASES = tuple(a + b for a in "xyz" for b in "xyz")


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class MeasurementPlan:
    initial_states: tuple[str, ...] = INITIAL_STATES
    times: tuple[float, ...] = ()
    observables: tuple[str, ...] = OBSERVABLES
    shots: int = 10_000
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.initial_states or not len(self.times) or not self.observables:
            raise ValueError("measurement plan lists must be non-empty")
        if self.shots < 2:
            raise ValueError("need at least 2 shots per record")
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "initial_states", tuple(self.initial_states))
        object.__setattr__(self, "observables", tuple(self.observables))

    @property
    def n_records(self) -> int:
        return len(self.initial_states) * len(self.times) * len(self.observables)

    def to_dict(self) -> dict:
        return {
            "initial_states": list(self.initial_states),
            "times": list(self.times),
            "observables": list(self.observables),
            "shots": self.shots,
            "seed": self.seed,
        }


@dataclass
class ObservationSet:
    """Sample means for one Rabi frequency, in (state, time, observable) order."""

    state: np.ndarray
    time: np.ndarray
    observable: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    shots: np.ndarray
    omega_rabi: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.state = np.asarray(self.state, dtype=object)
        self.observable = np.asarray(self.observable, dtype=object)
        self.time = np.asarray(self.time, dtype=float)
        self.mean = np.asarray(self.mean, dtype=float)
        self.std = np.asarray(self.std, dtype=float)
        self.shots = np.asarray(self.shots, dtype=int)
        n = len(self.mean)
        for name in ("state", "time", "observable", "std", "shots"):
            if len(getattr(self, name)) != n:
                raise DatasetError(f"column {name!r} has {len(getattr(self, name))} entries, expected {n}")
        self.validate()

    def __len__(self) -> int:
        return len(self.mean)

    def validate(self) -> None:
        if np.any(~np.isfinite(self.std)) or np.any(self.std <= 0):
            bad = int(np.flatnonzero(~(self.std > 0))[0])
            raise DatasetError(f"record {bad}: std must be positive, got {self.std[bad]!r}")
        single = np.array([not o.startswith("K") for o in self.observable], dtype=bool)
        limit = np.where(single, 1.0, 2.0) + 1e-12
        if np.any(np.abs(self.mean) > limit):
            bad = int(np.flatnonzero(np.abs(self.mean) > limit)[0])
            raise DatasetError(f"record {bad}: mean {self.mean[bad]!r} out of range for {self.observable[bad]}")

    def copy(self, **changes) -> "ObservationSet":
        fields_ = dict(
            state=self.state.copy(), time=self.time.copy(), observable=self.observable.copy(),
            mean=self.mean.copy(), std=self.std.copy(), shots=self.shots.copy(),
            omega_rabi=self.omega_rabi, metadata=json.loads(json.dumps(self.metadata)),
        )
        fields_.update(changes)
        return ObservationSet(**fields_)

    def equals(self, other: "ObservationSet") -> bool:
        return (
            np.array_equal(self.state, other.state)
            and np.array_equal(self.time, other.time)
            and np.array_equal(self.observable, other.observable)
            and np.array_equal(self.mean, other.mean)
            and np.array_equal(self.std, other.std)
            and np.array_equal(self.shots, other.shots)
            and self.omega_rabi == other.omega_rabi
            and self.metadata == other.metadata
        )


def record_stream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for one cell of the campaign."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=tuple(key))))


def frequency_key(omega_rabi: float) -> int:
    """Stable integer key for a Rabi frequency (rounded to 1 mHz in ordinary frequency)."""
    return int(round(omega_rabi / (2 * np.pi) * 1e3))


def cell_key(label: str, t: float) -> tuple[int, int]:
    """Stable substream key for one (initial state, time) cell.

    Keys depend on the label and the time (rounded to 1 ps), never on the
    position in the plan, so any subset of a plan reproduces its records.
    """
    code = int.from_bytes(hashlib.sha256(label.encode()).digest()[:4], "big")
    return code, int(round(t * 1e12))


def basis_probabilities(rho: np.ndarray, basis: str) -> np.ndarray:
    """Joint outcome distribution over (++, +-, -+, --) for a Pauli-product basis."""
    projs = []
    for l in basis:
        p = qcore.PAULI[l]
        projs.append(((qcore.I2 + p) / 2, (qcore.I2 - p) / 2))
    probs = np.array(
        [np.real(np.trace(rho @ np.kron(projs[0][a], projs[1][b]))) for a in (0, 1) for b in (0, 1)]
    )
    if np.min(probs) < -1e-9:
        raise ValueError(f"negative outcome probability {np.min(probs):.3g} in basis {basis}")
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


_SIGNS = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)


def _moments(counts: np.ndarray, shots: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    freq = counts / shots
    m1 = freq @ _SIGNS[:, 0]
    m2 = freq @ _SIGNS[:, 1]
    m12 = freq @ (_SIGNS[:, 0] * _SIGNS[:, 1])
    return m1, m2, m12


def _single_std(mean: float, shots: int) -> float:
    var = max(1.0 - mean * mean, 0.0) * shots / (shots - 1)
    return max(np.sqrt(var / shots), STD_FLOOR)


def sample_basis(
    rho: np.ndarray, basis: str, shots: int, rng: np.random.Generator, n_boot: int = N_BOOTSTRAP
) -> dict[str, tuple[float, float]]:
    """Draw ``shots`` paired outcomes in one basis and summarize them.

    Returns ``{label: (mean, std)}`` for the covariance ``K<basis>`` and, for
    the zz basis, the single-qubit means ``tz1``/``tz2``.  The covariance
    uncertainty is the bootstrap standard deviation over resampled shots;
    a multinomial redraw from the empirical frequencies is an exact
    resample of the paired outcomes.
    """
    probs = basis_probabilities(rho, basis)
    counts = rng.multinomial(shots, probs)
    m1, m2, m12 = _moments(counts, shots)
    k = m12 - m1 * m2
    boot = rng.multinomial(shots, counts / shots, size=n_boot)
    b1, b2, b12 = _moments(boot, shots)
    k_std = max(float(np.std(b12 - b1 * b2, ddof=1)), STD_FLOOR)
    out = {f"K{basis}": (float(k), k_std)}
    if basis == "zz":
        out["tz1"] = (float(m1), _single_std(m1, shots))
        out["tz2"] = (float(m2), _single_std(m2, shots))
    return out


def sample_observables(
    rho: np.ndarray,
    observables: Sequence[str],
    shots: int,
    rng: np.random.Generator | None = None,
    seed: int = 0,
    key: tuple[int, ...] = (),
) -> dict[str, tuple[float, float]]:
    """(mean, std) for each requested observable from finite-shot sampling of ``rho``.

    With ``rng`` given every basis draws from it in turn; otherwise each basis
    uses the substream ``record_stream(seed, *key, basis_index)``.
    """
    out: dict[str, tuple[float, float]] = {}
    for b_idx, basis in enumerate(BASES):
        wanted = [o for o in observables if o == f"K{basis}" or (basis == "zz" and o in ("tz1", "tz2"))]
        if not wanted:
            continue
        gen = rng if rng is not None else record_stream(seed, *key, b_idx)
        res = sample_basis(rho, basis, shots, gen)
        out.update({o: res[o] for o in wanted})
    missing = [o for o in observables if o not in out]
    if missing:
        raise ValueError(f"cannot sample observables {missing}")
    return out


def simulate_observations(
    states: np.ndarray,
    plan: MeasurementPlan,
    omega_rabi: float,
    metadata: dict | None = None,
) -> ObservationSet:
    """Finite-shot dataset from two-qubit states of shape (n_states, n_times, 4, 4)."""
    states = np.asarray(states)
    if states.shape[:2] != (len(plan.initial_states), len(plan.times)):
        raise ValueError("state array does not match the measurement plan")
    fkey = frequency_key(omega_rabi)
    cols: dict[str, list] = {c: [] for c in ("state", "time", "observable", "mean", "std")}
    for s_idx, label in enumerate(plan.initial_states):
        for q_idx, t in enumerate(plan.times):
            res = sample_observables(
                states[s_idx, q_idx], plan.observables, plan.shots, seed=plan.seed, key=(fkey, *cell_key(label, t))
            )
            for o in plan.observables:
                cols["state"].append(label)
                cols["time"].append(t)
                cols["observable"].append(o)
                cols["mean"].append(res[o][0])
                cols["std"].append(res[o][1])
    meta = {"seed": plan.seed, "shots": plan.shots}
    meta.update(metadata or {})
    return ObservationSet(
        cols["state"], cols["time"], cols["observable"], cols["mean"], cols["std"],
        np.full(len(cols["mean"]), plan.shots), omega_rabi, meta,
    )


def exact_observations(
    states: np.ndarray,
    plan: MeasurementPlan,
    omega_rabi: float,
    std: float = STD_FLOOR,
    metadata: dict | None = None,
) -> ObservationSet:
    """Noise-free dataset: means are exact expectation values, stds constant."""
    states = np.asarray(states)
    vals = observable_table(states, plan.observables)  # (n_states, n_times, n_obs)
    n_s, n_t, n_o = vals.shape
    state_col = np.repeat(np.array(plan.initial_states, dtype=object), n_t * n_o)
    time_col = np.tile(np.repeat(np.array(plan.times), n_o), n_s)
    obs_col = np.tile(np.array(plan.observables, dtype=object), n_s * n_t)
    meta = {"seed": plan.seed, "shots": plan.shots, "exact": True}
    meta.update(metadata or {})
    return ObservationSet(
        state_col, time_col, obs_col, vals.reshape(-1), np.full(vals.size, float(std)),
        np.full(vals.size, plan.shots), omega_rabi, meta,
    )


def contaminate(obs: ObservationSet, p_outlier: float, seed: int = 0, rng: np.random.Generator | None = None) -> ObservationSet:
    """Replace each sample mean by a Uniform(-1, 1) draw with probability ``p_outlier``."""
    if not 0.0 <= p_outlier <= 1.0:
        raise ValueError("outlier probability must lie in [0, 1]")
    if rng is None:
        rng = record_stream(seed, frequency_key(obs.omega_rabi), 0xC0)
    mask = rng.random(len(obs)) < p_outlier
    draws = rng.uniform(-1.0, 1.0, len(obs))
    mean = np.where(mask, draws, obs.mean)
    meta = json.loads(json.dumps(obs.metadata))
    meta["contamination"] = {"p": float(p_outlier), "mask": np.flatnonzero(mask).tolist(), "mask_digest": _digest(mask)}
    return obs.copy(mean=mean, metadata=meta)


def _digest(mask: np.ndarray) -> str:
    return hashlib.sha256(np.packbits(np.asarray(mask, dtype=bool)).tobytes()).hexdigest()[:16]


def write_dataset(obs: ObservationSet, path: str | os.PathLike) -> None:
    """Write ``<path>`` (CSV) and ``<path>.json`` (metadata sidecar)."""
    path = os.fspath(path)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for i in range(len(obs)):
            writer.writerow([obs.state[i], repr(float(obs.time[i])), obs.observable[i],
                             repr(float(obs.mean[i])), repr(float(obs.std[i])), int(obs.shots[i])])
    side = {"omega_rabi_hz": obs.omega_rabi / (2 * np.pi), "omega_rabi": obs.omega_rabi}
    side.update(obs.metadata)
    with open(path + ".json", "w", encoding="utf-8") as fh:
        json.dump(side, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_dataset(path: str | os.PathLike) -> ObservationSet:
    path = os.fspath(path)
    try:
        with open(path + ".json", encoding="utf-8") as fh:
            side = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}.json: malformed sidecar ({exc})") from exc
    omega = float(side.pop("omega_rabi", 2 * np.pi * side.get("omega_rabi_hz", np.nan)))
    side.pop("omega_rabi_hz", None)
    cols: dict[str, list] = {c: [] for c in CSV_COLUMNS}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_COLUMNS:
            raise DatasetError(f"{path}:1: expected header {','.join(CSV_COLUMNS)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(CSV_COLUMNS):
                raise DatasetError(f"{path}:{lineno}: expected {len(CSV_COLUMNS)} fields, got {len(row)}")
            try:
                cols["state"].append(row[0])
                cols["time_s"].append(float(row[1]))
                cols["observable"].append(row[2])
                cols["mean"].append(float(row[3]))
                cols["std"].append(float(row[4]))
                cols["shots"].append(int(row[5]))
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from exc
            if not cols["std"][-1] > 0:
                raise DatasetError(f"{path}:{lineno}: std must be positive, got {row[4]}")
    try:
        return ObservationSet(cols["state"], cols["time_s"], cols["observable"], cols["mean"],
                              cols["std"], cols["shots"], omega, side)
    except DatasetError as exc:
        raise DatasetError(f"{path}: {exc}") from exc
