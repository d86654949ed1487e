"""Master-equation builders for the two-qubit spin-locking and Ramsey models.

Every builder returns a column-stacked Liouvillian (see :mod:`slqns.qcore`).
Spin-locking models live in the dressed basis, where index 0 of each qubit is
``|+x>`` and ``tau_z = diag(1, -1)``.  Ramsey models live in the lab basis.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, fields
from typing import Sequence

import numpy as np

from . import qcore
from .noise import PARAM_NAMES, ShotNoiseParams, SpectrumVector, pack
from .qcore import SM, SP, SX, SY, SZ, dissipator, embed, kron

QUBIT_DIMS = (2, 2)
DEFAULT_FOCK_DIM = 8
TRUNCATION_TOL = 1e-6

# Design observables: two single-qubit Paulis and nine covariances.
OBSERVABLES = ("tz1", "tz2") + tuple(f"K{a}{b}" for a in "xyz" for b in "xyz")
INITIAL_STATES = ("+x+x", "+x-x", "-x+x", "-x-x")


class NonPhysicalSpectraWarning(UserWarning):
    pass


class TruncationError(RuntimeError):
    pass


@dataclass(frozen=True)
class QubitRates:
    gamma1_q1: float = 0.0
    gamma1_q2: float = 0.0
    gamma_phi_q1: float = 0.0
    gamma_phi_q2: float = 0.0
    gamma_up_q1: float = 0.0
    gamma_dn_q1: float = 0.0
    gamma_up_q2: float = 0.0
    gamma_dn_q2: float = 0.0

    def __post_init__(self) -> None:
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")

    @property
    def gamma1(self) -> tuple[float, float]:
        return (self.gamma1_q1, self.gamma1_q2)

    @property
    def gamma_phi(self) -> tuple[float, float]:
        return (self.gamma_phi_q1, self.gamma_phi_q2)

    @property
    def gamma_up(self) -> tuple[float, float]:
        return (self.gamma_up_q1, self.gamma_up_q2)

    @property
    def gamma_dn(self) -> tuple[float, float]:
        return (self.gamma_dn_q1, self.gamma_dn_q2)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class DriveConfig:
    """Drive settings.

    ``delta_q1``/``delta_q2`` are qubit-drive detunings.  For the spin-locking
    optical model ``None`` means Stark-shift compensation
    (``delta_q = -2 chi nbar``); the Ramsey model treats ``None`` as zero.
    """

    omega_rabi: float
    delta_omega: float = 0.0
    delta_q1: float | None = None
    delta_q2: float | None = None
    epsilon: float | None = None

    @property
    def omega1(self) -> float:
        return self.omega_rabi + self.delta_omega / 2

    @property
    def omega2(self) -> float:
        return self.omega_rabi - self.delta_omega / 2

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _qubit_ops(op: np.ndarray, dims: Sequence[int] = QUBIT_DIMS) -> tuple[np.ndarray, np.ndarray]:
    return embed(op, 0, dims), embed(op, 1, dims)


def relaxation_superop(gamma1: Sequence[float], dims: Sequence[int] = QUBIT_DIMS) -> np.ndarray:
    """``(1/4) sum_j Gamma1_j (D[tz_j] + D[t+_j] + D[t-_j])`` for lab-frame T1 seen in the dressed frame."""
    n = int(np.prod(dims))
    out = np.zeros((n * n, n * n), dtype=complex)
    for j, g in enumerate(gamma1):
        if g < 0:
            raise ValueError("non-physical dissipator rate")
        if g == 0:
            continue
        for op in (SZ, SP, SM):
            out += 0.25 * g * dissipator(embed(op, j, dims))
    return out


def _correlated_blocks(dims: Sequence[int] = QUBIT_DIMS) -> dict[str, np.ndarray]:
    """Superoperators multiplying each real spectral component.

    ``L_jk = S_jk(-W) [t-_k rho t+_j - {t+_j t-_k, rho}/2]
           + S_jk(+W) [t+_k rho t-_j - {t-_j t+_k, rho}/2]``
    with ``S_21 = conj(S_12)``.
    """
    tp = _qubit_ops(SP, dims)
    tm = _qubit_ops(SM, dims)
    blocks = {}
    for tag, ops in (("plus", tp), ("minus", tm)):
        g = [[qcore.correlated_dissipator(ops[k], ops[j]) for k in range(2)] for j in range(2)]
        blocks[f"s11_{tag}"] = g[0][0]
        blocks[f"s22_{tag}"] = g[1][1]
        blocks[f"re_s12_{tag}"] = g[0][1] + g[1][0]
        blocks[f"im_s12_{tag}"] = 1j * g[0][1] - 1j * g[1][0]
    return blocks


class ReducedModel:
    """Linear-in-spectra factory for the reduced two-qubit generator.

    The generator is ``L(theta) = L_H(W, dW) + sum_i theta_i B_i + L_T1``
    so the component superoperators are built once and reused inside fits.
    """

    def __init__(self, omega_rabi: float, rates: QubitRates | None = None):
        self.omega_rabi = float(omega_rabi)
        self.rates = rates or QubitRates()
        self.blocks = _correlated_blocks()
        self._basis = np.stack([self.blocks[name] for name in PARAM_NAMES[:8]])
        self._tz = _qubit_ops(SZ)
        self._relax = relaxation_superop(self.rates.gamma1)

    def hamiltonian(self, delta_omega: float) -> np.ndarray:
        w1 = self.omega_rabi + delta_omega / 2
        w2 = self.omega_rabi - delta_omega / 2
        return 0.5 * w1 * self._tz[0] + 0.5 * w2 * self._tz[1]

    def liouvillian(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        out = qcore.hamiltonian_superop(self.hamiltonian(theta[8]))
        out = out + np.tensordot(theta[:8], self._basis, axes=1)
        return out + self._relax


def build_reduced_me(S: SpectrumVector, drive: DriveConfig, rates: QubitRates | None = None) -> np.ndarray:
    """16x16 generator with correlated decay/absorption, Rabi mismatch and T1.

    ``drive.delta_omega`` is used when ``S.delta_omega`` is zero so either
    container may carry the mismatch.  Non-PSD spectrum matrices are allowed
    (fits may cross the boundary) but raise a :class:`NonPhysicalSpectraWarning`.
    """
    if not S.is_physical():
        warnings.warn("non-physical spectra: spectrum matrix is not PSD", NonPhysicalSpectraWarning)
    theta = pack(S)
    if theta[8] == 0.0:
        theta[8] = drive.delta_omega
    return ReducedModel(drive.omega_rabi, rates).liouvillian(theta)


def cavity_liouvillian(epsilon: float, kappa: float, delta_c: float, fock_dim: int) -> np.ndarray:
    a = qcore.destroy(fock_dim)
    h = delta_c * a.conj().T @ a + epsilon * (a + a.conj().T)
    return qcore.lindbladian(h, [(kappa, a)])


def resonator_steady_state(epsilon: float, kappa: float, delta_c: float, fock_dim: int = DEFAULT_FOCK_DIM) -> np.ndarray:
    rho = qcore.steady_state(cavity_liouvillian(epsilon, kappa, delta_c, fock_dim), fock_dim)
    if rho[-1, -1].real > TRUNCATION_TOL:
        raise TruncationError(
            f"top Fock population {rho[-1, -1].real:.2e} exceeds {TRUNCATION_TOL:g}; increase fock_dim"
        )
    return rho


def _epsilon(p: ShotNoiseParams, drive: DriveConfig) -> float:
    return p.epsilon if drive.epsilon is None else float(drive.epsilon)


def build_spinlock_optical_me(
    p: ShotNoiseParams,
    drive: DriveConfig,
    rates: QubitRates | None = None,
    fock_dim: int = DEFAULT_FOCK_DIM,
) -> np.ndarray:
    """Qubits-plus-resonator generator in the spin-locking frame.

    ``H = sum W_j/2 tz_j + dc a+a + eps (a + a+) - sum chi_j (a+a - nbar) tx_j``
    with resonator damping, dressed-frame T1 terms and phenomenological
    up/down rates.  Hilbert space ordering is qubit 1, qubit 2, resonator.
    """
    rates = rates or QubitRates()
    dims = (2, 2, fock_dim)
    a = embed(qcore.destroy(fock_dim), 2, dims)
    n_op = a.conj().T @ a
    eye = np.eye(int(np.prod(dims)), dtype=complex)
    eps = _epsilon(p, drive)
    omegas = (drive.omega1, drive.omega2)
    chis = (p.chi1, p.chi2)
    h = p.delta_c * n_op + eps * (a + a.conj().T)
    for j in range(2):
        tz = embed(SZ, j, dims)
        tx = embed(SX, j, dims)
        h = h + 0.5 * omegas[j] * tz - chis[j] * (n_op - p.nbar * eye) @ tx
        dq = (drive.delta_q1, drive.delta_q2)[j]
        if dq is not None:
            # residual lab-frame detuning; sigma_z maps to -tau_x in the dressed basis
            h = h - 0.5 * (dq + 2 * chis[j] * p.nbar) * tx
    diss = [(p.kappa, a)]
    for j in range(2):
        diss.append((rates.gamma_dn[j], embed(SM, j, dims)))
        diss.append((rates.gamma_up[j], embed(SP, j, dims)))
    out = qcore.lindbladian(h, diss)
    return out + relaxation_superop(rates.gamma1, dims)


def build_ramsey_optical_me(
    p: ShotNoiseParams,
    drive: DriveConfig,
    rates: QubitRates | None = None,
    fock_dim: int = DEFAULT_FOCK_DIM,
) -> np.ndarray:
    """Lab-frame dispersive model for free evolution between Ramsey pulses.

    ``H = sum dq_j/2 sz_j + dc a+a + eps (a + a+) + sum chi_j a+a sz_j``
    with ``kappa D[a]``, ``Gamma1_j D[s-_j]`` and ``(gphi_j/2) D[sz_j]``.
    """
    rates = rates or QubitRates()
    dims = (2, 2, fock_dim)
    a = embed(qcore.destroy(fock_dim), 2, dims)
    n_op = a.conj().T @ a
    eps = _epsilon(p, drive)
    dq = (drive.delta_q1 or 0.0, drive.delta_q2 or 0.0)
    chis = (p.chi1, p.chi2)
    h = p.delta_c * n_op + eps * (a + a.conj().T)
    diss = [(p.kappa, a)]
    for j in range(2):
        sz = embed(SZ, j, dims)
        h = h + 0.5 * dq[j] * sz + chis[j] * n_op @ sz
        diss.append((rates.gamma1[j], embed(SM, j, dims)))
        diss.append((rates.gamma_phi[j] / 2, sz))
    return qcore.lindbladian(h, diss)


def spinlock_initial_state(
    labels: str | Sequence[str],
    resonator: str | None = None,
    p: ShotNoiseParams | None = None,
    fock_dim: int = DEFAULT_FOCK_DIM,
    epsilon: float | None = None,
) -> np.ndarray:
    """Dressed-basis product state, optionally tensored with the resonator steady state.

    ``labels`` is either ``"+x-x"`` or a pair like ``("+x", "-x")``.
    """
    if isinstance(labels, str):
        labels = (labels[:2], labels[2:])
    rho = qcore.projector(qcore.ket(*labels))
    if resonator is None:
        return rho
    if resonator != "steady":
        raise ValueError(f"unknown resonator state {resonator!r}")
    if p is None:
        raise ValueError("resonator steady state requires shot-noise parameters")
    eps = p.epsilon if epsilon is None else epsilon
    return np.kron(rho, resonator_steady_state(eps, p.kappa, p.delta_c, fock_dim))


def _two_qubit_operator(name: str) -> np.ndarray:
    return np.kron(qcore.PAULI[name[0]], qcore.PAULI[name[1]])


def observable_table(states: np.ndarray, labels: Sequence[str]) -> np.ndarray:
    """Evaluate observable labels on two-qubit states of shape (..., 4, 4).

    Labels: ``tz1``/``tz2`` (or any ``t<l><j>``) and covariances ``K<l1><l2>``
    defined as ``<t1 t2> - <t1><t2>``.
    """
    states = np.asarray(states)
    out = np.empty(states.shape[:-2] + (len(labels),))
    cache: dict[str, np.ndarray] = {}

    def ev(name: str) -> np.ndarray:
        if name not in cache:
            cache[name] = np.real(np.einsum("ij,...ji->...", _two_qubit_operator(name), states))
        return cache[name]

    for r, lab in enumerate(labels):
        if lab.startswith("K"):
            l1, l2 = lab[1], lab[2]
            out[..., r] = ev(l1 + l2) - ev(l1 + "0") * ev("0" + l2)
        elif lab.startswith("t"):
            l, j = lab[1], lab[2]
            out[..., r] = ev(l + "0") if j == "1" else ev("0" + l)
        else:
            raise ValueError(f"unknown observable label {lab!r}")
    return out


def decay_curves(
    liouv: np.ndarray | qcore.Propagator,
    rho0: np.ndarray,
    times: Sequence[float],
    observables: Sequence,
    dims: Sequence[int] | None = None,
    check_truncation: bool = False,
) -> np.ndarray:
    """Matrix of expectation values, shape (n_times, n_observables).

    Observables are operator matrices on the full space or labels understood
    by :func:`observable_table`; labels are evaluated on the two-qubit
    reduced state when ``dims`` names a larger space.
    """
    states = qcore.propagate(liouv, rho0, times)
    if check_truncation and dims is not None and len(dims) > 2:
        check_fock_truncation(states, dims)
    out = np.empty((len(states), len(observables)))
    label_idx = [i for i, o in enumerate(observables) if isinstance(o, str)]
    op_idx = [i for i, o in enumerate(observables) if not isinstance(o, str)]
    for i in op_idx:
        out[:, i] = qcore.expect(np.asarray(observables[i]), states)
    if label_idx:
        if dims is not None and len(dims) > 2:
            red = np.stack([qcore.partial_trace(r, dims, (0, 1)) for r in states])
        else:
            red = states
        out[:, label_idx] = observable_table(red, [observables[i] for i in label_idx])
    return out


def check_fock_truncation(states: np.ndarray, dims: Sequence[int], tol: float = TRUNCATION_TOL) -> None:
    top = max(float(qcore.partial_trace(r, dims, (len(dims) - 1,))[-1, -1].real) for r in states)
    if top > tol:
        raise TruncationError(f"top Fock population {top:.2e} exceeds {tol:g}; increase fock_dim")


def ramsey_pulse(n_qubits: int = 2, fock_dim: int | None = None) -> np.ndarray:
    """Simultaneous instantaneous ``exp(-i pi/4 sigma_y)`` on every qubit."""
    u = np.cos(np.pi / 4) * np.eye(2) - 1j * np.sin(np.pi / 4) * SY
    ops = [u] * n_qubits
    if fock_dim:
        ops.append(np.eye(fock_dim))
    return kron(*ops)


def reduced_states(
    model: ReducedModel, theta, initial_states: Sequence[str], times: Sequence[float]
) -> np.ndarray:
    """Two-qubit states of the reduced model, shape (n_states, n_times, 4, 4)."""
    prop = qcore.Propagator(model.liouvillian(theta))
    rho0 = np.stack([qcore.vec(spinlock_initial_state(s)) for s in initial_states], axis=1)
    out = prop.apply(rho0, times)  # (n_times, 16, n_states)
    # column-stacked vec: a C-order reshape yields the transpose
    states = np.swapaxes(out.transpose(2, 0, 1).reshape(len(initial_states), len(times), 4, 4), -1, -2)
    return 0.5 * (states + np.conj(np.swapaxes(states, -1, -2)))


def optical_states(
    p: ShotNoiseParams,
    drive: DriveConfig,
    rates: QubitRates | None,
    initial_states: Sequence[str],
    times: Sequence[float],
    fock_dim: int = DEFAULT_FOCK_DIM,
) -> np.ndarray:
    """Qubit-reduced states of the spin-locking optical model, (n_states, n_times, 4, 4).

    Raises :class:`TruncationError` if the top Fock level is populated above
    tolerance at any requested time.
    """
    dims = (2, 2, fock_dim)
    prop = qcore.Propagator(build_spinlock_optical_me(p, drive, rates, fock_dim))
    eps = _epsilon(p, drive)
    rho0 = np.stack(
        [qcore.vec(spinlock_initial_state(s, "steady", p, fock_dim, eps)) for s in initial_states], axis=1
    )
    out = prop.apply(rho0, times)
    n = 4 * fock_dim
    full = np.swapaxes(out.transpose(2, 0, 1).reshape(len(initial_states), len(times), n, n), -1, -2)
    full = 0.5 * (full + np.conj(np.swapaxes(full, -1, -2)))
    t = full.reshape(full.shape[:2] + (4, fock_dim, 4, fock_dim))
    cav = np.einsum("...iaib->...ab", t)
    top = float(np.max(np.real(cav[..., -1, -1])))
    if top > TRUNCATION_TOL:
        raise TruncationError(f"top Fock population {top:.2e} exceeds {TRUNCATION_TOL:g}; increase fock_dim")
    return np.einsum("...iaja->...ij", t)


def ramsey_curves(
    p: ShotNoiseParams,
    drive: DriveConfig,
    rates: QubitRates | None,
    times: Sequence[float],
    fock_dim: int = DEFAULT_FOCK_DIM,
) -> dict[str, np.ndarray]:
    """Simultaneous Ramsey fringes and their correlation.

    Both qubits start in the ground state with the resonator in its
    driven steady state; instantaneous ``pi/2`` pulses about ``y`` open and
    close the free evolution.  Returns ``z1``, ``z2`` and
    ``czz = <sz1 sz2> - <sz1><sz2>``, each of shape ``(n_times,)``.
    """
    dims = (2, 2, fock_dim)
    eps = _epsilon(p, drive)
    ground = qcore.projector(qcore.ket("0", "0"))
    rho0 = np.kron(ground, resonator_steady_state(eps, p.kappa, p.delta_c, fock_dim))
    u = ramsey_pulse(2, fock_dim)
    rho0 = u @ rho0 @ u.conj().T
    prop = qcore.Propagator(build_ramsey_optical_me(p, drive, rates, fock_dim))
    states = qcore.propagate(prop, rho0, times)
    states = np.einsum("ij,tjk,lk->til", u, states, u.conj())
    check_fock_truncation(states, dims)
    t = states.reshape(len(states), 4, fock_dim, 4, fock_dim)
    red = np.einsum("taibi->tab", t)
    z1 = np.real(np.einsum("ij,tji->t", np.kron(SZ, np.eye(2)), red))
    z2 = np.real(np.einsum("ij,tji->t", np.kron(np.eye(2), SZ), red))
    zz = np.real(np.einsum("ij,tji->t", np.kron(SZ, SZ), red))
    return {"z1": z1, "z2": z2, "czz": zz - z1 * z2}
