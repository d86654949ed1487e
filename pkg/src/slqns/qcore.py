"""Dense operator algebra and Lindblad propagation.

Conventions
-----------
* Single-qubit basis index 0 is the ``+1`` eigenstate of the z Pauli
  (the excited state ``|1>`` in the lab frame, ``|+x>`` in the dressed frame),
  index 1 is the ``-1`` eigenstate.  Hence ``sz = diag(1, -1)``,
  ``sp = |0><1|`` raises and ``sm = |1><0|`` lowers.
* Superoperators act on column-stacked density matrices,
  ``vec(A rho B) = (B.T kron A) vec(rho)``.
* Tensor ordering is left to right: ``kron(q1, q2, resonator)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
SP = np.array([[0, 1], [0, 0]], dtype=complex)
SM = np.array([[0, 0], [1, 0]], dtype=complex)
I2 = np.eye(2, dtype=complex)

PAULI = {"0": I2, "x": SX, "y": SY, "z": SZ}

HERMITIAN_TOL = 1e-12
TRACE_DRIFT_TOL = 1e-6
COND_LIMIT = 1e8


class PropagationError(RuntimeError):
    pass


def destroy(n: int) -> np.ndarray:
    """Bosonic annihilation operator truncated to ``n`` Fock levels."""
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1).astype(complex)


def kron(*ops: np.ndarray) -> np.ndarray:
    return reduce(np.kron, ops)


def embed(op: np.ndarray, index: int, dims: Sequence[int]) -> np.ndarray:
    """Place ``op`` on subsystem ``index`` of a tensor product with ``dims``."""
    factors = [np.eye(d, dtype=complex) for d in dims]
    factors[index] = op
    return kron(*factors)


def dag(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(a - dag(a)), initial=0.0) < tol)


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    if dim is None:
        dim = int(round(np.sqrt(v.shape[-1])))
    return np.asarray(v).reshape(dim, dim, order="F")


def spre(a: np.ndarray) -> np.ndarray:
    """Superoperator for ``rho -> a @ rho``."""
    return np.kron(np.eye(a.shape[0]), a)


def spost(a: np.ndarray) -> np.ndarray:
    """Superoperator for ``rho -> rho @ a``."""
    return np.kron(a.T, np.eye(a.shape[0]))


def sprepost(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Superoperator for ``rho -> a @ rho @ b``."""
    return np.kron(b.T, a)


def dissipator(j: np.ndarray) -> np.ndarray:
    """Vectorized ``D[J] rho = J rho J^+ - {J^+ J, rho}/2``."""
    jdj = dag(j) @ j
    return sprepost(j, dag(j)) - 0.5 * spre(jdj) - 0.5 * spost(jdj)


def correlated_dissipator(a_k: np.ndarray, a_j: np.ndarray) -> np.ndarray:
    """Vectorized ``rho -> a_k rho a_j^+ - {a_j^+ a_k, rho}/2``.

    Summing ``g[j, k]`` times this over ``j, k`` gives a Kossakowski-form
    generator; it is completely positive when ``g`` is positive semidefinite.
    """
    prod = dag(a_j) @ a_k
    return sprepost(a_k, dag(a_j)) - 0.5 * spre(prod) - 0.5 * spost(prod)


def hamiltonian_superop(h: np.ndarray) -> np.ndarray:
    return -1j * (spre(h) - spost(h))


def lindbladian(
    h: np.ndarray,
    dissipators: Iterable[tuple[float, np.ndarray]] = (),
) -> np.ndarray:
    """Liouvillian of ``-i[H, rho] + sum_k rate_k D[J_k] rho``.

    Parameters
    ----------
    h : (n, n) array
        Hermitian Hamiltonian in rad/s.
    dissipators : iterable of (rate, jump operator)
        Rates in 1/s; must be non-negative.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"Hamiltonian must be square, got shape {h.shape}")
    if not is_hermitian(h, tol=HERMITIAN_TOL * max(1.0, float(np.max(np.abs(h), initial=0.0)))):
        raise ValueError("Hamiltonian is not Hermitian")
    out = hamiltonian_superop(h)
    for rate, j in dissipators:
        if rate < 0:
            raise ValueError(f"non-physical dissipator rate {rate!r}")
        if rate == 0:
            continue
        j = np.asarray(j, dtype=complex)
        if j.shape != h.shape:
            raise ValueError(f"jump operator shape {j.shape} does not match Hamiltonian {h.shape}")
        out = out + rate * dissipator(j)
    return out


def trace_row(dim: int) -> np.ndarray:
    """Row vector ``vec(I)^+``; ``trace_row(d) @ vec(rho) == Tr rho``."""
    return vec(np.eye(dim, dtype=complex)).conj()


def left_null_residual(liouv: np.ndarray) -> float:
    """``||vec(I)^+ L||_inf / ||L||``, zero for trace-preserving generators."""
    dim = int(round(np.sqrt(liouv.shape[0])))
    norm = np.linalg.norm(liouv, ord=np.inf)
    if norm == 0:
        return 0.0
    return float(np.max(np.abs(trace_row(dim) @ liouv)) / norm)


@dataclass(frozen=True)
class Propagator:
    """Cached spectral decomposition of a time-independent Liouvillian.

    Falls back to scaling-and-squaring ``expm`` when the eigenvector matrix
    is ill conditioned (near-defective generators).
    """

    liouv: np.ndarray
    cond_limit: float = COND_LIMIT
    _evals: np.ndarray | None = field(init=False, default=None, repr=False)
    _evecs: np.ndarray | None = field(init=False, default=None, repr=False)
    _inv: np.ndarray | None = field(init=False, default=None, repr=False)
    cond: float = field(init=False, default=np.inf)

    def __post_init__(self) -> None:
        liouv = self.liouv
        if not np.all(np.isfinite(liouv)):
            raise PropagationError("Liouvillian contains non-finite entries")
        try:
            evals, evecs = np.linalg.eig(liouv)
            inv = np.linalg.inv(evecs)
        except np.linalg.LinAlgError as exc:
            warnings.warn(f"eigendecomposition failed ({exc}); falling back to expm")
            return
        # 1-norm condition number; cheaper than the SVD-based estimate
        cond = float(np.linalg.norm(evecs, 1) * np.linalg.norm(inv, 1))
        object.__setattr__(self, "cond", cond)
        if np.isfinite(cond) and cond < self.cond_limit:
            object.__setattr__(self, "_evals", evals)
            object.__setattr__(self, "_evecs", evecs)
            object.__setattr__(self, "_inv", inv)

    @property
    def spectral(self) -> bool:
        return self._evals is not None

    def apply(self, vecs: np.ndarray, times: Sequence[float]) -> np.ndarray:
        """Propagate column vectors ``vecs`` (n2, k); returns (n_times, n2, k)."""
        times = np.asarray(times, dtype=float)
        vecs = np.asarray(vecs, dtype=complex)
        squeeze = vecs.ndim == 1
        if squeeze:
            vecs = vecs[:, None]
        if self.spectral:
            coeff = self._inv @ vecs
            phases = np.exp(np.outer(times, self._evals))
            out = self._evecs @ (phases[:, :, None] * coeff[None])
        else:
            out = np.empty((len(times),) + vecs.shape, dtype=complex)
            for n, t in enumerate(times):
                prop = scipy.linalg.expm(self.liouv * t)
                if not np.all(np.isfinite(prop)):
                    raise PropagationError(
                        f"expm failed at t={t:g} s (eigenvector condition number {self.cond:.3g})"
                    )
                out[n] = prop @ vecs
        return out[..., 0] if squeeze else out


def _check_times(times: Sequence[float]) -> np.ndarray:
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0):
        raise ValueError("propagation times must be non-negative")
    if np.any(np.diff(times) < 0):
        raise ValueError("propagation times must be sorted")
    return times


def finalize_state(rho: np.ndarray, tol: float = TRACE_DRIFT_TOL) -> np.ndarray:
    """Hermitize and renormalize a propagated state; large drift is an error."""
    tr = np.trace(rho)
    if abs(tr - 1) > tol:
        raise PropagationError(f"trace drifted to {tr:.6g}; generator is not trace preserving")
    rho = 0.5 * (rho + dag(rho))
    return rho / np.real(np.trace(rho))


def propagate(
    liouv: np.ndarray | Propagator,
    rho0: np.ndarray,
    times: Sequence[float],
    raw: bool = False,
) -> np.ndarray:
    """Density matrices ``unvec(exp(L t) vec(rho0))`` at each of ``times``.

    Returns an array of shape (n_times, dim, dim).  With ``raw=True`` the
    states are returned as propagated, without hermitization.
    """
    prop = liouv if isinstance(liouv, Propagator) else Propagator(np.asarray(liouv, dtype=complex))
    times = _check_times(times)
    rho0 = np.asarray(rho0, dtype=complex)
    dim = rho0.shape[0]
    if prop.liouv.shape[0] != dim * dim:
        raise ValueError(f"state of dim {dim} does not match Liouvillian of size {prop.liouv.shape[0]}")
    out = prop.apply(vec(rho0), times)
    states = np.stack([unvec(v, dim) for v in out])
    if raw:
        return states
    return np.stack([finalize_state(r) for r in states])


def expect(op: np.ndarray, rho: np.ndarray) -> float:
    """``Re Tr[O rho]``; warns when the imaginary part exceeds 1e-9."""
    op = np.asarray(op)
    rho = np.asarray(rho)
    if op.shape != rho.shape[-2:]:
        raise ValueError(f"operator shape {op.shape} does not match state shape {rho.shape}")
    val = np.einsum("ij,...ji->...", op, rho)
    if np.max(np.abs(np.imag(val)), initial=0.0) > 1e-9:
        warnings.warn(f"expectation value has imaginary part {np.max(np.abs(np.imag(val))):.3g}")
    return np.real(val) if np.ndim(val) else float(np.real(val))


def partial_trace(rho: np.ndarray, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    dims = list(dims)
    rho = np.asarray(rho)
    if int(np.prod(dims)) != rho.shape[0]:
        raise ValueError(f"subsystem dims {dims} inconsistent with state dim {rho.shape[0]}")
    keep = sorted(set(keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise ValueError(f"keep indices {keep} out of range for {len(dims)} subsystems")
    n = len(dims)
    t = rho.reshape(dims + dims)
    # contract traced subsystems from the highest index down so axes stay valid
    for idx in reversed(range(n)):
        if idx in keep:
            continue
        cur = t.ndim // 2
        t = np.trace(t, axis1=idx, axis2=idx + cur)
    d = int(np.prod([dims[k] for k in keep])) if keep else 1
    return t.reshape(d, d)


def ket(*labels: str) -> np.ndarray:
    """Product ket from single-qubit labels ``'0'``/``'1'`` (lab) or ``'+x'``/``'-x'`` (dressed)."""
    table = {
        "1": np.array([1, 0], dtype=complex),
        "0": np.array([0, 1], dtype=complex),
        "+x": np.array([1, 0], dtype=complex),
        "-x": np.array([0, 1], dtype=complex),
    }
    return kron(*[table[lab] for lab in labels])


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def check_density_matrix(rho: np.ndarray, tol: float = 1e-9) -> None:
    if not is_hermitian(rho, tol=1e-12 if tol < 1e-12 else tol):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > 1e-10 + tol:
        raise ValueError(f"density matrix trace {np.trace(rho).real:.12g} != 1")
    if np.min(np.linalg.eigvalsh(0.5 * (rho + dag(rho)))) < -tol:
        raise ValueError("density matrix has negative eigenvalues")


def steady_state(liouv: np.ndarray, dim: int | None = None, gap_tol: float = 1e-9) -> np.ndarray:
    """Unit-trace null vector of ``L``.

    Raises when more than one eigenvalue is numerically zero, since the
    stationary state is then not unique.
    """
    if dim is None:
        dim = int(round(np.sqrt(liouv.shape[0])))
    evals, evecs = scipy.linalg.eig(liouv)
    order = np.argsort(np.abs(evals))
    scale = max(np.max(np.abs(evals)), 1.0)
    if np.abs(evals[order[1]]) < gap_tol * scale:
        raise PropagationError("degenerate zero eigenvalue; steady state is not unique")
    rho = unvec(evecs[:, order[0]], dim)
    rho = rho / np.trace(rho)
    return 0.5 * (rho + dag(rho))
