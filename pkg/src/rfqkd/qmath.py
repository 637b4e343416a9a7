"""Scalar entropies, Bloch-sphere geometry and small Hermitian linear algebra.

Everything here works on plain numpy arrays.  The two-qubit basis ordering is
``|00>, |01>, |10>, |11>`` with qubit A as the left tensor factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

HERMITIAN_TOL = 1e-9
PSD_TOL = 1e-9
UNIT_TOL = 1e-9

I2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = np.stack([PAULI_X, PAULI_Y, PAULI_Z])

SINGLET = np.array([0, 1, -1, 0], dtype=complex) / math.sqrt(2)


class InvariantError(ValueError):
    """A numerical object violates one of its structural invariants."""


# --------------------------------------------------------------------------
# entropies

def binary_entropy(p: float) -> float:
    """Binary entropy ``h(p)`` in bits, with ``0 log 0 = 0``."""
    p = float(p)
    if p < -1e-12 or p > 1 + 1e-12:
        raise ValueError(f"binary_entropy argument {p!r} outside [0, 1]")
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def binary_entropy_array(p: np.ndarray) -> np.ndarray:
    """Vectorised ``h`` for arrays; arguments are clipped to [0, 1]."""
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    q = 1.0 - p
    out = np.zeros_like(p)
    inner = (p > 0.0) & (q > 0.0)
    pi, qi = p[inner], q[inner]
    out[inner] = -pi * np.log2(pi) - qi * np.log2(qi)
    return out


def _entropy_terms(p: Iterable[float]) -> float:
    return -math.fsum(x * math.log2(x) for x in p if x > 0.0)


def shannon_entropy(p) -> float:
    """Shannon entropy in bits of a probability vector.

    Raises ``ValueError`` on negative entries or a sum that differs from one
    by more than 1e-9.
    """
    p = [float(x) for x in p]
    if any(x < -1e-12 for x in p):
        raise ValueError(f"negative probability in {p!r}")
    if abs(math.fsum(p) - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {math.fsum(p)!r}, not 1")
    return _entropy_terms(p)


# --------------------------------------------------------------------------
# Hermitian eigendecomposition

def _check_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> None:
    if m.shape[-1] != m.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {m.shape}")
    err = np.max(np.abs(m - np.conj(np.swapaxes(m, -1, -2)))) if m.size else 0.0
    if err > tol:
        raise InvariantError(f"matrix is not Hermitian (max deviation {err:.3g})")


def hermitian_eigh(m, tol: float = 1e-12, max_sweeps: int = 60):
    """Eigendecomposition of Hermitian matrices by cyclic complex Jacobi rotations.

    Parameters
    ----------
    m : array_like, shape (..., n, n)
        One Hermitian matrix or a stack of them.  Stacks are rotated in lockstep,
        so diagonalising many small matrices costs about as much as one.
    tol : float
        Sweeps stop once the off-diagonal Frobenius norm of every matrix falls
        below ``tol`` times ``max(1, ||m||_F)``.

    Returns
    -------
    values : ndarray, shape (..., n)
        Real eigenvalues in descending order.
    vectors : ndarray, shape (..., n, n)
        Unitary matrix whose columns are the matching eigenvectors.
    """
    a = np.array(m, dtype=complex)
    _check_hermitian(a)
    batch_shape = a.shape[:-2]
    n = a.shape[-1]
    a = a.reshape((-1, n, n))
    a = 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))
    v = np.broadcast_to(np.eye(n, dtype=complex), a.shape).copy()
    scale = np.maximum(1.0, np.linalg.norm(a, axis=(-2, -1)))
    offdiag = ~np.eye(n, dtype=bool)
    pairs = [(p, q) for p in range(n) for q in range(p + 1, n)]

    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.abs(a[:, offdiag]) ** 2, axis=-1))
        if np.all(off < tol * scale):
            break
        for p, q in pairs:
            apq = a[:, p, q]
            r = np.abs(apq)
            phase = np.where(r > 0, apq / np.where(r > 0, r, 1.0), 1.0)
            theta = 0.5 * np.arctan2(2.0 * r, (a[:, q, q] - a[:, p, p]).real)
            c, s = np.cos(theta), np.sin(theta)
            # columns p, q of the rotation: diag(1, conj(phase)) @ [[c, s], [-s, c]]
            jpp, jpq = c, s
            jqp, jqq = -s * np.conj(phase), c * np.conj(phase)
            cols_p = a[:, :, p].copy()
            cols_q = a[:, :, q].copy()
            a[:, :, p] = cols_p * jpp[:, None] + cols_q * jqp[:, None]
            a[:, :, q] = cols_p * jpq[:, None] + cols_q * jqq[:, None]
            rows_p = a[:, p, :].copy()
            rows_q = a[:, q, :].copy()
            a[:, p, :] = np.conj(jpp)[:, None] * rows_p + np.conj(jqp)[:, None] * rows_q
            a[:, q, :] = np.conj(jpq)[:, None] * rows_p + np.conj(jqq)[:, None] * rows_q
            vp = v[:, :, p].copy()
            vq = v[:, :, q].copy()
            v[:, :, p] = vp * jpp[:, None] + vq * jqp[:, None]
            v[:, :, q] = vp * jpq[:, None] + vq * jqq[:, None]
    else:
        raise RuntimeError("Jacobi iteration did not converge")

    values = np.real(np.einsum("kii->ki", a))
    order = np.argsort(-values, axis=-1, kind="stable")
    values = np.take_along_axis(values, order, axis=-1)
    v = np.take_along_axis(v, order[:, None, :], axis=-1)
    return values.reshape(batch_shape + (n,)), v.reshape(batch_shape + (n, n))


def hermitian_eigenvalues(m) -> np.ndarray:
    """Descending real eigenvalues of a Hermitian matrix (or stack)."""
    return hermitian_eigh(m)[0]


def spectral_entropy(eigenvalues) -> float:
    """Entropy of a spectrum, treating slightly negative values as zero."""
    lam = np.asarray(eigenvalues, dtype=float)
    if np.any(lam < -PSD_TOL):
        raise InvariantError(f"negative eigenvalue {lam.min():.3g} in entropy")
    return _entropy_terms(np.clip(lam, 0.0, None))


def von_neumann_entropy(m) -> float:
    """``-Tr(rho log2 rho)`` for a unit-trace PSD matrix."""
    m = np.asarray(m, dtype=complex)
    tr = np.trace(m).real
    if abs(tr - 1.0) > 1e-9:
        raise ValueError(f"density matrix has trace {tr!r}")
    return spectral_entropy(hermitian_eigenvalues(m))


def psd_sqrt(m) -> np.ndarray:
    """Principal square root of a PSD matrix, negative eigenvalues clipped."""
    lam, vec = hermitian_eigh(m)
    root = np.sqrt(np.clip(lam, 0.0, None))
    return (vec * root[..., None, :]) @ np.conj(np.swapaxes(vec, -1, -2))


# --------------------------------------------------------------------------
# Bloch geometry

def bloch_operator(n) -> np.ndarray:
    """``n . sigma`` for a Bloch vector ``n``."""
    return np.tensordot(np.asarray(n, dtype=float), PAULIS, axes=1)


def projector(n, outcome: int) -> np.ndarray:
    """Projector onto outcome ``+1`` or ``-1`` of the measurement along ``n``."""
    return 0.5 * (I2 + outcome * bloch_operator(n))


def rotation_from_quaternion(q) -> np.ndarray:
    """3x3 rotation matrix (or stack) from unit quaternions ``(w, x, y, z)``."""
    q = np.asarray(q, dtype=float)
    w, x, y, z = np.moveaxis(q, -1, 0)
    rows = [
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def quaternion_from_rotation(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    # Shepperd's method: branch on the largest of the four squared components
    tr = np.trace(r)
    cands = np.array([1 + tr, 1 + r[0, 0] - r[1, 1] - r[2, 2],
                      1 - r[0, 0] + r[1, 1] - r[2, 2], 1 - r[0, 0] - r[1, 1] + r[2, 2]])
    k = int(np.argmax(cands))
    s = 2.0 * math.sqrt(max(cands[k], 0.0))
    if k == 0:
        q = [s / 4, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s]
    elif k == 1:
        q = [(r[2, 1] - r[1, 2]) / s, s / 4, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s]
    elif k == 2:
        q = [(r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, s / 4, (r[1, 2] + r[2, 1]) / s]
    else:
        q = [(r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s, (r[1, 2] + r[2, 1]) / s, s / 4]
    q = np.array(q)
    return q / np.linalg.norm(q)


def unitary_from_rotation(r) -> np.ndarray:
    """SU(2) element ``U`` with ``U (n.sigma) U^dag = (R n).sigma``."""
    w, x, y, z = quaternion_from_rotation(r)
    return w * I2 - 1j * (x * PAULI_X + y * PAULI_Y + z * PAULI_Z)


def axis_angle_rotation(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    half = 0.5 * angle
    return rotation_from_quaternion(np.concatenate([[math.cos(half)], math.sin(half) * axis]))


def rotation_angle(r) -> float:
    """Rotation angle in [0, pi] of a proper rotation matrix."""
    c = 0.5 * (np.trace(r) - 1.0)
    return math.acos(min(1.0, max(-1.0, c)))


def orthonormalize(r) -> np.ndarray:
    """Nearest orthogonal matrix with the same determinant sign (polar factor)."""
    u, _, vt = np.linalg.svd(np.asarray(r, dtype=float))
    return u @ vt


# --------------------------------------------------------------------------
# domain types

def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MeasurementTriad:
    """Three mutually orthogonal unit Bloch vectors, stored as the rows of ``vectors``."""

    vectors: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.vectors, dtype=float)
        if vec.shape != (3, 3):
            raise ValueError(f"triad needs three 3-vectors, got shape {vec.shape}")
        gram = vec @ vec.T
        err = np.max(np.abs(gram - np.eye(3)))
        if err > UNIT_TOL:
            raise InvariantError(f"triad is not orthonormal (max Gram deviation {err:.3g})")
        object.__setattr__(self, "vectors", _frozen(vec))

    @classmethod
    def canonical(cls) -> "MeasurementTriad":
        return cls(np.eye(3))

    @classmethod
    def from_rotation(cls, r) -> "MeasurementTriad":
        """Triad whose vectors are the images of X, Y, Z under ``r`` (its columns)."""
        return cls(np.asarray(r, dtype=float).T)

    @property
    def handedness(self) -> int:
        return 1 if np.linalg.det(self.vectors) > 0 else -1

    def __getitem__(self, i: int) -> np.ndarray:
        return self.vectors[i]

    def __iter__(self):
        return iter(self.vectors)


@dataclass(frozen=True, eq=False)
class TwoQubitState:
    """4x4 density matrix in the ``|00>, |01>, |10>, |11>`` basis."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (4, 4):
            raise ValueError(f"two-qubit state must be 4x4, got {rho.shape}")
        _check_hermitian(rho)
        tr = np.trace(rho).real
        if abs(tr - 1.0) > 1e-9:
            raise InvariantError(f"state has trace {tr!r}")
        lam_min = hermitian_eigenvalues(rho)[-1]
        if lam_min < -PSD_TOL:
            raise InvariantError(f"state has negative eigenvalue {lam_min:.3g}")
        object.__setattr__(self, "rho", _frozen(rho))

    @property
    def spectrum(self) -> np.ndarray:
        return hermitian_eigenvalues(self.rho)

    def reduced(self, party: str) -> np.ndarray:
        t = self.rho.reshape(2, 2, 2, 2)
        if party == "A":
            return np.einsum("ijkj->ik", t)
        if party == "B":
            return np.einsum("jijk->ik", t)
        raise ValueError(f"party must be 'A' or 'B', not {party!r}")


def werner_state(visibility: float) -> TwoQubitState:
    """Singlet mixed with white noise: ``V |psi-><psi-| + (1 - V) I/4``."""
    v = float(visibility)
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"visibility {v!r} outside [0, 1]")
    singlet = np.outer(SINGLET, SINGLET.conj())
    return TwoQubitState(v * singlet + (1.0 - v) * np.eye(4) / 4)


def werner_tangle(visibility: float) -> float:
    v = float(visibility)
    return max(0.0, 1.5 * v - 0.5) ** 2


def visibility_from_tangle(tangle: float) -> float:
    """Werner visibility with the given tangle, ``V = (2 sqrt(T) + 1) / 3``."""
    t = float(tangle)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"tangle {t!r} outside [0, 1]")
    return (2.0 * math.sqrt(t) + 1.0) / 3.0


def visibility_from_spectrum(eigenvalues) -> float:
    """Werner visibility matching the largest eigenvalue ``(1 + 3V)/4``."""
    return (4.0 * float(np.max(eigenvalues)) - 1.0) / 3.0


def psd_project(m) -> TwoQubitState:
    """Clip negative eigenvalues to zero and renormalise to unit trace.

    A matrix that is already PSD is returned as is (wrapped in a state).
    """
    m = np.asarray(m, dtype=complex)
    _check_hermitian(m)
    m = 0.5 * (m + m.conj().T)
    lam, vec = hermitian_eigh(m)
    if lam[-1] >= 0.0:
        return TwoQubitState(m / np.trace(m).real)
    lam = np.clip(lam, 0.0, None)
    lam = lam / lam.sum()
    return TwoQubitState((vec * lam) @ vec.conj().T)
