"""Small dense complex kernels: Hermitian eigensolver, noise subspaces,
null-space bases and projections.

All kernels accept a single matrix or a stack of them along leading axes, so
the per-frequency work of the estimators runs as one batched call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 30


@dataclass(frozen=True)
class HermitianEig:
    """Eigenvalues in ascending order with eigenvectors as matching columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweeps: int = 0

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[-1]


@dataclass(frozen=True)
class NoiseSubspace:
    basis: np.ndarray

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[-2]

    @property
    def size(self) -> int:
        return self.basis.shape[-1]


@dataclass(frozen=True)
class NullSpaceBasis:
    """Orthonormal rows spanning the complement of ``vector``."""

    rows: np.ndarray
    vector: np.ndarray

    @property
    def ambient_dim(self) -> int:
        return self.rows.shape[-1]


def _jacobi(A: np.ndarray, tol: float, max_sweeps: int):
    """Cyclic complex Jacobi on a stack ``(B, D, D)``; modifies ``A`` in place."""
    nb, D, _ = A.shape
    V = np.broadcast_to(np.eye(D, dtype=complex), (nb, D, D)).copy()
    thresh = tol * np.sqrt(np.sum(np.abs(A) ** 2, axis=(1, 2)))
    iu = np.triu_indices(D, 1)
    sweeps = 0
    for sweeps in range(max_sweeps + 1):
        if D < 2 or np.all(np.max(np.abs(A[:, iu[0], iu[1]]), axis=1) <= thresh):
            break
        if sweeps == max_sweeps:
            break
        for p in range(D - 1):
            for q in range(p + 1, D):
                apq = A[:, p, q]
                mag = np.abs(apq)
                active = mag > thresh
                if not np.any(active):
                    continue
                safe = np.where(active, mag, 1.0)
                ph = np.where(active, apq / safe, 1.0)
                zeta = (A[:, q, q].real - A[:, p, p].real) / (2.0 * safe)
                t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                c = np.where(active, c, 1.0)[:, None]
                s = np.where(active, s, 0.0)[:, None]
                ph = ph[:, None]

                cp, cq = A[:, :, p].copy(), A[:, :, q].copy()
                A[:, :, p] = c * cp - s * ph.conj() * cq
                A[:, :, q] = s * ph * cp + c * cq
                rp, rq = A[:, p, :].copy(), A[:, q, :].copy()
                A[:, p, :] = c * rp - s * ph * rq
                A[:, q, :] = s * ph.conj() * rp + c * rq
                A[active, p, q] = 0.0
                A[active, q, p] = 0.0

                vp, vq = V[:, :, p].copy(), V[:, :, q].copy()
                V[:, :, p] = c * vp - s * ph.conj() * vq
                V[:, :, q] = s * ph * vp + c * vq
    return A, V, sweeps


def hermitian_eig(R, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS) -> HermitianEig:
    """Eigendecomposition of a Hermitian matrix (or a stack of them).

    The input is symmetrized as ``(R + R^H)/2`` first. Rotations stop once
    every off-diagonal magnitude is below ``tol * ||R||_F`` or after
    ``max_sweeps`` sweeps. Equal eigenvalues keep their diagonal order.
    """
    R = np.asarray(R)
    if R.ndim < 2 or R.shape[-1] != R.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {R.shape}")
    if not np.all(np.isfinite(R)):
        raise ValueError("matrix has non-finite entries")
    lead, D = R.shape[:-2], R.shape[-1]
    A = R.reshape(-1, D, D).astype(complex)
    A = 0.5 * (A + np.conj(np.swapaxes(A, -1, -2)))
    A, V, sweeps = _jacobi(A, tol, max_sweeps)
    w = np.real(np.diagonal(A, axis1=1, axis2=2))
    order = np.argsort(w, axis=1, kind="stable")
    w = np.take_along_axis(w, order, axis=1)
    V = np.take_along_axis(V, order[:, None, :], axis=2)
    return HermitianEig(w.reshape(*lead, D), V.reshape(*lead, D, D), sweeps)


def noise_subspace(eig: HermitianEig, signal_dim: int) -> NoiseSubspace:
    """Eigenvectors of the ``D - signal_dim`` smallest eigenvalues."""
    D = eig.dim
    if not 0 <= signal_dim < D:
        raise ValueError(f"signal_dim must be in [0, {D}), got {signal_dim}")
    return NoiseSubspace(eig.eigenvectors[..., :, : D - signal_dim])


def householder_null_rows(a: np.ndarray) -> np.ndarray:
    """Rows 2..D of the Householder reflector that sends ``a`` to ``e_1``.

    ``a`` has shape ``(..., D)``; the result has shape ``(..., D-1, D)``. The
    reflector maps ``a`` to ``-exp(i arg a_1) ||a|| e_1`` (``arg 0 := 0``),
    which avoids cancellation in ``a - alpha e_1``.
    """
    a = np.asarray(a, dtype=complex)
    nrm = np.linalg.norm(a, axis=-1)
    a1 = a[..., 0]
    mag1 = np.abs(a1)
    ph = np.where(mag1 > 0, a1 / np.where(mag1 > 0, mag1, 1.0), 1.0)
    v = a.copy()
    v[..., 0] = a1 + ph * nrm
    vv = 2.0 * nrm * (nrm + mag1)
    D = a.shape[-1]
    eye = np.eye(D, dtype=complex)[1:]
    return eye - 2.0 * v[..., 1:, None] * v[..., None, :].conj() / vv[..., None, None]


def null_space_of_vector(a) -> NullSpaceBasis:
    """Orthonormal basis ``B`` (``(D-1) x D``) with ``B a = 0``."""
    a = np.asarray(a, dtype=complex)
    if a.ndim < 1 or a.shape[-1] < 2:
        raise ValueError("need a vector of dimension >= 2")
    nrm = np.linalg.norm(a, axis=-1)
    if np.any(nrm == 0):
        raise ValueError("cannot take the null space of a zero vector")
    if np.any(np.abs(nrm - 1.0) > 1e-9):
        raise ValueError("vector must have unit norm")
    return NullSpaceBasis(householder_null_rows(a), a)


def project(B: NullSpaceBasis | np.ndarray, X) -> np.ndarray:
    """Map ``(D, T)`` data into the ``D-1`` dimensional complement: ``B @ X``."""
    rows = B.rows if isinstance(B, NullSpaceBasis) else np.asarray(B)
    X = np.asarray(X)
    if X.shape[-2] != rows.shape[-1]:
        raise ValueError(
            f"dimension mismatch: basis acts on {rows.shape[-1]}-vectors, data has {X.shape[-2]} rows"
        )
    return rows @ X
