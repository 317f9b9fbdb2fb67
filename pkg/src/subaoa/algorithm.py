"""Iterative AoA-subspace cancellation (SubAoA).

Each iteration finds the strongest remaining arrival from the fused
noise-subspace likelihood, then projects both the residual snapshots and
the steering vectors onto the orthogonal complement of that arrival's
steering vector, so the next iteration works one dimension lower with the
detected direction removed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from ._validation import check_count, check_tensor
from .frontend import FrequencyBand, SnapshotTensor, sample_covariance, select_band
from .geometry import AngleGrid, MicArray, SteeringMatrix, steering_tensor, steering_vector
from .linalg import NoiseSubspace, hermitian_eig, householder_null_rows, noise_subspace

DEFAULT_EPS = 1e-12
# projected steering columns at or below this norm count as cancelled
CANCEL_TOL = 1e-9
ATTENUATION_FLOOR_DB = -300.0


@dataclass(frozen=True)
class SubAoaConfig:
    """Knobs for :func:`run`.

    ``signal_dim_per_bin`` defaults to ``max_paths``; in iteration ``k`` the
    per-bin signal dimension is ``signal_dim_per_bin - k`` so the noise
    subspace keeps size ``M - K`` while the ambient dimension shrinks.
    ``band=None`` uses the tensor's bins as given.
    """

    max_paths: int = 4
    grid: AngleGrid | None = None
    band: FrequencyBand | None = None
    signal_dim_per_bin: int | None = None
    likelihood_floor: float = DEFAULT_EPS
    auto_stop: bool = False
    stop_ratio: float = 0.2

    def __post_init__(self):
        check_count(self.max_paths, "max_paths", 1)
        if self.signal_dim_per_bin is not None:
            check_count(self.signal_dim_per_bin, "signal_dim_per_bin", 0)
        if not self.likelihood_floor > 0:
            raise ValueError("likelihood_floor must be positive")
        if not 0 < self.stop_ratio < 1:
            raise ValueError("stop_ratio must lie in (0, 1)")

    @property
    def signal_dim(self) -> int:
        return self.max_paths if self.signal_dim_per_bin is None else self.signal_dim_per_bin


@dataclass(frozen=True)
class IterationResult:
    angle: float
    spectrum: np.ndarray
    peak_value: float
    iteration_index: int
    grid_index: int


@dataclass(frozen=True)
class SubAoaOutput:
    detections: list[IterationResult]
    grid: AngleGrid
    stopped_early: bool = False

    @property
    def angles(self) -> np.ndarray:
        return np.array([d.angle for d in self.detections])

    @property
    def spectra(self) -> np.ndarray:
        """Per-iteration spectra stacked as ``(iterations, G)``."""
        if not self.detections:
            return np.empty((0, len(self.grid)))
        return np.stack([d.spectrum for d in self.detections])


@dataclass
class IterationState:
    """Working state right after an iteration's projection step."""

    result: IterationResult
    residual: np.ndarray  # (F, D-1, T)
    steering: np.ndarray  # (F, D-1, G), unit-norm columns except cancelled ones
    basis: np.ndarray  # (F, D-1, D)
    cancelled: np.ndarray = field(repr=False)  # (G,) bool


def aoa_likelihood(A, N, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Negative log of each steering vector's energy in the noise subspace.

    ``A`` is ``(..., D, G)`` (or a :class:`SteeringMatrix`), ``N`` is
    ``(..., D, n)`` (or a :class:`NoiseSubspace`). Returns ``(..., G)``:
    ``-log(max(eps, ||N^H a_g||^2))``.
    """
    A = A.columns if isinstance(A, SteeringMatrix) else np.asarray(A)
    N = N.basis if isinstance(N, NoiseSubspace) else np.asarray(N)
    if A.shape[-2] != N.shape[-2]:
        raise ValueError(
            f"steering vectors live in dimension {A.shape[-2]}, noise subspace in {N.shape[-2]}"
        )
    proj = np.swapaxes(N.conj(), -1, -2) @ A
    energy = np.sum(proj.real ** 2 + proj.imag ** 2, axis=-2)
    return -np.log(np.maximum(eps, energy))


def _noise_spectrum(X: np.ndarray, A: np.ndarray, signal_dim: int, eps: float) -> np.ndarray:
    """Bin-summed likelihood for snapshots ``(F, D, T)`` and steering ``(F, D, G)``."""
    eig = hermitian_eig(sample_covariance(X))
    N = noise_subspace(eig, signal_dim)
    return aoa_likelihood(A, N, eps).sum(axis=0)


def _prepare(tensor: SnapshotTensor, array: MicArray, cfg: SubAoaConfig):
    tensor = check_tensor(tensor, array)
    if cfg.band is not None:
        tensor = select_band(tensor, cfg.band)
    M = array.n_mics
    if cfg.max_paths >= M:
        raise ValueError(f"max_paths={cfg.max_paths} needs more than {cfg.max_paths} microphones (have {M})")
    grid = cfg.grid or AngleGrid.for_array(array)
    array.check_angles(grid.angles)
    return tensor, grid


def iterate(tensor: SnapshotTensor, array: MicArray, cfg: SubAoaConfig | None = None) -> Iterator[IterationState]:
    """Yield the state after each of the ``max_paths`` iterations.

    No stopping rule is applied here; see :func:`run`.
    """
    for _, state in _iterate(tensor, array, cfg or SubAoaConfig(), project_last=True):
        yield state


def _iterate(tensor, array, cfg, project_last):
    tensor, grid = _prepare(tensor, array, cfg)
    X = tensor.data
    A = steering_tensor(array, tensor.freqs, grid.angles)
    cancelled = np.zeros(len(grid), dtype=bool)
    detected: list[int] = []
    for k in range(cfg.max_paths):
        D = X.shape[1]
        sd = max(0, min(cfg.signal_dim - k, D - 1))
        spectrum = _noise_spectrum(X, A, sd, cfg.likelihood_floor)
        if np.any(cancelled):
            spectrum[cancelled] = np.min(spectrum[~cancelled])
        # highest entry not already detected; repeats only arise from degeneracy
        order = np.argsort(-spectrum, kind="stable")
        idx = int(next(i for i in order if i not in detected))
        detected.append(idx)
        result = IterationResult(
            angle=float(grid.angles[idx]),
            spectrum=spectrum,
            peak_value=float(spectrum[idx]),
            iteration_index=k,
            grid_index=idx,
        )
        if k == cfg.max_paths - 1 and not project_last:
            yield result, None
            return

        a = A[:, :, idx]
        a = a / np.linalg.norm(a, axis=-1, keepdims=True)
        B = householder_null_rows(a)
        X = B @ X
        A = B @ A
        norms = np.linalg.norm(A, axis=1)  # (F, G)
        cancelled = cancelled | np.any(norms <= CANCEL_TOL, axis=0)
        cancelled[idx] = True
        norms[:, cancelled] = np.inf
        A = A / norms[:, None, :]
        yield result, IterationState(result, X, A, B, cancelled.copy())


def run(tensor: SnapshotTensor, array: MicArray, cfg: SubAoaConfig | None = None) -> SubAoaOutput:
    """Detect up to ``max_paths`` arrivals in order of strength.

    With ``auto_stop`` the loop ends at the first iteration whose peak falls
    below ``stop_ratio`` times the first iteration's peak; that iteration is
    not reported.
    """
    cfg = cfg or SubAoaConfig()
    grid = cfg.grid or AngleGrid.for_array(array)
    detections: list[IterationResult] = []
    stopped = False
    # the residual after the last detection is never used, so skip that projection
    for r, _ in _iterate(tensor, array, cfg, project_last=False):
        if cfg.auto_stop and detections and r.peak_value < cfg.stop_ratio * detections[0].peak_value:
            stopped = True
            break
        detections.append(r)
    return SubAoaOutput(detections, grid, stopped)


def projection_attenuation(array: MicArray, f: float, theta0: float, grid: AngleGrid | None = None) -> np.ndarray:
    """Gain ``20 log10 ||B a_theta||`` in dB after cancelling ``theta0``.

    The cancelled direction itself reports :data:`ATTENUATION_FLOOR_DB`.
    """
    grid = grid or AngleGrid.for_array(array)
    a0 = steering_vector(array, f, theta0).entries
    B = householder_null_rows(a0)
    A = steering_tensor(array, [f], array.check_angles(grid.angles))[0]
    gain = np.linalg.norm(B @ A, axis=0)
    floor = 10.0 ** (ATTENUATION_FLOOR_DB / 20.0)
    return 20.0 * np.log10(np.maximum(gain, floor))
