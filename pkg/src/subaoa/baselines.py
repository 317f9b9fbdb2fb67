"""Delay-and-Sum, steered-response GCC-PHAT and MUSIC spectra, plus
greedy peak picking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_count, check_tensor
from .algorithm import DEFAULT_EPS, _noise_spectrum
from .frontend import SnapshotTensor, sample_covariance
from .geometry import AngleGrid, MicArray, steering_tensor

PHAT_FLOOR = 1e-15
DEFAULT_MIN_SEPARATION = 10.0


@dataclass(frozen=True)
class Spectrum:
    grid: AngleGrid
    scores: np.ndarray
    algorithm: str

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=float)
        if s.shape != (len(self.grid),):
            raise ValueError("one score per grid angle required")
        if not np.all(np.isfinite(s)):
            raise ValueError("spectrum scores must be finite")
        object.__setattr__(self, "scores", s)

    @property
    def argmax_angle(self) -> float:
        return float(self.grid.angles[int(np.argmax(self.scores))])


@dataclass(frozen=True)
class PeakSet:
    angles: np.ndarray
    scores: np.ndarray


def _grid_for(array, grid):
    grid = grid or AngleGrid.for_array(array)
    array.check_angles(grid.angles)
    return grid


def delay_and_sum(tensor: SnapshotTensor, array: MicArray, grid: AngleGrid | None = None) -> Spectrum:
    """Steered power ``sum_f sum_t |a_{f,theta}^H x_{f,t}|^2``."""
    tensor = check_tensor(tensor, array)
    grid = _grid_for(array, grid)
    A = steering_tensor(array, tensor.freqs, grid.angles)
    R = sample_covariance(tensor.data) * tensor.n_frames
    power = np.einsum("fmg,fmn,fng->g", A.conj(), R, A, optimize=True).real
    return Spectrum(grid, power, "das")


def gcc_phat(tensor: SnapshotTensor, array: MicArray, grid: AngleGrid | None = None) -> Spectrum:
    """Pairwise PHAT-weighted steered response.

    ``score(theta) = sum_{i<j} sum_f Re[P_ij(f) exp(j w (tau_i - tau_j))]``
    where ``P_ij`` is the frame-summed cross-spectrum normalised to unit
    magnitude and ``tau_m(theta)`` the geometric delay of microphone ``m``.
    """
    tensor = check_tensor(tensor, array)
    grid = _grid_for(array, grid)
    X = tensor.data
    G = X @ np.swapaxes(X.conj(), -1, -2)  # (F, M, M)
    mag = np.abs(G)
    P = np.where(mag >= PHAT_FLOOR, G / np.where(mag >= PHAT_FLOOR, mag, 1.0), 0.0)
    # conj of the steering vector carries exp(+j w tau_m)
    E = steering_tensor(array, tensor.freqs, grid.angles).conj() * np.sqrt(array.n_mics)
    full = np.einsum("fig,fij,fjg->g", E, P, E.conj(), optimize=True).real
    diag = np.einsum("fii->", P).real
    return Spectrum(grid, 0.5 * (full - diag), "gcc")


def music(tensor: SnapshotTensor, array: MicArray, grid: AngleGrid | None = None,
          signal_dim: int = 1, eps: float = DEFAULT_EPS) -> Spectrum:
    """MUSIC pseudo-likelihood ``sum_f -log(max(eps, ||N_f^H a_{f,theta}||^2))``.

    Uses the same kernels as the first SubAoA iteration, so the two agree
    exactly for equal ``signal_dim``.
    """
    tensor = check_tensor(tensor, array)
    check_count(signal_dim, "signal_dim", 1)
    if signal_dim >= array.n_mics:
        raise ValueError(f"signal_dim must be < {array.n_mics}")
    grid = _grid_for(array, grid)
    A = steering_tensor(array, tensor.freqs, grid.angles)
    return Spectrum(grid, _noise_spectrum(tensor.data, A, signal_dim, eps), "music")


def _is_circular(grid: AngleGrid) -> bool:
    a = grid.angles
    return len(a) > 1 and a[-1] - a[0] + grid.resolution >= 360.0 - 1e-9


def peak_pick(s: Spectrum, k: int, min_separation: float = DEFAULT_MIN_SEPARATION) -> PeakSet:
    """Greedy top-``k`` local maxima at least ``min_separation`` degrees apart.

    Neighbourhoods wrap around on full-circle grids. Equal scores go to the
    lower angle first.
    """
    check_count(k, "k", 1)
    x = s.scores
    angles = s.grid.angles
    n = x.size
    circular = _is_circular(s.grid)
    if n == 1:
        cand = np.array([0])
    else:
        if circular:
            left, right = np.roll(x, 1), np.roll(x, -1)
        else:
            left = np.concatenate([[-np.inf], x[:-1]])
            right = np.concatenate([x[1:], [-np.inf]])
        cand = np.flatnonzero((x >= left) & (x >= right))
    cand = cand[np.lexsort((angles[cand], -x[cand]))]
    chosen: list[int] = []
    for i in cand:
        d = np.abs(angles[chosen] - angles[i])
        if circular:
            d = np.minimum(d, 360.0 - d)
        if np.all(d >= min_separation - 1e-9):
            chosen.append(int(i))
            if len(chosen) == k:
                break
    return PeakSet(angles[chosen].copy(), x[chosen].copy())
