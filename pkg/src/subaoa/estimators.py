"""scikit-learn style wrappers around the AoA estimators.

``fit(X)`` estimates on a :class:`~subaoa.frontend.SnapshotTensor` and stores
the results in trailing-underscore attributes; ``predict(X)`` returns the
detected angles. Chain after :class:`~subaoa.frontend.StftTransformer` to
work from raw recordings::

    pipe = make_pipeline(StftTransformer(rate=16000), SubAoA(array=mics))
    angles = pipe.fit(recording).predict(recording)
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import algorithm, baselines
from ._validation import check_tensor
from .geometry import AngleGrid, MicArray


class _AoAEstimator(BaseEstimator):
    def _grid(self) -> AngleGrid:
        if not isinstance(self.array, MicArray):
            raise TypeError("array must be a MicArray")
        return AngleGrid.for_array(self.array, self.resolution)

    def predict(self, X) -> np.ndarray:
        return self.fit(X).angles_

    def fit_predict(self, X, y=None) -> np.ndarray:
        return self.fit(X).angles_


class SubAoA(_AoAEstimator):
    """Successive AoA-subspace cancellation.

    Parameters
    ----------
    array : MicArray
    max_paths : int
        Number of arrivals to decode (needs ``max_paths < M``).
    resolution : float
        Grid step in degrees.
    signal_dim : int or None
        Per-bin signal dimension of the first iteration; defaults to
        ``max_paths``.
    auto_stop, stop_ratio
        Stop once an iteration's peak drops below ``stop_ratio`` times the
        first peak.

    Attributes
    ----------
    angles_ : ndarray of detected angles, strongest first
    spectra_ : ndarray ``(iterations, G)``
    output_ : SubAoaOutput
    grid_ : AngleGrid
    """

    def __init__(self, array=None, max_paths=4, resolution=1.0, signal_dim=None,
                 likelihood_floor=algorithm.DEFAULT_EPS, auto_stop=False, stop_ratio=0.2):
        self.array = array
        self.max_paths = max_paths
        self.resolution = resolution
        self.signal_dim = signal_dim
        self.likelihood_floor = likelihood_floor
        self.auto_stop = auto_stop
        self.stop_ratio = stop_ratio

    def fit(self, X, y=None):
        grid = self._grid()
        X = check_tensor(X, self.array)
        cfg = algorithm.SubAoaConfig(
            max_paths=self.max_paths,
            grid=grid,
            signal_dim_per_bin=self.signal_dim,
            likelihood_floor=self.likelihood_floor,
            auto_stop=self.auto_stop,
            stop_ratio=self.stop_ratio,
        )
        self.output_ = algorithm.run(X, self.array, cfg)
        self.grid_ = grid
        self.angles_ = self.output_.angles
        self.spectra_ = self.output_.spectra
        return self


class _SpectrumEstimator(_AoAEstimator):
    def _spectrum(self, X, grid):
        raise NotImplementedError

    def fit(self, X, y=None):
        grid = self._grid()
        X = check_tensor(X, self.array)
        self.spectrum_ = self._spectrum(X, grid)
        self.grid_ = grid
        peaks = baselines.peak_pick(self.spectrum_, self._n_peaks(), self.min_separation)
        self.angles_ = peaks.angles
        self.peak_scores_ = peaks.scores
        return self

    def _n_peaks(self):
        return self.n_peaks


class MUSIC(_SpectrumEstimator):
    """MUSIC on the same fused ``-log`` scale as :class:`SubAoA`.

    ``n_peaks`` defaults to ``signal_dim``.
    """

    def __init__(self, array=None, signal_dim=1, n_peaks=None, resolution=1.0,
                 min_separation=baselines.DEFAULT_MIN_SEPARATION,
                 likelihood_floor=algorithm.DEFAULT_EPS):
        self.array = array
        self.signal_dim = signal_dim
        self.n_peaks = n_peaks
        self.resolution = resolution
        self.min_separation = min_separation
        self.likelihood_floor = likelihood_floor

    def _spectrum(self, X, grid):
        return baselines.music(X, self.array, grid, self.signal_dim, self.likelihood_floor)

    def _n_peaks(self):
        return self.signal_dim if self.n_peaks is None else self.n_peaks


class GccPhat(_SpectrumEstimator):
    """Steered-response GCC-PHAT over all microphone pairs."""

    def __init__(self, array=None, n_peaks=1, resolution=1.0,
                 min_separation=baselines.DEFAULT_MIN_SEPARATION):
        self.array = array
        self.n_peaks = n_peaks
        self.resolution = resolution
        self.min_separation = min_separation

    def _spectrum(self, X, grid):
        return baselines.gcc_phat(X, self.array, grid)


class DelayAndSum(_SpectrumEstimator):
    """Conventional steered-power beamformer."""

    def __init__(self, array=None, n_peaks=1, resolution=1.0,
                 min_separation=baselines.DEFAULT_MIN_SEPARATION):
        self.array = array
        self.n_peaks = n_peaks
        self.resolution = resolution
        self.min_separation = min_separation

    def _spectrum(self, X, grid):
        return baselines.delay_and_sum(X, self.array, grid)
