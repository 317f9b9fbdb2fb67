"""Multichannel recordings, STFT snapshots and sample covariances."""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import get_window
from sklearn.base import BaseEstimator, TransformerMixin

DEFAULT_BAND = (300.0, 4000.0)


@dataclass(frozen=True)
class MultichannelRecording:
    """Real samples of shape ``(M, L)`` at ``rate`` Hz."""

    samples: np.ndarray
    rate: float

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim != 2:
            raise ValueError(f"samples must be (channels, length), got shape {x.shape}")
        if not self.rate > 0:
            raise ValueError("rate must be positive")
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "rate", float(self.rate))

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]


def load_wav(path) -> MultichannelRecording:
    """Read a multichannel WAV file; integer PCM is scaled to ``[-1, 1)``."""
    path = Path(path)
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:  # scipy raises bare ValueErrors for bad headers
        raise ValueError(f"cannot read WAV file {path}: {exc}") from exc
    if data.ndim == 1:
        raise ValueError(f"{path}: need at least 2 channels, found 1")
    if data.dtype == np.int16:
        x = data.astype(float) / 32768.0
    elif data.dtype == np.int32:
        x = data.astype(float) / 2147483648.0
    elif data.dtype == np.uint8:
        x = (data.astype(float) - 128.0) / 128.0
    elif data.dtype in (np.float32, np.float64):
        x = data.astype(float)
    else:
        raise ValueError(f"{path}: unsupported sample encoding {data.dtype}")
    if x.shape[1] < 2:
        raise ValueError(f"{path}: need at least 2 channels, found {x.shape[1]}")
    return MultichannelRecording(np.ascontiguousarray(x.T), rate)


def save_wav(rec: MultichannelRecording, path, subtype: str = "float32") -> None:
    """Write ``rec`` as 32-bit float (default) or 16-bit PCM WAV."""
    x = rec.samples.T
    if subtype == "float32":
        data = x.astype(np.float32)
    elif subtype == "pcm16":
        data = np.clip(np.round(x * 32768.0), -32768, 32767).astype(np.int16)
    else:
        raise ValueError(f"unknown WAV subtype {subtype!r}")
    rate = int(round(rec.rate))
    wavfile.write(Path(path), rate, data)


@dataclass(frozen=True)
class StftConfig:
    window_len: int = 1024
    hop: int = 512
    window: str = "hann"

    def __post_init__(self):
        n = int(self.window_len)
        if n < 2 or n & (n - 1):
            raise ValueError("window_len must be a power of two")
        if not 0 < self.hop <= n:
            raise ValueError("hop must satisfy 0 < hop <= window_len")


@dataclass(frozen=True)
class FrequencyBand:
    lo: float
    hi: float

    def __post_init__(self):
        if not 0 <= self.lo < self.hi:
            raise ValueError(f"invalid band [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class SnapshotTensor:
    """Per-bin snapshot matrices, channels as rows.

    ``data`` has shape ``(F, D, T)``: frequency bins, ambient dimension
    (the microphone count before any projection) and frames.
    """

    freqs: np.ndarray
    data: np.ndarray
    rate: float
    config: StftConfig | None = None

    def __post_init__(self):
        data = np.asarray(self.data)
        freqs = np.asarray(self.freqs, dtype=float).ravel()
        if data.ndim != 3:
            raise ValueError(f"snapshot data must be (F, D, T), got shape {data.shape}")
        if data.shape[0] != freqs.size:
            raise ValueError("one frequency per bin required")
        object.__setattr__(self, "data", data.astype(complex, copy=False))
        object.__setattr__(self, "freqs", freqs)

    @property
    def n_bins(self) -> int:
        return self.data.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.data.shape[1]

    @property
    def n_frames(self) -> int:
        return self.data.shape[2]

    def scaled(self, factor) -> "SnapshotTensor":
        return replace(self, data=self.data * factor)


def stft(rec: MultichannelRecording, cfg: StftConfig | None = None) -> SnapshotTensor:
    """Windowed one-sided DFT of every frame of every channel."""
    cfg = cfg or StftConfig()
    n, hop = cfg.window_len, cfg.hop
    L = rec.n_samples
    if L < n:
        raise ValueError(f"recording has {L} samples, shorter than one {n}-sample window")
    T = (L - n) // hop + 1
    win = get_window(cfg.window, n, fftbins=True) if cfg.window != "boxcar" else np.ones(n)
    idx = np.arange(n)[None, :] + hop * np.arange(T)[:, None]  # (T, n)
    frames = rec.samples[:, idx] * win  # (M, T, n)
    spec = np.fft.rfft(frames, axis=-1)  # (M, T, F)
    freqs = np.fft.rfftfreq(n, d=1.0 / rec.rate)
    return SnapshotTensor(freqs, np.transpose(spec, (2, 0, 1)), rec.rate, cfg)


def select_band(t: SnapshotTensor, band: FrequencyBand | tuple) -> SnapshotTensor:
    """Keep the bins with ``lo <= f <= hi``."""
    if not isinstance(band, FrequencyBand):
        band = FrequencyBand(*band)
    keep = (t.freqs >= band.lo) & (t.freqs <= band.hi)
    if not np.any(keep):
        raise ValueError(f"band [{band.lo}, {band.hi}] Hz contains no frequency bins")
    return replace(t, freqs=t.freqs[keep], data=t.data[keep])


def sample_covariance(X: np.ndarray) -> np.ndarray:
    """``(1/T) X X^H`` for one ``(D, T)`` matrix or a stack ``(..., D, T)``."""
    X = np.asarray(X)
    T = X.shape[-1]
    if T == 0:
        raise ValueError("sample covariance needs at least one snapshot")
    R = X @ np.swapaxes(X.conj(), -1, -2) / T
    return 0.5 * (R + np.swapaxes(R.conj(), -1, -2))


class StftTransformer(TransformerMixin, BaseEstimator):
    """Turn recordings into band-limited snapshot tensors.

    Usable as the first step of a pipeline ahead of any estimator in
    :mod:`subaoa.estimators`. ``X`` may be a :class:`MultichannelRecording`
    or a ``(M, L)`` array sampled at ``rate``.
    """

    def __init__(self, window_len=1024, hop=512, window="hann", band=DEFAULT_BAND, rate=None):
        self.window_len = window_len
        self.hop = hop
        self.window = window
        self.band = band
        self.rate = rate

    def fit(self, X, y=None):
        self.config_ = StftConfig(self.window_len, self.hop, self.window)
        return self

    def transform(self, X):
        from ._validation import check_recording

        cfg = getattr(self, "config_", None) or StftConfig(self.window_len, self.hop, self.window)
        rec = check_recording(X, self.rate)
        t = stft(rec, cfg)
        if self.band is not None:
            t = select_band(t, self.band)
        return t
