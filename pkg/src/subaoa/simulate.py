"""Far-field multipath synthesis, 2-D image sources and chirp-based
ground truth.

Every path is a plane wave at the array: microphone ``m`` receives path
``k`` as ``g_k * s(t - tau_k - delta_m(theta_k))`` with ``delta_m`` from
:meth:`MicArray.relative_delays`, the same geometry the estimators assume.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.fft import irfft, next_fast_len, rfft, rfftfreq
from scipy.io import wavfile
from scipy.signal import chirp as _chirp
from scipy.signal import find_peaks, lfilter

from .frontend import MultichannelRecording
from .geometry import AngleGrid, MicArray

MIN_SAMPLES = 1024
SOURCE_KINDS = ("white", "speech_like", "chirp")


@dataclass(frozen=True)
class PathSpec:
    aoa: float
    delay: float
    gain: float = 1.0

    def __post_init__(self):
        if not self.delay >= 0:
            raise ValueError("path delay must be >= 0")
        if not np.isfinite(self.gain):
            raise ValueError("path gain must be finite")


@dataclass(frozen=True)
class Scenario:
    """A source played over a list of paths, with optional white noise.

    ``source`` is ``"white"``, ``"speech_like"``, ``"chirp"`` or
    ``"wav:<path>"``. The first path is the direct one and must have the
    smallest delay.
    """

    paths: tuple[PathSpec, ...]
    source: str = "white"
    duration: float = 2.0
    rate: float = 16000.0
    snr_db: float | None = None
    seed: int = 0

    def __post_init__(self):
        paths = tuple(p if isinstance(p, PathSpec) else PathSpec(**p) for p in self.paths)
        if not paths:
            raise ValueError("a scenario needs at least one path")
        if paths[0].delay > min(p.delay for p in paths):
            raise ValueError("the first (direct) path must have the smallest delay")
        if self.source not in SOURCE_KINDS and not self.source.startswith("wav:"):
            raise ValueError(f"unknown source kind {self.source!r}")
        if not self.rate > 0 or self.duration * self.rate < MIN_SAMPLES:
            raise ValueError(f"scenario must span at least {MIN_SAMPLES} samples")
        object.__setattr__(self, "paths", paths)

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.rate))

    def to_dict(self) -> dict:
        return {
            "paths": [{"aoa_deg": p.aoa, "delay_s": p.delay, "gain": p.gain} for p in self.paths],
            "source": self.source,
            "duration_s": self.duration,
            "rate_hz": self.rate,
            "snr_db": self.snr_db,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        try:
            paths = tuple(PathSpec(float(p["aoa_deg"]), float(p["delay_s"]), float(p.get("gain", 1.0)))
                          for p in d["paths"])
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed path list: {exc}") from exc
        snr = d.get("snr_db")
        return cls(
            paths=paths,
            source=d.get("source", "white"),
            duration=float(d.get("duration_s", 2.0)),
            rate=float(d.get("rate_hz", 16000.0)),
            snr_db=None if snr is None else float(snr),
            seed=int(d.get("seed", 0)),
        )


@dataclass(frozen=True)
class Room:
    """Rectangle ``[0, width] x [0, height]`` with a frequency-flat wall
    reflection coefficient."""

    width: float
    height: float
    source_pos: tuple[float, float]
    array_pos: tuple[float, float]
    reflection_coeff: float = 0.7
    max_order: int = 1
    speed_of_sound: float = 343.0

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError("room dimensions must be positive")
        for name in ("source_pos", "array_pos"):
            x, y = getattr(self, name)
            if not (0 < x < self.width and 0 < y < self.height):
                raise ValueError(f"{name} must lie strictly inside the room")
        if not 0 <= self.reflection_coeff < 1:
            raise ValueError("reflection_coeff must lie in [0, 1)")
        if not 0 <= self.max_order <= 2:
            raise ValueError("max_order must be 0, 1 or 2")

    @classmethod
    def from_dict(cls, d: dict) -> "Room":
        return cls(
            width=float(d["width_m"]),
            height=float(d["height_m"]),
            source_pos=tuple(d["source_pos_m"]),
            array_pos=tuple(d["array_pos_m"]),
            reflection_coeff=float(d.get("reflection_coeff", 0.7)),
            max_order=int(d.get("max_order", 1)),
            speed_of_sound=float(d.get("speed_of_sound", 343.0)),
        )


def _axis_images(s: float, size: float, max_order: int):
    """1-D mirror images ``(coordinate, reflection count)`` of ``s`` in ``[0, size]``."""
    out = []
    for n in range(-max_order, max_order + 1):
        out.append((2 * n * size + s, abs(2 * n)))
        out.append((2 * n * size - s, abs(2 * n - 1)))
    return [(x, o) for x, o in out if o <= max_order]


def image_source_paths(room: Room) -> list[PathSpec]:
    """Direct path plus every image source up to ``room.max_order`` reflections.

    Delay is image distance over ``c``, gain ``beta**order / distance`` and
    the AoA the bearing from the array to the image. Sorted by delay.
    """
    ax, ay = room.array_pos
    sx, sy = room.source_pos
    if np.hypot(sx - ax, sy - ay) == 0:
        raise ValueError("source and array positions coincide")
    paths = []
    for xi, ox in _axis_images(sx, room.width, room.max_order):
        for yi, oy in _axis_images(sy, room.height, room.max_order):
            order = ox + oy
            if order > room.max_order:
                continue
            dist = float(np.hypot(xi - ax, yi - ay))
            aoa = float(np.degrees(np.arctan2(yi - ay, xi - ax)) % 360.0)
            paths.append((dist, order, PathSpec(aoa, dist / room.speed_of_sound,
                                                room.reflection_coeff ** order / dist)))
    paths.sort(key=lambda p: (p[0], p[1]))
    return [p[2] for p in paths]


def white_source(duration: float, rate: float, seed=0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal(int(round(duration * rate)))


def speech_like_source(duration: float, rate: float, seed=0) -> np.ndarray:
    """Unit-RMS strongly autocorrelated noise with a 4 Hz syllabic envelope.

    Gaussian noise through a two-pole resonator (radius 0.97 at 500 Hz),
    then multiplied by a raised cosine at 4 Hz.
    """
    n = int(round(duration * rate))
    rng = np.random.default_rng(seed)
    burn = 2048
    w = 2 * np.pi * 500.0 / rate
    r = 0.97
    x = lfilter([1.0], [1.0, -2 * r * np.cos(w), r * r], rng.standard_normal(n + burn))[burn:]
    t = np.arange(n) / rate
    x = x * 0.5 * (1.0 - np.cos(2 * np.pi * 4.0 * t))
    return x / np.sqrt(np.mean(x ** 2))


def linear_chirp(duration: float, rate: float, f0: float = 0.0, f1: float | None = None,
                 fade: float = 0.005) -> np.ndarray:
    """Linear sweep from ``f0`` to ``f1`` (default Nyquist) with raised-cosine fades."""
    n = int(round(duration * rate))
    f1 = rate / 2 if f1 is None else f1
    t = np.arange(n) / rate
    x = _chirp(t, f0=f0, t1=duration, f1=f1, method="linear", phi=-90)
    nf = min(int(round(fade * rate)), n // 2)
    if nf > 0:
        ramp = 0.5 * (1 - np.cos(np.pi * np.arange(nf) / nf))
        x[:nf] *= ramp
        x[n - nf:] *= ramp[::-1]
    return x


def _wav_source(path: str, n: int, rate: float) -> np.ndarray:
    sr, data = wavfile.read(path)
    if abs(sr - rate) > 1e-6:
        raise ValueError(f"{path}: sample rate {sr} does not match scenario rate {rate}")
    if data.dtype.kind in "iu":
        data = data.astype(float) / float(np.iinfo(data.dtype).max + 1)
    data = np.asarray(data, dtype=float)
    if data.ndim == 2:
        data = data[:, 0]
    out = np.zeros(n)
    out[: min(n, data.size)] = data[:n]
    return out


def source_signal(sc: Scenario, rng=None) -> np.ndarray:
    """Source samples for ``sc``; the chirp occupies the first half."""
    n = sc.n_samples
    seed = sc.seed if rng is None else rng
    if sc.source == "white":
        return white_source(sc.duration, sc.rate, seed)
    if sc.source == "speech_like":
        return speech_like_source(sc.duration, sc.rate, seed)
    if sc.source == "chirp":
        c = linear_chirp(sc.duration / 2, sc.rate, 0.0, min(8000.0, sc.rate / 2))
        out = np.zeros(n)
        out[: c.size] = c
        return out
    return _wav_source(sc.source[4:], n, sc.rate)


def propagate(source: np.ndarray, paths, array: MicArray, rate: float) -> np.ndarray:
    """Noise-free ``(M, L)`` microphone signals with exact fractional delays."""
    L = source.size
    delays = np.array([p.delay for p in paths])
    gains = np.array([p.gain for p in paths])
    aoas = np.array([p.aoa for p in paths])
    rel = array.relative_delays(aoas).reshape(array.n_mics, len(paths))  # (M, K)
    total = delays[None, :] + rel
    guard = int(np.ceil(np.max(np.abs(rel)) * rate)) + 64
    n = next_fast_len(L + int(np.ceil(np.max(delays) * rate)) + 2 * guard)
    S = rfft(source, n)
    f = rfftfreq(n, 1.0 / rate)
    H = np.einsum("k,mkf->mf", gains, np.exp(-2j * np.pi * f[None, None, :] * total[:, :, None]))
    return irfft(H * S[None, :], n, axis=-1)[:, :L]


def synthesize(sc: Scenario, array: MicArray) -> MultichannelRecording:
    """Render ``sc`` at ``array`` with additive white Gaussian noise.

    Noise variance makes mean per-microphone signal power over noise power
    equal ``snr_db``; with an all-zero signal the source power is the
    reference instead.
    """
    if any(p.delay >= sc.duration for p in sc.paths):
        raise ValueError("path delay exceeds the scenario duration")
    src_seed, noise_seed = np.random.SeedSequence(sc.seed).spawn(2)
    s = source_signal(sc, np.random.default_rng(src_seed))
    y = propagate(s, sc.paths, array, sc.rate)
    if sc.snr_db is not None:
        p_sig = float(np.mean(y ** 2))
        if p_sig == 0.0:
            p_sig = float(np.mean(s ** 2))
        sigma = np.sqrt(p_sig / 10.0 ** (sc.snr_db / 10.0))
        y = y + sigma * np.random.default_rng(noise_seed).standard_normal(y.shape)
    return MultichannelRecording(y, sc.rate)


def truth_dict(sc: Scenario, array: MicArray) -> dict:
    return {"scenario": sc.to_dict(), "array": array.to_dict(),
            "aoa_deg": [p.aoa for p in sc.paths]}


def write_truth(sc: Scenario, array: MicArray, path) -> None:
    with open(Path(path), "w") as fh:
        json.dump(truth_dict(sc, array), fh, indent=2)


def channel_estimates(rec: MultichannelRecording, chirp: np.ndarray, upsample: int = 8,
                      reg: float = 1e-3, lead: float = 0.0) -> tuple[np.ndarray, float]:
    """Per-microphone impulse responses by regularised spectral division.

    Returns ``(h, rate)`` where ``h`` has shape ``(M, L*upsample)`` sampled at
    ``rate = rec.rate * upsample`` and index 0 corresponds to lag ``-lead``
    seconds.
    """
    chirp = np.asarray(chirp, dtype=float)
    L = rec.n_samples
    if chirp.size > L:
        raise ValueError("chirp is longer than the recording")
    n = next_fast_len(L + chirp.size)
    C = rfft(chirp, n)
    Y = rfft(rec.samples, n, axis=-1)
    p = np.abs(C) ** 2
    H = Y * C.conj() / (p + reg * np.max(p))
    h = irfft(H, n * upsample, axis=-1) * upsample
    shift = int(round(lead * rec.rate * upsample))
    h = np.roll(h, shift, axis=-1)[:, : L * upsample]
    return h, rec.rate * upsample


def _parabolic(y: np.ndarray, i: int) -> float:
    if 0 < i < y.size - 1:
        a, b, c = y[i - 1], y[i], y[i + 1]
        den = a - 2 * b + c
        if den < 0:
            return i + 0.5 * (a - c) / den
    return float(i)


def chirp_ground_truth(rec: MultichannelRecording, chirp, array: MicArray, grid: AngleGrid | None = None,
                       threshold: float = 0.25, min_spacing: float = 1e-3,
                       upsample: int = 8) -> list[tuple[float, float]]:
    """Recover ``(aoa_deg, delay_s)`` for each echo of a known chirp.

    Peaks of every microphone's channel estimate above ``threshold`` times the
    global maximum (at least ``min_spacing`` apart) are grouped across
    microphones by delay; each group's AoA is the grid angle whose geometric
    delays best fit the pairwise delay differences in the least-squares
    sense.
    """
    grid = grid or AngleGrid.for_array(array)
    M = array.n_mics
    span = array.aperture() / array.speed_of_sound
    lead = span + 4.0 / rec.rate
    h, fs = channel_estimates(rec, chirp, upsample, lead=lead)
    env = np.abs(h)
    gmax = float(np.max(env))
    if gmax == 0.0:
        raise ValueError("recording holds no trace of the chirp")
    peaks = []
    for m in range(M):
        idx, _ = find_peaks(env[m], height=threshold * gmax,
                            distance=max(1, int(round(min_spacing * fs))))
        for i in idx:
            peaks.append((_parabolic(env[m], int(i)) / fs - lead, m, float(env[m, i])))
    if not peaks:
        raise ValueError("no channel peaks above threshold")
    peaks.sort()

    window = span + 2.0 / rec.rate
    clusters, cur = [], [peaks[0]]
    for pk in peaks[1:]:
        if pk[0] - cur[0][0] <= window:
            cur.append(pk)
        else:
            clusters.append(cur)
            cur = [pk]
    clusters.append(cur)

    delta = array.relative_delays(grid.angles)  # (M, G)
    need = min(3, M)
    out = []
    for cl in clusters:
        best = {}
        for d, m, amp in cl:
            if m not in best or amp > best[m][1]:
                best[m] = (d, amp)
        if len(best) < need:
            continue
        mics = np.array(sorted(best))
        d = np.array([best[m][0] for m in mics])
        resid = d[:, None] - delta[mics]
        resid = resid - resid.mean(axis=0)
        g = int(np.argmin(np.sum(resid ** 2, axis=0)))
        tau = float(np.mean(d - delta[mics, g]))
        out.append((float(grid.angles[g]), tau))
    if not out:
        raise ValueError("no echo was seen consistently across microphones")
    return out
