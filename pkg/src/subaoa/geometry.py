"""Planar microphone array layouts and far-field steering vectors.

Phase convention (shared by the simulator and every estimator): a plane wave
with angle of arrival ``theta`` reaches microphone ``m`` with phase
``-2*pi*f*(p_m . u(theta))/c`` where ``u(theta) = (cos theta, sin theta)``.
For a two-microphone linear array at ``theta = 0`` the second microphone
therefore lags the first by ``d/c`` seconds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FULL_CIRCLE = (0.0, 360.0)
HALF_PLANE = (0.0, 180.0)

_SECTOR_TOL = 1e-9


def _frozen(a) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MicArray:
    """Microphone positions in metres plus propagation constants.

    ``sector`` is the resolvable azimuth range in degrees. A sector spanning
    360 degrees is treated as circular, i.e. ``[lo, lo + 360)``.
    """

    positions: np.ndarray
    speed_of_sound: float = 343.0
    sector: tuple[float, float] = FULL_CIRCLE

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ValueError(f"positions must have shape (M, 2), got {pos.shape}")
        if pos.shape[0] < 2:
            raise ValueError("a microphone array needs at least 2 microphones")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        diff = pos[:, None, :] - pos[None, :, :]
        dist = np.hypot(diff[..., 0], diff[..., 1])
        np.fill_diagonal(dist, np.inf)
        if np.min(dist) <= 0:
            raise ValueError("microphone positions must be pairwise distinct")
        if not self.speed_of_sound > 0:
            raise ValueError("speed_of_sound must be positive")
        lo, hi = (float(s) for s in self.sector)
        if not hi > lo or hi - lo > 360.0:
            raise ValueError(f"invalid sector {self.sector!r}")
        object.__setattr__(self, "positions", _frozen(pos))
        object.__setattr__(self, "speed_of_sound", float(self.speed_of_sound))
        object.__setattr__(self, "sector", (lo, hi))

    @property
    def n_mics(self) -> int:
        return self.positions.shape[0]

    @property
    def is_circular_sector(self) -> bool:
        return self.sector[1] - self.sector[0] >= 360.0

    def aperture(self) -> float:
        """Largest distance between any two microphones."""
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        return float(np.max(np.hypot(diff[..., 0], diff[..., 1])))

    def check_angles(self, theta) -> np.ndarray:
        """Validate angles against the sector; circular sectors wrap."""
        theta = np.asarray(theta, dtype=float)
        lo, hi = self.sector
        if self.is_circular_sector:
            return lo + np.mod(theta - lo, 360.0)
        if np.any(theta < lo - _SECTOR_TOL) or np.any(theta > hi + _SECTOR_TOL):
            raise ValueError(f"angle(s) outside the array sector [{lo}, {hi}]")
        return theta

    def relative_delays(self, theta) -> np.ndarray:
        """Per-microphone delays ``p_m . u(theta) / c`` in seconds.

        Returns shape ``(M,)`` for scalar ``theta`` and ``(M, G)`` otherwise.
        """
        rad = np.deg2rad(np.asarray(theta, dtype=float))
        u = np.stack([np.cos(rad), np.sin(rad)])
        return np.tensordot(self.positions, u, axes=(1, 0)) / self.speed_of_sound

    def translated(self, offset) -> "MicArray":
        return MicArray(self.positions + np.asarray(offset, dtype=float),
                        self.speed_of_sound, self.sector)

    def to_dict(self) -> dict:
        return {
            "positions_m": self.positions.tolist(),
            "speed_of_sound": self.speed_of_sound,
            "sector_deg": list(self.sector),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MicArray":
        if "positions_m" not in d:
            raise ValueError("array description needs 'positions_m'")
        return cls(
            positions=d["positions_m"],
            speed_of_sound=d.get("speed_of_sound", 343.0),
            sector=tuple(d.get("sector_deg", FULL_CIRCLE)),
        )


def load_array(path) -> MicArray:
    """Read a :class:`MicArray` from its JSON description."""
    with open(Path(path)) as fh:
        return MicArray.from_dict(json.load(fh))


def save_array(array: MicArray, path) -> None:
    with open(Path(path), "w") as fh:
        json.dump(array.to_dict(), fh, indent=2)


def circular_array(M: int, radius: float, speed_of_sound: float = 343.0) -> MicArray:
    """``M`` microphones evenly spaced on a circle, the first at ``(radius, 0)``."""
    if M < 2:
        raise ValueError("M must be >= 2")
    if not radius > 0:
        raise ValueError("radius must be positive")
    phi = 2 * np.pi * np.arange(M) / M
    pos = radius * np.column_stack([np.cos(phi), np.sin(phi)])
    return MicArray(pos, speed_of_sound, FULL_CIRCLE)


def uniform_linear_array(M: int, spacing: float, speed_of_sound: float = 343.0) -> MicArray:
    """``M`` collinear microphones on the x-axis starting at the origin.

    A linear array cannot tell ``theta`` from ``-theta``, so its sector is
    ``[0, 180]``.
    """
    if M < 2:
        raise ValueError("M must be >= 2")
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    pos = np.column_stack([spacing * np.arange(M), np.zeros(M)])
    return MicArray(pos, speed_of_sound, HALF_PLANE)


@dataclass(frozen=True)
class AngleGrid:
    """Strictly increasing candidate azimuths in degrees."""

    angles: np.ndarray
    resolution: float = field(default=1.0)

    def __post_init__(self):
        a = np.asarray(self.angles, dtype=float).ravel()
        if a.size == 0:
            raise ValueError("empty angle grid")
        if a.size > 1 and np.any(np.diff(a) <= 0):
            raise ValueError("grid angles must be strictly increasing")
        object.__setattr__(self, "angles", _frozen(a))
        object.__setattr__(self, "resolution", float(self.resolution))

    def __len__(self) -> int:
        return self.angles.size

    def index_of(self, theta: float) -> int:
        """Index of the grid angle closest (circularly) to ``theta``."""
        d = np.abs((self.angles - theta + 180.0) % 360.0 - 180.0)
        return int(np.argmin(d))

    @classmethod
    def for_array(cls, array: MicArray, resolution: float = 1.0) -> "AngleGrid":
        """Uniform grid over the array's sector (360 points for a 1 degree circle)."""
        if not resolution > 0:
            raise ValueError("resolution must be positive")
        lo, hi = array.sector
        if array.is_circular_sector:
            n = int(round(360.0 / resolution))
            angles = lo + resolution * np.arange(n)
        else:
            n = int(np.floor((hi - lo) / resolution + 1e-9)) + 1
            angles = lo + resolution * np.arange(n)
        grid = cls(angles, resolution)
        array.check_angles(grid.angles)
        return grid


@dataclass(frozen=True)
class SteeringVector:
    entries: np.ndarray
    frequency: float
    angle: float


@dataclass(frozen=True)
class SteeringMatrix:
    """Unit-norm steering columns on ``grid`` at one frequency.

    ``ambient_dim`` starts at the microphone count and drops by one after
    every null-space projection.
    """

    frequency: float
    columns: np.ndarray
    grid: AngleGrid

    @property
    def ambient_dim(self) -> int:
        return self.columns.shape[0]


def steering_tensor(array: MicArray, freqs, angles) -> np.ndarray:
    """Unit-norm steering vectors for every frequency and angle.

    Returns a complex array of shape ``(F, M, G)``.
    """
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    delays = array.relative_delays(np.atleast_1d(angles))  # (M, G)
    phase = -2j * np.pi * freqs[:, None, None] * delays[None, :, :]
    return np.exp(phase) / np.sqrt(array.n_mics)


def steering_vector(array: MicArray, f: float, theta: float) -> SteeringVector:
    theta = float(array.check_angles(theta))
    a = steering_tensor(array, [f], [theta])[0, :, 0]
    return SteeringVector(_frozen(a), float(f), theta)


def steering_matrix(array: MicArray, f: float, grid: AngleGrid) -> SteeringMatrix:
    array.check_angles(grid.angles)
    A = steering_tensor(array, [f], grid.angles)[0]
    return SteeringMatrix(float(f), _frozen(A), grid)
