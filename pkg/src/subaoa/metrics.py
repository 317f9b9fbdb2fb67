"""Angular error metrics, truth matching, peak prominence and the result
CSV schema."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, fields
from itertools import permutations

import numpy as np

UNMATCHED_ERROR = 180.0


def circular_error(truth, estimate):
    """Smallest absolute angular difference in degrees, in ``[0, 180]``."""
    d = np.mod(np.asarray(estimate, dtype=float) - np.asarray(truth, dtype=float), 360.0)
    err = np.minimum(d, 360.0 - d)
    return float(err) if err.ndim == 0 else err


def match_and_score(truth, estimates) -> list[tuple[float, float | None, float]]:
    """Optimal one-to-one pairing of estimates to truths.

    Exhaustive over all assignments, minimising the summed circular error.
    Truths left without an estimate score :data:`UNMATCHED_ERROR`. The result
    follows the order of ``truth``.
    """
    truth = [float(t) for t in truth]
    est = [float(e) for e in estimates]
    if not truth:
        raise ValueError("truth list is empty")
    n, m = len(truth), len(est)
    cost = np.array([[circular_error(t, e) for e in est] for t in truth]).reshape(n, m)
    best, best_pairs = math.inf, None
    if m >= n:
        for perm in permutations(range(m), n):
            total = sum(cost[i, j] for i, j in enumerate(perm))
            if total < best - 1e-12:
                best, best_pairs = total, {i: j for i, j in enumerate(perm)}
    else:
        for perm in permutations(range(n), m):
            total = sum(cost[i, j] for j, i in enumerate(perm))
            if total < best - 1e-12:
                best, best_pairs = total, {i: j for j, i in enumerate(perm)}
    out = []
    for i, t in enumerate(truth):
        j = best_pairs.get(i) if best_pairs else None
        if j is None:
            out.append((t, None, UNMATCHED_ERROR))
        else:
            out.append((t, est[j], float(cost[i, j])))
    return out


def prominence(scores, index: int, circular: bool = True) -> float:
    """Height of ``scores[index]`` above the higher of its two key cols.

    Walk each way until a strictly higher sample (or the whole spectrum when
    ``circular``) and take the lowest value passed on that side.
    """
    x = np.asarray(scores, dtype=float)
    n = x.size
    peak = x[index]
    bases = []
    for step in (-1, 1):
        lo = peak
        i = index
        for _ in range(n - 1):
            i += step
            if circular:
                i %= n
            elif not 0 <= i < n:
                break
            if x[i] > peak:
                break
            lo = min(lo, x[i])
        bases.append(lo)
    return float(peak - max(bases))


def prominence_at(scores, angles, target: float, search: float = 3.0, circular: bool = True) -> float:
    """Prominence of the local maximum nearest ``target`` within ``search`` degrees.

    Zero when no local maximum lies that close.
    """
    x = np.asarray(scores, dtype=float)
    angles = np.asarray(angles, dtype=float)
    if circular:
        left, right = np.roll(x, 1), np.roll(x, -1)
    else:
        left = np.concatenate([[-np.inf], x[:-1]])
        right = np.concatenate([x[1:], [-np.inf]])
    peaks = np.flatnonzero((x >= left) & (x > right) | (x > left) & (x >= right))
    if peaks.size == 0:
        return 0.0
    dist = circular_error(target, angles[peaks]) if circular else np.abs(angles[peaks] - target)
    dist = np.atleast_1d(dist)
    near = dist <= search + 1e-9
    if not np.any(near):
        return 0.0
    cand = peaks[near]
    i = cand[np.argmin(dist[near])]
    return prominence(x, int(i), circular)


@dataclass(frozen=True)
class ResultRecord:
    scenario_id: str
    algorithm: str
    path_index: int
    truth_deg: float
    estimate_deg: float | None
    error_deg: float
    runtime_ms: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.error_deg <= 180.0:
            raise ValueError(f"error_deg out of range: {self.error_deg}")


RESULT_FIELDS = [f.name for f in fields(ResultRecord)]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _opt_float(s: str) -> float | None:
    return None if s == "" else float(s)


def write_records(fh, records, comment: str | None = None) -> None:
    """Write records as CSV to an open text handle, header first.

    ``comment`` becomes a leading ``# ...`` provenance line.
    """
    if comment:
        fh.write(f"# {comment}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(RESULT_FIELDS)
    for r in records:
        w.writerow([_fmt(getattr(r, k)) for k in RESULT_FIELDS])


def read_records(fh) -> list[ResultRecord]:
    lines = [ln for ln in fh if not ln.startswith("#")]
    rows = csv.DictReader(io.StringIO("".join(lines)))
    if rows.fieldnames != RESULT_FIELDS:
        raise ValueError(f"unexpected result columns {rows.fieldnames}")
    return [
        ResultRecord(
            scenario_id=row["scenario_id"],
            algorithm=row["algorithm"],
            path_index=int(row["path_index"]),
            truth_deg=float(row["truth_deg"]),
            estimate_deg=_opt_float(row["estimate_deg"]),
            error_deg=float(row["error_deg"]),
            runtime_ms=_opt_float(row["runtime_ms"]),
        )
        for row in rows
    ]


def write_spectrum(fh, angles, values, comment: str | None = None) -> None:
    """``angle_deg,likelihood`` rows for one spectrum."""
    if comment:
        fh.write(f"# {comment}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["angle_deg", "likelihood"])
    for a, v in zip(angles, values):
        w.writerow([repr(float(a)), repr(float(v))])


def read_spectrum(fh) -> tuple[np.ndarray, np.ndarray]:
    lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    if rows[0] != ["angle_deg", "likelihood"]:
        raise ValueError("not a spectrum CSV")
    data = np.array([[float(a), float(v)] for a, v in rows[1:]])
    return data[:, 0], data[:, 1]
