"""Experiment driver behind the command line: configs, estimator dispatch,
result/sweep/timing tables."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import algorithm, baselines
from .frontend import FrequencyBand, SnapshotTensor, StftConfig, select_band, stft
from .geometry import AngleGrid, MicArray, circular_array, load_array, uniform_linear_array
from .metrics import ResultRecord, match_and_score, write_records, write_spectrum
from .simulate import Room, Scenario, image_source_paths, synthesize

log = logging.getLogger(__name__)

ALGORITHMS = ("subaoa", "music", "gcc", "das")
SWEEP_VARIABLES = ("snr_db", "angular_separation", "signal_length")


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


def load_json(path) -> dict:
    try:
        with open(Path(path)) as fh:
            cfg = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def parse_array(spec, base_dir: Path | None = None) -> MicArray:
    """Array from a JSON path, explicit positions or a named layout."""
    try:
        if isinstance(spec, str):
            p = Path(spec)
            if base_dir is not None and not p.is_absolute():
                p = base_dir / p
            return load_array(p)
        if not isinstance(spec, dict):
            raise ConfigError("array must be a path or an object")
        kind = spec.get("kind")
        c = spec.get("speed_of_sound", 343.0)
        if kind == "circular":
            return circular_array(int(spec["M"]), float(spec["radius"]), c)
        if kind == "ula":
            return uniform_linear_array(int(spec["M"]), float(spec["spacing"]), c)
        return MicArray.from_dict(spec)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, OSError) as exc:
        raise ConfigError(f"bad array description: {exc}") from exc


@dataclass(frozen=True)
class Settings:
    """Estimator settings shared by every subcommand."""

    array: MicArray
    stft: StftConfig = field(default_factory=StftConfig)
    band: FrequencyBand | None = FrequencyBand(300.0, 4000.0)
    resolution: float = 1.0
    max_paths: int = 4
    n_estimates: int = 4
    subaoa_signal_dim: int | None = None
    auto_stop: bool = False
    stop_ratio: float = 0.2
    music_signal_dim: int | None = None
    min_separation: float = baselines.DEFAULT_MIN_SEPARATION

    @property
    def grid(self) -> AngleGrid:
        return AngleGrid.for_array(self.array, self.resolution)

    def subaoa_config(self) -> algorithm.SubAoaConfig:
        return algorithm.SubAoaConfig(
            max_paths=self.max_paths,
            grid=self.grid,
            signal_dim_per_bin=self.subaoa_signal_dim,
            auto_stop=self.auto_stop,
            stop_ratio=self.stop_ratio,
        )


def parse_settings(cfg: dict, base_dir: Path | None = None) -> Settings:
    if "array" not in cfg:
        raise ConfigError("config needs an 'array' entry")
    array = parse_array(cfg["array"], base_dir)
    try:
        st = cfg.get("stft", {})
        stft_cfg = StftConfig(int(st.get("window_len", 1024)), int(st.get("hop", 512)),
                              st.get("window", "hann"))
        band = cfg.get("band_hz", [300.0, 4000.0])
        band = None if band is None else FrequencyBand(float(band[0]), float(band[1]))
        sub = cfg.get("subaoa", {})
        max_paths = int(sub.get("max_paths", 4))
        mus = cfg.get("music", {})
        s = Settings(
            array=array,
            stft=stft_cfg,
            band=band,
            resolution=float(cfg.get("grid_resolution_deg", 1.0)),
            max_paths=max_paths,
            n_estimates=int(cfg.get("n_estimates", max_paths)),
            subaoa_signal_dim=sub.get("signal_dim"),
            auto_stop=bool(sub.get("auto_stop", False)),
            stop_ratio=float(sub.get("stop_ratio", 0.2)),
            music_signal_dim=mus.get("signal_dim"),
            min_separation=float(cfg.get("min_separation_deg", baselines.DEFAULT_MIN_SEPARATION)),
        )
        s.subaoa_config()
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"bad estimator settings: {exc}") from exc
    if s.max_paths >= array.n_mics:
        raise ConfigError(f"subaoa.max_paths={s.max_paths} must be below the mic count {array.n_mics}")
    return s


def parse_algorithms(names) -> list[str]:
    if isinstance(names, str):
        names = [n.strip() for n in names.split(",") if n.strip()]
    names = list(names)
    bad = [n for n in names if n not in ALGORITHMS]
    if bad or not names:
        raise ConfigError(f"unknown algorithm(s) {bad}; choose from {', '.join(ALGORITHMS)}")
    return names


def parse_scenario(spec: dict, default_seed: int) -> tuple[str, Scenario]:
    """A scenario entry: explicit ``paths`` or a ``room`` for image sources."""
    if not isinstance(spec, dict):
        raise ConfigError("each scenario must be an object")
    spec = dict(spec)
    sid = str(spec.pop("id", "scenario"))
    spec.setdefault("seed", default_seed)
    try:
        if "room" in spec:
            paths = image_source_paths(Room.from_dict(spec.pop("room")))
            n = spec.pop("n_paths", None)
            if n is not None:
                paths = paths[: int(n)]
            spec["paths"] = [{"aoa_deg": p.aoa, "delay_s": p.delay, "gain": p.gain} for p in paths]
        return sid, Scenario.from_dict(spec)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"scenario {sid!r}: {exc}") from exc


def analysis_tensor(rec, settings: Settings) -> SnapshotTensor:
    t = stft(rec, settings.stft)
    return select_band(t, settings.band) if settings.band is not None else t


def estimate(tensor: SnapshotTensor, settings: Settings, name: str):
    """Run one algorithm; returns ``(angles, spectra, runtime_ms)``.

    ``spectra`` is a list of score vectors (one per SubAoA iteration, one
    for the others).
    """
    grid = settings.grid
    t0 = time.perf_counter()
    if name == "subaoa":
        out = algorithm.run(tensor, settings.array, settings.subaoa_config())
        angles = list(out.angles)
        spectra = [d.spectrum for d in out.detections]
    else:
        if name == "music":
            sd = settings.music_signal_dim or settings.max_paths
            spec = baselines.music(tensor, settings.array, grid, sd)
        elif name == "gcc":
            spec = baselines.gcc_phat(tensor, settings.array, grid)
        elif name == "das":
            spec = baselines.delay_and_sum(tensor, settings.array, grid)
        else:
            raise ConfigError(f"unknown algorithm {name!r}")
        angles = list(baselines.peak_pick(spec, settings.n_estimates, settings.min_separation).angles)
        spectra = [spec.scores]
    return angles, spectra, 1e3 * (time.perf_counter() - t0)


def score(scenario_id: str, algo: str, truth, angles, runtime_ms=None) -> list[ResultRecord]:
    return [
        ResultRecord(scenario_id, algo, k, t, e, err, runtime_ms)
        for k, (t, e, err) in enumerate(match_and_score(truth, angles))
    ]


def _run_cell(args):
    sid, sc, settings, algos = args
    rec = synthesize(sc, settings.array)
    tensor = analysis_tensor(rec, settings)
    truth = [p.aoa for p in sc.paths]
    cell = []
    for algo in algos:
        angles, spectra, ms = estimate(tensor, settings, algo)
        cell.append((algo, score(sid, algo, truth, angles), spectra, ms))
    return sid, cell


def _map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def cmd_run(config_path, out_dir, seed=None, jobs=1, algorithms=None, record_runtime=False) -> None:
    """Evaluate every scenario with every algorithm.

    Writes ``results.csv`` (deterministic unless ``record_runtime``),
    ``timing.csv`` and ``spectra/<scenario>_<algorithm>[_iterK].csv``.
    """
    config_path = Path(config_path)
    cfg = load_json(config_path)
    if seed is not None:
        cfg["seed"] = int(seed)
    base_seed = int(cfg.get("seed", 0))
    settings = parse_settings(cfg, config_path.parent)
    algos = parse_algorithms(algorithms or cfg.get("algorithms", list(ALGORITHMS)))
    scen = cfg.get("scenarios")
    if not scen:
        raise ConfigError("config lists no scenarios")
    cells = [(*parse_scenario(s, base_seed + i), settings, algos) for i, s in enumerate(scen)]
    ids = [c[0] for c in cells]
    if len(set(ids)) != len(ids):
        raise ConfigError("scenario ids must be unique")

    out_dir = Path(out_dir)
    (out_dir / "spectra").mkdir(parents=True, exist_ok=True)
    grid = settings.grid
    provenance = f"config_sha256={config_hash(cfg)} seed={base_seed}"
    records, timing = [], []
    for sid, cell in _map(_run_cell, cells, jobs):
        for algo, recs, spectra, ms in cell:
            if record_runtime:
                recs = [replace(r, runtime_ms=ms) for r in recs]
            records.extend(recs)
            timing.append((sid, algo, ms))
            for k, sp in enumerate(spectra):
                name = f"{sid}_{algo}_iter{k}.csv" if algo == "subaoa" else f"{sid}_{algo}.csv"
                with open(out_dir / "spectra" / name, "w", newline="") as fh:
                    write_spectrum(fh, grid.angles, sp, provenance)
    with open(out_dir / "results.csv", "w", newline="") as fh:
        write_records(fh, records, provenance)
    with open(out_dir / "timing.csv", "w", newline="") as fh:
        fh.write(f"# {provenance}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario_id", "algorithm", "runtime_ms"])
        for sid, algo, ms in timing:
            w.writerow([sid, algo, f"{ms:.3f}"])
    log.info("wrote %d result rows to %s", len(records), out_dir)


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple
    trials_per_value: int
    base_scenario: dict

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ConfigError(f"sweep variable must be one of {SWEEP_VARIABLES}")
        if self.trials_per_value < 1:
            raise ConfigError("trials_per_value must be >= 1")
        if not self.values:
            raise ConfigError("sweep needs at least one value")


def sweep_scenario(spec: SweepSpec, value, seed: int) -> Scenario:
    """Base scenario with the swept variable set to ``value``."""
    d = dict(spec.base_scenario)
    d.pop("id", None)
    d["seed"] = seed
    if spec.variable == "snr_db":
        d["snr_db"] = None if value is None else float(value)
    elif spec.variable == "signal_length":
        d["duration_s"] = float(value)
    elif spec.variable == "angular_separation":
        paths = [dict(p) for p in d["paths"]]
        if len(paths) < 2:
            raise ConfigError("angular_separation sweeps need at least two paths")
        paths[1]["aoa_deg"] = (float(paths[0]["aoa_deg"]) + float(value)) % 360.0
        d["paths"] = paths
    try:
        return Scenario.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad base scenario: {exc}") from exc


def _sweep_cell(args):
    value, trial, sc, settings, algos = args
    rec = synthesize(sc, settings.array)
    tensor = analysis_tensor(rec, settings)
    truth = [p.aoa for p in sc.paths]
    rows = []
    for algo in algos:
        angles, _, _ = estimate(tensor, settings, algo)
        for k, (_, _, err) in enumerate(match_and_score(truth, angles)):
            rows.append((value, trial, algo, k, err))
    return rows


def cmd_sweep(sweep_path, out_dir, seed=None, jobs=1, algorithms=None) -> None:
    """Long-format ``sweep.csv``: variable_value, trial, algorithm, k, error_deg."""
    sweep_path = Path(sweep_path)
    cfg = load_json(sweep_path)
    if seed is not None:
        cfg["seed"] = int(seed)
    base_seed = int(cfg.get("seed", 0))
    settings = parse_settings(cfg, sweep_path.parent)
    algos = parse_algorithms(algorithms or cfg.get("algorithms", list(ALGORITHMS)))
    try:
        spec = SweepSpec(cfg["variable"], tuple(cfg["values"]), int(cfg.get("trials_per_value", 1)),
                         dict(cfg["base_scenario"]))
    except KeyError as exc:
        raise ConfigError(f"sweep config missing {exc}") from exc
    cells = []
    for vi, value in enumerate(spec.values):
        for trial in range(spec.trials_per_value):
            sc = sweep_scenario(spec, value, base_seed + 1000 * vi + trial)
            cells.append((value, trial, sc, settings, algos))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        fh.write(f"# config_sha256={config_hash(cfg)} seed={base_seed} variable={spec.variable}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variable_value", "trial", "algorithm", "k", "error_deg"])
        for rows in _map(_sweep_cell, cells, jobs):
            for value, trial, algo, k, err in rows:
                w.writerow([value, trial, algo, k, repr(float(err))])


def time_call(fn, runs: int = 11, warmup: int = 1) -> float:
    """Median wall time of ``fn()`` in milliseconds."""
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(max(1, runs)):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return 1e3 * float(np.median(samples))


def cmd_bench(config_path, out_dir, seed=None, algorithms=None) -> None:
    """Median runtimes over a grid of mic counts, frame counts and path counts.

    Config keys: ``mic_counts``, ``radius_m``, ``frame_counts``, ``path_counts``,
    ``n_bins``, ``runs`` (at least 11). Inputs are seeded complex Gaussian
    snapshot tensors.
    """
    config_path = Path(config_path)
    cfg = load_json(config_path)
    if seed is not None:
        cfg["seed"] = int(seed)
    base_seed = int(cfg.get("seed", 0))
    algos = parse_algorithms(algorithms or cfg.get("algorithms", list(ALGORITHMS)))
    runs = max(11, int(cfg.get("runs", 11)))
    n_bins = int(cfg.get("n_bins", 237))
    radius = float(cfg.get("radius_m", 0.05))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for M in cfg.get("mic_counts", [6]):
        array = circular_array(int(M), radius)
        for T in cfg.get("frame_counts", [61]):
            tensor = random_tensor(int(M), int(T), n_bins, base_seed)
            for K in cfg.get("path_counts", [4]):
                if K >= M:
                    continue
                s = Settings(array=array, band=None, max_paths=int(K), n_estimates=int(K))
                for algo in algos:
                    ms = time_call(lambda: estimate(tensor, s, algo), runs)
                    rows.append((algo, M, T, K, ms))
                    log.info("%s M=%d T=%d K=%d: %.2f ms", algo, M, T, K, ms)
    with open(out_dir / "timing.csv", "w", newline="") as fh:
        fh.write(f"# config_sha256={config_hash(cfg)} seed={base_seed} runs={runs}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["algorithm", "M", "T", "K", "median_ms"])
        for algo, M, T, K, ms in rows:
            w.writerow([algo, M, T, K, f"{ms:.3f}"])


def random_tensor(M: int, T: int, n_bins: int, seed=0, rate: float = 16000.0,
                  band=(300.0, 4000.0)) -> SnapshotTensor:
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((n_bins, M, T)) + 1j * rng.standard_normal((n_bins, M, T))
    return SnapshotTensor(np.linspace(band[0], band[1], n_bins), data, rate)


def cmd_simulate(config_path, out_dir, seed=None) -> list[Path]:
    """Render each scenario to ``<id>.wav`` plus ``<id>.truth.json``."""
    from .frontend import save_wav
    from .simulate import write_truth

    config_path = Path(config_path)
    cfg = load_json(config_path)
    if seed is not None:
        cfg["seed"] = int(seed)
    base_seed = int(cfg.get("seed", 0))
    if "array" not in cfg:
        raise ConfigError("config needs an 'array' entry")
    array = parse_array(cfg["array"], config_path.parent)
    scen = cfg.get("scenarios") or ([cfg["scenario"]] if "scenario" in cfg else None)
    if not scen:
        raise ConfigError("config lists no scenarios")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for i, s in enumerate(scen):
        sid, sc = parse_scenario(s, base_seed + i)
        rec = synthesize(sc, array)
        save_wav(rec, out_dir / f"{sid}.wav")
        write_truth(sc, array, out_dir / f"{sid}.truth.json")
        written.append(out_dir / f"{sid}.wav")
    return written


def cmd_spectrum(config_path, wav_path, out_dir, algorithms=None) -> None:
    """Per-iteration spectra of one recording, one CSV each."""
    from .frontend import load_wav

    config_path = Path(config_path)
    cfg = load_json(config_path)
    settings = parse_settings(cfg, config_path.parent)
    algos = parse_algorithms(algorithms or cfg.get("algorithms", ["subaoa"]))
    try:
        rec = load_wav(wav_path)
    except FileNotFoundError as exc:
        raise ConfigError(f"recording not found: {wav_path}") from exc
    if rec.n_channels != settings.array.n_mics:
        raise ConfigError(f"{wav_path} has {rec.n_channels} channels, array has {settings.array.n_mics}")
    tensor = analysis_tensor(rec, settings)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(wav_path).stem
    grid = settings.grid
    summary = {}
    for algo in algos:
        angles, spectra, _ = estimate(tensor, settings, algo)
        summary[algo] = angles
        for k, sp in enumerate(spectra):
            name = f"{stem}_{algo}_iter{k}.csv" if algo == "subaoa" else f"{stem}_{algo}.csv"
            with open(out_dir / name, "w", newline="") as fh:
                write_spectrum(fh, grid.angles, sp)
    with open(out_dir / f"{stem}_angles.json", "w") as fh:
        json.dump({k: [float(a) for a in v] for k, v in summary.items()}, fh, indent=2)
