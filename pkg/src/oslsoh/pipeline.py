"""Battery ingestion, SoH labelling, windowing and leave-one-battery-out runs."""

from __future__ import annotations

import csv
import logging
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .emd import EMDParams, emd_decompose
from .neural import NetworkSpec, SoHNet, TrainConfig, lstm_only_spec, osl_spec, train
from .entropy import EnvelopeEntropyConfig
from .optimize import PSOConfig, SearchSpace, VMDEntropyFitness, pso_optimize
from .vmd import IMFSet, VMDParams, vmd_decompose

logger = logging.getLogger(__name__)

RATED_CAPACITY = 2.0
END_OF_LIFE_SOH = 70.0
METHODS = ("osl", "vmd-lstm", "emd-lstm")


class PipelineError(RuntimeError):
    """A stage failure; the message is prefixed with the stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class BatteryRecord:
    battery_id: str
    capacities: np.ndarray
    rated_capacity: float = RATED_CAPACITY
    cycles: np.ndarray | None = None

    def __post_init__(self):
        self.capacities = np.asarray(self.capacities, dtype=np.float64)
        if not np.all(np.isfinite(self.capacities)) or np.any(self.capacities <= 0):
            raise ValueError(f"{self.battery_id}: capacities must be positive and finite")
        if self.cycles is None:
            self.cycles = np.arange(1, len(self.capacities) + 1)

    def __len__(self) -> int:
        return len(self.capacities)

    @property
    def normalized(self) -> np.ndarray:
        return self.capacities / self.rated_capacity


def load_battery_csv(path, battery_id: str | None = None, rated_capacity: float = RATED_CAPACITY) -> BatteryRecord:
    """Read a ``cycle,capacity_ah`` file; cycles must be strictly increasing."""
    path = Path(path)
    battery_id = battery_id or path.stem
    cycles, caps = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["cycle", "capacity_ah"]:
            raise ValueError(f"{path}:1: expected header 'cycle,capacity_ah', got {header}")
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{row_no}: expected 2 fields, got {len(row)}")
            try:
                cycle = int(row[0])
                cap = float(row[1])
            except ValueError:
                raise ValueError(f"{path}:{row_no}: malformed row {row}") from None
            if cycle <= 0:
                raise ValueError(f"{path}:{row_no}: cycle must be a positive integer, got {cycle}")
            if not np.isfinite(cap) or cap <= 0:
                raise ValueError(f"{path}:{row_no}: capacity must be positive, got {row[1]}")
            if cycles and cycle == cycles[-1]:
                raise ValueError(f"{path}:{row_no}: duplicate cycle {cycle}")
            if cycles and cycle < cycles[-1]:
                raise ValueError(f"{path}:{row_no}: cycle {cycle} after {cycles[-1]} (not increasing)")
            cycles.append(cycle)
            caps.append(cap)
    if not caps:
        raise ValueError(f"{path}: no data rows")
    return BatteryRecord(battery_id, np.array(caps), rated_capacity, np.array(cycles))


def load_dataset(directory, ids: Sequence[str] | None = None) -> dict[str, BatteryRecord]:
    directory = Path(directory)
    paths = sorted(directory.glob("*.csv"))
    if ids is not None:
        paths = [directory / f"{i}.csv" for i in ids]
    records = {p.stem: load_battery_csv(p) for p in paths}
    if not records:
        raise ValueError(f"no battery CSV files in {directory}")
    return records


def compute_soh(record: BatteryRecord) -> np.ndarray:
    """SoH in percent of rated capacity."""
    return 100.0 * record.capacities / record.rated_capacity


def metrics(y, y_hat) -> tuple[float, float, float]:
    """(RMSE, MAE, MAPE) for SoH-percent series; RMSE/MAE are in SoH points."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape or y.ndim != 1 or len(y) < 1:
        raise ValueError(f"need equal-length 1-D series, got {y.shape} and {y_hat.shape}")
    if np.any(y == 0):
        raise ValueError("MAPE undefined: ground truth contains zeros")
    err = y - y_hat
    rmse = float(np.sqrt(np.mean(err * err)))
    mae = float(np.mean(np.abs(err)))
    mape = float(100.0 * np.mean(np.abs(err) / np.abs(y)))
    return rmse, mae, mape


# -- decomposition + windows -----------------------------------------------

@dataclass(frozen=True)
class Decomposition:
    """How to turn one battery's normalised capacity curve into channels."""

    method: str  # "vmd" or "emd"
    vmd: VMDParams | None = None
    emd: EMDParams | None = None

    def apply(self, series) -> IMFSet:
        if self.method == "vmd":
            return vmd_decompose(series, self.vmd or VMDParams())
        if self.method == "emd":
            return emd_decompose(series, self.emd or EMDParams())
        raise ValueError(f"unknown decomposition {self.method!r}")

    def channels(self, series) -> np.ndarray:
        """(time, channels).  EMD gets its residual as channel 0 so the trend
        is available to the learner; it always yields max_imfs + 1 channels."""
        imfs = self.apply(series)
        if self.method == "vmd":
            return imfs.modes.T
        n_ch = (self.emd or EMDParams()).max_imfs
        modes = np.zeros((n_ch, len(series)))
        if imfs.K:
            modes[n_ch - imfs.K :] = imfs.modes
        return np.vstack([imfs.residual[None, :], modes]).T


@dataclass
class WindowedDataset:
    inputs: np.ndarray  # (n, t_in, channels)
    targets: np.ndarray  # SoH fraction of rated capacity
    battery_ids: list[str]
    target_index: np.ndarray  # 0-based cycle index t of each target

    def __len__(self) -> int:
        return len(self.targets)

    @classmethod
    def concat(cls, parts: Sequence["WindowedDataset"]) -> "WindowedDataset":
        return cls(
            np.concatenate([p.inputs for p in parts]),
            np.concatenate([p.targets for p in parts]),
            [b for p in parts for b in p.battery_ids],
            np.concatenate([p.target_index for p in parts]),
        )

    def split_chronological(self, holdout: float) -> tuple["WindowedDataset", "WindowedDataset"]:
        """Last ``holdout`` fraction of each battery's windows becomes the second part."""
        ids = np.array(self.battery_ids)
        keep = np.ones(len(self), dtype=bool)
        for b in dict.fromkeys(self.battery_ids):
            idx = np.flatnonzero(ids == b)
            n_val = int(round(holdout * len(idx)))
            if n_val:
                keep[idx[np.argsort(self.target_index[idx])[-n_val:]]] = False
        return self.subset(keep), self.subset(~keep)

    def subset(self, mask) -> "WindowedDataset":
        idx = np.flatnonzero(mask)
        return WindowedDataset(self.inputs[idx], self.targets[idx],
                               [self.battery_ids[i] for i in idx], self.target_index[idx])


def build_windows(record: BatteryRecord, decomposition: Decomposition, t_in: int = 16,
                  causal: bool = False) -> WindowedDataset:
    """Windows of the decomposed curve over cycles [t - t_in, t) paired with SoH(t).

    By default the whole series is decomposed once and then sliced.  With
    ``causal=True`` each window is cut from a decomposition of the prefix
    ``[0, t)`` only, so no sample at or after ``t`` can leak in.
    """
    n = len(record)
    if n <= t_in:
        raise ValueError(f"{record.battery_id}: series length {n} <= t_in {t_in}")
    series = record.normalized
    targets = series[t_in:].copy()
    t_idx = np.arange(t_in, n)
    if causal:
        inputs = np.stack([decomposition.channels(series[:t])[-t_in:] for t in t_idx])
    else:
        ch = decomposition.channels(series)
        inputs = np.stack([ch[t - t_in : t] for t in t_idx])
    return WindowedDataset(inputs, targets, [record.battery_id] * len(targets), t_idx)


# -- experiments -------------------------------------------------------------

@dataclass
class ExperimentConfig:
    method: str = "osl"
    t_in: int = 16
    master_seed: int = 0
    space: SearchSpace = field(default_factory=SearchSpace)
    pso: PSOConfig = field(default_factory=PSOConfig)
    vmd: VMDParams = field(default_factory=VMDParams)
    emd: EMDParams = field(default_factory=EMDParams)
    entropy: EnvelopeEntropyConfig = field(default_factory=EnvelopeEntropyConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    filters: int = 128
    cells: int = 64
    validation_fraction: float = 0.1
    causal: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")

    def seeds(self) -> tuple[int, int]:
        """(PSO seed, training seed), both derived from the master seed."""
        pso_seed, train_seed = np.random.SeedSequence(self.master_seed).generate_state(2)
        return int(pso_seed), int(train_seed)

    def network_spec(self, channels: int) -> NetworkSpec:
        if self.method == "osl":
            return osl_spec(channels, self.t_in, filters=self.filters, cells=self.cells)
        return lstm_only_spec(channels, self.t_in, cells=self.cells)


@dataclass
class MetricsRow:
    battery: str
    method: str
    rmse_pct: float
    mae_pct: float
    mape_pct: float


@dataclass
class ExperimentResult:
    row: MetricsRow
    model: SoHNet
    y_true: np.ndarray
    y_pred: np.ndarray
    decompositions: dict[str, Decomposition]
    loss_history: list[float]
    val_history: list[float]


def optimize_vmd_params(record: BatteryRecord, config: ExperimentConfig) -> tuple[int, float]:
    """PSO (K, alpha) for one battery; the per-battery seed mixes in its id."""
    pso_seed, _ = config.seeds()
    seed = (pso_seed + zlib.crc32(record.battery_id.encode())) % (2**32)
    series = record.normalized
    fitness = VMDEntropyFitness(series, config.entropy)
    result = pso_optimize(series, config.space, replace(config.pso, seed=seed), fitness)
    logger.info("%s: PSO best K=%d alpha=%.4f H=%.6f", record.battery_id,
                result.best_K, result.best_alpha, result.best_fitness)
    return result.best_K, result.best_alpha


def plan_decompositions(records: dict[str, BatteryRecord], config: ExperimentConfig,
                        vmd_cache: dict | None = None) -> dict[str, Decomposition]:
    """One decomposition per battery.

    VMD methods use each battery's own optimised alpha with a shared K (the
    most common optimum, ties to the smaller K) so every battery yields the
    same channel count.  ``vmd_cache`` maps battery id to a (K, alpha) pair
    and is filled in as batteries are optimised.
    """
    if config.method == "emd-lstm":
        return {b: Decomposition("emd", emd=config.emd) for b in records}
    cache = vmd_cache if vmd_cache is not None else {}
    for b, rec in records.items():
        if b not in cache:
            try:
                cache[b] = optimize_vmd_params(rec, config)
            except Exception as exc:
                raise PipelineError("optimize", f"{b}: {exc}") from exc
    ks = [cache[b][0] for b in records]
    K = min(set(ks), key=lambda k: (-ks.count(k), k))
    return {b: Decomposition("vmd", vmd=replace(config.vmd, K=K, alpha=cache[b][1])) for b in records}


def run_experiment(records: dict[str, BatteryRecord], held_out: str, config: ExperimentConfig | None = None,
                   vmd_cache: dict | None = None) -> ExperimentResult:
    """Train on every battery except ``held_out`` and score the held-out one."""
    config = config or ExperimentConfig()
    if held_out not in records:
        raise PipelineError("setup", f"held-out battery {held_out!r} not in {sorted(records)}")
    decomps = plan_decompositions(records, config, vmd_cache)

    try:
        windows = {b: build_windows(rec, decomps[b], config.t_in, config.causal) for b, rec in records.items()}
    except Exception as exc:
        raise PipelineError("decompose", str(exc)) from exc

    train_set = WindowedDataset.concat([w for b, w in windows.items() if b != held_out])
    fit_set, val_set = train_set.split_chronological(config.validation_fraction)
    test_set = windows[held_out]

    _, train_seed = config.seeds()
    channels = train_set.inputs.shape[2]
    model = SoHNet(config.network_spec(channels), seed=train_seed)
    try:
        hist = train(model, fit_set.inputs, fit_set.targets, replace(config.training, seed=train_seed),
                     val_set.inputs, val_set.targets)
    except Exception as exc:
        raise PipelineError("train", str(exc)) from exc

    y_true = 100.0 * test_set.targets
    y_pred = 100.0 * model.forward(test_set.inputs)
    rmse, mae, mape = metrics(y_true, y_pred)
    logger.info("%s %s: RMSE %.3f MAE %.3f MAPE %.3f", held_out, config.method, rmse, mae, mape)
    return ExperimentResult(MetricsRow(held_out, config.method, rmse, mae, mape), model, y_true, y_pred,
                            decomps, hist.loss, hist.val_loss)


def evaluate_model(model: SoHNet, record: BatteryRecord, decomposition: Decomposition, method: str,
                   causal: bool = False) -> MetricsRow:
    windows = build_windows(record, decomposition, model.spec.t_in, causal)
    y_true = 100.0 * windows.targets
    y_pred = 100.0 * model.forward(windows.inputs)
    return MetricsRow(record.battery_id, method, *metrics(y_true, y_pred))


# -- file formats ------------------------------------------------------------

REPORT_HEADER = "battery,method,rmse_pct,mae_pct,mape_pct"


def write_report_csv(path, rows: Sequence[MetricsRow]) -> None:
    lines = [REPORT_HEADER] + [
        f"{r.battery},{r.method},{r.rmse_pct:.6f},{r.mae_pct:.6f},{r.mape_pct:.6f}" for r in rows
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def read_report_csv(path) -> list[MetricsRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != REPORT_HEADER.split(","):
            raise ValueError(f"{path}: expected header {REPORT_HEADER!r}")
        return [MetricsRow(r["battery"], r["method"], float(r["rmse_pct"]), float(r["mae_pct"]),
                           float(r["mape_pct"])) for r in reader]


def format_report(rows: Sequence[MetricsRow]) -> str:
    out = [f"{'Battery':<8} {'Method':<9} {'RMSE(%)':>8} {'MAE(%)':>8} {'MAPE(%)':>8}"]
    for r in rows:
        out.append(f"{r.battery:<8} {r.method:<9} {r.rmse_pct:8.3f} {r.mae_pct:8.3f} {r.mape_pct:8.3f}")
    return "\n".join(out)


def write_imf_csv(path, cycles, imfs: IMFSet, scale: float = 1.0, with_residual: bool = False) -> None:
    """``cycle,imf1,...,imfK[,residual]``, values multiplied by ``scale``."""
    K = imfs.K
    cols = [f"imf{k + 1}" for k in range(K)] + (["residual"] if with_residual else [])
    lines = ["cycle," + ",".join(cols)]
    for j, c in enumerate(cycles):
        vals = [imfs.modes[k, j] * scale for k in range(K)]
        if with_residual:
            vals.append(imfs.residual[j] * scale)
        lines.append(f"{int(c)}," + ",".join(repr(float(v)) for v in vals))
    Path(path).write_text("\n".join(lines) + "\n")


def read_imf_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[0] != "cycle" or len(header) < 2:
            raise ValueError(f"{path}: expected 'cycle,imf1,...' header")
        data = np.array([[float(v) for v in row] for row in reader if row])
    return header, data
