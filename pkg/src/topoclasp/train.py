"""Cross-validated training, ablations and the filtration-swap study."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from topoclasp import autodiff as ad
from topoclasp.errors import ConfigError, FormatError, TrainingAborted
from topoclasp.graphs import Dataset, degree_features, parse_tu_dataset
from topoclasp.loss import LossConfig, cross_entropy, joint_loss
from topoclasp.model import MODES, ModelShape, forward, init_params, linear, make_batch
from topoclasp.vectorize import (
    FILTRATIONS,
    VectorizeConfig,
    apply_standardizer,
    fit_standardizer,
    vectorize_graphs,
)

log = logging.getLogger(__name__)

DATA_ENV = "TOPOCLASP_DATA"
MODE_NAMES = {"topo": "Topo", "gnn": "GIN", "concat": "Topo-GIN", "tcl": "GraphTCL"}
CONTRAST_ON = ("zu", "proj")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "MUTAG"
    dataset_dir: str | None = None
    mode: str = "tcl"
    filtration: str = "hks"
    hidden: int = 128
    layers: int = 3
    proj_dim: int = 64
    lr: float = 0.001
    alpha: float = 0.1
    tau: float = 0.5
    batch: int = 32
    epochs: int = 100
    folds: int = 10
    seed: int = 0
    thresholds: int = 10
    scales: int = 10
    contrast_on: str = "zu"
    jobs: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; valid options: {', '.join(MODES)}")
        if self.filtration not in FILTRATIONS:
            raise ConfigError(
                f"unknown filtration {self.filtration!r}; valid options: {', '.join(FILTRATIONS)}"
            )
        if self.contrast_on not in CONTRAST_ON:
            raise ConfigError(f"contrast_on must be one of {', '.join(CONTRAST_ON)}")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        for name in ("batch", "hidden", "layers", "proj_dim", "thresholds", "scales", "jobs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not self.lr > 0:
            raise ConfigError("lr must be positive")
        LossConfig(self.tau, self.alpha)

    @classmethod
    def from_dict(cls, values: dict) -> "ExperimentConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = set(values) - set(known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        return cls(**values)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    @property
    def vectorize(self) -> VectorizeConfig:
        return VectorizeConfig(self.filtration, self.scales, self.thresholds)

    @property
    def loss(self) -> LossConfig:
        return LossConfig(self.tau, self.alpha)


def resolve_dataset_dir(config: ExperimentConfig) -> Path:
    """Directory holding ``<dataset>_A.txt``. ``dataset_dir`` (or the
    ``TOPOCLASP_DATA`` variable) may point at it or at its parent."""
    base = config.dataset_dir or os.environ.get(DATA_ENV)
    if not base:
        raise FormatError(f"no dataset directory given and ${DATA_ENV} is unset")
    base = Path(base)
    for candidate in (base, base / config.dataset):
        if (candidate / f"{config.dataset}_A.txt").is_file():
            return candidate
    raise FormatError(f"dataset {config.dataset!r} not found under {base}")


@dataclass(frozen=True)
class PreparedData:
    dataset: Dataset
    topo: np.ndarray  # raw (unstandardised) topological vectors


def prepare(dataset: Dataset, vconf: VectorizeConfig, jobs: int = 1) -> PreparedData:
    """Model inputs: one-hot degrees replace features of label-free datasets
    (width from the whole dataset), plus the raw topological vectors."""
    if not dataset.has_node_labels:
        dataset = degree_features(dataset)
    return PreparedData(dataset, vectorize_graphs(dataset.graphs, vconf, jobs))


@lru_cache(maxsize=16)
def _load_cached(directory: str, name: str, vconf: VectorizeConfig) -> PreparedData:
    return prepare(parse_tu_dataset(directory, name), vconf)


def load_data(config: ExperimentConfig) -> PreparedData:
    directory = resolve_dataset_dir(config)
    if config.jobs > 1:
        return prepare(parse_tu_dataset(directory, config.dataset), config.vectorize, config.jobs)
    return _load_cached(str(directory.resolve()), config.dataset, config.vectorize)


def stratified_kfold(labels, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Deterministic ``k``-fold split, stratified by label.

    Shuffled members of each class are dealt round-robin over the folds, so
    every fold holds each class within one sample of its global share. When
    a class has fewer than ``k`` members the split falls back to a plain
    shuffled ``k``-fold.
    """
    labels = np.asarray(labels)
    n = len(labels)
    if k > n:
        raise ConfigError(f"cannot make {k} folds from {n} samples")
    rng = np.random.default_rng(seed)
    classes, counts = np.unique(labels, return_counts=True)
    if counts.min() < k:
        log.warning("a class has fewer than %d members; using unstratified folds", k)
        order = rng.permutation(n)
    else:
        order = np.concatenate([rng.permutation(np.flatnonzero(labels == c)) for c in classes])
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[order] = np.arange(n) % k
    everything = np.arange(n)
    return [(everything[fold_of != f], everything[fold_of == f]) for f in range(k)]


@dataclass
class FoldResult:
    fold: int
    accuracy: float
    losses: list[float] = field(default_factory=list)
    steps: int = 0
    error: str | None = None


def _batch_loss(out, labels, config: ExperimentConfig, params):
    if config.mode != "tcl":
        return cross_entropy(out["logits"], labels)
    z, u = out["z"], out["u"]
    if config.contrast_on == "proj":
        z, u = linear(z, params, "proj"), linear(u, params, "proj")
    return joint_loss(out["logits"], labels, z, u, config.loss)


def train_fold(config: ExperimentConfig, data: PreparedData, train_idx, test_idx, fold: int = 0) -> FoldResult:
    """Train from scratch on ``train_idx`` and score the final-epoch model on
    ``test_idx``. The topological standardiser sees training graphs only."""
    train_idx = np.asarray(train_idx)
    test_idx = np.asarray(test_idx)
    rng = np.random.default_rng(config.seed + fold)
    graphs = data.dataset.graphs
    mean, std = fit_standardizer(data.topo[train_idx])
    topo = apply_standardizer(data.topo, mean, std)
    shape = ModelShape(
        data.dataset.d_in, topo.shape[1], data.dataset.num_classes,
        config.hidden, config.layers, config.proj_dim,
    )
    params = init_params(shape, rng)
    names = list(params)
    tensors = list(params.values())
    state = ad.AdamState()
    result = FoldResult(fold, float("nan"))
    for epoch in range(config.epochs):
        order = rng.permutation(train_idx)
        total = 0.0
        for start in range(0, len(order), config.batch):
            idx = order[start : start + config.batch]
            batch = make_batch([graphs[i] for i in idx], topo[idx])
            with ad.Tape() as tape:
                out = forward(batch, params, config.mode)
                loss = _batch_loss(out, batch.labels, config, params)
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingAborted(
                    f"fold {fold}: non-finite loss {value} at epoch {epoch}, step {result.steps}"
                )
            grads = tape.gradients(loss, tensors)
            ad.adam_step(params, dict(zip(names, grads)), state, config.lr)
            total += value * len(idx)
            result.steps += 1
        result.losses.append(total / len(order))
    test = make_batch([graphs[i] for i in test_idx], topo[test_idx])
    pred = np.argmax(forward(test, params, config.mode)["logits"].data, axis=1)
    result.accuracy = float(np.mean(pred == test.labels))
    return result


@dataclass
class ExperimentReport:
    config: dict
    folds: list[FoldResult]
    runtime_s: float = 0.0
    partial: bool = False

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([f.accuracy for f in self.folds if f.error is None])

    @property
    def mean(self) -> float:
        acc = self.accuracies
        return float(acc.mean()) if len(acc) else float("nan")

    @property
    def std(self) -> float:
        """Population standard deviation over folds."""
        acc = self.accuracies
        return float(acc.std()) if len(acc) else float("nan")

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "folds": [
                {"fold": f.fold, "accuracy": f.accuracy, "losses": f.losses}
                | ({"error": f.error} if f.error else {})
                for f in self.folds
            ],
            "mean": self.mean,
            "std": self.std,
            "partial": self.partial,
            "runtime_s": self.runtime_s,
        }

    def write(self, out_dir, stem: str = "report") -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        json_path = out_dir / f"{stem}.json"
        csv_path = out_dir / f"{stem}.csv"
        json_path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["fold", "accuracy", "final_loss", "error"])
            for f in self.folds:
                final = f.losses[-1] if f.losses else ""
                writer.writerow([f.fold, repr(f.accuracy), repr(final), f.error or ""])
        return json_path, csv_path


def _run_fold(args) -> FoldResult:
    config, data, train_idx, test_idx, fold = args
    try:
        return train_fold(config, data, train_idx, test_idx, fold)
    except TrainingAborted as exc:
        log.error("%s", exc)
        return FoldResult(fold, float("nan"), error=str(exc))


def run_experiment(config: ExperimentConfig, data: PreparedData | None = None) -> ExperimentReport:
    """All folds of one configuration. Fold ``f`` is seeded ``seed + f``, so
    the report does not depend on how folds are scheduled."""
    started = time.perf_counter()
    if data is None:
        data = load_data(config)
    splits = stratified_kfold(data.dataset.labels, config.folds, config.seed)
    jobs = [(config, data, tr, te, f) for f, (tr, te) in enumerate(splits)]
    if config.jobs > 1:
        with ProcessPoolExecutor(config.jobs) as pool:
            folds = list(pool.map(_run_fold, jobs))
    else:
        folds = [_run_fold(j) for j in jobs]
    return ExperimentReport(
        config=config.to_dict(),
        folds=folds,
        runtime_s=time.perf_counter() - started,
        partial=any(f.error for f in folds),
    )


def run_ablation(config: ExperimentConfig) -> dict[str, ExperimentReport]:
    """The four variants, in the order Topo, GIN, Topo-GIN, GraphTCL."""
    data = load_data(config)
    return {mode: run_experiment(config.replace(mode=mode), data) for mode in MODES}


@dataclass
class FiltrationStudy:
    reports: dict[str, ExperimentReport]

    def relative_drop(self, filtration: str, reference: str = "hks") -> float:
        ref = self.reports[reference].mean
        return (ref - self.reports[filtration].mean) / ref

    def to_dict(self) -> dict:
        return {
            "filtrations": {name: r.to_dict() for name, r in self.reports.items()},
            "relative_drop_vs_hks": {
                name: self.relative_drop(name) for name in self.reports if "hks" in self.reports
            },
        }


def run_filtration_study(config: ExperimentConfig, filtrations=FILTRATIONS) -> FiltrationStudy:
    return FiltrationStudy(
        {f: run_experiment(config.replace(filtration=f)) for f in filtrations}
    )
