"""Losses, the mini-batch Adam loop with validation-based selection, and ablations."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import numerics as nm
from .errors import ConfigError, DimensionError, TrainingDivergedError, UndefinedMetricError
from .evaluation import ForecastReport, metric_rae, metric_rse, score
from .hetgnn import MTHetGNN

log = logging.getLogger(__name__)

LOSSES = ("l1", "l2", "auto")


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "auto"
    batch_size: int = 32
    epochs: int = 100
    lr: float = 1e-3
    seed: int = 0
    early_stop_patience: int = 15
    clip_norm: float = 5.0

    def validate(self) -> None:
        if self.loss not in LOSSES:
            raise ConfigError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr < 0:
            raise ConfigError(f"lr must be non-negative, got {self.lr}")


def _check_pair(pred: nm.Tensor, truth) -> nm.Tensor:
    truth = nm.as_tensor(truth)
    if pred.shape != truth.shape:
        raise DimensionError(f"loss: prediction shape {pred.shape} != truth shape {truth.shape}")
    return truth


def loss_l2(pred, truth) -> nm.Tensor:
    """Sum of squared errors divided by the number of samples (first axis)."""
    pred = nm.as_tensor(pred)
    truth = _check_pair(pred, truth)
    diff = pred - truth
    return nm.tensor_sum(diff * diff) * (1.0 / pred.shape[0])


def loss_l1(pred, truth) -> nm.Tensor:
    pred = nm.as_tensor(pred)
    truth = _check_pair(pred, truth)
    return nm.tensor_sum(nm.absolute(pred - truth)) * (1.0 / pred.shape[0])


LOSS_FNS = {"l1": loss_l1, "l2": loss_l2}


@dataclass
class EpochRecord:
    loss: str
    epoch: int
    train_loss: float
    val_rse: float
    val_rae: float
    val_corr: float
    wall_ms: float = 0.0

    def to_line(self) -> str:
        # wall time deliberately omitted: the log must be byte-identical across seeded runs
        return (
            f"loss={self.loss} epoch={self.epoch} train_loss={self.train_loss!r} "
            f"val_rse={self.val_rse!r} val_rae={self.val_rae!r} val_corr={self.val_corr!r}"
        )

    @classmethod
    def from_line(cls, line: str) -> "EpochRecord":
        kv = dict(part.split("=", 1) for part in line.split())
        return cls(
            loss=kv["loss"],
            epoch=int(kv["epoch"]),
            train_loss=float(kv["train_loss"]),
            val_rse=float(kv["val_rse"]),
            val_rae=float(kv["val_rae"]),
            val_corr=float(kv["val_corr"]),
        )


@dataclass
class TrainResult:
    model: MTHetGNN
    loss: str
    best_epoch: int
    best_val: ForecastReport
    init_val: ForecastReport
    records: list[EpochRecord] = field(default_factory=list)
    candidates: dict[str, float] = field(default_factory=dict)

    def log_text(self) -> str:
        return "".join(r.to_line() + "\n" for r in self.records)

    def timing_text(self) -> str:
        return "".join(f"loss={r.loss} epoch={r.epoch} wall_ms={r.wall_ms:.1f}\n" for r in self.records)


def validate_model(model: MTHetGNN, inputs, targets, horizon: int = 0) -> ForecastReport:
    """Score on validation data; a constant prediction logs CORR as NaN instead of failing."""
    pred = model.predict(inputs)
    try:
        return score(pred, targets, horizon, split="valid")
    except UndefinedMetricError:
        n = pred.shape[1]
        return ForecastReport(horizon, metric_rse(pred, targets), metric_rae(pred, targets), math.nan,
                              [math.nan] * n, len(pred), split="valid")


def train_one(
    model: MTHetGNN,
    train_data: tuple[np.ndarray, np.ndarray],
    valid_data: tuple[np.ndarray, np.ndarray],
    cfg: TrainConfig,
    loss_name: str,
    horizon: int = 0,
) -> TrainResult:
    """Train ``model`` in place with one loss; leaves it holding the best-validation parameters."""
    x_tr, y_tr = train_data
    x_va, y_va = valid_data
    if len(x_tr) == 0 or len(x_va) < 2:
        raise DimensionError(f"need training samples and >= 2 validation samples, got {len(x_tr)}/{len(x_va)}")
    loss_fn = LOSS_FNS[loss_name]
    rng = np.random.default_rng(cfg.seed)
    opt = nm.Adam(lr=cfg.lr)
    init_val = validate_model(model, x_va, y_va, horizon)
    best_rse = math.inf
    best_params = model.params.snapshot()
    best_epoch, best_val = 0, init_val
    records: list[EpochRecord] = []
    stale = 0
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(len(x_tr))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss = loss_fn(model.forward(x_tr[idx]), y_tr[idx])
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingDivergedError(epoch, cfg.lr, loss_name)
            total += value * len(idx)
            model.params.zero_grad()
            nm.backward(loss)
            if cfg.clip_norm:
                nm.clip_grad_norm(model.params, cfg.clip_norm)
            opt.step(model.params)
        train_loss = total / len(x_tr)
        val = validate_model(model, x_va, y_va, horizon)
        if not math.isfinite(val.rse):
            raise TrainingDivergedError(epoch, cfg.lr, loss_name)
        rec = EpochRecord(loss_name, epoch, train_loss, val.rse, val.rae, val.corr,
                          wall_ms=(time.perf_counter() - t0) * 1e3)
        records.append(rec)
        log.info(rec.to_line())
        if val.rse < best_rse:
            best_rse, best_epoch, best_val = val.rse, epoch, val
            best_params = model.params.snapshot()
            stale = 0
        else:
            stale += 1
            if cfg.early_stop_patience and stale >= cfg.early_stop_patience:
                log.info("early stop at epoch %d (best %d)", epoch, best_epoch)
                break
    model.params.load(best_params)
    return TrainResult(model, loss_name, best_epoch, best_val, init_val, records)


def train(
    build_model,
    train_data: tuple[np.ndarray, np.ndarray],
    valid_data: tuple[np.ndarray, np.ndarray],
    cfg: TrainConfig = TrainConfig(),
    horizon: int = 0,
) -> TrainResult:
    """Train a freshly built model per candidate loss and keep the validation winner.

    ``build_model(seed)`` must return a new initialized ``MTHetGNN``; with
    ``loss='auto'`` both losses start from the same initialization.
    """
    cfg.validate()
    candidates = ("l2", "l1") if cfg.loss == "auto" else (cfg.loss,)
    results = []
    for name in candidates:
        results.append(train_one(build_model(cfg.seed), train_data, valid_data, cfg, name, horizon))
    best = min(results, key=lambda r: r.best_val.rse)
    best.candidates = {r.loss: r.best_val.rse for r in results}
    best.records = [rec for r in results for rec in r.records]
    return best
