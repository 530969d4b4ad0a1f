"""RSE / RAE / CORR metrics, the persistence baseline and forecast reports."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .dataset import SeriesMatrix, sample_arrays
from .errors import DimensionError, UndefinedMetricError


def _check(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise DimensionError(f"prediction shape {pred.shape} != truth shape {truth.shape}")
    if pred.ndim != 2 or pred.shape[0] < 2:
        raise DimensionError(f"metrics need an (S>=2, n) array, got shape {pred.shape}")
    return pred, truth


def metric_rse(pred, truth) -> float:
    pred, truth = _check(pred, truth)
    dev = truth - truth.mean()
    denom = np.sqrt((dev**2).sum())
    if denom == 0:
        raise UndefinedMetricError("RSE undefined: ground truth is constant")
    return float(np.sqrt(((truth - pred) ** 2).sum()) / denom)


def metric_rae(pred, truth) -> float:
    pred, truth = _check(pred, truth)
    denom = np.abs(truth - truth.mean()).sum()
    if denom == 0:
        raise UndefinedMetricError("RAE undefined: ground truth is constant")
    return float(np.abs(truth - pred).sum() / denom)


def metric_corr(pred, truth) -> tuple[float, np.ndarray]:
    """Mean per-variable Pearson correlation; variables with zero variance
    in either prediction or truth are excluded and reported as NaN."""
    pred, truth = _check(pred, truth)
    pc = pred - pred.mean(axis=0)
    tc = truth - truth.mean(axis=0)
    sp = np.sqrt((pc**2).sum(axis=0))
    st = np.sqrt((tc**2).sum(axis=0))
    ok = (sp > 0) & (st > 0)
    if not ok.any():
        raise UndefinedMetricError("CORR undefined: every variable has zero variance")
    per = np.full(pred.shape[1], np.nan)
    per[ok] = (pc[:, ok] * tc[:, ok]).sum(axis=0) / (sp[ok] * st[ok])
    per = np.clip(per, -1.0, 1.0)
    return float(per[ok].mean()), per


@dataclass
class ForecastReport:
    horizon: int
    rse: float
    rae: float
    corr: float
    per_variable_corr: list[float]
    n_samples: int
    dataset: str = ""
    split: str = "test"
    model: str = "mthetgnn"

    def to_text(self) -> str:
        d = asdict(self)
        d["per_variable_corr"] = [None if np.isnan(c) else c for c in self.per_variable_corr]
        return json.dumps(d, indent=2)

    def summary_row(self, delimiter: str = ",") -> str:
        cells = [self.dataset, str(self.horizon), repr(self.rse), repr(self.rae), repr(self.corr)]
        return delimiter.join(cells)

    SUMMARY_HEADER = "dataset,horizon,rse,rae,corr"


def score(pred, truth, horizon: int, **meta) -> ForecastReport:
    corr, per = metric_corr(pred, truth)
    return ForecastReport(
        horizon=horizon,
        rse=metric_rse(pred, truth),
        rae=metric_rae(pred, truth),
        corr=corr,
        per_variable_corr=[float(c) for c in per],
        n_samples=int(np.asarray(pred).shape[0]),
        **meta,
    )


def persistence_forecast(inputs: np.ndarray) -> np.ndarray:
    return inputs[..., -1].copy()


def persistence_baseline(
    series: SeriesMatrix, rng: range, window_T: int, horizon: int, **meta
) -> ForecastReport:
    """Score the last-observed-value forecast on the same samples a model would see."""
    inputs, targets, _ = sample_arrays(series, rng, window_T, horizon)
    if len(targets) == 0:
        raise DimensionError(f"range {rng} yields no samples for T={window_T}, h={horizon}")
    meta.setdefault("model", "persistence")
    return score(persistence_forecast(inputs), targets, horizon, **meta)
