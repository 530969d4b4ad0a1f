"""Static and dynamic relation graphs between variables.

Similarity is the absolute Pearson correlation; causality is the positive
part of net transfer entropy estimated with a plug-in histogram estimator;
the distance base is a row-wise softmax of negative Euclidean distances.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dataset import SeriesMatrix
from .errors import ConfigError, DimensionError

RELATION_TAGS = ("sim", "cas", "dyn")


@dataclass(frozen=True)
class RelationConfig:
    te_history_k: int = 1
    te_bins: int = 8
    threshold: float = 0.1
    adjacency_norm: str = "row"

    def validate(self) -> None:
        if self.te_bins < 2:
            raise ConfigError(f"te_bins must be >= 2, got {self.te_bins}")
        if self.te_history_k < 1:
            raise ConfigError(f"te_history_k must be >= 1, got {self.te_history_k}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError(f"threshold must lie in [0, 1], got {self.threshold}")
        if self.adjacency_norm not in ("row", "none"):
            raise ConfigError(f"adjacency_norm must be 'row' or 'none', got {self.adjacency_norm!r}")


@dataclass(frozen=True)
class RelationStack:
    """Processed adjacency matrices in tag order: similarity, causality, distance base."""

    matrices: tuple[np.ndarray, ...]
    tags: tuple[str, ...] = RELATION_TAGS

    def __post_init__(self):
        if len(self.matrices) != len(self.tags):
            raise DimensionError(f"{len(self.matrices)} matrices for tags {self.tags}")
        n = self.matrices[0].shape[0]
        for tag, a in zip(self.tags, self.matrices):
            if a.shape != (n, n):
                raise DimensionError(f"relation {tag!r} has shape {a.shape}, expected {(n, n)}")

    @property
    def n(self) -> int:
        return self.matrices[0].shape[0]

    def __getitem__(self, tag: str) -> np.ndarray:
        try:
            return self.matrices[self.tags.index(tag)]
        except ValueError:
            raise KeyError(tag) from None


def _segment(m: SeriesMatrix, rng: range | None) -> np.ndarray:
    if rng is None:
        return m.values
    if rng.start < 0 or rng.stop > m.L or len(rng) == 0:
        raise DimensionError(f"range {rng} outside [0, {m.L})")
    return m.values[:, rng.start : rng.stop]


def similarity_adjacency(m: SeriesMatrix, rng: range | None = None) -> np.ndarray:
    x = _segment(m, rng)
    if x.shape[1] < 2:
        raise DimensionError("similarity needs at least 2 timestamps")
    centered = x - x.mean(axis=1, keepdims=True)
    norms = np.sqrt((centered**2).sum(axis=1))
    cov = centered @ centered.T
    denom = np.outer(norms, norms)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(denom > 0, cov / denom, 0.0)
    a = np.clip(np.abs(r), 0.0, 1.0)
    np.fill_diagonal(a, 0.0)
    return a


# ------------------------------------------------------------ transfer entropy


def discretize(series: np.ndarray, bins: int) -> np.ndarray:
    """Equal-width bin codes in [0, bins) fitted to the series' own min/max."""
    x = np.asarray(series, dtype=np.float64)
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros(x.shape, dtype=np.int64)
    codes = np.floor((x - lo) / (hi - lo) * bins).astype(np.int64)
    return np.clip(codes, 0, bins - 1)


def _entropy_bits(columns: list[np.ndarray]) -> float:
    joint = np.stack(columns, axis=1)
    _, counts = np.unique(joint, axis=0, return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log2(p)).sum())


def _history(codes: np.ndarray, k: int) -> list[np.ndarray]:
    # column j holds the value j steps before time t, for t = k-1 .. N-2
    N = codes.shape[0]
    return [codes[k - 1 - j : N - 1 - j] for j in range(k)]


def transfer_entropy_codes(source: np.ndarray, target: np.ndarray, k: int = 1) -> float:
    """TE source -> target in bits from integer symbol sequences."""
    source = np.asarray(source)
    target = np.asarray(target)
    if source.shape != target.shape:
        raise DimensionError(f"series lengths differ: {source.shape} vs {target.shape}")
    if source.shape[0] < k + 2:
        raise DimensionError(f"series of length {source.shape[0]} too short for history k={k}")
    nxt = target[k:]
    th = _history(target, k)
    sh = _history(source, k)
    h_cond_own = _entropy_bits([nxt, *th]) - _entropy_bits(th)
    h_cond_both = _entropy_bits([nxt, *th, *sh]) - _entropy_bits([*th, *sh])
    return max(h_cond_own - h_cond_both, 0.0)


def transfer_entropy(source, target, cfg: RelationConfig = RelationConfig()) -> float:
    return transfer_entropy_codes(
        discretize(source, cfg.te_bins), discretize(target, cfg.te_bins), cfg.te_history_k
    )


def transfer_entropy_matrix(
    m: SeriesMatrix,
    rng: range | None = None,
    cfg: RelationConfig = RelationConfig(),
    max_workers: int | None = None,
) -> np.ndarray:
    """te[i, j] = TE from variable i to variable j (diagonal 0)."""
    x = _segment(m, rng)
    codes = [discretize(row, cfg.te_bins) for row in x]
    n = len(codes)
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]

    def one(pair):
        i, j = pair
        return transfer_entropy_codes(codes[i], codes[j], cfg.te_history_k)

    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            values = list(pool.map(one, pairs))
    else:
        values = [one(p) for p in pairs]
    te = np.zeros((n, n))
    for (i, j), v in zip(pairs, values):
        te[i, j] = v
    return te


def causality_adjacency(
    m: SeriesMatrix,
    rng: range | None = None,
    cfg: RelationConfig = RelationConfig(),
    max_workers: int | None = None,
) -> np.ndarray:
    te = transfer_entropy_matrix(m, rng, cfg, max_workers)
    return np.maximum(te - te.T, 0.0)


# ------------------------------------------------------------ distance base


def pairwise_distances(window: np.ndarray) -> np.ndarray:
    """Euclidean distances between rows; works on (..., n, T)."""
    w = np.asarray(window, dtype=np.float64)
    diff = w[..., :, None, :] - w[..., None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))


def distance_base(window: np.ndarray) -> np.ndarray:
    """Row-wise softmax of negative distances; accepts a single window or a batch."""
    d = pairwise_distances(window)
    # min distance per row is 0 (the diagonal), so exp(-d) never underflows to an all-zero row
    e = np.exp(-d)
    return e / e.sum(axis=-1, keepdims=True)


# ------------------------------------------------------------ post-processing


def sparsify(a: np.ndarray, threshold: float) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    return np.where(a < threshold, 0.0, a)


def row_normalize(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    s = a.sum(axis=-1, keepdims=True)
    return np.divide(a, s, out=np.zeros_like(a), where=s > 0)


def finalize_adjacency(a: np.ndarray, cfg: RelationConfig) -> np.ndarray:
    """Normalize, cut entries below the threshold, then renormalize surviving rows."""
    if cfg.adjacency_norm == "row":
        return row_normalize(sparsify(row_normalize(a), cfg.threshold))
    return sparsify(a, cfg.threshold)


def build_relation_stack(
    m: SeriesMatrix,
    train_range: range,
    cfg: RelationConfig = RelationConfig(),
    max_workers: int | None = None,
) -> tuple[RelationStack, dict[str, np.ndarray]]:
    """Processed stack plus the raw (pre-normalization) matrices for inspection."""
    cfg.validate()
    raw = {
        "sim": similarity_adjacency(m, train_range),
        "cas": causality_adjacency(m, train_range, cfg, max_workers),
        "dyn": distance_base(_segment(m, train_range)),
    }
    processed = tuple(finalize_adjacency(raw[t], cfg) for t in RELATION_TAGS)
    return RelationStack(processed, RELATION_TAGS), raw


def summarize(a: np.ndarray) -> dict[str, float]:
    n = a.shape[0]
    off = a[~np.eye(n, dtype=bool)] if n > 1 else a.ravel()
    return {
        "density": float(np.count_nonzero(off) / max(off.size, 1)),
        "min": float(a.min()),
        "max": float(a.max()),
        "nonzero": int(np.count_nonzero(a)),
    }
