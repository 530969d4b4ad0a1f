"""Benchmark-format series loading, normalization, splits and window samples.

Files hold one timestamp per row and one variable per column (the layout of
the Exchange-Rate, Solar-Energy and Traffic benchmark files, optionally
gzip-compressed). Internally a series is stored variables-first, n x L.
"""

from __future__ import annotations

import gzip
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionError, FormatError, ParseError

NORMALIZATIONS = ("max_abs", "none")


@dataclass(frozen=True)
class SeriesMatrix:
    values: np.ndarray  # n x L
    variable_ids: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DimensionError(f"series must be 2-D (n x L), got shape {values.shape}")
        if values.shape[0] < 2:
            raise DimensionError(f"need at least 2 variables, got {values.shape[0]}")
        if not np.all(np.isfinite(values)):
            raise FormatError("series contains NaN or infinite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if not self.variable_ids:
            object.__setattr__(self, "variable_ids", tuple(f"v{i}" for i in range(values.shape[0])))
        elif len(self.variable_ids) != values.shape[0]:
            raise DimensionError(
                f"{len(self.variable_ids)} variable ids for {values.shape[0]} variables"
            )

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def L(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class DatasetConfig:
    window_T: int = 32
    horizon_h: int = 3
    split_ratios: tuple[float, float, float] = (0.6, 0.2, 0.2)
    normalization: str = "max_abs"

    def validate(self, max_kernel: int = 1) -> None:
        if self.window_T < max_kernel:
            raise ConfigError(f"window_T={self.window_T} is smaller than the largest kernel {max_kernel}")
        if self.horizon_h < 1:
            raise ConfigError(f"horizon_h must be >= 1, got {self.horizon_h}")
        if len(self.split_ratios) != 3 or any(r <= 0 for r in self.split_ratios):
            raise ConfigError(f"split ratios must be three positive fractions, got {self.split_ratios}")
        if not math.isclose(sum(self.split_ratios), 1.0, abs_tol=1e-9):
            raise ConfigError(f"split ratios must sum to 1, got {sum(self.split_ratios)}")
        if self.normalization not in NORMALIZATIONS:
            raise ConfigError(f"unknown normalization {self.normalization!r}; choose from {NORMALIZATIONS}")


@dataclass(frozen=True)
class WindowSample:
    input: np.ndarray  # n x T
    target: np.ndarray  # n
    origin_index: int


def _open_text(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rt")
    return open(path, "r")


def load_series(path, delimiter: str = ",", skip_header: bool = False) -> SeriesMatrix:
    """Read a delimited file (rows = timestamps, columns = variables).

    Row and column numbers in error messages are 1-based and count data rows
    only (a skipped header is not counted).
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    ids: tuple[str, ...] = ()
    rows: list[list[float]] = []
    width = None
    with _open_text(path) as fh:
        if skip_header:
            header = fh.readline().rstrip("\r\n")
            ids = tuple(h.strip() for h in header.split(delimiter))
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            fields = line.split(delimiter)
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise FormatError(f"row {lineno} has {len(fields)} fields, expected {width}")
            row = []
            for col, f in enumerate(fields, start=1):
                try:
                    row.append(float(f))
                except ValueError:
                    raise ParseError(lineno, col, f) from None
            rows.append(row)
    if not rows:
        raise FormatError(f"{path} contains no data rows")
    values = np.array(rows, dtype=np.float64).T
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values))[0]
        raise ParseError(int(bad[1]) + 1, int(bad[0]) + 1, "non-finite")
    if values.shape[0] < 2:
        raise DimensionError(f"need at least 2 variables, got {values.shape[0]}")
    if ids and len(ids) != values.shape[0]:
        raise FormatError(f"header has {len(ids)} labels but rows have {values.shape[0]} fields")
    return SeriesMatrix(values, ids)


def normalize(m: SeriesMatrix, mode: str, fit_range: range) -> tuple[SeriesMatrix, np.ndarray]:
    if mode not in NORMALIZATIONS:
        raise ConfigError(f"unknown normalization {mode!r}")
    if len(fit_range) == 0 or fit_range.start < 0 or fit_range.stop > m.L:
        raise DimensionError(f"fit range {fit_range} outside [0, {m.L})")
    if mode == "none":
        return m, np.ones(m.n)
    scale = np.abs(m.values[:, fit_range.start : fit_range.stop]).max(axis=1)
    scale = np.where(scale == 0, 1.0, scale)
    return SeriesMatrix(m.values / scale[:, None], m.variable_ids), scale


def denormalize(m: SeriesMatrix, scale: np.ndarray) -> SeriesMatrix:
    return SeriesMatrix(m.values * np.asarray(scale)[:, None], m.variable_ids)


def _boundaries(L: int, ratios) -> tuple[int, int]:
    # small epsilon keeps e.g. 0.6*100 = 60.000000000000007 from drifting either way
    b1 = math.floor(ratios[0] * L + 1e-9)
    b2 = math.floor((ratios[0] + ratios[1]) * L + 1e-9)
    return b1, b2


def minimum_length(cfg: DatasetConfig) -> int:
    need = cfg.window_T + cfg.horizon_h
    L = need
    while True:
        b1, b2 = _boundaries(L, cfg.split_ratios)
        if min(b1, b2 - b1, L - b2) >= need:
            return L
        L += 1


def chronological_split(m: SeriesMatrix | int, cfg: DatasetConfig) -> tuple[range, range, range]:
    L = m if isinstance(m, int) else m.L
    b1, b2 = _boundaries(L, cfg.split_ratios)
    need = cfg.window_T + cfg.horizon_h
    if min(b1, b2 - b1, L - b2) < need:
        raise DimensionError(
            f"series length {L} too short for T={cfg.window_T}, h={cfg.horizon_h}: "
            f"every split needs {need} steps, minimum L is {minimum_length(cfg)}"
        )
    return range(0, b1), range(b1, b2), range(b2, L)


def sample_count(range_len: int, T: int, h: int) -> int:
    return max(range_len - T - h + 1, 0)


def sample_arrays(m: SeriesMatrix, rng: range, T: int, h: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stacked samples for ``rng``: inputs (S, n, T), targets (S, n), origins (S,)."""
    if rng.start < 0 or rng.stop > m.L:
        raise DimensionError(f"range {rng} outside [0, {m.L})")
    count = sample_count(len(rng), T, h)
    origins = np.arange(rng.start + T - 1, rng.start + T - 1 + count)
    if count == 0:
        return np.zeros((0, m.n, T)), np.zeros((0, m.n)), origins
    vals = m.values
    windows = np.lib.stride_tricks.sliding_window_view(vals[:, rng.start : rng.stop], T, axis=1)
    inputs = np.ascontiguousarray(windows[:, :count, :].transpose(1, 0, 2))
    targets = np.ascontiguousarray(vals[:, origins + h].T)
    return inputs, targets, origins


def make_samples(m: SeriesMatrix, rng: range, cfg: DatasetConfig) -> list[WindowSample]:
    inputs, targets, origins = sample_arrays(m, rng, cfg.window_T, cfg.horizon_h)
    return [WindowSample(x, y, int(o)) for x, y, o in zip(inputs, targets, origins)]


@dataclass
class PreparedData:
    """A normalized series plus the split ranges it was prepared with."""

    series: SeriesMatrix
    scale: np.ndarray
    splits: tuple[range, range, range]
    raw: SeriesMatrix | None = field(default=None, repr=False)

    @property
    def train(self) -> range:
        return self.splits[0]

    @property
    def valid(self) -> range:
        return self.splits[1]

    @property
    def test(self) -> range:
        return self.splits[2]

    def split(self, name: str) -> range:
        try:
            return {"train": self.train, "valid": self.valid, "test": self.test}[name]
        except KeyError:
            raise ConfigError(f"unknown split {name!r}; choose train, valid or test") from None


def prepare(raw: SeriesMatrix, cfg: DatasetConfig) -> PreparedData:
    cfg.validate()
    splits = chronological_split(raw, cfg)
    series, scale = normalize(raw, cfg.normalization, splits[0])
    return PreparedData(series, scale, splits, raw)
