"""Multivariate time-series forecasting with heterogeneous relation graphs."""

from .dataset import DatasetConfig, SeriesMatrix, WindowSample, load_series
from .evaluation import ForecastReport, metric_corr, metric_rae, metric_rse
from .hetgnn import ModelConfig, MTHetGNN
from .relation import RelationConfig, RelationStack
from .temporal import TemporalConfig
from .training import TrainConfig, train

__version__ = "0.1.0"
