"""Multi-scale temporal convolution producing one feature vector per variable."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nm
from .errors import ConfigError, DimensionError


@dataclass(frozen=True)
class TemporalConfig:
    kernel_sizes: tuple[int, ...] = (3, 5, 7)
    channels_per_branch: int = 8
    activation: str = "relu"

    def validate(self, window_T: int | None = None) -> None:
        if not self.kernel_sizes or min(self.kernel_sizes) < 1:
            raise ConfigError(f"kernel sizes must be positive, got {self.kernel_sizes}")
        if self.channels_per_branch < 1:
            raise ConfigError(f"channels_per_branch must be >= 1, got {self.channels_per_branch}")
        if self.activation not in ("relu", "identity"):
            raise ConfigError(f"unsupported activation {self.activation!r}")
        if window_T is not None and max(self.kernel_sizes) > window_T:
            raise DimensionError(f"kernel {max(self.kernel_sizes)} longer than window T={window_T}")

    def output_dim(self, window_T: int) -> int:
        return sum(self.channels_per_branch * (window_T - k + 1) for k in self.kernel_sizes)


def init_temporal_params(
    params: nm.ParameterStore, cfg: TemporalConfig, rng: np.random.Generator
) -> None:
    for i, k in enumerate(cfg.kernel_sizes):
        params.add(f"temporal.branch{i}.kernel", nm.glorot_uniform(rng, (k, cfg.channels_per_branch)))
        params.add(f"temporal.branch{i}.bias", np.zeros(cfg.channels_per_branch))


def temporal_embed(window, cfg: TemporalConfig, params: nm.ParameterStore) -> nm.Tensor:
    """(..., n, T) -> (..., n, d0).

    Each branch is a valid convolution along time with kernels shared by all
    variables; positions x channels are flattened position-major and branches
    are concatenated in kernel order.
    """
    x = nm.as_tensor(window)
    T = x.shape[-1]
    feats = []
    for i, k in enumerate(cfg.kernel_sizes):
        if k > T:
            raise DimensionError(f"temporal branch {i}: kernel {k} longer than window T={T}")
        kernel = params[f"temporal.branch{i}.kernel"]
        bias = params[f"temporal.branch{i}.bias"]
        patches = nm.sliding_windows(x, k)  # (..., n, T-k+1, k)
        z = patches @ kernel + bias  # (..., n, T-k+1, C)
        if cfg.activation == "relu":
            z = nm.relu(z)
        feats.append(nm.reshape(z, z.shape[:-2] + (z.shape[-2] * z.shape[-1],)))
    return feats[0] if len(feats) == 1 else nm.concat(feats, axis=-1)
