"""Heterogeneous graph embedding model.

Node features come from the temporal embedding; each layer mixes a self term
with attention-weighted neighbour aggregations over the enabled relations,
and a shared linear readout turns final node embeddings into forecasts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numerics as nm
from .errors import ConfigError, DimensionError
from .relation import RELATION_TAGS, RelationStack, distance_base
from .temporal import TemporalConfig, init_temporal_params, temporal_embed

ABLATIONS = {
    "full": (RELATION_TAGS, True),
    "type1": (("cas",), True),
    "type2": (("sim",), True),
    "type3": (("dyn",), True),
    "type4": (RELATION_TAGS, False),
}


@dataclass(frozen=True)
class ModelConfig:
    gnn_layers: int = 2
    hidden_size: int = 50
    relations_enabled: tuple[str, ...] = RELATION_TAGS
    attention_enabled: bool = True
    threshold: float = 0.1

    def validate(self) -> None:
        if self.gnn_layers < 1:
            raise ConfigError(f"gnn_layers must be >= 1, got {self.gnn_layers}")
        if self.hidden_size < 1:
            raise ConfigError(f"hidden_size must be >= 1, got {self.hidden_size}")
        if not self.relations_enabled:
            raise ConfigError("at least one relation must be enabled")
        unknown = set(self.relations_enabled) - set(RELATION_TAGS)
        if unknown:
            raise ConfigError(f"unknown relations {sorted(unknown)}; choose from {RELATION_TAGS}")
        if len(set(self.relations_enabled)) != len(self.relations_enabled):
            raise ConfigError(f"duplicate relations in {self.relations_enabled}")

    @property
    def relations(self) -> tuple[str, ...]:
        # canonical order regardless of how the user listed them
        return tuple(t for t in RELATION_TAGS if t in self.relations_enabled)

    @property
    def branch_names(self) -> tuple[str, ...]:
        return self.relations if self.attention_enabled else ("avg",)

    @classmethod
    def for_ablation(cls, variant: str, **kw) -> "ModelConfig":
        try:
            rels, attention = ABLATIONS[variant]
        except KeyError:
            raise ConfigError(f"unknown variant {variant!r}; choose from {sorted(ABLATIONS)}") from None
        return cls(relations_enabled=rels, attention_enabled=attention, **kw)


def dynamic_adjacency(window, params: nm.ParameterStore, threshold: float) -> nm.Tensor:
    """relu(D W) -> normalize -> mask entries below threshold -> renormalize.

    The mask is a constant multiplier, so gradients still reach W through the
    surviving entries.
    """
    w = window.data if isinstance(window, nm.Tensor) else np.asarray(window, dtype=np.float64)
    d = nm.Tensor(distance_base(w))
    a = nm.relu(d @ params["hetgnn.W_dyn"])
    a = _row_normalize(a)
    if threshold > 0:
        a = a * (a.data >= threshold).astype(np.float64)
        a = _row_normalize(a)
    return a


def _row_normalize(a: nm.Tensor) -> nm.Tensor:
    s = nm.tensor_sum(a, axis=-1, keepdims=True)
    safe = s + (s.data == 0).astype(np.float64)
    return a / safe


def relation_weights(params: nm.ParameterStore, cfg: ModelConfig) -> nm.Tensor | None:
    if not cfg.attention_enabled:
        return None
    return nm.softmax(params["hetgnn.alpha"], axis=0)


def propagate(
    H: nm.Tensor,
    adjacencies: dict[str, nm.Tensor],
    params: nm.ParameterStore,
    layer: int,
    cfg: ModelConfig,
    weights: nm.Tensor | None = None,
    final: bool = False,
) -> nm.Tensor:
    """One propagation layer: act(H W0 + sum_r softmax(alpha)_r A_r H W_r).

    ``adjacencies`` maps branch name to adjacency; with attention disabled the
    single branch ``avg`` carries the mean adjacency.
    """
    prefix = f"hetgnn.layer{layer}"
    w0 = params[f"{prefix}.W0"]
    if H.shape[-1] != w0.shape[0]:
        raise DimensionError(f"layer {layer}: input dim {H.shape[-1]} but W0 expects {w0.shape[0]}")
    out = H @ w0
    names = cfg.branch_names
    if weights is not None and weights.shape != (len(names),):
        raise DimensionError(
            f"layer {layer}: {weights.shape[0]} attention logits for {len(names)} relations"
        )
    n = H.shape[-2]
    for r, name in enumerate(names):
        a = adjacencies[name]
        if a.shape[-2:] != (n, n):
            raise DimensionError(f"layer {layer}, relation {name!r}: adjacency {a.shape} for {n} nodes")
        msg = a @ (H @ params[f"{prefix}.W_{name}"])
        out = out + (msg * weights[r] if weights is not None else msg)
    return out if final else nm.relu(out)


@dataclass
class MTHetGNN:
    n: int
    window_T: int
    stack: RelationStack
    model_cfg: ModelConfig = field(default_factory=ModelConfig)
    temporal_cfg: TemporalConfig = field(default_factory=TemporalConfig)
    params: nm.ParameterStore = field(default_factory=nm.ParameterStore)

    def __post_init__(self):
        self.model_cfg.validate()
        self.temporal_cfg.validate(self.window_T)
        if self.stack.n != self.n:
            raise DimensionError(f"relation stack is {self.stack.n}x{self.stack.n} for {self.n} variables")

    @classmethod
    def create(
        cls,
        n: int,
        window_T: int,
        stack: RelationStack,
        model_cfg: ModelConfig = ModelConfig(),
        temporal_cfg: TemporalConfig = TemporalConfig(),
        seed: int = 0,
    ) -> "MTHetGNN":
        model = cls(n, window_T, stack, model_cfg, temporal_cfg)
        model.init_params(seed)
        return model

    @property
    def feature_dim(self) -> int:
        return self.temporal_cfg.output_dim(self.window_T)

    def init_params(self, seed: int) -> None:
        rng = np.random.default_rng(seed)
        p = nm.ParameterStore()
        init_temporal_params(p, self.temporal_cfg, rng)
        cfg = self.model_cfg
        if "dyn" in cfg.relations:
            p.add("hetgnn.W_dyn", nm.glorot_uniform(rng, (self.n, self.n)))
        d_in = self.feature_dim
        for layer in range(cfg.gnn_layers):
            shape = (d_in, cfg.hidden_size)
            p.add(f"hetgnn.layer{layer}.W0", nm.glorot_uniform(rng, shape))
            for name in cfg.branch_names:
                p.add(f"hetgnn.layer{layer}.W_{name}", nm.glorot_uniform(rng, shape))
            d_in = cfg.hidden_size
        if cfg.attention_enabled:
            p.add("hetgnn.alpha", np.zeros(len(cfg.relations)))
        p.add("readout.weight", nm.glorot_uniform(rng, (cfg.hidden_size, 1)))
        p.add("readout.bias", np.zeros(1))
        self.params = p

    def adjacencies(self, windows) -> dict[str, nm.Tensor]:
        cfg = self.model_cfg
        adj = {}
        for tag in cfg.relations:
            if tag == "dyn":
                adj[tag] = dynamic_adjacency(windows, self.params, cfg.threshold)
            else:
                adj[tag] = nm.Tensor(self.stack[tag])
        if cfg.attention_enabled:
            return adj
        total = None
        for tag in cfg.relations:
            total = adj[tag] if total is None else total + adj[tag]
        return {"avg": total * (1.0 / len(cfg.relations))}

    def forward(self, windows) -> nm.Tensor:
        """(B, n, T) or (n, T) windows -> (B, n) or (n,) forecasts."""
        x = nm.as_tensor(windows)
        if x.shape[-2:] != (self.n, self.window_T):
            raise DimensionError(f"window shape {x.shape[-2:]} != {(self.n, self.window_T)}")
        H = temporal_embed(x, self.temporal_cfg, self.params)
        adj = self.adjacencies(x)
        weights = relation_weights(self.params, self.model_cfg)
        L = self.model_cfg.gnn_layers
        for layer in range(L):
            H = propagate(H, adj, self.params, layer, self.model_cfg, weights, final=layer == L - 1)
        out = H @ self.params["readout.weight"] + self.params["readout.bias"]
        return nm.reshape(out, out.shape[:-1])

    def predict(self, windows: np.ndarray, batch_size: int = 256) -> np.ndarray:
        windows = np.asarray(windows, dtype=np.float64)
        if windows.ndim == 2:
            return self.forward(windows).data
        chunks = [
            self.forward(windows[i : i + batch_size]).data for i in range(0, len(windows), batch_size)
        ]
        return np.concatenate(chunks, axis=0) if chunks else np.zeros((0, self.n))

    def attention(self) -> dict[str, float]:
        if not self.model_cfg.attention_enabled:
            return {t: 1.0 / len(self.model_cfg.relations) for t in self.model_cfg.relations}
        w = relation_weights(self.params, self.model_cfg).data
        return dict(zip(self.model_cfg.relations, map(float, w)))
