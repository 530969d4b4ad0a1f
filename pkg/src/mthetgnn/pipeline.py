"""Workdir-level stages: prepare, relations, train, evaluate, predict, ablate.

Workdir layout::

    manifest.json              dataset facts, splits, scales, config_hash
    relations/A_sim.txt        processed adjacency matrices (delimited text)
    relations/A_cas.txt
    relations/D_base.txt
    relations/raw_*.txt        the same before normalization/sparsification
    relations/relations.json   relation config, summaries, manifest hash
    checkpoints/h{h}.ckpt      best checkpoint per horizon
    logs/h{h}.log              per-epoch training log
    logs/h{h}.timings          per-epoch wall times
"""

from __future__ import annotations

import hashlib
import json
import logging
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import checkpoint as ck
from .config import RunConfig
from .dataset import (
    PreparedData,
    SeriesMatrix,
    chronological_split,
    load_series,
    normalize,
    sample_arrays,
)
from .errors import CheckpointError, ConfigError, ContractError, DimensionError
from .evaluation import ForecastReport, persistence_baseline, score
from .hetgnn import ModelConfig, MTHetGNN
from .relation import RELATION_TAGS, RelationConfig, RelationStack, build_relation_stack, summarize
from .temporal import TemporalConfig
from .training import TrainConfig, TrainResult, train

log = logging.getLogger(__name__)

MANIFEST_FORMAT = "mthetgnn-manifest/1"
MATRIX_FILES = {"sim": "A_sim.txt", "cas": "A_cas.txt", "dyn": "D_base.txt"}


# ------------------------------------------------------------------ manifest


def _file_sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def build_manifest(cfg: RunConfig, raw: SeriesMatrix, data_path: Path) -> dict:
    cfg.validate()
    ds = cfg.dataset_config()
    train_r, valid_r, test_r = chronological_split(raw, ds)
    _, scale = normalize(raw, ds.normalization, train_r)
    body = {
        "format": MANIFEST_FORMAT,
        "data_path": str(data_path.resolve()),
        "data_sha256": _file_sha256(data_path),
        "delimiter": cfg.delimiter,
        "skip_header": cfg.skip_header,
        "n": raw.n,
        "L": raw.L,
        "variable_ids": list(raw.variable_ids),
        "window_T": ds.window_T,
        "max_horizon": ds.horizon_h,
        "split_ratios": list(ds.split_ratios),
        "normalization": ds.normalization,
        "splits": {
            "train": [train_r.start, train_r.stop],
            "valid": [valid_r.start, valid_r.stop],
            "test": [test_r.start, test_r.stop],
        },
        "scale": [float(s) for s in scale],
    }
    body["config_hash"] = ck.config_hash(body)
    return body


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_manifest(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"no manifest at {path}; run 'prepare' first")
    manifest = json.loads(path.read_text())
    if manifest.get("format") != MANIFEST_FORMAT:
        raise ConfigError(f"{path} is not a {MANIFEST_FORMAT} manifest")
    body = {k: v for k, v in manifest.items() if k != "config_hash"}
    if ck.config_hash(body) != manifest.get("config_hash"):
        raise ConfigError(f"{path}: config_hash does not match manifest contents")
    return manifest


def load_prepared(manifest: dict) -> PreparedData:
    raw = load_series(manifest["data_path"], manifest["delimiter"], manifest["skip_header"])
    if (raw.n, raw.L) != (manifest["n"], manifest["L"]):
        raise ConfigError(
            f"data file is {raw.n}x{raw.L} but manifest records {manifest['n']}x{manifest['L']}"
        )
    scale = np.asarray(manifest["scale"], dtype=np.float64)
    series = SeriesMatrix(raw.values / scale[:, None], raw.variable_ids)
    splits = tuple(range(*manifest["splits"][k]) for k in ("train", "valid", "test"))
    return PreparedData(series, scale, splits, raw)


def prepare_workdir(cfg: RunConfig) -> dict:
    if not cfg.data:
        raise ConfigError("no data file given")
    data_path = Path(cfg.data)
    raw = load_series(data_path, cfg.delimiter, cfg.skip_header)
    manifest = build_manifest(cfg, raw, data_path)
    write_json(cfg.resolved_workdir() / "manifest.json", manifest)
    return manifest


# ----------------------------------------------------------------- relations


def format_matrix(a: np.ndarray, delimiter: str = ",") -> str:
    return "".join(delimiter.join(repr(float(v)) for v in row) + "\n" for row in a)


def parse_matrix(text: str, delimiter: str = ",") -> np.ndarray:
    return np.array([[float(v) for v in line.split(delimiter)] for line in text.splitlines() if line.strip()])


def compute_relations(cfg: RunConfig, manifest: dict, max_workers: int | None = None) -> dict:
    data = load_prepared(manifest)
    rcfg = cfg.relation_config()
    stack, raw = build_relation_stack(data.series, data.train, rcfg, max_workers)
    out = cfg.resolved_workdir() / "relations"
    out.mkdir(parents=True, exist_ok=True)
    summary = {}
    for tag, mat in zip(stack.tags, stack.matrices):
        (out / MATRIX_FILES[tag]).write_text(format_matrix(mat))
        (out / ("raw_" + MATRIX_FILES[tag])).write_text(format_matrix(raw[tag]))
        summary[tag] = {"processed": summarize(mat), "raw": summarize(raw[tag])}
        if tag != "dyn" and not np.any(mat):
            warnings.warn(f"relation {tag!r} is empty after sparsification (threshold {rcfg.threshold})")
    meta = {
        "manifest_hash": manifest["config_hash"],
        "relation": asdict(rcfg),
        "tags": list(stack.tags),
        "files": MATRIX_FILES,
        "summary": summary,
    }
    write_json(out / "relations.json", meta)
    return meta


def load_relations(workdir: Path, manifest: dict) -> tuple[RelationStack, RelationConfig]:
    rdir = workdir / "relations"
    meta_path = rdir / "relations.json"
    if not meta_path.is_file():
        raise ConfigError(f"no relations in {rdir}; run 'relations' first")
    meta = json.loads(meta_path.read_text())
    if meta["manifest_hash"] != manifest["config_hash"]:
        raise ConfigError("relations were computed for a different manifest; rerun 'relations'")
    mats = tuple(parse_matrix((rdir / MATRIX_FILES[t]).read_text()) for t in RELATION_TAGS)
    return RelationStack(mats, RELATION_TAGS), RelationConfig(**meta["relation"])


# ---------------------------------------------------------------- checkpoints


def model_header(model: MTHetGNN, horizon: int, manifest: dict, rcfg: RelationConfig,
                 tcfg: TrainConfig | None = None) -> dict:
    mc = asdict(model.model_cfg)
    mc["relations_enabled"] = list(mc["relations_enabled"])
    tc = asdict(model.temporal_cfg)
    tc["kernel_sizes"] = list(tc["kernel_sizes"])
    config = {
        "dataset": {
            "n": model.n,
            "window_T": model.window_T,
            "horizon": horizon,
            "normalization": manifest["normalization"],
            "variable_ids": manifest["variable_ids"],
        },
        "model": mc,
        "temporal": tc,
        "relation": asdict(rcfg),
        "train": asdict(tcfg) if tcfg else None,
    }
    return {"config": config, "config_hash": ck.config_hash(config), "manifest_hash": manifest["config_hash"]}


def to_checkpoint(model: MTHetGNN, header: dict, scale: np.ndarray) -> ck.Checkpoint:
    arrays = {name: p.data for name, p in model.params.items()}
    for tag, mat in zip(model.stack.tags, model.stack.matrices):
        arrays[f"relation.{tag}"] = mat
    arrays["dataset.scale"] = np.asarray(scale, dtype=np.float64)
    return ck.Checkpoint(header, arrays)


@dataclass
class LoadedModel:
    model: MTHetGNN
    horizon: int
    scale: np.ndarray
    header: dict


def from_checkpoint(c: ck.Checkpoint) -> LoadedModel:
    try:
        cfg = c.header["config"]
        if ck.config_hash(cfg) != c.header["config_hash"]:
            raise CheckpointError("checkpoint config_hash does not match its config")
        ds = cfg["dataset"]
        mc = dict(cfg["model"])
        mc["relations_enabled"] = tuple(mc["relations_enabled"])
        tc = dict(cfg["temporal"])
        tc["kernel_sizes"] = tuple(tc["kernel_sizes"])
        stack = RelationStack(tuple(c.arrays[f"relation.{t}"] for t in RELATION_TAGS), RELATION_TAGS)
        model = MTHetGNN(ds["n"], ds["window_T"], stack, ModelConfig(**mc), TemporalConfig(**tc))
        model.init_params(0)
        model.params.load({k: v for k, v in c.arrays.items() if k in model.params})
        return LoadedModel(model, ds["horizon"], c.arrays["dataset.scale"], c.header)
    except KeyError as exc:
        raise CheckpointError(f"checkpoint missing field {exc}") from None
    except (ContractError, DimensionError) as exc:
        raise CheckpointError(f"checkpoint parameters do not fit its config: {exc}") from None


def load_model(path) -> LoadedModel:
    return from_checkpoint(ck.load(path))


# ------------------------------------------------------------------- training


def train_horizon(
    data: PreparedData,
    stack: RelationStack,
    horizon: int,
    window_T: int,
    model_cfg: ModelConfig,
    temporal_cfg: TemporalConfig,
    train_cfg: TrainConfig,
) -> TrainResult:
    T = window_T
    x_tr, y_tr, _ = sample_arrays(data.series, data.train, T, horizon)
    x_va, y_va, _ = sample_arrays(data.series, data.valid, T, horizon)

    def build(seed: int) -> MTHetGNN:
        return MTHetGNN.create(data.series.n, T, stack, model_cfg, temporal_cfg, seed)

    return train(build, (x_tr, y_tr), (x_va, y_va), train_cfg, horizon)


def run_training(cfg: RunConfig, manifest: dict, horizons=None, checkpoint_path=None) -> list[Path]:
    cfg.validate()
    workdir = cfg.resolved_workdir()
    data = load_prepared(manifest)
    stack, rcfg = load_relations(workdir, manifest)
    if rcfg.threshold != cfg.threshold:
        raise ConfigError(
            f"threshold {cfg.threshold} differs from the {rcfg.threshold} used for relations; rerun 'relations'"
        )
    if cfg.window_T != manifest["window_T"]:
        raise ConfigError(f"window_T {cfg.window_T} differs from manifest window_T {manifest['window_T']}")
    horizons = tuple(horizons or cfg.horizons)
    if checkpoint_path and len(horizons) != 1:
        raise ConfigError("an explicit checkpoint path needs exactly one horizon")
    written = []
    for h in horizons:
        result = train_horizon(data, stack, h, cfg.window_T, cfg.model_config(),
                               cfg.temporal_config(), cfg.train_config())
        header = model_header(result.model, h, manifest, rcfg, cfg.train_config())
        header["training"] = {
            "selected_loss": result.loss,
            "best_epoch": result.best_epoch,
            "best_val": {"rse": result.best_val.rse, "rae": result.best_val.rae, "corr": result.best_val.corr},
            "candidates": result.candidates,
        }
        path = Path(checkpoint_path) if checkpoint_path else workdir / "checkpoints" / f"h{h}.ckpt"
        path.parent.mkdir(parents=True, exist_ok=True)
        ck.save(to_checkpoint(result.model, header, data.scale), path)
        logs = workdir / "logs"
        logs.mkdir(parents=True, exist_ok=True)
        (logs / f"{path.stem}.log").write_text(result.log_text())
        (logs / f"{path.stem}.timings").write_text(result.timing_text())
        written.append(path)
    return written


# ----------------------------------------------------------------- evaluation


def evaluate_checkpoint(loaded: LoadedModel, manifest: dict, split: str = "test") -> ForecastReport:
    if loaded.header.get("manifest_hash") != manifest["config_hash"]:
        raise ConfigError("checkpoint was trained from a different manifest (config hash mismatch)")
    data = load_prepared(manifest)
    model = loaded.model
    x, y, _ = sample_arrays(data.series, data.split(split), model.window_T, loaded.horizon)
    if len(y) < 2:
        raise DimensionError(f"split {split!r} yields {len(y)} samples for h={loaded.horizon}")
    return score(model.predict(x), y, loaded.horizon, dataset=Path(manifest["data_path"]).stem, split=split)


def evaluate_persistence(manifest: dict, horizon: int, split: str = "test") -> ForecastReport:
    data = load_prepared(manifest)
    return persistence_baseline(data.series, data.split(split), manifest["window_T"], horizon,
                                dataset=Path(manifest["data_path"]).stem, split=split)


def predict_window(loaded: LoadedModel, window_raw: np.ndarray) -> np.ndarray:
    """Forecast in original units from a raw (n, T) window."""
    model = loaded.model
    w = np.asarray(window_raw, dtype=np.float64)
    if w.shape != (model.n, model.window_T):
        raise DimensionError(f"window must be {model.n} variables x {model.window_T} steps, got {w.shape}")
    scale = np.asarray(loaded.scale)
    return model.predict(w / scale[:, None]) * scale


# ------------------------------------------------------------------- ablation

VARIANTS = ("full", "type1", "type2", "type3", "type4")


def run_ablation(cfg: RunConfig, manifest: dict, horizon: int, variants=VARIANTS) -> list[dict]:
    cfg.validate()
    data = load_prepared(manifest)
    stack, _ = load_relations(cfg.resolved_workdir(), manifest)
    rows = []
    base = cfg.model_config()
    for variant in variants:
        mcfg = ModelConfig.for_ablation(variant, gnn_layers=base.gnn_layers,
                                        hidden_size=base.hidden_size, threshold=base.threshold)
        result = train_horizon(data, stack, horizon, cfg.window_T, mcfg, cfg.temporal_config(), cfg.train_config())
        x, y, _ = sample_arrays(data.series, data.test, cfg.window_T, horizon)
        test = score(result.model.predict(x), y, horizon)
        rows.append({
            "variant": variant,
            "loss": result.loss,
            "best_epoch": result.best_epoch,
            "val_rse": result.best_val.rse,
            "test_rse": test.rse,
            "test_rae": test.rae,
            "test_corr": test.corr,
        })
    return rows
