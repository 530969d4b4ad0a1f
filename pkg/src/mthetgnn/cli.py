"""Command-line entry point.

Exit codes: 0 success, 2 input/config error, 3 runtime/training error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

from . import pipeline
from .config import WORKDIR_ENV, RunConfig, dump_config, load_config
from .dataset import load_series
from .errors import InputError, RuntimeFailure

log = logging.getLogger("mthetgnn")

# every flag defaults to None so only explicit flags override the config file
ALL_KEYS = (
    "data", "delimiter", "workdir",
    "window_T", "horizons", "split_ratios", "normalization",
    "te_history_k", "te_bins", "threshold", "adjacency_norm",
    "kernel_sizes", "channels_per_branch",
    "gnn_layers", "hidden_size", "relations",
    "loss", "batch_size", "epochs", "lr", "seed", "early_stop_patience", "clip_norm",
)


def _add_config_flags(p: argparse.ArgumentParser, keys) -> None:
    p.add_argument("--config", help="key = value config file")
    for key in keys:
        flag = "--" + key.replace("_", "-")
        p.add_argument(flag, dest=key, default=None, metavar=key.upper())


def _run_config(args, keys) -> RunConfig:
    overrides = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    if getattr(args, "skip_header", False):
        overrides["skip_header"] = "true"
    if getattr(args, "no_attention", False):
        overrides["attention"] = "false"
    if getattr(args, "horizon", None) is not None:
        overrides["horizons"] = str(args.horizon)
    return load_config(args.config, overrides)


def _manifest_path(args, cfg: RunConfig) -> Path:
    return Path(args.manifest) if getattr(args, "manifest", None) else cfg.resolved_workdir() / "manifest.json"


DATA_KEYS = ("data", "delimiter", "workdir", "window_T", "horizons", "split_ratios", "normalization")
RELATION_KEYS = ("workdir", "te_history_k", "te_bins", "threshold", "adjacency_norm")
MODEL_KEYS = (
    "workdir", "window_T", "horizons", "threshold", "kernel_sizes", "channels_per_branch",
    "gnn_layers", "hidden_size", "relations", "loss", "batch_size", "epochs", "lr", "seed",
    "early_stop_patience", "clip_norm",
)


def cmd_prepare(args) -> int:
    cfg = _run_config(args, DATA_KEYS)
    manifest = pipeline.prepare_workdir(cfg)
    print(json.dumps({k: manifest[k] for k in ("n", "L", "splits", "scale", "config_hash")}, indent=2))
    return 0


def cmd_relations(args) -> int:
    cfg = _run_config(args, RELATION_KEYS)
    manifest = pipeline.read_manifest(_manifest_path(args, cfg))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        meta = pipeline.compute_relations(cfg, manifest, args.workers)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    print(json.dumps(meta["summary"], indent=2, sort_keys=True))
    return 0


def cmd_train(args) -> int:
    cfg = _run_config(args, MODEL_KEYS)
    manifest = pipeline.read_manifest(_manifest_path(args, cfg))
    paths = pipeline.run_training(cfg, manifest, checkpoint_path=args.checkpoint)
    for p in paths:
        loaded = pipeline.load_model(p)
        info = loaded.header["training"]
        print(f"{p}: horizon={loaded.horizon} loss={info['selected_loss']} "
              f"best_epoch={info['best_epoch']} val_rse={info['best_val']['rse']!r}")
    return 0


def cmd_eval(args) -> int:
    cfg = _run_config(args, ("workdir",))
    manifest = pipeline.read_manifest(_manifest_path(args, cfg))
    horizons = set(int(h) for h in args.horizons.split(",")) if args.horizons else None
    reports = []
    if args.persistence:
        for h in sorted(horizons or {3, 6, 12, 24}):
            reports.append(pipeline.evaluate_persistence(manifest, h, args.split))
    else:
        paths = args.checkpoint or sorted((cfg.resolved_workdir() / "checkpoints").glob("*.ckpt"))
        if not paths:
            raise InputError("no checkpoints given or found in the workdir")
        for path in paths:
            loaded = pipeline.load_model(path)
            if horizons and loaded.horizon not in horizons:
                continue
            reports.append(pipeline.evaluate_checkpoint(loaded, manifest, args.split))
    for r in reports:
        print(r.to_text())
    if args.results:
        out = Path(args.results)
        new = not out.exists()
        with open(out, "a") as fh:
            if new:
                fh.write(reports[0].SUMMARY_HEADER + "\n" if reports else "")
            for r in reports:
                fh.write(r.summary_row() + "\n")
    return 0


def cmd_predict(args) -> int:
    loaded = pipeline.load_model(args.checkpoint)
    window = load_series(args.window, args.delimiter, args.skip_header).values
    if window.shape[1] != loaded.model.window_T:
        raise InputError(f"window has {window.shape[1]} rows, checkpoint expects {loaded.model.window_T}")
    forecast = pipeline.predict_window(loaded, window)
    print(args.delimiter.join(repr(float(v)) for v in forecast))
    return 0


def cmd_ablate(args) -> int:
    cfg = _run_config(args, MODEL_KEYS)
    manifest = pipeline.read_manifest(_manifest_path(args, cfg))
    h = cfg.horizons[0]
    rows = pipeline.run_ablation(cfg, manifest, h)
    cols = ["variant", "loss", "best_epoch", "val_rse", "test_rse", "test_rae", "test_corr"]
    lines = [",".join(cols)] + [",".join(str(r[c]) for c in cols) for r in rows]
    text = "\n".join(lines) + "\n"
    out = cfg.resolved_workdir() / f"ablation_h{h}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    print(text, end="")
    return 0


def cmd_show_config(args) -> int:
    print(dump_config(_run_config(args, ALL_KEYS)), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mthetgnn",
        description=f"Heterogeneous-graph forecasting of multivariate time series. "
                    f"The workdir defaults to ${WORKDIR_ENV} or ./mthetgnn_work.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="load a data file, fix splits and scales, write the manifest")
    _add_config_flags(p, DATA_KEYS)
    p.add_argument("--skip-header", action="store_true", help="first row holds variable labels")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("relations", help="compute similarity, causality and distance matrices")
    _add_config_flags(p, RELATION_KEYS)
    p.add_argument("--manifest")
    p.add_argument("--workers", type=int, default=None, help="threads for pairwise transfer entropy")
    p.set_defaults(func=cmd_relations)

    for name, func, text in (("train", cmd_train, "train one model per horizon"),
                             ("ablate", cmd_ablate, "train full model and type1-4 variants, tabulate")):
        p = sub.add_parser(name, help=text)
        _add_config_flags(p, MODEL_KEYS)
        p.add_argument("--manifest")
        p.add_argument("--horizon", type=int, help="shorthand for --horizons with one value")
        p.add_argument("--no-attention", action="store_true", help="average relations (type4)")
        if name == "train":
            p.add_argument("--checkpoint", help="output path (single horizon only)")
        p.set_defaults(func=func)

    p = sub.add_parser("eval", help="score checkpoints or the persistence baseline")
    p.add_argument("--config")
    p.add_argument("--workdir", default=None)
    p.add_argument("--manifest")
    p.add_argument("--checkpoint", nargs="*", default=None)
    p.add_argument("--split", choices=("train", "valid", "test"), default="test")
    p.add_argument("--horizons", help="comma-separated horizons to report")
    p.add_argument("--persistence", action="store_true", help="score the last-value baseline")
    p.add_argument("--results", help="append delimited summary rows to this file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="forecast from a raw window file (T rows x n columns)")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--window", required=True)
    p.add_argument("--delimiter", default=",")
    p.add_argument("--skip-header", action="store_true")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("show-config", help="print the merged configuration")
    _add_config_flags(p, ALL_KEYS)
    p.set_defaults(func=cmd_show_config)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
