"""Command-line pipeline driver.

Subcommands: synth, ingest, cv, sweep, train, trace, compare. Every output
file embeds (tool version, master seed, config hash) and nothing else that
could vary between runs, so identical invocations produce byte-identical
artifacts. Exit codes: 0 success, 2 data validation, 3 lookup, 4 numerical
divergence, 64 usage.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import asdict
from datetime import date
from itertools import product
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import exclusion_report, group_days, ingest_csv, make_folds
from .errors import NonFiniteLoss, ShadecountError, UnknownDate
from .evaluation import (
    compare_models,
    cross_validate,
    render_comparison,
    report_json,
    trace_from_examples,
    write_comparison_csv,
    write_day_trace_csv,
)
from .features import build_all_examples, read_feature_csv, to_matrix, write_feature_csv
from .forest import (
    ForestConfig,
    fit_forest,
    forest_fitter,
    predict_forest_matrix,
    sweep_forest,
)
from .nn import (
    NetConfig,
    load_network,
    nn_fitter,
    save_network,
    sweep_nn,
    train,
    write_trace_csv,
)
from .synth import SynthConfig, generate, write_raw_csv
from .tree import (
    TreeConfig,
    export_tree,
    fit_tree,
    predict_matrix,
    tree_fitter,
    tree_from_export,
)

DEFAULT_SEED = 42  # fixed default so unseeded runs are still reproducible
EX_USAGE = 64

FOREST_OPERATING_POINT = {"depth": 5, "n_trees": 10}


class _Usage(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; keep 2 for data validation instead
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def _config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]


def _meta(seed: int, config: dict) -> dict:
    return {
        "tool_version": __version__,
        "seed": seed,
        "config_hash": _config_hash(config),
    }


def _load_file_config(path: str | None) -> dict:
    if path is None:
        return {}
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise _Usage(f"config file {path} must hold a JSON object")
    return doc


def _resolve(args, file_cfg: dict, name: str, default):
    """Flag value if given, else config-file value, else the default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    if name in file_cfg:
        return file_cfg[name]
    return default


def _int_list(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as e:
        raise _Usage(f"bad integer list {text!r}") from e


def _float_list(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError as e:
        raise _Usage(f"bad float list {text!r}") from e


def _load_features(path: str):
    examples = read_feature_csv(path)
    X, y, dates = to_matrix(examples)
    return examples, X, y, dates


def _jobs(args) -> int:
    if args.jobs is not None:
        return max(1, args.jobs)
    return os.cpu_count() or 1


def _write_lines(path: Path, meta: dict, header: str, rows: list[str]) -> None:
    lines = ["# meta " + json.dumps(meta, sort_keys=True), header, *rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# model construction from resolved flags


def _tree_config(args, cfg: dict, default_depth=None) -> TreeConfig:
    return TreeConfig(
        max_depth=_resolve(args, cfg, "depth", default_depth),
        min_samples_split=_resolve(args, cfg, "min_samples_split", 2),
        split_weighting=_resolve(args, cfg, "split_weighting", "size_weighted"),
    )


def _forest_config(args, cfg: dict, seed: int) -> ForestConfig:
    return ForestConfig(
        n_trees=_resolve(args, cfg, "trees", 10),
        tree_config=TreeConfig(
            max_depth=_resolve(args, cfg, "depth", 5),
            min_samples_split=_resolve(args, cfg, "min_samples_split", 2),
            split_weighting=_resolve(args, cfg, "split_weighting", "size_weighted"),
        ),
        features_per_tree=_resolve(args, cfg, "features_per_tree", 3),
        bootstrap=_resolve(args, cfg, "bootstrap", True),
        seed=seed,
    )


def _net_config(args, cfg: dict, seed: int) -> NetConfig:
    return NetConfig(
        hidden_layers=_resolve(args, cfg, "hidden_layers", 3),
        width=_resolve(args, cfg, "width", 16),
        learning_rate=_resolve(args, cfg, "lr", 1e-3),
        optimizer=_resolve(args, cfg, "optimizer", "adam"),
        epochs=_resolve(args, cfg, "epochs", 50),
        batch_size=_resolve(args, cfg, "batch_size", 32),
        early_stopping_patience=_resolve(args, cfg, "patience", None),
        scale_target=_resolve(args, cfg, "scale_target", False),
        seed=seed,
    )


def _model_fit(args, cfg: dict, seed: int):
    """(fit callable, config dict for provenance) for --model."""
    if args.model == "tree":
        config = _tree_config(args, cfg, default_depth=5)
        return tree_fitter(config), {"model": "tree", **asdict(config)}
    if args.model == "forest":
        config = _forest_config(args, cfg, seed)
        return forest_fitter(config), {"model": "forest", **asdict(config)}
    config = _net_config(args, cfg, seed)
    return nn_fitter(config), {"model": "nn", **asdict(config)}


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    cfg = _load_file_config(args.config)
    seed = _resolve(args, cfg, "seed", DEFAULT_SEED)
    config = SynthConfig(
        n_days=_resolve(args, cfg, "days", 75),
        cadence_minutes=_resolve(args, cfg, "cadence_minutes", 7.5),
        herd_size=_resolve(args, cfg, "herd_size", 80),
        noise_std=_resolve(args, cfg, "noise_std", 8.0),
        seed=seed,
        start_date=_resolve(args, cfg, "start_date", date(2024, 6, 1)),
    )
    obs, _ = generate(config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_raw_csv(obs, out, meta=_meta(seed, asdict(config)))
    n_day = sum(1 for o in obs if o.cow_count is not None)
    print(f"wrote {len(obs)} rows ({n_day} daytime) to {out}")
    return 0


def cmd_ingest(args) -> int:
    cfg = _load_file_config(args.config)
    herd_size = _resolve(args, cfg, "herd_size", 80)
    max_reject = _resolve(args, cfg, "max_reject_fraction", 0.10)
    min_day_rows = _resolve(args, cfg, "min_day_rows", 30)
    config = {
        "herd_size": herd_size,
        "max_reject_fraction": max_reject,
        "min_day_rows": min_day_rows,
    }
    meta = _meta(_resolve(args, cfg, "seed", DEFAULT_SEED), config)

    result = ingest_csv(args.input, herd_size=herd_size, max_reject_fraction=max_reject)
    grouped = group_days(result.observations, min_day_rows=min_day_rows)
    examples = build_all_examples(grouped.days)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_feature_csv(examples, out_dir / "features.csv", meta=meta)
    report = {"meta": meta, **exclusion_report(result, grouped)}
    (out_dir / "exclusions.json").write_text(
        json.dumps(report, indent=2) + "\n", encoding="utf-8"
    )
    print(
        f"{len(result.observations)} rows accepted "
        f"({len(result.rejects)} rejected), {len(grouped.days)} usable days "
        f"({len(grouped.dropped_days)} dropped), {len(examples)} examples"
    )
    return 0


def cmd_cv(args) -> int:
    cfg = _load_file_config(args.config)
    seed = _resolve(args, cfg, "seed", DEFAULT_SEED)
    _, X, y, dates = _load_features(args.features)
    plan = make_folds(set(dates), k=_resolve(args, cfg, "folds", 5), seed=seed)
    fit, config = _model_fit(args, cfg, seed)
    report = cross_validate(X, y, dates, plan, fit, jobs=_jobs(args))
    meta = _meta(seed, config)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {"meta": meta, **report_json(report, args.model, config)}
    (out_dir / "report.json").write_text(
        json.dumps(doc, indent=2) + "\n", encoding="utf-8"
    )
    _write_lines(
        out_dir / "per_day.csv",
        meta,
        "date,rmse",
        [f"{d.isoformat()},{v!r}" for d, v in report.per_day_rmse.items()],
    )
    q1, med, q3 = report.quartiles
    print(
        f"{args.model}: overall RMSE {report.overall_rmse:.3f} "
        f"(pooled {report.pooled_rmse:.3f}), per-day quartiles "
        f"{q1:.2f}/{med:.2f}/{q3:.2f}"
    )
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_file_config(args.config)
    seed = _resolve(args, cfg, "seed", DEFAULT_SEED)
    _, X, y, dates = _load_features(args.features)
    plan = make_folds(set(dates), k=_resolve(args, cfg, "folds", 5), seed=seed)
    jobs = _jobs(args)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)

    if args.model == "tree":
        depths = _int_list(_resolve(args, cfg, "depths", ""))
        if not depths:
            raise _Usage("tree sweep needs a non-empty --depths list")
        config = {"model": "tree", "depths": depths, "folds": plan.k}
        meta = _meta(seed, config)
        rows = []
        for depth in depths:
            tree_config = TreeConfig(
                max_depth=depth,
                min_samples_split=_resolve(args, cfg, "min_samples_split", 2),
                split_weighting=_resolve(args, cfg, "split_weighting", "size_weighted"),
            )
            report = cross_validate(X, y, dates, plan, tree_fitter(tree_config), jobs=jobs)
            rows.append(
                f"{depth},{report.overall_rmse!r},{float(np.std(report.per_fold_rmse))!r}"
            )
        _write_lines(out, meta, "depth,rmse_mean,rmse_std", rows)
    elif args.model == "forest":
        depths = _int_list(_resolve(args, cfg, "depths", ""))
        tree_counts = _int_list(_resolve(args, cfg, "tree_counts", ""))
        if not depths or not tree_counts:
            raise _Usage("forest sweep needs non-empty --depths and --tree-counts")
        config = {
            "model": "forest",
            "depths": depths,
            "tree_counts": tree_counts,
            "folds": plan.k,
        }
        meta = _meta(seed, config)
        meta["operating_point"] = FOREST_OPERATING_POINT
        meta["operating_point_in_grid"] = (
            FOREST_OPERATING_POINT["depth"] in depths
            and FOREST_OPERATING_POINT["n_trees"] in tree_counts
        )
        base = _forest_config(args, cfg, seed)
        cells = sweep_forest(
            X, y, dates, plan, depths, tree_counts, base_config=base, jobs=jobs
        )
        _write_lines(
            out,
            meta,
            "depth,n_trees,rmse_mean,rmse_std",
            [f"{c.depth},{c.n_trees},{c.rmse_mean!r},{c.rmse_std!r}" for c in cells],
        )
    else:
        lrs = _float_list(_resolve(args, cfg, "lrs", ""))
        widths = _int_list(_resolve(args, cfg, "widths", ""))
        layer_counts = _int_list(_resolve(args, cfg, "hidden_layer_counts", ""))
        if not lrs or not widths or not layer_counts:
            raise _Usage(
                "nn sweep needs non-empty --lrs, --widths and --hidden-layer-counts"
            )
        config = {
            "model": "nn",
            "lrs": lrs,
            "widths": widths,
            "hidden_layer_counts": layer_counts,
            "folds": plan.k,
        }
        meta = _meta(seed, config)
        grid = [
            (lr, w, h) for lr, w, h in product(lrs, widths, layer_counts)
        ]
        rows = sweep_nn(
            X, y, dates, plan, grid, base_config=_net_config(args, cfg, seed), jobs=jobs
        )
        _write_lines(
            out,
            meta,
            "learning_rate,width,hidden_layers,param_count,rmse_mean,rmse_std",
            [
                f"{r.learning_rate!r},{r.width},{r.hidden_layers},"
                f"{r.param_count},{r.rmse_mean!r},{r.rmse_std!r}"
                for r in rows
            ],
        )
    print(f"wrote sweep table to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_file_config(args.config)
    seed = _resolve(args, cfg, "seed", DEFAULT_SEED)
    _, X, y, dates = _load_features(args.features)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)

    if args.model == "tree":
        config = _tree_config(args, cfg, default_depth=5)
        fitted = fit_tree(X, y, config, feature_names=_feature_names())
        doc = {
            "format": "tree",
            "meta": _meta(seed, {"model": "tree", **asdict(config)}),
            "config": asdict(config),
            "feature_names": list(fitted.feature_names),
            "n_train": X.shape[0],
            "root": export_tree(fitted),
        }
        preds = predict_matrix(fitted, X)
    elif args.model == "forest":
        config = _forest_config(args, cfg, seed)
        forest = fit_forest(X, y, config, feature_names=_feature_names())
        doc = {
            "format": "forest",
            "meta": _meta(seed, {"model": "forest", **asdict(config)}),
            "config": asdict(config),
            "feature_names": list(_feature_names()),
            "n_train": X.shape[0],
            "trees": [
                {"feature_subset": list(subset), "root": export_tree(member)}
                for member, subset in forest.trees
            ],
        }
        preds = predict_forest_matrix(forest, X)
    else:
        config = _net_config(args, cfg, seed)
        result = train(X, y, config)
        meta = _meta(seed, {"model": "nn", **asdict(config)})
        save_network(result.network, config, out, meta=meta)
        if args.trace_out:
            trace_path = Path(args.trace_out)
            trace_path.parent.mkdir(parents=True, exist_ok=True)
            write_trace_csv(result.trace, trace_path, meta=meta)
        final = result.trace[-1].train_rmse
        print(f"trained nn, final train RMSE {final:.3f}, saved to {out}")
        return 0

    out.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    train_rmse = float(np.sqrt(np.mean((preds - y) ** 2)))
    print(f"trained {args.model}, train RMSE {train_rmse:.3f}, saved to {out}")
    return 0


def _feature_names() -> tuple[str, ...]:
    from .features import FEATURE_NAMES

    return FEATURE_NAMES


def _load_model_predictor(path: str):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    kind = doc.get("format")
    if kind == "tree":
        fitted = tree_from_export(
            doc["root"], doc["feature_names"], doc["n_train"]
        )
        return lambda X: predict_matrix(fitted, X)
    if kind == "forest":
        members = [
            tree_from_export(t["root"], doc["feature_names"], doc["n_train"])
            for t in doc["trees"]
        ]
        return lambda X: np.mean([predict_matrix(m, X) for m in members], axis=0)
    if kind == "nn":
        net, _ = load_network(path)
        return net.predict
    raise ShadecountError(f"unrecognized model file format {kind!r} in {path}")


def cmd_trace(args) -> int:
    cfg = _load_file_config(args.config)
    seed = _resolve(args, cfg, "seed", DEFAULT_SEED)
    examples, _, _, _ = _load_features(args.features)
    predict = _load_model_predictor(args.model_file)
    trace = trace_from_examples(predict, examples, args.date)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    meta = _meta(
        seed, {"model_file": str(args.model_file), "date": args.date.isoformat()}
    )
    write_day_trace_csv(trace, out, meta=meta)
    print(f"wrote {len(trace.rows)} trace rows for {args.date} to {out}")
    return 0


def cmd_compare(args) -> int:
    cfg = _load_file_config(args.config)
    seed = _resolve(args, cfg, "seed", DEFAULT_SEED)
    _, X, y, dates = _load_features(args.features)
    plan = make_folds(set(dates), k=_resolve(args, cfg, "folds", 5), seed=seed)

    tree_config = _tree_config(args, cfg, default_depth=5)
    forest_config = _forest_config(args, cfg, seed)
    net_config = _net_config(args, cfg, seed)
    fitters = {
        "decision_tree": tree_fitter(tree_config),
        "random_forest": forest_fitter(forest_config),
        "neural_network": nn_fitter(net_config),
    }
    rows = compare_models(X, y, dates, plan, fitters, jobs=_jobs(args))
    config = {
        "tree": asdict(tree_config),
        "forest": asdict(forest_config),
        "nn": asdict(net_config),
        "folds": plan.k,
    }
    meta = _meta(seed, config)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_comparison_csv(rows, out_dir / "comparison.csv", meta=meta)
    text = render_comparison(rows)
    (out_dir / "comparison.txt").write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None,
                   help=f"master seed (default {DEFAULT_SEED})")
    p.add_argument("--jobs", type=int, default=None,
                   help="parallel workers; 1 = bit-reproducible sequential")
    p.add_argument("--config", default=None,
                   help="JSON config file; explicit flags win over it")


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--depth", type=int, default=None, help="tree max depth")
    p.add_argument("--min-samples-split", dest="min_samples_split", type=int,
                   default=None)
    p.add_argument("--split-weighting", dest="split_weighting",
                   choices=["size_weighted", "unweighted"], default=None)
    p.add_argument("--trees", type=int, default=None, help="forest size")
    p.add_argument("--features-per-tree", dest="features_per_tree", type=int,
                   default=None)
    p.add_argument("--no-bootstrap", dest="bootstrap", action="store_const",
                   const=False, default=None)
    p.add_argument("--lr", type=float, default=None, help="nn learning rate")
    p.add_argument("--width", type=int, default=None, help="nn hidden width")
    p.add_argument("--hidden-layers", dest="hidden_layers", type=int, default=None)
    p.add_argument("--optimizer", choices=["sgd", "adam"], default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--patience", type=int, default=None,
                   help="early-stopping patience (nn)")
    p.add_argument("--scale-target", dest="scale_target", action="store_const",
                   const=True, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="shadecount",
                     description="shade-occupancy prediction pipeline")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic raw sensor CSV")
    p.add_argument("--out", required=True, help="output raw CSV path")
    p.add_argument("--days", type=int, default=None)
    p.add_argument("--cadence-minutes", dest="cadence_minutes", type=float,
                   default=None)
    p.add_argument("--herd-size", dest="herd_size", type=int, default=None)
    p.add_argument("--noise-std", dest="noise_std", type=float, default=None)
    p.add_argument("--start-date", dest="start_date", type=date.fromisoformat,
                   default=None)
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="raw CSV -> feature CSV + exclusion report")
    p.add_argument("input", help="raw sensor CSV")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--herd-size", dest="herd_size", type=int, default=None)
    p.add_argument("--max-reject-fraction", dest="max_reject_fraction",
                   type=float, default=None)
    p.add_argument("--min-day-rows", dest="min_day_rows", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("cv", help="day-grouped cross-validation for one model")
    p.add_argument("features", help="feature CSV from ingest")
    p.add_argument("--model", choices=["tree", "forest", "nn"], required=True)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    _add_model_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("sweep", help="grid sweeps with cross-validated RMSE")
    p.add_argument("features")
    p.add_argument("--model", choices=["tree", "forest", "nn"], required=True)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--depths", default=None, help="comma list, tree/forest")
    p.add_argument("--tree-counts", dest="tree_counts", default=None,
                   help="comma list, forest")
    p.add_argument("--lrs", default=None, help="comma list, nn")
    p.add_argument("--widths", default=None, help="comma list, nn")
    p.add_argument("--hidden-layer-counts", dest="hidden_layer_counts",
                   default=None, help="comma list, nn")
    _add_model_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("train", help="fit one model on all examples and save it")
    p.add_argument("features")
    p.add_argument("--model", choices=["tree", "forest", "nn"], required=True)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--trace-out", dest="trace_out", default=None,
                   help="nn loss-trace CSV path")
    _add_model_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("trace", help="per-day actual-vs-predicted series")
    p.add_argument("features")
    p.add_argument("--model-file", dest="model_file", required=True)
    p.add_argument("--date", type=date.fromisoformat, required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("compare", help="three-model comparison table")
    p.add_argument("features")
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    _add_model_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _Usage as e:
        print(f"shadecount: error: {e}", file=sys.stderr)
        return EX_USAGE
    except UnknownDate as e:
        print(f"shadecount: lookup error: {e}", file=sys.stderr)
        return 3
    except NonFiniteLoss as e:
        print(f"shadecount: numerical divergence: {e}", file=sys.stderr)
        return 4
    except (ShadecountError, FileNotFoundError) as e:
        print(f"shadecount: data error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
