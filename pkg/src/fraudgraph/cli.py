"""Command-line surface.

Commands: synth, build-graph, single, sequence, report. Each run takes a
declarative config file, resolves it against defaults (flags override
config keys), writes a manifest before doing work, and finalizes it after.
Re-running with --from-manifest reproduces the outputs byte-for-byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from . import __version__
from .checkpoint import save_named_tensors
from .config import (
    RunManifest,
    load_manifest,
    now_utc,
    parse_config_file,
    resolve_config,
    schema_mapping_from,
    synthetic_config_from,
    train_config_from,
)
from .data import (
    generate_synthetic,
    parse_transactions_csv,
    write_transactions_csv,
)
from .errors import FraudGraphError
from .graph import build_trade_graph, save_trade_graph
from .training import run_sequence, train_single_region

OUT_ROOT_ENV = "FRAUDGRAPH_OUT_ROOT"


def _resolve_out_dir(out_dir: str) -> Path:
    path = Path(out_dir)
    root = os.environ.get(OUT_ROOT_ENV)
    if root and not path.is_absolute():
        path = Path(root) / path
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_resolved(args, command: str) -> dict:
    if getattr(args, "from_manifest", None):
        manifest = load_manifest(args.from_manifest)
        if manifest.command != command:
            raise FraudGraphError(
                f"manifest was written by {manifest.command!r}, not {command!r}"
            )
        resolved = dict(manifest.config)
    else:
        raw = parse_config_file(args.config) if args.config else {}
        resolved = resolve_config(raw, command)
    if getattr(args, "seed", None) is not None:
        resolved["seed"] = args.seed
    if getattr(args, "variant", None) is not None:
        resolved["variant"] = args.variant
    if getattr(args, "out", None) is not None:
        resolved["out_dir"] = args.out
    return resolved


def _start_manifest(command: str, resolved: dict, inputs: list[str], out_dir: Path) -> RunManifest:
    manifest = RunManifest(
        command=command,
        config=resolved,
        inputs=inputs,
        output_dir=str(out_dir),
        seed=int(resolved.get("seed", 0)),
        version=__version__,
        status="running",
        started_at=now_utc(),
    )
    manifest.write(out_dir / "manifest.json")
    return manifest


def _finish_manifest(manifest: RunManifest, out_dir: Path) -> None:
    manifest.status = "complete"
    manifest.finished_at = now_utc()
    manifest.write(out_dir / "manifest.json")


def _write_metrics_json(out_dir: Path, payload: dict) -> None:
    (out_dir / "metrics.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _write_timings(out_dir: Path, timings: dict) -> None:
    (out_dir / "timings.json").write_text(
        json.dumps(timings, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _load_regions(resolved: dict, command: str):
    if command == "single":
        paths = [resolved["data_path"]] if resolved["data_path"] else []
    else:
        paths = list(resolved["data_paths"])
    if paths and not resolved.get("synthetic", True):
        schema = schema_mapping_from(resolved)
        return [parse_transactions_csv(p, schema) for p in paths], paths
    if paths:
        schema = schema_mapping_from(resolved)
        return [parse_transactions_csv(p, schema) for p in paths], paths
    return generate_synthetic(synthetic_config_from(resolved)), []


def cmd_synth(args) -> int:
    resolved = _load_resolved(args, "synth")
    out_dir = _resolve_out_dir(resolved["out_dir"])
    manifest = _start_manifest("synth", resolved, [], out_dir)
    datasets = generate_synthetic(synthetic_config_from(resolved))
    for l, ds in enumerate(datasets):
        write_transactions_csv(ds, out_dir / f"region_{l}.csv")
    _finish_manifest(manifest, out_dir)
    print(f"wrote {len(datasets)} region files to {out_dir}")
    return 0


def cmd_build_graph(args) -> int:
    resolved = {"out_dir": args.out, "seed": 0, "data_path": args.data}
    if args.config:
        raw = parse_config_file(args.config)
        resolved.update(raw)
    out_dir = _resolve_out_dir(resolved["out_dir"])
    manifest = _start_manifest("build-graph", resolved, [args.data], out_dir)
    schema = schema_mapping_from(resolved)
    ds = parse_transactions_csv(args.data, schema)
    graph = build_trade_graph(ds)
    save_trade_graph(graph, out_dir)
    _finish_manifest(manifest, out_dir)
    print(
        f"graph: {graph.n_transactions} transactions, "
        f"{len(graph.card_holder_ids)} card holders, "
        f"{len(graph.merchant_ids)} merchants, "
        f"{len(graph.time_slice_nodes())} time slices -> {out_dir}"
    )
    return 0


def cmd_single(args) -> int:
    resolved = _load_resolved(args, "single")
    out_dir = _resolve_out_dir(resolved["out_dir"])
    manifest = _start_manifest(
        "single", resolved, [resolved["data_path"]] if resolved["data_path"] else [], out_dir
    )
    regions, _ = _load_regions(resolved, "single")
    cfg = train_config_from(resolved)
    metrics, params = train_single_region(regions[0], cfg)
    save_named_tensors(out_dir / "theta_task0.ckpt", params.to_named())
    payload = {
        "command": "single",
        "config": {k: v for k, v in sorted(resolved.items())},
        "seed": cfg.seed,
        "metrics": metrics,
    }
    _write_metrics_json(out_dir, payload)
    _finish_manifest(manifest, out_dir)
    print(
        f"single-region metrics: recall={metrics['recall']:.4f} "
        f"auc={metrics['auc']:.4f} f1={metrics['f1']:.4f}"
    )
    return 0


def cmd_sequence(args) -> int:
    resolved = _load_resolved(args, "sequence")
    out_dir = _resolve_out_dir(resolved["out_dir"])
    regions, inputs = _load_regions(resolved, "sequence")
    manifest = _start_manifest("sequence", resolved, inputs, out_dir)
    cfg = train_config_from(resolved)
    result = run_sequence(regions, cfg)
    for ckpt in result.checkpoints:
        l = ckpt["task_index"]
        save_named_tensors(out_dir / f"theta_task{l}.ckpt", ckpt["params"])
        if ckpt["fisher"] is not None:
            save_named_tensors(
                out_dir / f"fisher_task{l}.ckpt",
                ckpt["fisher"],
                scalars={"lambda": cfg.smoothing_lambda, "gamma": cfg.smoothing_gamma},
            )
    with open(out_dir / "forgetting_curves.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["task_index", "region_id", "auc"])
        for t, r, auc in result.curve_rows:
            writer.writerow([t, r, repr(auc)])
    payload = {
        "command": "sequence",
        "config": {k: v for k, v in sorted(resolved.items())},
        "seed": cfg.seed,
        "metrics": result.report_dict(),
    }
    _write_metrics_json(out_dir, payload)
    _write_timings(out_dir, result.timings)
    _finish_manifest(manifest, out_dir)
    avg = result.averages
    print(
        f"sequence [{cfg.variant}] averages: recall={avg['recall']:.4f} "
        f"auc={avg['auc']:.4f} f1={avg['f1']:.4f}"
    )
    return 0


def cmd_report(args) -> int:
    rows = []
    for run_dir in args.run_dirs:
        metrics_path = Path(run_dir) / "metrics.json"
        doc = json.loads(metrics_path.read_text(encoding="utf-8"))
        if doc["command"] == "sequence":
            for region in doc["metrics"]["per_region"]:
                rows.append(
                    {
                        "run": run_dir,
                        "variant": doc["config"].get("variant", ""),
                        "region_id": region["region_id"],
                        "recall": region["recall"],
                        "auc": region["auc"],
                        "f1": region["f1"],
                    }
                )
            avg = doc["metrics"]["averages"]
            rows.append(
                {
                    "run": run_dir,
                    "variant": doc["config"].get("variant", ""),
                    "region_id": "average",
                    "recall": avg["recall"],
                    "auc": avg["auc"],
                    "f1": avg["f1"],
                }
            )
        else:
            m = doc["metrics"]
            rows.append(
                {
                    "run": run_dir,
                    "variant": "",
                    "region_id": 0,
                    "recall": m["recall"],
                    "auc": m["auc"],
                    "f1": m["f1"],
                }
            )
    header = f"{'run':<40} {'variant':<8} {'region':>7} {'recall':>8} {'auc':>8} {'f1':>8}"
    print(header)
    for row in rows:
        print(
            f"{row['run']:<40} {row['variant']:<8} {str(row['region_id']):>7} "
            f"{row['recall']:>8.4f} {row['auc']:>8.4f} {row['f1']:>8.4f}"
        )
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=["run", "variant", "region_id", "recall", "auc", "f1"]
            )
            writer.writeheader()
            writer.writerows(rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fraudgraph",
        description="Cross-regional fraud detection on heterogeneous transaction graphs",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_flags(p, with_variant=False):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--from-manifest", help="re-run from a previous run's manifest")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="override the output directory")
        if with_variant:
            p.add_argument(
                "--variant", choices=["full", "no_rps", "no_pkr", "naive"],
                help="override the forgetting-prevention variant",
            )

    p_synth = sub.add_parser("synth", help="generate synthetic region datasets")
    add_run_flags(p_synth)
    p_synth.set_defaults(func=cmd_synth)

    p_graph = sub.add_parser("build-graph", help="build and serialize one region's graph")
    p_graph.add_argument("--data", required=True, help="transactions CSV")
    p_graph.add_argument("--out", required=True, help="output directory")
    p_graph.add_argument("--config", help="optional config with col_* schema mapping")
    p_graph.set_defaults(func=cmd_build_graph)

    p_single = sub.add_parser("single", help="train and evaluate on one region")
    add_run_flags(p_single)
    p_single.set_defaults(func=cmd_single)

    p_seq = sub.add_parser("sequence", help="run the cross-regional protocol")
    add_run_flags(p_seq, with_variant=True)
    p_seq.set_defaults(func=cmd_sequence)

    p_report = sub.add_parser("report", help="summarize finished runs")
    p_report.add_argument("run_dirs", nargs="+", help="run output directories")
    p_report.add_argument("--out", help="also write the summary as CSV")
    p_report.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FraudGraphError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
