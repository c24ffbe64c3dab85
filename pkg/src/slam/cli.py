"""Command-line entry point: ``slam evaluate | simulate | sweep``.

Reports go to stdout as JSON; progress and ``--pretty`` tables go to stderr.
Exit codes: 0 success, 1 pipeline error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from pathlib import Path

from . import __version__
from .core import (
    ConfigError,
    EvaluationConfig,
    Labeling,
    SlamError,
    load_dataset,
    load_labeling,
    save_dataset,
    save_labeling,
)
from .discrepancy import PipelineError, slam_score
from .graph import build_mutual_knn
from .harness import (
    CASE_IDS,
    DEFAULT_H_VALUES,
    HarnessError,
    case_config,
    complexity_sweep,
    generate_case,
    q_coefficient,
    sensitivity_sweep,
)
from .matching import align_labels, needs_matching
from .metrics import CATALOG, external_scores, internal_scores, jaccard_score, supervised_scores

EXIT_OK, EXIT_PIPELINE, EXIT_USAGE = 0, 1, 2

# maps CLI flag -> EvaluationConfig field
_CONFIG_FLAGS = {
    "k": "k_neighbors",
    "bandwidth": "bandwidth_h",
    "gamma": "gamma",
    "num_samples": "num_samples",
    "batch_size": "batch_size",
    "num_projections": "num_projections",
    "seed": "rng_seed",
    "estimator": "mmd_estimator",
    "similarity": "similarity_mode",
    "zero_rows": "zero_rows",
}


class UsageError(Exception):
    pass


_SCORE = {
    "type": "object",
    "required": ["name", "range", "direction", "kind", "value"],
    "properties": {
        "name": {"type": "string"},
        "range": {"type": "array", "items": {"type": ["number", "null"]}, "minItems": 2, "maxItems": 2},
        "direction": {"enum": ["higher-better", "lower-better"]},
        "kind": {"type": "string"},
        "value": {"type": "number"},
    },
}

# JSON schema of the ``evaluate`` report
REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": [
        "tool", "version", "config", "seed", "similarity_mode", "internal_metric_space",
        "dataset", "truth", "graph", "labelings", "q",
    ],
    "properties": {
        "tool": {"const": "slam"},
        "version": {"type": "string"},
        "config": {"type": "object"},
        "seed": {"type": "integer"},
        "similarity_mode": {"enum": list(EvaluationConfig.SIMILARITY_MODES)},
        "internal_metric_space": {"type": "string"},
        "dataset": {
            "type": "object",
            "required": ["path", "n_spots", "n_attributes"],
            "properties": {"n_spots": {"type": "integer", "minimum": 2}, "n_attributes": {"type": "integer"}},
        },
        "truth": {
            "type": "object",
            "required": ["path", "label_space"],
            "properties": {"label_space": {"type": "array", "items": {"type": "string"}, "minItems": 1}},
        },
        "graph": {"type": "object", "required": ["k", "n_edges"]},
        "labelings": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name", "path", "scores", "skipped", "matching"],
                "properties": {
                    "name": {"type": "string"},
                    "scores": {"type": "object", "required": ["SLAM"], "additionalProperties": _SCORE},
                    "skipped": {"type": "object", "additionalProperties": {"type": "string"}},
                    "matching": {"type": ["object", "null"]},
                    "timings": {"type": "object"},
                },
            },
        },
        "q": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["worse", "better", "values"],
                "properties": {"values": {"type": "object", "additionalProperties": {"type": "number"}}},
            },
        },
        "timings": {"type": "object"},
    },
}


def threads_from_env() -> int:
    raw = os.environ.get("SLAM_THREADS", "")
    if not raw:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"SLAM_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise UsageError("SLAM_THREADS must be >= 1")
    return n


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file, or a previous report (its 'config' block is reused)")
    p.add_argument("--k", type=int, help="neighbours per spot in the mutual k-NN graph (default 6)")
    p.add_argument("--bandwidth", type=float, help="KDE bandwidth h (default 0.1)")
    p.add_argument("--gamma", type=float, help="kernel scale (default 1.0)")
    p.add_argument("--num-samples", type=int, help="sampled distributions per side (default 20)")
    p.add_argument("--batch-size", type=int, help="points per sampled distribution (default 100)")
    p.add_argument("--num-projections", type=int, help="sliced-Wasserstein directions (default 50)")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--estimator", choices=EvaluationConfig.ESTIMATORS)
    p.add_argument("--similarity", choices=EvaluationConfig.SIMILARITY_MODES)
    p.add_argument("--zero-rows", choices=("keep", "drop"))


def resolve_config(args, base: EvaluationConfig | None = None) -> EvaluationConfig:
    """Config file (or ``base``) first, then any explicit flags on top."""
    data = None
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
        if isinstance(data, dict) and "config" in data and isinstance(data["config"], dict):
            data = data["config"]
        if not isinstance(data, dict):
            raise SlamError("config file must contain a JSON object")
    config = EvaluationConfig.from_dict(data) if data is not None else (base or EvaluationConfig())
    changes = {field: getattr(args, flag) for flag, field in _CONFIG_FLAGS.items() if getattr(args, flag, None) is not None}
    return config.replace(**changes) if changes else config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slam", description="Spatial labeling similarity evaluation")
    parser.add_argument("--version", action="version", version=f"slam {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evaluate", help="score predicted labelings against a ground truth")
    ev.add_argument("--dataset", required=True, help="dataset CSV/JSON (spot_id, x, y, optional attributes)")
    ev.add_argument("--truth", required=True, help="ground-truth labeling file")
    ev.add_argument("--pred", action="append", required=True, help="predicted labeling file (repeatable)")
    ev.add_argument(
        "--q-pair",
        nargs=2,
        action="append",
        metavar=("WORSE", "BETTER"),
        help="compute Q for a (more-erroneous, less-erroneous) pair, by name or 0-based index",
    )
    _add_config_flags(ev)
    ev.add_argument("--out", help="also write per-labeling scores as CSV to this path")
    ev.add_argument("--timings", action="store_true", help="include wall-clock timings (makes the report non-reproducible)")
    ev.add_argument("--pretty", action="store_true", help="print a score table to stderr")

    sim = sub.add_parser("simulate", help="write a simulated case as dataset / labeling CSVs")
    sim.add_argument("case", help=f"case id, one of {', '.join(CASE_IDS)}")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True, help="output directory")

    sw = sub.add_parser("sweep", help="bandwidth sensitivity or runtime sweep, written as CSV")
    sw.add_argument("kind", help="sensitivity or complexity")
    sw.add_argument("--h-values", type=float, nargs="+", default=list(DEFAULT_H_VALUES))
    # either list may be given empty to run only the other half of the complexity sweep
    sw.add_argument("--spot-counts", type=int, nargs="*", default=[10, 100, 1000, 10000])
    sw.add_argument("--label-counts", type=int, nargs="*", default=[5, 7, 9, 11, 13, 15])
    _add_config_flags(sw)
    sw.add_argument("--out", required=True, help="CSV output path")
    return parser


# ------------------------------------------------------------------ evaluate


def _annotated(name: str, value: float) -> dict:
    d = CATALOG[name].to_dict()
    d["value"] = value
    return d


def _labeling_name(path: str, taken: set) -> str:
    stem = Path(path).stem
    name, i = stem, 2
    while name in taken:
        name, i = f"{stem}-{i}", i + 1
    taken.add(name)
    return name


def evaluate_labeling(truth: Labeling, pred: Labeling, dataset, config, graph) -> tuple[dict, dict]:
    """Scores for one prediction plus a block of notes (skips, matching, graph size)."""
    d, meta = slam_score(truth, pred, dataset, config, graph=graph)
    scores = {"SLAM": d}
    skipped = {}
    if needs_matching(pred, truth):
        for name in ("accuracy", "precision", "recall", "f1"):
            skipped[name] = "predicted label space differs from the ground truth; supervised metrics need shared labels"
    else:
        scores.update(supervised_scores(truth, pred))
    scores.update(external_scores(truth, pred))
    if meta["matching"] is not None:
        # a class-wise score needs the clusters expressed in truth labels first
        matched, _ = align_labels(pred, truth, dataset)
        scores["jaccard"] = jaccard_score(truth, matched)
    for name, value in internal_scores(dataset.coords, pred).items():
        if value is None or not math.isfinite(value):
            skipped[name] = "undefined for this labeling"
        else:
            scores[name] = value
    notes = {"skipped": skipped, "matching": meta["matching"], "n_edges": meta["n_edges"], "timings": meta["timings"]}
    return scores, notes


def _resolve_pair_member(token: str, names: list[str]) -> int:
    if token in names:
        return names.index(token)
    try:
        i = int(token)
    except ValueError:
        raise UsageError(f"--q-pair: no labeling named {token!r}") from None
    if not 0 <= i < len(names):
        raise UsageError(f"--q-pair: index {i} out of range")
    return i


def q_block(worse: dict, better: dict) -> dict:
    out = {}
    for name in CATALOG:
        if name in worse and name in better:
            try:
                out[name] = q_coefficient(CATALOG[name], worse[name], better[name])
            except HarnessError:
                continue
    return out


def cmd_evaluate(args) -> dict:
    config = resolve_config(args)
    t0 = time.perf_counter()
    dataset = load_dataset(args.dataset)
    truth = load_labeling(args.truth, dataset, role="ground-truth")
    preds = [load_labeling(p, dataset) for p in args.pred]
    taken: set = set()
    names = [_labeling_name(p, taken) for p in args.pred]
    pairs = [(_resolve_pair_member(a, names), _resolve_pair_member(b, names)) for a, b in (args.q_pair or [])]
    try:
        graph = build_mutual_knn(dataset.coords, config.k_neighbors)
    except SlamError as exc:
        raise PipelineError("graph", exc) from exc

    blocks = []
    all_scores = []
    for name, path, pred in zip(names, args.pred, preds):
        scores, notes = evaluate_labeling(truth, pred, dataset, config, graph)
        all_scores.append(scores)
        block = {
            "name": name,
            "path": str(path),
            "scores": {k: _annotated(k, v) for k, v in scores.items()},
            "skipped": notes["skipped"],
            "matching": notes["matching"],
        }
        if args.timings:
            block["timings"] = notes["timings"]
        blocks.append(block)

    report = {
        "tool": "slam",
        "version": __version__,
        "config": config.to_dict(),
        "seed": config.rng_seed,
        "similarity_mode": config.resolved_similarity_mode(dataset),
        "internal_metric_space": "spatial coordinates",
        "dataset": {"path": str(args.dataset), "n_spots": dataset.n, "n_attributes": dataset.g},
        "truth": {"path": str(args.truth), "label_space": list(truth.label_space)},
        "graph": {"k": config.k_neighbors, "n_edges": graph.n_edges},
        "labelings": blocks,
        "q": [
            {"worse": names[i], "better": names[j], "values": q_block(all_scores[i], all_scores[j])}
            for i, j in pairs
        ],
    }
    if args.timings:
        report["timings"] = {"total_seconds": time.perf_counter() - t0}
    if args.out:
        _write_scores_csv(args.out, names, all_scores)
    if args.pretty:
        _print_table(names, all_scores)
    return report


def _write_scores_csv(path, names, all_scores):
    metrics = [m for m in CATALOG if any(m in s for s in all_scores)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["labeling"] + metrics)
        for name, scores in zip(names, all_scores):
            w.writerow([name] + [repr(scores[m]) if m in scores else "" for m in metrics])


def _print_table(names, all_scores):
    metrics = [m for m in CATALOG if any(m in s for s in all_scores)]
    width = max(12, *(len(n) for n in names))
    print(f"{'metric':<10}" + "".join(f"{n:>{width + 2}}" for n in names), file=sys.stderr)
    for m in metrics:
        cells = "".join(
            f"{s[m]:>{width + 2}.4f}" if m in s else f"{'-':>{width + 2}}" for s in all_scores
        )
        print(f"{m:<10}" + cells, file=sys.stderr)


# ------------------------------------------------------------------ simulate


def cmd_simulate(args) -> dict:
    if args.case not in CASE_IDS:
        raise UsageError(f"unknown case {args.case!r}; expected one of {', '.join(CASE_IDS)}")
    case = generate_case(args.case, args.seed)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise SlamError(f"cannot create output directory {out}: {exc}") from exc
    files = ["dataset.csv", "truth.csv"]
    save_dataset(case.dataset, out / "dataset.csv")
    save_labeling(case.truth, case.dataset, out / "truth.csv")
    width = len(str(len(case.labelings)))
    for i, lab in enumerate(case.labelings, start=1):
        fname = f"labeling_{i:0{width}d}.csv"
        save_labeling(lab, case.dataset, out / fname)
        files.append(fname)
    return {
        "case": case.case_id,
        "seed": args.seed,
        "out": str(out),
        "files": files,
        "labelings": list(case.names),
        "settings": case.settings,
    }


# ------------------------------------------------------------------ sweep


def _progress(msg: str):
    print(msg, file=sys.stderr, flush=True)


def cmd_sweep(args) -> dict:
    if args.kind not in ("sensitivity", "complexity"):
        raise UsageError(f"unknown sweep kind {args.kind!r}; expected sensitivity or complexity")
    if args.kind == "sensitivity":
        case = generate_case("II")
        config = resolve_config(args, base=case_config(case))
        rows = sensitivity_sweep(
            args.h_values, base_case=case, config=config, threads=threads_from_env(), progress=_progress
        )
    else:
        config = resolve_config(args)
        if not args.spot_counts and not args.label_counts:
            raise UsageError("complexity sweep needs spot counts or label counts")
        rows = complexity_sweep(args.spot_counts, args.label_counts, config=config, progress=_progress)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return {"kind": args.kind, "out": str(args.out), "rows": len(rows)}


_COMMANDS = {"evaluate": cmd_evaluate, "simulate": cmd_simulate, "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        result = _COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"slam: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SlamError, OSError, json.JSONDecodeError) as exc:
        # pipeline errors already carry their stage tag
        tag = "" if hasattr(exc, "stage") else "[input] "
        print(f"slam: error: {tag}{exc}", file=sys.stderr)
        return EXIT_PIPELINE
    json.dump(result, sys.stdout, indent=2, allow_nan=False)
    sys.stdout.write("\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
