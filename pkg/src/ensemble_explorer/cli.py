"""Command-line entry point: ``run``, ``train-policy``, ``evaluate`` and ``ensemble-oracle``.

Exit codes are 0 on success, 2 on a usage error and 1 on a runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from .data import CATEGORICAL, CLASSIFICATION, DATETIME, NUMERIC, REGRESSION, DataError, load_csv
from .data import holdout_split
from .ensemble import EnsembleError, brute_force_select, greedy_select
from .estimators import EstimatorError, PredictionVector
from .exploration import BudgetTooSmall, Clock, RunConfig, run
from .metrics import error_reduction
from .policy import PolicyError, load_policy, save_policy, train
from .report import build_report, dumps, validate_report

TASKS = {"classification": CLASSIFICATION, "regression": REGRESSION}
HOLDOUT_FRACTION = 0.33
HOLDOUT_SEED = 1


class UsageError(Exception):
    pass


def _parse_kinds(text: str | None) -> dict:
    if not text:
        return {}
    out = {}
    for item in text.split(","):
        name, sep, kind = item.partition("=")
        if not sep or kind not in (NUMERIC, CATEGORICAL, DATETIME):
            raise UsageError(f"bad --kinds entry {item!r}; expected name=numeric|categorical|datetime")
        out[name.strip()] = kind
    return out


def _load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return RunConfig.from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise DataError(f"{path}: bad config ({exc})") from None


def cmd_run(args) -> int:
    if args.time_budget <= 0:
        raise UsageError("--time-budget must be positive")
    if args.iterations is not None and args.iterations < 0:
        raise UsageError("--iterations must be non-negative")
    config = _load_config(args.config)
    policy = load_policy(args.policy) if args.policy else None
    d = load_csv(args.data, args.target, _parse_kinds(args.kinds), task=TASKS[args.task])
    train_d, holdout = holdout_split(d, HOLDOUT_FRACTION, HOLDOUT_SEED)
    result = run(train_d, Clock(args.time_budget, args.iterations), policy, config, seed=args.seed)
    echo = {
        "run": config.to_dict(),
        "policy": args.policy and Path(args.policy).name,
        "holdout_fraction": HOLDOUT_FRACTION,
        "holdout_seed": HOLDOUT_SEED,
    }
    report = build_report(result, train_d, holdout, args.seed, echo)
    validate_report(report)
    Path(args.out).write_text(dumps(report), encoding="utf-8")
    red = report["error_reduction"]
    print(f"{report['metric']}: baseline {report['baseline_holdout_metric']:.4f} "
          f"ensemble {report['ensemble_holdout_metric']:.4f} "
          f"reduction {'undefined' if red is None else f'{100 * red:.2f}%'}")
    return 0


def read_manifest(path) -> list:
    items = []
    base = Path(path).parent
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4 or parts[2] not in TASKS:
            raise DataError(f"{path}:{n}: expected csv_path<TAB>target<TAB>task<TAB>t_max")
        csv_path = Path(parts[0])
        if not csv_path.is_absolute():
            csv_path = base / csv_path
        try:
            t_max = float(parts[3])
        except ValueError:
            raise DataError(f"{path}:{n}: bad t_max {parts[3]!r}") from None
        items.append((csv_path, parts[1], TASKS[parts[2]], t_max))
    if not items:
        raise DataError(f"{path}: empty manifest")
    return items


def cmd_train_policy(args) -> int:
    if args.episodes < 0:
        raise UsageError("--episodes must be non-negative")
    corpus = []
    for csv_path, target, task, t_max in read_manifest(args.manifest):
        d = load_csv(csv_path, target, task=task)
        corpus.append((holdout_split(d, HOLDOUT_FRACTION, HOLDOUT_SEED)[0], t_max, args.iterations))
    policy = train(corpus, episodes=args.episodes, seed=args.seed, config=_load_config(args.config))
    save_policy(policy, args.out)
    print(f"trained {args.episodes} episodes over {len(corpus)} datasets -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    try:
        report = json.loads(Path(args.report).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{args.report}: not a report ({exc})") from None
    validate_report(report)
    red = report["error_reduction"]
    check = error_reduction(report["baseline_holdout_metric"], report["ensemble_holdout_metric"],
                            report["task"])
    if (red is None) != math.isnan(check) or (red is not None and abs(red - check) > 1e-9):
        raise DataError("stored error_reduction disagrees with the stored metrics")
    m = report["metric"]
    rows = [
        ("dataset", report["dataset"]),
        ("task", report["task"]),
        ("t_max", f"{report['t_max']:g}"),
        ("seed", str(report["seed"])),
        (f"baseline holdout {m}", f"{report['baseline_holdout_metric']:.4f}"),
        (f"ensemble holdout {m}", f"{report['ensemble_holdout_metric']:.4f}"),
        ("error reduction", "undefined" if red is None else f"{100 * red:.2f}%"),
        ("members", str(len(report["members"]))),
        ("steps", str(len(report["steps"]))),
    ]
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        print(f"{k:<{width}}  {v}")
    print()
    for mem in report["members"]:
        chain = " > ".join(s["transform"] for s in mem["lineage"]) or "(raw)"
        print(f"  #{mem['model_node']:<4} {mem['estimator']:<24} cv {mem['cv_error']:.5f}  {chain}")
    return 0


def read_prediction_matrix(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2 or len(rows[0]) < 2:
        raise DataError(f"{path}: need a header, a y column and at least one model column")
    header = rows[0]
    try:
        m = np.array([[float(c) for c in r] for r in rows[1:]])
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    if m.shape[1] != len(header):
        raise DataError(f"{path}: ragged rows")
    return header[1:], m[:, 0], m[:, 1:]


def cmd_ensemble_oracle(args) -> int:
    names, y, preds = read_prediction_matrix(args.predictions)
    cands = [PredictionVector(i, preds[:, i], float(np.mean((preds[:, i] - y) ** 2)), names[i], {})
             for i in range(len(names))]
    greedy = greedy_select(cands, y, phi=args.phi, allow_drop=args.allow_drop)
    print(f"greedy      E={greedy.value.E:.10g}  members {[names[i] for i in greedy.ids]}")
    if len(cands) <= args.cap:
        best = brute_force_select(cands, y, cap=args.cap)
        print(f"brute_force E={best.value.E:.10g}  members {[names[i] for i in best.ids]}")
        print(f"gap         {greedy.value.E - best.value.E:.3g}")
    else:
        print(f"brute_force skipped: {len(cands)} candidates exceeds cap {args.cap}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ensemble-explorer",
                                description="Budgeted feature/model exploration with ensemble selection.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="explore a CSV dataset and write a report")
    r.add_argument("--data", required=True)
    r.add_argument("--target", required=True)
    r.add_argument("--task", required=True, choices=sorted(TASKS))
    r.add_argument("--time-budget", required=True, type=float, help="t_max in seconds")
    r.add_argument("--iterations", type=int, help="count actions instead of wall time")
    r.add_argument("--seed", required=True, type=int)
    r.add_argument("--policy")
    r.add_argument("--config", help="JSON file of run settings")
    r.add_argument("--kinds", help="name=numeric|categorical|datetime,...")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("train-policy", help="Q-learn exploration weights over a manifest of datasets")
    t.add_argument("--manifest", required=True)
    t.add_argument("--episodes", required=True, type=int)
    t.add_argument("--seed", required=True, type=int)
    t.add_argument("--iterations", type=int, help="iteration cap per episode (virtual clock)")
    t.add_argument("--config")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train_policy)

    e = sub.add_parser("evaluate", help="print the metrics of a report")
    e.add_argument("--report", required=True)
    e.set_defaults(func=cmd_evaluate)

    o = sub.add_parser("ensemble-oracle", help="compare greedy and exhaustive selection")
    o.add_argument("--predictions", required=True)
    o.add_argument("--phi", type=float, default=0.0)
    o.add_argument("--allow-drop", action="store_true")
    o.add_argument("--cap", type=int, default=20)
    o.set_defaults(func=cmd_ensemble_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, EstimatorError, EnsembleError, PolicyError, BudgetTooSmall,
            jsonschema.ValidationError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
