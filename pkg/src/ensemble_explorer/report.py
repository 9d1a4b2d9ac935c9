"""Run reports: construction, JSON serialization and schema validation."""

from __future__ import annotations

import json
import math
from datetime import datetime, timezone

import jsonschema

from .data import CLASSIFICATION, Dataset
from .estimators import SPACES
from .metrics import auc, error_reduction, rmse

REPORT_FORMAT = "ensemble-explorer-report/1"
TIMESTAMP_FIELD = "generated_at"

_NUM = {"type": "number"}
_NUM_OR_NULL = {"type": ["number", "null"]}

REPORT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": [
        "format", TIMESTAMP_FIELD, "dataset", "task", "metric", "t_max", "iterations", "seed",
        "n_train", "n_holdout", "baseline_holdout_metric", "ensemble_holdout_metric",
        "error_reduction", "baseline_cv_error", "ensemble_cv", "members", "steps", "tree",
        "config",
    ],
    "properties": {
        "format": {"const": REPORT_FORMAT},
        TIMESTAMP_FIELD: {"type": "string"},
        "dataset": {"type": "string"},
        "task": {"enum": ["binary_classification", "regression"]},
        "metric": {"enum": ["auc", "rmse"]},
        "t_max": _NUM,
        "iterations": {"type": ["integer", "null"]},
        "seed": {"type": "integer"},
        "n_train": {"type": "integer"},
        "n_holdout": {"type": "integer"},
        "baseline_holdout_metric": _NUM,
        "ensemble_holdout_metric": _NUM,
        "error_reduction": _NUM_OR_NULL,
        "baseline_cv_error": _NUM,
        "ensemble_cv": {
            "type": "object",
            "required": ["E", "E_bar", "A_bar"],
            "properties": {"E": _NUM, "E_bar": _NUM, "A_bar": _NUM},
        },
        "members": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["model_node", "data_node", "estimator", "hyperparams", "lineage",
                             "cv_error"],
                "properties": {
                    "model_node": {"type": "integer"},
                    "data_node": {"type": "integer"},
                    "estimator": {"type": "string"},
                    "hyperparams": {"type": "object"},
                    "lineage": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["transform", "columns"],
                            "properties": {
                                "transform": {"type": "string"},
                                "columns": {"type": "array", "items": {"type": "string"}},
                            },
                        },
                    },
                    "cv_error": _NUM,
                },
            },
        },
        "steps": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["step", "action", "elapsed", "e_min", "reward"],
                "properties": {
                    "step": {"type": "integer"},
                    "action": {"type": "string"},
                    "elapsed": _NUM,
                    "e_min": _NUM,
                    "reward": _NUM,
                    "noop": {"type": "boolean"},
                },
            },
        },
        "tree": {
            "type": "object",
            "required": ["data_nodes", "model_nodes"],
        },
        "config": {"type": "object"},
        "hyperparameter_spaces": {"type": "object"},
    },
}


def _lineage(specs) -> list:
    return [{"transform": s.id, "columns": s.output_names} for s in specs]


def build_report(result, train: Dataset, holdout: Dataset, seed: int, config_echo: dict,
                 timestamp: str | None = None) -> dict:
    """Score ``result`` on the holdout rows and assemble the report dictionary."""
    tree = result.tree
    y = holdout.target.values
    base_pred = result.baseline.predict(holdout)
    ens_pred = result.ensemble.predict(holdout)
    if train.task == CLASSIFICATION:
        metric, base_m, ens_m = "auc", auc(base_pred, y), auc(ens_pred, y)
    else:
        metric, base_m, ens_m = "rmse", rmse(base_pred, y), rmse(ens_pred, y)
    red = error_reduction(base_m, ens_m, train.task)
    sel = result.selection
    clock = result.clock
    return {
        "format": REPORT_FORMAT,
        TIMESTAMP_FIELD: timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "dataset": train.name,
        "task": train.task,
        "metric": metric,
        "t_max": clock.t_max,
        "iterations": clock.iteration_cap,
        "seed": seed,
        "n_train": train.n_rows,
        "n_holdout": holdout.n_rows,
        "baseline_holdout_metric": base_m,
        "ensemble_holdout_metric": ens_m,
        "error_reduction": None if math.isnan(red) else red,
        "baseline_cv_error": tree.baseline_error,
        "ensemble_cv": {"E": sel.value.E, "E_bar": sel.value.E_bar, "A_bar": sel.value.A_bar},
        "members": [
            {
                "model_node": m.model_node,
                "data_node": m.data_node,
                "estimator": m.model.estimator,
                "hyperparams": m.model.hyperparams,
                "lineage": _lineage(m.lineage),
                "cv_error": m.cv_error,
            }
            for m in result.ensemble.members
        ],
        "steps": [
            {"step": s.step, "action": s.action.describe(), "elapsed": s.elapsed,
             "e_min": s.e_min, "reward": s.reward, "noop": s.noop}
            for s in result.steps
        ],
        "tree": {
            "data_nodes": [
                {"id": n.id, "parent": n.parent, "depth": n.depth, "noop": n.noop,
                 "transform": n.spec.id if n.spec else None, "n_columns": len(n.dataset.columns)}
                for n in tree.data_nodes
            ],
            "model_nodes": [
                {"id": m.id, "data_node": m.data_node, "estimator": m.estimator, "hpo": m.hpo,
                 "hyperparams": m.hyperparams, "cv_error": m.cv_error}
                for m in tree.model_nodes
            ],
        },
        "config": config_echo,
        "hyperparameter_spaces": {k: [p.to_dict() for p in v] for k, v in SPACES.items()},
    }


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def validate_report(report: dict) -> None:
    """Raise ``jsonschema.ValidationError`` if ``report`` breaks the documented schema."""
    jsonschema.validate(report, REPORT_SCHEMA)


def mask_timestamp(text: str) -> str:
    report = json.loads(text)
    report[TIMESTAMP_FIELD] = "<masked>"
    return dumps(report)
