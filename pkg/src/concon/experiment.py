"""Experiment orchestration: regimes x seeds over a generated dataset,
accuracy matrices, and table emission.

Reported cells: current-task accuracy at each boundary, old-task accuracy
at the final boundary, unconfounded accuracy from the final checkpoint,
plus positive/negative decompositions and the running average accuracy.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datagen import DatasetFormatError
from .learner import featurize_types, forward
from .regimes import TaskData, TrainConfig, run_regime
from .rules import SPLITS


@dataclass
class SplitData:
    x: np.ndarray
    y: np.ndarray
    flags: np.ndarray


@dataclass
class Dataset:
    """Featurized dataset: tasks[t][split] -> SplitData, t=0 unconfounded."""

    tasks: dict
    num_tasks: int  # confounded task count T

    def train_tasks(self):
        return [
            TaskData(self.tasks[t]["train"].x, self.tasks[t]["train"].y,
                     self.tasks[t]["train"].flags)
            for t in range(1, self.num_tasks + 1)
        ]


def load_dataset(dataset_dir):
    """Read a generated dataset tree into feature arrays."""
    root = Path(dataset_dir)
    if not (root / "manifest.json").exists():
        raise DatasetFormatError(f"{root}: missing manifest.json")
    manifest = json.loads((root / "manifest.json").read_text())
    num_conf = len(manifest["rule_spec"]["confounders"])
    tasks = {}
    for task_dir in sorted(root.glob("t*")):
        t = int(task_dir.name[1:])
        tasks[t] = {}
        for split in SPLITS:
            types, labels, flags = [], [], []
            for label_dir in ("pos", "neg"):
                for path in sorted((task_dir / split / label_dir).glob("*.json")):
                    record = json.loads(path.read_text())
                    from .universe import ObjectSpec

                    objs = [ObjectSpec.from_dict(o) for o in record["objects"]]
                    types.append(sorted(o.type_index for o in objs))
                    labels.append(record["label"])
                    flags.append(record["confounders_present"])
            tasks[t][split] = SplitData(
                x=featurize_types(np.array(types)),
                y=np.array(labels, dtype=int),
                flags=np.array(flags, dtype=bool).reshape(len(labels), num_conf),
            )
    return Dataset(tasks=tasks, num_tasks=max(tasks))


def evaluate(model, split: SplitData):
    """(accuracy, positive-accuracy, negative-accuracy); logit ties break
    toward class 0."""
    if len(split.x) == 0:
        raise ValueError("empty split")
    logits = forward(model, split.x)
    pred = (logits[:, 1] > logits[:, 0]).astype(int)
    correct = pred == split.y
    pos = split.y == 1
    acc = float(correct.mean())
    pos_acc = float(correct[pos].mean()) if pos.any() else float("nan")
    neg_acc = float(correct[~pos].mean()) if (~pos).any() else float("nan")
    return acc, pos_acc, neg_acc


def run_single(dataset: Dataset, regime, config: TrainConfig):
    """One (regime, seed) cell: train, then evaluate every checkpoint on
    every confounded test split and the unconfounded test split."""
    checkpoints, log = run_regime(regime, dataset.train_tasks(), config)
    T = dataset.num_tasks
    matrix = []  # matrix[b][t] = (acc, pos, neg) of checkpoint b on task t's test
    for model in checkpoints:
        row = [evaluate(model, dataset.tasks[t]["test"]) for t in range(1, T + 1)]
        matrix.append(row)
    final = checkpoints[-1]
    unconf = evaluate(final, dataset.tasks[0]["test"])
    if regime == "joint":
        current = {t: matrix[0][t - 1][0] for t in range(1, T + 1)}
        old = {}
    else:
        current = {t: matrix[t - 1][t - 1][0] for t in range(1, T + 1)}
        old = {t: matrix[-1][t - 1][0] for t in range(1, T)}
    avg_acc = float(np.mean([matrix[-1][t - 1][0] for t in range(1, T + 1)]))
    return {
        "regime": regime,
        "seed": config.seed,
        "current": current,
        "old": old,
        "unconfounded": unconf[0],
        "unconfounded_pos": unconf[1],
        "unconfounded_neg": unconf[2],
        "average_accuracy": avg_acc,
        "matrix": matrix,
        "log": log,
    }


@dataclass
class EvalReport:
    num_tasks: int
    runs: list = field(default_factory=list)  # run_single dicts

    def regimes(self):
        seen = []
        for run in self.runs:
            if run["regime"] not in seen:
                seen.append(run["regime"])
        return seen

    def cells(self, regime):
        return [r for r in self.runs if r["regime"] == regime]

    def aggregate(self, regime, metric_fn):
        values = [metric_fn(r) for r in self.cells(regime)]
        mean = float(np.mean(values))
        std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
        return mean, std

    def to_json(self):
        return {
            "num_tasks": self.num_tasks,
            "runs": [
                {k: v for k, v in run.items() if k != "log"} for run in self.runs
            ],
        }


def run_experiment(dataset, regimes, seeds, config: TrainConfig = TrainConfig()):
    """All (regime, seed) cells; dataset may be a path or a loaded Dataset."""
    if not regimes:
        raise ValueError("empty regime list")
    if not isinstance(dataset, Dataset):
        dataset = load_dataset(dataset)
    report = EvalReport(num_tasks=dataset.num_tasks)
    for regime in regimes:
        for seed in seeds:
            cfg = TrainConfig(**{**config.__dict__, "seed": seed})
            report.runs.append(run_single(dataset, regime, cfg))
    return report


def _fmt(mean, std):
    return f"{100 * mean:.1f} ± {100 * std:.2f}"


def render_markdown(report: EvalReport):
    T = report.num_tasks
    header = (
        ["Method"]
        + [f"T{t}" for t in range(1, T + 1)]
        + [f"T{t}@T{T}" for t in range(1, T)]
        + ["Unconf."]
    )
    lines = ["| " + " | ".join(header) + " |",
             "|" + "---|" * len(header)]
    for regime in report.regimes():
        row = [regime]
        for t in range(1, T + 1):
            row.append(_fmt(*report.aggregate(regime, lambda r, t=t: r["current"][t])))
        for t in range(1, T):
            if all(t in r["old"] for r in report.cells(regime)):
                row.append(_fmt(*report.aggregate(regime, lambda r, t=t: r["old"][t])))
            else:
                row.append("N/A")
        row.append(_fmt(*report.aggregate(regime, lambda r: r["unconfounded"])))
        lines.append("| " + " | ".join(row) + " |")
    present = set(report.regimes())
    if {"joint", "shuffled", "cumulative"} <= present:
        j = report.aggregate("joint", lambda r: r["unconfounded"])[0]
        s = report.aggregate("shuffled", lambda r: r["unconfounded"])[0]
        c = report.aggregate("cumulative", lambda r: r["unconfounded"])[0]
        lines += [
            "",
            "Unconfounded accuracy by training scheme: "
            f"joint={100 * j:.1f}, shuffled={100 * s:.1f}, cumulative={100 * c:.1f}; "
            f"joint − cumulative gap = {100 * (j - c):.1f} points.",
        ]
    return "\n".join(lines) + "\n"


def write_csv(report: EvalReport, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["regime", "seed", "metric", "value"])
        for run in report.runs:
            for t, v in run["current"].items():
                w.writerow([run["regime"], run["seed"], f"current_t{t}", repr(v)])
            for t, v in run["old"].items():
                w.writerow([run["regime"], run["seed"], f"old_t{t}", repr(v)])
            for b, row in enumerate(run["matrix"], start=1):
                for t, (acc, pos, neg) in enumerate(row, start=1):
                    w.writerow([run["regime"], run["seed"], f"acc_b{b}_t{t}", repr(acc)])
                    w.writerow([run["regime"], run["seed"], f"pos_b{b}_t{t}", repr(pos)])
                    w.writerow([run["regime"], run["seed"], f"neg_b{b}_t{t}", repr(neg)])
            for key in ("unconfounded", "unconfounded_pos", "unconfounded_neg",
                        "average_accuracy"):
                w.writerow([run["regime"], run["seed"], key, repr(run[key])])


def emit_report(report: EvalReport, fmt, path):
    """Write the report as markdown (tables) or csv (per-run metrics)."""
    path = Path(path)
    if fmt == "markdown":
        path.write_text(render_markdown(report))
    elif fmt == "csv":
        write_csv(report, path)
    else:
        raise ValueError(f"unknown report format: {fmt!r}")
    return path
