"""Command-line entry point: generate, analyze, verify, train, report.

Exit codes: 0 success, 1 domain error (validation or verification failed),
2 usage error. Domain errors go to stderr as `error[CODE]: message`.
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

import click

from . import datagen, experiment, hypotheses, regimes, rules
from .regimes import REGIMES, TrainConfig


def _fail(code, message):
    click.echo(f"error[{code}]: {message}", err=True)
    sys.exit(1)


def _load_spec(path):
    try:
        return rules.load_rule_spec(path)
    except FileNotFoundError:
        _fail("spec-missing", f"no such file: {path}")
    except (rules.RuleSpecError, json.JSONDecodeError) as exc:
        _fail("spec-invalid", str(exc))


@click.group()
@click.version_option(package_name="concon")
def main():
    """Confounded continual-learning benchmark tools."""


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(), help="Rule-spec file.")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Output dataset directory.")
@click.option("--seed", default=0, show_default=True, type=int, help="Generation seed.")
@click.option("--mode", default="uniform", show_default=True,
              type=click.Choice(["uniform", "slot"]), help="Sampling mode.")
@click.option("--render", is_flag=True, help="Also write a PNG per scene.")
@click.option("--dedup", is_flag=True, help="Reject duplicate scenes within each subset.")
def generate(spec_path, out_dir, seed, mode, render, dedup):
    """Generate a labeled dataset tree with a manifest."""
    spec, digest = _load_spec(spec_path)
    diagnostics = rules.validate_spec(spec)
    for d in diagnostics:
        if d.severity == "error":
            _fail(d.code, d.message)
        click.echo(f"warning[{d.code}]: {d.message}", err=True)
    try:
        manifest = datagen.generate(spec, seed=seed, out_dir=out_dir, mode=mode,
                                    render=render, dedup=dedup, spec_digest=digest)
    except datagen.GenerationError as exc:
        _fail("generation-failed", str(exc))
    click.echo(f"wrote {manifest['files']} scene files under {out_dir}")


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(), help="Rule-spec file.")
@click.option("--max-atoms", default=3, show_default=True, type=int,
              help="Hypothesis connective arity bound.")
@click.option("--max-literals", default=2, show_default=True, type=int,
              help="Literals per existence atom.")
@click.option("--mode", default="exact", show_default=True,
              type=click.Choice(["exact", "empirical"]), help="Consistency domain.")
@click.option("--data", "data_dir", type=click.Path(), default=None,
              help="Dataset directory (required for empirical mode).")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Report file [default: analysis.json next to the spec].")
def analyze(spec_path, max_atoms, max_literals, mode, data_dir, out_path):
    """Enumerate consistent hypotheses and check confounder structure."""
    spec, _ = _load_spec(spec_path)
    lang = hypotheses.HypothesisLanguage(max_literals=max_literals, max_atoms=max_atoms)
    data = None
    if mode == "empirical":
        if data_dir is None:
            raise click.UsageError("--data is required with --mode empirical")
        data = _training_scenes(data_dir)
    try:
        report = hypotheses.analyze(spec, lang, mode=mode, data=data)
    except ValueError as exc:
        _fail("spec-invalid", str(exc))
    if out_path is None:
        out_path = Path(spec_path).with_name("analysis.json")
    report.save(out_path)
    joint = report.minimal_joint
    click.echo(f"jointly consistent hypotheses: {len(report.joint)}; "
               f"minimal MDL {'%d' % joint[0].mdl if joint else 'n/a'}")
    click.echo(f"ground truth minimal: {report.ground_truth_is_minimal}")
    for name, check in report.bound_checks.items():
        status = "within" if check["within_bounds"] else "outside"
        click.echo(f"bounds[{name}]: {status}")
    click.echo(f"report written to {out_path}")


def _training_scenes(data_dir):
    """task index -> [(Scene, label)] from a dataset's training splits."""
    from .universe import ObjectSpec, canonicalize

    root = Path(data_dir)
    data: dict = {}
    for task_dir in sorted(root.glob("t*")):
        t = int(task_dir.name[1:])
        pairs = []
        for label_dir, label in (("pos", 1), ("neg", 0)):
            for path in sorted((task_dir / "train" / label_dir).glob("*.json")):
                record = json.loads(path.read_text())
                scene = canonicalize(ObjectSpec.from_dict(o) for o in record["objects"])
                pairs.append((scene, label))
        data[t] = pairs
    return data


@main.command()
@click.option("--data", "data_dir", required=True, type=click.Path(), help="Dataset directory.")
def verify(data_dir):
    """Re-check every stored scene against its defining predicate."""
    try:
        report = datagen.verify(data_dir)
    except datagen.DatasetFormatError as exc:
        _fail("dataset-malformed", str(exc))
    if not report.ok:
        for violation in report.violations[:20]:
            click.echo(f"error[verify-failed]: {violation}", err=True)
        _fail("verify-failed",
              f"{len(report.violations)} violations in {report.files_checked} files")
    click.echo(f"verified {report.files_checked} scene files: all consistent")


@main.command()
@click.option("--data", "data_dir", required=True, type=click.Path(), help="Dataset directory.")
@click.option("--method", required=True, type=click.Choice(REGIMES), help="Training regime.")
@click.option("--seed", default=0, show_default=True, type=int, help="Run seed.")
@click.option("--epochs", default=50, show_default=True, type=int, help="Epochs per task.")
@click.option("--lr", default=0.001, show_default=True, type=float, help="Adam learning rate.")
@click.option("--batch", default=64, show_default=True, type=int, help="Batch size.")
@click.option("--buffer", "buffer_size", default=100, show_default=True, type=int,
              help="Replay buffer capacity.")
@click.option("--ewc-lambda", default=100.0, show_default=True, type=float,
              help="Quadratic penalty strength.")
@click.option("--der-alpha", default=0.5, show_default=True, type=float,
              help="Logit-distillation weight.")
@click.option("--fast", is_flag=True, help="10-epoch profile for quick runs.")
@click.option("--out", "out_dir", default="runs", show_default=True, type=click.Path(),
              help="Directory for run records.")
def train(data_dir, method, seed, epochs, lr, batch, buffer_size, ewc_lambda,
          der_alpha, fast, out_dir):
    """Train one regime on a dataset and record its evaluation."""
    if fast:
        epochs = 10
    config = TrainConfig(batch_size=batch, learning_rate=lr, epochs=epochs,
                         buffer_size=buffer_size, ewc_lambda=ewc_lambda,
                         der_alpha=der_alpha, seed=seed)
    try:
        dataset = experiment.load_dataset(data_dir)
    except (datagen.DatasetFormatError, FileNotFoundError) as exc:
        _fail("dataset-malformed", str(exc))
    try:
        run = experiment.run_single(dataset, method, config)
    except ValueError as exc:
        _fail("train-failed", str(exc))
    manifest = json.loads((Path(data_dir) / "manifest.json").read_text())
    record = {k: v for k, v in run.items() if k != "log"}
    record["num_tasks"] = dataset.num_tasks
    record["dataset_digest"] = manifest["tree_digest"]
    record["config"] = dict(config.__dict__)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{method}-seed{seed}.json"
    path.write_text(json.dumps(record, indent=2) + "\n")
    click.echo(f"{method} seed {seed}: unconfounded accuracy "
               f"{100 * run['unconfounded']:.1f}; run record at {path}")


@main.command()
@click.option("--runs", "runs_dir", required=True, type=click.Path(),
              help="Directory of run records written by train.")
@click.option("--format", "fmt", default="md", show_default=True,
              type=click.Choice(["md", "csv"]), help="Output format.")
@click.option("--out", "out_dir", default=".", show_default=True, type=click.Path(),
              help="Directory for the report file.")
def report(runs_dir, fmt, out_dir):
    """Aggregate run records into a results table."""
    records = []
    for path in sorted(Path(runs_dir).glob("*.json")):
        records.append(json.loads(path.read_text()))
    if not records:
        _fail("no-runs", f"no run records in {runs_dir}")
    num_tasks = records[0]["num_tasks"]
    digests = {r["dataset_digest"] for r in records}
    if len(digests) > 1:
        _fail("mixed-datasets", "run records span multiple dataset digests")
    eval_report = experiment.EvalReport(num_tasks=num_tasks)
    for r in records:
        run = dict(r)
        run["current"] = {int(k): v for k, v in run["current"].items()}
        run["old"] = {int(k): v for k, v in run["old"].items()}
        eval_report.runs.append(run)
    config_digest = hashlib.sha256(
        json.dumps(sorted(json.dumps(r["config"], sort_keys=True) for r in records)).encode()
    ).hexdigest()[:8]
    name = f"report-{next(iter(digests))[:8]}-{config_digest}.{fmt}"
    out_path = Path(out_dir) / name
    experiment.emit_report(eval_report, "markdown" if fmt == "md" else "csv", out_path)
    click.echo(f"report written to {out_path}")
    if fmt == "md":
        click.echo(out_path.read_text())


if __name__ == "__main__":
    main()
