"""Deterministic dataset generation and on-disk verification.

Layout: out/manifest.json plus out/t{K}/{train|val|test}/{pos|neg}/{index:06}.json
with one scene record per file. Task 0 is the unconfounded set.

Per-subset RNG streams are child seeds of the master seed keyed by
(task, split, label), so regenerating one subset never perturbs others.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, logic
from .logic import And, Exists, Not, eval_scene, satisfying_mask
from .rules import SPLITS, RuleSpec, compile_tasks, validate_spec
from .universe import Scene, scene_unrank

LABEL_DIRS = {1: "pos", 0: "neg"}

MAX_SLOT_REJECTIONS = 10**6


class GenerationError(RuntimeError):
    pass


class DatasetFormatError(ValueError):
    pass


_INDEX_CACHE: dict = {}


def satisfying_indices(pred):
    """Sorted ranks of all scenes satisfying pred; cached per predicate."""
    cached = _INDEX_CACHE.get(pred)
    if cached is None:
        cached = np.flatnonzero(satisfying_mask(pred))
        _INDEX_CACHE[pred] = cached
    return cached


def _flatten_conjunction(pred):
    if isinstance(pred, And):
        out = []
        for p in pred.operands:
            out.extend(_flatten_conjunction(p))
        return out
    return [pred]


def _sample_slot(pred, rng):
    """One scene via the slot strategy: pin a witness object per positive
    existence atom (reusing a compatible pinned object when slots run out),
    fill the rest uniformly at random, then accept/reject on the full
    predicate."""
    required = [p.pred for p in _flatten_conjunction(pred) if isinstance(p, Exists)]
    for _ in range(MAX_SLOT_REJECTIONS):
        slots = [dict() for _ in range(4)]
        used = 0
        ok = True
        for atom in required:
            lits = dict(atom.literals)
            if used < 4:
                slots[used].update(lits)
                used += 1
                continue
            # All slots pinned: reuse any slot with no conflicting literal.
            for slot in slots:
                if all(slot.get(a, v) == v for a, v in lits.items()):
                    slot.update(lits)
                    break
            else:
                ok = False
                break
        if not ok:
            raise GenerationError("required existence atoms cannot share 4 objects")
        from .universe import ATTRIBUTES, ObjectSpec, canonicalize

        objects = []
        for slot in slots:
            values = {}
            for attr, domain in ATTRIBUTES:
                values[attr] = slot.get(attr) or domain[rng.integers(len(domain))]
            objects.append(ObjectSpec(**values))
        scene = canonicalize(objects)
        if eval_scene(pred, scene):
            return scene
    raise GenerationError(f"slot sampling stalled after {MAX_SLOT_REJECTIONS} rejections")


def sample_scenes(pred, n, rng, mode="uniform", dedup_seen=None):
    """n scenes satisfying pred.

    uniform: i.i.d. uniform over the exact satisfying set (with replacement
    unless dedup_seen is given). slot: emulates a constructive generator by
    pinning witness objects, which biases attribute marginals.
    """
    if mode not in ("uniform", "slot"):
        raise ValueError(f"unknown sampling mode: {mode!r}")
    if n == 0:
        return []
    scenes = []
    if mode == "uniform":
        indices = satisfying_indices(pred)
        if len(indices) == 0:
            raise GenerationError(f"unsatisfiable predicate: {logic.format_predicate(pred)}")
        while len(scenes) < n:
            draw = indices[rng.integers(len(indices), size=n - len(scenes))]
            for idx in draw:
                scene = scene_unrank(int(idx))
                if dedup_seen is not None:
                    if scene.types in dedup_seen:
                        continue
                    dedup_seen.add(scene.types)
                scenes.append(scene)
    else:
        if logic.model_count(pred) == 0:
            raise GenerationError(f"unsatisfiable predicate: {logic.format_predicate(pred)}")
        rejected = 0
        while len(scenes) < n:
            scene = _sample_slot(pred, rng)
            if dedup_seen is not None:
                if scene.types in dedup_seen:
                    rejected += 1
                    if rejected > MAX_SLOT_REJECTIONS:
                        raise GenerationError("deduplication stalled slot sampling")
                    continue
                dedup_seen.add(scene.types)
            scenes.append(scene)
    return scenes


def _scene_record(scene, label, task, split, confounders):
    return {
        "objects": [o.to_dict() for o in scene.objects],
        "label": label,
        "task": task,
        "split": split,
        "confounders_present": [eval_scene(c, scene) for c in confounders],
    }


def _subset_rng(seed, task, split_idx, label):
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(task, split_idx, label))
    )


def generate(spec: RuleSpec, seed, out_dir, mode="uniform", render=False,
             dedup=False, spec_digest=None):
    """Write the full dataset tree and manifest; returns the manifest dict.

    Identical (spec, seed, mode, tool version) produce byte-identical trees.
    """
    diags = [d for d in validate_spec(spec) if d.severity == "error"]
    if diags:
        raise GenerationError("; ".join(d.message for d in diags))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = compile_tasks(spec)
    counts_table = {}
    file_digests = []
    dedup_seen = set() if dedup else None
    if render:
        from .render import render_png

    for task in tasks:
        for split_idx, split in enumerate(SPLITS):
            n = spec.counts[split_idx]
            for label, pred in ((1, task.positive), (0, task.negative)):
                rng = _subset_rng(seed, task.index, split_idx, label)
                scenes = sample_scenes(pred, n, rng, mode=mode, dedup_seen=dedup_seen)
                subset_dir = out / f"t{task.index}" / split / LABEL_DIRS[label]
                subset_dir.mkdir(parents=True, exist_ok=True)
                for i, scene in enumerate(scenes):
                    record = _scene_record(scene, label, task.index, split, spec.confounders)
                    blob = json.dumps(record, separators=(",", ":")).encode()
                    rel = f"t{task.index}/{split}/{LABEL_DIRS[label]}/{i:06}.json"
                    (out / rel).write_bytes(blob)
                    file_digests.append((rel, hashlib.sha256(blob).hexdigest()))
                    if render:
                        png = render_png(scene, np.random.default_rng(
                            np.random.SeedSequence(seed, spawn_key=(task.index, split_idx, label, i))))
                        (subset_dir / f"{i:06}.png").write_bytes(png)
                counts_table[f"t{task.index}/{split}/{LABEL_DIRS[label]}"] = n

    tree = hashlib.sha256()
    for rel, digest in sorted(file_digests):
        tree.update(f"{rel} {digest}\n".encode())
    manifest = {
        "spec_digest": spec_digest or spec.digest(),
        "rule_spec": spec.to_json(),
        "seed": seed,
        "mode": mode,
        "dedup": dedup,
        "counts": counts_table,
        "files": len(file_digests),
        "tree_digest": tree.hexdigest(),
        "tool_version": __version__,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


@dataclass
class VerifyReport:
    violations: list = field(default_factory=list)
    files_checked: int = 0

    @property
    def ok(self):
        return not self.violations


def _load_record(path):
    try:
        record = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise DatasetFormatError(f"{path}: not valid JSON: {e}") from e
    for key in ("objects", "label", "task", "split", "confounders_present"):
        if key not in record:
            raise DatasetFormatError(f"{path}: missing field {key!r}")
    return record


def load_labeled_scene(path):
    """Parse one scene file into (Scene, record)."""
    from .universe import ObjectSpec, canonicalize

    record = _load_record(Path(path))
    try:
        objects = [ObjectSpec.from_dict(o) for o in record["objects"]]
        scene = canonicalize(objects)
    except ValueError as e:
        raise DatasetFormatError(f"{path}: {e}") from e
    return scene, record


def verify(dataset_dir):
    """Re-evaluate every scene on disk against its defining predicate and
    its confounder flags. Returns a report listing violating file paths."""
    root = Path(dataset_dir)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise DatasetFormatError(f"{manifest_path}: missing manifest")
    manifest = json.loads(manifest_path.read_text())
    from .rules import rule_spec_from_json

    spec = rule_spec_from_json(manifest["rule_spec"])
    tasks = {t.index: t for t in compile_tasks(spec)}
    report = VerifyReport()
    for path in sorted(root.glob("t*/*/*/*.json")):
        scene, record = load_labeled_scene(path)
        task = tasks.get(record["task"])
        if task is None:
            report.violations.append(f"{path}: unknown task {record['task']}")
            continue
        pred = task.positive if record["label"] == 1 else task.negative
        if not eval_scene(pred, scene):
            report.violations.append(f"{path}: scene violates its defining predicate")
        flags = [eval_scene(c, scene) for c in spec.confounders]
        if flags != record["confounders_present"]:
            report.violations.append(f"{path}: confounders_present flags are wrong")
        report.files_checked += 1
    return report
