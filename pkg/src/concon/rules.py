"""Rule specifications and compilation into per-task defining predicates.

strict:   positive_t = g & c_t                      negative_t = !(g | c_t)
disjoint: positive_t = g & c_t & (no other c_i)     negative_t = !(g | any c_i)

Task 0 is always the unconfounded pair (g, !g); every experiment evaluates
on it, so the compiler emits it unconditionally.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from . import logic
from .logic import And, Not, Or, Predicate

VARIANTS = ("disjoint", "strict")
DEFAULT_COUNTS = (3000, 750, 750)
SPLITS = ("train", "val", "test")


class RuleSpecError(ValueError):
    """Raised for malformed rule-spec documents."""


@dataclass(frozen=True)
class RuleSpec:
    ground_truth: Predicate
    confounders: tuple
    variant: str
    counts: tuple = DEFAULT_COUNTS
    name: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "confounders", tuple(self.confounders))
        object.__setattr__(self, "counts", tuple(self.counts))
        if self.variant not in VARIANTS:
            raise RuleSpecError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if len(self.counts) != 3 or any(not isinstance(c, int) or c < 0 for c in self.counts):
            raise RuleSpecError(f"counts must be three non-negative integers, got {self.counts!r}")

    @property
    def num_tasks(self):
        return len(self.confounders)

    def to_json(self):
        doc = {
            "ground_truth": logic.predicate_to_json(self.ground_truth),
            "confounders": [logic.predicate_to_json(c) for c in self.confounders],
            "variant": self.variant,
            "counts": dict(zip(SPLITS, self.counts)),
        }
        if self.name is not None:
            doc["name"] = self.name
        return doc

    def digest(self):
        """Content digest of the canonical serialized form."""
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def rule_spec_from_json(doc):
    """Strict-schema parse of a rule-spec document."""
    if not isinstance(doc, dict):
        raise RuleSpecError(f"rule spec must be an object, got {type(doc).__name__}")
    allowed = {"ground_truth", "confounders", "variant", "counts", "name"}
    unknown = set(doc) - allowed
    if unknown:
        raise RuleSpecError(f"unknown rule-spec keys: {sorted(unknown)}")
    for key in ("ground_truth", "confounders", "variant"):
        if key not in doc:
            raise RuleSpecError(f"missing rule-spec key: {key!r}")
    if not isinstance(doc["confounders"], list):
        raise RuleSpecError("'confounders' must be a list")
    counts = DEFAULT_COUNTS
    if "counts" in doc:
        c = doc["counts"]
        if not isinstance(c, dict) or set(c) != set(SPLITS):
            raise RuleSpecError(f"counts must map exactly {SPLITS}")
        counts = tuple(c[s] for s in SPLITS)
    try:
        ground_truth = logic.predicate_from_json(doc["ground_truth"])
        confounders = tuple(logic.predicate_from_json(p) for p in doc["confounders"])
    except logic.PredicateFormatError as e:
        raise RuleSpecError(str(e)) from e
    return RuleSpec(
        ground_truth=ground_truth,
        confounders=confounders,
        variant=doc["variant"],
        counts=counts,
        name=doc.get("name"),
    )


def load_rule_spec(path):
    with open(path, "rb") as f:
        raw = f.read()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as e:
        raise RuleSpecError(f"not valid JSON: {e}") from e
    return rule_spec_from_json(doc), hashlib.sha256(raw).hexdigest()


@dataclass(frozen=True)
class CompiledTask:
    index: int  # 0 = unconfounded
    positive: Predicate
    negative: Predicate


def compile_tasks(spec: RuleSpec):
    """Derive the defining predicates of every task, unconfounded first."""
    g = spec.ground_truth
    cs = spec.confounders
    tasks = [CompiledTask(0, g, Not(g))]
    for t, c in enumerate(cs, start=1):
        if spec.variant == "strict":
            positive = And((g, c))
            negative = Not(Or((g, c)))
        else:
            others = tuple(Not(ci) for i, ci in enumerate(cs, start=1) if i != t)
            positive = And((g, c) + others)
            negative = Not(Or((g,) + cs))
        tasks.append(CompiledTask(t, positive, negative))
    return tasks


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    code: str
    message: str


def validate_spec(spec: RuleSpec):
    """Diagnostics for an uncompilable or degenerate spec; never raises."""
    diags = []
    if spec.num_tasks < 1:
        return [Diagnostic("error", "no-confounders", "at least one confounder is required")]
    for task in compile_tasks(spec):
        for label, pred in (("positive", task.positive), ("negative", task.negative)):
            if logic.model_count(pred) == 0:
                diags.append(
                    Diagnostic(
                        "error",
                        "unsatisfiable",
                        f"task {task.index} {label} predicate has no satisfying scene: "
                        f"{logic.format_predicate(pred)}",
                    )
                )
    if spec.variant == "strict":
        report = logic.confounder_structure(spec.ground_truth, spec.confounders)
        if not report.unique_solution:
            detail = (
                f"exhaustive={report.exhaustive}, "
                f"jointly_satisfiable={report.jointly_satisfiable}"
            )
            diags.append(
                Diagnostic(
                    "warning",
                    "non-unique",
                    "strict joint constraints do not pin the solution to the "
                    f"ground truth ({detail})",
                )
            )
    return diags
