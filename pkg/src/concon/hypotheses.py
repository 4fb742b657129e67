"""Bounded hypothesis enumeration, consistency checking, and MDL ranking.

The hypothesis language is flat: a single And/Or connective over at most
max_atoms distinct existence atoms, each optionally negated, each atom a
conjunction of at most max_literals attribute literals. The default bounds
are the smallest that express both a two-atom conjunctive ground-truth rule
and a three-way disjunction of single-literal confounders.

Description length is syntactic: one unit per attribute literal, one per
negation, and n-1 units for an n-ary connective.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from . import logic
from .logic import And, Exists, Not, Or, ObjectPredicate
from .rules import RuleSpec, compile_tasks, validate_spec
from .universe import ATTRIBUTES, tables


@dataclass(frozen=True)
class HypothesisLanguage:
    max_literals: int = 2
    max_atoms: int = 3

    def __post_init__(self):
        if self.max_literals < 1 or self.max_atoms < 1:
            raise ValueError("language bounds must be >= 1")


@dataclass(frozen=True)
class Hypothesis:
    predicate: logic.Predicate
    mdl: int


def mdl_cost(pred):
    """Literal count plus connective cost (n-ary counts n-1, Not counts 1)."""
    if isinstance(pred, Exists):
        return len(pred.pred.literals)
    if isinstance(pred, Not):
        return 1 + mdl_cost(pred.operand)
    if isinstance(pred, (And, Or)):
        return sum(mdl_cost(p) for p in pred.operands) + len(pred.operands) - 1
    raise TypeError(f"outside the hypothesis language: {pred!r}")


def enumerate_atoms(lang):
    """All object predicates with 1..max_literals literals, in a fixed
    canonical order (attribute order, then value order)."""
    atoms = []
    names = [a for a, _ in ATTRIBUTES]
    for k in range(1, lang.max_literals + 1):
        for attrs in itertools.combinations(names, k):
            domains = [dict(ATTRIBUTES)[a] for a in attrs]
            for values in itertools.product(*domains):
                atoms.append(ObjectPredicate(tuple(zip(attrs, values))))
    return atoms


def _signed_predicates(lang):
    preds = []
    for atom in enumerate_atoms(lang):
        preds.append(Exists(atom))
        preds.append(Not(Exists(atom)))
    return preds


def enumerate_hypotheses(lang):
    """Yield every hypothesis in the language exactly once, canonically
    ordered. Semantic duplicates may appear; dedup happens downstream."""
    signed = _signed_predicates(lang)
    for p in signed:
        yield Hypothesis(p, mdl_cost(p))
    for k in range(2, lang.max_atoms + 1):
        for combo in itertools.combinations(signed, k):
            for conn in (And, Or):
                p = conn(combo)
                yield Hypothesis(p, mdl_cost(p))


def consistent(hypothesis, tasks, mode="exact", data=None):
    """Does the hypothesis solve every given task perfectly?

    exact: positive_t implies r and r implies not negative_t, model-checked
    over the whole universe. empirical: r classifies every training example
    of the given tasks correctly; data is a list of (Scene, label) pairs
    per task.
    """
    r = hypothesis.predicate if isinstance(hypothesis, Hypothesis) else hypothesis
    if mode == "exact":
        for task in tasks:
            if not logic.implies(task.positive, r)[0]:
                return False
            if not logic.implies(r, Not(task.negative))[0]:
                return False
        return True
    if mode == "empirical":
        if data is None:
            raise ValueError("empirical mode requires data")
        for task in tasks:
            for scene, label in data[task.index]:
                if logic.eval_scene(r, scene) != bool(label):
                    return False
        return True
    raise ValueError(f"unknown mode: {mode!r}")


# -- packed-bitset consistency search ---------------------------------------


def _pack(mask):
    return np.packbits(np.asarray(mask, dtype=bool))


def _is_subset(a, b):
    # a, b packed; a subset of b iff a & ~b is empty.
    return not np.any(a & ~b)


def _intersects(a, b):
    return bool(np.any(a & b))


class _SearchDomain:
    """Signed-atom truth bitsets over some element domain (the scene
    universe in exact mode, the training examples in empirical mode),
    plus per-task must-be-positive / must-be-negative element sets."""

    def __init__(self, signed, atom_bits, full_bits, pos, neg):
        self.signed = signed  # list of signed predicates
        self.atom_bits = atom_bits  # packed truth per signed predicate
        self.full_bits = full_bits  # packed all-ones over the domain
        self.pos = pos  # task index -> packed
        self.neg = neg

    def consistent_set(self, task_ids, max_atoms):
        """All flat hypotheses solving every task in task_ids, as
        (predicate, model_bits) pairs.

        Complete despite the pruning: an And contains a set iff every
        conjunct does, and an Or avoids a set iff every disjunct does, so
        the per-atom filters are necessary conditions.
        """
        n = len(self.signed)
        covers = [
            all(_is_subset(self.pos[t], self.atom_bits[i]) for t in task_ids)
            for i in range(n)
        ]
        cleans = [
            all(not _intersects(self.atom_bits[i], self.neg[t]) for t in task_ids)
            for i in range(n)
        ]
        out = []
        for i in range(n):
            if covers[i] and cleans[i]:
                out.append((self.signed[i], self.atom_bits[i]))
        and_cands = [i for i in range(n) if covers[i]]
        or_cands = [i for i in range(n) if cleans[i]]
        for k in range(2, max_atoms + 1):
            for combo in itertools.combinations(and_cands, k):
                bits = self.atom_bits[combo[0]].copy()
                for i in combo[1:]:
                    bits &= self.atom_bits[i]
                if all(not _intersects(bits, self.neg[t]) for t in task_ids):
                    out.append((And(tuple(self.signed[i] for i in combo)), bits))
            for combo in itertools.combinations(or_cands, k):
                bits = self.atom_bits[combo[0]].copy()
                for i in combo[1:]:
                    bits |= self.atom_bits[i]
                if all(_is_subset(self.pos[t], bits) for t in task_ids):
                    out.append((Or(tuple(self.signed[i] for i in combo)), bits))
        return out


def _exact_domain(lang, tasks):
    t = tables()
    atoms = enumerate_atoms(lang)
    signed = []
    atom_bits = []
    full = _pack(np.ones(len(t.types), dtype=bool))
    for atom in atoms:
        mask = t.exists_mask(atom.type_mask())
        packed = _pack(mask)
        signed.append(Exists(atom))
        atom_bits.append(packed)
        signed.append(Not(Exists(atom)))
        atom_bits.append(~packed & full)
    pos = {task.index: _pack(logic.satisfying_mask(task.positive)) for task in tasks}
    neg = {task.index: _pack(logic.satisfying_mask(task.negative)) for task in tasks}
    return _SearchDomain(signed, atom_bits, full, pos, neg)


def _empirical_domain(lang, tasks, data):
    # data: task index -> list of (Scene, label)
    scenes = []
    labels = []
    owner = []
    for task in tasks:
        for scene, label in data[task.index]:
            scenes.append(scene)
            labels.append(bool(label))
            owner.append(task.index)
    n = len(scenes)
    presence = np.zeros((n, 96), dtype=bool)
    for i, scene in enumerate(scenes):
        presence[i, list(scene.types)] = True
    labels = np.array(labels)
    owner = np.array(owner)
    full = _pack(np.ones(n, dtype=bool))
    signed = []
    atom_bits = []
    for atom in enumerate_atoms(lang):
        truth = presence[:, atom.type_mask()].any(axis=1)
        packed = _pack(truth)
        signed.append(Exists(atom))
        atom_bits.append(packed)
        signed.append(Not(Exists(atom)))
        atom_bits.append(~packed & full)
    pos = {task.index: _pack(labels & (owner == task.index)) for task in tasks}
    neg = {task.index: _pack(~labels & (owner == task.index)) for task in tasks}
    return _SearchDomain(signed, atom_bits, full, pos, neg)


def _dedup_and_sort(pairs):
    """Semantic dedup by model-set hash, keeping the syntactically smallest
    (mdl, rendering) representative; sorted the same way."""
    best = {}
    for pred, bits in pairs:
        key = hashlib.sha1(bits.tobytes()).hexdigest()
        entry = (mdl_cost(pred), logic.format_predicate(pred), pred)
        if key not in best or entry[:2] < best[key][:2]:
            best[key] = entry
    ordered = sorted(best.values(), key=lambda e: e[:2])
    return [Hypothesis(pred, mdl) for mdl, _, pred in ordered]


@dataclass
class AnalysisReport:
    variant: str
    mode: str
    language: HypothesisLanguage
    per_task: dict = field(default_factory=dict)  # task -> [Hypothesis]
    joint: list = field(default_factory=list)
    minimal_joint: list = field(default_factory=list)
    ground_truth_is_minimal: bool = False
    bound_checks: dict = field(default_factory=dict)

    def to_json(self):
        def entry(h):
            return {"predicate": logic.predicate_to_json(h.predicate), "mdl": h.mdl}

        return {
            "variant": self.variant,
            "mode": self.mode,
            "language": {
                "max_literals": self.language.max_literals,
                "max_atoms": self.language.max_atoms,
            },
            "per_task": {str(t): [entry(h) for h in hs] for t, hs in self.per_task.items()},
            "joint": [entry(h) for h in self.joint],
            "minimal_joint": [entry(h) for h in self.minimal_joint],
            "ground_truth_is_minimal": self.ground_truth_is_minimal,
            "bound_checks": self.bound_checks,
        }

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_json(), f, indent=2)
            f.write("\n")


def analyze(spec: RuleSpec, lang=HypothesisLanguage(), mode="exact", data=None):
    """Consistent sets per task and jointly, MDL-minimal joint hypotheses,
    and bound checks for the ground truth and the confounder disjunction."""
    errors = [d for d in validate_spec(spec) if d.severity == "error"]
    if errors:
        raise ValueError("; ".join(d.message for d in errors))
    tasks = [t for t in compile_tasks(spec) if t.index > 0]
    if mode == "exact":
        domain = _exact_domain(lang, tasks)
    elif mode == "empirical":
        if data is None:
            raise ValueError("empirical mode requires data")
        domain = _empirical_domain(lang, tasks, data)
    else:
        raise ValueError(f"unknown mode: {mode!r}")

    report = AnalysisReport(variant=spec.variant, mode=mode, language=lang)
    for task in tasks:
        report.per_task[task.index] = _dedup_and_sort(
            domain.consistent_set([task.index], lang.max_atoms)
        )
    task_ids = [t.index for t in tasks]
    report.joint = _dedup_and_sort(domain.consistent_set(task_ids, lang.max_atoms))
    if report.joint:
        best = report.joint[0].mdl
        report.minimal_joint = [h for h in report.joint if h.mdl == best]
    g = spec.ground_truth
    report.ground_truth_is_minimal = any(
        logic.equivalent(h.predicate, g) for h in report.minimal_joint
    )
    bounds = logic.joint_bounds(spec.variant, g, spec.confounders)
    any_conf = Or(spec.confounders)
    for name, cand in (("ground_truth", g), ("any_confounder", any_conf)):
        ok, witness = logic.satisfies_bounds(cand, bounds)
        report.bound_checks[name] = {
            "predicate": logic.predicate_to_json(cand),
            "within_bounds": ok,
            "counterexample": None if witness is None else [o.to_dict() for o in witness.objects],
        }
    return report
