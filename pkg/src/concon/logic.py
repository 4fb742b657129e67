"""Predicate language over scenes plus exact model checking.

Predicates are immutable ASTs; implication, equivalence and counting are
decided by exhaustive evaluation over the full 3,764,376-scene universe
using cached boolean masks. Counterexamples and witnesses are always the
lexicographically first qualifying scene, so error messages reproduce.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .universe import (
    ATTRIBUTE_DOMAINS,
    ATTRIBUTES,
    NUM_TYPES,
    ObjectSpec,
    Scene,
    scene_unrank,
    tables,
)


class PredicateFormatError(ValueError):
    """Raised for malformed textual predicate documents."""


@dataclass(frozen=True, slots=True)
class ObjectPredicate:
    """Conjunction of attribute literals over a single object.

    At most one literal per attribute; the empty conjunction is object-true.
    """

    literals: tuple = ()

    def __post_init__(self):
        seen = set()
        for attr, value in self.literals:
            if attr not in ATTRIBUTE_DOMAINS:
                raise PredicateFormatError(f"unknown attribute: {attr!r}")
            if value not in ATTRIBUTE_DOMAINS[attr]:
                raise PredicateFormatError(f"unknown {attr} value: {value!r}")
            if attr in seen:
                raise PredicateFormatError(f"duplicate literal for attribute {attr!r}")
            seen.add(attr)
        object.__setattr__(self, "literals", tuple(sorted(self.literals)))

    def matches(self, obj: ObjectSpec):
        return all(getattr(obj, attr) == value for attr, value in self.literals)

    def type_mask(self):
        """Bool array over the 96 object types satisfying all literals."""
        mask = np.ones(NUM_TYPES, dtype=bool)
        for attr, value in self.literals:
            attr_vals = np.array(
                [getattr(ObjectSpec.from_type_index(t), attr) for t in range(NUM_TYPES)]
            )
            mask &= attr_vals == value
        return mask


def obj(**literals):
    """Shorthand: obj(shape="sphere", size="small") -> ObjectPredicate."""
    return ObjectPredicate(tuple(literals.items()))


@dataclass(frozen=True, slots=True)
class TruePred:
    pass


@dataclass(frozen=True, slots=True)
class FalsePred:
    pass


@dataclass(frozen=True, slots=True)
class Exists:
    pred: ObjectPredicate


@dataclass(frozen=True, slots=True)
class Not:
    operand: "Predicate"


@dataclass(frozen=True, slots=True)
class And:
    operands: tuple

    def __post_init__(self):
        object.__setattr__(self, "operands", tuple(self.operands))


@dataclass(frozen=True, slots=True)
class Or:
    operands: tuple

    def __post_init__(self):
        object.__setattr__(self, "operands", tuple(self.operands))


@dataclass(frozen=True, slots=True)
class ExactlyOne:
    operands: tuple

    def __post_init__(self):
        object.__setattr__(self, "operands", tuple(self.operands))


Predicate = TruePred | FalsePred | Exists | Not | And | Or | ExactlyOne

TRUE = TruePred()
FALSE = FalsePred()


def eval_scene(pred, scene: Scene):
    """Standard boolean semantics on a single scene."""
    if isinstance(pred, TruePred):
        return True
    if isinstance(pred, FalsePred):
        return False
    if isinstance(pred, Exists):
        return any(pred.pred.matches(o) for o in scene.objects)
    if isinstance(pred, Not):
        return not eval_scene(pred.operand, scene)
    if isinstance(pred, And):
        return all(eval_scene(p, scene) for p in pred.operands)
    if isinstance(pred, Or):
        return any(eval_scene(p, scene) for p in pred.operands)
    if isinstance(pred, ExactlyOne):
        return sum(eval_scene(p, scene) for p in pred.operands) == 1
    raise TypeError(f"not a predicate: {pred!r}")


# LRU-bounded: each mask is ~3.7 MB, and callers (property tests, hypothesis
# search) can touch thousands of distinct predicates.
_MASK_CACHE: "OrderedDict" = OrderedDict()
_MASK_CACHE_LIMIT = 64


def satisfying_mask(pred):
    """Bool array over all scene ranks; cached per predicate (bounded LRU)."""
    cached = _MASK_CACHE.get(pred)
    if cached is not None:
        _MASK_CACHE.move_to_end(pred)
        return cached
    mask = _compute_mask(pred)
    _MASK_CACHE[pred] = mask
    if len(_MASK_CACHE) > _MASK_CACHE_LIMIT:
        _MASK_CACHE.popitem(last=False)
    return mask


def _compute_mask(pred):
    t = tables()
    if isinstance(pred, TruePred):
        return np.ones(len(t.types), dtype=bool)
    if isinstance(pred, FalsePred):
        return np.zeros(len(t.types), dtype=bool)
    if isinstance(pred, Exists):
        return t.exists_mask(pred.pred.type_mask())
    if isinstance(pred, Not):
        return ~satisfying_mask(pred.operand)
    if isinstance(pred, And):
        out = np.ones(len(t.types), dtype=bool)
        for p in pred.operands:
            out &= satisfying_mask(p)
        return out
    if isinstance(pred, Or):
        out = np.zeros(len(t.types), dtype=bool)
        for p in pred.operands:
            out |= satisfying_mask(p)
        return out
    if isinstance(pred, ExactlyOne):
        count = np.zeros(len(t.types), dtype=np.uint8)
        for p in pred.operands:
            count += satisfying_mask(p)
        return count == 1
    raise TypeError(f"not a predicate: {pred!r}")


def model_count(pred):
    """Number of scenes in the universe satisfying pred."""
    return int(satisfying_mask(pred).sum())


def _first_scene(mask):
    idx = np.flatnonzero(mask)
    if len(idx) == 0:
        return None
    return scene_unrank(int(idx[0]))


def implies(p, q):
    """(holds, counterexample): holds iff no scene satisfies p and not q.

    On failure the counterexample is the lexicographically first violating
    scene.
    """
    violating = satisfying_mask(p) & ~satisfying_mask(q)
    witness = _first_scene(violating)
    return witness is None, witness


def equivalent(p, q):
    return bool(np.array_equal(satisfying_mask(p), satisfying_mask(q)))


def joint_bounds(variant, g, cs):
    """Exact lower/upper bound predicates on a jointly consistent solution.

    strict:   g AND any(c)        <= r <= g OR all(c)
    disjoint: g AND exactly-one(c) <= r <= g OR any(c)
    """
    cs = tuple(cs)
    if not cs:
        raise ValueError("confounder list must be non-empty")
    if variant == "strict":
        return And((g, Or(cs))), Or((g, And(cs)))
    if variant == "disjoint":
        return And((g, ExactlyOne(cs))), Or((g, Or(cs)))
    raise ValueError(f"unknown variant: {variant!r}")


def satisfies_bounds(r, bounds):
    """(holds, counterexample) for lower <= r <= upper."""
    lower, upper = bounds
    ok, witness = implies(lower, r)
    if not ok:
        return False, witness
    return implies(r, upper)


@dataclass(frozen=True, slots=True)
class StructureReport:
    exhaustive: bool
    exhaustive_witness: Scene | None  # scene satisfying no confounder
    jointly_satisfiable: bool
    joint_witness: Scene | None  # scene satisfying all confounders
    unique_solution: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "unique_solution", self.exhaustive and not self.jointly_satisfiable
        )


def confounder_structure(g, cs):
    """Check exhaustiveness (any(c) covers everything) and joint
    satisfiability (all(c) has a model) of a confounder set."""
    cs = tuple(cs)
    if not cs:
        raise ValueError("confounder list must be non-empty")
    none_mask = ~satisfying_mask(Or(cs))
    all_mask = satisfying_mask(And(cs))
    no_conf = _first_scene(none_mask)
    all_conf = _first_scene(all_mask)
    return StructureReport(
        exhaustive=no_conf is None,
        exhaustive_witness=no_conf,
        jointly_satisfiable=all_conf is not None,
        joint_witness=all_conf,
    )


def predicate_to_json(pred):
    """Textual form used in rule-spec files."""
    if isinstance(pred, TruePred):
        return True
    if isinstance(pred, FalsePred):
        return False
    if isinstance(pred, Exists):
        return {"exists": dict(pred.pred.literals)}
    if isinstance(pred, Not):
        return {"not": predicate_to_json(pred.operand)}
    if isinstance(pred, And):
        return {"all_of": [predicate_to_json(p) for p in pred.operands]}
    if isinstance(pred, Or):
        return {"any_of": [predicate_to_json(p) for p in pred.operands]}
    if isinstance(pred, ExactlyOne):
        return {"exactly_one": [predicate_to_json(p) for p in pred.operands]}
    raise TypeError(f"not a predicate: {pred!r}")


def predicate_from_json(doc):
    if doc is True:
        return TRUE
    if doc is False:
        return FALSE
    if not isinstance(doc, dict) or len(doc) != 1:
        raise PredicateFormatError(f"expected a single-key predicate object, got {doc!r}")
    key, body = next(iter(doc.items()))
    if key == "exists":
        if not isinstance(body, dict):
            raise PredicateFormatError(f"'exists' takes an attribute map, got {body!r}")
        return Exists(ObjectPredicate(tuple(body.items())))
    if key == "not":
        return Not(predicate_from_json(body))
    if key in ("all_of", "any_of", "exactly_one"):
        if not isinstance(body, list) or not body:
            raise PredicateFormatError(f"{key!r} takes a non-empty list")
        ops = tuple(predicate_from_json(p) for p in body)
        return {"all_of": And, "any_of": Or, "exactly_one": ExactlyOne}[key](ops)
    raise PredicateFormatError(f"unknown predicate form: {key!r}")


def format_predicate(pred):
    """Compact human-readable rendering, for diagnostics and reports."""
    if isinstance(pred, TruePred):
        return "true"
    if isinstance(pred, FalsePred):
        return "false"
    if isinstance(pred, Exists):
        lits = "&".join(v for _, v in pred.pred.literals) or "any"
        return f"has({lits})"
    if isinstance(pred, Not):
        return f"!{format_predicate(pred.operand)}"
    if isinstance(pred, And):
        return "(" + " & ".join(format_predicate(p) for p in pred.operands) + ")"
    if isinstance(pred, Or):
        return "(" + " | ".join(format_predicate(p) for p in pred.operands) + ")"
    if isinstance(pred, ExactlyOne):
        return "one_of(" + ", ".join(format_predicate(p) for p in pred.operands) + ")"
    raise TypeError(f"not a predicate: {pred!r}")
