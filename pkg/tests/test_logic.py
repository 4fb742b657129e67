import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from concon import logic
from concon.logic import (
    FALSE,
    TRUE,
    And,
    ExactlyOne,
    Exists,
    Not,
    ObjectPredicate,
    Or,
    PredicateFormatError,
    confounder_structure,
    equivalent,
    eval_scene,
    format_predicate,
    implies,
    joint_bounds,
    model_count,
    obj,
    predicate_from_json,
    predicate_to_json,
    satisfies_bounds,
    satisfying_mask,
)
from concon.universe import TOTAL_SCENES, ObjectSpec, Scene, canonicalize, scene_rank, scene_unrank

BLUE = Exists(obj(color="blue"))
SPHERE = Exists(obj(shape="sphere"))
SMALL_CUBE = Exists(obj(shape="cube", size="small"))
G = And((SPHERE, SMALL_CUBE))


def _scene_of(*objs):
    return canonicalize([ObjectSpec(**o) for o in objs])


def four(**attrs):
    return _scene_of(attrs, attrs, attrs, attrs)


simple_atoms = st.sampled_from([
    obj(shape="sphere"), obj(shape="cube"), obj(shape="cylinder"),
    obj(size="small"), obj(size="large"), obj(material="metal"),
    obj(color="blue"), obj(color="red"), obj(shape="cube", size="small"),
    obj(shape="sphere", material="rubber"),
])

predicates = st.recursive(
    st.one_of(st.just(TRUE), st.just(FALSE), simple_atoms.map(Exists)),
    lambda inner: st.one_of(
        inner.map(Not),
        st.lists(inner, min_size=1, max_size=3).map(lambda ps: And(tuple(ps))),
        st.lists(inner, min_size=1, max_size=3).map(lambda ps: Or(tuple(ps))),
        st.lists(inner, min_size=1, max_size=3).map(lambda ps: ExactlyOne(tuple(ps))),
    ),
    max_leaves=6,
)

scene_indices = st.integers(0, TOTAL_SCENES - 1)


def test_object_predicate_validation():
    with pytest.raises(PredicateFormatError):
        ObjectPredicate((("shape", "pyramid"),))
    with pytest.raises(PredicateFormatError):
        ObjectPredicate((("flavor", "sweet"),))
    with pytest.raises(PredicateFormatError):
        ObjectPredicate((("shape", "cube"), ("shape", "sphere")))


def test_object_predicate_matches_and_mask_agree():
    p = obj(shape="cube", size="small")
    mask = p.type_mask()
    for t in range(96):
        assert mask[t] == p.matches(ObjectSpec.from_type_index(t))
    assert mask.sum() == 1 * 1 * 2 * 8  # one shape, one size, free material/color


def test_empty_object_predicate_is_object_true():
    assert ObjectPredicate().type_mask().all()


def test_eval_scene_basics():
    s = _scene_of(
        dict(shape="sphere", size="small", material="rubber", color="red"),
        dict(shape="cube", size="small", material="rubber", color="red"),
        dict(shape="cube", size="large", material="metal", color="gray"),
        dict(shape="cylinder", size="small", material="rubber", color="cyan"),
    )
    assert eval_scene(G, s)
    assert eval_scene(Exists(obj(material="metal")), s)
    assert not eval_scene(BLUE, s)
    assert eval_scene(Not(BLUE), s)
    assert eval_scene(ExactlyOne((BLUE, Exists(obj(material="metal")))), s)
    assert eval_scene(TRUE, s) and not eval_scene(FALSE, s)


@given(predicates, scene_indices)
@settings(max_examples=300, deadline=None)
def test_mask_agrees_with_scene_evaluation(pred, index):
    scene = scene_unrank(index)
    assert bool(satisfying_mask(pred)[index]) == eval_scene(pred, scene)


def test_model_count_oracles():
    # inclusion–exclusion over per-type exclusion counts
    assert model_count(TRUE) == TOTAL_SCENES
    assert model_count(Exists(obj(color="blue"))) == TOTAL_SCENES - math.comb(87, 4)
    expected_g = (TOTAL_SCENES - math.comb(67, 4) - math.comb(83, 4)
                  + math.comb(51, 4))
    assert model_count(G) == expected_g == 1_410_176
    assert model_count(Not(TRUE)) == 0
    assert model_count(Or((TRUE, FALSE))) == TOTAL_SCENES


@given(predicates)
@settings(max_examples=60, deadline=None)
def test_negation_counts_are_complementary(pred):
    assert model_count(pred) + model_count(Not(pred)) == TOTAL_SCENES


def test_implies_returns_lex_first_counterexample():
    ok, witness = implies(SPHERE, BLUE)
    assert not ok
    # the counterexample must be the lexicographically first sphere scene
    # without blue, and genuinely violate the implication
    assert eval_scene(SPHERE, witness) and not eval_scene(BLUE, witness)
    mask = satisfying_mask(SPHERE) & ~satisfying_mask(BLUE)
    assert scene_rank(witness) == int(np.flatnonzero(mask)[0])


def test_implies_holds():
    ok, witness = implies(And((SPHERE, BLUE)), SPHERE)
    assert ok and witness is None


def test_equivalent():
    assert equivalent(Not(Not(G)), G)
    assert equivalent(And((SPHERE, BLUE)), And((BLUE, SPHERE)))
    assert not equivalent(SPHERE, BLUE)


def test_joint_bounds_shapes():
    cs = (BLUE, Exists(obj(material="metal")))
    lower, upper = joint_bounds("strict", G, cs)
    assert lower == And((G, Or(cs)))
    assert upper == Or((G, And(cs)))
    lower, upper = joint_bounds("disjoint", G, cs)
    assert lower == And((G, ExactlyOne(cs)))
    assert upper == Or((G, Or(cs)))
    with pytest.raises(ValueError):
        joint_bounds("strict", G, ())
    with pytest.raises(ValueError):
        joint_bounds("loose", G, cs)


def test_satisfies_bounds(confounders):
    strict = joint_bounds("strict", G, confounders)
    disjoint = joint_bounds("disjoint", G, confounders)
    assert satisfies_bounds(G, strict) == (True, None)
    ok, cex = satisfies_bounds(Or(confounders), strict)
    assert not ok and cex is not None
    ok, _ = satisfies_bounds(Or(confounders), disjoint)
    assert ok


def test_confounder_structure(confounders):
    report = confounder_structure(G, confounders)
    assert not report.exhaustive
    assert report.jointly_satisfiable
    assert not report.unique_solution
    # witnesses must actually witness the reported facts
    assert not any(eval_scene(c, report.exhaustive_witness) for c in confounders)
    assert all(eval_scene(c, report.joint_witness) for c in confounders)


def test_confounder_structure_unique_case():
    # exhaustive and not jointly satisfiable -> unique solution
    cs = (Exists(obj(size="small")), Not(Exists(obj(size="small"))))
    report = confounder_structure(G, cs)
    assert report.exhaustive and not report.jointly_satisfiable
    assert report.unique_solution


def test_json_round_trip():
    pred = Or((G, Not(BLUE), ExactlyOne((SPHERE, SMALL_CUBE)), TRUE))
    doc = predicate_to_json(pred)
    assert predicate_from_json(doc) == pred


@given(predicates)
@settings(max_examples=100, deadline=None)
def test_json_round_trip_property(pred):
    assert predicate_from_json(predicate_to_json(pred)) == pred


def test_predicate_from_json_rejects_malformed():
    for doc in ({"exists": "blue"}, {"all_of": []}, {"both": []},
                {"exists": {}, "not": True}, 7):
        with pytest.raises(PredicateFormatError):
            predicate_from_json(doc)


def test_format_predicate_is_readable():
    assert format_predicate(G) == "(has(sphere) & has(cube&small))"
    assert format_predicate(Not(BLUE)) == "!has(blue)"
    assert format_predicate(TRUE) == "true"
