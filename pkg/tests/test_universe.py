import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from concon import _kernels
from concon.universe import (
    ATTRIBUTES,
    NUM_TYPES,
    SCENE_SIZE,
    TOTAL_SCENES,
    ObjectSpec,
    Scene,
    SceneArityError,
    canonicalize,
    enumerate_scenes,
    scene_rank,
    scene_unrank,
    tables,
)

scene_types = st.lists(
    st.integers(0, NUM_TYPES - 1), min_size=SCENE_SIZE, max_size=SCENE_SIZE
).map(lambda ts: tuple(sorted(ts)))


def test_universe_constants():
    assert NUM_TYPES == 3 * 2 * 2 * 8 == 96
    assert TOTAL_SCENES == math.comb(NUM_TYPES + SCENE_SIZE - 1, SCENE_SIZE) == 3_764_376


def test_type_index_is_a_bijection():
    seen = set()
    for shape, size, material, color in itertools.product(
        *(domain for _, domain in ATTRIBUTES)
    ):
        o = ObjectSpec(shape=shape, size=size, material=material, color=color)
        assert ObjectSpec.from_type_index(o.type_index) == o
        seen.add(o.type_index)
    assert seen == set(range(NUM_TYPES))


def test_type_index_matches_mixed_radix_order():
    o = ObjectSpec(shape="cube", size="small", material="metal", color="gray")
    assert o.type_index == 0
    o = ObjectSpec(shape="cylinder", size="large", material="rubber", color="yellow")
    assert o.type_index == NUM_TYPES - 1
    # color is the fastest-varying attribute
    a = ObjectSpec(shape="cube", size="small", material="metal", color="red")
    assert a.type_index == 1


def test_object_spec_rejects_unknown_values():
    with pytest.raises(ValueError):
        ObjectSpec(shape="cone", size="small", material="metal", color="gray")


def test_object_dict_round_trip_and_strictness():
    o = ObjectSpec(shape="sphere", size="large", material="rubber", color="cyan")
    assert ObjectSpec.from_dict(o.to_dict()) == o
    with pytest.raises(ValueError, match="unknown object fields"):
        ObjectSpec.from_dict({**o.to_dict(), "texture": "matte"})
    with pytest.raises(ValueError, match="missing object fields"):
        ObjectSpec.from_dict({"shape": "sphere"})


def test_scene_requires_four_canonical_types():
    with pytest.raises(SceneArityError):
        Scene((1, 2, 3))
    with pytest.raises(ValueError, match="not canonical"):
        Scene((3, 2, 1, 0))
    with pytest.raises(ValueError, match="out of range"):
        Scene((0, 0, 0, 96))


def test_canonicalize_sorts_and_checks_arity():
    objs = [ObjectSpec.from_type_index(t) for t in (5, 0, 95, 5)]
    assert canonicalize(objs).types == (0, 5, 5, 95)
    with pytest.raises(SceneArityError):
        canonicalize(objs[:3])


def test_rank_of_extremes():
    assert scene_rank(Scene((0, 0, 0, 0))) == 0
    assert scene_rank(Scene((95, 95, 95, 95))) == TOTAL_SCENES - 1


@given(scene_types)
@settings(max_examples=200, deadline=None)
def test_rank_unrank_round_trip(types):
    scene = Scene(types)
    assert scene_unrank(scene_rank(scene)) == scene


@given(st.integers(0, TOTAL_SCENES - 1))
@settings(max_examples=200, deadline=None)
def test_unrank_rank_round_trip(index):
    assert scene_rank(scene_unrank(index)) == index


def test_unrank_rejects_out_of_range():
    with pytest.raises(IndexError):
        scene_unrank(TOTAL_SCENES)
    with pytest.raises(IndexError):
        scene_unrank(-1)


def test_enumeration_is_rank_ordered_prefix():
    for i, scene in enumerate(itertools.islice(enumerate_scenes(), 500)):
        assert scene_rank(scene) == i


def test_tables_match_enumeration_prefix():
    t = tables()
    assert t.types.shape == (TOTAL_SCENES, SCENE_SIZE)
    head = np.array([s.types for s in itertools.islice(enumerate_scenes(), 300)])
    assert np.array_equal(t.types[:300], head)


def test_tables_presence_bits_are_correct():
    t = tables()
    rng = np.random.default_rng(0)
    for idx in rng.integers(0, TOTAL_SCENES, size=50):
        row = t.types[idx]
        lo, hi = int(t.presence_lo[idx]), int(t.presence_hi[idx])
        present = {b for b in range(64) if lo >> b & 1}
        present |= {64 + b for b in range(32) if hi >> b & 1}
        assert present == set(int(v) for v in row)


def test_bulk_rank_matches_scalar_rank(rng):
    batch = np.sort(rng.integers(0, NUM_TYPES, size=(200, 4)), axis=1)
    bulk = tables().rank_of(batch)
    scalar = [scene_rank(Scene(tuple(int(v) for v in row))) for row in batch]
    assert bulk.tolist() == scalar


def test_kernel_fallbacks_agree_with_selected_path(rng):
    batch = np.sort(rng.integers(0, NUM_TYPES, size=(500, 4)), axis=1).astype(np.uint8)
    np_lo, np_hi = _kernels.numpy_impls["presence_masks"](batch)
    lo, hi = _kernels.presence_masks(batch)
    assert np.array_equal(np_lo, lo) and np.array_equal(np_hi, hi)
    assert np.array_equal(
        _kernels.numpy_impls["rank_scenes"](batch), _kernels.rank_scenes(batch)
    )
    table = tables().types
    assert np.array_equal(_kernels.numpy_impls["build_type_table"]()[:1000], table[:1000])
