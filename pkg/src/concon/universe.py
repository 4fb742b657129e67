"""The finite scene universe: attribute domains, canonical multiset scenes,
and a bijective lexicographic ranking over all size-4 multisets of the 96
object types.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels

SHAPES = ("cube", "sphere", "cylinder")
SIZES = ("small", "large")
MATERIALS = ("metal", "rubber")
COLORS = ("gray", "red", "blue", "green", "brown", "purple", "cyan", "yellow")

# Fixed attribute enumeration order; part of the file-format contract so
# that type indices and scene ranks are stable across builds.
ATTRIBUTES = (
    ("shape", SHAPES),
    ("size", SIZES),
    ("material", MATERIALS),
    ("color", COLORS),
)
ATTRIBUTE_DOMAINS = dict(ATTRIBUTES)

NUM_TYPES = 96
SCENE_SIZE = 4
TOTAL_SCENES = math.comb(NUM_TYPES + SCENE_SIZE - 1, SCENE_SIZE)


class SceneArityError(ValueError):
    """Raised when a scene is built from anything other than 4 objects."""


@dataclass(frozen=True, slots=True)
class ObjectSpec:
    shape: str
    size: str
    material: str
    color: str

    def __post_init__(self):
        for (attr, domain) in ATTRIBUTES:
            if getattr(self, attr) not in domain:
                raise ValueError(f"unknown {attr}: {getattr(self, attr)!r}")

    @property
    def type_index(self):
        idx = 0
        for (attr, domain) in ATTRIBUTES:
            idx = idx * len(domain) + domain.index(getattr(self, attr))
        return idx

    @classmethod
    def from_type_index(cls, index):
        if not 0 <= index < NUM_TYPES:
            raise ValueError(f"type index out of range: {index}")
        values = {}
        for (attr, domain) in reversed(ATTRIBUTES):
            index, v = divmod(index, len(domain))
            values[attr] = domain[v]
        return cls(**values)

    def to_dict(self):
        return {attr: getattr(self, attr) for attr, _ in ATTRIBUTES}

    @classmethod
    def from_dict(cls, d):
        extra = set(d) - {a for a, _ in ATTRIBUTES}
        if extra:
            raise ValueError(f"unknown object fields: {sorted(extra)}")
        missing = {a for a, _ in ATTRIBUTES} - set(d)
        if missing:
            raise ValueError(f"missing object fields: {sorted(missing)}")
        return cls(**d)


@dataclass(frozen=True, slots=True)
class Scene:
    """A canonical multiset of 4 object types (non-decreasing type indices)."""

    types: tuple

    def __post_init__(self):
        if len(self.types) != SCENE_SIZE:
            raise SceneArityError(f"a scene has exactly {SCENE_SIZE} objects, got {len(self.types)}")
        if any(not 0 <= t < NUM_TYPES for t in self.types):
            raise ValueError(f"type index out of range in {self.types}")
        if any(a > b for a, b in zip(self.types, self.types[1:])):
            raise ValueError(f"scene types not canonical: {self.types}")

    @property
    def objects(self):
        return tuple(ObjectSpec.from_type_index(t) for t in self.types)


def canonicalize(objects):
    """Sort 4 objects by type index into a canonical Scene."""
    objects = list(objects)
    if len(objects) != SCENE_SIZE:
        raise SceneArityError(f"a scene has exactly {SCENE_SIZE} objects, got {len(objects)}")
    return Scene(tuple(sorted(o.type_index for o in objects)))


def _multiset_count(values, slots):
    # Multisets of size `slots` drawn from `values` distinct values.
    return math.comb(values + slots - 1, slots)


def scene_rank(scene):
    """Lexicographic rank of a canonical scene in [0, TOTAL_SCENES)."""
    rank = 0
    lo = 0
    for i, t in enumerate(scene.types):
        remaining = SCENE_SIZE - i - 1
        for w in range(lo, t):
            rank += _multiset_count(NUM_TYPES - w, remaining)
        lo = t
    return rank


def scene_unrank(index):
    """Inverse of scene_rank."""
    if not 0 <= index < TOTAL_SCENES:
        raise IndexError(f"scene index out of range: {index}")
    types = []
    lo = 0
    r = index
    for i in range(SCENE_SIZE):
        remaining = SCENE_SIZE - i - 1
        for w in range(lo, NUM_TYPES):
            c = _multiset_count(NUM_TYPES - w, remaining)
            if r < c:
                types.append(w)
                lo = w
                break
            r -= c
    return Scene(tuple(types))


def enumerate_scenes():
    """Yield every canonical scene exactly once, in rank order."""
    for types in itertools.combinations_with_replacement(range(NUM_TYPES), SCENE_SIZE):
        yield Scene(types)


class UniverseTables:
    """Dense per-scene tables for vectorized model checking.

    types: (N, 4) uint8 of object type indices per scene, in rank order.
    presence_lo/hi: per scene, a 96-bit presence bitmap over object types
    split into two uint64 words (types 0..63 and 64..95).
    """

    def __init__(self):
        self.types = _kernels.build_type_table()
        self.presence_lo, self.presence_hi = _kernels.presence_masks(self.types)

    def exists_mask(self, type_mask_bits):
        """Boolean array over all scenes: does any object's type fall in the
        given 96-bit type set (passed as a bool array of length 96)?"""
        bits = np.flatnonzero(type_mask_bits)
        mlo = np.uint64(0)
        mhi = np.uint64(0)
        for b in bits:
            if b < 64:
                mlo |= np.uint64(1) << np.uint64(b)
            else:
                mhi |= np.uint64(1) << np.uint64(b - 64)
        return ((self.presence_lo & mlo) | (self.presence_hi & mhi)) != 0

    def rank_of(self, types_batch):
        """Bulk lexicographic ranks for an (n, 4) array of canonical rows."""
        return _kernels.rank_scenes(np.asarray(types_batch, dtype=np.uint8))


_TABLES = None


def tables():
    """Lazily built process-wide universe tables."""
    global _TABLES
    if _TABLES is None:
        _TABLES = UniverseTables()
    return _TABLES
