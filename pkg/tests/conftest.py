import numpy as np
import pytest

from concon.logic import And, Exists, obj
from concon.rules import RuleSpec

GROUND_TRUTH = And((Exists(obj(shape="sphere")), Exists(obj(shape="cube", size="small"))))
CONFOUNDERS = (
    Exists(obj(color="blue")),
    Exists(obj(material="metal")),
    Exists(obj(size="large")),
)


@pytest.fixture(scope="session")
def ground_truth():
    return GROUND_TRUTH


@pytest.fixture(scope="session")
def confounders():
    return CONFOUNDERS


@pytest.fixture(scope="session")
def strict_spec():
    return RuleSpec(GROUND_TRUTH, CONFOUNDERS, "strict", name="strict-default")


@pytest.fixture(scope="session")
def disjoint_spec():
    return RuleSpec(GROUND_TRUTH, CONFOUNDERS, "disjoint", name="disjoint-default")


@pytest.fixture(scope="session")
def mini_counts():
    return (60, 20, 20)


@pytest.fixture(scope="session")
def mini_strict_dataset(strict_spec, mini_counts, tmp_path_factory):
    """Small strict-variant dataset generated once per session."""
    from concon import datagen

    spec = RuleSpec(strict_spec.ground_truth, strict_spec.confounders,
                    "strict", mini_counts, "mini-strict")
    out = tmp_path_factory.mktemp("mini_strict")
    manifest = datagen.generate(spec, seed=11, out_dir=out, mode="uniform")
    return spec, out, manifest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
