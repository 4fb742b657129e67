import json

import pytest

from concon import logic
from concon.logic import And, Exists, Not, Or, obj
from concon.rules import (
    DEFAULT_COUNTS,
    RuleSpec,
    RuleSpecError,
    compile_tasks,
    load_rule_spec,
    rule_spec_from_json,
    validate_spec,
)


def test_rule_spec_defaults_and_validation(ground_truth, confounders):
    spec = RuleSpec(ground_truth, confounders, "strict")
    assert spec.counts == DEFAULT_COUNTS == (3000, 750, 750)
    assert spec.num_tasks == 3
    with pytest.raises(RuleSpecError):
        RuleSpec(ground_truth, confounders, "loose")
    with pytest.raises(RuleSpecError):
        RuleSpec(ground_truth, confounders, "strict", counts=(10, 10))
    with pytest.raises(RuleSpecError):
        RuleSpec(ground_truth, confounders, "strict", counts=(10, -1, 10))


def test_json_round_trip(strict_spec):
    doc = strict_spec.to_json()
    again = rule_spec_from_json(doc)
    assert again == strict_spec
    assert again.digest() == strict_spec.digest()


def test_schema_is_strict(strict_spec):
    doc = strict_spec.to_json()
    doc["extra"] = 1
    with pytest.raises(RuleSpecError, match="unknown rule-spec keys"):
        rule_spec_from_json(doc)
    with pytest.raises(RuleSpecError, match="missing rule-spec key"):
        rule_spec_from_json({"variant": "strict", "confounders": []})
    bad = strict_spec.to_json()
    bad["counts"] = {"train": 10}
    with pytest.raises(RuleSpecError, match="counts"):
        rule_spec_from_json(bad)
    with pytest.raises(RuleSpecError):
        rule_spec_from_json([1, 2])


def test_load_rule_spec_file(tmp_path, strict_spec):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(strict_spec.to_json()))
    loaded, digest = load_rule_spec(path)
    assert loaded == strict_spec
    assert len(digest) == 64
    path.write_text("{nope")
    with pytest.raises(RuleSpecError, match="not valid JSON"):
        load_rule_spec(path)


def test_bundled_spec_files_parse():
    for name in ("specs/concon_default.json", "specs/concon_disjoint.json"):
        spec, _ = load_rule_spec(name)
        assert spec.num_tasks == 3
        assert spec.counts == (3000, 750, 750)


def test_compile_strict(strict_spec):
    tasks = compile_tasks(strict_spec)
    assert [t.index for t in tasks] == [0, 1, 2, 3]
    g, cs = strict_spec.ground_truth, strict_spec.confounders
    assert tasks[0].positive == g and tasks[0].negative == Not(g)
    for t, c in zip(tasks[1:], cs):
        assert t.positive == And((g, c))
        assert t.negative == Not(Or((g, c)))


def test_compile_disjoint(disjoint_spec):
    tasks = compile_tasks(disjoint_spec)
    g, cs = disjoint_spec.ground_truth, disjoint_spec.confounders
    # positives exclude all other confounders; negatives exclude every one
    assert tasks[1].positive == And((g, cs[0], Not(cs[1]), Not(cs[2])))
    for t in tasks[1:]:
        assert t.negative == Not(Or((g,) + cs))


def test_compiled_predicates_are_disjoint_per_task(strict_spec, disjoint_spec):
    for spec in (strict_spec, disjoint_spec):
        for task in compile_tasks(spec):
            assert logic.model_count(And((task.positive, task.negative))) == 0


def test_disjoint_positives_are_pairwise_disjoint(disjoint_spec):
    tasks = compile_tasks(disjoint_spec)[1:]
    for a in tasks:
        for b in tasks:
            if a.index != b.index:
                assert logic.model_count(And((a.positive, b.positive))) == 0


def test_validate_spec_flags_problems(ground_truth, confounders):
    diags = validate_spec(RuleSpec(ground_truth, (), "strict"))
    assert any(d.code == "no-confounders" and d.severity == "error" for d in diags)

    # a confounder contradicting g makes the task positive unsatisfiable
    bad = RuleSpec(ground_truth, (Not(Exists(obj(shape="sphere"))),), "strict")
    diags = validate_spec(bad)
    assert any(d.code == "unsatisfiable" for d in diags)

    # paper-style strict rules: compilable but not uniquely solvable
    diags = validate_spec(RuleSpec(ground_truth, confounders, "strict"))
    assert all(d.severity == "warning" for d in diags)
    assert any(d.code == "non-unique" for d in diags)
