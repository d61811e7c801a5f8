from collections import Counter

import pytest
from scipy.stats import chisquare

from ravenbench.errors import GenerationError, InvalidAssignment
from ravenbench.factor import Factor, FactorSpace, SeededRng, make_space
from ravenbench.generator import (
    RPMInstance,
    check_consistency,
    consistent_answers,
    generate_instance,
    generate_instances,
    instances_to_arrays,
    read_instances,
    sample_relation,
    write_instances,
)


def _rows(instance):
    grid = list(instance.context) + [instance.solution]
    return [grid[0:3], grid[3:6], grid[6:9]]


def test_instance_shape(dsprites):
    instance = generate_instance(dsprites, SeededRng(42))
    assert len(instance.context) == 8
    assert len(instance.answers) == 6
    assert 0 <= instance.correct_index < 6
    assert 1 <= len(instance.relation.fixed_factors) <= 3
    assert len(set(instance.relation.fixed_factors)) == len(instance.relation.fixed_factors)


@pytest.mark.parametrize("seed", range(20))
def test_relation_holds_on_every_row(dsprites, seed):
    instance = generate_instance(dsprites, SeededRng(seed))
    relation = instance.relation
    for r, row in enumerate(_rows(instance)):
        for f in relation.fixed_factors:
            assert {a[f] for a in row} == {relation.row_value(r, f)}


@pytest.mark.parametrize("seed", range(20))
def test_non_fixed_factors_vary_in_first_rows(shapes3d, seed):
    instance = generate_instance(shapes3d, SeededRng(seed))
    rows = _rows(instance)
    for f in range(shapes3d.num_factors):
        if f in instance.relation.fixed_factors:
            continue
        assert len({a[f] for a in rows[0]}) > 1 or len({a[f] for a in rows[1]}) > 1


@pytest.mark.parametrize("seed", range(20))
def test_only_the_solution_is_consistent(dsprites, seed):
    instance = generate_instance(dsprites, SeededRng(seed))
    assert len(set(instance.answers)) == 6
    assert consistent_answers(dsprites, instance) == [instance.correct_index]
    for j, answer in enumerate(instance.answers):
        if j == instance.correct_index:
            continue
        row3 = instance.relation.row_values[2]
        assert any(answer[f] != v for f, v in zip(instance.relation.fixed_factors, row3))


def test_strict_mode(shapes3d):
    for instance in generate_instances(shapes3d, count=10, seed=9, strict=True):
        assert consistent_answers(shapes3d, instance) == [instance.correct_index]


def test_check_consistency_witness(dsprites):
    instance = generate_instance(dsprites, SeededRng(8))
    consistent, witness = check_consistency(dsprites, instance.context, instance.solution)
    assert consistent
    assert set(instance.relation.fixed_factors) <= witness
    with pytest.raises(InvalidAssignment):
        check_consistency(dsprites, instance.context[:5], instance.solution)


def test_generation_is_deterministic(dsprites):
    a = generate_instances(dsprites, count=5, seed=7)
    b = generate_instances(dsprites, count=5, seed=7)
    assert a == b
    assert generate_instances(dsprites, count=3, seed=7, start=2) == a[2:5]
    assert generate_instances(dsprites, count=5, seed=8) != a


def test_too_few_factors():
    space = FactorSpace(id="tiny", factors=(Factor("a", (0.0, 1.0)), Factor("b", (0.0, 1.0))))
    with pytest.raises(GenerationError) as e:
        sample_relation(space, SeededRng(0))
    assert e.value.stage == "relation"
    assert e.value.seed == 0


def test_arrays(dsprites):
    instances = generate_instances(dsprites, count=4, seed=1)
    context, answers, labels = instances_to_arrays(instances)
    assert context.shape == (4, 8, 6)
    assert answers.shape == (4, 6, 6)
    assert list(labels) == [i.correct_index for i in instances]


def test_instance_file(dsprites, tmp_path):
    path = str(tmp_path / "instances.jsonl")
    instances = generate_instances(dsprites, count=6, seed=3)
    assert write_instances(path, instances) == 6
    assert read_instances(path) == instances


def test_from_dict_rejects_bad_index(dsprites):
    data = generate_instance(dsprites, SeededRng(2)).to_dict()
    data["correct_index"] = 6
    with pytest.raises(InvalidAssignment):
        RPMInstance.from_dict(data)
    data = generate_instance(dsprites, SeededRng(2)).to_dict()
    data["context"][0][5] = 9
    with pytest.raises(InvalidAssignment):
        RPMInstance.from_dict(data)


@pytest.mark.slow
def test_relation_size_and_answer_position_are_uniform(dsprites):
    instances = generate_instances(dsprites, count=3000, seed=11)
    sizes = Counter(len(i.relation.fixed_factors) for i in instances)
    positions = Counter(i.correct_index for i in instances)
    assert chisquare([sizes[k] for k in (1, 2, 3)]).pvalue > 0.001
    assert chisquare([positions[k] for k in range(6)]).pvalue > 0.001


@pytest.mark.slow
@pytest.mark.parametrize("space_id", ["dsprites_reasoning", "shapes3d_reasoning"])
def test_strict_instances_have_one_consistent_answer(space_id):
    space = make_space(space_id)
    for instance in generate_instances(space, count=10_000, seed=13, strict=True):
        assert consistent_answers(space, instance) == [instance.correct_index]
