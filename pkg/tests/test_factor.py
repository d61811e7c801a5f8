import numpy as np
import pytest
from scipy.stats import chisquare

from ravenbench.errors import InvalidAssignment, UnknownSpace
from ravenbench.factor import (
    FactorAssignment,
    SeededRng,
    assignment_index,
    assignment_indices,
    derive_seed,
    enumerate_space,
    index_assignment,
    make_space,
    sample_assignment,
    sample_assignments,
    sample_fixed_factor_batch,
    space_ids,
    validate_assignment,
)


def test_space_sizes():
    assert make_space("dsprites_reasoning").cardinalities == (3, 3, 4, 4, 5, 6)
    assert make_space("dsprites_reasoning").size == 4320
    assert make_space("shapes3d_reasoning").cardinalities == (10, 10, 10, 4, 4, 4)
    assert make_space("dsprites_full").cardinalities == (3, 6, 32, 32, 5, 6)
    assert make_space("shapes3d_full").cardinalities == (10, 10, 10, 8, 4, 16)
    assert set(space_ids()) == {"dsprites_reasoning", "dsprites_full", "shapes3d_reasoning", "shapes3d_full"}


def test_dsprites_reasoning_labels(dsprites):
    assert dsprites.factors[1].value_labels == pytest.approx((0.6, 0.8, 1.0))
    assert dsprites.factors[2].value_labels == (0.2, 0.4, 0.6, 0.8)
    assert dsprites.label("obj_color", 5) == 300.0


def test_unknown_space():
    with pytest.raises(UnknownSpace):
        make_space("mnist")


def test_validate_assignment_names_factor(dsprites):
    validate_assignment(dsprites, [2, 2, 3, 3, 4, 5])
    with pytest.raises(InvalidAssignment) as e:
        validate_assignment(dsprites, [0, 3, 0, 0, 0, 0])
    assert e.value.factor == "scale"
    with pytest.raises(InvalidAssignment):
        validate_assignment(dsprites, [0, 0, 0])


def test_flat_index_is_mixed_radix(dsprites):
    assert assignment_index(dsprites, [0, 0, 0, 0, 0, 0]) == 0
    assert assignment_index(dsprites, [0, 0, 0, 0, 0, 1]) == 1
    assert assignment_index(dsprites, [0, 0, 0, 0, 1, 0]) == 6
    assert assignment_index(dsprites, [2, 2, 3, 3, 4, 5]) == dsprites.size - 1
    assert index_assignment(dsprites, 6) == FactorAssignment((0, 0, 0, 0, 1, 0))


def test_enumerate_space_order(dsprites):
    values = enumerate_space(dsprites)
    assert values.shape == (4320, 6)
    assert np.array_equal(assignment_indices(dsprites, values), np.arange(4320))
    for i in (0, 17, 999, 4319):
        assert FactorAssignment.of(values[i]) == index_assignment(dsprites, i)


def test_rng_is_reproducible():
    a = SeededRng(7)
    b = SeededRng(7)
    assert [a.draw(100) for _ in range(20)] == [b.draw(100) for _ in range(20)]
    assert SeededRng(7).spawn(1).draw(1 << 30) == SeededRng(7).spawn(1).draw(1 << 30)
    assert derive_seed(3, 1) == derive_seed(3, 1)
    assert derive_seed(3, 1) != derive_seed(3, 2)


def test_sample_without_replacement(rng):
    chosen = rng.sample_without_replacement(range(6), 3)
    assert len(set(chosen)) == 3
    assert all(0 <= c < 6 for c in chosen)


def test_sampled_assignments_are_valid(dsprites, rng):
    validate_assignment(dsprites, sample_assignment(dsprites, rng))
    values = sample_assignments(dsprites, rng, 500)
    assert values.shape == (500, 6)
    assert (values >= 0).all() and (values < np.array(dsprites.cardinalities)).all()


@pytest.mark.parametrize("space_id", ["dsprites_reasoning", "shapes3d_reasoning"])
def test_sampled_factor_values_are_uniform(space_id):
    space = make_space(space_id)
    rng = SeededRng(7)
    values = np.array([sample_assignment(space, rng).to_list() for _ in range(10_000)])
    for k, cardinality in enumerate(space.cardinalities):
        counts = np.bincount(values[:, k], minlength=cardinality)
        assert chisquare(counts).pvalue > 1e-4, space.names[k]
    batch = sample_assignments(space, rng, 10_000)
    for k, cardinality in enumerate(space.cardinalities):
        assert chisquare(np.bincount(batch[:, k], minlength=cardinality)).pvalue > 1e-4, space.names[k]


def test_fixed_factor_batch_shares_value(dsprites, rng):
    batch = sample_fixed_factor_batch(dsprites, rng, factor=4, n=64)
    assert len(set(batch[:, 4])) == 1
    assert len(set(batch[:, 5])) > 1
