import json

import numpy as np
import pytest

from ravenbench.errors import ExternalLookupError, ParseError, SourceError
from ravenbench.factor import SeededRng, enumerate_space
from ravenbench.sources.mixed import mixing_violation
from ravenbench.sources import (
    ExternalSource,
    GroundTruthInteger,
    GroundTruthOneHot,
    LinearMixed,
    PermutedScaled,
    all_sources,
    code_factor_correlations,
    load_external,
    make_entanglement_ladder,
    save_external,
    source_from_spec,
    table_from_source,
)


def _max_abs_correlation(source):
    values = enumerate_space(source.space)
    codes = source.encode_batch(values)
    corr = np.corrcoef(np.hstack([codes, values]), rowvar=False)
    d = source.code_dim
    return np.max(np.abs(corr[:d, d:]))


def test_registry():
    assert set(all_sources()) == {"gt_integer", "gt_onehot", "permuted_scaled", "linear_mixed", "external"}


def test_gt_integer(dsprites):
    source = GroundTruthInteger(dsprites)
    assert source.code_dim == 6
    assert np.array_equal(source.encode([0, 0, 0, 0, 0, 0]), np.zeros(6))
    assert np.array_equal(source.encode([2, 2, 3, 3, 4, 5]), np.ones(6))
    assert source.encode([1, 1, 0, 0, 0, 0])[0] == pytest.approx(0.5)


def test_gt_onehot(dsprites):
    source = GroundTruthOneHot(dsprites)
    assert source.code_dim == 25
    codes = source.encode_batch(enumerate_space(dsprites)[::97])
    assert np.array_equal(codes.sum(axis=1), np.full(len(codes), 6.0))
    assert np.array_equal(source.encode([0, 0, 0, 0, 0, 0])[[0, 3, 6, 10, 14, 19]], np.ones(6))


def test_permuted_scaled_is_injective(dsprites):
    source = PermutedScaled(dsprites, seed=4)
    assert sorted(source.permutation) == list(range(6))
    assert np.all((np.abs(source.scales) >= 0.5) & (np.abs(source.scales) <= 2.0))
    codes = source.encode_batch(enumerate_space(dsprites))
    assert len(np.unique(codes, axis=0)) == dsprites.size
    assert source.model_id == "permuted_scaled-s4"


def test_linear_mixed_endpoints(dsprites):
    values = enumerate_space(dsprites)
    unmixed = LinearMixed(dsprites, alpha=0.0, seed=3)
    assert np.allclose(unmixed.encode_batch(values), GroundTruthInteger(dsprites).encode_batch(values))
    assert unmixed.condition_number() == pytest.approx(1.0)
    mixed = LinearMixed(dsprites, alpha=1.0, seed=3)
    assert _max_abs_correlation(mixed) <= 0.9 + 1e-9
    assert mixed.model_id == "linear_mixed-a1-s3"


def test_analytic_correlations_match_empirical(dsprites):
    source = LinearMixed(dsprites, alpha=0.5, seed=1)
    values = enumerate_space(dsprites)
    codes = source.encode_batch(values)
    corr = np.corrcoef(np.hstack([codes, values]), rowvar=False)[:6, 6:]
    assert np.allclose(np.abs(corr), np.abs(code_factor_correlations(dsprites, source.matrix)), atol=1e-9)


def test_alpha_out_of_range(dsprites):
    with pytest.raises(SourceError):
        LinearMixed(dsprites, alpha=1.5)


def test_entanglement_ladder(dsprites):
    ladder = make_entanglement_ladder(dsprites, levels=5, mix_seed=2)
    assert [s.alpha for s in ladder] == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert all(np.array_equal(s.rotation, ladder[0].rotation) for s in ladder)
    for s in ladder[:-1]:
        assert np.isfinite(s.condition_number())
        assert np.linalg.matrix_rank(s.matrix) == 6
    with pytest.raises(SourceError):
        make_entanglement_ladder(dsprites, levels=1)
    assert [s.alpha for s in make_entanglement_ladder(dsprites, levels=2, mix_seed=2)] == [0.0, 1.0]


def test_ladder_mixes_more_at_every_level(dsprites):
    for mix_seed in (0, 1, 2):
        ladder = make_entanglement_ladder(dsprites, levels=5, mix_seed=mix_seed)
        assert np.all(np.diag(ladder[0].rotation) >= 0.0)
        own = np.array([np.diag(np.abs(code_factor_correlations(dsprites, s.matrix))) for s in ladder])
        assert np.all(np.diff(own, axis=0) < 0.0)
        off = np.array([np.abs(code_factor_correlations(dsprites, s.matrix))[~np.eye(6, dtype=bool)] for s in ladder])
        assert np.all(np.diff(off, axis=0) >= -1e-12)
    assert mixing_violation(dsprites, make_entanglement_ladder(dsprites, levels=5, mix_seed=0)[0].rotation) == 0.0


def test_source_from_spec(dsprites):
    source = source_from_spec("linear_mixed:alpha=0.5,seed=3", dsprites)
    assert isinstance(source, LinearMixed)
    assert source.alpha == 0.5 and source.mix_seed == 3
    assert isinstance(source_from_spec("gt_onehot", dsprites), GroundTruthOneHot)
    assert source_from_spec("permuted_scaled:seed=9", dsprites).seed == 9
    with pytest.raises(SourceError):
        source_from_spec("vae", dsprites)
    with pytest.raises(SourceError):
        source_from_spec("gt_integer:depth=3", dsprites)
    with pytest.raises(SourceError):
        source_from_spec("linear_mixed:alpha=high", dsprites)


# ###############################
# External tables
#
def _write(path, text):
    path.write_text(text)
    return str(path)


def test_external_file(dsprites, tmp_path):
    path = str(tmp_path / "vae.csv")
    save_external(table_from_source(LinearMixed(dsprites, alpha=0.5, seed=1, dim=10)), path)
    with open(path + ".manifest.json") as fp:
        assert json.load(fp) == {"code_dim": 10, "coverage": "full", "space": "dsprites_reasoning"}
    source = source_from_spec(path, dsprites)
    assert isinstance(source, ExternalSource)
    assert source.code_dim == 10
    assert source.model_id == "vae"
    assert source.covers_space()
    first = (tmp_path / "vae.csv").read_text()
    save_external(load_external(path), str(tmp_path / "copy.csv"))
    assert (tmp_path / "copy.csv").read_text() == first


def test_external_codes_match_source(dsprites, tmp_path):
    original = PermutedScaled(dsprites, seed=1)
    path = str(tmp_path / "codes.csv")
    save_external(table_from_source(original), path)
    source = ExternalSource.from_file(path)
    values = enumerate_space(dsprites)[::13]
    assert np.array_equal(source.encode_batch(values), original.encode_batch(values))


def test_empty_file(dsprites, tmp_path):
    path = _write(tmp_path / "empty.csv", "")
    with pytest.raises(ParseError) as e:
        load_external(path, space=dsprites)
    assert e.value.line == 1


def test_bad_header(dsprites, tmp_path):
    path = _write(tmp_path / "bad.csv", "f0,f1,f2,f3,f4,z0\n0,0,0,0,0,1.0\n")
    with pytest.raises(ParseError) as e:
        load_external(path, space=dsprites)
    assert e.value.line == 1


def test_ragged_row(dsprites, tmp_path):
    header = "f0,f1,f2,f3,f4,f5,z0,z1\n"
    path = _write(tmp_path / "ragged.csv", header + "0,0,0,0,0,0,0.1,0.2\n0,0,0,0,0,1,0.3\n")
    with pytest.raises(ParseError) as e:
        load_external(path, space=dsprites)
    assert e.value.line == 3


def test_value_out_of_range(dsprites, tmp_path):
    path = _write(tmp_path / "range.csv", "f0,f1,f2,f3,f4,f5,z0\n3,0,0,0,0,0,0.5\n")
    with pytest.raises(ParseError) as e:
        load_external(path, space=dsprites)
    assert e.value.line == 2


def test_missing_code(dsprites, tmp_path):
    path = _write(tmp_path / "partial.csv", "f0,f1,f2,f3,f4,f5,z0\n0,0,0,0,0,0,0.5\n0,0,0,0,0,1,0.25\n")
    source = ExternalSource.from_file(path, space=dsprites)
    assert not source.covers_space()
    assert source.encode([0, 0, 0, 0, 0, 1])[0] == 0.25
    with pytest.raises(ExternalLookupError) as e:
        source.encode([0, 0, 0, 0, 1, 0])
    assert e.value.index == 6


def test_sampled_coverage_draws_table_rows(dsprites, tmp_path):
    values = enumerate_space(dsprites)[::7]
    path = str(tmp_path / "sampled.csv")
    save_external(table_from_source(GroundTruthInteger(dsprites), values), path)
    source = ExternalSource.from_file(path)
    assert source.table.coverage == "sampled"
    rng = SeededRng(0)
    source.encode_batch(source.sample_values(rng, 200))
    batch = source.sample_fixed_values(rng, factor=2, n=50)
    assert len(set(batch[:, 2])) == 1
    source.encode_batch(batch)
