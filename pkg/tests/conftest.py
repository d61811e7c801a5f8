import numpy as np
import pytest

from ravenbench.factor import SeededRng, make_space
from ravenbench.sources import RepresentationSource, GroundTruthInteger
from ravenbench.wren import WReNConfig


class ConstantSource(RepresentationSource):
    """Every assignment maps to the zero vector"""

    def __init__(self, space, code_dim: int = 6):
        RepresentationSource.__init__(self, space=space)
        self._code_dim = code_dim

    @property
    def code_dim(self) -> int:
        return self._code_dim

    @property
    def model_id(self) -> str:
        return "constant"

    def encode_batch(self, values):
        return np.zeros((np.asarray(values).shape[0], self._code_dim))


class DuplicatedSource(GroundTruthInteger):
    """gt_integer with the first dimension repeated as an extra last dimension"""

    SOURCE_NAME = "none"

    @property
    def code_dim(self) -> int:
        return self.space.num_factors + 1

    @property
    def model_id(self) -> str:
        return "duplicated"

    def encode_batch(self, values):
        codes = GroundTruthInteger.encode_batch(self, values)
        return np.hstack([codes, codes[:, :1]])


@pytest.fixture
def dsprites():
    return make_space("dsprites_reasoning")


@pytest.fixture
def shapes3d():
    return make_space("shapes3d_reasoning")


@pytest.fixture
def rng():
    return SeededRng(1234)


@pytest.fixture
def constant_source(dsprites):
    return ConstantSource(dsprites)


@pytest.fixture
def duplicated_source(dsprites):
    return DuplicatedSource(dsprites)


@pytest.fixture
def tiny_config():
    return WReNConfig(lr=0.001, edge_units=8, edge_layers=2, graph_units=6, graph_layers=1, dropout=0.0, seed=11)
