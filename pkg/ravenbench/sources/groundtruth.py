# Ground-truth encodings of factor assignments
#
import logging

import numpy as np

from ravenbench.constant import SOURCE_KIND
from ravenbench.factor import FactorSpace, SeededRng
from .source import RepresentationSource

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)


def integer_codes(space: FactorSpace, values: np.ndarray) -> np.ndarray:
    """Factor indices rescaled to [0, 1] per factor"""
    return np.asarray(values, dtype=np.float64) / (np.asarray(space.cardinalities, dtype=np.float64) - 1.0)


class GroundTruthInteger(RepresentationSource):

    SOURCE_NAME = SOURCE_KIND.GT_INTEGER.value

    @property
    def code_dim(self) -> int:
        return self.space.num_factors

    def encode_batch(self, values: np.ndarray) -> np.ndarray:
        return integer_codes(self.space, values)


class GroundTruthOneHot(RepresentationSource):

    SOURCE_NAME = SOURCE_KIND.GT_ONEHOT.value

    @property
    def code_dim(self) -> int:
        return int(sum(self.space.cardinalities))

    def encode_batch(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.int64)
        codes = np.zeros((values.shape[0], self.code_dim), dtype=np.float64)
        offsets = np.concatenate([[0], np.cumsum(self.space.cardinalities)[:-1]])
        rows = np.arange(values.shape[0])
        for k, offset in enumerate(offsets):
            codes[rows, offset + values[:, k]] = 1.0
        return codes


class PermutedScaled(RepresentationSource):
    """Integer codes with dimensions shuffled and each rescaled by a fixed nonzero factor"""

    SOURCE_NAME = SOURCE_KIND.PERMUTED_SCALED.value

    PARAMETERS = {"seed": 0}

    def __init__(self, space: FactorSpace, seed: int = 0):
        RepresentationSource.__init__(self, space=space)
        self.seed = int(seed)
        rng = SeededRng(self.seed)
        self.permutation = rng.generator.permutation(space.num_factors)
        magnitudes = rng.generator.uniform(0.5, 2.0, size=space.num_factors)
        signs = np.where(rng.generator.random(space.num_factors) < 0.5, -1.0, 1.0)
        self.scales = magnitudes * signs

    @property
    def code_dim(self) -> int:
        return self.space.num_factors

    @property
    def model_id(self) -> str:
        return f"{self.name()}-s{self.seed}"

    def encode_batch(self, values: np.ndarray) -> np.ndarray:
        return integer_codes(self.space, values)[:, self.permutation] * self.scales
