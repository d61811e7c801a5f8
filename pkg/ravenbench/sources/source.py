"""
Representation sources: functions from factor assignments to code vectors.
All sources are listed in __init__.py.
"""

from __future__ import annotations
import logging
from typing import List

import numpy as np

from ravenbench.constant import SOURCE_KIND
from ravenbench.factor import FactorSpace, FactorAssignment, SeededRng, sample_assignments, sample_fixed_factor_batch, validate_assignment

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)


# ##########################################
# REPRESENTATION SOURCE
#
class RepresentationSource:
    """
    Base class for all representation sources.

    Subclasses implement encode_batch() over an (n, K) array of factor values.
    Sources are immutable once built and can be shared between workers.
    """

    SOURCE_NAME = "none"

    PARAMETERS = {}

    @classmethod
    def parameters(cls) -> dict:
        return cls.PARAMETERS

    @classmethod
    def name(cls) -> str:
        return cls.SOURCE_NAME

    @classmethod
    def all_subclasses(cls) -> List[type]:
        subclasses = set()
        stack = [cls]
        while stack:
            for sub in stack.pop().__subclasses__():
                if sub not in subclasses:
                    subclasses.add(sub)
                    stack.append(sub)
        return list(subclasses)

    def __init__(self, space: FactorSpace):
        self.space = space

    def __repr__(self):
        return f"{type(self).__name__}({self.model_id}, space={self.space.id}, code_dim={self.code_dim})"

    @property
    def kind(self) -> SOURCE_KIND:
        return SOURCE_KIND(self.name())

    @property
    def code_dim(self) -> int:
        raise NotImplementedError

    @property
    def model_id(self) -> str:
        """Identifier used in scores and curves files"""
        return self.name()

    def describe(self) -> dict:
        return {"kind": self.name(), "space": self.space.id, "code_dim": self.code_dim, "model_id": self.model_id}

    def encode_batch(self, values: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def encode(self, a: FactorAssignment) -> np.ndarray:
        validate_assignment(self.space, a)
        return self.encode_batch(np.asarray([list(a)], dtype=np.int64))[0]

    # Sampling of the assignments a source can encode.
    # Sources covering the whole space sample the space uniformly.
    def sample_values(self, rng: SeededRng, n: int) -> np.ndarray:
        return sample_assignments(self.space, rng, n)

    def sample_fixed_values(self, rng: SeededRng, factor: int, n: int) -> np.ndarray:
        return sample_fixed_factor_batch(self.space, rng, factor, n)

    def covers_space(self) -> bool:
        return True
