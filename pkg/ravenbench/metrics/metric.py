"""
Disentanglement metric base class.
All metrics are listed in __init__.py.
"""

from __future__ import annotations
import logging
from dataclasses import dataclass, asdict
from typing import List

import numpy as np

from ravenbench import digest
from ravenbench.constant import METRIC
from ravenbench.errors import MetricError
from ravenbench.factor import SeededRng, derive_seed
from ravenbench.sources import RepresentationSource

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)


@dataclass(frozen=True)
class MetricScore:
    metric: str
    value: float
    params_digest: str
    seed: int
    model_id: str = ""

    def to_row(self) -> dict:
        return asdict(self)


class Metric:
    """
    A metric maps a representation source to a score in [0, 1].

    Hyperparameters are declared in PARAMETERS with their default value.
    Every hyperparameter and the seed enter the params digest.
    """

    METRIC_NAME = "none"

    PARAMETERS = {}

    @classmethod
    def name(cls) -> str:
        return cls.METRIC_NAME

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

    def __init__(self, **params):
        unknown = set(params) - set(self.PARAMETERS)
        if len(unknown) > 0:
            raise MetricError(f"{self.name()}: unknown parameters {sorted(unknown)}, expected {sorted(self.PARAMETERS)}")
        self.params = self.PARAMETERS | {k: type(self.PARAMETERS[k])(v) if self.PARAMETERS[k] is not None else v for k, v in params.items()}

    def __repr__(self):
        return f"{type(self).__name__}({self.params})"

    def params_digest(self, seed: int) -> str:
        return digest({"metric": self.name(), "params": self.params, "seed": seed})

    def stream(self, seed: int) -> SeededRng:
        """Metric stream of a run seed, independent of which other metrics are evaluated"""
        return SeededRng(derive_seed(seed, list(METRIC).index(METRIC(self.name()))))

    def compute(self, source: RepresentationSource, rng: SeededRng) -> float:
        raise NotImplementedError

    def evaluate(self, source: RepresentationSource, seed: int) -> MetricScore:
        logger.debug(f"{self.name()} on {source.model_id}..")
        value = self.compute(source, self.stream(seed))
        if not np.isfinite(value):
            raise MetricError(f"{self.name()}: non finite value {value} on {source.model_id}")
        value = float(np.clip(value, 0.0, 1.0))
        logger.debug(f"..{self.name()} on {source.model_id} = {value:.4f}")
        return MetricScore(metric=self.name(), value=value, params_digest=self.params_digest(seed), seed=seed, model_id=source.model_id)
