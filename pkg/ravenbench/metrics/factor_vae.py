# FactorVAE score: majority-vote classifier from the least varying normalized dimension to the fixed factor.
#
import logging
from typing import Tuple

import numpy as np

from ravenbench.constant import METRIC
from ravenbench.errors import MetricError
from ravenbench.factor import SeededRng
from ravenbench.sources import RepresentationSource
from .metric import Metric
from .utils import intervention_batches, space_codes

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)


def active_dimensions(source: RepresentationSource, rng: SeededRng, variance_floor: float) -> Tuple[np.ndarray, np.ndarray]:
    """Standard deviation of each dimension over the space and the mask of dimensions above the floor"""
    codes, _ = space_codes(source, rng)
    variance = codes.var(axis=0)
    active = variance >= variance_floor
    if not active.any():
        raise MetricError("no active dimensions")
    return np.sqrt(variance), active


def cast_votes(source: RepresentationSource, rng: SeededRng, n: int, batch: int, scale: np.ndarray, active: np.ndarray) -> np.ndarray:
    """(K, d) counts of (fixed factor, argmin normalized variance dimension)"""
    votes = np.zeros((source.space.num_factors, source.code_dim), dtype=np.int64)
    dims = np.flatnonzero(active)
    for factors, codes in intervention_batches(source, rng, n, batch):
        local = (codes[:, :, dims] / scale[dims]).var(axis=1)
        np.add.at(votes, (factors, dims[np.argmin(local, axis=1)]), 1)
    return votes


class FactorVAE(Metric):

    METRIC_NAME = METRIC.FACTOR_VAE.value

    PARAMETERS = {"votes": 10000, "eval_votes": 5000, "batch": 64, "variance_floor": 1e-6}

    def compute(self, source: RepresentationSource, rng: SeededRng) -> float:
        p = self.params
        scale, active = active_dimensions(source, rng, p["variance_floor"])
        logger.debug(f"{int(active.sum())} active dimensions of {source.code_dim}")
        train = cast_votes(source, rng, p["votes"], p["batch"], scale, active)
        held_out = cast_votes(source, rng, p["eval_votes"], p["batch"], scale, active)
        classifier = np.argmax(train, axis=0)  # dimension -> factor
        dims = np.arange(source.code_dim)
        return held_out[classifier, dims].sum() / held_out.sum()
