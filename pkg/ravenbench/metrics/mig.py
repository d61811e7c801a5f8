# Mutual Information Gap
#
import logging
from dataclasses import dataclass

import numpy as np

from ravenbench.constant import METRIC
from ravenbench.errors import MetricError
from ravenbench.factor import SeededRng
from ravenbench.sources import RepresentationSource
from .metric import Metric
from .utils import discrete_entropy, discrete_mutual_info, histogram_discretize, space_codes

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)


@dataclass
class MiMatrix:
    mi: np.ndarray  # (d, K) nats
    entropy: np.ndarray  # (K,) nats


def mi_matrix(codes: np.ndarray, values: np.ndarray, bins: int = 20) -> MiMatrix:
    if bins < 2:
        raise MetricError(f"need at least 2 bins, got {bins}")
    discretized, flat = histogram_discretize(codes, bins)
    mi = discrete_mutual_info(discretized, values)
    mi[flat, :] = 0.0
    return MiMatrix(mi=mi, entropy=discrete_entropy(values))


def discretized_mi(source: RepresentationSource, rng: SeededRng, bins: int = 20, sample_n: int | None = None) -> MiMatrix:
    """MI between binned code dimensions and factors, over the whole space unless sample_n is given"""
    codes, values = space_codes(source, rng, sample_n)
    return mi_matrix(codes, values, bins)


def mutual_information_gap(m: MiMatrix, names=None) -> float:
    K = m.mi.shape[1]
    if m.mi.shape[0] < 2:
        m = MiMatrix(mi=np.vstack([m.mi, np.zeros((1, K))]), entropy=m.entropy)
    top = np.sort(m.mi, axis=0)[::-1]
    gaps = []
    for k in range(K):
        if m.entropy[k] <= 0:
            logger.warning(f"factor {names[k] if names else k} has zero entropy, excluded from mig")
            continue
        gaps.append((top[0, k] - top[1, k]) / m.entropy[k])
    if len(gaps) == 0:
        raise MetricError("every factor has zero entropy")
    return float(np.mean(gaps))


class MIG(Metric):

    METRIC_NAME = METRIC.MIG.value

    PARAMETERS = {"bins": 20, "sample_n": None}

    def compute(self, source: RepresentationSource, rng: SeededRng) -> float:
        sample_n = self.params["sample_n"]
        m = discretized_mi(source, rng, bins=int(self.params["bins"]), sample_n=int(sample_n) if sample_n is not None else None)
        return mutual_information_gap(m, names=source.space.names)
