# Sampling and information helpers shared by the metrics
#
import logging
from typing import Iterator, Tuple

import numpy as np
import sklearn.metrics

from ravenbench.constant import FULL_SPACE_LIMIT
from ravenbench.factor import SeededRng, enumerate_space
from ravenbench.sources import RepresentationSource

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)

CHUNK = 512  # intervention batches encoded at once


def sample_codes(source: RepresentationSource, rng: SeededRng, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """(codes (n, d), factor values (n, K)) for n sampled assignments"""
    values = source.sample_values(rng, n)
    return source.encode_batch(values), values


def space_codes(source: RepresentationSource, rng: SeededRng, sample_n: int | None = None) -> Tuple[np.ndarray, np.ndarray]:
    """Codes over the whole space when it is small enough and covered, sampled otherwise"""
    if sample_n is None and source.covers_space() and source.space.size <= FULL_SPACE_LIMIT:
        values = enumerate_space(source.space)
        return source.encode_batch(values), values
    n = sample_n if sample_n is not None else min(source.space.size, FULL_SPACE_LIMIT)
    logger.debug(f"sampling {n} codes of {source.model_id}")
    return sample_codes(source, rng, n)


def fixed_factor_values(source: RepresentationSource, rng: SeededRng, factors: np.ndarray, size: int) -> np.ndarray:
    """(len(factors), size, K) values, batch i sharing one value of factors[i]"""
    space = source.space
    if source.covers_space():
        values = rng.draws(space.cardinalities, size=(len(factors), size, space.num_factors))
        shared = rng.draws(np.asarray(space.cardinalities)[factors], size=len(factors))
        values[np.arange(len(factors)), :, factors] = shared[:, None]
        return values
    return np.stack([source.sample_fixed_values(rng, int(k), size) for k in factors])


def intervention_batches(source: RepresentationSource, rng: SeededRng, n: int, size: int) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
    """n (factor, codes (size, d)) interventions, yielded in chunks as (factors (m,), codes (m, size, d))"""
    K = source.space.num_factors
    done = 0
    while done < n:
        m = min(CHUNK, n - done)
        factors = rng.draws(K, size=m)
        values = fixed_factor_values(source, rng, factors, size)
        codes = source.encode_batch(values.reshape(m * size, K)).reshape(m, size, -1)
        yield factors, codes
        done = done + m


# ###############################
# Discrete information
#
def histogram_discretize(codes: np.ndarray, bins: int = 20) -> Tuple[np.ndarray, np.ndarray]:
    """Equal-width bins over the observed range of each dimension.

    Returns (bin indices (n, d), mask of dimensions with zero range).
    """
    codes = np.asarray(codes, dtype=np.float64)
    discretized = np.zeros(codes.shape, dtype=np.int64)
    flat = np.zeros(codes.shape[1], dtype=bool)
    for j in range(codes.shape[1]):
        column = codes[:, j]
        if column.max() - column.min() <= 0:
            flat[j] = True
            continue
        discretized[:, j] = np.digitize(column, np.histogram(column, bins)[1][:-1])
    return discretized, flat


def discrete_mutual_info(discretized: np.ndarray, factors: np.ndarray) -> np.ndarray:
    """(d, K) plug-in mutual information in nats"""
    d, K = discretized.shape[1], factors.shape[1]
    m = np.zeros((d, K))
    for j in range(d):
        for k in range(K):
            m[j, k] = sklearn.metrics.mutual_info_score(factors[:, k], discretized[:, j])
    return m


def discrete_entropy(factors: np.ndarray) -> np.ndarray:
    """(K,) plug-in entropy of each factor in nats"""
    return np.array([sklearn.metrics.mutual_info_score(factors[:, k], factors[:, k]) for k in range(factors.shape[1])])


def split_train_test(codes: np.ndarray, values: np.ndarray, n_train: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    return codes[:n_train], values[:n_train], codes[n_train:], values[n_train:]
