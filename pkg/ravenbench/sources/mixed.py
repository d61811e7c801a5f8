# Linearly mixed ground-truth codes.
#
# z = M z_gt with M = (1 - alpha) I + alpha Q, rows of M rescaled to unit length.
# Q is a random rotation drawn once per mix seed and shared by a whole ladder, so
# alpha alone moves a representation from disentangled (0) to fully mixed (1).
#
# Rows of Q are sign flipped so that its diagonal is non-negative. Row i of M then
# loses weight on factor i and gains weight on every other factor as alpha grows,
# with no intermediate alpha more mixed than alpha = 1.
#
import logging
from typing import List

import numpy as np
from scipy.stats import ortho_group

from ravenbench.constant import SOURCE_KIND
from ravenbench.errors import SourceError
from ravenbench.factor import FactorSpace, derive_seed
from .source import RepresentationSource
from .groundtruth import integer_codes

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)

MAX_ABS_CORRELATION = 0.9  # at alpha = 1, no code dimension may follow one factor more closely
MIN_EIGEN_GAP = 1e-3  # distance of Q's spectrum to -1, keeps every alpha < 1 invertible
MAX_DRAWS = 200
CANDIDATES = 16  # strictly rising draws compared before keeping the most mixing one
ALPHA_GRID = np.linspace(0.0, 1.0, 5)  # levels of the default ladder


def factor_variances(space: FactorSpace) -> np.ndarray:
    """Variance of each integer-coded factor under the uniform prior"""
    c = np.asarray(space.cardinalities, dtype=np.float64)
    return (c + 1.0) / (12.0 * (c - 1.0))


def mixing_matrix(alpha: float, q: np.ndarray) -> np.ndarray:
    d, k = q.shape
    m = (1.0 - alpha) * np.eye(d, k) + alpha * q
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    return np.divide(m, norms, out=np.zeros_like(m), where=norms > 0)


def code_factor_correlations(space: FactorSpace, m: np.ndarray) -> np.ndarray:
    """Exact correlation of each code dimension with each factor over the uniform space"""
    sd = np.sqrt(factor_variances(space))
    weighted = m * sd[None, :]
    total = np.sqrt((weighted**2).sum(axis=1, keepdims=True))
    return np.divide(weighted, total, out=np.zeros_like(weighted), where=total > 0)


def column_gaps(correlations: np.ndarray) -> np.ndarray:
    """Per factor, distance between the two code dimensions most correlated with it"""
    top = -np.sort(-np.abs(correlations), axis=0)
    return top[0] - top[1]


def align_diagonal(q: np.ndarray) -> np.ndarray:
    k = q.shape[1]
    aligned = q.copy()
    signs = np.where(np.diag(aligned[:k]) < 0, -1.0, 1.0)
    aligned[:k] = aligned[:k] * signs[:, None]
    return aligned


def entanglement_profile(space: FactorSpace, q: np.ndarray, alphas=ALPHA_GRID) -> tuple:
    """Own-factor correlation of each of the first K codes and mean column gap, along alphas"""
    k = q.shape[1]
    own, gaps = [], []
    for alpha in alphas:
        c = np.abs(code_factor_correlations(space, mixing_matrix(alpha, q)))
        own.append(np.diag(c[:k]))
        gaps.append(column_gaps(c).mean())
    return np.array(own), np.array(gaps)


def mixing_violation(space: FactorSpace, q: np.ndarray) -> float:
    """Largest increase of an own-factor correlation or of the mean column gap along alpha, 0 when none increases"""
    own, gaps = entanglement_profile(space, q)
    rises = np.concatenate([np.diff(own, axis=0).ravel(), np.diff(gaps)])
    return float(max(0.0, np.max(rises)))


def draw_rotation(space: FactorSpace, mix_seed: int, code_dim: int | None = None) -> np.ndarray:
    """Random (code_dim, K) matrix with orthonormal columns and non-negative diagonal

    Draws close to a reflection, or leaving a code dimension that still follows one
    factor at alpha = 1, are rejected. Usable draws are ranked by how far
    entanglement fails to rise with alpha, then by their largest code/factor
    correlation at alpha = 1. Drawing stops after CANDIDATES strictly rising draws.
    """
    k = space.num_factors
    d = k if code_dim is None else int(code_dim)
    if d < k:
        raise SourceError(f"code dimension {d} smaller than factor count {k}")
    usable = []
    rising = 0
    for attempt in range(MAX_DRAWS):
        rotation = ortho_group.rvs(d, random_state=np.random.default_rng(derive_seed(mix_seed, attempt)))
        q = align_diagonal(rotation[:, :k])
        if d == k and np.min(np.abs(np.linalg.eigvals(q) + 1.0)) < MIN_EIGEN_GAP:
            logger.debug(f"mix seed {mix_seed}: draw {attempt} close to a reflection, redrawing")
            continue
        aligned = np.max(np.abs(code_factor_correlations(space, mixing_matrix(1.0, q))))
        if aligned > MAX_ABS_CORRELATION:
            logger.debug(f"mix seed {mix_seed}: draw {attempt} leaves an aligned dimension, redrawing")
            continue
        violation = mixing_violation(space, q)
        usable.append((violation, aligned, attempt, q))
        if violation == 0.0:
            rising = rising + 1
            if rising == CANDIDATES:
                break
    if len(usable) == 0:
        raise SourceError(f"mix seed {mix_seed}: no usable mixing matrix after {MAX_DRAWS} draws")
    violation, aligned, attempt, q = min(usable, key=lambda u: u[:3])
    if violation > 0.0:
        logger.warning(f"mix seed {mix_seed}: no draw mixes strictly more with alpha, best draw rises by {violation:.4f}")
    logger.debug(f"mix seed {mix_seed}: draw {attempt} kept, max correlation {aligned:.3f} at alpha 1")
    return q


class LinearMixed(RepresentationSource):

    SOURCE_NAME = SOURCE_KIND.LINEAR_MIXED.value

    PARAMETERS = {"alpha": 0.0, "seed": 0, "dim": None}

    def __init__(self, space: FactorSpace, alpha: float = 0.0, seed: int = 0, dim: int | None = None, rotation: np.ndarray | None = None):
        RepresentationSource.__init__(self, space=space)
        if not (0.0 <= alpha <= 1.0):
            raise SourceError(f"alpha {alpha} not in [0, 1]")
        self.alpha = float(alpha)
        self.mix_seed = int(seed)
        self.rotation = rotation if rotation is not None else draw_rotation(space, self.mix_seed, dim)
        self.matrix = mixing_matrix(self.alpha, self.rotation)

    @property
    def code_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def model_id(self) -> str:
        return f"{self.name()}-a{self.alpha:g}-s{self.mix_seed}"

    def describe(self) -> dict:
        return super().describe() | {"alpha": self.alpha, "mix_seed": self.mix_seed}

    def condition_number(self) -> float:
        return float(np.linalg.cond(self.matrix))

    def encode_batch(self, values: np.ndarray) -> np.ndarray:
        return integer_codes(self.space, values) @ self.matrix.T


def make_entanglement_ladder(space: FactorSpace, levels: int, mix_seed: int = 0, dim: int | None = None) -> List[LinearMixed]:
    """levels sources at alpha = k / (levels - 1), all sharing one rotation"""
    if levels < 2:
        raise SourceError(f"ladder needs at least 2 levels, got {levels}")
    rotation = draw_rotation(space, mix_seed, dim)
    return [LinearMixed(space, alpha=k / (levels - 1), seed=mix_seed, rotation=rotation) for k in range(levels)]
