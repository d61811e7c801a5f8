# DCI Disentanglement from random forest impurity importances.
#
# R[j, k] sums, over the trees of the forest predicting factor k, the weighted
# impurity decrease of every split on code dimension j (not normalized per tree).
#
import logging

import numpy as np
from scipy.stats import entropy
from sklearn.ensemble import RandomForestClassifier

from ravenbench.constant import METRIC
from ravenbench.factor import SeededRng
from ravenbench.sources import RepresentationSource
from .metric import Metric
from .utils import sample_codes

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)


def node_impurity_decrease(tree) -> np.ndarray:
    """Weighted impurity decrease of each node, 0 for leaves, relative to the root weight"""
    left, right = tree.children_left, tree.children_right
    w, imp = tree.weighted_n_node_samples, tree.impurity
    decrease = np.zeros(tree.node_count)
    internal = np.flatnonzero(left >= 0)
    decrease[internal] = w[internal] * imp[internal] - w[left[internal]] * imp[left[internal]] - w[right[internal]] * imp[right[internal]]
    return decrease / w[0]


def tree_importances(tree, n_features: int) -> np.ndarray:
    decrease = node_impurity_decrease(tree)
    internal = tree.children_left >= 0
    return np.bincount(tree.feature[internal], weights=decrease[internal], minlength=n_features)


def forest_importances(forest: RandomForestClassifier, n_features: int) -> np.ndarray:
    return np.sum([tree_importances(estimator.tree_, n_features) for estimator in forest.estimators_], axis=0)


def importance_matrix(codes: np.ndarray, values: np.ndarray, trees: int = 10, max_depth: int = 8, random_state: int = 0, names=None) -> np.ndarray:
    d, K = codes.shape[1], values.shape[1]
    r = np.zeros((d, K))
    for k in range(K):
        forest = RandomForestClassifier(n_estimators=trees, max_depth=max_depth, max_features=None, bootstrap=True, random_state=random_state)
        forest.fit(codes, values[:, k])
        r[:, k] = np.maximum(forest_importances(forest, d), 0.0)
        if r[:, k].sum() <= 0:
            logger.warning(f"forest for factor {names[k] if names else k} made no split, zero importance column")
    return r


def dci_importance(source: RepresentationSource, rng: SeededRng, trees: int = 10, max_depth: int = 8, train_n: int = 8000) -> np.ndarray:
    codes, values = sample_codes(source, rng, train_n)
    return importance_matrix(codes, values, trees=trees, max_depth=max_depth, random_state=rng.random_state(), names=source.space.names)


def dci_disentanglement(r: np.ndarray) -> float:
    """Importance weighted 1 - entropy (base K) of each code's importance distribution over factors"""
    r = np.abs(np.asarray(r, dtype=np.float64))
    mass = r.sum(axis=1)
    if mass.sum() <= 0:
        logger.warning("importance matrix is all zero, disentanglement 0")
        return 0.0
    keep = mass > 0
    K = r.shape[1]
    if K < 2:
        return 1.0
    per_code = 1.0 - entropy(r[keep].T, base=K)
    return float(np.sum(per_code * mass[keep] / mass.sum()))


class DCIDisentanglement(Metric):

    METRIC_NAME = METRIC.DCI_DISENTANGLEMENT.value

    PARAMETERS = {"trees": 10, "max_depth": 8, "train_n": 8000}

    def compute(self, source: RepresentationSource, rng: SeededRng) -> float:
        return dci_disentanglement(dci_importance(source, rng, **self.params))
