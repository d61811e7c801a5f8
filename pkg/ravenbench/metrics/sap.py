# Separated Attribute Predictability
#
# Score matrix S[j, k]: chance-adjusted balanced accuracy of a one-dimensional
# multi-cut tree predicting factor k from code dimension j alone, clipped at 0.
#
import logging

import numpy as np
from sklearn.metrics import balanced_accuracy_score
from sklearn.tree import DecisionTreeClassifier

from ravenbench.constant import METRIC
from ravenbench.factor import SeededRng
from ravenbench.sources import RepresentationSource
from .metric import Metric
from .utils import sample_codes, split_train_test

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)


def score_matrix(train_codes, train_values, test_codes, test_values, cardinalities, random_state: int = 0) -> np.ndarray:
    d, K = train_codes.shape[1], train_values.shape[1]
    s = np.zeros((d, K))
    for j in range(d):
        for k in range(K):
            tree = DecisionTreeClassifier(max_leaf_nodes=cardinalities[k], class_weight="balanced", random_state=random_state)
            tree.fit(train_codes[:, j : j + 1], train_values[:, k])
            predicted = tree.predict(test_codes[:, j : j + 1])
            s[j, k] = max(0.0, balanced_accuracy_score(test_values[:, k], predicted, adjusted=True))
    return s


def average_top_two_gap(s: np.ndarray) -> float:
    if s.shape[0] < 2:
        return float(np.mean(s[0]))
    ordered = np.sort(s, axis=0)
    return float(np.mean(ordered[-1, :] - ordered[-2, :]))


class SAP(Metric):

    METRIC_NAME = METRIC.SAP.value

    PARAMETERS = {"train_n": 10000, "test_n": 5000}

    def compute(self, source: RepresentationSource, rng: SeededRng) -> float:
        p = self.params
        codes, values = sample_codes(source, rng, p["train_n"] + p["test_n"])
        s = score_matrix(*split_train_test(codes, values, p["train_n"]), cardinalities=source.space.cardinalities, random_state=rng.random_state())
        return average_top_two_gap(s)
