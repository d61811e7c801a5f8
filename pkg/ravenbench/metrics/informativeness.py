# Factor classifiers trained on full codes, averaged over factors
#
import logging

import numpy as np
from sklearn.ensemble import GradientBoostingClassifier
from sklearn.linear_model import LogisticRegression
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from ravenbench.constant import METRIC
from ravenbench.errors import MetricError
from ravenbench.factor import SeededRng
from ravenbench.sources import RepresentationSource
from .metric import Metric
from .utils import sample_codes, split_train_test

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)

LR = "lr"
GBT = "gbt"


def make_classifier(model: str, random_state: int, n_estimators: int = 50, max_depth: int = 3):
    if model == LR:
        return make_pipeline(StandardScaler(), LogisticRegression(max_iter=1000, random_state=random_state))
    if model == GBT:
        return GradientBoostingClassifier(n_estimators=n_estimators, max_depth=max_depth, random_state=random_state)
    raise MetricError(f"unknown classifier {model}")


def classifier_accuracies(model: str, train_codes, train_values, test_codes, test_values, random_state: int = 0, **classifier_params) -> np.ndarray:
    accuracies = np.zeros(train_values.shape[1])
    for k in range(train_values.shape[1]):
        if len(np.unique(train_values[:, k])) < 2:
            # single class, predicting it is always right
            accuracies[k] = float(np.mean(test_values[:, k] == train_values[0, k]))
            continue
        classifier = make_classifier(model, random_state, **classifier_params)
        classifier.fit(train_codes, train_values[:, k])
        accuracies[k] = classifier.score(test_codes, test_values[:, k])
    return accuracies


def informativeness(source: RepresentationSource, rng: SeededRng, model: str, train_n: int = 10000, test_n: int = 5000, **classifier_params) -> float:
    codes, values = sample_codes(source, rng, train_n + test_n)
    accuracies = classifier_accuracies(model, *split_train_test(codes, values, train_n), random_state=rng.random_state(), **classifier_params)
    logger.debug(f"{model} accuracy per factor {dict(zip(source.space.names, np.round(accuracies, 4)))}")
    return float(accuracies.mean())


class LRInformativeness(Metric):

    METRIC_NAME = METRIC.LR_INFORMATIVENESS.value

    PARAMETERS = {"train_n": 10000, "test_n": 5000}

    def compute(self, source: RepresentationSource, rng: SeededRng) -> float:
        return informativeness(source, rng, LR, **self.params)


class GBTInformativeness(Metric):

    METRIC_NAME = METRIC.GBT_INFORMATIVENESS.value

    PARAMETERS = {"train_n": 10000, "test_n": 5000, "n_estimators": 50, "max_depth": 3}

    def compute(self, source: RepresentationSource, rng: SeededRng) -> float:
        return informativeness(source, rng, GBT, **self.params)
