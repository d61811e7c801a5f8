# BetaVAE score: which factor was held fixed, predicted from mean code differences.
#
import logging

import numpy as np
from sklearn.linear_model import LogisticRegression

from ravenbench.constant import METRIC
from ravenbench.factor import SeededRng
from ravenbench.sources import RepresentationSource
from .metric import Metric
from .utils import intervention_batches

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)


def difference_summaries(source: RepresentationSource, rng: SeededRng, n: int, batch: int):
    """n points (mean |z1 - z2| over batch pairs agreeing on factor k, k)"""
    features = []
    labels = []
    for factors, codes in intervention_batches(source, rng, n, 2 * batch):
        features.append(np.abs(codes[:, :batch] - codes[:, batch:]).mean(axis=1))
        labels.append(factors)
    return np.concatenate(features), np.concatenate(labels)


class BetaVAE(Metric):

    METRIC_NAME = METRIC.BETA_VAE.value

    PARAMETERS = {"train_points": 10000, "batch": 64, "eval_points": 5000}

    def compute(self, source: RepresentationSource, rng: SeededRng) -> float:
        p = self.params
        x_train, y_train = difference_summaries(source, rng, p["train_points"], p["batch"])
        x_eval, y_eval = difference_summaries(source, rng, p["eval_points"], p["batch"])
        model = LogisticRegression(max_iter=1000, random_state=rng.random_state())
        model.fit(x_train, y_train)
        train_accuracy = model.score(x_train, y_train)
        eval_accuracy = model.score(x_eval, y_eval)
        logger.debug(f"train accuracy {train_accuracy:.4f}, eval accuracy {eval_accuracy:.4f}")
        return eval_accuracy
