"""
Disentanglement metrics and informativeness scores.
"""

import logging
from typing import Dict, List

from ravenbench.constant import METRIC, DISENTANGLEMENT, DISENTANGLEMENT_METRICS
from ravenbench.errors import MetricError
from ravenbench.sources import RepresentationSource

from .metric import Metric, MetricScore
from .beta_vae import BetaVAE
from .factor_vae import FactorVAE
from .mig import MIG, MiMatrix, discretized_mi, mi_matrix, mutual_information_gap
from .sap import SAP
from .dci import DCIDisentanglement, dci_importance, dci_disentanglement, importance_matrix
from .informativeness import LRInformativeness, GBTInformativeness, informativeness

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)

ALL = "all"

METRIC_GROUPS = {
    ALL: [m.value for m in METRIC],
    DISENTANGLEMENT: DISENTANGLEMENT_METRICS,
}


def all_metrics() -> Dict[str, type]:
    return {m.name(): m for m in Metric.all_subclasses() if m.name() != "none"}


def metric_names(selection: str | List[str] | None) -> List[str]:
    """Metric names in canonical order from a comma separated string or a list of names and groups ("all", "disentanglement")"""
    if selection is None:
        return list(METRIC_GROUPS[ALL])
    if isinstance(selection, str):
        selection = [s.strip() for s in selection.split(",") if s.strip() != ""]
    selection = [name for s in selection for name in METRIC_GROUPS.get(s, [s])]
    known = [m.value for m in METRIC]
    unknown = [s for s in selection if s not in known]
    if len(unknown) > 0:
        raise MetricError(f"unknown metrics {unknown}, expected {known}")
    return [m for m in known if m in selection]


def make_metric(name: str, params: dict | None = None) -> Metric:
    metrics = all_metrics()
    if name not in metrics:
        raise MetricError(f"unknown metric {name}")
    return metrics[name](**(params or {}))


def evaluate_metrics(source: RepresentationSource, metrics: str | List[str] | None, seed: int, metric_params: dict | None = None) -> List[MetricScore]:
    metric_params = metric_params or {}
    names = metric_names(metrics)
    logger.info(f"evaluating {len(names)} metrics on {source.model_id}..")
    scores = [make_metric(name, metric_params.get(name)).evaluate(source, seed) for name in names]
    logger.info(f"..{source.model_id} done")
    return scores
