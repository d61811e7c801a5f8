# Rank correlations between representation scores and downstream accuracy.
#
# Inputs are the scores file (model_id,metric,value,params_digest,seed) keyed by
# representation id and the curves file (model_id,step,accuracy) keyed by run id
# <representation id>/<config digest>/<seed>. Runs are averaged per representation
# unless raw rows are asked for.
#
from __future__ import annotations
import os
import json
import math
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import rankdata, spearmanr

from ravenbench.constant import ID_SEP, REPORT_FILE, RECONSTRUCTION
from ravenbench.errors import AnalysisError

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)

MODEL_ID = "model_id"
REPRESENTATION_ID = "representation_id"
SCORE_COLUMNS = ["model_id", "metric", "value", "params_digest", "seed"]
CURVE_COLUMNS = ["model_id", "step", "accuracy"]
ACCURACY_PREFIX = "acc@"


def accuracy_column(step: int) -> str:
    return f"{ACCURACY_PREFIX}{int(step)}"


def representation_of(run_id: str) -> str:
    return run_id.split(ID_SEP)[0]


# ###############################
# Spearman
#
def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson correlation of mid-ranks, nan when either side has a single rank"""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise AnalysisError(f"spearman needs two vectors of equal length, got {xs.shape} and {ys.shape}")
    if len(xs) < 2:
        raise AnalysisError(f"spearman needs at least 2 values, got {len(xs)}")
    rx, ry = rankdata(xs), rankdata(ys)
    if np.all(rx == rx[0]) or np.all(ry == ry[0]):
        return float("nan")
    return float(spearmanr(xs, ys)[0])


def _pairwise(x: pd.Series, y: pd.Series) -> float:
    both = pd.concat([x, y], axis=1).dropna()
    if len(both) < 2:
        return float("nan")
    return spearman(both.iloc[:, 0].to_numpy(), both.iloc[:, 1].to_numpy())


# ###############################
# Results table
#
@dataclass
class ResultsTable:
    frame: pd.DataFrame  # indexed by model id, metric columns then acc@<step> columns
    metrics: List[str]
    checkpoints: List[int]

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def final_step(self) -> int:
        return max(self.checkpoints)

    def metric(self, name: str) -> pd.Series:
        if name not in self.frame.columns:
            raise AnalysisError(f"no column for metric {name}")
        return self.frame[name]

    def accuracy(self, step: int) -> pd.Series:
        column = accuracy_column(step)
        if column not in self.frame.columns:
            raise AnalysisError(f"no accuracy at step {step}")
        return self.frame[column]

    def subset(self, model_ids: Sequence[str]) -> ResultsTable:
        return ResultsTable(frame=self.frame.loc[list(model_ids)], metrics=self.metrics, checkpoints=self.checkpoints)

    def sorted_ids(self, by: pd.Series) -> List[str]:
        """Model ids ordered by value, ties by model id"""
        order = pd.DataFrame({"value": by.to_numpy(), MODEL_ID: by.index.to_numpy()})
        return order.sort_values(["value", MODEL_ID], kind="mergesort")[MODEL_ID].tolist()


def load_scores(path: str) -> pd.DataFrame:
    scores = pd.read_csv(path, dtype={"model_id": str, "metric": str, "params_digest": str})
    missing = set(SCORE_COLUMNS) - set(scores.columns)
    if len(missing) > 0:
        raise AnalysisError(f"{path}: missing columns {sorted(missing)}")
    return scores


def load_curves(path: str) -> pd.DataFrame:
    curves = pd.read_csv(path, dtype={"model_id": str})
    missing = set(CURVE_COLUMNS) - set(curves.columns)
    if len(missing) > 0:
        raise AnalysisError(f"{path}: missing columns {sorted(missing)}")
    return curves


def build_results_table(scores: pd.DataFrame, curves: pd.DataFrame, raw_rows: bool = False) -> ResultsTable:
    """Joins metric scores (per representation) with accuracy curves (per run)"""
    metric_frame = scores.pivot_table(index=MODEL_ID, columns="metric", values="value", aggfunc="mean")
    curves = curves.assign(**{REPRESENTATION_ID: curves[MODEL_ID].map(representation_of)})
    if curves.duplicated([MODEL_ID, "step"]).any():
        dup = curves[curves.duplicated([MODEL_ID, "step"])].iloc[0]
        raise AnalysisError(f"duplicate curve point for {dup[MODEL_ID]} at step {dup['step']}")
    key = MODEL_ID if raw_rows else REPRESENTATION_ID
    accuracy = curves.pivot_table(index=key, columns="step", values="accuracy", aggfunc="mean")
    checkpoints = sorted(int(s) for s in accuracy.columns)
    accuracy.columns = [accuracy_column(s) for s in accuracy.columns]
    if accuracy.isna().any().any():
        holes = accuracy[accuracy.isna().any(axis=1)].index[0]
        raise AnalysisError(f"{holes} misses accuracy at some checkpoint")
    if raw_rows:
        representation = curves.drop_duplicates(MODEL_ID).set_index(MODEL_ID)[REPRESENTATION_ID]
        joined = metric_frame.reindex(representation.loc[accuracy.index].to_numpy())
        joined.index = accuracy.index
    else:
        joined = metric_frame.reindex(accuracy.index)
    frame = pd.concat([joined, accuracy], axis=1)
    frame.index.name = MODEL_ID
    frame = frame.sort_index()
    unscored = joined.index[joined.isna().all(axis=1)]
    if len(unscored) > 0:
        logger.warning(f"{len(unscored)} models have no scores, e.g. {unscored[0]}")
    metrics = [m for m in metric_frame.columns]
    logger.debug(f"results table: {len(frame)} rows, metrics {metrics}, checkpoints {checkpoints}")
    return ResultsTable(frame=frame, metrics=metrics, checkpoints=checkpoints)


# ###############################
# Analyses
#
def correlate_all(table: ResultsTable, metrics: Sequence[str] | None = None, checkpoints: Sequence[int] | None = None) -> pd.DataFrame:
    """Spearman rho of every metric against accuracy at every checkpoint, metric x step"""
    metrics = table.metrics if metrics is None else list(metrics)
    checkpoints = table.checkpoints if checkpoints is None else list(checkpoints)
    rho = pd.DataFrame(index=pd.Index(metrics, name="metric"), columns=pd.Index(checkpoints, name="step"), dtype=np.float64)
    for m in metrics:
        for step in checkpoints:
            rho.loc[m, step] = _pairwise(table.metric(m), table.accuracy(step))
    return rho


def quartile_curves(table: ResultsTable, metric: str, checkpoints: Sequence[int] | None = None) -> pd.DataFrame:
    """Mean accuracy of the 4 metric quartiles (1 lowest), quartile x step"""
    checkpoints = table.checkpoints if checkpoints is None else list(checkpoints)
    values = table.metric(metric).dropna()
    if len(values) < 4:
        raise AnalysisError(f"quartiles of {metric} need at least 4 models, got {len(values)}")
    bins = np.array_split(np.asarray(table.sorted_ids(values), dtype=object), 4)
    curves = pd.DataFrame(index=pd.Index([1, 2, 3, 4], name="quartile"), columns=pd.Index(checkpoints, name="step"), dtype=np.float64)
    for q, ids in enumerate(bins, start=1):
        for step in checkpoints:
            curves.loc[q, step] = table.accuracy(step).loc[list(ids)].mean()
    return curves


def median_split(table: ResultsTable, by: pd.Series) -> Tuple[List[str], List[str]]:
    """(lower half, upper half) of model ids, the lower half takes the odd one"""
    ids = table.sorted_ids(by.dropna())
    if len(ids) < 2:
        raise AnalysisError(f"median split needs at least 2 models, got {len(ids)}")
    cut = math.ceil(len(ids) / 2)
    return ids[:cut], ids[cut:]


def top_bottom_delta(table: ResultsTable, metric: str, checkpoints: Sequence[int] | None = None) -> pd.Series:
    """Mean accuracy of the top half minus the bottom half by metric, per step"""
    checkpoints = table.checkpoints if checkpoints is None else list(checkpoints)
    bottom, top = median_split(table, table.metric(metric))
    return pd.Series({step: table.accuracy(step).loc[top].mean() - table.accuracy(step).loc[bottom].mean() for step in checkpoints}, name=metric)


def split_by_final_accuracy(
    table: ResultsTable, checkpoints: Sequence[int] | None = None, metrics: Sequence[str] | None = None
) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Correlations among the worst and among the best half of the models by final accuracy"""
    worst, best = median_split(table, table.accuracy(table.final_step))
    return correlate_all(table.subset(worst), metrics, checkpoints), correlate_all(table.subset(best), metrics, checkpoints)


def metric_metric_correlation(table: ResultsTable, metrics: Sequence[str] | None = None) -> pd.DataFrame:
    metrics = table.metrics if metrics is None else list(metrics)
    rho = pd.DataFrame(index=pd.Index(metrics, name="metric"), columns=metrics, dtype=np.float64)
    for a in metrics:
        for b in metrics:
            rho.loc[a, b] = _pairwise(table.metric(a), table.metric(b))
    return rho


# ###############################
# Report
#
@dataclass
class CorrelationReport:
    correlations: pd.DataFrame
    quartiles: Dict[str, pd.DataFrame] = field(default_factory=dict)
    deltas: pd.DataFrame | None = None
    worst: pd.DataFrame | None = None
    best: pd.DataFrame | None = None
    metric_correlations: pd.DataFrame | None = None
    models: int = 0

    def to_dict(self) -> dict:
        def grid(frame: pd.DataFrame | None):
            if frame is None:
                return None
            return {str(r): {str(c): _finite(frame.loc[r, c]) for c in frame.columns} for r in frame.index}

        return {
            "models": self.models,
            "correlations": grid(self.correlations),
            "quartiles": {m: grid(q) for m, q in self.quartiles.items()},
            "top_bottom_delta": grid(self.deltas),
            "worst_half_correlations": grid(self.worst),
            "best_half_correlations": grid(self.best),
            "metric_metric_correlations": grid(self.metric_correlations),
        }


def _finite(value) -> float | None:
    value = float(value)
    return value if np.isfinite(value) else None


def analyze(table: ResultsTable, metrics: Sequence[str] | None = None, checkpoints: Sequence[int] | None = None) -> CorrelationReport:
    metrics = table.metrics if metrics is None else [m for m in metrics if m in table.metrics]
    if RECONSTRUCTION not in table.metrics:
        logger.debug("no reconstruction column, analysed without it")
    checkpoints = table.checkpoints if checkpoints is None else list(checkpoints)
    logger.info(f"analysing {len(table)} models, {len(metrics)} metrics, {len(checkpoints)} checkpoints..")
    report = CorrelationReport(correlations=correlate_all(table, metrics, checkpoints), models=len(table))
    if len(table) >= 4:
        report.quartiles = {m: quartile_curves(table, m, checkpoints) for m in metrics}
    else:
        logger.warning(f"only {len(table)} models, no quartile curves")
    if len(table) >= 2:
        report.deltas = pd.DataFrame({m: top_bottom_delta(table, m, checkpoints) for m in metrics}).T
        report.worst, report.best = split_by_final_accuracy(table, checkpoints, metrics)
    report.metric_correlations = metric_metric_correlation(table, metrics)
    logger.info("..analysis done")
    return report


def write_report(report: CorrelationReport, out_dir: str) -> List[str]:
    os.makedirs(out_dir, exist_ok=True)
    written = [os.path.join(out_dir, REPORT_FILE)]
    with open(written[0], "w") as fp:
        json.dump(report.to_dict(), fp, indent=2, sort_keys=True)
    tables = {
        "correlations.csv": report.correlations,
        "top_bottom_delta.csv": report.deltas,
        "worst_half_correlations.csv": report.worst,
        "best_half_correlations.csv": report.best,
        "metric_metric_correlations.csv": report.metric_correlations,
    }
    if len(report.quartiles) > 0:
        tables["quartiles.csv"] = pd.concat(report.quartiles, names=["metric"])
    for name, frame in tables.items():
        if frame is None:
            continue
        written.append(os.path.join(out_dir, name))
        frame.to_csv(written[-1], lineterminator="\n")
    return written


# ###############################
# Scores and curves files
#
def write_scores(rows: List[dict], path: str):
    frame = pd.DataFrame(rows, columns=SCORE_COLUMNS).sort_values(["model_id", "metric", "seed"], kind="mergesort")
    frame.to_csv(path, index=False, lineterminator="\n")


def write_curves(rows: List[dict], path: str):
    frame = pd.DataFrame(rows, columns=CURVE_COLUMNS).sort_values(["model_id", "step"], kind="mergesort")
    frame.to_csv(path, index=False, lineterminator="\n")
