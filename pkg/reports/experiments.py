"""
Desk-scale synthetic experiments.

moons: how credit moves onto a nuisance feature as it goes from pure noise
       (rho = 0) through an equal mixture (0.5) to a copy of the label (1).
ovals: sign and size of credit for points above, below and inside the
       overlap of two ovals, explained against the overlap centroid.
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from attribution.boundary import PathQuery
from attribution.engine import Attribution, EngineConfig, Outcome, explain_batch
from training.datasets import (
    Dataset,
    GenSpec,
    gen_moons,
    gen_ovals,
    overlap_centroid,
    overlap_mask,
    train_test_split,
)
from training.gbm import TrainParams, predict_margin, roc_auc, to_graph, train_gbm

from .writers import attribution_frame

logger = logging.getLogger(__name__)

NUISANCE_MIXES = (0.0, 0.5, 1.0)


@dataclass
class ExperimentRun:
    """One trained model and its explained rows"""
    name: str
    data: Dataset
    baseline: np.ndarray
    row_ids: List[int]
    outcomes: List[Outcome]
    test_auc: float
    summary: Dict[str, Any] = field(default_factory=dict)

    @property
    def frame(self) -> pd.DataFrame:
        return attribution_frame(self.outcomes, self.data.feature_names, self.row_ids)

    @property
    def attributions(self) -> List[Attribution]:
        return [o for o in self.outcomes if isinstance(o, Attribution)]

    def credits(self) -> np.ndarray:
        """(explained rows, features) matrix of total credit"""
        rows = [a.total for a in self.attributions]
        return np.vstack(rows) if rows else np.zeros((0, self.data.n_features))


def _pick_rows(n_rows: int, n_explain: Optional[int], seed: int) -> List[int]:
    if n_explain is None or n_explain >= n_rows:
        return list(range(n_rows))
    picked = np.random.default_rng(seed).choice(n_rows, size=n_explain, replace=False)
    return sorted(int(i) for i in picked)


def _fit_and_explain(name: str, data: Dataset, params: TrainParams, baseline: Optional[np.ndarray],
                     n_explain: Optional[int], seed: int, config: Optional[EngineConfig],
                     jobs: int) -> ExperimentRun:
    config = config or EngineConfig.from_settings()
    train, test = train_test_split(data, 0.3, seed)
    ensemble = train_gbm(train, params)
    auc = roc_auc(test.labels, predict_margin(ensemble, test.features))
    graph = to_graph(ensemble, data.n_features)
    if baseline is None:
        baseline = np.median(train.features, axis=0)

    row_ids = _pick_rows(test.n_rows, n_explain, seed)
    queries = [PathQuery.for_graph(graph, baseline, test.features[i]) for i in row_ids]
    outcomes = explain_batch(graph, queries, config, jobs=jobs)
    logger.info(f"🧪 {name}: test AUC {auc:.4f}, explained {len(row_ids)} rows")
    return ExperimentRun(name, test, np.asarray(baseline, dtype=float), row_ids, outcomes, auc)


def _credit_summary(run: ExperimentRun) -> Dict[str, Any]:
    credits = run.credits()
    mean_abs = np.mean(np.abs(credits), axis=0) if credits.size else np.zeros(run.data.n_features)
    share = mean_abs / mean_abs.sum() if mean_abs.sum() > 0 else np.zeros_like(mean_abs)
    return {
        'test_auc': run.test_auc,
        'rows_explained': len(run.attributions),
        'rows_failed': len(run.outcomes) - len(run.attributions),
        'mean_abs_credit': dict(zip(run.data.feature_names, mean_abs.tolist())),
        'credit_share': dict(zip(run.data.feature_names, share.tolist())),
        'max_abs_residual': max((abs(a.efficiency_residual) for a in run.attributions), default=0.0),
    }


def moons_sensitivity(n_samples: int = 20000, noise: float = 0.1, params: Optional[TrainParams] = None,
                      mixes: Sequence[float] = NUISANCE_MIXES, n_explain: Optional[int] = 500, seed: int = 0,
                      config: Optional[EngineConfig] = None, jobs: int = 1) -> Tuple[List[ExperimentRun], Dict[str, Any]]:
    params = params or TrainParams(n_trees=25, max_depth=6, seed=seed)
    runs = []
    for rho in mixes:
        data = gen_moons(GenSpec(n_samples, noise, seed, nuisance_mix=rho))
        run = _fit_and_explain(f"moons_rho{rho:g}", data, params, None, n_explain, seed, config, jobs)
        run.summary = {'rho': rho, **_credit_summary(run)}
        runs.append(run)

    by_rho = {run.summary['rho']: run.summary for run in runs}
    checks: Dict[str, bool] = {}
    if 0.0 in by_rho:
        m = by_rho[0.0]['mean_abs_credit']
        checks['noise_nuisance_ignored'] = m['nuisance'] < 0.05 * m['x']
    if 1.0 in by_rho:
        m = by_rho[1.0]['mean_abs_credit']
        checks['label_nuisance_dominates'] = max(m['x'], m['y']) < 0.05 * m['nuisance']
    if {0.0, 0.5, 1.0} <= set(by_rho):
        shares = [by_rho[r]['credit_share']['nuisance'] for r in (0.0, 0.5, 1.0)]
        checks['mixture_between_regimes'] = shares[0] < shares[1] < shares[2]
    summary = {
        'experiment': 'moons',
        'n_samples': n_samples,
        'noise': noise,
        'params': asdict(params),
        'runs': [run.summary for run in runs],
        'checks': checks,
    }
    return runs, summary


def ovals_structure(n_samples: int = 5000, params: Optional[TrainParams] = None,
                    n_explain: Optional[int] = None, seed: int = 0,
                    config: Optional[EngineConfig] = None, jobs: int = 1) -> Tuple[List[ExperimentRun], Dict[str, Any]]:
    params = params or TrainParams(n_trees=50, max_depth=6, seed=seed)
    data = gen_ovals(GenSpec(n_samples, 0.0, seed))
    run = _fit_and_explain('ovals', data, params, overlap_centroid(), n_explain, seed, config, jobs)

    explained = [(i, o) for i, o in zip(run.row_ids, run.outcomes) if isinstance(o, Attribution)]
    ids = np.array([i for i, _ in explained], dtype=np.int64)
    totals = np.array([o.total.sum() for _, o in explained])
    if ids.size:
        inside = overlap_mask(run.data.features[ids])
        labels = run.data.labels[ids]
    else:
        inside = labels = np.zeros(0, dtype=bool)
    upper = (labels == 1) & ~inside
    lower = (labels == 0) & ~inside

    def rate(mask, sign):
        return float(np.mean(sign * totals[mask] > 0)) if mask.any() else float('nan')

    def median_abs(mask):
        return float(np.median(np.abs(totals[mask]))) if mask.any() else float('nan')

    stats = {
        'upper_positive_rate': rate(upper, 1.0),
        'lower_negative_rate': rate(lower, -1.0),
        'overlap_median_abs': median_abs(inside),
        'outside_median_abs': median_abs(~inside),
        'overlap_rows': int(inside.sum()),
    }
    run.summary = {**_credit_summary(run), **stats}
    checks = {
        'upper_positive': stats['upper_positive_rate'] >= 0.8,
        'lower_negative': stats['lower_negative_rate'] >= 0.8,
        'overlap_small': stats['overlap_median_abs'] < 0.25 * stats['outside_median_abs'],
    }
    summary = {
        'experiment': 'ovals',
        'n_samples': n_samples,
        'params': asdict(params),
        'baseline': run.baseline.tolist(),
        'runs': [run.summary],
        'checks': checks,
    }
    return [run], summary


EXPERIMENTS = {
    'moons': moons_sensitivity,
    'ovals': ovals_structure,
}
