"""
Explain jobs: a model file, a dataset, a baseline and the rows to explain.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from model_ir.exceptions import ArityMismatch
from model_ir.graph import CompositionGraph
from model_ir.serializers import graph_to_document, read_model
from training.datasets import Dataset

from .boundary import PathQuery
from .engine import EngineConfig, Outcome, explain_batch, outcome_from_dict
from .tasks import explain_rows

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 256


def parse_rows(value: Optional[str]) -> Optional[List[int]]:
    """'all' / None -> every row; otherwise a comma list of indices and a-b ranges"""
    if value is None or value.strip().lower() == 'all':
        return None
    rows: List[int] = []
    for part in value.split(','):
        part = part.strip()
        if not part:
            continue
        if '-' in part[1:]:
            lo, hi = part.split('-', 1)
            rows.extend(range(int(lo), int(hi) + 1))
        else:
            rows.append(int(part))
    return rows


@dataclass
class ExplainJob:
    model_path: str
    data_path: str
    baseline_row: Optional[int] = None  # None: feature-wise median of the dataset
    rows: Optional[List[int]] = None  # None: every row
    config: EngineConfig = field(default_factory=EngineConfig)

    def load(self) -> Tuple[CompositionGraph, Dataset]:
        graph = read_model(self.model_path)
        data = Dataset.read_csv(self.data_path)
        if data.n_features != graph.n_features:
            raise ArityMismatch(
                f"Model reads {graph.n_features} features but {self.data_path} has {data.n_features}")
        return graph, data

    def baseline(self, data: Dataset) -> np.ndarray:
        if self.baseline_row is None:
            return np.median(data.features, axis=0)
        if not 0 <= self.baseline_row < data.n_rows:
            raise IndexError(f"Baseline row {self.baseline_row} outside 0..{data.n_rows - 1}")
        return data.features[self.baseline_row].copy()

    def row_ids(self, data: Dataset) -> List[int]:
        if self.rows is None:
            return list(range(data.n_rows))
        bad = [r for r in self.rows if not 0 <= r < data.n_rows]
        if bad:
            raise IndexError(f"Rows {bad} outside 0..{data.n_rows - 1}")
        return list(self.rows)


def explain_rows_local(graph: CompositionGraph, data: Dataset, baseline: np.ndarray, row_ids: Sequence[int],
                       config: EngineConfig, jobs: int = 1, progress: bool = False) -> List[Outcome]:
    queries = [PathQuery.for_graph(graph, baseline, data.features[i]) for i in row_ids]
    return explain_batch(graph, queries, config, jobs=jobs, progress=progress)


def explain_rows_celery(graph: CompositionGraph, data: Dataset, baseline: np.ndarray, row_ids: Sequence[int],
                        config: EngineConfig, chunk_size: int = DEFAULT_CHUNK_SIZE) -> List[Outcome]:
    """Dispatch row chunks to workers and reassemble the outcomes in input order"""
    doc = graph_to_document(graph)
    pending = []
    for start in range(0, len(row_ids), chunk_size):
        chunk = row_ids[start:start + chunk_size]
        rows = [data.features[i].tolist() for i in chunk]
        pending.append(explain_rows.delay(doc, rows, baseline.tolist(), config.to_dict(), start))
    logger.info(f"📨 Dispatched {len(pending)} chunk(s) of up to {chunk_size} rows")
    outcomes: List[Outcome] = []
    for result in pending:
        outcomes.extend(outcome_from_dict(item) for item in result.get())
    return outcomes
