"""
Celery tasks for explaining row chunks on workers
"""
import logging
from typing import Any, Dict, List

from celery import shared_task

from model_ir.serializers import graph_from_document

from .boundary import PathQuery
from .engine import EngineConfig, ExplainFailure, explain_batch

logger = logging.getLogger(__name__)


@shared_task
def explain_rows(model_doc: Dict[str, Any], rows: List[List[float]], baseline: List[float],
                 config: Dict[str, Any], first_index: int = 0) -> List[Dict[str, Any]]:
    """
    Explain `rows` against `baseline` with the model in `model_doc`.

    JSON in, JSON out: each item is an Attribution dict or a failure dict
    carrying `failed: true`. Failure indices are global row positions.
    """
    logger.info(f"🔄 Worker explaining rows {first_index}..{first_index + len(rows) - 1}")
    graph = graph_from_document(model_doc)
    queries = [PathQuery.for_graph(graph, baseline, row) for row in rows]
    outcomes = explain_batch(graph, queries, EngineConfig.from_dict(config))
    payload = []
    for outcome in outcomes:
        if isinstance(outcome, ExplainFailure):
            outcome.index += first_index
        payload.append(outcome.to_dict())
    return payload
