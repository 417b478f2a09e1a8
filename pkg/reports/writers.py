"""
Tabular and JSON emitters for attribution results.

CSV columns: row, credit_<feature>..., efficiency_residual, f_baseline, f_row, error
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from attribution.engine import Attribution, ExplainFailure, Outcome

logger = logging.getLogger(__name__)

CREDIT_PREFIX = 'credit_'
TRAILING_COLUMNS = ['efficiency_residual', 'f_baseline', 'f_row', 'error']


class ReportSchemaError(ValueError):
    """An attribution table does not have the columns `explain` writes"""


def credit_column(name: str) -> str:
    return f"{CREDIT_PREFIX}{name}"


def attribution_frame(outcomes: Sequence[Outcome], feature_names: Sequence[str],
                      row_ids: Optional[Sequence[int]] = None) -> pd.DataFrame:
    """One row per outcome in input order; failed rows keep their id with empty credits"""
    row_ids = list(row_ids) if row_ids is not None else list(range(len(outcomes)))
    records: List[Dict[str, Any]] = []
    for row_id, outcome in zip(row_ids, outcomes):
        record: Dict[str, Any] = {'row': int(row_id)}
        if isinstance(outcome, Attribution):
            record.update({credit_column(n): float(c) for n, c in zip(feature_names, outcome.total)})
            record.update(efficiency_residual=outcome.efficiency_residual,
                          f_baseline=outcome.f_start, f_row=outcome.f_end, error='')
        else:
            record.update({credit_column(n): np.nan for n in feature_names})
            record.update(efficiency_residual=np.nan, f_baseline=np.nan, f_row=np.nan,
                          error=f"{outcome.error_type}: {outcome.message}")
        records.append(record)
    columns = ['row'] + [credit_column(n) for n in feature_names] + TRAILING_COLUMNS
    return pd.DataFrame.from_records(records, columns=columns)


def write_attribution_csv(frame: pd.DataFrame, path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out, index=False, float_format='%.17g', lineterminator='\n')
    logger.info(f"💾 Attribution table ({len(frame)} rows) written to {out}")
    return out


def attribution_document(outcomes: Sequence[Outcome], feature_names: Sequence[str], baseline: Sequence[float],
                         row_ids: Optional[Sequence[int]] = None,
                         extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """The JSON mirror: per-row zeta / iota / integral decomposition"""
    row_ids = list(row_ids) if row_ids is not None else list(range(len(outcomes)))
    rows = []
    for row_id, outcome in zip(row_ids, outcomes):
        entry = outcome.to_dict()
        if isinstance(outcome, ExplainFailure):
            entry['index'] = int(row_id)
        rows.append({'row': int(row_id), **entry})
    doc = {
        'feature_names': list(feature_names),
        'baseline': [float(b) for b in baseline],
        'rows': rows,
    }
    if extra:
        doc.update(extra)
    return doc


def write_json(doc: Dict[str, Any], path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, 'w', encoding='utf-8') as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write('\n')
    logger.info(f"💾 JSON written to {out}")
    return out


def read_attribution_csv(path) -> pd.DataFrame:
    frame = pd.read_csv(path, keep_default_na=True)
    missing = [c for c in ['row', 'efficiency_residual', 'f_baseline', 'f_row'] if c not in frame.columns]
    if missing:
        raise ReportSchemaError(f"{path} is missing columns {missing}")
    if not credit_names(frame):
        raise ReportSchemaError(f"{path} has no {CREDIT_PREFIX}* columns")
    return frame


def credit_names(frame: pd.DataFrame) -> List[str]:
    return [c[len(CREDIT_PREFIX):] for c in frame.columns if c.startswith(CREDIT_PREFIX)]
