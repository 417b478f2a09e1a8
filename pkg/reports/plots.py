"""
Static SVG figures: credit-vs-value scatter per feature and a credit histogram panel.
"""
import logging
from pathlib import Path
from typing import List, Optional

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from training.datasets import Dataset  # noqa: E402

from .writers import ReportSchemaError, credit_column, credit_names  # noqa: E402

logger = logging.getLogger(__name__)

# byte-stable SVG: fixed element ids, no creation date
matplotlib.rcParams['svg.hashsalt'] = 'gig'
SVG_METADATA = {'Date': None}
LABEL_COLORS = {0: '#1f77b4', 1: '#d62728'}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format='svg', metadata=SVG_METADATA)
    plt.close(fig)
    return path


def credit_scatter(values: np.ndarray, credits: np.ndarray, labels: np.ndarray, name: str, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, color in LABEL_COLORS.items():
        mask = labels == label
        if mask.any():
            ax.scatter(values[mask], credits[mask], s=4, c=color, alpha=0.6, label=f"label {label}")
    ax.axhline(0.0, color='grey', linewidth=0.5)
    ax.set_xlabel(f"{name} value")
    ax.set_ylabel(f"credit to {name}")
    ax.legend(loc='best', fontsize='small')
    fig.tight_layout()
    return _save(fig, path)


def credit_histograms(frame: pd.DataFrame, names: List[str], path: Path, bins: int = 50) -> Path:
    fig, axes = plt.subplots(len(names), 1, figsize=(6, 2.2 * len(names)), squeeze=False)
    for ax, name in zip(axes[:, 0], names):
        credits = frame[credit_column(name)].dropna().to_numpy()
        ax.hist(credits, bins=bins, color='#555555')
        ax.set_title(f"credit to {name}", fontsize='small')
    fig.tight_layout()
    return _save(fig, path)


def plot_attributions(frame: pd.DataFrame, data: Dataset, out_dir, prefix: Optional[str] = None) -> List[Path]:
    """
    One scatter per feature plus one histogram figure.

    `frame` rows index into `data` through the `row` column.
    """
    if frame.empty:
        raise ReportSchemaError("Attribution table has no rows; nothing to plot")
    names = credit_names(frame)
    unknown = [n for n in names if n not in data.feature_names]
    if unknown:
        raise ReportSchemaError(f"Credit columns {unknown} are not dataset features {data.feature_names}")
    rows = frame['row'].to_numpy(dtype=np.int64)
    if rows.min() < 0 or rows.max() >= data.n_rows:
        raise ReportSchemaError(f"Row ids exceed the dataset's {data.n_rows} rows")

    out = Path(out_dir)
    prefix = f"{prefix}_" if prefix else ''
    labels = data.labels[rows]
    written = []
    for name in names:
        values = data.features[rows, data.feature_names.index(name)]
        credits = frame[credit_column(name)].to_numpy(dtype=float)
        written.append(credit_scatter(values, credits, labels, name, out / f"{prefix}scatter_{name}.svg"))
    written.append(credit_histograms(frame, names, out / f"{prefix}histograms.svg"))
    logger.info(f"🖼️  Wrote {len(written)} SVG files to {out}")
    return written
