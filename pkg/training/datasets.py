"""
Synthetic binary datasets: two moons, two overlapping ovals, and an extra
nuisance feature mixed from the label and noise.

Every generator is a pure function of its GenSpec (seeded numpy Generator).
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

LABEL_COLUMN = 'label'

# Ovals geometry: both ellipses share semi-axes, offset vertically so they overlap around y = 0
OVAL_UPPER_CENTER = (0.0, 0.5)
OVAL_LOWER_CENTER = (0.0, -0.5)
OVAL_SEMI_AXES = (2.0, 1.0)


@dataclass(frozen=True)
class GenSpec:
    n_samples: int
    noise: float = 0.1
    seed: int = 0
    nuisance_mix: Optional[float] = None

    def __post_init__(self):
        if self.n_samples < 2:
            raise ValueError(f"n_samples must be >= 2, got {self.n_samples}")
        if self.noise < 0:
            raise ValueError(f"noise must be >= 0, got {self.noise}")
        if self.nuisance_mix is not None and not 0.0 <= self.nuisance_mix <= 1.0:
            raise ValueError(f"nuisance_mix must lie in [0, 1], got {self.nuisance_mix}")


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if not self.feature_names:
            self.feature_names = [f"x{i}" for i in range(self.features.shape[1])]
        if self.features.shape[0] != self.labels.size:
            raise ValueError(f"{self.features.shape[0]} feature rows but {self.labels.size} labels")
        if len(self.feature_names) != self.features.shape[1]:
            raise ValueError(f"{len(self.feature_names)} names for {self.features.shape[1]} features")
        if not np.isin(self.labels, (0, 1)).all():
            raise ValueError("Labels must be 0 or 1")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> 'Dataset':
        return Dataset(self.features[rows], self.labels[rows], list(self.feature_names))

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.features, columns=self.feature_names)
        frame[LABEL_COLUMN] = self.labels
        return frame

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> 'Dataset':
        """Label column last; a frame without one gets all-zero labels"""
        if LABEL_COLUMN in frame.columns:
            names = [c for c in frame.columns if c != LABEL_COLUMN]
            labels = frame[LABEL_COLUMN].to_numpy()
        else:
            names = list(frame.columns)
            labels = np.zeros(len(frame), dtype=np.int64)
        return cls(frame[names].to_numpy(dtype=float), labels, [str(n) for n in names])

    @classmethod
    def read_csv(cls, path) -> 'Dataset':
        return cls.from_frame(pd.read_csv(path))

    def write_csv(self, path) -> None:
        out = Path(path)
        out.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(out, index=False, float_format='%.17g', lineterminator='\n')
        logger.info(f"💾 Wrote {self.n_rows} rows x {self.n_features} features to {out}")


def gen_moons(spec: GenSpec, normalize: bool = True) -> Dataset:
    """
    Two interleaved unit half-circles: label 0 is the upper arc centred at
    (0, 0), label 1 the lower arc centred at (1, 0.5). Rows are shuffled,
    then Gaussian noise of scale `spec.noise` is added to both coordinates.
    """
    rng = np.random.default_rng(spec.seed)
    n_outer = spec.n_samples // 2
    n_inner = spec.n_samples - n_outer
    outer = np.linspace(0.0, np.pi, n_outer)
    inner = np.linspace(0.0, np.pi, n_inner)
    X = np.vstack([
        np.column_stack([np.cos(outer), np.sin(outer)]),
        np.column_stack([1.0 - np.cos(inner), 0.5 - np.sin(inner)]),
    ])
    y = np.concatenate([np.zeros(n_outer, dtype=np.int64), np.ones(n_inner, dtype=np.int64)])

    order = rng.permutation(spec.n_samples)
    X, y = X[order], y[order]
    if spec.noise > 0:
        X = X + rng.normal(scale=spec.noise, size=X.shape)
    if normalize:
        X = X / np.max(np.abs(X))
    data = Dataset(X, y, ['x', 'y'])
    return _with_nuisance(data, spec)


def _inside_oval(X: np.ndarray, center: Tuple[float, float]) -> np.ndarray:
    a, b = OVAL_SEMI_AXES
    return ((X[:, 0] - center[0]) / a) ** 2 + ((X[:, 1] - center[1]) / b) ** 2 <= 1.0


def overlap_mask(X: np.ndarray) -> np.ndarray:
    """Rows lying inside both ovals, where either label is equally likely"""
    X = np.atleast_2d(X)
    return _inside_oval(X, OVAL_UPPER_CENTER) & _inside_oval(X, OVAL_LOWER_CENTER)


def overlap_centroid() -> np.ndarray:
    upper, lower = np.asarray(OVAL_UPPER_CENTER), np.asarray(OVAL_LOWER_CENTER)
    return 0.5 * (upper + lower)


def _sample_oval(rng: np.random.Generator, n: int, center: Tuple[float, float]) -> np.ndarray:
    a, b = OVAL_SEMI_AXES
    r = np.sqrt(rng.uniform(size=n))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    return np.column_stack([center[0] + a * r * np.cos(theta), center[1] + b * r * np.sin(theta)])


def gen_ovals(spec: GenSpec) -> Dataset:
    """
    Uniform points from two overlapping ellipses; label 1 for the upper one.

    `spec.noise` is unused: the overlap band is the only source of label noise.
    """
    rng = np.random.default_rng(spec.seed)
    n_upper = spec.n_samples // 2
    n_lower = spec.n_samples - n_upper
    X = np.vstack([_sample_oval(rng, n_upper, OVAL_UPPER_CENTER), _sample_oval(rng, n_lower, OVAL_LOWER_CENTER)])
    y = np.concatenate([np.ones(n_upper, dtype=np.int64), np.zeros(n_lower, dtype=np.int64)])
    order = rng.permutation(spec.n_samples)
    data = Dataset(X[order], y[order], ['x', 'y'])
    return _with_nuisance(data, spec)


def add_nuisance(data: Dataset, rho: float, seed: int) -> Dataset:
    """Append rho * label + (1 - rho) * N(0, 1) as a feature named 'nuisance'"""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(data.n_rows)
    column = rho * data.labels + (1.0 - rho) * noise
    return Dataset(np.column_stack([data.features, column]), data.labels.copy(), data.feature_names + ['nuisance'])


def _with_nuisance(data: Dataset, spec: GenSpec) -> Dataset:
    if spec.nuisance_mix is None:
        return data
    # derived seed so the nuisance stream does not reuse the geometry stream
    return add_nuisance(data, spec.nuisance_mix, spec.seed + 1)


def train_test_split(data: Dataset, test_fraction: float = 0.3, seed: int = 0) -> Tuple[Dataset, Dataset]:
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    order = np.random.default_rng(seed).permutation(data.n_rows)
    n_test = int(round(test_fraction * data.n_rows))
    return data.subset(np.sort(order[n_test:])), data.subset(np.sort(order[:n_test]))


GENERATORS = {
    'moons': gen_moons,
    'ovals': gen_ovals,
}


def generate(kind: str, spec: GenSpec) -> Dataset:
    try:
        generator = GENERATORS[kind]
    except KeyError:
        raise ValueError(f"Unknown dataset kind '{kind}'; choose from {sorted(GENERATORS)}")
    data = generator(spec)
    logger.info(f"🎲 Generated {kind}: {data.n_rows} rows, features {data.feature_names}")
    return data
