"""Data sources: environment distributions, the attacker's empirical buffer,
and the dataset preprocessing pipeline (z-scoring, PCA, CSV ingestion)."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .core import DataPoint, as_generator
from .trajopt import stack_points


# ------------------------------------------------------------ environments


@dataclass(frozen=True)
class GaussianMixture1D:
    means: tuple
    weights: tuple
    stddev: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "means", tuple(float(m) for m in self.means))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.means) == 0 or len(self.means) != len(self.weights):
            raise ValueError("means and weights must be nonempty and of equal length")
        if min(self.weights) < 0 or abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError("weights must be a probability vector")
        if not self.stddev > 0:
            raise ValueError("stddev must be positive")

    @property
    def dim(self) -> int:
        return 1

    def sample_features(self, gen: np.random.Generator, n: int) -> np.ndarray:
        comp = gen.choice(len(self.means), size=n, p=np.asarray(self.weights))
        x = np.asarray(self.means)[comp] + self.stddev * gen.standard_normal(n)
        return x[:, None]


@dataclass(frozen=True)
class DatasetResample:
    """Uniform resampling, with replacement, from a finite dataset."""

    points: tuple

    def __post_init__(self):
        pts = tuple(self.points)
        if not pts:
            raise ValueError("dataset is empty")
        object.__setattr__(self, "points", pts)
        X, y = stack_points(pts)
        X.flags.writeable = False
        object.__setattr__(self, "_X", X)
        object.__setattr__(self, "_y", y)

    @property
    def dim(self) -> int:
        return self._X.shape[1]

    @property
    def labelled(self) -> bool:
        return self._y is not None


EnvironmentSpec = GaussianMixture1D | DatasetResample


def env_sample_arrays(spec, rng, n: int):
    """Draw ``n`` i.i.d. points as ``(features (n, d), labels (n,) or None)``."""
    gen = as_generator(rng)
    if isinstance(spec, GaussianMixture1D):
        return spec.sample_features(gen, n), None
    idx = gen.integers(0, len(spec.points), size=n)
    return spec._X[idx].copy(), (None if spec._y is None else spec._y[idx].copy())


def env_sample(spec, rng) -> DataPoint:
    X, y = env_sample_arrays(spec, rng, 1)
    return DataPoint(X[0], None if y is None else y[0])


# ------------------------------------------------------------ empirical buffer


class EmpiricalBuffer:
    """Everything the attacker has observed: pre-attack points then the stream.

    Sampling from the buffer realises the empirical distribution used as the
    planning model.
    """

    def __init__(self, dim: int, labelled: bool = False, pre_attack: Sequence[DataPoint] = ()):
        self.dim = int(dim)
        self.labelled = bool(labelled)
        self._X = np.empty((max(16, len(pre_attack)), self.dim))
        self._y = np.empty(self._X.shape[0])
        self._n = 0
        for p in pre_attack:
            self.push(p)
        self.pre_attack_count = self._n

    def __len__(self):
        return self._n

    def push(self, z: DataPoint) -> "EmpiricalBuffer":
        if z.dim != self.dim:
            raise ValueError(f"dimension mismatch: buffer holds {self.dim}-d points, got {z.dim}")
        if (z.label is not None) != self.labelled:
            raise ValueError("label presence does not match the buffer")
        if self._n == self._X.shape[0]:
            self._X = np.concatenate([self._X, np.empty_like(self._X)])
            self._y = np.concatenate([self._y, np.empty_like(self._y)])
        self._X[self._n] = z.features
        self._y[self._n] = z.label if self.labelled else 0.0
        self._n += 1
        return self

    def push_arrays(self, X: np.ndarray, y: Optional[np.ndarray] = None) -> "EmpiricalBuffer":
        for i in range(len(X)):
            self.push(DataPoint(X[i], None if y is None else y[i]))
        return self

    def __getitem__(self, i) -> DataPoint:
        if not -self._n <= i < self._n:
            raise IndexError(i)
        i %= self._n
        return DataPoint(self._X[i].copy(), self._y[i] if self.labelled else None)

    @property
    def features(self) -> np.ndarray:
        return self._X[: self._n]

    @property
    def labels(self) -> Optional[np.ndarray]:
        return self._y[: self._n] if self.labelled else None

    def sample_arrays(self, h: int, rng):
        if self._n == 0:
            raise ValueError("no data observed")
        if h < 1:
            raise ValueError("trajectory length must be >= 1")
        idx = as_generator(rng).integers(0, self._n, size=h)
        return self._X[idx].copy(), (self._y[idx].copy() if self.labelled else None)

    def sample_trajectory(self, h: int, rng) -> List[DataPoint]:
        X, y = self.sample_arrays(h, rng)
        return [DataPoint(X[i], None if y is None else y[i]) for i in range(h)]


def buffer_push(buf: EmpiricalBuffer, z: DataPoint) -> EmpiricalBuffer:
    return buf.push(z)


def buffer_sample_trajectory(buf: EmpiricalBuffer, h: int, rng) -> List[DataPoint]:
    return buf.sample_trajectory(h, rng)


# ------------------------------------------------------------ preprocessing


def _features(points) -> np.ndarray:
    if isinstance(points, np.ndarray):
        return np.asarray(points, dtype=np.float64)
    return stack_points(list(points))[0]


def _rebuild(points, X):
    if isinstance(points, np.ndarray):
        return X
    return [DataPoint(X[i], p.label) for i, p in enumerate(points)]


def zscore_fit_apply(points):
    """Standardise each feature to mean 0, population variance 1.

    Constant features map to 0. Accepts DataPoints or an ``(n, d)`` array and
    returns the same kind, plus the fitted mean and stddev.
    """
    X = _features(points)
    if X.shape[0] < 2:
        raise ValueError("z-scoring needs at least 2 points")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    centred = X - mean
    scale = np.where(std > 0, std, 1.0)
    Xn = np.where(std > 0, centred / scale, 0.0)
    return _rebuild(points, Xn), mean, std


@dataclass(frozen=True)
class PCAProjection:
    mean: np.ndarray
    basis: np.ndarray  # (d_target, d), orthonormal rows, descending eigenvalue
    eigenvalues: np.ndarray = field(default=None)

    @property
    def d_target(self) -> int:
        return self.basis.shape[0]

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) @ self.basis.T


def pca_fit(points, d_target: int, rank_tol: float = 1e-10) -> PCAProjection:
    X = _features(points)
    n, d = X.shape
    if not 1 <= d_target <= d:
        raise ValueError(f"d_target must lie in [1, {d}]")
    if n < d_target + 1:
        raise ValueError("insufficient rank")
    mean = X.mean(axis=0)
    cov = np.cov(X - mean, rowvar=False, ddof=1).reshape(d, d)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:d_target]
    evals = evals[order]
    if evals[-1] <= rank_tol * max(evals[0], 1.0):
        raise ValueError("insufficient rank")
    basis = evecs[:, order].T
    # deterministic sign: largest-magnitude entry of each row is positive
    signs = np.sign(basis[np.arange(d_target), np.argmax(np.abs(basis), axis=1)])
    basis = basis * signs[:, None]
    return PCAProjection(mean, np.ascontiguousarray(basis), evals)


def pca_apply(proj: PCAProjection, point):
    if isinstance(point, DataPoint):
        return DataPoint(proj.transform(point.features[None])[0], point.label)
    return proj.transform(point)


def preprocess(points: Sequence[DataPoint], d_target: int = 30) -> List[DataPoint]:
    """Z-score, PCA-reduce when dimension exceeds ``d_target``, then re-normalise."""
    out, _, _ = zscore_fit_apply(points)
    if out[0].dim > d_target:
        proj = pca_fit(out, d_target)
        out = [pca_apply(proj, p) for p in out]
        out, _, _ = zscore_fit_apply(out)
    return out


# ------------------------------------------------------------ CSV


def _parse_label_map(label_map) -> Optional[Dict[str, float]]:
    if label_map is None:
        return None
    return {str(k).strip(): float(v) for k, v in dict(label_map).items()}


def load_csv(path, label_column=None, header: bool = False, label_map=None) -> List[DataPoint]:
    """Read numeric rows into DataPoints.

    Args:
        path: comma-separated UTF-8 file.
        label_column: column index, or column name when ``header`` is set.
        header: whether the first row holds column names.
        label_map: raw label value -> {-1, +1}. Without one, labels already in
            {-1, +1} pass through and any other two distinct values map
            smaller -> -1, larger -> +1.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    names = None
    first_row = 1
    if header and rows:
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
        first_row = 2
    if not rows:
        raise ValueError("no rows")
    width = len(rows[0])
    col = None
    if label_column is not None:
        if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
            if names is None or label_column not in names:
                raise ValueError(f"unknown label column {label_column!r}")
            col = names.index(label_column)
        else:
            col = int(label_column) % width
    mapping = _parse_label_map(label_map)
    feats, raw_labels = [], []
    for r, row in enumerate(rows, start=first_row):
        if len(row) != width:
            raise ValueError(f"row {r}: expected {width} fields, got {len(row)}")
        vals = []
        for c, cell in enumerate(row):
            cell = cell.strip()
            if c == col:
                raw_labels.append(cell)
                continue
            try:
                vals.append(float(cell))
            except ValueError:
                raise ValueError(f"row {r}: non-numeric value {cell!r} in column {c}") from None
        feats.append(vals)
    X = np.asarray(feats, dtype=np.float64)
    if col is None:
        return [DataPoint(x) for x in X]
    y = _map_labels(raw_labels, mapping, first_row)
    return [DataPoint(X[i], y[i]) for i in range(len(X))]


def _map_labels(raw: List[str], mapping, first_row: int) -> List[float]:
    if mapping is not None:
        by_value = {}
        for k, v in mapping.items():
            try:
                by_value[float(k)] = v
            except ValueError:
                pass
        out = []
        for r, v in enumerate(raw, start=first_row):
            if v in mapping:
                out.append(mapping[v])
                continue
            try:
                out.append(by_value[float(v)])
            except (ValueError, KeyError):
                raise ValueError(f"row {r}: label {v!r} not in label map") from None
        return out
    try:
        vals = [float(v) for v in raw]
    except ValueError:
        distinct = sorted(set(raw))
    else:
        if set(vals) <= {-1.0, 1.0}:
            return vals
        distinct = sorted(set(vals))
        raw = vals
    if len(distinct) != 2:
        raise ValueError(f"expected two label values, found {len(distinct)}; supply a label map")
    lookup = {distinct[0]: -1.0, distinct[1]: 1.0}
    return [lookup[v] for v in raw]


def write_csv(path, points: Sequence[DataPoint]):
    """Write points as CSV: feature columns, then a ``label`` column if labelled."""
    X, y = stack_points(list(points))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        head = [f"x{i}" for i in range(X.shape[1])]
        if y is not None:
            head.append("label")
        w.writerow(head)
        for i in range(len(X)):
            row = [repr(float(v)) for v in X[i]]
            if y is not None:
                row.append(str(int(y[i])))
            w.writerow(row)
