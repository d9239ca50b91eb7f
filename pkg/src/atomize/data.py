"""Synthetic two-Gaussian mixture dataset: each point is five 2-D features."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, asdict

import numpy as np

from .seeding import stream

N_FEATURES = 5
DIM = 2
# per-axis variance chosen so the cross-entropy model lands near 87-89% test accuracy
CALIBRATED_VARIANCE = 0.49
DEFAULT_N = 2000
DEFAULT_TRAIN_FRACTION = 0.5


@dataclass(frozen=True)
class GmmSpec:
    mean_0: tuple = (-1.0, -1.0)
    mean_1: tuple = (1.0, 1.0)
    cov_0: tuple = ((CALIBRATED_VARIANCE, 0.0), (0.0, CALIBRATED_VARIANCE))
    cov_1: tuple = ((CALIBRATED_VARIANCE, 0.0), (0.0, CALIBRATED_VARIANCE))
    # probability that a feature is drawn from component 0
    mix: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.mix < 1.0:
            raise ValueError(f"mix must lie in (0, 1), got {self.mix}")
        for name in ("mean_0", "mean_1"):
            if np.shape(getattr(self, name)) != (DIM,):
                raise ValueError(f"{name} must be a {DIM}-vector")
        for name in ("cov_0", "cov_1"):
            covariance_factor(getattr(self, name))

    @classmethod
    def isotropic(cls, variance: float, **kw) -> GmmSpec:
        cov = ((variance, 0.0), (0.0, variance))
        return cls(cov_0=cov, cov_1=cov, **kw)

    def to_dict(self) -> dict:
        return {k: np.asarray(v).tolist() if not isinstance(v, float) else v
                for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> GmmSpec:
        def tup(x):
            return tuple(tup(v) for v in x) if isinstance(x, (list, tuple)) else float(x)
        return cls(**{k: tup(v) for k, v in d.items()})


def covariance_factor(cov) -> np.ndarray:
    """Lower factor ``L`` with ``L @ L.T == cov``.

    Positive semi-definite covariances are accepted so the zero-variance
    limit (every feature exactly at its mean) can be generated.
    """
    cov = np.asarray(cov, dtype=np.float64)
    if cov.shape != (DIM, DIM):
        raise ValueError(f"covariance must be {DIM}x{DIM}, got {cov.shape}")
    if not np.allclose(cov, cov.T, rtol=0, atol=1e-12):
        raise ValueError("covariance must be symmetric")
    evals, evecs = np.linalg.eigh(cov)
    if evals.min() < -1e-12:
        raise ValueError("covariance must be positive semi-definite")
    if evals.min() > 0:
        return np.linalg.cholesky(cov)
    return evecs * np.sqrt(np.clip(evals, 0.0, None))


def box_muller(rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` standard normals from pairs of uniforms."""
    m = (n + 1) // 2
    u1 = 1.0 - rng.random(m)  # (0, 1] so the log is finite
    u2 = rng.random(m)
    radius = np.sqrt(-2.0 * np.log(u1))
    out = np.empty(2 * m)
    out[0::2] = radius * np.cos(2.0 * np.pi * u2)
    out[1::2] = radius * np.sin(2.0 * np.pi * u2)
    return out[:n]


@dataclass
class SyntheticDataset:
    points: np.ndarray  # N x 5 x 2
    labels: np.ndarray  # N
    sources: np.ndarray  # N x 5, True where the feature came from component 1
    spec: GmmSpec = field(default_factory=GmmSpec)
    seed: int = 0
    split: np.ndarray | None = None  # N strings, "train" / "test"
    point_ids: np.ndarray | None = None

    def __post_init__(self):
        if self.point_ids is None:
            self.point_ids = np.arange(len(self.labels))

    def __len__(self):
        return len(self.labels)

    def subset(self, idx) -> SyntheticDataset:
        idx = np.asarray(idx)
        if idx.dtype != bool:
            idx = idx.astype(np.intp)
        return SyntheticDataset(self.points[idx], self.labels[idx], self.sources[idx], self.spec,
                                self.seed, None if self.split is None else self.split[idx],
                                self.point_ids[idx])

    def part(self, name: str) -> SyntheticDataset:
        if self.split is None:
            raise ValueError("dataset has no train/test assignment")
        return self.subset(np.flatnonzero(self.split == name))

    @property
    def train(self):
        return self.part("train")

    @property
    def test(self):
        return self.part("test")


def generate(spec: GmmSpec, n: int, seed: int, train_fraction: float | None = None) -> SyntheticDataset:
    """Draw ``n`` points; label 1 iff at least 3 of the 5 features came from component 1."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    rng = stream(seed, "data")
    sources = rng.random((n, N_FEATURES)) >= spec.mix
    normals = box_muller(rng, n * N_FEATURES * DIM).reshape(n, N_FEATURES, DIM)
    means = np.where(sources[..., None], np.asarray(spec.mean_1), np.asarray(spec.mean_0))
    L0, L1 = covariance_factor(spec.cov_0), covariance_factor(spec.cov_1)
    noise = np.where(sources[..., None], normals @ L1.T, normals @ L0.T)
    points = means + noise
    labels = (sources.sum(axis=1) > N_FEATURES // 2).astype(int)
    ds = SyntheticDataset(points, labels, sources, spec, seed)
    if train_fraction is not None:
        train, _ = split_indices(n, train_fraction, seed)
        assignment = np.full(n, "test", dtype=object)
        assignment[train] = "train"
        ds.split = assignment
    return ds


def split_indices(n: int, train_fraction: float, seed: int):
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    order = stream(seed, "split").permutation(n)
    n_train = int(round(train_fraction * n))
    return np.sort(order[:n_train]), np.sort(order[n_train:])


def split(dataset: SyntheticDataset, train_fraction: float, seed: int):
    """Disjoint shuffled train/test partition."""
    train, test = split_indices(len(dataset), train_fraction, seed)
    return dataset.subset(train), dataset.subset(test)


CSV_COLUMNS = ["point_id", "feature_idx", "x", "y", "source_component", "label", "split"]


def to_csv(dataset: SyntheticDataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for k in range(len(dataset)):
        tag = "" if dataset.split is None else dataset.split[k]
        for f in range(N_FEATURES):
            x, y = dataset.points[k, f]
            w.writerow([int(dataset.point_ids[k]), f, repr(float(x)), repr(float(y)),
                        int(dataset.sources[k, f]), int(dataset.labels[k]), tag])
    return buf.getvalue()


def from_csv(text: str, spec: GmmSpec | None = None, seed: int = 0) -> SyntheticDataset:
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows or list(rows[0].keys()) != CSV_COLUMNS:
        raise ValueError(f"dataset CSV must have header {CSV_COLUMNS}")
    ids = sorted({int(r["point_id"]) for r in rows})
    pos = {pid: k for k, pid in enumerate(ids)}
    n = len(ids)
    points = np.zeros((n, N_FEATURES, DIM))
    sources = np.zeros((n, N_FEATURES), dtype=bool)
    labels = np.zeros(n, dtype=int)
    splits = np.full(n, "", dtype=object)
    seen = np.zeros((n, N_FEATURES), dtype=bool)
    for r in rows:
        k, f = pos[int(r["point_id"])], int(r["feature_idx"])
        points[k, f] = float(r["x"]), float(r["y"])
        sources[k, f] = bool(int(r["source_component"]))
        labels[k] = int(r["label"])
        splits[k] = r["split"]
        seen[k, f] = True
    if not seen.all():
        raise ValueError("dataset CSV is missing feature rows")
    has_split = all(s in ("train", "test") for s in splits)
    return SyntheticDataset(points, labels, sources, spec or GmmSpec(), seed,
                            splits if has_split else None, np.asarray(ids))


def default_dataset(seed: int = 0, n: int = DEFAULT_N) -> SyntheticDataset:
    """The calibrated mixture, split half train, half test."""
    return generate(GmmSpec(), n, seed, train_fraction=DEFAULT_TRAIN_FRACTION)
