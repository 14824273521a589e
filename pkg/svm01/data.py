# svm01/data.py
"""
Datasets: LIBSVM text I/O, feature-wise [-1, 1] scaling, the two-Gaussian
synthetic generator, holdout splits and k-fold plans.

Randomness comes from numpy's Generator (PCG64 bit generator, ziggurat
normals), so a seed reproduces a dataset bit-for-bit within one numpy version.
"""

import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field
from sklearn.datasets import dump_svmlight_file, load_svmlight_file

from svm01.errors import DataFormatError, InputError
from svm01.linalg import DenseMatrix, DenseVector, IndexSet

logger = logging.getLogger("svm01.data")

# s-grid fractions for cross-validation: 0.001p..0.009p, 0.01p..0.09p, 0.1p..p
DEFAULT_S_FRACTIONS = tuple(
    [i / 1000 for i in range(1, 10)] + [i / 100 for i in range(1, 10)] + [i / 10 for i in range(1, 11)]
)


# ───────────────────────────────────────────────
# TYPES
# ───────────────────────────────────────────────
@dataclass(frozen=True)
class Scaling:
    lo: DenseVector
    hi: DenseVector


@dataclass(frozen=True)
class Dataset:
    features: DenseMatrix
    labels: DenseVector
    scaling: Scaling | None = None
    source: str = ""
    flipped: IndexSet | None = None  # synthetic only: indices whose labels were flipped

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def clean_labels(self) -> DenseVector:
        if self.flipped is None:
            return self.labels
        clean = self.labels.copy()
        clean[self.flipped] *= -1
        return clean


class SyntheticSpec(BaseModel):
    m: int = Field(ge=2)
    n: int = Field(ge=1)
    mu1: float | list[float] = 0.3
    mu2: float | list[float] = -0.3
    sigma1: float | list[float] = 1.0  # diagonal covariance (variances)
    sigma2: float | list[float] = 1.0
    noise_ratio: float = Field(default=0.0, ge=0.0, lt=1.0)
    seed: int = 0


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: IndexSet
    seed: int

    def test_indices(self, fold: int) -> IndexSet:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> IndexSet:
        return np.flatnonzero(self.assignments != fold)


# ───────────────────────────────────────────────
# LIBSVM I/O
# ───────────────────────────────────────────────
def _map_label(raw: str, lineno: int) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise DataFormatError(f"bad label {raw!r}", lineno) from None
    if value in (0.0, -1.0):
        return -1.0
    if value == 1.0:
        return 1.0
    raise DataFormatError(f"label {raw!r} is not binary", lineno)


def _check_line(tokens: list[str], lineno: int) -> None:
    _map_label(tokens[0], lineno)
    last = 0
    for tok in tokens[1:]:
        key, sep, value = tok.partition(":")
        if not sep:
            raise DataFormatError(f"expected idx:val, got {tok!r}", lineno)
        try:
            i, v = int(key), float(value)
        except ValueError:
            raise DataFormatError(f"bad feature {tok!r}", lineno) from None
        if i <= last:
            raise DataFormatError(f"indices must be 1-based and ascending (got {i} after {last})", lineno)
        if not math.isfinite(v):
            raise DataFormatError(f"non-finite value {tok!r}", lineno)
        last = i


def _locate_bad_line(path: str | Path, cause: str) -> DataFormatError:
    """Rescan a file the loader rejected and pin the first offending line."""
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            tokens = raw.split("#", 1)[0].split()
            if tokens:
                try:
                    _check_line(tokens, lineno)
                except DataFormatError as exc:
                    return exc
    return DataFormatError(cause)


def _has_samples(path: Path) -> bool:
    with open(path, encoding="utf-8") as fh:
        return any(raw.split("#", 1)[0].strip() for raw in fh)


def read_libsvm(path: str | Path, n_features: int | None = None) -> Dataset:
    """
    Load `<label> <idx>:<val> ...` lines (1-based ascending indices, `#`
    comments) into a dense dataset. Missing indices are zero; label 0 maps to -1.
    """
    path = Path(path)
    if not _has_samples(path):
        logger.info("[DATA][READ] path=%s m=0 n=%d", path, n_features or 0)
        return Dataset(features=np.zeros((0, n_features or 0)), labels=np.zeros(0), source=str(path))

    try:
        X, y = load_svmlight_file(str(path), zero_based=False, dtype=np.float64)
    except ValueError as exc:
        raise _locate_bad_line(path, str(exc)) from exc

    labels = np.where(y == 0.0, -1.0, y)
    if not np.isin(labels, (-1.0, 1.0)).all() or not np.isfinite(X.data).all():
        raise _locate_bad_line(path, "labels must be in {-1, 0, 1} and values finite")

    width = X.shape[1] if n_features is None else n_features
    if width < X.shape[1]:
        raise InputError(f"file uses feature {X.shape[1]} but n_features={n_features}")

    features = np.zeros((X.shape[0], width))
    features[:, : X.shape[1]] = X.toarray()

    logger.info("[DATA][READ] path=%s m=%d n=%d", path, features.shape[0], features.shape[1])
    return Dataset(features=features, labels=labels, source=str(path))


def write_libsvm(d: Dataset, path: str | Path) -> None:
    dump_svmlight_file(d.features, d.labels.astype(np.int64), str(path), zero_based=False)
    logger.info("[DATA][WRITE] path=%s m=%d n=%d", path, d.m, d.n_features)


# ───────────────────────────────────────────────
# SCALING
# ───────────────────────────────────────────────
def apply_scaling(d: Dataset, scaling: Scaling) -> Dataset:
    """
    Affine map with the given per-feature (lo, hi). Values outside the
    recorded range land outside [-1, 1]; constant features map to 0.
    """
    if scaling.lo.shape[0] != d.n_features:
        raise InputError(f"scaling has {scaling.lo.shape[0]} features, data has {d.n_features}")
    span = scaling.hi - scaling.lo
    safe = np.where(span > 0, span, 1.0)
    X = np.where(span > 0, 2.0 * (d.features - scaling.lo) / safe - 1.0, 0.0)
    return replace(d, features=X, scaling=scaling)


def scale_features(d: Dataset) -> Dataset:
    if d.m == 0:
        zeros = np.zeros(d.n_features)
        return replace(d, scaling=Scaling(zeros, zeros.copy()))
    scaling = Scaling(lo=d.features.min(axis=0), hi=d.features.max(axis=0))
    return apply_scaling(d, scaling)


# ───────────────────────────────────────────────
# SYNTHETIC DATA
# ───────────────────────────────────────────────
def _broadcast(value: float | list[float], n: int, name: str) -> DenseVector:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise InputError(f"{name} has length {arr.shape[0]}, expected {n}")
    return arr


def flip_count(noise_ratio: float, m: int) -> int:
    """Round half up, so r*m = 12.5 flips 13 samples."""
    return int(math.floor(noise_ratio * m + 0.5))


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    if not 0.0 <= spec.noise_ratio < 1.0:
        raise InputError(f"noise ratio must lie in [0, 1), got {spec.noise_ratio}")

    mu1 = _broadcast(spec.mu1, spec.n, "mu1")
    mu2 = _broadcast(spec.mu2, spec.n, "mu2")
    sd1 = np.sqrt(_broadcast(spec.sigma1, spec.n, "sigma1"))
    sd2 = np.sqrt(_broadcast(spec.sigma2, spec.n, "sigma2"))

    rng = np.random.default_rng(spec.seed)
    n_pos = spec.m // 2
    n_neg = spec.m - n_pos
    X = np.vstack([
        mu1 + sd1 * rng.standard_normal((n_pos, spec.n)),
        mu2 + sd2 * rng.standard_normal((n_neg, spec.n)),
    ])
    y = np.concatenate([np.ones(n_pos), -np.ones(n_neg)])

    order = rng.permutation(spec.m)
    X, y = X[order], y[order]

    flipped = np.sort(rng.choice(spec.m, size=flip_count(spec.noise_ratio, spec.m), replace=False))
    y[flipped] *= -1

    logger.info(
        "[DATA][SYNTHETIC] m=%d n=%d r=%.3f flipped=%d seed=%d",
        spec.m, spec.n, spec.noise_ratio, flipped.size, spec.seed,
    )
    return Dataset(
        features=X,
        labels=y,
        source=f"synthetic(m={spec.m},n={spec.n},r={spec.noise_ratio},seed={spec.seed})",
        flipped=flipped.astype(np.intp),
    )


# ───────────────────────────────────────────────
# SPLITS
# ───────────────────────────────────────────────
def subset(d: Dataset, idx: IndexSet) -> Dataset:
    flipped = None
    if d.flipped is not None:
        # re-index the flipped set into the subset's row numbering
        flipped = np.flatnonzero(np.isin(idx, d.flipped))
    return replace(d, features=d.features[idx], labels=d.labels[idx], flipped=flipped)


def make_folds(m: int, k: int, seed: int) -> FoldPlan:
    if k < 2 or k > m:
        raise InputError(f"need 2 <= k <= m, got k={k}, m={m}")
    perm = np.random.default_rng(seed).permutation(m)
    assignments = np.empty(m, dtype=np.intp)
    assignments[perm] = np.arange(m) % k
    return FoldPlan(k=k, assignments=assignments, seed=seed)


def split(d: Dataset, plan: FoldPlan, fold: int) -> tuple[Dataset, Dataset]:
    if plan.assignments.shape[0] != d.m:
        raise InputError("fold plan does not match the dataset size")
    if not 0 <= fold < plan.k:
        raise InputError(f"fold {fold} outside [0, {plan.k})")
    return subset(d, plan.train_indices(fold)), subset(d, plan.test_indices(fold))


def holdout_split(d: Dataset, fraction: float = 0.5, seed: int = 0) -> tuple[Dataset, Dataset]:
    if not 0.0 < fraction < 1.0:
        raise InputError("train fraction must lie in (0, 1)")
    perm = np.random.default_rng(seed).permutation(d.m)
    n_train = int(math.floor(fraction * d.m))
    return subset(d, np.sort(perm[:n_train])), subset(d, np.sort(perm[n_train:]))


def s_grid(p: int, fractions: tuple[float, ...] = DEFAULT_S_FRACTIONS) -> list[int]:
    """Sorted distinct ceil(f * p) candidates for the sparsity level."""
    return sorted({max(1, math.ceil(f * p - 1e-12)) for f in fractions})
