"""Datasets, deterministic splits, class weights, synthetic blobs, and file I/O.

A dataset is split into four disjoint index sets: a training set for the
annotator model, a small labeled validation part ``val_labeled``, a large
unlabeled validation pool ``val_pool``, and a held-out test set. Splits are
fraction-driven, optionally stratified, and fully determined by the seed.

Feature files are CSV with a one-line header ``# classes=<C> dim=<d>``
followed by ``d`` comma-separated reals and one integer label per row.
Model checkpoints are a flat binary format (see :func:`save_network`).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ParseError, ShapeError
from .nn import LayerSpec, Network

CHECKPOINT_MAGIC = b"UALNET01"

_ACTIVATION_CODES = {"identity": 0, "relu": 1, "leaky_relu": 2, "sigmoid": 3, "softmax": 4}
_CODE_ACTIVATIONS = {v: k for k, v in _ACTIVATION_CODES.items()}


@dataclass
class Dataset:
    """Feature matrix ``X`` (n, d), integer labels ``y``, and the class count."""

    X: np.ndarray
    y: np.ndarray
    class_count: int

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[0] < 1 or self.X.shape[1] < 1:
            raise ValueError("X must be a non-empty 2-D matrix")
        if self.y.ndim != 1 or self.y.shape[0] != self.X.shape[0]:
            raise ShapeError("y must have one label per row of X")
        if self.class_count < 1:
            raise ValueError("class_count must be >= 1")
        if self.y.min() < 0 or self.y.max() >= self.class_count:
            raise ValueError(f"labels must lie in [0, {self.class_count})")

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.class_count)


@dataclass(frozen=True)
class SplitSpec:
    """Fractions for train/val/test plus how much of val starts out labeled."""

    train_fraction: float
    val_fraction: float
    test_fraction: float
    val_labeled_count: int
    stratified: bool = True
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_fraction, self.val_fraction, self.test_fraction)
        if any(f <= 0 for f in fracs):
            raise ValueError("all split fractions must be positive")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")
        if self.val_labeled_count < 0:
            raise ValueError("val_labeled_count must be non-negative")


@dataclass(frozen=True)
class Split:
    """Four pairwise-disjoint index sets that cover the dataset exactly."""

    train: np.ndarray
    val_labeled: np.ndarray
    val_pool: np.ndarray
    test: np.ndarray


def _allocate(total: int, fractions) -> np.ndarray:
    """Integer allocation of ``total`` by largest remainder; sums exactly."""
    exact = np.asarray(fractions, dtype=np.float64) * total
    base = np.floor(exact).astype(np.int64)
    short = total - int(base.sum())
    order = np.argsort(-(exact - base), kind="stable")
    base[order[:short]] += 1
    return base


def split(ds: Dataset, spec: SplitSpec) -> Split:
    """Deterministically partition a dataset per ``spec``.

    Stratified splits allocate each class by largest remainder, keeping every
    split's class counts within one sample of the exact proportion; the
    labeled part of val is stratified the same way. Raises if stratification
    would leave any class absent from one of the three splits.
    """
    rng = np.random.default_rng(spec.seed)
    fractions = (spec.train_fraction, spec.val_fraction, spec.test_fraction)
    if spec.stratified:
        parts: list[list[np.ndarray]] = [[], [], []]
        for c in range(ds.class_count):
            idx = np.flatnonzero(ds.y == c)
            rng.shuffle(idx)
            counts = _allocate(len(idx), fractions)
            if np.any(counts == 0):
                raise ValueError(
                    f"class {c} has {len(idx)} samples; stratified split would "
                    "leave it absent from one split"
                )
            bounds = np.cumsum(counts)
            parts[0].append(idx[: bounds[0]])
            parts[1].append(idx[bounds[0] : bounds[1]])
            parts[2].append(idx[bounds[1] :])
        train_idx, val_idx, test_idx = (np.concatenate(p) for p in parts)
        for arr in (train_idx, val_idx, test_idx):
            rng.shuffle(arr)
    else:
        perm = rng.permutation(ds.n_samples)
        counts = _allocate(ds.n_samples, fractions)
        bounds = np.cumsum(counts)
        train_idx = perm[: bounds[0]]
        val_idx = perm[bounds[0] : bounds[1]]
        test_idx = perm[bounds[1] :]

    if spec.val_labeled_count > len(val_idx):
        raise ValueError(
            f"val_labeled_count {spec.val_labeled_count} exceeds the "
            f"validation split size {len(val_idx)}"
        )
    if spec.stratified and spec.val_labeled_count:
        val_y = ds.y[val_idx]
        val_class_counts = np.bincount(val_y, minlength=ds.class_count)
        take = _allocate(spec.val_labeled_count, val_class_counts / len(val_idx))
        take = np.minimum(take, val_class_counts)
        # Rounding against small classes is rebalanced onto the largest ones.
        missing = spec.val_labeled_count - int(take.sum())
        while missing > 0:
            room = val_class_counts - take
            grow = int(np.argmax(room))
            take[grow] += 1
            missing -= 1
        labeled_parts, pool_parts = [], []
        for c in range(ds.class_count):
            idx_c = val_idx[val_y == c]
            labeled_parts.append(idx_c[: take[c]])
            pool_parts.append(idx_c[take[c] :])
        vl = np.concatenate(labeled_parts)
        vu = np.concatenate(pool_parts)
        rng.shuffle(vl)
        rng.shuffle(vu)
    else:
        vl = val_idx[: spec.val_labeled_count]
        vu = val_idx[spec.val_labeled_count :]
    return Split(train=train_idx, val_labeled=vl, val_pool=vu, test=test_idx)


def class_weights(ds: Dataset) -> np.ndarray:
    """Per-class loss weights ``n_samples / (class_count * count_c)``.

    Balanced data gives all-ones; rarer classes get proportionally larger
    weights, and ``sum(count_c * weight_c) == n_samples`` by construction.
    """
    counts = ds.class_counts
    if np.any(counts == 0):
        empty = int(np.argmin(counts))
        raise ValueError(f"class {empty} has no samples")
    return ds.n_samples / (ds.class_count * counts)


@dataclass(frozen=True)
class BlobSpec:
    """Gaussian-blob benchmark: one isotropic cluster per class."""

    class_count: int
    dim: int
    per_class_counts: tuple
    class_center_spread: float = 3.0
    within_class_std: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.class_count < 1 or self.dim < 1:
            raise ValueError("class_count and dim must be >= 1")
        if len(self.per_class_counts) != self.class_count:
            raise ValueError("per_class_counts must have one entry per class")
        if any(c < 1 for c in self.per_class_counts):
            raise ValueError("every class needs at least one sample")
        if self.class_center_spread <= 0:
            raise ValueError("class_center_spread must be positive")
        if self.within_class_std < 0:
            raise ValueError("within_class_std must be non-negative")


def gen_blobs(spec: BlobSpec) -> Dataset:
    """Sample a blob dataset: centers ~ N(0, spread), points ~ N(center, std).

    Rows are grouped by generating class; identical specs give bit-identical
    datasets.
    """
    rng = np.random.default_rng(spec.seed)
    centers = rng.normal(0.0, spec.class_center_spread, size=(spec.class_count, spec.dim))
    xs, ys = [], []
    for c, count in enumerate(spec.per_class_counts):
        xs.append(centers[c] + rng.normal(0.0, spec.within_class_std, size=(count, spec.dim)))
        ys.append(np.full(count, c, dtype=np.int64))
    return Dataset(X=np.vstack(xs), y=np.concatenate(ys), class_count=spec.class_count)


def save_features(ds: Dataset, path) -> None:
    """Write a dataset as feature CSV; floats use shortest round-trip form."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"# classes={ds.class_count} dim={ds.n_features}\n")
        for row, label in zip(ds.X, ds.y):
            fh.write(",".join(repr(float(v)) for v in row) + f",{int(label)}\n")


def load_features(path) -> Dataset:
    """Read a feature CSV written by :func:`save_features`."""
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(f"{path}: empty file")
    header = lines[0]
    parts = header.split()
    if (
        len(parts) != 3
        or parts[0] != "#"
        or not parts[1].startswith("classes=")
        or not parts[2].startswith("dim=")
    ):
        raise ParseError(f"{path}:1: expected header '# classes=<C> dim=<d>'")
    try:
        classes = int(parts[1].split("=", 1)[1])
        dim = int(parts[2].split("=", 1)[1])
    except ValueError:
        raise ParseError(f"{path}:1: header counts must be integers") from None
    rows, labels = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != dim + 1:
            raise ParseError(
                f"{path}:{lineno}: expected {dim + 1} fields, got {len(fields)}"
            )
        try:
            rows.append([float(v) for v in fields[:-1]])
            label = int(fields[-1])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: malformed number") from None
        if not 0 <= label < classes:
            raise ParseError(
                f"{path}:{lineno}: label {label} outside [0, {classes})"
            )
        labels.append(label)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return Dataset(X=np.array(rows), y=np.array(labels), class_count=classes)


def save_network(net: Network, path) -> None:
    """Write a network checkpoint.

    Layout: magic ``UALNET01``; uint32 layer count; per layer a
    ``<IIId`` record (input width, output width, activation code, dropout
    rate); then per layer the weight matrix (row-major) and bias vector as
    little-endian float64. Optimizer state is not persisted, and a
    leaky-relu layer reloads with the default slope.
    """
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(net.layers)))
        for spec in net.layers:
            fh.write(
                struct.pack(
                    "<IIId",
                    spec.input_width,
                    spec.output_width,
                    _ACTIVATION_CODES[spec.activation],
                    spec.dropout_rate,
                )
            )
        for W, b in zip(net.weights, net.biases):
            fh.write(np.ascontiguousarray(W, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_network(path) -> Network:
    """Read a checkpoint written by :func:`save_network`."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ParseError(f"{path}: bad magic; not a network checkpoint")
    offset = len(CHECKPOINT_MAGIC)

    def take(fmt):
        nonlocal offset
        size = struct.calcsize(fmt)
        if offset + size > len(blob):
            raise ParseError(f"{path}: truncated checkpoint")
        values = struct.unpack_from(fmt, blob, offset)
        offset += size
        return values

    (layer_count,) = take("<I")
    specs = []
    for _ in range(layer_count):
        in_w, out_w, code, rate = take("<IIId")
        if code not in _CODE_ACTIVATIONS:
            raise ParseError(f"{path}: unknown activation code {code}")
        specs.append(
            LayerSpec(
                input_width=int(in_w),
                output_width=int(out_w),
                activation=_CODE_ACTIVATIONS[code],
                dropout_rate=float(rate),
            )
        )
    weights, biases = [], []
    for spec in specs:
        n_w = spec.input_width * spec.output_width
        size = (n_w + spec.output_width) * 8
        if offset + size > len(blob):
            raise ParseError(f"{path}: truncated checkpoint")
        W = np.frombuffer(blob, dtype="<f8", count=n_w, offset=offset)
        offset += n_w * 8
        b = np.frombuffer(blob, dtype="<f8", count=spec.output_width, offset=offset)
        offset += spec.output_width * 8
        weights.append(W.reshape(spec.input_width, spec.output_width).copy())
        biases.append(b.copy())
    if offset != len(blob):
        raise ParseError(f"{path}: {len(blob) - offset} trailing bytes")
    return Network(specs, weights, biases, rng_seed=0)
