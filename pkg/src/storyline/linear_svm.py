"""L2-regularized hinge-loss linear SVM trained by dual coordinate descent,
plus one-vs-rest banks with per-dimension standardization.

The bias is handled by augmenting each example with a constant-1 feature, so
the dual update stays closed-form; as a consequence the bias is regularized
together with the weights.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np

from .dataset_io import DataError, Vocabulary
from .parallel import parallel_map

BANK_MAGIC = b"SVOBANK\0"


@dataclass(frozen=True)
class TrainConfig:
    C: float = 1.0
    tol: float = 1e-4
    max_iter: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.C <= 0:
            raise ValueError(f"C must be positive, got {self.C}")
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    bias: float

    @property
    def dim(self) -> int:
        return self.weights.shape[0]


def dual_coordinate_descent(
    X: np.ndarray,
    y: np.ndarray,
    cfg: TrainConfig,
    epoch_callback: Callable[[int, np.ndarray, float, np.ndarray], None] | None = None,
) -> tuple[np.ndarray, float, np.ndarray, int]:
    """Solve the bias-augmented hinge SVM dual one example at a time.

    Minimizes 0.5*(||w||^2 + b^2) + C * sum_i max(0, 1 - y_i (w.x_i + b)) via
    its box-constrained dual. Coordinates are visited in a fresh seeded
    permutation each epoch; iteration stops once the largest projected-gradient
    violation seen in an epoch drops to `tol`, or after `max_iter` epochs.

    Returns (w, b, alpha, epochs_run). Deterministic for a fixed cfg.seed.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite values")
    if not np.all(np.abs(y) == 1.0):
        raise ValueError("labels must be -1 or +1")
    if X.shape[0] < 2 or np.unique(y).size < 2:
        raise DataError("training needs at least one example of each label")

    n, d = X.shape
    C = cfg.C
    qii = np.einsum("ij,ij->i", X, X) + 1.0  # +1 for the constant bias column
    w = np.zeros(d)
    b = 0.0
    alpha = np.zeros(n)
    rng = np.random.default_rng(cfg.seed)

    epochs = 0
    for epoch in range(cfg.max_iter):
        epochs = epoch + 1
        max_violation = 0.0
        for i in rng.permutation(n):
            xi = X[i]
            yi = y[i]
            g = yi * (w @ xi + b) - 1.0
            a = alpha[i]
            if a <= 0.0:
                pg = min(g, 0.0)
            elif a >= C:
                pg = max(g, 0.0)
            else:
                pg = g
            violation = abs(pg)
            if violation > max_violation:
                max_violation = violation
            if violation > 1e-14:
                a_new = min(max(a - g / qii[i], 0.0), C)
                delta = a_new - a
                if delta != 0.0:
                    alpha[i] = a_new
                    step = delta * yi
                    w += step * xi
                    b += step
        if epoch_callback is not None:
            epoch_callback(epoch, w.copy(), b, alpha.copy())
        if max_violation <= cfg.tol:
            break
    return w, b, alpha, epochs


def train_binary(X: np.ndarray, y: np.ndarray, cfg: TrainConfig,
                 epoch_callback=None) -> LinearModel:
    """Train one binary hinge SVM; labels must contain both -1 and +1."""
    w, b, _, _ = dual_coordinate_descent(X, y, cfg, epoch_callback=epoch_callback)
    return LinearModel(weights=w, bias=b)


def primal_objective(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray,
                     C: float) -> float:
    """Objective of the bias-augmented primal problem."""
    margins = y * (X @ w + b)
    hinge = np.maximum(0.0, 1.0 - margins).sum()
    return 0.5 * (w @ w + b * b) + C * hinge


def dual_objective(alpha: np.ndarray, w: np.ndarray, b: float) -> float:
    """Dual value at alpha, with (w, b) the mapped primal point."""
    return alpha.sum() - 0.5 * (w @ w + b * b)


def solver_objective(alpha: np.ndarray, w: np.ndarray, b: float) -> float:
    """The quantity the solver descends: the dual in minimization form.

    Exact coordinate minimization makes this non-increasing at every step;
    the primal evaluated along the trajectory carries no such guarantee.
    """
    return -dual_objective(alpha, w, b)


@dataclass(eq=False)
class ClassifierBank:
    """One-vs-rest linear models for a slot at one level, with the per-dimension
    standardization fitted on its training descriptors."""

    slot: str
    level_tag: str
    models: tuple[LinearModel, ...]
    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        dims = {m.dim for m in self.models}
        if len(dims) != 1:
            raise ValueError(f"models disagree on dimension: {sorted(dims)}")
        if self.mean.shape != (self.dim,) or self.scale.shape != (self.dim,):
            raise ValueError("standardization vectors must match model dimension")
        if np.any(self.scale <= 0):
            raise ValueError("scale entries must be positive")

    @property
    def dim(self) -> int:
        return self.models[0].dim

    @property
    def n_classes(self) -> int:
        return len(self.models)

    @cached_property
    def _stacked(self) -> tuple[np.ndarray, np.ndarray]:
        W = np.stack([m.weights for m in self.models])
        biases = np.array([m.bias for m in self.models])
        return W, biases


def fit_standardization(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column mean and scale; zero-variance columns get scale 1."""
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    scale = np.where(std > 0, std, 1.0)
    return mean, scale


def train_ovr(X: np.ndarray, labels: np.ndarray, vocab: Vocabulary,
              cfg: TrainConfig, level_tag: str, slot: str | None = None,
              threads: int = 1) -> ClassifierBank:
    """Train one binary model per vocabulary class on standardized descriptors.

    A class with no positive examples gets the constant model (weights 0,
    bias -1); a class covering every example gets (weights 0, bias +1).
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=int)
    if X.shape[0] == 0:
        raise DataError("empty training set")
    if labels.min() < 0 or labels.max() >= len(vocab):
        raise DataError(f"label out of range for {vocab.slot} vocabulary")
    mean, scale = fit_standardization(X)
    Z = (X - mean) / scale

    def fit_class(ci: int) -> LinearModel:
        y = np.where(labels == ci, 1.0, -1.0)
        n_pos = int((y > 0).sum())
        if n_pos == 0:
            return LinearModel(weights=np.zeros(X.shape[1]), bias=-1.0)
        if n_pos == X.shape[0]:
            return LinearModel(weights=np.zeros(X.shape[1]), bias=1.0)
        return train_binary(Z, y, replace(cfg, seed=cfg.seed + ci))

    models = parallel_map(fit_class, range(len(vocab)), threads=threads)
    return ClassifierBank(slot=slot or vocab.slot, level_tag=level_tag,
                          models=tuple(models), mean=mean, scale=scale)


def decision_values(bank: ClassifierBank, x: np.ndarray) -> np.ndarray:
    """Raw margin per class for one descriptor."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (bank.dim,):
        raise DataError(
            f"descriptor has length {x.shape[0] if x.ndim == 1 else x.shape}, "
            f"{bank.level_tag} bank expects {bank.dim}")
    W, biases = bank._stacked
    z = (x - bank.mean) / bank.scale
    return W @ z + biases


def predict(bank: ClassifierBank, x: np.ndarray) -> int:
    """Argmax class; np.argmax resolves ties toward the lowest index."""
    return int(np.argmax(decision_values(bank, x)))


def save_bank(bank: ClassifierBank, path) -> None:
    """Single self-describing file: JSON header, then raw float64 vectors."""
    header = json.dumps({
        "slot": bank.slot,
        "level_tag": bank.level_tag,
        "d": bank.dim,
        "n_classes": bank.n_classes,
    }, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(BANK_MAGIC)
        fh.write(struct.pack("<q", len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(bank.mean, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(bank.scale, dtype="<f8").tobytes())
        for m in bank.models:
            fh.write(np.ascontiguousarray(m.weights, dtype="<f8").tobytes())
            fh.write(struct.pack("<d", m.bias))


def load_bank(path) -> ClassifierBank:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:8] != BANK_MAGIC:
        raise DataError(f"{path}: not a classifier bank file")
    (hlen,) = struct.unpack_from("<q", raw, 8)
    header = json.loads(raw[16:16 + hlen].decode())
    d, n_classes = header["d"], header["n_classes"]
    off = 16 + hlen
    expected = off + 8 * (2 * d + n_classes * (d + 1))
    if len(raw) != expected:
        raise DataError(f"{path}: expected {expected} bytes, found {len(raw)}")

    def take(count: int) -> np.ndarray:
        nonlocal off
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=off).copy()
        off += 8 * count
        return arr

    mean = take(d)
    scale = take(d)
    models = []
    for _ in range(n_classes):
        weights = take(d)
        (bias,) = struct.unpack_from("<d", raw, off)
        off += 8
        models.append(LinearModel(weights=weights, bias=bias))
    return ClassifierBank(slot=header["slot"], level_tag=header["level_tag"],
                          models=tuple(models), mean=mean, scale=scale)
