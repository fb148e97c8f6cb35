"""Hashed n-gram logistic classifier: featurize, train, evaluate, serialize.

This is the cheap distillation target that stands in for a fine-tuned
language-model scorer behind the same contract: scores are sigmoid outputs in
(0, 1) and the feature dimension (2**hash_bits) is the capacity knob. The
model file format is versioned and byte-stable across save/load.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import re
import struct
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Snippet

EPS = 1e-7
MODEL_MAGIC = "docprune-model"
MODEL_FORMAT_VERSION = 1

_EMPTY_TEXT_KEY = "\x00no-tokens"
_NGRAM_SEP = "\x1f"


class ModelFormatError(Exception):
    """Model file is corrupt, truncated, or of an unsupported version."""


class DegenerateLabelsError(ValueError):
    """Training data contains a single class."""


@dataclass(frozen=True)
class FeaturizerConfig:
    """Hashed bag-of-n-grams settings. dim = 2**hash_bits."""

    ngram_orders: tuple[int, ...] = (1, 2, 3)
    hash_bits: int = 18
    lowercase: bool = True
    token_pattern: str = r"\w+"

    def __post_init__(self):
        if not (8 <= self.hash_bits <= 26):
            raise ValueError("hash_bits must be in [8, 26]")
        if not self.ngram_orders or any(n < 1 for n in self.ngram_orders):
            raise ValueError("ngram_orders must be positive integers")
        object.__setattr__(self, "ngram_orders", tuple(self.ngram_orders))

    @property
    def dim(self) -> int:
        return 1 << self.hash_bits

    def as_dict(self) -> dict:
        d = asdict(self)
        d["ngram_orders"] = list(self.ngram_orders)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FeaturizerConfig":
        return cls(
            ngram_orders=tuple(d["ngram_orders"]),
            hash_bits=d["hash_bits"],
            lowercase=d["lowercase"],
            token_pattern=d["token_pattern"],
        )


@dataclass
class LabeledExample:
    """A featurized training instance."""

    doc_id: str
    features: dict[int, int]
    target: int


@dataclass
class LabeledText:
    """A raw (text, target) pair, featurized later (e.g. per capacity setting)."""

    doc_id: str
    text: str
    target: int


_TOKEN_RE_CACHE: dict[str, re.Pattern] = {}


def tokenize(text: str, config: FeaturizerConfig) -> list[str]:
    pattern = _TOKEN_RE_CACHE.get(config.token_pattern)
    if pattern is None:
        pattern = re.compile(config.token_pattern)
        _TOKEN_RE_CACHE[config.token_pattern] = pattern
    if config.lowercase:
        text = text.lower()
    return pattern.findall(text)


def _hash64(key: str) -> int:
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def hash_counts(text: str, config: FeaturizerConfig) -> dict[int, int]:
    """Full 64-bit hashed n-gram counts; project with a mask to get indices.

    Hashing once at 64 bits lets capacity sweeps re-project the same counts
    to several hash_bits settings without re-tokenizing.
    """
    tokens = tokenize(text, config)
    counts: dict[int, int] = {}
    if not tokens:
        counts[_hash64(_EMPTY_TEXT_KEY)] = 1
        return counts
    for order in config.ngram_orders:
        for i in range(len(tokens) - order + 1):
            key = _NGRAM_SEP.join(tokens[i : i + order])
            h = _hash64(key)
            counts[h] = counts.get(h, 0) + 1
    return counts


def project_counts(counts64: dict[int, int], hash_bits: int) -> dict[int, int]:
    mask = (1 << hash_bits) - 1
    feats: dict[int, int] = {}
    for h, c in counts64.items():
        idx = h & mask
        feats[idx] = feats.get(idx, 0) + c
    return feats


def featurize_text(text: str, config: FeaturizerConfig) -> dict[int, int]:
    return project_counts(hash_counts(text, config), config.hash_bits)


def featurize(snippet: Snippet, config: FeaturizerConfig) -> dict[int, int]:
    """Deterministic hashed bag of word n-grams; collisions add counts."""
    if not snippet.text:
        raise ValueError("empty snippet")
    return featurize_text(snippet.text, config)


def split_train_val(
    examples: Sequence[LabeledExample],
    val_fraction: float = 0.1,
    seed: int = 0,
) -> tuple[list[LabeledExample], list[LabeledExample]]:
    """Disjoint, exhaustive, seed-deterministic stratified split."""
    if not 0 < val_fraction < 1:
        raise ValueError("val_fraction must be in (0, 1)")
    if len(examples) < 10:
        raise ValueError("need at least 10 examples to split")
    rng = random.Random(f"split:{seed}")
    val_idx: set[int] = set()
    for cls in (0, 1):
        idxs = [i for i, e in enumerate(examples) if e.target == cls]
        rng.shuffle(idxs)
        k = int(round(val_fraction * len(idxs)))
        k = min(k, max(len(idxs) - 1, 0))
        val_idx.update(idxs[:k])
    train = [e for i, e in enumerate(examples) if i not in val_idx]
    val = [e for i, e in enumerate(examples) if i in val_idx]
    return train, val


def f1(preds: Sequence[int], gold: Sequence[int]) -> float:
    """Positive-class F1; 0.0 by convention when precision + recall is 0."""
    if len(preds) != len(gold):
        raise ValueError(f"length mismatch: {len(preds)} vs {len(gold)}")
    if not preds:
        raise ValueError("empty prediction list")
    tp = sum(1 for p, g in zip(preds, gold) if p == 1 and g == 1)
    fp = sum(1 for p, g in zip(preds, gold) if p == 1 and g == 0)
    fn = sum(1 for p, g in zip(preds, gold) if p == 0 and g == 1)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _sigmoid(z: float) -> float:
    z = min(max(z, -60.0), 60.0)
    return 1.0 / (1.0 + math.exp(-z))


@dataclass
class _Packed:
    """CSR-style view of a featurized dataset for fast batched passes."""

    indices: np.ndarray  # int64, concatenated feature indices
    values: np.ndarray  # float64, concatenated counts
    offsets: np.ndarray  # int64, per-example [start, end) into indices/values
    targets: np.ndarray  # float64 0/1
    weights: np.ndarray  # float64 per-example class weight


def _pack(examples: Sequence[LabeledExample], class_weights: dict[int, float]) -> _Packed:
    indices: list[np.ndarray] = []
    values: list[np.ndarray] = []
    offsets = np.zeros(len(examples) + 1, dtype=np.int64)
    targets = np.zeros(len(examples), dtype=np.float64)
    weights = np.zeros(len(examples), dtype=np.float64)
    for i, ex in enumerate(examples):
        items = sorted(ex.features.items())  # fixed order => reproducible float sums
        indices.append(np.fromiter((k for k, _ in items), dtype=np.int64, count=len(items)))
        values.append(np.fromiter((v for _, v in items), dtype=np.float64, count=len(items)))
        offsets[i + 1] = offsets[i] + len(items)
        targets[i] = ex.target
        weights[i] = class_weights[ex.target]
    return _Packed(
        indices=np.concatenate(indices) if indices else np.zeros(0, dtype=np.int64),
        values=np.concatenate(values) if values else np.zeros(0, dtype=np.float64),
        offsets=offsets,
        targets=targets,
        weights=weights,
    )


def _forward(packed: _Packed, rows: np.ndarray, w: np.ndarray, b: float):
    """Return (concatenated idx, scaled values, per-row lengths, probabilities)."""
    starts = packed.offsets[rows]
    ends = packed.offsets[rows + 1]
    lengths = ends - starts
    idx = np.concatenate([packed.indices[s:e] for s, e in zip(starts, ends)])
    val = np.concatenate([packed.values[s:e] for s, e in zip(starts, ends)])
    cuts = np.zeros(len(rows) + 1, dtype=np.int64)
    np.cumsum(lengths, out=cuts[1:])
    prods = w[idx] * val
    z = np.add.reduceat(prods, cuts[:-1]) if len(prods) else np.zeros(len(rows))
    z[lengths == 0] = 0.0  # reduceat artifacts for empty rows
    z = np.clip(z + b, -60.0, 60.0)
    p = 1.0 / (1.0 + np.exp(-z))
    return idx, val, lengths, p


@dataclass
class TrainConfig:
    """Mini-batch SGD settings; single-worker by contract for determinism."""

    featurizer: FeaturizerConfig = field(default_factory=FeaturizerConfig)
    epochs: int = 20
    learning_rate: float = 0.5
    batch_size: int = 64
    seed: int = 0
    class_weighting: bool = True
    patience: int = 3


@dataclass
class QualityClassifier:
    """Trained quality scorer: sigmoid(w . features + bias), clamped into (0, 1)."""

    featurizer: FeaturizerConfig
    weights: np.ndarray
    bias: float
    training_meta: dict
    format_version: int = MODEL_FORMAT_VERSION

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps(self.featurizer.as_dict(), sort_keys=True).encode())
        h.update(np.ascontiguousarray(self.weights, dtype="<f8").tobytes())
        h.update(struct.pack("<d", self.bias))
        return h.hexdigest()[:16]


def class_weight_map(targets: Iterable[int], enabled: bool = True) -> dict[int, float]:
    """Inverse-frequency class weights (each class contributes half the loss mass)."""
    targets = list(targets)
    n_pos = sum(targets)
    n_neg = len(targets) - n_pos
    if not enabled:
        return {0: 1.0, 1: 1.0}
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabelsError("degenerate label distribution: one class only")
    n = len(targets)
    return {0: n / (2.0 * n_neg), 1: n / (2.0 * n_pos)}


def logistic_loss(
    weights: np.ndarray,
    bias: float,
    examples: Sequence[LabeledExample],
    class_weights: dict[int, float] | None = None,
) -> float:
    """Mean weighted logistic loss (the training objective)."""
    cw = class_weights or {0: 1.0, 1: 1.0}
    total = 0.0
    for ex in examples:
        items = sorted(ex.features.items())
        z = sum(weights[k] * v for k, v in items) + bias
        # log(1 + e^z) - y*z, computed stably
        total += cw[ex.target] * (np.logaddexp(0.0, z) - ex.target * z)
    return total / len(examples)


def logistic_loss_gradient(
    weights: np.ndarray,
    bias: float,
    examples: Sequence[LabeledExample],
    class_weights: dict[int, float] | None = None,
) -> tuple[np.ndarray, float]:
    """Analytic gradient of logistic_loss wrt (weights, bias)."""
    cw = class_weights or {0: 1.0, 1: 1.0}
    grad_w = np.zeros_like(weights)
    grad_b = 0.0
    for ex in examples:
        items = sorted(ex.features.items())
        z = sum(weights[k] * v for k, v in items) + bias
        g = cw[ex.target] * (_sigmoid(z) - ex.target)
        for k, v in items:
            grad_w[k] += g * v
        grad_b += g
    return grad_w / len(examples), grad_b / len(examples)


def _predictions(packed: _Packed, w: np.ndarray, b: float) -> list[int]:
    rows = np.arange(len(packed.targets))
    _, _, _, p = _forward(packed, rows, w, b)
    return [1 if prob > 0.5 else 0 for prob in p]


def train_classifier(
    train: Sequence[LabeledExample],
    val: Sequence[LabeledExample],
    config: TrainConfig,
) -> QualityClassifier:
    """Minimize logistic loss by seeded mini-batch SGD; early-stop on val F1.

    Deterministic for a fixed seed (single worker). The returned model carries
    the best-epoch weights; F1 ties resolve toward the earlier epoch.
    """
    if not train:
        raise DegenerateLabelsError("degenerate label distribution: empty training set")
    targets = {e.target for e in train}
    if targets != {0, 1}:
        raise DegenerateLabelsError("degenerate label distribution: one class only")
    if not val:
        raise ValueError("validation set is empty")

    cw = class_weight_map([e.target for e in train], config.class_weighting)
    dim = config.featurizer.dim
    packed_train = _pack(train, cw)
    packed_val = _pack(val, cw)
    gold_val = [int(t) for t in packed_val.targets]

    w = np.zeros(dim, dtype=np.float64)
    b = 0.0
    rng = random.Random(f"train:{config.seed}")
    order = list(range(len(train)))
    lr = config.learning_rate

    best_f1 = -1.0
    best_epoch = -1
    best_w = w.copy()
    best_b = b
    epochs_run = 0

    for epoch in range(config.epochs):
        rng.shuffle(order)
        for start in range(0, len(order), config.batch_size):
            rows = np.array(order[start : start + config.batch_size], dtype=np.int64)
            idx, val_arr, lengths, p = _forward(packed_train, rows, w, b)
            g = packed_train.weights[rows] * (p - packed_train.targets[rows])
            scale = lr / len(rows)
            np.subtract.at(w, idx, scale * np.repeat(g, lengths) * val_arr)
            b -= scale * g.sum()
        epochs_run += 1
        val_f1 = f1(_predictions(packed_val, w, b), gold_val)
        if val_f1 > best_f1:
            best_f1 = val_f1
            best_epoch = epoch
            best_w = w.copy()
            best_b = b
        elif epoch - best_epoch >= config.patience:
            break

    meta = {
        "seed": config.seed,
        "epochs": epochs_run,
        "best_epoch": best_epoch + 1,
        "learning_rate": config.learning_rate,
        "batch_size": config.batch_size,
        "class_weights": {"0": cw[0], "1": cw[1]},
        "train_size": len(train),
        "val_size": len(val),
        "val_f1": best_f1,
    }
    return QualityClassifier(
        featurizer=config.featurizer, weights=best_w, bias=best_b, training_meta=meta
    )


def score(classifier: QualityClassifier, snippet: Snippet) -> float:
    """Quality score in (0, 1): sigmoid of the sparse dot product, clamped to
    [EPS, 1 - EPS] so the open interval holds in float arithmetic."""
    if not snippet.text:
        raise ValueError("empty snippet")
    feats = featurize_text(snippet.text, classifier.featurizer)
    items = sorted(feats.items())
    idx = np.fromiter((k for k, _ in items), dtype=np.int64, count=len(items))
    val = np.fromiter((v for _, v in items), dtype=np.float64, count=len(items))
    z = float(classifier.weights[idx] @ val) + classifier.bias
    return min(max(_sigmoid(z), EPS), 1.0 - EPS)


def save_model(classifier: QualityClassifier, path: str | Path) -> None:
    """Write the versioned model container: one JSON header line + raw weights.

    The byte layout is fully deterministic, so save(load(save(m))) is
    byte-identical.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = np.ascontiguousarray(classifier.weights, dtype="<f8").tobytes()
    header = {
        "magic": MODEL_MAGIC,
        "format_version": classifier.format_version,
        "featurizer": classifier.featurizer.as_dict(),
        "bias": classifier.bias,
        "training_meta": classifier.training_meta,
        "weights_len": int(classifier.weights.shape[0]),
        "weights_dtype": "<f8",
        "weights_sha256": hashlib.sha256(blob).hexdigest(),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(blob)


def load_model(path: str | Path) -> QualityClassifier:
    """Load a model container; reject unknown versions and corrupt files."""
    path = Path(path)
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ModelFormatError(f"not a model file: {path}") from exc
        if not isinstance(header, dict) or header.get("magic") != MODEL_MAGIC:
            raise ModelFormatError(f"not a model file: {path}")
        version = header.get("format_version")
        if version != MODEL_FORMAT_VERSION:
            raise ModelFormatError(
                f"unsupported model format_version {version!r} "
                f"(this build reads {MODEL_FORMAT_VERSION})"
            )
        blob = fh.read()
    expected_len = header["weights_len"] * 8
    if len(blob) != expected_len:
        raise ModelFormatError(
            f"weight block is {len(blob)} bytes, expected {expected_len} (truncated?)"
        )
    if hashlib.sha256(blob).hexdigest() != header["weights_sha256"]:
        raise ModelFormatError("weight checksum mismatch: file is corrupt")
    weights = np.frombuffer(blob, dtype="<f8").astype(np.float64)
    return QualityClassifier(
        featurizer=FeaturizerConfig.from_dict(header["featurizer"]),
        weights=weights,
        bias=float(header["bias"]),
        training_meta=header["training_meta"],
        format_version=version,
    )


def with_hash_bits(config: FeaturizerConfig, hash_bits: int) -> FeaturizerConfig:
    """Same featurizer at a different capacity."""
    return replace(config, hash_bits=hash_bits)
