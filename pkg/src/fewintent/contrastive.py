"""SetFit-style few-shot training: labeled text pairs, cosine-similarity
contrastive fine-tuning of the encoder, then a logistic classification head.

The loss is the mean of (cos(e(a), e(b)) - y)^2 over a balanced batch of
same-class (y=1) / different-class (y=0) pairs. All gradients are analytic,
including the L2-normalization Jacobian, and all training is full-batch
gradient descent so results are exactly reproducible.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Dataset, FewShotSample, Provenance, RandomProvenance, sample_few_shot
from .encoder import (
    DEFAULT_EMBEDDING_DIM,
    DEFAULT_FEATURE_DIM,
    DEFAULT_NGRAM_ORDERS,
    EncoderParams,
    FeatureVector,
    NgramConfig,
    encode,
    encode_batch,
    fallback_vector,
    featurize,
    init_params,
    load_params,
    raw_projection,
    save_params,
)
from .errors import DataFormatError, DivergenceError, DomainError
from .seeding import derive_seed

HEAD_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Pair:
    text_a: str
    text_b: str
    target: int  # 1 = same class, 0 = different class

    def __post_init__(self):
        if self.target not in (0, 1):
            raise DomainError(f"pair target must be 0 or 1, got {self.target}")


@dataclass(frozen=True)
class PairBatch:
    pairs: tuple[Pair, ...]
    generation_seed: int
    positives_unavailable: bool = False

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass
class Head:
    """Multinomial logistic head: weights (C, dim), bias (C,)."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise DomainError(
                f"inconsistent head shapes {self.weights.shape} / {self.bias.shape}"
            )
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise DomainError("head parameters contain non-finite entries")

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]


@dataclass
class TrainReport:
    loss_trajectory: list[float]
    seeds: dict[str, int]
    hyperparams: dict
    positives_unavailable: bool = False
    head_train_accuracy: float | None = None
    provenance: dict | None = None

    def to_json_dict(self) -> dict:
        return {
            "loss_trajectory": self.loss_trajectory,
            "seeds": self.seeds,
            "hyperparams": self.hyperparams,
            "positives_unavailable": self.positives_unavailable,
            "head_train_accuracy": self.head_train_accuracy,
            "provenance": self.provenance,
        }


@dataclass(frozen=True)
class TrainConfig:
    """Defaults for the reference trainer; every knob is overridable."""

    dim: int = DEFAULT_EMBEDDING_DIM
    ngram_orders: tuple[int, ...] = DEFAULT_NGRAM_ORDERS
    feature_dim: int = DEFAULT_FEATURE_DIM
    pairs_per_instance: int = 2
    epochs: int = 50
    encoder_lr: float = 0.5
    head_l2: float = 1e-3
    head_iters: int = 500
    head_lr: float = 0.1

    def ngram_config(self) -> NgramConfig:
        return NgramConfig(self.ngram_orders, self.feature_dim)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "ngram_orders": list(self.ngram_orders),
            "feature_dim": self.feature_dim,
            "pairs_per_instance": self.pairs_per_instance,
            "epochs": self.epochs,
            "encoder_lr": self.encoder_lr,
            "head_l2": self.head_l2,
            "head_iters": self.head_iters,
            "head_lr": self.head_lr,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        kwargs = dict(data)
        if "ngram_orders" in kwargs:
            kwargs["ngram_orders"] = tuple(kwargs["ngram_orders"])
        return cls(**kwargs)


def generate_pairs(sample: FewShotSample, r: int, seed: int) -> PairBatch:
    """Per instance: r same-class pairs and r different-class pairs.

    Positive partners are drawn uniformly from the instance's class excluding
    the instance itself; negative partners from a uniformly chosen other
    class. With a single class negatives are impossible and with N=1
    positives are impossible; the latter degrades to a flagged
    negatives-only batch rather than failing.
    """
    if r < 1:
        raise DomainError(f"pairs per instance must be >= 1, got {r}")
    labels = sorted(sample.instances)
    if len(labels) < 2:
        raise DomainError("pair generation needs at least 2 classes")
    positives_possible = sample.shots_per_class >= 2
    pairs: list[Pair] = []
    for label_id in labels:
        name = sample.label_space.names[label_id]
        rnd = random.Random(derive_seed(seed, "pairs", name))
        members = sample.instances[label_id]
        other_labels = [l for l in labels if l != label_id]
        for i, utt in enumerate(members):
            if positives_possible:
                partners = [
                    m.text for j, m in enumerate(members)
                    if j != i and m.text != utt.text
                ]
                if not partners:
                    raise DomainError(
                        f"class {name!r} has no distinct positive partner "
                        f"for instance {i}"
                    )
                for _ in range(r):
                    pairs.append(Pair(utt.text, rnd.choice(partners), 1))
            for _ in range(r):
                neg_label = rnd.choice(other_labels)
                partner = rnd.choice(sample.instances[neg_label])
                pairs.append(Pair(utt.text, partner.text, 0))
    return PairBatch(tuple(pairs), seed, positives_unavailable=not positives_possible)


def _batch_states(params: EncoderParams, batch: PairBatch):
    """Featurize and project each distinct text in the batch exactly once."""
    text_ids: dict[str, int] = {}
    feats: list[FeatureVector] = []
    for pair in batch.pairs:
        for text in (pair.text_a, pair.text_b):
            if text not in text_ids:
                text_ids[text] = len(feats)
                feats.append(featurize(text, params.config))
    norms = np.empty(len(feats))
    embs = np.empty((len(feats), params.dim))
    for t, fv in enumerate(feats):
        u = raw_projection(params, fv)
        n = float(np.linalg.norm(u))
        norms[t] = n
        embs[t] = u / n if n > 0.0 else fallback_vector(params.dim)
    return text_ids, feats, norms, embs


def _loss_and_coeffs(params: EncoderParams, batch: PairBatch, want_grad: bool):
    """Mean squared cosine loss; optionally per-text gradient coefficients.

    Returns (loss, text_ids, feats, A) where A[t] is d(loss)/d(u_t) summed
    over the pairs touching text t (before the 1/m mean factor). Texts with
    zero projection use the constant fallback embedding and contribute no
    gradient.
    """
    if not batch.pairs:
        raise DomainError("pair batch is empty")
    text_ids, feats, norms, embs = _batch_states(params, batch)
    m = len(batch.pairs)
    A = np.zeros((len(feats), params.dim)) if want_grad else None
    loss_sum = 0.0
    for pair in batch.pairs:
        ia, ib = text_ids[pair.text_a], text_ids[pair.text_b]
        ea, eb = embs[ia], embs[ib]
        c = float(ea @ eb)
        d = c - pair.target
        loss_sum += d * d
        if want_grad:
            if norms[ia] > 0.0:
                A[ia] += (2.0 * d / norms[ia]) * (eb - c * ea)
            if norms[ib] > 0.0:
                A[ib] += (2.0 * d / norms[ib]) * (ea - c * eb)
    return loss_sum / m, text_ids, feats, A


def contrastive_loss(params: EncoderParams, batch: PairBatch) -> float:
    """Mean of (cos(e_a, e_b) - y)^2 over the batch; in [0, 4]."""
    loss, _, _, _ = _loss_and_coeffs(params, batch, want_grad=False)
    return loss


def _grad_columns(feats, A, m: int, dim: int):
    """Aggregate per-text coefficients into per-column gradient data."""
    col_data: dict[int, np.ndarray] = {}
    for t, fv in enumerate(feats):
        coeff = A[t]
        if not fv.indices or not np.any(coeff):
            continue
        for idx, val in zip(fv.indices, fv.values):
            acc = col_data.get(idx)
            if acc is None:
                col_data[idx] = coeff * (val / m)
            else:
                acc += coeff * (val / m)
    return col_data


def contrastive_grad(params: EncoderParams, batch: PairBatch) -> np.ndarray:
    """Exact analytic gradient of contrastive_loss w.r.t. W (same shape)."""
    _, _, feats, A = _loss_and_coeffs(params, batch, want_grad=True)
    grad = np.zeros_like(params.W)
    for idx, vec in _grad_columns(feats, A, len(batch.pairs), params.dim).items():
        grad[:, idx] = vec
    return grad


def train_encoder(
    params: EncoderParams,
    batch: PairBatch,
    epochs: int,
    lr: float,
    seed: int = 0,
) -> tuple[EncoderParams, TrainReport]:
    """Full-batch gradient descent on the contrastive loss.

    The returned trajectory has epochs+1 entries: the loss before each step
    and once after the final step. The input params are not mutated.
    """
    if epochs < 1:
        raise DomainError(f"epochs must be >= 1, got {epochs}")
    if lr <= 0:
        raise DomainError(f"learning rate must be > 0, got {lr}")
    new = params.copy()
    trajectory: list[float] = []
    for _ in range(epochs):
        loss, _, feats, A = _loss_and_coeffs(new, batch, want_grad=True)
        if not np.isfinite(loss):
            raise DivergenceError(
                f"contrastive loss diverged after {len(trajectory)} epochs", trajectory
            )
        trajectory.append(loss)
        # Sparse update: only columns whose features appear in the batch move.
        for idx, vec in _grad_columns(feats, A, len(batch.pairs), new.dim).items():
            new.W[:, idx] -= lr * vec
    final = contrastive_loss(new, batch)
    if not np.isfinite(final):
        raise DivergenceError("contrastive loss diverged on final step", trajectory)
    trajectory.append(final)
    report = TrainReport(
        loss_trajectory=trajectory,
        seeds={"train_encoder": seed},
        hyperparams={"epochs": epochs, "lr": lr},
        positives_unavailable=batch.positives_unavailable,
    )
    return new, report


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def fit_head_on_embeddings(
    embeddings: np.ndarray,
    labels: Sequence[int],
    n_classes: int,
    l2: float = 1e-3,
    iters: int = 500,
    lr: float = 0.1,
) -> Head:
    """Multinomial logistic regression by full-batch GD from zero weights."""
    if n_classes < 2:
        raise DomainError("classification head needs at least 2 classes")
    E = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels, dtype=np.intp)
    m = E.shape[0]
    Y = np.zeros((m, n_classes))
    Y[np.arange(m), y] = 1.0
    W = np.zeros((n_classes, E.shape[1]))
    b = np.zeros(n_classes)
    # Divergence shows up as overflow before the isfinite check fires; the
    # check is the intended handler, so keep numpy quiet about the interim.
    with np.errstate(over="ignore", invalid="ignore"):
        for it in range(iters):
            P = _softmax(E @ W.T + b)
            grad_W = (P - Y).T @ E / m + 2.0 * l2 * W
            grad_b = (P - Y).mean(axis=0)
            W -= lr * grad_W
            b -= lr * grad_b
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise DivergenceError(
                    f"head training diverged at iteration {it}", []
                )
    return Head(W, b)


def fit_head(
    params: EncoderParams,
    sample: FewShotSample,
    l2: float = 1e-3,
    iters: int = 500,
    lr: float = 0.1,
    seed: int = 0,
) -> Head:
    """Fit the logistic head on the sample's embedded training texts."""
    texts, labels = sample.all_texts_and_labels()
    embeddings = encode_batch(params, texts)
    return fit_head_on_embeddings(
        embeddings, labels, len(sample.label_space), l2=l2, iters=iters, lr=lr
    )


def predict_embedding(head: Head, embedding: np.ndarray) -> tuple[int, np.ndarray]:
    logits = head.weights @ np.asarray(embedding) + head.bias
    probs = _softmax(logits[None, :])[0]
    return int(np.argmax(probs)), probs  # argmax takes the lowest id on ties


def predict(params: EncoderParams, head: Head, text: str) -> tuple[int, np.ndarray]:
    """(label_id, probability vector) for one text."""
    return predict_embedding(head, encode(params, text))


def predict_batch(params: EncoderParams, head: Head, texts: Sequence[str]) -> list[int]:
    return [predict(params, head, text)[0] for text in texts]


def train_pipeline(
    dataset: Dataset,
    shots: int,
    config: TrainConfig = TrainConfig(),
    seed: int = 0,
    provenance: Provenance | None = None,
) -> tuple[EncoderParams, Head, TrainReport]:
    """sample -> pairs -> contrastive fine-tune -> head fit, one entry point.

    All randomness flows from `seed` through documented sub-seed derivation;
    repeat calls are bit-identical.
    """
    prov = provenance if provenance is not None else RandomProvenance(
        derive_seed(seed, "sample")
    )
    sample = sample_few_shot(dataset, shots, prov)
    pair_seed = derive_seed(seed, "pairs")
    batch = generate_pairs(sample, config.pairs_per_instance, pair_seed)
    init_seed = derive_seed(seed, "encoder-init")
    params0 = init_params(config.dim, config.ngram_config(), init_seed)
    params, report = train_encoder(
        params0, batch, epochs=config.epochs, lr=config.encoder_lr, seed=seed
    )
    head = fit_head(
        params,
        sample,
        l2=config.head_l2,
        iters=config.head_iters,
        lr=config.head_lr,
        seed=derive_seed(seed, "head"),
    )
    texts, labels = sample.all_texts_and_labels()
    preds = predict_batch(params, head, texts)
    report.head_train_accuracy = float(
        np.mean([p == t for p, t in zip(preds, labels)])
    )
    report.seeds = {
        "master": seed,
        "sample": prov.seed if isinstance(prov, RandomProvenance) else None,
        "pairs": pair_seed,
        "encoder_init": init_seed,
    }
    report.hyperparams = config.to_dict()
    report.provenance = prov.describe()
    return params, head, report


def save_head(head: Head, path: str | Path) -> None:
    payload = {
        "format_version": HEAD_FORMAT_VERSION,
        "weights": head.weights.tolist(),
        "bias": head.bias.tolist(),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_head(path: str | Path) -> Head:
    path = Path(path)
    if not path.is_file():
        raise DataFormatError(f"head file not found: {path}")
    payload = json.loads(path.read_text(encoding="utf-8"))
    if payload.get("format_version") != HEAD_FORMAT_VERSION:
        raise DataFormatError(
            f"{path}: unsupported head format version {payload.get('format_version')}"
        )
    return Head(np.asarray(payload["weights"]), np.asarray(payload["bias"]))


def save_artifact(
    out_dir: str | Path,
    params: EncoderParams,
    head: Head,
    report: TrainReport,
    label_names: Sequence[str],
    dataset_fingerprint: str | None = None,
) -> None:
    """Write {encoder.bin, head.json, manifest.json}; reproducibly byte-stable."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_params(params, out / "encoder.bin")
    save_head(head, out / "head.json")
    manifest = {
        "dataset_fingerprint": dataset_fingerprint,
        "label_names": list(label_names),
        "report": report.to_json_dict(),
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def load_artifact(out_dir: str | Path) -> tuple[EncoderParams, Head, dict]:
    out = Path(out_dir)
    params = load_params(out / "encoder.bin")
    head = load_head(out / "head.json")
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    return params, head, manifest
