"""Sentence-encoder abstraction plus a trainable hashed n-gram reference.

The reference encoder maps a text to counts of hashed character n-grams,
projects them through a dense matrix W, and L2-normalizes. Any external
encoder exposing the same ``encode_batch`` contract (fixed dim, unit-norm
rows, deterministic) can be substituted for it; see SentenceEncoder.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import DataFormatError, DomainError

DEFAULT_NGRAM_ORDERS = (3, 4, 5)
DEFAULT_FEATURE_DIM = 2**18
DEFAULT_EMBEDDING_DIM = 64

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

PARAMS_FORMAT_VERSION = 1


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a hash; stable across runs and platforms."""
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class NgramConfig:
    orders: tuple[int, ...] = DEFAULT_NGRAM_ORDERS
    feature_dim: int = DEFAULT_FEATURE_DIM

    def __post_init__(self):
        if not self.orders or any(n < 1 for n in self.orders):
            raise DomainError(f"n-gram orders must be positive, got {self.orders}")
        if self.feature_dim < 1:
            raise DomainError(f"feature_dim must be positive, got {self.feature_dim}")


@dataclass(frozen=True)
class FeatureVector:
    """Sparse non-negative counts over a fixed feature space."""

    indices: tuple[int, ...]
    values: tuple[int, ...]
    feature_dim: int

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise DomainError("feature indices must be strictly increasing")
        if any(v <= 0 for v in self.values):
            raise DomainError("feature values must be positive counts")


def featurize(text: str, config: NgramConfig = NgramConfig()) -> FeatureVector:
    """Hashed character n-gram counts; lowercased, "^"/"$" boundary markers.

    Total function: whitespace-only input yields an empty vector.
    """
    canon = text.lower().strip()
    if not canon:
        return FeatureVector((), (), config.feature_dim)
    padded = f"^{canon}$"
    counts: Counter[int] = Counter()
    for n in config.orders:
        for i in range(len(padded) - n + 1):
            gram = padded[i : i + n]
            counts[fnv1a_64(gram.encode("utf-8")) % config.feature_dim] += 1
    indices = sorted(counts)
    return FeatureVector(tuple(indices), tuple(counts[i] for i in indices), config.feature_dim)


@dataclass
class EncoderParams:
    """Trainable state of the reference encoder: W of shape (dim, feature_dim)."""

    W: np.ndarray
    config: NgramConfig = field(default_factory=NgramConfig)

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        if self.W.ndim != 2:
            raise DomainError(f"W must be 2-D, got shape {self.W.shape}")
        if self.W.shape[0] < 2:
            raise DomainError("embedding dimension must be >= 2")
        if self.W.shape[1] != self.config.feature_dim:
            raise DomainError(
                f"W has {self.W.shape[1]} columns but feature_dim is "
                f"{self.config.feature_dim}"
            )
        if not np.all(np.isfinite(self.W)):
            raise DomainError("encoder parameters contain non-finite entries")

    @property
    def dim(self) -> int:
        return self.W.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.W.shape[1]

    def copy(self) -> "EncoderParams":
        return replace(self, W=self.W.copy())


def init_params(
    dim: int = DEFAULT_EMBEDDING_DIM,
    config: NgramConfig = NgramConfig(),
    seed: int = 0,
) -> EncoderParams:
    """Seeded i.i.d. uniform(-1/sqrt(F), 1/sqrt(F)) initialization."""
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(config.feature_dim)
    W = rng.uniform(-scale, scale, size=(dim, config.feature_dim))
    return EncoderParams(W, config)


def fallback_vector(dim: int) -> np.ndarray:
    """Fixed unit vector returned for zero-feature (or zero-projection) input."""
    e = np.zeros(dim)
    e[0] = 1.0
    return e


def raw_projection(params: EncoderParams, fv: FeatureVector) -> np.ndarray:
    """Unnormalized projection W @ phi(x) for a precomputed feature vector."""
    if not fv.indices:
        return np.zeros(params.dim)
    cols = np.asarray(fv.indices, dtype=np.intp)
    vals = np.asarray(fv.values, dtype=np.float64)
    return params.W[:, cols] @ vals


def encode(params: EncoderParams, text: str) -> np.ndarray:
    """Unit-norm embedding of one text (fallback basis vector for zero input)."""
    u = raw_projection(params, featurize(text, params.config))
    norm = float(np.linalg.norm(u))
    if norm == 0.0:
        return fallback_vector(params.dim)
    return u / norm


def encode_batch(params: EncoderParams, texts: Sequence[str]) -> np.ndarray:
    """Row-per-text embeddings, element-wise equal to encode()."""
    out = np.empty((len(texts), params.dim))
    for i, text in enumerate(texts):
        out[i] = encode(params, text)
    return out


def save_params(params: EncoderParams, path: str | Path) -> None:
    """Single-file binary: one JSON header line, then row-major W bytes.

    The format carries no timestamps, so identical parameters serialize to
    identical bytes.
    """
    header = {
        "format_version": PARAMS_FORMAT_VERSION,
        "dim": params.dim,
        "feature_dim": params.feature_dim,
        "ngram_orders": list(params.config.orders),
        "dtype": "float64",
    }
    with Path(path).open("wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(params.W).tobytes())


def load_params(path: str | Path) -> EncoderParams:
    path = Path(path)
    if not path.is_file():
        raise DataFormatError(f"encoder parameter file not found: {path}")
    with path.open("rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: bad parameter header: {exc}") from exc
        if header.get("format_version") != PARAMS_FORMAT_VERSION:
            raise DataFormatError(
                f"{path}: unsupported format version {header.get('format_version')}"
            )
        dim, feat = header["dim"], header["feature_dim"]
        data = fh.read()
    W = np.frombuffer(data, dtype=np.float64)
    if W.size != dim * feat:
        raise DataFormatError(
            f"{path}: expected {dim * feat} weights, found {W.size}"
        )
    config = NgramConfig(tuple(header["ngram_orders"]), feat)
    return EncoderParams(W.reshape(dim, feat).copy(), config)


@runtime_checkable
class SentenceEncoder(Protocol):
    """Anything mapping texts to fixed-dim, unit-norm, deterministic vectors."""

    @property
    def dim(self) -> int: ...

    def encode_batch(self, texts: Sequence[str]) -> np.ndarray: ...


class ReferenceEncoder:
    """SentenceEncoder facade over EncoderParams for the pluggable code paths."""

    def __init__(self, params: EncoderParams):
        self.params = params

    @property
    def dim(self) -> int:
        return self.params.dim

    def encode_batch(self, texts: Sequence[str]) -> np.ndarray:
        return encode_batch(self.params, texts)
