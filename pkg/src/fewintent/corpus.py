"""Banking77-style corpus loading, statistics, and N-shot sampling.

All operations are pure: datasets are immutable after construction and
every sampling operation is a deterministic function of its inputs and an
explicit seed.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence, Union

from .errors import DataFormatError, DomainError
from .seeding import derive_seed

CSV_HEADER = ("text", "category")


class Split(str, Enum):
    TRAIN = "train"
    TEST = "test"
    VALIDATION = "validation"


@dataclass(frozen=True)
class LabelSpace:
    """Ordered set of label names; the order fixes prompt class numbering."""

    names: tuple[str, ...]
    index_of: Mapping[str, int] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        if not self.names:
            raise DomainError("label space must contain at least one label")
        if any(not name for name in self.names):
            raise DomainError("label names must be non-empty")
        if len(set(self.names)) != len(self.names):
            raise DomainError("label names must be unique")
        object.__setattr__(
            self, "index_of", {name: i for i, name in enumerate(self.names)}
        )

    @classmethod
    def from_names(cls, names) -> "LabelSpace":
        """Build a label space in deterministic alphabetical order.

        Ordering is case-insensitive (ties broken by the raw string) so that
        e.g. ``Refund_not_showing_up`` sorts between the r-labels instead of
        jumping ahead of every lowercase name.
        """
        unique = sorted(set(names), key=lambda s: (s.casefold(), s))
        return cls(tuple(unique))

    def __len__(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class Utterance:
    text: str
    label_id: int

    def __post_init__(self):
        if not self.text.strip():
            raise DomainError("utterance text must be non-empty after trimming")


@dataclass(frozen=True)
class Dataset:
    utterances: tuple[Utterance, ...]
    label_space: LabelSpace
    split: Split
    fingerprint: str | None = None

    def __post_init__(self):
        n = len(self.label_space)
        for i, utt in enumerate(self.utterances):
            if not 0 <= utt.label_id < n:
                raise DomainError(
                    f"utterance {i} references unknown label id {utt.label_id}"
                )

    def __len__(self) -> int:
        return len(self.utterances)

    def texts(self) -> list[str]:
        return [u.text for u in self.utterances]

    def rows_by_label(self) -> dict[int, list[int]]:
        """Row indices (0-based data-row positions) grouped by label id."""
        groups: dict[int, list[int]] = {i: [] for i in range(len(self.label_space))}
        for row, utt in enumerate(self.utterances):
            groups[utt.label_id].append(row)
        return groups


@dataclass(frozen=True)
class LengthSummary:
    min: int
    mean: float
    max: int


@dataclass(frozen=True)
class DatasetStats:
    n_examples: int
    char_len: LengthSummary
    word_count: LengthSummary
    n_intents: int

    def to_json_dict(self) -> dict:
        return {
            "n_examples": self.n_examples,
            "char_len": {
                "min": self.char_len.min,
                "mean": self.char_len.mean,
                "max": self.char_len.max,
            },
            "word_count": {
                "min": self.word_count.min,
                "mean": self.word_count.mean,
                "max": self.word_count.max,
            },
            "n_intents": self.n_intents,
        }


def file_fingerprint(path: str | Path) -> str:
    """SHA-256 of the raw file bytes; guards manifests against file drift."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_csv(path: str | Path, split: Split) -> Dataset:
    """Load a `text,category` CSV (RFC 4180, UTF-8) into a Dataset.

    The label space is the union of categories in deterministic alphabetical
    order. Row numbers in error messages are 1-based data rows (header not
    counted).
    """
    path = Path(path)
    if not path.is_file():
        raise DataFormatError(f"dataset file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: file is empty, expected header row")
        if tuple(header) != CSV_HEADER:
            raise DataFormatError(
                f"{path}: expected header {','.join(CSV_HEADER)!r}, got {','.join(header)!r}"
            )
        rows: list[tuple[str, str]] = []
        for row_num, row in enumerate(reader, start=1):
            if len(row) != 2:
                raise DataFormatError(
                    f"{path}: row {row_num} has {len(row)} fields, expected 2"
                )
            text, category = row
            if not text.strip():
                raise DataFormatError(f"{path}: row {row_num} has empty text")
            if not category.strip():
                raise DataFormatError(f"{path}: row {row_num} has empty category")
            rows.append((text, category))
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    label_space = LabelSpace.from_names(category for _, category in rows)
    utterances = tuple(
        Utterance(text, label_space.index_of[category]) for text, category in rows
    )
    return Dataset(utterances, label_space, Split(split), file_fingerprint(path))


def save_csv(dataset: Dataset, path: str | Path) -> None:
    """Write a Dataset back to `text,category` CSV; inverse of load_csv."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for utt in dataset.utterances:
            writer.writerow([utt.text, dataset.label_space.names[utt.label_id]])


def compute_stats(dataset: Dataset) -> DatasetStats:
    """Character/word length summary over raw texts (whitespace word split)."""
    if not dataset.utterances:
        raise DomainError("cannot compute statistics of an empty dataset")
    char_lens = [len(u.text) for u in dataset.utterances]
    word_counts = [len(u.text.split()) for u in dataset.utterances]
    used_labels = {u.label_id for u in dataset.utterances}
    return DatasetStats(
        n_examples=len(dataset),
        char_len=LengthSummary(min(char_lens), sum(char_lens) / len(char_lens), max(char_lens)),
        word_count=LengthSummary(min(word_counts), sum(word_counts) / len(word_counts), max(word_counts)),
        n_intents=len(used_labels),
    )


def render_stats(stats: DatasetStats, title: str = "Dataset statistics") -> str:
    """Plain-text statistics table; means shown to 1 decimal place."""
    rows = [
        ("Number of examples", f"{stats.n_examples:,}"),
        ("Minimum length in characters", str(stats.char_len.min)),
        ("Average length in characters", f"{stats.char_len.mean:.1f}"),
        ("Maximum length in characters", str(stats.char_len.max)),
        ("Minimum word count", str(stats.word_count.min)),
        ("Average word count", f"{stats.word_count.mean:.1f}"),
        ("Maximum word count", str(stats.word_count.max)),
        ("Number of intents", str(stats.n_intents)),
    ]
    width = max(len(name) for name, _ in rows)
    lines = [title, "-" * len(title)]
    lines += [f"{name:<{width}}  {value}" for name, value in rows]
    return "\n".join(lines)


def label_distribution(dataset: Dataset) -> dict[int, int]:
    """Per-label counts, keyed and ordered by label id; zeros included."""
    counts = Counter(u.label_id for u in dataset.utterances)
    return {i: counts.get(i, 0) for i in range(len(dataset.label_space))}


@dataclass(frozen=True)
class RandomProvenance:
    seed: int

    def describe(self) -> dict:
        return {"strategy": "random", "seed": self.seed}


@dataclass(frozen=True)
class CuratedProvenance:
    manifest_path: str

    def describe(self) -> dict:
        return {"strategy": "curated", "manifest_path": str(self.manifest_path)}


Provenance = Union[RandomProvenance, CuratedProvenance]


@dataclass(frozen=True)
class FewShotSample:
    """Exactly N utterances per class, with the rows they came from."""

    shots_per_class: int
    instances: Mapping[int, tuple[Utterance, ...]]
    rows: Mapping[int, tuple[int, ...]]
    provenance: Provenance
    label_space: LabelSpace

    def __post_init__(self):
        for label_id, utts in self.instances.items():
            if len(utts) != self.shots_per_class:
                raise DomainError(
                    f"class {label_id} has {len(utts)} instances, "
                    f"expected {self.shots_per_class}"
                )
            rows = self.rows[label_id]
            if len(set(rows)) != len(rows):
                raise DomainError(f"class {label_id} has duplicate rows in sample")

    def all_texts_and_labels(self) -> tuple[list[str], list[int]]:
        texts, labels = [], []
        for label_id in sorted(self.instances):
            for utt in self.instances[label_id]:
                texts.append(utt.text)
                labels.append(label_id)
        return texts, labels

    def content_hash(self) -> str:
        payload = json.dumps(
            {str(k): [u.text for u in v] for k, v in sorted(self.instances.items())},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def per_class_order(seed: int, label_name: str, rows: Sequence[int]) -> list[int]:
    """Seeded shuffle of one class's rows.

    The sub-seed depends on the label name, not its id, so adding a class
    (which shifts later ids) does not perturb other classes' draws.
    """
    order = list(rows)
    random.Random(derive_seed(seed, "class", label_name)).shuffle(order)
    return order


def sample_few_shot(dataset: Dataset, n: int, provenance: Provenance) -> FewShotSample:
    """Draw exactly `n` utterances per class, randomly or from a manifest."""
    if n < 1:
        raise DomainError(f"shots per class must be >= 1, got {n}")
    if isinstance(provenance, RandomProvenance):
        return _sample_random(dataset, n, provenance)
    if isinstance(provenance, CuratedProvenance):
        return _sample_curated(dataset, n, provenance)
    raise DomainError(f"unknown sampling strategy: {provenance!r}")


def _sample_random(dataset: Dataset, n: int, prov: RandomProvenance) -> FewShotSample:
    groups = dataset.rows_by_label()
    instances: dict[int, tuple[Utterance, ...]] = {}
    rows: dict[int, tuple[int, ...]] = {}
    for label_id, class_rows in groups.items():
        name = dataset.label_space.names[label_id]
        if len(class_rows) < n:
            raise DomainError(
                f"class {name!r} has only {len(class_rows)} instances, need {n}"
            )
        chosen = per_class_order(prov.seed, name, class_rows)[:n]
        rows[label_id] = tuple(chosen)
        instances[label_id] = tuple(dataset.utterances[r] for r in chosen)
    return FewShotSample(n, instances, rows, prov, dataset.label_space)


def _sample_curated(dataset: Dataset, n: int, prov: CuratedProvenance) -> FewShotSample:
    manifest = load_manifest(prov.manifest_path)
    if manifest.get("picks_per_class") != n:
        raise DomainError(
            f"manifest picks_per_class={manifest.get('picks_per_class')} "
            f"does not match requested shots n={n}"
        )
    expected_fp = manifest.get("fingerprint")
    if expected_fp and dataset.fingerprint and expected_fp != dataset.fingerprint:
        raise DomainError(
            "manifest fingerprint does not match the dataset file; "
            "the manifest was built from a different file"
        )
    selections = manifest["selections"]
    unknown = set(selections) - set(dataset.label_space.names)
    if unknown:
        raise DomainError(f"manifest references unknown classes: {sorted(unknown)}")
    missing = set(dataset.label_space.names) - set(selections)
    if missing:
        raise DomainError(f"manifest is missing classes: {sorted(missing)}")
    instances: dict[int, tuple[Utterance, ...]] = {}
    rows: dict[int, tuple[int, ...]] = {}
    for name, picked in selections.items():
        label_id = dataset.label_space.index_of[name]
        if len(picked) != n:
            raise DomainError(
                f"manifest selects {len(picked)} rows for class {name!r}, expected {n}"
            )
        for row in picked:
            if not 0 <= row < len(dataset.utterances):
                raise DomainError(f"manifest row {row} out of range for class {name!r}")
            if dataset.utterances[row].label_id != label_id:
                raise DomainError(
                    f"manifest row {row} does not belong to class {name!r}"
                )
        rows[label_id] = tuple(picked)
        instances[label_id] = tuple(dataset.utterances[r] for r in picked)
    return FewShotSample(n, instances, rows, prov, dataset.label_space)


def load_manifest(path: str | Path) -> dict:
    """Read a curation manifest (schema produced by the curation service)."""
    path = Path(path)
    if not path.is_file():
        raise DataFormatError(f"manifest file not found: {path}")
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON: {exc}") from exc
    for key in ("picks_per_class", "selections"):
        if key not in manifest:
            raise DataFormatError(f"{path}: manifest is missing {key!r}")
    return manifest


def split_validation(
    dataset: Dataset, fraction: float, seed: int
) -> tuple[Dataset, Dataset]:
    """Stratified (rest, validation) split; deterministic under seed.

    Per class, ceil(fraction * class_size) rows go to validation so every
    class is represented. The two halves are disjoint and their union is the
    input; original row order is preserved within each half.
    """
    if not 0 < fraction < 1:
        raise DomainError(f"validation fraction must be in (0, 1), got {fraction}")
    val_rows: set[int] = set()
    for label_id, class_rows in dataset.rows_by_label().items():
        if not class_rows:
            continue
        name = dataset.label_space.names[label_id]
        k = math.ceil(fraction * len(class_rows))
        order = per_class_order(derive_seed(seed, "validation"), name, class_rows)
        val_rows.update(order[:k])
    rest = tuple(u for i, u in enumerate(dataset.utterances) if i not in val_rows)
    val = tuple(u for i, u in enumerate(dataset.utterances) if i in val_rows)
    return (
        Dataset(rest, dataset.label_space, dataset.split, dataset.fingerprint),
        Dataset(val, dataset.label_space, Split.VALIDATION, dataset.fingerprint),
    )
