from __future__ import annotations

import csv
from pathlib import Path

import pytest

from fewintent import corpus

REPO_ROOT = Path(__file__).resolve().parent.parent
BANKING77_TRAIN = REPO_ROOT / "data" / "banking77" / "train.csv"
BANKING77_TEST = REPO_ROOT / "data" / "banking77" / "test.csv"
SYNTH_TRAIN = REPO_ROOT / "data" / "synthetic5" / "train.csv"
SYNTH_TEST = REPO_ROOT / "data" / "synthetic5" / "test.csv"
GOLDEN_DIR = Path(__file__).resolve().parent / "golden"


def write_csv(path: Path, rows: list[tuple[str, str]]) -> Path:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["text", "category"])
        writer.writerows(rows)
    return path


# Three classes, three instances each; enough for 1-shot prompts and pair
# generation, small enough to verify by hand.
TINY_ROWS = [
    ("How do I reset my password?", "reset_password"),
    ("I forgot my password, help me reset it.", "reset_password"),
    ("Need to change a forgotten password.", "reset_password"),
    ("Where is my package right now?", "track_order"),
    ("Track the order I placed yesterday.", "track_order"),
    ("When will my order arrive?", "track_order"),
    ("I want my money back for this item.", "refund_request"),
    ("Please refund my last purchase.", "refund_request"),
    ("How do I request a refund?", "refund_request"),
]


@pytest.fixture()
def tiny_csv(tmp_path: Path) -> Path:
    return write_csv(tmp_path / "tiny.csv", TINY_ROWS)


@pytest.fixture()
def tiny_dataset(tiny_csv: Path) -> corpus.Dataset:
    return corpus.load_csv(tiny_csv, corpus.Split.TRAIN)


@pytest.fixture(scope="session")
def banking77_train() -> corpus.Dataset:
    return corpus.load_csv(BANKING77_TRAIN, corpus.Split.TRAIN)


@pytest.fixture(scope="session")
def banking77_test() -> corpus.Dataset:
    return corpus.load_csv(BANKING77_TEST, corpus.Split.TEST)


@pytest.fixture(scope="session")
def synth_train() -> corpus.Dataset:
    return corpus.load_csv(SYNTH_TRAIN, corpus.Split.TRAIN)


@pytest.fixture(scope="session")
def synth_test() -> corpus.Dataset:
    return corpus.load_csv(SYNTH_TEST, corpus.Split.TEST)
