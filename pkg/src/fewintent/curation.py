"""Expert curation sessions: candidate shortlists per class, exactly-k
selections, durable persistence, and manifest export for the curated sampler.

Selections are stored by row index in the dataset file (not by text) so
duplicate utterances stay distinguishable; a SHA-256 fingerprint of the CSV
guards every manifest against file drift. Each mutation is written ahead to
an audit log and then committed with an atomic temp-file rename before the
caller sees an acknowledgement.
"""

from __future__ import annotations

import json
import os
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .corpus import Dataset, per_class_order
from .errors import DataFormatError, DomainError

DEFAULT_CANDIDATES_PER_CLASS = 10
DEFAULT_PICKS_PER_CLASS = 3

SESSION_FORMAT_VERSION = 1


@dataclass
class ClassState:
    label_id: int
    label_name: str
    candidates: list[tuple[int, str]]  # (row_index, text), service order is stable
    selections: list[int] = field(default_factory=list)
    short_class: bool = False

    @property
    def done(self) -> bool:
        return bool(self.selections)

    def candidate_rows(self) -> set[int]:
        return {row for row, _ in self.candidates}

    def to_json_dict(self) -> dict:
        return {
            "label_id": self.label_id,
            "label_name": self.label_name,
            "candidates": [[row, text] for row, text in self.candidates],
            "selections": list(self.selections),
            "short_class": self.short_class,
            "status": "done" if self.done else "pending",
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ClassState":
        return cls(
            label_id=data["label_id"],
            label_name=data["label_name"],
            candidates=[(row, text) for row, text in data["candidates"]],
            selections=list(data["selections"]),
            short_class=data["short_class"],
        )


@dataclass
class CurationSession:
    session_id: str
    dataset_path: str
    fingerprint: str
    candidates_per_class: int
    picks_per_class: int
    seed: int
    classes: dict[int, ClassState]
    created_at: str
    note: str = ""

    def pending_classes(self) -> list[str]:
        return [
            state.label_name
            for _, state in sorted(self.classes.items())
            if not state.done
        ]

    def progress(self) -> tuple[int, int]:
        done = sum(1 for state in self.classes.values() if state.done)
        return done, len(self.classes)

    def to_json_dict(self) -> dict:
        done, total = self.progress()
        return {
            "format_version": SESSION_FORMAT_VERSION,
            "session_id": self.session_id,
            "dataset_path": self.dataset_path,
            "fingerprint": self.fingerprint,
            "candidates_per_class": self.candidates_per_class,
            "picks_per_class": self.picks_per_class,
            "seed": self.seed,
            "created_at": self.created_at,
            "note": self.note,
            "progress": {"done": done, "total": total},
            "classes": {str(k): v.to_json_dict() for k, v in sorted(self.classes.items())},
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "CurationSession":
        if data.get("format_version") != SESSION_FORMAT_VERSION:
            raise DataFormatError(
                f"unsupported session format version {data.get('format_version')}"
            )
        return cls(
            session_id=data["session_id"],
            dataset_path=data["dataset_path"],
            fingerprint=data["fingerprint"],
            candidates_per_class=data["candidates_per_class"],
            picks_per_class=data["picks_per_class"],
            seed=data["seed"],
            classes={
                int(k): ClassState.from_json_dict(v)
                for k, v in data["classes"].items()
            },
            created_at=data["created_at"],
            note=data.get("note", ""),
        )


def start_session(
    dataset: Dataset,
    candidates_per_class: int = DEFAULT_CANDIDATES_PER_CLASS,
    picks_per_class: int = DEFAULT_PICKS_PER_CLASS,
    seed: int = 0,
    dataset_path: str = "",
) -> CurationSession:
    """Draw the per-class candidate shortlists with the corpus sampler's
    seeded per-class rule. Classes smaller than the shortlist are kept in
    full and flagged; classes smaller than k cannot ever finish, so they
    fail right here."""
    if picks_per_class < 1:
        raise DomainError(f"picks per class must be >= 1, got {picks_per_class}")
    if candidates_per_class < picks_per_class:
        raise DomainError(
            f"candidates per class ({candidates_per_class}) must be >= "
            f"picks per class ({picks_per_class})"
        )
    classes: dict[int, ClassState] = {}
    for label_id, class_rows in dataset.rows_by_label().items():
        name = dataset.label_space.names[label_id]
        if len(class_rows) < picks_per_class:
            raise DomainError(
                f"class {name!r} has only {len(class_rows)} instances; "
                f"cannot ever pick {picks_per_class}"
            )
        order = per_class_order(seed, name, class_rows)
        shortlist = sorted(order[:candidates_per_class])
        classes[label_id] = ClassState(
            label_id=label_id,
            label_name=name,
            candidates=[(row, dataset.utterances[row].text) for row in shortlist],
            short_class=len(class_rows) < candidates_per_class,
        )
    return CurationSession(
        session_id=uuid.uuid4().hex[:12],
        dataset_path=str(dataset_path),
        fingerprint=dataset.fingerprint or "",
        candidates_per_class=candidates_per_class,
        picks_per_class=picks_per_class,
        seed=seed,
        classes=classes,
        created_at=datetime.now(timezone.utc).isoformat(),
    )


def record_selection(
    session: CurationSession, label_id: int, indices: list[int]
) -> ClassState:
    """Set a class's selection; re-submission overwrites. Exactly k indices,
    all drawn from that class's candidate shortlist."""
    state = session.classes.get(label_id)
    if state is None:
        raise DomainError(f"unknown class id {label_id}")
    indices = [int(i) for i in indices]
    if len(set(indices)) != len(indices):
        raise DomainError("selection indices must be distinct")
    k = session.picks_per_class
    if len(indices) != k:
        raise DomainError(
            f"exactly {k} selections required for class "
            f"{state.label_name!r}, got {len(indices)}"
        )
    foreign = [i for i in indices if i not in state.candidate_rows()]
    if foreign:
        raise DomainError(
            f"rows {foreign} are not candidates of class {state.label_name!r}"
        )
    state.selections = indices
    return state


def export_manifest(session: CurationSession) -> dict:
    """Manifest consumable by the curated sampler; requires every class done."""
    pending = session.pending_classes()
    if pending:
        raise DomainError(f"classes still pending selection: {pending}")
    selections = {
        state.label_name: list(state.selections)
        for _, state in sorted(session.classes.items())
    }
    return {
        "fingerprint": session.fingerprint,
        "picks_per_class": session.picks_per_class,
        "selections": selections,
        "note": session.note,
        "created_at": session.created_at,
    }


class SessionStore:
    """Directory-backed persistence: one subdirectory per session holding
    session.json (atomic replace) and audit.log (append-ahead)."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _dir(self, session_id: str) -> Path:
        if not session_id.isalnum():
            raise DomainError(f"malformed session id {session_id!r}")
        return self.root / session_id

    def session_ids(self) -> list[str]:
        return sorted(
            p.name for p in self.root.iterdir() if (p / "session.json").is_file()
        )

    def exists(self, session_id: str) -> bool:
        return (self._dir(session_id) / "session.json").is_file()

    def load(self, session_id: str) -> CurationSession:
        path = self._dir(session_id) / "session.json"
        if not path.is_file():
            raise DomainError(f"no such session: {session_id}")
        return CurationSession.from_json_dict(
            json.loads(path.read_text(encoding="utf-8"))
        )

    def append_audit(self, session_id: str, event: dict) -> None:
        """Write-ahead record of a mutation, fsynced before the commit."""
        path = self._dir(session_id) / "audit.log"
        entry = {"at": datetime.now(timezone.utc).isoformat(), **event}
        with path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True, ensure_ascii=False) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def save(self, session: CurationSession) -> None:
        """Atomic commit: temp file in the same directory, fsync, rename."""
        directory = self._dir(session.session_id)
        directory.mkdir(parents=True, exist_ok=True)
        final = directory / "session.json"
        tmp = directory / "session.json.tmp"
        payload = json.dumps(session.to_json_dict(), sort_keys=True, indent=2) + "\n"
        with tmp.open("w", encoding="utf-8") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, final)
        dir_fd = os.open(directory, os.O_RDONLY)
        try:
            os.fsync(dir_fd)
        finally:
            os.close(dir_fd)

    def audit_entries(self, session_id: str) -> list[dict]:
        path = self._dir(session_id) / "audit.log"
        if not path.is_file():
            return []
        entries = []
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                entries.append(json.loads(line))
        return entries

    def write_manifest(self, session: CurationSession) -> Path:
        manifest = export_manifest(session)
        path = self._dir(session.session_id) / "manifest.json"
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        os.replace(tmp, path)
        return path
