"""In-context-learning classification over a chat-completion backend.

The backend is an interface so a deterministic transcript replay can stand
in for the remote API; parsing of model replies is a total function whose
failure modes are values (abstain / parse_failed), never exceptions; batch
runs checkpoint after every instance and resume without re-querying.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Protocol, Sequence, runtime_checkable

import requests

from .corpus import Dataset, FewShotSample, LabelSpace
from .errors import (
    BudgetExceededError,
    DataFormatError,
    DomainError,
    TransportError,
)
from .prompting import (
    DEFAULT_COMPLETION_RESERVE,
    ChatMessage,
    CostEstimate,
    PromptStyle,
    TokenCounter,
    build_prompt,
    check_budget,
    default_token_counter,
    estimate_cost,
    estimate_tokens,
)

RETRY_ATTEMPTS = 3
RETRY_BASE_DELAY = 1.0  # doubles per attempt: 1s, 2s, 4s
API_KEY_ENV_VAR = "FEWINTENT_API_KEY"


class Outcome(str, Enum):
    LABEL = "label"
    ABSTAIN = "abstain"
    PARSE_FAILED = "parse_failed"


class ParseRoute(str, Enum):
    EXACT_PAIR = "exact_pair"
    NAME_ONLY = "name_only"
    INDEX_ONLY = "index_only"
    ABSTAIN_TOKEN = "abstain_token"
    FUZZY = "fuzzy"
    FAILED = "failed"


@dataclass(frozen=True)
class Prediction:
    outcome: Outcome
    label_id: int | None
    raw_text: str
    parse_route: ParseRoute

    def __post_init__(self):
        if self.outcome is Outcome.LABEL:
            if self.label_id is None:
                raise DomainError("label outcome requires a label_id")
        elif self.label_id is not None:
            raise DomainError(f"{self.outcome.value} outcome must not carry a label_id")

    @property
    def is_label(self) -> bool:
        return self.outcome is Outcome.LABEL

    def to_json_dict(self) -> dict:
        return {
            "outcome": self.outcome.value,
            "label_id": self.label_id,
            "raw_text": self.raw_text,
            "parse_route": self.parse_route.value,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "Prediction":
        return cls(
            outcome=Outcome(data["outcome"]),
            label_id=data["label_id"],
            raw_text=data["raw_text"],
            parse_route=ParseRoute(data["parse_route"]),
        )


def _norm(text: str) -> str:
    """Trim, lowercase, and fold underscores/whitespace runs to one space."""
    return " ".join(text.replace("_", " ").lower().split())


def _token_set(text: str) -> frozenset[str]:
    return frozenset(re.findall(r"[a-z0-9]+", text.lower()))


FUZZY_THRESHOLD = 0.8

_PAIR_RE = re.compile(r"^(-?\d+)\s+(.+)$", re.S)
_INT_RE = re.compile(r"^-?\d+$")


def parse_response(raw: str, label_space: LabelSpace) -> Prediction:
    """Map a raw model reply to a prediction. Total and deterministic.

    Routes, in order: `<index> <name>` with both parts agreeing; a bare
    label name (after normalization); a bare in-range integer; the
    designated abstention token; then fuzzy token-set matching needing
    overlap >= 0.8 with a unique best label. Anything else is parse_failed.
    """
    names = label_space.names
    norm_to_id = {_norm(name): i for i, name in enumerate(names)}
    s = raw.strip()
    if s:
        m = _PAIR_RE.match(s)
        if m:
            idx_text, rest = m.group(1), m.group(2)
            idx = int(idx_text)
            if 0 <= idx < len(names) and _norm(rest) == _norm(names[idx]):
                return Prediction(Outcome.LABEL, idx, raw, ParseRoute.EXACT_PAIR)
        label_id = norm_to_id.get(_norm(s))
        if label_id is not None:
            return Prediction(Outcome.LABEL, label_id, raw, ParseRoute.NAME_ONLY)
        if _INT_RE.match(s):
            idx = int(s)
            if 0 <= idx < len(names):
                return Prediction(Outcome.LABEL, idx, raw, ParseRoute.INDEX_ONLY)
        if _norm(s) == "-1 unknown":
            return Prediction(Outcome.ABSTAIN, None, raw, ParseRoute.ABSTAIN_TOKEN)
        reply_tokens = _token_set(s)
        if reply_tokens:
            best_score = 0.0
            best_id = None
            unique = False
            for i, name in enumerate(names):
                name_tokens = _token_set(name)
                union = reply_tokens | name_tokens
                score = len(reply_tokens & name_tokens) / len(union) if union else 0.0
                if score > best_score:
                    best_score, best_id, unique = score, i, True
                elif score == best_score and best_id is not None:
                    unique = False
            if best_id is not None and best_score >= FUZZY_THRESHOLD and unique:
                return Prediction(Outcome.LABEL, best_id, raw, ParseRoute.FUZZY)
    return Prediction(Outcome.PARSE_FAILED, None, raw, ParseRoute.FAILED)


@dataclass(frozen=True)
class BackendInfo:
    name: str
    context_limit: int
    prompt_rate: float = 0.0
    completion_rate: float = 0.0
    deterministic: bool = False


@runtime_checkable
class ChatBackend(Protocol):
    """complete() is the only effectful operation a backend exposes."""

    @property
    def info(self) -> BackendInfo: ...

    def complete(self, messages: Sequence[ChatMessage]) -> str: ...


def request_hash(messages: Sequence[ChatMessage]) -> str:
    """Stable content hash of a chat request, used as the transcript key."""
    canon = json.dumps(
        [m.to_json_dict() for m in messages],
        sort_keys=True,
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


class TranscriptBackend:
    """Replays responses from a JSONL transcript of {request_hash, response_text}."""

    def __init__(self, path: str | Path, info: BackendInfo | None = None):
        self._info = info or BackendInfo(
            name="transcript", context_limit=32768, deterministic=True
        )
        self._responses: dict[str, str] = {}
        path = Path(path)
        if not path.is_file():
            raise DataFormatError(f"transcript not found: {path}")
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    entry = json.loads(line)
                    self._responses[entry["request_hash"]] = entry["response_text"]
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise DataFormatError(
                        f"{path}: bad transcript entry on line {lineno}: {exc}"
                    ) from exc

    @property
    def info(self) -> BackendInfo:
        return self._info

    def complete(self, messages: Sequence[ChatMessage]) -> str:
        key = request_hash(messages)
        try:
            return self._responses[key]
        except KeyError:
            raise DataFormatError(
                f"transcript has no response for request {key[:12]}…"
            ) from None


class RecordingBackend:
    """Wraps a live backend and appends every exchange to a transcript file."""

    def __init__(self, inner: ChatBackend, path: str | Path):
        self._inner = inner
        self._path = Path(path)

    @property
    def info(self) -> BackendInfo:
        return self._inner.info

    def complete(self, messages: Sequence[ChatMessage]) -> str:
        text = self._inner.complete(messages)
        entry = {"request_hash": request_hash(messages), "response_text": text}
        with self._path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, ensure_ascii=False, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        return text


class HttpBackend:
    """Minimal chat-completion client: JSON over HTTPS, bearer auth, temp 0.

    The credential comes only from the environment, never flags or config.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        info: BackendInfo,
        timeout: float = 60.0,
        session: requests.Session | None = None,
    ):
        api_key = os.environ.get(API_KEY_ENV_VAR)
        if not api_key:
            raise DomainError(
                f"live backend needs the {API_KEY_ENV_VAR} environment variable"
            )
        self._url = base_url.rstrip("/") + "/chat/completions"
        self._model = model
        self._info = info
        self._timeout = timeout
        self._session = session or requests.Session()
        self._headers = {"Authorization": f"Bearer {api_key}"}

    @property
    def info(self) -> BackendInfo:
        return self._info

    def complete(self, messages: Sequence[ChatMessage]) -> str:
        payload = {
            "model": self._model,
            "messages": [m.to_json_dict() for m in messages],
            "temperature": 0,
        }
        try:
            resp = self._session.post(
                self._url, json=payload, headers=self._headers, timeout=self._timeout
            )
        except requests.RequestException as exc:
            raise TransportError(f"request failed: {exc}") from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransportError(
                f"retriable status {resp.status_code}: {resp.text[:200]}"
            )
        if resp.status_code != 200:
            raise DomainError(f"backend error {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise DataFormatError(f"malformed completion response: {exc}") from exc


def _complete_with_retries(
    backend: ChatBackend,
    messages: Sequence[ChatMessage],
    attempts: int = RETRY_ATTEMPTS,
    base_delay: float = RETRY_BASE_DELAY,
    sleeper: Callable[[float], None] = time.sleep,
) -> str:
    """Retry transport failures with exponential backoff; nothing else.

    Parse failures never reach here: retrying them would silently resample
    the measured output distribution.
    """
    errors: list[str] = []
    for attempt in range(attempts):
        try:
            return backend.complete(messages)
        except TransportError as exc:
            errors.append(str(exc))
            if attempt + 1 < attempts:
                sleeper(base_delay * (2**attempt))
    raise TransportError(
        f"backend failed after {attempts} attempts: {errors[-1]}", attempts=errors
    )


def classify_one(
    backend: ChatBackend,
    label_space: LabelSpace,
    sample: FewShotSample,
    query: str,
    style: PromptStyle = PromptStyle.SYSTEM_CONTEXT,
    reserve: int = DEFAULT_COMPLETION_RESERVE,
    counter: TokenCounter = default_token_counter,
    sleeper: Callable[[float], None] = time.sleep,
) -> tuple[Prediction, CostEstimate]:
    """Build the prompt, enforce the budget, call, parse, account tokens.

    The budget check happens before any network traffic.
    """
    bundle = build_prompt(label_space, sample, query, style)
    prompt_tokens = estimate_tokens(bundle.messages, counter)
    budget = check_budget(prompt_tokens, backend.info.context_limit, reserve)
    if not budget.ok:
        raise BudgetExceededError(prompt_tokens, backend.info.context_limit, reserve)
    raw = _complete_with_retries(backend, bundle.messages, sleeper=sleeper)
    prediction = parse_response(raw, label_space)
    completion_tokens = counter(raw)
    cost = estimate_cost(
        prompt_tokens,
        completion_tokens,
        backend.info.prompt_rate,
        backend.info.completion_rate,
    )
    return prediction, cost


@dataclass(frozen=True)
class InstanceRecord:
    index: int
    query: str
    gold_label_id: int
    prediction: Prediction
    prompt_tokens: int
    completion_tokens: int

    def to_json_dict(self) -> dict:
        return {
            "index": self.index,
            "query": self.query,
            "gold_label_id": self.gold_label_id,
            "prediction": self.prediction.to_json_dict(),
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "InstanceRecord":
        return cls(
            index=data["index"],
            query=data["query"],
            gold_label_id=data["gold_label_id"],
            prediction=Prediction.from_json_dict(data["prediction"]),
            prompt_tokens=data["prompt_tokens"],
            completion_tokens=data["completion_tokens"],
        )


@dataclass
class RunRecord:
    instances: list[InstanceRecord]
    cost: CostEstimate
    backend_name: str
    style: PromptStyle
    provenance: dict
    seed: int
    manifest_hash: str

    def predictions(self) -> list[Prediction]:
        return [rec.prediction for rec in self.instances]

    def golds(self) -> list[int]:
        return [rec.gold_label_id for rec in self.instances]

    def summary_dict(self) -> dict:
        return {
            "n_instances": len(self.instances),
            "cost": self.cost.to_json_dict(),
            "backend": self.backend_name,
            "style": self.style.value,
            "provenance": self.provenance,
            "seed": self.seed,
            "manifest_hash": self.manifest_hash,
        }


def _canon_line(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def _run_manifest_hash(
    dataset: Dataset,
    sample: FewShotSample,
    style: PromptStyle,
    backend: ChatBackend,
    seed: int,
    reserve: int,
) -> str:
    manifest = {
        "dataset_fingerprint": dataset.fingerprint,
        "n_instances": len(dataset.utterances),
        "sample_hash": sample.content_hash(),
        "style": style.value,
        "backend": backend.info.name,
        "seed": seed,
        "reserve": reserve,
    }
    return hashlib.sha256(_canon_line(manifest).encode("utf-8")).hexdigest()


def _read_checkpoint(path: Path, manifest_hash: str) -> tuple[list[InstanceRecord], int]:
    """Recover committed instances; a torn final line (killed mid-write) is
    truncated away. Committed records must form a contiguous prefix."""
    raw = path.read_bytes()
    lines = raw.split(b"\n")
    keep: list[dict] = []
    valid_bytes = 0
    for line in lines:
        if not line:
            continue
        try:
            keep.append(json.loads(line.decode("utf-8")))
        except (json.JSONDecodeError, UnicodeDecodeError):
            break
        valid_bytes += len(line) + 1
    if valid_bytes < len(raw):
        with path.open("r+b") as fh:
            fh.truncate(valid_bytes)
    if not keep:
        return [], 0
    header = keep[0]
    if header.get("kind") != "header":
        raise DataFormatError(f"{path}: first line is not a run header")
    if header.get("manifest_hash") != manifest_hash:
        raise DomainError(
            "checkpoint was produced with different run parameters; "
            "refusing to resume"
        )
    records = []
    for i, entry in enumerate(keep[1:]):
        if entry.get("kind") != "instance":
            raise DataFormatError(f"{path}: unexpected entry kind {entry.get('kind')!r}")
        rec = InstanceRecord.from_json_dict(entry["record"])
        if rec.index != i:
            raise DataFormatError(
                f"{path}: checkpoint records are not a contiguous prefix "
                f"(expected index {i}, found {rec.index})"
            )
        records.append(rec)
    return records, valid_bytes


def run_batch(
    backend: ChatBackend,
    dataset: Dataset,
    sample: FewShotSample,
    style: PromptStyle,
    checkpoint_path: str | Path,
    seed: int = 0,
    reserve: int = DEFAULT_COMPLETION_RESERVE,
    counter: TokenCounter = default_token_counter,
    sleeper: Callable[[float], None] = time.sleep,
) -> RunRecord:
    """Classify every instance of the dataset, in order, resumably.

    Each result is appended to the checkpoint and fsynced before the next
    request, so a killed run loses at most the in-flight instance. Resuming
    verifies the run-parameter hash and never re-submits a committed
    instance. On completion a summary JSON is written next to the record.
    """
    style = PromptStyle(style)
    path = Path(checkpoint_path)
    manifest_hash = _run_manifest_hash(dataset, sample, style, backend, seed, reserve)
    records: list[InstanceRecord] = []
    if path.exists() and path.stat().st_size > 0:
        records, _ = _read_checkpoint(path, manifest_hash)
    label_space = dataset.label_space
    with path.open("a", encoding="utf-8") as fh:
        if not records and fh.tell() == 0:
            header = {
                "kind": "header",
                "manifest_hash": manifest_hash,
                "backend": backend.info.name,
                "style": style.value,
                "provenance": sample.provenance.describe(),
                "seed": seed,
            }
            fh.write(_canon_line(header) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        for i in range(len(records), len(dataset.utterances)):
            utt = dataset.utterances[i]
            prediction, cost = classify_one(
                backend,
                label_space,
                sample,
                utt.text,
                style,
                reserve=reserve,
                counter=counter,
                sleeper=sleeper,
            )
            rec = InstanceRecord(
                index=i,
                query=utt.text,
                gold_label_id=utt.label_id,
                prediction=prediction,
                prompt_tokens=cost.prompt_tokens,
                completion_tokens=cost.completion_tokens,
            )
            records.append(rec)
            fh.write(_canon_line({"kind": "instance", "record": rec.to_json_dict()}) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
    prompt_total = sum(r.prompt_tokens for r in records)
    completion_total = sum(r.completion_tokens for r in records)
    cost = estimate_cost(
        prompt_total,
        completion_total,
        backend.info.prompt_rate,
        backend.info.completion_rate,
    )
    record = RunRecord(
        instances=records,
        cost=cost,
        backend_name=backend.info.name,
        style=style,
        provenance=sample.provenance.describe(),
        seed=seed,
        manifest_hash=manifest_hash,
    )
    summary_path = Path(str(path) + ".summary.json")
    summary_path.write_text(
        json.dumps(record.summary_dict(), sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    return record


def load_run_record(checkpoint_path: str | Path) -> RunRecord:
    """Rebuild a RunRecord from its checkpoint file (for decoupled rescoring)."""
    path = Path(checkpoint_path)
    if not path.is_file():
        raise DataFormatError(f"run record not found: {path}")
    records: list[InstanceRecord] = []
    header = None
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}: bad line {lineno}: {exc}") from exc
            if entry.get("kind") == "header":
                header = entry
            elif entry.get("kind") == "instance":
                records.append(InstanceRecord.from_json_dict(entry["record"]))
            else:
                raise DataFormatError(
                    f"{path}: unexpected entry kind {entry.get('kind')!r}"
                )
    if header is None:
        raise DataFormatError(f"{path}: missing run header")
    if not records:
        raise DomainError(f"{path}: run record holds no instances")
    prompt_total = sum(r.prompt_tokens for r in records)
    completion_total = sum(r.completion_tokens for r in records)
    return RunRecord(
        instances=records,
        cost=estimate_cost(prompt_total, completion_total, 0.0, 0.0),
        backend_name=header.get("backend", "unknown"),
        style=PromptStyle(header.get("style", "system_context")),
        provenance=header.get("provenance", {}),
        seed=header.get("seed", 0),
        manifest_hash=header.get("manifest_hash", ""),
    )
