"""Prompt construction for chat-based intent classification.

Builds the three-part classification prompt (task description, numbered
class list, demonstrations, then the bare query) in two placements: all
content in a single system message, or demonstrations as prior dialogue
turns. Also: pluggable token estimation, context-budget checks, and dollar
cost arithmetic with a bundled price table.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

from .corpus import FewShotSample, LabelSpace
from .errors import DataFormatError, DomainError

TASK_DESCRIPTION = (
    "You are an expert assistant in the field of customer service. "
    "Your task is to help workers in the customer service department "
    "of a company. "
    "Your task is to classify the customer's question in order to help "
    "the customer service worker to answer the question. "
    "In order to help the worker, you MUST respond with the number and "
    "the name of one of the following classes you know. "
    'If you cannot answer the question, respond: "-1 Unknown". '
    "In case you reply with something else, you will be penalized."
)

CLASSES_HEADER = "The classes are:"
EXAMPLES_HEADER = "Here are some examples of questions and their classes:"

PER_MESSAGE_OVERHEAD = 4
DEFAULT_COMPLETION_RESERVE = 16

TokenCounter = Callable[[str], int]


class PromptStyle(str, Enum):
    SYSTEM_CONTEXT = "system_context"
    CHAT_HISTORY = "chat_history"


_ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in _ROLES:
            raise DomainError(f"unknown chat role {self.role!r}")
        if not self.content:
            raise DomainError("chat message content must be non-empty")

    def to_json_dict(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass(frozen=True)
class PromptBundle:
    messages: tuple[ChatMessage, ...]
    style: PromptStyle
    estimated_tokens: int
    class_count: int
    shot_count: int

    def rendered(self) -> str:
        """Flat text view (role-tagged) for golden files and debugging."""
        blocks = [f"[{m.role}]\n{m.content}" for m in self.messages]
        return "\n\n".join(blocks) + "\n"


@dataclass(frozen=True)
class BudgetCheck:
    ok: bool
    margin: int
    tokens: int
    limit: int
    reserve: int


@dataclass(frozen=True)
class CostEstimate:
    prompt_tokens: int
    completion_tokens: int
    price_per_1k_prompt: float
    price_per_1k_completion: float
    total_usd: float

    def to_json_dict(self) -> dict:
        return {
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "price_per_1k_prompt": self.price_per_1k_prompt,
            "price_per_1k_completion": self.price_per_1k_completion,
            "total_usd": self.total_usd,
        }


@dataclass(frozen=True)
class ModelPricing:
    name: str
    prompt_rate: float
    completion_rate: float
    context_limit: int


def default_token_counter(text: str) -> int:
    """Crude length proxy: one token per 4 characters, rounded up."""
    return math.ceil(len(text) / 4)


def render_class_listing(label_space: LabelSpace) -> str:
    return "\n".join(f"{i} {name}" for i, name in enumerate(label_space.names))


def _example_pairs(sample: FewShotSample) -> list[tuple[str, int, str]]:
    """(utterance, label_id, label_name) in class order, sample order within."""
    pairs = []
    for label_id in range(len(sample.label_space)):
        name = sample.label_space.names[label_id]
        for utt in sample.instances[label_id]:
            pairs.append((utt.text, label_id, name))
    return pairs


def build_prompt(
    label_space: LabelSpace,
    sample: FewShotSample,
    query: str,
    style: PromptStyle = PromptStyle.SYSTEM_CONTEXT,
) -> PromptBundle:
    """Deterministic prompt for one query under the chosen placement.

    system_context packs task + class list + demonstrations into a single
    system message followed by the bare query; chat_history keeps the task
    and class list in the system message and replays demonstrations as
    user/assistant turns where the assistant answers `<index> <name>`.
    """
    style = PromptStyle(style)
    if not query or not query.strip():
        raise DomainError("query must be non-empty")
    if sample.label_space.names != label_space.names:
        raise DomainError("sample does not cover the requested label space")
    listing = render_class_listing(label_space)
    preamble = f"{TASK_DESCRIPTION}\n\n{CLASSES_HEADER}\n{listing}"
    pairs = _example_pairs(sample)
    if style is PromptStyle.SYSTEM_CONTEXT:
        example_block = "\n".join(f"{text} {name}" for text, _, name in pairs)
        system = f"{preamble}\n\n{EXAMPLES_HEADER}\n{example_block}"
        messages = [ChatMessage("system", system), ChatMessage("user", query)]
    else:
        messages = [ChatMessage("system", preamble)]
        for text, label_id, name in pairs:
            messages.append(ChatMessage("user", text))
            messages.append(ChatMessage("assistant", f"{label_id} {name}"))
        messages.append(ChatMessage("user", query))
    bundle_messages = tuple(messages)
    return PromptBundle(
        messages=bundle_messages,
        style=style,
        estimated_tokens=estimate_tokens(bundle_messages),
        class_count=len(label_space),
        shot_count=sample.shots_per_class,
    )


def estimate_tokens(
    messages: PromptBundle | Sequence[ChatMessage],
    counter: TokenCounter = default_token_counter,
    per_message_overhead: int = PER_MESSAGE_OVERHEAD,
) -> int:
    """Sum of counter(content) plus a fixed per-message overhead.

    The default counter is a character-count heuristic; pass an exact
    vendor tokenizer when one is available.
    """
    if isinstance(messages, PromptBundle):
        messages = messages.messages
    return sum(counter(m.content) + per_message_overhead for m in messages)


def check_budget(
    tokens: int,
    limit: int,
    reserve: int = DEFAULT_COMPLETION_RESERVE,
) -> BudgetCheck:
    """Pass iff tokens + reserve fit in the context limit."""
    if limit <= 0:
        raise DomainError(f"context limit must be positive, got {limit}")
    if tokens < 0 or reserve < 0:
        raise DomainError("token counts must be nonnegative")
    margin = limit - tokens - reserve
    return BudgetCheck(margin >= 0, margin, tokens, limit, reserve)


def estimate_cost(
    prompt_tokens: int,
    completion_tokens: int,
    price_per_1k_prompt: float,
    price_per_1k_completion: float,
) -> CostEstimate:
    """total = (prompt·rate_p + completion·rate_c) / 1000, in dollars."""
    if prompt_tokens < 0 or completion_tokens < 0:
        raise DomainError("token counts must be nonnegative")
    if price_per_1k_prompt < 0 or price_per_1k_completion < 0:
        raise DomainError("rates must be nonnegative")
    total = (
        prompt_tokens * price_per_1k_prompt
        + completion_tokens * price_per_1k_completion
    ) / 1000.0
    return CostEstimate(
        prompt_tokens=prompt_tokens,
        completion_tokens=completion_tokens,
        price_per_1k_prompt=price_per_1k_prompt,
        price_per_1k_completion=price_per_1k_completion,
        total_usd=total,
    )


def load_price_table(path: str | Path | None = None) -> dict[str, ModelPricing]:
    """Bundled price table by default; JSON {model: {rates, context_limit}}."""
    if path is None:
        raw = resources.files("fewintent").joinpath("prices.json").read_text("utf-8")
    else:
        path = Path(path)
        if not path.is_file():
            raise DataFormatError(f"price table not found: {path}")
        raw = path.read_text(encoding="utf-8")
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"price table is not valid JSON: {exc}") from exc
    table = {}
    for name, entry in data.items():
        try:
            table[name] = ModelPricing(
                name=name,
                prompt_rate=float(entry["prompt_rate"]),
                completion_rate=float(entry["completion_rate"]),
                context_limit=int(entry["context_limit"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"malformed price entry for {name!r}: {exc}") from exc
    return table
