"""Regenerate data/synthetic5/{train,test}.csv.

Five lexically separable banking-style intents, rendered from slot
templates under a fixed seed. Every template carries its class's anchor
vocabulary so any random few-shot draw contains class-identifying
character n-grams; texts are globally unique so any pair of same-class
utterances is a valid positive pair. Run from the repo root:

    python3 tools/gen_synthetic5.py
"""

from __future__ import annotations

import csv
import random
from pathlib import Path

TEMPLATES = {
    "card_lost": [
        "I lost my card {when}, please block it and send a replacement card.",
        "My card was stolen {when}, block the card and issue a replacement.",
        "My card went missing {when}, I need it blocked and replaced.",
        "I misplaced my card {when} and need the card blocked and a replacement.",
        "My wallet was taken {when} with my card inside, please block and replace the card.",
    ],
    "transfer_failed": [
        "My transfer to {who} failed {when} and the money was sent back.",
        "The money transfer I sent {when} to {who} got declined and failed.",
        "Why did the transfer of money I sent to {who} {when} fail to go through?",
        "A money transfer I sent {when} bounced back as failed.",
        "My transfer keeps failing when I send money to {who}.",
    ],
    "check_balance": [
        "How do I check the balance on my {account}?",
        "Where can I check my current {account} balance?",
        "Can you show me the balance left on my {account}?",
        "I want to check my {account} balance {when}.",
        "Is there a way to check my remaining {account} balance?",
    ],
    "exchange_rate": [
        "What exchange rate do you use when converting {currency}?",
        "How is the exchange rate for converting {currency} calculated?",
        "The exchange rate applied when converting my {currency} seems wrong.",
        "Which exchange rate applies when converting to {currency}?",
        "Do you charge extra on the exchange rate when converting {currency}?",
    ],
    "atm_withdrawal": [
        "The ATM did not give me my cash {when} during a withdrawal.",
        "I withdrew cash from an ATM {when} but the withdrawal charged me twice.",
        "An ATM swallowed my cash withdrawal {when}.",
        "My cash withdrawal at the ATM {when} shows the wrong amount.",
        "The ATM declined my cash withdrawal {when}.",
    ],
}

PREFIXES = ["", "Hi, ", "Hello, ", "Hey, ", "Please help: "]
WHEN = [
    "yesterday", "this morning", "last night", "an hour ago", "on Monday",
    "on Friday", "last week", "today", "two days ago", "just now",
    "earlier today", "over the weekend", "a few minutes ago", "on Tuesday",
    "on Wednesday", "this afternoon", "this evening", "around noon",
    "late last night", "on Thursday",
]
WHO = [
    "my landlord", "my sister", "a friend", "my savings pot",
    "my brother", "a supplier", "my flatmate", "an overseas recipient",
    "my mum", "the electrician",
]
CURRENCY = [
    "euros", "US dollars", "pounds", "yen", "Swiss francs",
    "Australian dollars", "Canadian dollars", "krona", "zloty", "pesos",
    "forints", "rand", "lira", "baht", "rupees", "shekels",
]
ACCOUNT = [
    "account", "main account", "savings account", "joint account",
    "checking account", "current account",
]

TRAIN_PER_CLASS = 50
TEST_PER_CLASS = 20


def render_body(template: str, rnd: random.Random) -> str:
    return template.format(
        when=rnd.choice(WHEN),
        who=rnd.choice(WHO),
        currency=rnd.choice(CURRENCY),
        account=rnd.choice(ACCOUNT),
    )


def add_prefix(body: str, rnd: random.Random) -> str:
    prefix = rnd.choice(PREFIXES)
    if prefix and not prefix.rstrip().endswith(":"):
        # Mid-sentence continuation: don't shout with a capital letter.
        body = body[0].lower() + body[1:]
    return prefix + body


def main() -> None:
    rnd = random.Random(20240517)
    seen: set[str] = set()
    rows: dict[str, list[tuple[str, str]]] = {"train": [], "test": []}
    for label, templates in sorted(TEMPLATES.items()):
        texts = []
        i = 0
        # Round-robin over templates so every class covers all its phrasings
        # and a small random sample still sees varied surface forms.
        # Uniqueness is enforced on the slot-filled body, before the prefix,
        # so no two rows are mere greeting variants of each other.
        while len(texts) < TRAIN_PER_CLASS + TEST_PER_CLASS:
            if i > 100_000:
                raise RuntimeError(
                    f"class {label!r} cannot produce enough unique bodies; "
                    "add slot values or templates"
                )
            body = render_body(templates[i % len(templates)], rnd)
            i += 1
            if body not in seen:
                seen.add(body)
                texts.append(add_prefix(body, rnd))
        for text in texts[:TRAIN_PER_CLASS]:
            rows["train"].append((text, label))
        for text in texts[TRAIN_PER_CLASS:]:
            rows["test"].append((text, label))
    out_dir = Path(__file__).resolve().parent.parent / "data" / "synthetic5"
    out_dir.mkdir(parents=True, exist_ok=True)
    for split, split_rows in rows.items():
        with (out_dir / f"{split}.csv").open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["text", "category"])
            writer.writerows(split_rows)
        print(f"wrote {len(split_rows)} rows to {out_dir / f'{split}.csv'}")


if __name__ == "__main__":
    main()
