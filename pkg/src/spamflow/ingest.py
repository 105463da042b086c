"""Timeline parsing, text normalization, and document construction.

Input is JSONL, one message per line:

    {"user": "u1", "id": "m1", "ts": 1489400000, "text": "...", "repost": false}

``repost`` is optional and defaults to false. Parsing is tolerant: malformed
records are collected with their line numbers instead of aborting the run,
and duplicate message ids are dropped and counted.
"""

from __future__ import annotations

import json
import logging
import re
import unicodedata
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .errors import DataError
from .validation import check_positive_int

logger = logging.getLogger(__name__)

__all__ = [
    "Message",
    "Timeline",
    "Document",
    "IngestReport",
    "parse_timelines",
    "read_timelines",
    "clean_and_tokenize",
    "load_stopwords",
    "build_documents",
    "write_documents",
    "read_documents",
    "write_token_messages",
    "read_token_messages",
]

URL_SPLIT_RE = re.compile(r"(https?://\S+)")
URL_RE = re.compile(r"https?://\S+\Z")


@dataclass(frozen=True)
class Message:
    message_id: str
    author: str
    timestamp: int
    text: str
    is_repost: bool = False


@dataclass(frozen=True)
class Timeline:
    """One user's retained messages, oldest first."""

    user: str
    messages: tuple[Message, ...]


@dataclass(frozen=True)
class Document:
    doc_id: str
    user: str
    tokens: tuple[str, ...]
    source_message_ids: tuple[str, ...]


@dataclass
class IngestReport:
    malformed: list[tuple[int, str]] = field(default_factory=list)
    duplicate_ids: int = 0
    truncated: int = 0
    n_messages: int = 0

    def summary(self) -> str:
        return (
            f"{self.n_messages} messages kept, {len(self.malformed)} malformed, "
            f"{self.duplicate_ids} duplicate ids, {self.truncated} dropped by cap"
        )


def _validate_record(record) -> Message:
    if not isinstance(record, dict):
        raise ValueError("record is not an object")
    for key in ("user", "id", "text"):
        value = record.get(key)
        if not isinstance(value, str):
            raise ValueError(f"missing or non-string field {key!r}")
    if not record["user"] or not record["id"]:
        raise ValueError("empty 'user' or 'id'")
    if not record["text"]:
        raise ValueError("empty 'text'")
    ts = record.get("ts")
    if isinstance(ts, bool) or not isinstance(ts, int):
        raise ValueError("missing or non-integer field 'ts'")
    repost = record.get("repost", False)
    if not isinstance(repost, bool):
        raise ValueError("field 'repost' must be a boolean")
    return Message(record["id"], record["user"], ts, record["text"], repost)


def parse_timelines(
    lines: Iterable[str], per_user_cap: int = 300
) -> tuple[list[Timeline], IngestReport]:
    """Parse JSONL message records into per-user timelines.

    Keeps at most ``per_user_cap`` most-recent messages per user (ties on
    timestamp broken by message id, so truncation is deterministic).
    Returns timelines sorted by user id.
    """
    per_user_cap = check_positive_int(per_user_cap, "per_user_cap")
    report = IngestReport()
    by_user: dict[str, list[Message]] = {}
    seen_ids: set[str] = set()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            message = _validate_record(record)
        except (json.JSONDecodeError, ValueError) as exc:
            report.malformed.append((line_no, str(exc)))
            continue
        if message.message_id in seen_ids:
            report.duplicate_ids += 1
            continue
        seen_ids.add(message.message_id)
        by_user.setdefault(message.author, []).append(message)

    timelines = []
    for user in sorted(by_user):
        messages = sorted(by_user[user], key=lambda m: (m.timestamp, m.message_id))
        if len(messages) > per_user_cap:
            report.truncated += len(messages) - per_user_cap
            messages = messages[-per_user_cap:]
        report.n_messages += len(messages)
        timelines.append(Timeline(user, tuple(messages)))
    if report.malformed:
        logger.warning("ingest: %d malformed records skipped", len(report.malformed))
    return timelines, report


def read_timelines(path, per_user_cap: int = 300) -> tuple[list[Timeline], IngestReport]:
    with open(path, encoding="utf-8") as handle:
        return parse_timelines(handle, per_user_cap)


def _plain_words(segment: str, stopwords) -> list[str]:
    # Punctuation, symbols-as-separators and control characters become spaces;
    # everything else is lowercased in place.
    chars = []
    for ch in segment:
        category = unicodedata.category(ch)
        if category.startswith("P") or category.startswith("C"):
            chars.append(" ")
        else:
            chars.append(ch.lower())
    return [w for w in "".join(chars).split() if w and w not in stopwords]


def clean_and_tokenize(text: str, stopwords=frozenset(), mode: str = "grouping") -> list[str]:
    """Lowercase, strip punctuation, drop stop words.

    In "grouping" mode each URL survives as a single token of the form
    ``<url:...>`` so that shared links count toward message similarity.
    In "topic" mode URLs are removed entirely.
    """
    if mode not in ("grouping", "topic"):
        raise DataError(f"unknown tokenizer mode {mode!r}")
    tokens: list[str] = []
    for part in URL_SPLIT_RE.split(text):
        if URL_RE.match(part):
            if mode == "grouping":
                tokens.append(f"<url:{part}>")
        elif part:
            tokens.extend(_plain_words(part, stopwords))
    return tokens


def load_stopwords(path) -> frozenset:
    words = set()
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            word = line.strip().lower()
            if word:
                words.add(word)
    return frozenset(words)


def build_documents(
    timeline: Timeline,
    length: int,
    tokenize: Callable[[str], list[str]] | None = None,
) -> list[Document]:
    """Concatenate consecutive runs of ``length`` messages into documents.

    The final partial run is kept, so a timeline with n messages yields
    ceil(n / length) documents. Token order follows message order.
    """
    length = check_positive_int(length, "length")
    if tokenize is None:
        tokenize = lambda text: clean_and_tokenize(text, frozenset(), mode="topic")
    documents = []
    messages = timeline.messages
    for index, start in enumerate(range(0, len(messages), length)):
        chunk = messages[start : start + length]
        tokens: list[str] = []
        for message in chunk:
            tokens.extend(tokenize(message.text))
        documents.append(
            Document(
                doc_id=f"{timeline.user}#d{index}",
                user=timeline.user,
                tokens=tuple(tokens),
                source_message_ids=tuple(m.message_id for m in chunk),
            )
        )
    return documents


def write_documents(documents: Iterable[Document], path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for doc in documents:
            handle.write(
                json.dumps(
                    {
                        "doc_id": doc.doc_id,
                        "user": doc.user,
                        "tokens": list(doc.tokens),
                        "sources": list(doc.source_message_ids),
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def read_documents(path) -> list[Document]:
    documents = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            record = json.loads(line)
            documents.append(
                Document(
                    doc_id=record["doc_id"],
                    user=record["user"],
                    tokens=tuple(record["tokens"]),
                    source_message_ids=tuple(record["sources"]),
                )
            )
    return documents


def write_token_messages(rows: Iterable[tuple[str, str, list[str]]], path) -> None:
    """Persist (message_id, author, tokens) triples as JSONL."""
    with open(path, "w", encoding="utf-8") as handle:
        for message_id, author, tokens in rows:
            handle.write(
                json.dumps(
                    {"id": message_id, "author": author, "tokens": list(tokens)},
                    sort_keys=True,
                )
                + "\n"
            )


def read_token_messages(path) -> list[tuple[str, str, list[str]]]:
    rows = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            record = json.loads(line)
            rows.append((record["id"], record["author"], list(record["tokens"])))
    return rows
