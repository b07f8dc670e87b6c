"""Caption parsing, normalization, and dataset loading.

Captions are either comma-separated tag lists ("tag" mode, the default
for booru-style datasets) or free text split on whitespace ("word" mode).
A multi-word tag such as ``red jacket`` is a single token in tag mode and
two tokens in word mode.
"""

from __future__ import annotations

import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Union

from .errors import BlankCaption, EmptyDataset, MalformedRecord

log = logging.getLogger(__name__)

_MODES = ("tag", "word")
_DELIMITERS = {"tag": ", ", "word": " "}


@dataclass(frozen=True)
class TokenizationMode:
    """How raw caption text becomes tokens.

    Tag mode splits on commas and (with ``trim``) strips surrounding
    whitespace from each fragment; word mode splits on runs of
    whitespace. ``lowercase`` folds case so that statistics do not
    fragment on capitalization. Empty fragments are always discarded.
    """

    mode: str = "tag"
    lowercase: bool = True
    trim: bool = True

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"unknown tokenization mode {self.mode!r}")

    @property
    def delimiter(self) -> str:
        """Canonical join delimiter: ', ' for tags, ' ' for words."""
        return _DELIMITERS[self.mode]

    def split(self, raw: str) -> list[str]:
        if self.mode == "word":
            fragments = raw.split()
        else:
            fragments = raw.split(",")
            if self.trim:
                fragments = [f.strip() for f in fragments]
        if self.lowercase:
            fragments = [f.lower() for f in fragments]
        return [f for f in fragments if f]

    def normalize_token(self, token: str) -> str:
        """Normalize an already-isolated token (no splitting)."""
        if self.trim or self.mode == "word":
            token = token.strip()
        if self.lowercase:
            token = token.lower()
        return token

    def join(self, tokens: Iterable[str]) -> str:
        return self.delimiter.join(tokens)


@dataclass(frozen=True)
class CaptionRecord:
    """One caption: source line index, token sequence, original text."""

    index: int
    tokens: tuple[str, ...]
    raw: str


@dataclass(frozen=True)
class TriggerSet:
    """One or more trigger phrases, each an ordered token sequence.

    A single new identifier is the common case; anchor phrases
    ("japanese man") and multi-concept trigger lists are also supported.
    In tag mode an anchor phrase is one tag token; in word mode it is a
    contiguous token subsequence.
    """

    phrases: tuple[tuple[str, ...], ...]
    tokens: frozenset[str] = field(init=False, compare=False)

    def __post_init__(self):
        if not self.phrases:
            raise ValueError("trigger set must contain at least one phrase")
        if len(set(self.phrases)) != len(self.phrases):
            raise ValueError("trigger phrases must be distinct after normalization")
        for phrase in self.phrases:
            if not phrase or any(not tok for tok in phrase):
                raise ValueError(f"invalid trigger phrase {phrase!r}")
        object.__setattr__(self, "tokens", frozenset(t for p in self.phrases for t in p))

    @classmethod
    def from_strings(cls, phrases: Iterable[str], mode: TokenizationMode) -> "TriggerSet":
        """Build a trigger set from raw phrase strings.

        Tag mode keeps each phrase as one normalized tag token (commas
        are rejected); word mode splits phrases on whitespace.
        """
        normalized: list[tuple[str, ...]] = []
        for raw in phrases:
            if mode.mode == "tag":
                if "," in raw:
                    raise ValueError(f"trigger tag {raw!r} may not contain a comma")
                tok = mode.normalize_token(raw)
                phrase = (tok,) if tok else ()
            else:
                phrase = tuple(mode.split(raw))
            if not phrase:
                raise ValueError(f"trigger phrase {raw!r} is empty after normalization")
            if phrase not in normalized:
                normalized.append(phrase)
        return cls(tuple(normalized))

    def matches(self, tokens: tuple[str, ...] | list[str]) -> bool:
        """True if any phrase occurs in the token sequence."""
        return any(_contains_phrase(tokens, p) for p in self.phrases)

    def as_strings(self, mode: TokenizationMode) -> list[str]:
        return [mode.join(p) for p in self.phrases]

    def to_json(self) -> list[list[str]]:
        return [list(p) for p in self.phrases]

    @classmethod
    def from_json(cls, data: Iterable[Iterable[str]]) -> "TriggerSet":
        return cls(tuple(tuple(p) for p in data))


def _contains_phrase(tokens, phrase) -> bool:
    if len(phrase) == 1:
        return phrase[0] in tokens
    n = len(phrase)
    return any(tuple(tokens[i : i + n]) == phrase for i in range(len(tokens) - n + 1))


def parse_caption(raw: str, mode: TokenizationMode, index: int = 0) -> CaptionRecord:
    """Tokenize one caption line.

    Raises BlankCaption when nothing survives normalization.
    """
    tokens = mode.split(raw)
    if not tokens:
        raise BlankCaption(f"caption at index {index} has no tokens: {raw!r}")
    return CaptionRecord(index=index, tokens=tuple(tokens), raw=raw)


Source = Union[str, Path, IO[bytes], IO[str]]


def load_dataset(source: Source, mode: TokenizationMode, fmt: str = "auto") -> list[CaptionRecord]:
    """Load captions from plain text or line-delimited JSON.

    One record per non-blank line; ``index`` is the 0-based line number,
    so blank lines leave gaps. JSON lines need a ``"caption"`` string
    field; an optional ``"tags"`` list of strings wins over ``"caption"``
    and bypasses splitting (tokens are still normalized). ``fmt`` is
    ``"text"``, ``"jsonl"``, or ``"auto"`` to sniff from the first
    non-blank line.
    """
    lines = _read_lines(source)
    if fmt not in ("auto", "text", "jsonl"):
        raise ValueError(f"unknown input format {fmt!r}")
    if fmt == "auto":
        fmt = _sniff_format(lines)

    records: list[CaptionRecord] = []
    blank = 0
    for lineno, line in enumerate(lines):
        stripped = line.strip()
        if not stripped:
            blank += 1
            continue
        if fmt == "jsonl":
            tokens = _tokens_from_json_line(stripped, lineno, mode)
            if not tokens:
                blank += 1
                continue
            records.append(CaptionRecord(index=lineno, tokens=tuple(tokens), raw=stripped))
        else:
            try:
                records.append(parse_caption(line.rstrip("\n"), mode, index=lineno))
            except BlankCaption:
                blank += 1
    if blank:
        log.debug("skipped %d blank caption line(s)", blank)
    if not records:
        raise EmptyDataset("no caption records found in input")
    return records


def _read_lines(source: Source) -> list[str]:
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return fh.readlines()
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return io.StringIO(data).readlines()


def _sniff_format(lines: list[str]) -> str:
    for line in lines:
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("{"):
            try:
                if isinstance(json.loads(stripped), dict):
                    return "jsonl"
            except json.JSONDecodeError:
                pass
        return "text"
    return "text"


def _tokens_from_json_line(line: str, lineno: int, mode: TokenizationMode) -> list[str]:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(lineno, f"invalid JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise MalformedRecord(lineno, "record is not an object")
    if "tags" in obj:
        tags = obj["tags"]
        if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
            raise MalformedRecord(lineno, '"tags" must be a list of strings')
        normalized = [mode.normalize_token(t) for t in tags]
        return [t for t in normalized if t]
    if "caption" not in obj:
        raise MalformedRecord(lineno, 'record is missing the "caption" field')
    caption = obj["caption"]
    if not isinstance(caption, str):
        raise MalformedRecord(lineno, '"caption" must be a string')
    return mode.split(caption)
