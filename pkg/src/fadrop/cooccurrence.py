"""Trigger-conditioned co-occurrence counting.

For the subset of captions containing the trigger, count for every token
the number of those captions it appears in (presence, not multiplicity)
and derive the co-occurrence ratio count / n_trigger in [0, 1].
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

from .captions import CaptionRecord, TriggerSet
from .errors import TriggerAbsent


@dataclass(frozen=True)
class CooccurrenceTable:
    """Per-token co-occurrence counts and ratios for one trigger set.

    ``n_trigger`` is the number of captions containing any trigger
    phrase; ``counts[w] <= n_trigger`` and ``ratios[w] == counts[w] /
    n_trigger`` for every token in the table.
    """

    trigger: TriggerSet
    n_trigger: int
    counts: Mapping[str, int]
    ratios: Mapping[str, float]

    def ratio(self, token: str) -> float:
        """Co-occurrence ratio of a token; 0.0 if it never co-occurs."""
        return self.ratios.get(token, 0.0)

    def to_dict(self) -> dict:
        entries = [
            {"token": tok, "count": self.counts[tok], "ratio": self.ratios[tok]}
            for tok in sorted(self.counts, key=lambda t: (-self.ratios[t], t))
        ]
        return {"trigger": self.trigger.to_json(), "n_t": self.n_trigger, "entries": entries}

    @classmethod
    def from_dict(cls, data: dict) -> "CooccurrenceTable":
        trigger = TriggerSet.from_json(data["trigger"])
        counts = {e["token"]: e["count"] for e in data["entries"]}
        ratios = {e["token"]: e["ratio"] for e in data["entries"]}
        return cls(trigger=trigger, n_trigger=data["n_t"], counts=counts, ratios=ratios)


def analyze(dataset: list[CaptionRecord], trigger: TriggerSet) -> CooccurrenceTable:
    """Count token co-occurrence over the trigger-containing captions.

    A caption counts once per token regardless of how many times the
    token occurs in it. Raises TriggerAbsent when no caption matches;
    callers must handle that rather than receive an empty table.
    """
    counts: Counter[str] = Counter()
    n_trigger = 0
    for record in dataset:
        if not trigger.matches(record.tokens):
            continue
        n_trigger += 1
        counts.update(set(record.tokens))
    if n_trigger == 0:
        phrases = " / ".join(" ".join(p) for p in trigger.phrases)
        raise TriggerAbsent(f"trigger {phrases!r} does not occur in any caption")
    ratios = {tok: c / n_trigger for tok, c in counts.items()}
    return CooccurrenceTable(
        trigger=trigger,
        n_trigger=n_trigger,
        counts=MappingProxyType(dict(counts)),
        ratios=MappingProxyType(ratios),
    )
