"""Frequency histograms over corpora and empirical checks of streams."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable

from .augment import AugmentedCaption
from .captions import CaptionRecord, TriggerSet


@dataclass(frozen=True)
class FrequencyEntry:
    token: str
    count: int
    ratio: float
    is_trigger: bool


@dataclass(frozen=True)
class FrequencyReport:
    """Per-token caption-presence counts over a whole dataset.

    Entries are sorted by descending count, ties broken by token string,
    so repeated runs emit byte-identical reports.
    """

    entries: tuple[FrequencyEntry, ...]
    dataset_size: int

    def top(self, k: int) -> "FrequencyReport":
        return FrequencyReport(entries=self.entries[:k], dataset_size=self.dataset_size)

    def to_dict(self) -> dict:
        return {
            "dataset_size": self.dataset_size,
            "entries": [
                {
                    "token": e.token,
                    "count": e.count,
                    "ratio": e.ratio,
                    "is_trigger": e.is_trigger,
                }
                for e in self.entries
            ],
        }

    def to_plot_text(self) -> str:
        """Two-column plot data: token and caption-presence count."""
        return "".join(f"{e.token}\t{e.count}\n" for e in self.entries)


def tag_frequency(dataset: list[CaptionRecord], trigger: TriggerSet) -> FrequencyReport:
    """Count, for every token, the captions it appears in at least once."""
    counts: Counter[str] = Counter()
    for record in dataset:
        counts.update(set(record.tokens))
    size = len(dataset)
    entries = tuple(
        FrequencyEntry(token=tok, count=counts[tok], ratio=counts[tok] / size, is_trigger=tok in trigger.tokens)
        for tok in sorted(counts, key=lambda t: (-counts[t], t))
    )
    return FrequencyReport(entries=entries, dataset_size=size)


def empirical_drop_rates(stream: Iterable[AugmentedCaption]) -> dict[str, float]:
    """Observed per-token drop ratio over an augmented stream.

    For each token: dropped occurrences divided by total occurrences
    across every record in the stream.
    """
    dropped: Counter[str] = Counter()
    total: Counter[str] = Counter()
    seen = False
    for rec in stream:
        seen = True
        dropped.update(rec.dropped)
        total.update(rec.kept)
        total.update(rec.dropped)
    if not seen:
        raise ValueError("stream is empty")
    return {tok: dropped[tok] / total[tok] for tok in total}
