"""Deterministic per-step caption dropout.

Each (step, caption) cell gets its own SplitMix64 stream seeded by
``derive_seed(global_seed, step, caption_index)``. Non-trigger token
occurrences consume one uniform each, in token order, and are dropped
when the draw falls below the token's effective probability; trigger
tokens never draw and are always kept. Streams are therefore pure
functions of their inputs: any cell can be recomputed in isolation and
parallel evaluation cannot change the output.

Steps are 1-based, matching training loops that run i = 1..N.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .captions import CaptionRecord, TokenizationMode
from .policy import DropoutPolicy, ScheduleConfig, schedule_factor
from .rng import MASK64, SplitMix64, derive_seed

VARIANT_MODES = ("normal", "fad", "sfad", "uniform")
SAMPLING_MODES = ("cycle", "shuffle-per-epoch")

# Salt separating the epoch-shuffle seed domain from augmentation cells.
SHUFFLE_SALT = 0xA0761D6478BD642F


@dataclass(frozen=True)
class VariantMode:
    """Dropout variant: no dropout, frequency-aware, scheduled, or flat.

    ``uniform_p`` is only consulted by the ``uniform`` variant, which
    drops every non-trigger token at that single flat rate.
    """

    mode: str = "fad"
    uniform_p: float = 0.5

    def __post_init__(self):
        if self.mode not in VARIANT_MODES:
            raise ValueError(f"unknown variant mode {self.mode!r}")
        if not (0.0 <= self.uniform_p <= 1.0):
            raise ValueError(f"uniform_p must be in [0, 1], got {self.uniform_p}")

    @classmethod
    def normal(cls) -> "VariantMode":
        return cls(mode="normal")

    @classmethod
    def fad(cls) -> "VariantMode":
        return cls(mode="fad")

    @classmethod
    def sfad(cls) -> "VariantMode":
        return cls(mode="sfad")

    @classmethod
    def uniform(cls, p: float) -> "VariantMode":
        return cls(mode="uniform", uniform_p=p)


@dataclass(frozen=True)
class AugmentedCaption:
    """One augmented caption: split into kept and dropped tokens.

    ``kept + dropped`` is the source token multiset; relative order is
    preserved within each list. ``seed_used`` is the derived 64-bit cell
    seed, recorded so any record can be reproduced in isolation.
    """

    step: int
    caption_index: int
    kept: tuple[str, ...]
    dropped: tuple[str, ...]
    seed_used: int

    @property
    def empty(self) -> bool:
        """True when every token was dropped (trigger-less captions only)."""
        return not self.kept


def effective_probability(
    policy: DropoutPolicy,
    cfg: ScheduleConfig | None,
    token: str,
    step: int,
    mode: VariantMode,
) -> float:
    """Drop probability of a token at a step under the given variant.

    Trigger tokens are 0 in every mode. ``cfg`` is only consulted for
    the scheduled variant.
    """
    if token in policy.trigger.tokens:
        return 0.0
    if mode.mode == "normal":
        return 0.0
    if mode.mode == "uniform":
        return mode.uniform_p
    if mode.mode == "fad":
        return policy.probability(token)
    if cfg is None:
        raise ValueError("scheduled dropout needs a ScheduleConfig")
    return policy.probability(token) * schedule_factor(step, cfg)


def augment_caption(
    caption: CaptionRecord,
    policy: DropoutPolicy,
    cfg: ScheduleConfig | None,
    step: int,
    mode: VariantMode,
    global_seed: int,
) -> AugmentedCaption:
    """Apply dropout to one caption at one training step.

    Duplicate occurrences draw independently; a trigger-less caption may
    end up with an empty kept list, which is emitted as-is and flagged
    via ``AugmentedCaption.empty``.
    """
    seed = derive_seed(global_seed, step, caption.index)
    rng = SplitMix64(seed)
    factor = schedule_factor(step, cfg) if mode.mode == "sfad" else None
    kept: list[str] = []
    dropped: list[str] = []
    trigger_tokens = policy.trigger.tokens
    for token in caption.tokens:
        if token in trigger_tokens:
            kept.append(token)
            continue
        u = rng.uniform()
        if mode.mode == "normal":
            p = 0.0
        elif mode.mode == "uniform":
            p = mode.uniform_p
        elif mode.mode == "fad":
            p = policy.probability(token)
        else:
            p = policy.probability(token) * factor
        if u < p:
            dropped.append(token)
        else:
            kept.append(token)
    return AugmentedCaption(
        step=step,
        caption_index=caption.index,
        kept=tuple(kept),
        dropped=tuple(dropped),
        seed_used=seed,
    )


def _epoch_permutation(global_seed: int, epoch: int, n: int) -> list[int]:
    rng = SplitMix64(derive_seed(global_seed ^ SHUFFLE_SALT, epoch, 0))
    return rng.shuffled(n)


def augment_stream(
    dataset: Sequence[CaptionRecord],
    policy: DropoutPolicy,
    cfg: ScheduleConfig | None,
    steps: int,
    mode: VariantMode,
    global_seed: int,
    sampling: str = "cycle",
    workers: int | None = None,
) -> Iterator[AugmentedCaption]:
    """Emit one augmented caption per step, for steps 1..steps.

    ``cycle`` picks caption ``step % len(dataset)``; ``shuffle-per-epoch``
    draws a fresh permutation per pass over the dataset, seeded from
    (global_seed, epoch). With ``workers`` > 1, steps are computed in
    parallel chunks; output order and content are identical to the
    serial run because every cell is independently seeded.
    """
    if not dataset:
        raise ValueError("dataset must be non-empty")
    if steps < 1:
        raise ValueError(f"steps must be positive, got {steps}")
    if sampling not in SAMPLING_MODES:
        raise ValueError(f"unknown sampling mode {sampling!r}")

    n = len(dataset)
    _permutations: dict[int, list[int]] = {}

    def record_for(step: int) -> CaptionRecord:
        if sampling == "cycle":
            return dataset[step % n]
        epoch, pos = divmod(step - 1, n)
        if epoch not in _permutations:
            _permutations[epoch] = _epoch_permutation(global_seed, epoch, n)
        return dataset[_permutations[epoch][pos]]

    def compute(step: int) -> AugmentedCaption:
        return augment_caption(record_for(step), policy, cfg, step, mode, global_seed)

    all_steps = range(1, steps + 1)
    if workers is None or workers <= 1:
        for step in all_steps:
            yield compute(step)
        return

    # Permutations are materialized up front so worker threads only read.
    if sampling == "shuffle-per-epoch":
        for epoch in range((steps + n - 1) // n):
            _permutations[epoch] = _epoch_permutation(global_seed, epoch, n)
    chunk = 256
    with ThreadPoolExecutor(max_workers=workers) as pool:
        blocks = [range(lo, min(lo + chunk, steps + 1)) for lo in range(1, steps + 1, chunk)]
        for results in pool.map(lambda block: [compute(s) for s in block], blocks):
            yield from results


# Line formats. "jsonl" carries the full split plus seed provenance;
# "compact" is the trainer-facing form with kept tokens re-joined.


def full_record_line(rec: AugmentedCaption) -> str:
    obj = {
        "step": rec.step,
        "caption_index": rec.caption_index,
        "kept": list(rec.kept),
        "dropped": list(rec.dropped),
        "seed_used": rec.seed_used,
    }
    if rec.empty:
        obj["empty"] = True
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def compact_record_line(rec: AugmentedCaption, delimiter: str) -> str:
    obj = {"step": rec.step, "caption": delimiter.join(rec.kept)}
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def format_stream(
    stream: Iterable[AugmentedCaption],
    fmt: str = "jsonl",
    tokenization: TokenizationMode | None = None,
) -> Iterator[str]:
    """Serialize augmented captions to output lines (without newlines)."""
    if fmt == "jsonl":
        for rec in stream:
            yield full_record_line(rec)
    elif fmt == "compact":
        delimiter = (tokenization or TokenizationMode()).delimiter
        for rec in stream:
            yield compact_record_line(rec, delimiter)
    else:
        raise ValueError(f"unknown stream format {fmt!r}")


def parse_full_line(line: str) -> AugmentedCaption:
    obj = json.loads(line)
    return AugmentedCaption(
        step=obj["step"],
        caption_index=obj["caption_index"],
        kept=tuple(obj["kept"]),
        dropped=tuple(obj["dropped"]),
        seed_used=obj["seed_used"] & MASK64,
    )


def parse_compact_line(line: str) -> tuple[int, str]:
    obj = json.loads(line)
    return obj["step"], obj["caption"]
