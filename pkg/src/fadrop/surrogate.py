"""Desk-scale check that dropout concentrates predictive weight on the trigger.

The setup mimics the entanglement problem in miniature: a synthetic
corpus where a handful of "style" tokens almost always accompany the
trigger token, so a classifier can predict trigger presence from the
style tokens alone. A logistic regression on bag-of-words indicators is
trained under each dropout variant, with captions passed through the
augmentor at every epoch. Two metrics summarize where the predictive
mass landed:

* trigger weight share: the trigger's weight divided by the summed
  trigger-plus-style weights (negative weights clipped to zero first),
* trigger-omission accuracy drop: accuracy on clean captions minus
  accuracy when the trigger token is removed from the input.

If frequency-aware dropout disentangles, its models show a share near 1
and a large omission drop, while the no-dropout baseline spreads weight
across the style tokens and barely suffers from trigger omission.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .augment import VariantMode
from .captions import CaptionRecord, TriggerSet
from .cooccurrence import analyze
from .errors import DivergedTraining
from .policy import (
    DropoutPolicy,
    PolicyParams,
    ScheduleConfig,
    build_policy,
    schedule_factor,
)
from .rng import derive_seeds_np, uniforms_at_np

TRIGGER_TOKEN = "trigger"


@dataclass(frozen=True)
class SyntheticCorpusConfig:
    """Entangled-corpus generator settings.

    ``style_cooccurrence`` is the chance each style token appears in a
    trigger-containing caption; fillers appear in all captions at
    ``filler_rate``. Defaults keep a full multi-mode experiment under a
    few seconds.
    """

    vocab_size: int = 200
    num_captions: int = 2000
    style_tokens: int = 5
    style_cooccurrence: float = 0.95
    trigger_prevalence: float = 0.5
    filler_rate: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.style_tokens + 2 > self.vocab_size:
            raise ValueError("vocab_size must exceed style_tokens + 1 (need at least one filler)")
        if self.num_captions < 1:
            raise ValueError("num_captions must be positive")
        for name in ("style_cooccurrence", "trigger_prevalence", "filler_rate"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {value}")

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "num_captions": self.num_captions,
            "style_tokens": self.style_tokens,
            "style_cooccurrence": self.style_cooccurrence,
            "trigger_prevalence": self.trigger_prevalence,
            "filler_rate": self.filler_rate,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class SyntheticCorpus:
    records: tuple[CaptionRecord, ...]
    labels: np.ndarray
    trigger: TriggerSet
    style: tuple[str, ...]
    fillers: tuple[str, ...]
    vocabulary: tuple[str, ...]


def generate_corpus(cfg: SyntheticCorpusConfig) -> SyntheticCorpus:
    """Generate the labeled synthetic corpus; label 1 iff trigger present.

    Draws come from fixed positions of each caption's own seed stream
    (draw 1: trigger presence; draws 2..k+1: style inclusion; the next
    block: fillers), so generation is reproducible caption by caption.
    A caption that would come out empty gets one forced filler token.
    """
    k = cfg.style_tokens
    n_fillers = cfg.vocab_size - 1 - k
    style = tuple(f"style_{i:02d}" for i in range(k))
    fillers = tuple(f"filler_{i:03d}" for i in range(n_fillers))
    vocabulary = (TRIGGER_TOKEN,) + style + fillers

    m = cfg.num_captions
    seeds = derive_seeds_np(cfg.seed, 0, np.arange(m, dtype=np.uint64))
    positive = uniforms_at_np(seeds, np.ones(m, dtype=np.uint64)) < cfg.trigger_prevalence
    style_draws = np.arange(2, k + 2, dtype=np.uint64)
    style_in = uniforms_at_np(seeds[:, None], style_draws[None, :]) < cfg.style_cooccurrence
    style_in &= positive[:, None]
    filler_draws = np.arange(k + 2, k + 2 + n_fillers, dtype=np.uint64)
    filler_in = uniforms_at_np(seeds[:, None], filler_draws[None, :]) < cfg.filler_rate

    would_be_empty = ~positive & ~filler_in.any(axis=1)
    if would_be_empty.any():
        forced_u = uniforms_at_np(seeds[would_be_empty], np.full(int(would_be_empty.sum()), k + 2 + n_fillers, dtype=np.uint64))
        forced_col = np.minimum((forced_u * n_fillers).astype(np.intp), n_fillers - 1)
        filler_in[np.flatnonzero(would_be_empty), forced_col] = True

    records = []
    for i in range(m):
        tokens: list[str] = []
        if positive[i]:
            tokens.append(TRIGGER_TOKEN)
            tokens.extend(style[j] for j in np.flatnonzero(style_in[i]))
        tokens.extend(fillers[j] for j in np.flatnonzero(filler_in[i]))
        records.append(CaptionRecord(index=i, tokens=tuple(tokens), raw=" ".join(tokens)))

    return SyntheticCorpus(
        records=tuple(records),
        labels=positive.astype(np.float64),
        trigger=TriggerSet(((TRIGGER_TOKEN,),)),
        style=style,
        fillers=fillers,
        vocabulary=vocabulary,
    )


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 200
    seed: int = 0


@dataclass(frozen=True)
class SurrogateModel:
    """Trained classifier: per-token weights, bias, and loss history."""

    weights: dict[str, float]
    bias: float
    training_log: tuple[tuple[int, float], ...]


def logistic_loss_and_gradient(X: np.ndarray, y: np.ndarray, w: np.ndarray, b: float):
    """Mean logistic loss and its analytic gradient.

    Loss per sample is ``log(1 + exp(z)) - y*z`` with ``z = X@w + b``,
    the overflow-safe form of the negative log-likelihood.
    """
    z = X @ w + b
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    p = _expit(z)
    residual = p - y
    grad_w = X.T @ residual / len(y)
    grad_b = float(np.mean(residual))
    return loss, grad_w, grad_b


def _expit(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class _Prepared:
    """Flattened occurrence arrays for fast per-epoch augmentation.

    Non-trigger occurrences are laid out caption-major in token order;
    ``draw`` holds each occurrence's 1-based draw number so its uniform
    matches what ``augment_caption`` would have drawn for it.
    """

    def __init__(self, corpus: SyntheticCorpus, policy: DropoutPolicy):
        col = {tok: i for i, tok in enumerate(corpus.vocabulary)}
        occ_cap: list[int] = []
        occ_col: list[int] = []
        occ_draw: list[int] = []
        occ_p: list[float] = []
        trig_cap: list[int] = []
        trig_col: list[int] = []
        trigger_tokens = policy.trigger.tokens
        for row, record in enumerate(corpus.records):
            draw = 0
            for token in record.tokens:
                if token in trigger_tokens:
                    trig_cap.append(row)
                    trig_col.append(col[token])
                    continue
                draw += 1
                occ_cap.append(row)
                occ_col.append(col[token])
                occ_draw.append(draw)
                occ_p.append(policy.probability(token))
        self.occ_cap = np.array(occ_cap, dtype=np.intp)
        self.occ_col = np.array(occ_col, dtype=np.intp)
        self.occ_draw = np.array(occ_draw, dtype=np.uint64)
        self.occ_p = np.array(occ_p, dtype=np.float64)
        self.trig_cap = np.array(trig_cap, dtype=np.intp)
        self.trig_col = np.array(trig_col, dtype=np.intp)
        self.caption_indices = np.array([r.index for r in corpus.records], dtype=np.uint64)
        self.shape = (len(corpus.records), len(corpus.vocabulary))

    def keep_mask(self, epoch: int, mode: VariantMode, cfg: ScheduleConfig | None, global_seed: int) -> np.ndarray:
        """Kept-flag per non-trigger occurrence, bit-identical to augment_caption."""
        if mode.mode == "normal":
            return np.ones(len(self.occ_cap), dtype=bool)
        if mode.mode == "uniform":
            p = np.full(len(self.occ_cap), mode.uniform_p)
        elif mode.mode == "fad":
            p = self.occ_p
        else:
            p = self.occ_p * schedule_factor(epoch, cfg)
        seeds = derive_seeds_np(global_seed, epoch, self.caption_indices)
        u = uniforms_at_np(seeds[self.occ_cap], self.occ_draw)
        return u >= p

    def design_matrix(self, keep: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        X = out if out is not None else np.empty(self.shape)
        X.fill(0.0)
        X[self.trig_cap, self.trig_col] = 1.0
        X[self.occ_cap[keep], self.occ_col[keep]] = 1.0
        return X


def train_surrogate(
    corpus: SyntheticCorpus,
    policy: DropoutPolicy,
    cfg: ScheduleConfig | None,
    mode: VariantMode,
    train: TrainConfig,
) -> SurrogateModel:
    """Full-batch gradient descent with per-epoch caption dropout.

    Epoch e plays the role of the training step: every caption is pushed
    through the augmentor at step e before the batch update, so the
    scheduled variant sees the ramp unfold over epochs. Raises
    DivergedTraining when the loss leaves the reals.
    """
    if not (corpus.labels.min() == 0.0 and corpus.labels.max() == 1.0):
        raise ValueError("corpus must contain both labels")
    prepared = _Prepared(corpus, policy)
    m, v = prepared.shape
    w = np.zeros(v)
    b = 0.0
    y = corpus.labels
    X = np.empty((m, v))
    log: list[tuple[int, float]] = []
    for epoch in range(1, train.epochs + 1):
        keep = prepared.keep_mask(epoch, mode, cfg, train.seed)
        prepared.design_matrix(keep, out=X)
        loss, grad_w, grad_b = logistic_loss_and_gradient(X, y, w, b)
        if not np.isfinite(loss):
            raise DivergedTraining(f"loss became {loss} at epoch {epoch}")
        log.append((epoch, loss))
        w -= train.learning_rate * grad_w
        b -= train.learning_rate * grad_b
    return SurrogateModel(
        weights={tok: float(w[i]) for i, tok in enumerate(corpus.vocabulary)},
        bias=float(b),
        training_log=tuple(log),
    )


def trigger_weight_share(model: SurrogateModel, corpus: SyntheticCorpus) -> float | None:
    """Trigger weight over trigger-plus-style weight, clipped nonnegative.

    None when both sides are zero (e.g. an untrained model), which
    callers report as a degenerate run.
    """
    w_trigger = max(model.weights[TRIGGER_TOKEN], 0.0)
    w_style = sum(max(model.weights[tok], 0.0) for tok in corpus.style)
    denominator = w_trigger + w_style
    if denominator == 0.0:
        return None
    return w_trigger / denominator


def _clean_matrix(corpus: SyntheticCorpus) -> np.ndarray:
    col = {tok: i for i, tok in enumerate(corpus.vocabulary)}
    X = np.zeros((len(corpus.records), len(corpus.vocabulary)))
    for row, record in enumerate(corpus.records):
        for token in record.tokens:
            X[row, col[token]] = 1.0
    return X


def omission_accuracy_drop(model: SurrogateModel, corpus: SyntheticCorpus) -> float:
    """Accuracy on clean captions minus accuracy with the trigger removed."""
    w = np.array([model.weights[tok] for tok in corpus.vocabulary])
    X = _clean_matrix(corpus)
    y = corpus.labels
    acc_full = float(np.mean(((X @ w + model.bias) > 0) == (y == 1.0)))
    X_omit = X.copy()
    X_omit[:, corpus.vocabulary.index(TRIGGER_TOKEN)] = 0.0
    acc_omit = float(np.mean(((X_omit @ w + model.bias) > 0) == (y == 1.0)))
    return acc_full - acc_omit


@dataclass(frozen=True)
class ModeOutcome:
    mode: str
    shares: tuple[float | None, ...]
    omission_drops: tuple[float, ...]
    degenerate_runs: int
    mean_share: float | None
    mean_omission_drop: float


@dataclass(frozen=True)
class SurrogateReport:
    """Per-variant disentanglement metrics averaged over seeds."""

    seeds: tuple[int, ...]
    outcomes: tuple[ModeOutcome, ...]

    def outcome(self, mode: str) -> ModeOutcome:
        for out in self.outcomes:
            if out.mode == mode:
                return out
        raise KeyError(mode)

    def to_dict(self) -> dict:
        return {
            "seeds": list(self.seeds),
            "outcomes": [
                {
                    "mode": o.mode,
                    "mean_trigger_share": o.mean_share,
                    "mean_omission_drop": o.mean_omission_drop,
                    "degenerate_runs": o.degenerate_runs,
                    "trigger_shares": list(o.shares),
                    "omission_drops": list(o.omission_drops),
                }
                for o in self.outcomes
            ],
        }

    def to_text(self) -> str:
        lines = [f"{'mode':<10} {'trigger share':>14} {'omission drop':>14} {'degenerate':>11}"]
        for o in self.outcomes:
            share = "n/a" if o.mean_share is None else f"{o.mean_share:.4f}"
            lines.append(f"{o.mode:<10} {share:>14} {o.mean_omission_drop:>14.4f} {o.degenerate_runs:>11d}")
        return "\n".join(lines) + "\n"


def _default_schedule(epochs: int) -> ScheduleConfig:
    return ScheduleConfig(
        shape="exponential",
        rate=5.0,
        warmup_step=round(0.1 * epochs),
        full_step=epochs,
        total_steps=epochs,
        start_factor=0.0,
        end_factor=1.0,
    )


def _run_modes(
    corpus_cfg: SyntheticCorpusConfig,
    params: PolicyParams,
    schedule: ScheduleConfig | None,
    modes: Sequence[VariantMode],
    seeds: Sequence[int],
    train: TrainConfig,
) -> SurrogateReport:
    per_mode: dict[str, list] = {m.mode: [] for m in modes}
    for seed in seeds:
        corpus = generate_corpus(replace(corpus_cfg, seed=seed))
        table = analyze(list(corpus.records), corpus.trigger)
        policy = build_policy(table, params, corpus.trigger)
        cfg = schedule if schedule is not None else _default_schedule(train.epochs)
        for mode in modes:
            model = train_surrogate(corpus, policy, cfg, mode, replace(train, seed=seed))
            per_mode[mode.mode].append(
                (trigger_weight_share(model, corpus), omission_accuracy_drop(model, corpus))
            )
    outcomes = []
    for mode in modes:
        results = per_mode[mode.mode]
        shares = tuple(s for s, _ in results)
        drops = tuple(d for _, d in results)
        defined = [s for s in shares if s is not None]
        outcomes.append(
            ModeOutcome(
                mode=mode.mode,
                shares=shares,
                omission_drops=drops,
                degenerate_runs=len(shares) - len(defined),
                mean_share=(sum(defined) / len(defined)) if defined else None,
                mean_omission_drop=sum(drops) / len(drops),
            )
        )
    return SurrogateReport(seeds=tuple(seeds), outcomes=tuple(outcomes))


def run_experiment(
    corpus_cfg: SyntheticCorpusConfig,
    params: PolicyParams,
    seeds: Sequence[int],
    schedule: ScheduleConfig | None = None,
    train: TrainConfig = TrainConfig(),
    modes: Iterable[VariantMode] = (VariantMode.normal(), VariantMode.fad(), VariantMode.sfad()),
) -> SurrogateReport:
    """Train every variant per seed on identical corpora and summarize.

    At least five seeds are required so the per-mode means are not
    dominated by a single draw.
    """
    seeds = list(seeds)
    if len(seeds) < 5:
        raise ValueError(f"need at least 5 seeds, got {len(seeds)}")
    return _run_modes(corpus_cfg, params, schedule, tuple(modes), seeds, train)


@dataclass(frozen=True)
class StudyEntry:
    shape: str
    start_factor: float
    end_factor: float
    mean_share: float | None
    mean_omission_drop: float


@dataclass(frozen=True)
class StudyReport:
    """Scheduled-variant comparison across ramp shapes and directions."""

    seeds: tuple[int, ...]
    entries: tuple[StudyEntry, ...]

    def to_dict(self) -> dict:
        return {
            "seeds": list(self.seeds),
            "entries": [
                {
                    "shape": e.shape,
                    "start_factor": e.start_factor,
                    "end_factor": e.end_factor,
                    "mean_trigger_share": e.mean_share,
                    "mean_omission_drop": e.mean_omission_drop,
                }
                for e in self.entries
            ],
        }

    def to_text(self) -> str:
        shapes = sorted({e.shape for e in self.entries})
        ranges = []
        for e in self.entries:
            rng = (e.start_factor, e.end_factor)
            if rng not in ranges:
                ranges.append(rng)
        header = f"{'ramp':<12} {'metric':<16}" + "".join(f" {s:>12}" for s in shapes)
        lines = [header]
        by_key = {(e.start_factor, e.end_factor, e.shape): e for e in self.entries}
        for lo, hi in ranges:
            label = f"{lo:g}->{hi:g}"
            for metric, pick in (
                ("trigger share", lambda e: e.mean_share),
                ("omission drop", lambda e: e.mean_omission_drop),
            ):
                cells = []
                for s in shapes:
                    value = pick(by_key[(lo, hi, s)])
                    cells.append(f" {'n/a':>12}" if value is None else f" {value:>12.4f}")
                lines.append(f"{label:<12} {metric:<16}" + "".join(cells))
                label = ""
        return "\n".join(lines) + "\n"


def schedule_study(
    corpus_cfg: SyntheticCorpusConfig,
    params: PolicyParams,
    seeds: Sequence[int],
    train: TrainConfig = TrainConfig(),
    rate: float = 5.0,
    shapes: Sequence[str] = ("linear", "exponential"),
    factor_ranges: Sequence[tuple[float, float]] = ((0.1, 0.8), (0.8, 0.1)),
) -> StudyReport:
    """Run the scheduled variant under each ramp shape and direction.

    Produces the comparison table for ascending vs descending ramps and
    linear vs exponential shapes; all values are measured here, on the
    surrogate, not imported from anywhere.
    """
    entries = []
    for lo, hi in factor_ranges:
        for shape in shapes:
            cfg = ScheduleConfig(
                shape=shape,
                rate=rate,
                warmup_step=round(0.1 * train.epochs),
                full_step=train.epochs,
                total_steps=train.epochs,
                start_factor=lo,
                end_factor=hi,
            )
            report = _run_modes(corpus_cfg, params, cfg, (VariantMode.sfad(),), list(seeds), train)
            outcome = report.outcomes[0]
            entries.append(
                StudyEntry(
                    shape=shape,
                    start_factor=lo,
                    end_factor=hi,
                    mean_share=outcome.mean_share,
                    mean_omission_drop=outcome.mean_omission_drop,
                )
            )
    return StudyReport(seeds=tuple(seeds), entries=tuple(entries))
