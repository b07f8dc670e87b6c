"""Dropout policies and training-step schedules.

A policy maps each token's co-occurrence ratio r through a bounded
sigmoid to a dropout probability:

    p(r) = p_min + (p_max - p_min) * sigmoid(slope * (r - center))

so tokens that almost always accompany the trigger approach ``p_max``
while rare tokens stay near ``p_min``. Trigger tokens are pinned to
exactly zero.

A schedule scales those probabilities over training: zero-dropout warmup
until ``warmup_step``, a ramp up to ``full_step``, then the full value.
The representative ramp is exponential, ``g(s) = 1 - exp(-rate * s)``
with ``s`` the ramp progress in [0, 1]. In literal form g jumps to 1 at
``full_step`` (the ramp itself only reaches ``1 - exp(-rate)``); the
normalized form divides by ``1 - exp(-rate)`` and is continuous there.
Linear and constant shapes are provided for comparison studies, and the
ramp may run between arbitrary factors, including descending ones
(e.g. 0.8 down to 0.1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

from .captions import TriggerSet
from .cooccurrence import CooccurrenceTable
from .errors import StepOutOfRange

SCHEDULE_SHAPES = ("exponential", "linear", "constant")


def _sigmoid(x: float) -> float:
    # Branch keeps exp() in the underflow-safe direction for huge |x|.
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


@dataclass(frozen=True)
class PolicyParams:
    """Sigmoid mapping parameters: bounds, center ratio, and slope."""

    p_min: float = 0.35
    p_max: float = 1.0
    center: float = 0.5
    slope: float = 10.0

    def __post_init__(self):
        if not (0.0 <= self.p_min <= self.p_max <= 1.0):
            raise ValueError(f"need 0 <= p_min <= p_max <= 1, got ({self.p_min}, {self.p_max})")
        if not (0.0 <= self.center <= 1.0):
            raise ValueError(f"center must be in [0, 1], got {self.center}")
        if self.slope <= 0.0:
            raise ValueError(f"slope must be positive, got {self.slope}")

    def to_dict(self) -> dict:
        return {"p_min": self.p_min, "p_max": self.p_max, "center": self.center, "slope": self.slope}

    @classmethod
    def from_dict(cls, data: dict) -> "PolicyParams":
        return cls(**data)


def dropout_probability(r: float, params: PolicyParams) -> float:
    """Dropout probability for a co-occurrence ratio r in [0, 1]."""
    span = params.p_max - params.p_min
    return params.p_min + span * _sigmoid(params.slope * (r - params.center))


@dataclass(frozen=True)
class DropoutPolicy:
    """Frozen per-token dropout probabilities with trigger tokens at 0.

    Tokens never seen alongside the trigger fall back to the ratio-zero
    probability rather than zero dropout.
    """

    params: PolicyParams
    probabilities: Mapping[str, float]
    trigger: TriggerSet
    ratios: Mapping[str, float]
    default_probability: float = field(init=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "default_probability", dropout_probability(0.0, self.params))

    def probability(self, token: str) -> float:
        if token in self.trigger.tokens:
            return 0.0
        return self.probabilities.get(token, self.default_probability)

    def to_dict(self) -> dict:
        tokens = sorted(self.probabilities, key=lambda t: (-self.ratios.get(t, 0.0), t))
        entries = [
            {"token": tok, "ratio": self.ratios.get(tok, 0.0), "p_drop": self.probabilities[tok]}
            for tok in tokens
        ]
        return {"params": self.params.to_dict(), "trigger": self.trigger.to_json(), "entries": entries}

    @classmethod
    def from_dict(cls, data: dict) -> "DropoutPolicy":
        params = PolicyParams.from_dict(data["params"])
        trigger = TriggerSet.from_json(data["trigger"])
        probabilities = {e["token"]: e["p_drop"] for e in data["entries"]}
        ratios = {e["token"]: e["ratio"] for e in data["entries"]}
        return cls(params=params, probabilities=probabilities, trigger=trigger, ratios=ratios)


def build_policy(table: CooccurrenceTable, params: PolicyParams, trigger: TriggerSet) -> DropoutPolicy:
    """Map a co-occurrence table through the sigmoid, pinning triggers to 0."""
    probabilities = {tok: dropout_probability(r, params) for tok, r in table.ratios.items()}
    for tok in trigger.tokens:
        probabilities[tok] = 0.0
    return DropoutPolicy(
        params=params,
        probabilities=MappingProxyType(probabilities),
        trigger=trigger,
        ratios=MappingProxyType(dict(table.ratios)),
    )


@dataclass(frozen=True)
class ScheduleConfig:
    """Step-schedule definition.

    ``start_factor``/``end_factor`` are the scale values at the two ends
    of the ramp; ``start_factor > end_factor`` gives a descending
    schedule. ``literal_ramp`` selects the literal exponential (with its
    jump to the end value at ``full_step``) over the normalized,
    continuous variant. The constant shape ignores the ramp entirely and
    always yields ``end_factor``.
    """

    shape: str = "exponential"
    rate: float = 5.0
    warmup_step: int = 0
    full_step: int = 1
    total_steps: int = 1
    start_factor: float = 0.0
    end_factor: float = 1.0
    literal_ramp: bool = True

    def __post_init__(self):
        if self.shape not in SCHEDULE_SHAPES:
            raise ValueError(f"unknown schedule shape {self.shape!r}")
        if self.rate <= 0.0:
            raise ValueError(f"rate must be positive, got {self.rate}")
        if not (0 <= self.warmup_step < self.full_step <= self.total_steps):
            raise ValueError(
                "need 0 <= warmup_step < full_step <= total_steps, got "
                f"({self.warmup_step}, {self.full_step}, {self.total_steps})"
            )
        for name in ("start_factor", "end_factor"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {value}")

    def to_dict(self) -> dict:
        return {
            "shape": self.shape,
            "rate": self.rate,
            "warmup_step": self.warmup_step,
            "full_step": self.full_step,
            "total_steps": self.total_steps,
            "start_factor": self.start_factor,
            "end_factor": self.end_factor,
            "literal_ramp": self.literal_ramp,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScheduleConfig":
        return cls(**data)


def schedule_factor(i: int, cfg: ScheduleConfig) -> float:
    """Schedule scale at training step i (0 <= i <= total_steps)."""
    if i < 0 or i > cfg.total_steps:
        raise StepOutOfRange(f"step {i} outside [0, {cfg.total_steps}]")
    if cfg.shape == "constant":
        return cfg.end_factor
    if i < cfg.warmup_step:
        return cfg.start_factor
    if i >= cfg.full_step:
        return cfg.end_factor
    s = (i - cfg.warmup_step) / (cfg.full_step - cfg.warmup_step)
    if cfg.shape == "linear":
        g = s
    elif cfg.literal_ramp:
        g = 1.0 - math.exp(-cfg.rate * s)
    else:
        g = (1.0 - math.exp(-cfg.rate * s)) / (1.0 - math.exp(-cfg.rate))
    return cfg.start_factor + (cfg.end_factor - cfg.start_factor) * g
