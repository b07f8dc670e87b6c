"""Named hyperparameter presets.

``sd-paper`` is the reference recipe for 1,500-step Stable Diffusion
LoRA fine-tuning runs: dropout probabilities between 0.35 and 1.0, a 10%
warmup, and an exponential schedule ramping the scale from 0.1 to 0.8.
"""

from __future__ import annotations

from dataclasses import dataclass

from .policy import PolicyParams, ScheduleConfig


@dataclass(frozen=True)
class Preset:
    name: str
    params: PolicyParams
    steps: int
    warmup_ratio: float
    schedule_shape: str
    schedule_rate: float
    start_factor: float
    end_factor: float

    def schedule(self, total_steps: int | None = None) -> ScheduleConfig:
        total = total_steps if total_steps is not None else self.steps
        return ScheduleConfig(
            shape=self.schedule_shape,
            rate=self.schedule_rate,
            warmup_step=round(self.warmup_ratio * total),
            full_step=total,
            total_steps=total,
            start_factor=self.start_factor,
            end_factor=self.end_factor,
        )


PRESETS = {
    "sd-paper": Preset(
        name="sd-paper",
        params=PolicyParams(p_min=0.35, p_max=1.0, center=0.5, slope=10.0),
        steps=1500,
        warmup_ratio=0.1,
        schedule_shape="exponential",
        schedule_rate=5.0,
        start_factor=0.1,
        end_factor=0.8,
    )
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r} (available: {', '.join(sorted(PRESETS))})") from None
