"""Co-occurrence-aware caption token dropout toolkit.

Analyze how often tokens accompany a trigger phrase in a caption corpus,
map those ratios to per-token dropout probabilities, scale them over
training steps, and emit deterministic augmented caption streams for
fine-tuning pipelines. A synthetic surrogate experiment measures the
resulting trigger disentanglement at desk scale.
"""

from .augment import (
    AugmentedCaption,
    VariantMode,
    augment_caption,
    augment_stream,
    compact_record_line,
    effective_probability,
    format_stream,
    full_record_line,
    parse_compact_line,
    parse_full_line,
)
from .captions import (
    CaptionRecord,
    TokenizationMode,
    TriggerSet,
    load_dataset,
    parse_caption,
)
from .cooccurrence import CooccurrenceTable, analyze
from .errors import (
    BlankCaption,
    DataError,
    DivergedTraining,
    EmptyDataset,
    FadropError,
    MalformedRecord,
    StepOutOfRange,
    TriggerAbsent,
)
from .policy import (
    DropoutPolicy,
    PolicyParams,
    ScheduleConfig,
    build_policy,
    dropout_probability,
    schedule_factor,
)
from .presets import PRESETS, get_preset
from .rng import SplitMix64, derive_seed, mix64
from .stats import FrequencyReport, empirical_drop_rates, tag_frequency
from .surrogate import (
    SurrogateModel,
    SurrogateReport,
    SyntheticCorpusConfig,
    TrainConfig,
    generate_corpus,
    omission_accuracy_drop,
    run_experiment,
    schedule_study,
    train_surrogate,
    trigger_weight_share,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentedCaption",
    "BlankCaption",
    "CaptionRecord",
    "CooccurrenceTable",
    "DataError",
    "DivergedTraining",
    "DropoutPolicy",
    "EmptyDataset",
    "FadropError",
    "FrequencyReport",
    "MalformedRecord",
    "PRESETS",
    "PolicyParams",
    "ScheduleConfig",
    "SplitMix64",
    "StepOutOfRange",
    "SurrogateModel",
    "SurrogateReport",
    "SyntheticCorpusConfig",
    "TokenizationMode",
    "TrainConfig",
    "TriggerAbsent",
    "TriggerSet",
    "VariantMode",
    "analyze",
    "augment_caption",
    "augment_stream",
    "build_policy",
    "compact_record_line",
    "derive_seed",
    "dropout_probability",
    "effective_probability",
    "empirical_drop_rates",
    "format_stream",
    "full_record_line",
    "generate_corpus",
    "get_preset",
    "load_dataset",
    "mix64",
    "parse_caption",
    "parse_compact_line",
    "parse_full_line",
    "run_experiment",
    "schedule_factor",
    "schedule_study",
    "omission_accuracy_drop",
    "tag_frequency",
    "train_surrogate",
    "trigger_weight_share",
]
