"""Command line pipeline: analyze, plan, schedule, augment, stats, surrogate, verify.

Exit codes: 0 on success, 1 on usage errors (bad flags, unresolvable
paths, invalid parameter combinations), 2 on data errors (trigger absent
from the corpus, empty dataset, malformed records), always naming the
offending item on standard error. Output files are written atomically
(temp file plus rename).

Flag precedence: command-line flags override ``--config`` file values,
which override built-in or preset defaults. ``FADROP_SEED`` supplies the
default seed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Iterable

from . import augment as aug
from .captions import TokenizationMode, TriggerSet, load_dataset
from .cooccurrence import CooccurrenceTable, analyze
from .errors import DataError, MalformedRecord
from .policy import (
    DropoutPolicy,
    PolicyParams,
    ScheduleConfig,
    build_policy,
    schedule_factor,
)
from .presets import get_preset
from .stats import empirical_drop_rates, tag_frequency
from .surrogate import (
    SyntheticCorpusConfig,
    TrainConfig,
    run_experiment,
    schedule_study,
)

DEFAULT_SEED_ENV = "FADROP_SEED"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _default_seed() -> int:
    value = os.environ.get(DEFAULT_SEED_ENV)
    if value is None:
        return 42
    try:
        return int(value)
    except ValueError:
        raise _UsageError(f"{DEFAULT_SEED_ENV} must be an integer, got {value!r}") from None


def _add_tokenization_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tokenization", choices=("tag", "word"), default=None, help="token splitting rule (default: tag)")
    p.add_argument("--no-lowercase", action="store_true", default=None, help="keep token case")
    p.add_argument("--no-trim", action="store_true", default=None, help="keep surrounding whitespace in tag mode")
    p.add_argument("--input-format", choices=("auto", "text", "jsonl"), default=None, help="caption file format (default: auto)")


def _add_trigger_flag(p: argparse.ArgumentParser, required: bool = False) -> None:
    p.add_argument(
        "--trigger",
        action="append",
        default=None,
        required=required,
        metavar="PHRASE",
        help="trigger phrase; repeat for multi-concept trigger sets",
    )


def _add_policy_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--p-min", type=float, default=None, help="dropout probability floor")
    p.add_argument("--p-max", type=float, default=None, help="dropout probability ceiling")
    p.add_argument("--center", type=float, default=None, help="ratio where the sigmoid is halfway")
    p.add_argument("--slope", type=float, default=None, help="sigmoid steepness")


def _add_schedule_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--shape", choices=("exponential", "linear", "constant"), default=None)
    p.add_argument("--rate", type=float, default=None, help="exponential ramp rate")
    p.add_argument("--warmup-step", type=int, default=None, help="last zero-scale step (default: 10%% of total)")
    p.add_argument("--full-step", type=int, default=None, help="step where the ramp ends (default: total)")
    p.add_argument("--total-steps", type=int, default=None)
    p.add_argument("--start-factor", type=float, default=None, help="scale at the ramp start")
    p.add_argument("--end-factor", type=float, default=None, help="scale at the ramp end")
    p.add_argument(
        "--normalized",
        action="store_true",
        default=None,
        help="use the continuous exponential ramp instead of the literal one with its end jump",
    )


def _tokenization(args) -> TokenizationMode:
    return TokenizationMode(
        mode=args.tokenization or "tag",
        lowercase=not bool(args.no_lowercase),
        trim=not bool(args.no_trim),
    )


def _resolve_params(args) -> PolicyParams:
    base = get_preset(args.preset).params if getattr(args, "preset", None) else PolicyParams()
    return PolicyParams(
        p_min=base.p_min if args.p_min is None else args.p_min,
        p_max=base.p_max if args.p_max is None else args.p_max,
        center=base.center if args.center is None else args.center,
        slope=base.slope if args.slope is None else args.slope,
    )


def _resolve_schedule(args, default_total: int = 1000) -> ScheduleConfig:
    preset = get_preset(args.preset) if getattr(args, "preset", None) else None
    if preset is not None:
        base = preset.schedule(args.total_steps)
    else:
        total = args.total_steps if args.total_steps is not None else default_total
        base = ScheduleConfig(
            warmup_step=round(0.1 * total),
            full_step=total,
            total_steps=total,
        )
    return ScheduleConfig(
        shape=base.shape if args.shape is None else args.shape,
        rate=base.rate if args.rate is None else args.rate,
        warmup_step=base.warmup_step if args.warmup_step is None else args.warmup_step,
        full_step=base.full_step if args.full_step is None else args.full_step,
        total_steps=base.total_steps if args.total_steps is None else args.total_steps,
        start_factor=base.start_factor if args.start_factor is None else args.start_factor,
        end_factor=base.end_factor if args.end_factor is None else args.end_factor,
        literal_ramp=base.literal_ramp if args.normalized is None else not args.normalized,
    )


def _require_input(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise _UsageError(f"{what} file not found: {path}")
    return p


def _write_atomic(path: str, lines: Iterable[str]) -> None:
    """Write lines (newlines included) to path, or stdout for '-'."""
    if path == "-":
        for line in lines:
            sys.stdout.write(line)
        return
    target = Path(path)
    directory = target.parent if str(target.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=target.name + ".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            for line in lines:
                fh.write(line)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: str, obj) -> None:
    _write_atomic(path, [json.dumps(obj, ensure_ascii=False, indent=2), "\n"])


def _load_dataset_and_trigger(args):
    mode = _tokenization(args)
    dataset = load_dataset(
        _require_input(args.captions, "captions"), mode, args.input_format or "auto"
    )
    trigger = TriggerSet.from_strings(args.trigger, mode) if args.trigger else None
    return mode, dataset, trigger


# Subcommand handlers


def _cmd_analyze(args) -> int:
    mode, dataset, trigger = _load_dataset_and_trigger(args)
    if trigger is None:
        raise _UsageError("analyze requires at least one --trigger")
    table = analyze(dataset, trigger)
    _write_json(args.out, table.to_dict())
    return 0


def _cmd_plan(args) -> int:
    params = _resolve_params(args)
    if args.table is not None:
        table = CooccurrenceTable.from_dict(json.loads(_require_input(args.table, "table").read_text(encoding="utf-8")))
        trigger = table.trigger
    else:
        if args.captions is None:
            raise _UsageError("plan needs either --table or --captions with --trigger")
        mode, dataset, trigger = _load_dataset_and_trigger(args)
        if trigger is None:
            raise _UsageError("plan requires at least one --trigger when reading captions")
        table = analyze(dataset, trigger)
    policy = build_policy(table, params, trigger)
    _write_json(args.out, policy.to_dict())
    return 0


def _cmd_schedule(args) -> int:
    cfg = _resolve_schedule(args)
    lines = (f"{i} {schedule_factor(i, cfg):.12g}\n" for i in range(cfg.total_steps + 1))
    _write_atomic(args.out, lines)
    return 0


def _effective_config(args, cfg: ScheduleConfig, params: PolicyParams) -> dict:
    return {
        "captions": args.captions,
        "plan": args.plan,
        "trigger": args.trigger,
        "tokenization": args.tokenization or "tag",
        "no_lowercase": bool(args.no_lowercase),
        "no_trim": bool(args.no_trim),
        "input_format": args.input_format or "auto",
        "p_min": params.p_min,
        "p_max": params.p_max,
        "center": params.center,
        "slope": params.slope,
        "shape": cfg.shape,
        "rate": cfg.rate,
        "warmup_step": cfg.warmup_step,
        "full_step": cfg.full_step,
        "total_steps": cfg.total_steps,
        "start_factor": cfg.start_factor,
        "end_factor": cfg.end_factor,
        "normalized": not cfg.literal_ramp,
        "steps": args.steps,
        "mode": args.mode,
        "uniform_p": args.uniform_p,
        "sampling": args.sampling,
        "seed": args.seed,
        "workers": args.workers,
        "format": args.format,
    }


def _cmd_augment(args) -> int:
    mode, dataset, trigger = _load_dataset_and_trigger(args)
    params = _resolve_params(args)
    if args.plan is not None:
        policy = DropoutPolicy.from_dict(json.loads(_require_input(args.plan, "plan").read_text(encoding="utf-8")))
    else:
        if trigger is None:
            raise _UsageError("augment needs --plan or --trigger to build a policy")
        policy = build_policy(analyze(dataset, trigger), params, trigger)

    steps = args.steps
    if steps is None and args.preset:
        steps = get_preset(args.preset).steps
    if steps is None:
        raise _UsageError("augment requires --steps (or a --preset that supplies it)")
    cfg = _resolve_schedule(args, default_total=steps)
    if steps > cfg.total_steps:
        raise _UsageError(f"--steps {steps} exceeds schedule total_steps {cfg.total_steps}")

    variant = aug.VariantMode(
        mode=args.mode if args.mode is not None else "fad",
        uniform_p=args.uniform_p if args.uniform_p is not None else 0.5,
    )
    seed = args.seed if args.seed is not None else _default_seed()
    sampling = args.sampling or "cycle"
    fmt = args.format or "jsonl"

    if args.dump_config:
        ns = argparse.Namespace(**vars(args))
        ns.steps, ns.seed, ns.sampling, ns.format = steps, seed, sampling, fmt
        ns.mode, ns.uniform_p = variant.mode, variant.uniform_p
        _write_json(args.dump_config, _effective_config(ns, cfg, params))

    stream = aug.augment_stream(
        dataset, policy, cfg, steps, variant, seed, sampling=sampling, workers=args.workers
    )
    _write_atomic(args.out, (line + "\n" for line in aug.format_stream(stream, fmt, mode)))
    return 0


def _cmd_stats(args) -> int:
    mode, dataset, trigger = _load_dataset_and_trigger(args)
    if trigger is None:
        raise _UsageError("stats requires at least one --trigger")
    report = tag_frequency(dataset, trigger)
    if args.top is not None:
        report = report.top(args.top)
    _write_json(args.out, report.to_dict())
    if args.plot:
        _write_atomic(args.plot, [report.to_plot_text()])
    return 0


def _read_stream_lines(path: Path) -> list[tuple[int, str]]:
    numbered = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            if line.strip():
                numbered.append((lineno, line.strip()))
    return numbered


def _cmd_verify(args) -> int:
    path = _require_input(args.stream, "stream")
    fmt = args.format or "jsonl"
    numbered = _read_stream_lines(path)
    if not numbered:
        raise MalformedRecord(0, "stream file is empty")

    if fmt == "compact":
        pairs = []
        for lineno, line in numbered:
            try:
                pairs.append(aug.parse_compact_line(line))
            except (ValueError, KeyError) as exc:
                raise MalformedRecord(lineno, f"bad compact record ({exc})") from exc
        if args.dump_captions:
            _write_atomic(args.dump_captions, [f"{step}\t{caption}\n" for step, caption in pairs])
        _write_json(args.out, {"format": "compact", "records": len(pairs)})
        return 0

    records = []
    for lineno, line in numbered:
        try:
            records.append(aug.parse_full_line(line))
        except (ValueError, KeyError) as exc:
            raise MalformedRecord(lineno, f"bad stream record ({exc})") from exc
    observed = empirical_drop_rates(records)
    report = {"format": "jsonl", "records": len(records), "rates": None, "checks": None}
    report["rates"] = {tok: observed[tok] for tok in sorted(observed)}

    if args.plan is not None:
        policy = DropoutPolicy.from_dict(json.loads(_require_input(args.plan, "plan").read_text(encoding="utf-8")))
        variant = aug.VariantMode(
            mode=args.mode if args.mode is not None else "fad",
            uniform_p=args.uniform_p if args.uniform_p is not None else 0.5,
        )
        steps = sorted({rec.step for rec in records})
        cfg = _resolve_schedule(args, default_total=max(steps)) if variant.mode == "sfad" else None
        factors = {s: schedule_factor(s, cfg) for s in steps} if cfg is not None else None
        totals: dict[str, int] = {}
        expected_sum: dict[str, float] = {}
        for rec in records:
            for tok in rec.kept + rec.dropped:
                base = aug.effective_probability(policy, cfg, tok, rec.step, variant)
                totals[tok] = totals.get(tok, 0) + 1
                expected_sum[tok] = expected_sum.get(tok, 0.0) + base
        checks = {}
        violations = 0
        for tok in sorted(totals):
            n = totals[tok]
            expected = expected_sum[tok] / n
            sigma = math.sqrt(expected * (1.0 - expected) / n)
            ok = abs(observed.get(tok, 0.0) - expected) <= 3.0 * sigma + 1e-12
            violations += 0 if ok else 1
            checks[tok] = {
                "occurrences": n,
                "observed": observed.get(tok, 0.0),
                "expected": expected,
                "within_3_sigma": ok,
            }
        report["checks"] = checks
        report["violations"] = violations
    _write_json(args.out, report)
    return 0


def _cmd_surrogate(args) -> int:
    corpus_cfg = SyntheticCorpusConfig(
        vocab_size=args.vocab_size,
        num_captions=args.num_captions,
        style_tokens=args.style_tokens,
        style_cooccurrence=args.style_cooccurrence,
        trigger_prevalence=args.trigger_prevalence,
        filler_rate=args.filler_rate,
    )
    params = _resolve_params(args)
    base = args.seed if args.seed is not None else _default_seed()
    seeds = [base + i for i in range(args.seeds)]
    train = TrainConfig(learning_rate=args.learning_rate, epochs=args.epochs)
    if args.study:
        report = schedule_study(corpus_cfg, params, seeds, train=train)
    else:
        report = run_experiment(corpus_cfg, params, seeds, train=train)
    sys.stdout.write(report.to_text())
    if args.out != "-":
        _write_json(args.out, report.to_dict())
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="fadrop", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")

    def common(p, trigger_required=False):
        p.add_argument("--config", default=None, help="JSON file of flag defaults")
        p.add_argument("--out", default="-", help="output path ('-' for stdout)")

    p = sub.add_parser("analyze", help="compute the trigger co-occurrence table")
    common(p)
    p.add_argument("--captions", required=True)
    _add_trigger_flag(p, required=True)
    _add_tokenization_flags(p)
    p.set_defaults(handler=_cmd_analyze)

    p = sub.add_parser("plan", help="map co-occurrence ratios to a dropout policy")
    common(p)
    p.add_argument("--captions", default=None)
    p.add_argument("--table", default=None, help="analyze output to reuse instead of --captions")
    _add_trigger_flag(p)
    _add_tokenization_flags(p)
    _add_policy_flags(p)
    p.add_argument("--preset", default=None)
    p.set_defaults(handler=_cmd_plan)

    p = sub.add_parser("schedule", help="emit (step, factor) pairs for a schedule")
    common(p)
    _add_schedule_flags(p)
    p.add_argument("--preset", default=None)
    p.set_defaults(handler=_cmd_schedule)

    p = sub.add_parser("augment", help="emit a deterministic augmented caption stream")
    common(p)
    p.add_argument("--captions", required=True)
    p.add_argument("--plan", default=None, help="policy JSON from the plan subcommand")
    _add_trigger_flag(p)
    _add_tokenization_flags(p)
    _add_policy_flags(p)
    _add_schedule_flags(p)
    p.add_argument("--preset", default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--mode", choices=aug.VARIANT_MODES, default=None)
    p.add_argument("--uniform-p", type=float, default=None)
    p.add_argument("--sampling", choices=aug.SAMPLING_MODES, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--format", choices=("jsonl", "compact"), default=None)
    p.add_argument("--dump-config", default=None, help="write the effective configuration")
    p.set_defaults(handler=_cmd_augment)

    p = sub.add_parser("stats", help="tag frequency report over the corpus")
    common(p)
    p.add_argument("--captions", required=True)
    _add_trigger_flag(p, required=True)
    _add_tokenization_flags(p)
    p.add_argument("--top", type=int, default=None)
    p.add_argument("--plot", default=None, help="also write two-column plot data here")
    p.set_defaults(handler=_cmd_stats)

    p = sub.add_parser("surrogate", help="run the disentanglement experiment")
    common(p)
    p.add_argument("--vocab-size", type=int, default=200)
    p.add_argument("--num-captions", type=int, default=2000)
    p.add_argument("--style-tokens", type=int, default=5)
    p.add_argument("--style-cooccurrence", type=float, default=0.95)
    p.add_argument("--trigger-prevalence", type=float, default=0.5)
    p.add_argument("--filler-rate", type=float, default=0.05)
    _add_policy_flags(p)
    p.add_argument("--preset", default=None)
    p.add_argument("--seeds", type=int, default=20, help="number of seeds")
    p.add_argument("--seed", type=int, default=None, help="base seed")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--study", action="store_true", help="compare ramp shapes and directions instead")
    p.set_defaults(handler=_cmd_surrogate)

    p = sub.add_parser("verify", help="check a stream file against a plan")
    common(p)
    p.add_argument("--stream", required=True)
    p.add_argument("--format", choices=("jsonl", "compact"), default=None)
    p.add_argument("--plan", default=None)
    p.add_argument("--mode", choices=aug.VARIANT_MODES, default=None)
    p.add_argument("--uniform-p", type=float, default=None)
    _add_schedule_flags(p)
    p.add_argument("--preset", default=None)
    p.add_argument("--dump-captions", default=None, help="write parsed 'step<TAB>caption' lines")
    p.set_defaults(handler=_cmd_verify)

    return parser


def _parse(parser: _Parser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.command is None:
        raise _UsageError("a subcommand is required")
    if getattr(args, "config", None):
        config_path = _require_input(args.config, "config")
        try:
            overrides = json.loads(config_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise _UsageError(f"config file {args.config}: invalid JSON ({exc.msg})") from exc
        if not isinstance(overrides, dict):
            raise _UsageError(f"config file {args.config} must hold a JSON object")
        subparser = _subparser_for(parser, args.command)
        valid = {a.dest for a in subparser._actions}
        unknown = set(overrides) - valid
        if unknown:
            raise _UsageError(f"config file {args.config}: unknown keys {sorted(unknown)}")
        subparser.set_defaults(**overrides)
        args = parser.parse_args(argv)
    return args


def _subparser_for(parser: _Parser, command: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise _UsageError(f"unknown subcommand {command!r}")


def run(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _parse(parser, argv)
        return args.handler(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())
