import numpy as np
import pytest

from fadrop import (
    DivergedTraining,
    PolicyParams,
    ScheduleConfig,
    VariantMode,
    analyze,
    augment_caption,
    build_policy,
    generate_corpus,
    omission_accuracy_drop,
    run_experiment,
    schedule_study,
    train_surrogate,
    trigger_weight_share,
)
from fadrop.surrogate import (
    SyntheticCorpusConfig,
    TrainConfig,
    _Prepared,
    logistic_loss_and_gradient,
)


def finite_difference_gradient(X, y, w, b, eps=1e-6):
    """Central-difference oracle for the logistic loss gradient."""

    def loss_at(w_, b_):
        z = X @ w_ + b_
        return float(np.mean(np.logaddexp(0.0, z) - y * z))

    grad_w = np.zeros_like(w)
    for j in range(len(w)):
        bump = np.zeros_like(w)
        bump[j] = eps
        grad_w[j] = (loss_at(w + bump, b) - loss_at(w - bump, b)) / (2 * eps)
    grad_b = (loss_at(w, b + eps) - loss_at(w, b - eps)) / (2 * eps)
    return grad_w, grad_b


class TestGenerateCorpus:
    def test_forced_cooccurrence_ratio_one(self):
        cfg = SyntheticCorpusConfig(vocab_size=20, num_captions=200, style_tokens=3, style_cooccurrence=1.0, seed=3)
        corpus = generate_corpus(cfg)
        table = analyze(list(corpus.records), corpus.trigger)
        for tok in corpus.style:
            assert table.ratio(tok) == 1.0

    def test_full_prevalence_all_positive(self):
        cfg = SyntheticCorpusConfig(vocab_size=20, num_captions=100, style_tokens=3, trigger_prevalence=1.0, seed=4)
        corpus = generate_corpus(cfg)
        assert corpus.labels.sum() == 100

    def test_style_inclusion_binomial(self):
        # q = 0.8 over 10,000 positives: per-token presence 8,000 +- 120 (3 sigma).
        cfg = SyntheticCorpusConfig(
            vocab_size=30, num_captions=10_000, style_tokens=4, style_cooccurrence=0.8, trigger_prevalence=1.0, seed=5
        )
        corpus = generate_corpus(cfg)
        for tok in corpus.style:
            present = sum(tok in r.tokens for r in corpus.records)
            assert abs(present - 8000) <= 120

    def test_label_is_trigger_presence(self):
        corpus = generate_corpus(SyntheticCorpusConfig(vocab_size=30, num_captions=500, seed=6))
        for rec, label in zip(corpus.records, corpus.labels):
            assert ("trigger" in rec.tokens) == bool(label)

    def test_no_empty_captions(self):
        cfg = SyntheticCorpusConfig(vocab_size=8, num_captions=2000, style_tokens=2, filler_rate=0.01, seed=7)
        corpus = generate_corpus(cfg)
        assert all(r.tokens for r in corpus.records)

    def test_deterministic(self):
        cfg = SyntheticCorpusConfig(seed=11)
        assert generate_corpus(cfg).records == generate_corpus(cfg).records

    def test_invalid_configs(self):
        with pytest.raises(ValueError):
            SyntheticCorpusConfig(vocab_size=5, style_tokens=4)
        with pytest.raises(ValueError):
            SyntheticCorpusConfig(style_cooccurrence=1.2)


class TestGradient:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(99)
        for _ in range(20):
            m, v = rng.integers(3, 12), rng.integers(2, 6)
            X = (rng.random((m, v)) < 0.5).astype(float)
            y = (rng.random(m) < 0.5).astype(float)
            w = rng.normal(size=v)
            b = float(rng.normal())
            _, grad_w, grad_b = logistic_loss_and_gradient(X, y, w, b)
            fd_w, fd_b = finite_difference_gradient(X, y, w, b)
            denom = max(np.max(np.abs(fd_w)), abs(fd_b), 1e-8)
            assert np.max(np.abs(grad_w - fd_w)) / denom < 1e-5
            assert abs(grad_b - fd_b) / denom < 1e-5


def small_setup(seed=0, **overrides):
    defaults = dict(vocab_size=40, num_captions=400, style_tokens=3, style_cooccurrence=0.95, seed=seed)
    defaults.update(overrides)
    cfg = SyntheticCorpusConfig(**defaults)
    corpus = generate_corpus(cfg)
    policy = build_policy(analyze(list(corpus.records), corpus.trigger), PolicyParams(), corpus.trigger)
    sched = ScheduleConfig(warmup_step=10, full_step=100, total_steps=100)
    return corpus, policy, sched


class TestTrainSurrogate:
    def test_vectorized_dropout_equals_reference_augmentor(self):
        corpus, policy, sched = small_setup(seed=2)
        prepared = _Prepared(corpus, policy)
        for mode in (VariantMode.fad(), VariantMode.sfad(), VariantMode.uniform(0.4), VariantMode.normal()):
            keep = prepared.keep_mask(17, mode, sched, global_seed=55)
            pos = 0
            for rec in corpus.records:
                reference = augment_caption(rec, policy, sched, 17, mode, 55)
                expected_kept = list(reference.kept)
                for tok in rec.tokens:
                    if tok in policy.trigger.tokens:
                        expected_kept.remove(tok)
                        continue
                    if keep[pos]:
                        assert expected_kept.pop(expected_kept.index(tok)) == tok
                    else:
                        assert tok in reference.dropped
                    pos += 1
            assert pos == len(prepared.occ_cap)

    def test_loss_decreases_overall(self):
        corpus, policy, sched = small_setup(seed=3)
        model = train_surrogate(corpus, policy, sched, VariantMode.fad(), TrainConfig(epochs=100))
        losses = [loss for _, loss in model.training_log]
        assert losses[-1] < losses[0]
        assert all(np.isfinite(losses))

    def test_full_batch_loss_monotone_without_dropout(self):
        corpus, policy, sched = small_setup(seed=4)
        model = train_surrogate(corpus, policy, sched, VariantMode.normal(), TrainConfig(epochs=150))
        losses = [loss for _, loss in model.training_log]
        assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))

    def test_reproducible_to_the_last_digit(self):
        corpus, policy, sched = small_setup(seed=5)
        kwargs = (corpus, policy, sched, VariantMode.sfad(), TrainConfig(epochs=50))
        assert train_surrogate(*kwargs) == train_surrogate(*kwargs)

    def test_zero_epochs_degenerate(self):
        corpus, policy, sched = small_setup(seed=6)
        model = train_surrogate(corpus, policy, sched, VariantMode.fad(), TrainConfig(epochs=0))
        assert set(model.weights.values()) == {0.0}
        assert trigger_weight_share(model, corpus) is None

    def test_divergence_detected(self):
        corpus, policy, sched = small_setup(seed=7)
        with pytest.raises(DivergedTraining):
            train_surrogate(corpus, policy, sched, VariantMode.normal(), TrainConfig(learning_rate=1e12, epochs=60))

    def test_requires_both_labels(self):
        corpus, policy, sched = small_setup(seed=8, trigger_prevalence=1.0)
        with pytest.raises(ValueError):
            train_surrogate(corpus, policy, sched, VariantMode.fad(), TrainConfig(epochs=1))

    def test_certain_drop_concentrates_weight_on_trigger(self):
        corpus, _, sched = small_setup(seed=9)
        certain = build_policy(
            analyze(list(corpus.records), corpus.trigger),
            PolicyParams(p_min=1.0, p_max=1.0),
            corpus.trigger,
        )
        model = train_surrogate(corpus, certain, sched, VariantMode.fad(), TrainConfig(epochs=150))
        assert trigger_weight_share(model, corpus) > 0.95

    def test_normal_mode_spreads_weight(self):
        corpus, policy, sched = small_setup(seed=10, style_cooccurrence=1.0)
        model = train_surrogate(corpus, policy, sched, VariantMode.normal(), TrainConfig(epochs=150))
        assert trigger_weight_share(model, corpus) < 0.9

    def test_omission_drop_larger_under_dropout(self):
        corpus, policy, sched = small_setup(seed=11)
        fad = train_surrogate(corpus, policy, sched, VariantMode.fad(), TrainConfig(epochs=150))
        normal = train_surrogate(corpus, policy, sched, VariantMode.normal(), TrainConfig(epochs=150))
        assert omission_accuracy_drop(fad, corpus) > omission_accuracy_drop(normal, corpus)


class TestRunExperiment:
    def test_needs_five_seeds(self):
        with pytest.raises(ValueError):
            run_experiment(SyntheticCorpusConfig(), PolicyParams(), seeds=[1, 2, 3])

    def test_small_experiment_report(self):
        cfg = SyntheticCorpusConfig(vocab_size=40, num_captions=300, style_tokens=3)
        report = run_experiment(cfg, PolicyParams(), seeds=range(5), train=TrainConfig(epochs=60))
        assert [o.mode for o in report.outcomes] == ["normal", "fad", "sfad"]
        fad, normal = report.outcome("fad"), report.outcome("normal")
        assert fad.mean_share > normal.mean_share
        assert len(fad.shares) == 5
        data = report.to_dict()
        assert len(data["outcomes"]) == 3
        assert "trigger share" in report.to_text() or "trigger" in report.to_text()

    def test_report_reproducible(self):
        cfg = SyntheticCorpusConfig(vocab_size=30, num_captions=200, style_tokens=2)
        a = run_experiment(cfg, PolicyParams(), seeds=range(5), train=TrainConfig(epochs=30))
        b = run_experiment(cfg, PolicyParams(), seeds=range(5), train=TrainConfig(epochs=30))
        assert a == b


class TestScheduleStudy:
    def test_all_four_configurations_run(self):
        cfg = SyntheticCorpusConfig(vocab_size=30, num_captions=200, style_tokens=2)
        report = schedule_study(cfg, PolicyParams(), seeds=range(3), train=TrainConfig(epochs=40))
        combos = {(e.shape, e.start_factor, e.end_factor) for e in report.entries}
        assert combos == {
            ("linear", 0.1, 0.8),
            ("exponential", 0.1, 0.8),
            ("linear", 0.8, 0.1),
            ("exponential", 0.8, 0.1),
        }
        text = report.to_text()
        assert "linear" in text and "exponential" in text
        assert "0.1->0.8" in text and "0.8->0.1" in text
        for entry in report.entries:
            assert entry.mean_share is not None
            assert np.isfinite(entry.mean_omission_drop)
