import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fadrop import CaptionRecord, CooccurrenceTable, TriggerAbsent, TriggerSet, analyze

from conftest import make_records


def brute_force_table(records, trigger):
    """Independent oracle: re-scan the corpus once per candidate token."""
    matching = [r for r in records if trigger.matches(r.tokens)]
    n = len(matching)
    vocab = sorted({tok for r in matching for tok in r.tokens})
    counts = {}
    for tok in vocab:
        c = 0
        for r in matching:
            if tok in r.tokens:
                c += 1
        counts[tok] = c
    return n, counts


def random_corpus(rng, max_captions=50, vocab_size=20):
    vocab = [f"w{i}" for i in range(vocab_size)]
    trigger_token = rng.choice(vocab)
    records = []
    for i in range(rng.randint(1, max_captions)):
        k = rng.randint(1, 8)
        tokens = tuple(rng.choice(vocab) for _ in range(k))
        records.append(CaptionRecord(index=i, tokens=tokens, raw=" ".join(tokens)))
    return records, TriggerSet(((trigger_token,),))


class TestAnalyze:
    def test_hand_enumeration(self, tiny_corpus):
        records, trigger = tiny_corpus
        table = analyze(records, trigger)
        assert table.n_trigger == 2
        assert table.ratio("a") == 1.0
        assert table.ratio("b") == 0.5
        assert "c" not in table.counts
        assert table.ratio("c") == 0.0

    def test_full_cooccurrence(self):
        records = make_records(["t, x, p", "t, x", "t, x, q"])
        table = analyze(records, TriggerSet((("t",),)))
        assert table.ratio("x") == 1.0

    def test_absent_trigger_raises(self, tiny_corpus):
        records, _ = tiny_corpus
        with pytest.raises(TriggerAbsent) as exc:
            analyze(records, TriggerSet((("zzz",),)))
        assert "zzz" in str(exc.value)

    def test_absent_token_ratio_zero(self, tiny_corpus):
        records, trigger = tiny_corpus
        assert analyze(records, trigger).ratio("zzz") == 0.0

    def test_duplicates_count_once(self):
        records = make_records(["t, a, a, a", "t"])
        table = analyze(records, TriggerSet((("t",),)))
        assert table.counts["a"] == 1
        assert table.ratio("a") == 0.5

    def test_trigger_phrase_ratio_one_single_trigger(self):
        records = make_records(["t, a", "t, b", "c"])
        table = analyze(records, TriggerSet((("t",),)))
        assert table.ratio("t") == 1.0

    def test_multi_trigger_any_match_counts(self):
        records = make_records(["p1, a", "p2, b", "c"])
        table = analyze(records, TriggerSet((("p1",), ("p2",))))
        assert table.n_trigger == 2
        assert table.ratio("a") == 0.5
        assert table.ratio("p1") == 0.5

    def test_word_mode_phrase_subsequence(self):
        records = make_records(
            ["a japanese man smiling", "japanese x man", "b"],
            mode=None,
        )
        # re-parse in word mode
        from fadrop import TokenizationMode, parse_caption

        word = TokenizationMode(mode="word")
        records = [parse_caption(r.raw, word, r.index) for r in records]
        trigger = TriggerSet.from_strings(["japanese man"], word)
        table = analyze(records, trigger)
        assert table.n_trigger == 1
        assert table.ratio("smiling") == 1.0

    def test_counts_bounded_and_ratios_exact(self, tiny_corpus):
        records, trigger = tiny_corpus
        table = analyze(records, trigger)
        for tok, c in table.counts.items():
            assert c <= table.n_trigger
            assert table.ratios[tok] == c / table.n_trigger

    def test_matches_brute_force_on_random_corpora(self):
        rng = random.Random(1234)
        for _ in range(200):
            records, trigger = random_corpus(rng)
            try:
                table = analyze(records, trigger)
            except TriggerAbsent:
                n, _ = brute_force_table(records, trigger)
                assert n == 0
                continue
            n, counts = brute_force_table(records, trigger)
            assert table.n_trigger == n
            assert dict(table.counts) == counts

    def test_serialization_round_trip_and_sorting(self, tiny_corpus):
        records, trigger = tiny_corpus
        table = analyze(records, trigger)
        data = table.to_dict()
        ratios = [e["ratio"] for e in data["entries"]]
        assert ratios == sorted(ratios, reverse=True)
        tied = [e["token"] for e in data["entries"] if e["ratio"] == 1.0]
        assert tied == sorted(tied)
        back = CooccurrenceTable.from_dict(data)
        assert back.n_trigger == table.n_trigger
        assert dict(back.counts) == dict(table.counts)
        assert back.trigger == table.trigger


@given(st.permutations(range(6)))
def test_permutation_invariance(order):
    lines = ["t, a, b", "t, a", "c", "t, q", "a, b", "t"]
    records = make_records(lines)
    trigger = TriggerSet((("t",),))
    base = analyze(records, trigger)
    shuffled = [records[i] for i in order]
    permuted = analyze(shuffled, trigger)
    assert permuted.n_trigger == base.n_trigger
    assert dict(permuted.counts) == dict(base.counts)
    assert dict(permuted.ratios) == dict(base.ratios)


@settings(max_examples=50)
@given(st.lists(st.sampled_from(["a", "b", "q"]), min_size=0, max_size=5))
def test_extension_monotonicity(extra_tokens):
    records = make_records(["t, a", "t, b", "c, a"])
    trigger = TriggerSet((("t",),))
    base = analyze(records, trigger)
    extended = records + [
        CaptionRecord(index=99, tokens=tuple(["t", "a"] + extra_tokens), raw="")
    ]
    grown = analyze(extended, trigger)
    assert grown.n_trigger == base.n_trigger + 1
    for tok, c in base.counts.items():
        assert grown.counts.get(tok, 0) >= c
    assert grown.counts["a"] == base.counts["a"] + 1
