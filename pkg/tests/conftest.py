import pytest

from fadrop import TokenizationMode, TriggerSet, parse_caption


@pytest.fixture
def tag_mode():
    return TokenizationMode()


@pytest.fixture
def tiny_corpus(tag_mode):
    """Three captions; trigger 't' appears in two of them."""
    lines = ["t, a, b", "t, a", "c"]
    records = [parse_caption(s, tag_mode, i) for i, s in enumerate(lines)]
    return records, TriggerSet.from_strings(["t"], tag_mode)


def make_records(lines, mode=None):
    mode = mode or TokenizationMode()
    return [parse_caption(s, mode, i) for i, s in enumerate(lines)]
