import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from fadrop import SplitMix64, derive_seed, mix64
from fadrop.rng import MASK64, derive_seeds_np, mix64_np, uniforms_at_np

u64 = st.integers(min_value=0, max_value=MASK64)


# Published splitmix64 vectors: seed 0 and seed 0x9E3779B97F4A7C15 give
# these first outputs (cross-checked against the reference C stream).
KNOWN_STREAM_SEED_0 = [
    0xE220A8397B1DCDAF,
    0x6E789E6AA1B965F4,
    0x06C45D188009454F,
    0xF88BB8A8724C81EC,
    0x1B39896A51A8749B,
]


def test_known_answer_stream():
    rng = SplitMix64(0)
    assert [rng.next_uint64() for _ in range(5)] == KNOWN_STREAM_SEED_0


@given(u64, u64, u64)
def test_derive_seed_deterministic(seed, step, idx):
    assert derive_seed(seed, step, idx) == derive_seed(seed, step, idx)


def test_neighbor_cells_differ():
    s = 42
    assert derive_seed(s, 0, 0) != derive_seed(s, 0, 1)
    assert derive_seed(s, 0, 0) != derive_seed(s, 1, 0)
    assert derive_seed(s, 3, 7) != derive_seed(s + 1, 3, 7)


def test_no_collisions_over_a_million_cells():
    # 1000 steps x 1000 captions; zero collisions expected on 64 bits.
    seeds = np.concatenate(
        [derive_seeds_np(991, step, np.arange(1000, dtype=np.uint64)) for step in range(1000)]
    )
    assert len(np.unique(seeds)) == seeds.size


@given(u64)
def test_mix64_matches_numpy(x):
    assert mix64_np(np.array([x], dtype=np.uint64))[0] == mix64(x)


@given(u64, st.integers(0, 2**32), st.lists(st.integers(0, 2**32), min_size=1, max_size=8))
def test_derive_seeds_np_matches_scalar(seed, step, indices):
    vec = derive_seeds_np(seed, step, np.array(indices, dtype=np.uint64))
    scalar = [derive_seed(seed, step, i) for i in indices]
    assert vec.tolist() == scalar


@given(u64, st.integers(1, 40))
def test_uniforms_at_matches_sequential(seed, n):
    rng = SplitMix64(seed)
    sequential = [rng.uniform() for _ in range(n)]
    batched = uniforms_at_np(
        np.full(n, seed, dtype=np.uint64), np.arange(1, n + 1, dtype=np.uint64)
    )
    assert batched.tolist() == sequential


def test_uniform_range_and_spread():
    rng = SplitMix64(2024)
    values = [rng.uniform() for _ in range(10_000)]
    assert all(0.0 <= v < 1.0 for v in values)
    assert abs(sum(values) / len(values) - 0.5) < 0.02


def test_below_is_unbiased_enough():
    rng = SplitMix64(7)
    counts = [0] * 7
    for _ in range(70_000):
        counts[rng.below(7)] += 1
    for c in counts:
        assert abs(c - 10_000) < 400  # > 3 sigma would be ~ 285

    assert sorted(SplitMix64(1).shuffled(10)) == list(range(10))


def test_shuffle_depends_on_seed_and_is_stable():
    assert SplitMix64(5).shuffled(20) == SplitMix64(5).shuffled(20)
    assert SplitMix64(5).shuffled(20) != SplitMix64(6).shuffled(20)
