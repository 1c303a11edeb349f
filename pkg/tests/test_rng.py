import numpy as np
import pytest

from popsim import rng


def test_seed_state_deterministic():
    a = rng.seed_state(12345)
    b = rng.seed_state(12345)
    assert (a == b).all()
    assert not (a == rng.seed_state(12346)).all()


def test_stream_replay():
    s1 = rng.seed_state(7)
    s2 = rng.seed_state(7)
    xs = [int(rng.next_u64(s1)) for _ in range(100)]
    ys = [int(rng.next_u64(s2)) for _ in range(100)]
    assert xs == ys


def test_spawn_seed_distinct():
    seeds = {rng.spawn_seed(42, i) for i in range(1000)}
    assert len(seeds) == 1000
    assert rng.spawn_seed(42, 0) != rng.spawn_seed(43, 0)


def test_rand_below_range():
    s = rng.seed_state(1)
    vals = [rng.rand_below(s, 7) for _ in range(2000)]
    assert set(vals) == set(range(7))


def test_bernoulli_threshold_edges():
    assert rng.bernoulli_threshold(0.0) == 0
    assert rng.bernoulli_threshold(1.0) == 1 << rng.PROB_BITS
    with pytest.raises(ValueError):
        rng.bernoulli_threshold(1.5)


def test_bernoulli_rate():
    s = rng.seed_state(3)
    thresh = rng.bernoulli_threshold(0.3)
    n = 200_000
    hits = sum(bool(rng.bernoulli(s, thresh)) for _ in range(n))
    # 5 sigma around 0.3
    sigma = (n * 0.3 * 0.7) ** 0.5
    assert abs(hits - 0.3 * n) < 5 * sigma


def test_pair_uniformity_chi_square():
    """Unordered pairs at n=10: each of the 45 pairs within 5 sigma of 1/45."""
    s = rng.seed_state(2024)
    n = 10
    draws = 1_000_000
    counts = np.zeros((n, n), np.int64)
    for _ in range(draws):
        i, j = rng.rand_pair(s, n)
        assert i != j
        lo, hi = (i, j) if i < j else (j, i)
        counts[lo, hi] += 1
    p = 1 / 45
    mean = draws * p
    sigma = (draws * p * (1 - p)) ** 0.5
    for lo in range(n):
        for hi in range(lo + 1, n):
            assert abs(counts[lo, hi] - mean) < 5 * sigma, (lo, hi, counts[lo, hi])
