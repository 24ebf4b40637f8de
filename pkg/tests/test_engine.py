import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from timerobust.engine import (
    BLOCK_SIZE,
    RunningStats,
    block_ranges,
    config_digest,
    derive_seed,
    merge_all,
    replicate_rng,
    run_blocks,
    seeds_for_grid,
)
from timerobust.model import gaussian, product_gaussian
from timerobust.trajectory import Trajectory, prefix_sums

values = st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=40)


@given(values, values, values)
def test_running_stats_merge_is_associative(a, b, c):
    x = RunningStats.of(a).merge(RunningStats.of(b)).merge(RunningStats.of(c))
    y = RunningStats.of(a).merge(RunningStats.of(b).merge(RunningStats.of(c)))
    whole = RunningStats.of(a + b + c)
    assert x.count == y.count == whole.count
    scale = 1 + max(abs(v) for v in a + b + c)
    assert x.mean == pytest.approx(whole.mean, abs=1e-9 * scale)
    assert y.mean == pytest.approx(whole.mean, abs=1e-9 * scale)
    assert x.m2 == pytest.approx(whole.m2, rel=1e-7, abs=1e-6 * scale**2)


@given(values, values)
def test_running_stats_merge_is_commutative(a, b):
    x = RunningStats.of(a).merge(RunningStats.of(b))
    y = RunningStats.of(b).merge(RunningStats.of(a))
    scale = 1 + max(abs(v) for v in a + b)
    assert x.mean == pytest.approx(y.mean, abs=1e-9 * scale)
    assert x.m2 == pytest.approx(y.m2, rel=1e-7, abs=1e-6 * scale**2)


def test_running_stats_moments():
    v = np.arange(10.0)
    s = RunningStats.of(v)
    assert s.mean == 4.5
    assert s.var == pytest.approx(np.var(v, ddof=1))
    assert s.se == pytest.approx(np.std(v, ddof=1) / np.sqrt(10))
    assert RunningStats().merge(s) == s
    assert np.isnan(RunningStats.of([1.0]).se)


def test_push():
    s = RunningStats()
    s.push([1.0, 2.0]).push([3.0])
    assert (s.count, s.mean) == (3, 2.0)


def test_block_ranges_cover_everything():
    blocks = block_ranges(200, 64)
    assert blocks[0] == (0, 64) and blocks[-1] == (192, 200)
    assert sum(b - a for a, b in blocks) == 200


def _square_block(start, stop):
    return [replicate_rng(5, r).standard_normal() ** 2 for r in range(start, stop)]


def test_run_blocks_order_independent_of_workers():
    serial = run_blocks(_square_block, 3 * BLOCK_SIZE + 5, workers=1)
    parallel = run_blocks(_square_block, 3 * BLOCK_SIZE + 5, workers=3)
    assert serial == parallel


def test_replicate_streams_are_distinct_and_reproducible():
    a = replicate_rng(1, 0).standard_normal(5)
    b = replicate_rng(1, 1).standard_normal(5)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, replicate_rng(1, 0).standard_normal(5))


def test_negative_seed_rejected():
    with pytest.raises(ValueError):
        replicate_rng(-1, 0)


def test_derived_seeds():
    assert derive_seed(3, 1) != derive_seed(3, 2)
    assert derive_seed(3, 1) == derive_seed(3, 1)
    grid = seeds_for_grid(3, 4)
    assert grid[0] == 3 and len(set(grid)) == 4


def test_config_digest_is_order_insensitive():
    assert config_digest(a=1, b=[1, 2]) == config_digest(b=[1, 2], a=1)
    assert config_digest(a=1) != config_digest(a=2)


class TestTrajectory:
    def test_chunked_growth_equals_one_shot(self):
        a = Trajectory(gaussian(), 0.3, seed=4, start=0, stop=5)
        for n in (3, 17, 100, 1000):
            a.extend(n)
        b = Trajectory(gaussian(), 0.3, seed=4, start=0, stop=5).extend(1000)
        assert np.array_equal(a.phi, b.phi)
        assert np.array_equal(a.sums, b.sums)

    def test_block_decomposition_does_not_change_values(self):
        whole = Trajectory(gaussian(), 0.0, seed=9, start=0, stop=10).extend(50)
        part = Trajectory(gaussian(), 0.0, seed=9, start=6, stop=10).extend(50)
        assert np.array_equal(whole.phi[6:], part.phi)

    def test_sums_are_running_sums(self):
        t = Trajectory(gaussian(), 2.0, seed=1, start=0, stop=3).extend(400)
        assert np.allclose(t.sums, np.cumsum(t.phi, axis=1), rtol=1e-12, atol=1e-9)

    def test_compensated_sums_beat_naive(self):
        x = np.array([1e16, 1.0, -1e16, 1.0] * 50)
        exact = np.array([float(sum(map(int, x[: i + 1]))) for i in range(x.size)])
        assert np.array_equal(prefix_sums(x), exact)

    def test_vector_family_shapes(self):
        t = Trajectory(product_gaussian(3), [0.0, 1.0, -1.0], seed=0, start=0, stop=4).extend(20)
        assert t.phi.shape == (4, 20, 3) and t.mu.shape == (4, 3)

    def test_prior_draws_are_per_replicate(self):
        t = Trajectory(gaussian(), None, seed=0, start=0, stop=2000, prior_sd=2.0)
        assert abs(t.mu.std() - 2.0) < 0.15
        head = Trajectory(gaussian(), None, seed=0, start=0, stop=5, prior_sd=2.0)
        assert np.array_equal(head.mu, t.mu[:5])

    def test_prior_needs_gaussian(self):
        from timerobust.model import bernoulli

        with pytest.raises(ValueError):
            Trajectory(bernoulli(), None, prior_sd=1.0)

    def test_mu_required(self):
        with pytest.raises(ValueError):
            Trajectory(gaussian(), None)
