import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from timerobust.adversaries import (
    CappedStop,
    FixedStop,
    GapStop,
    LilStop,
    capped_stop,
    fixed_stop,
    gap_stop,
    lil_stop,
    parse_rule,
)
from timerobust.estimators import MLE, LilOffset, Offset, PosteriorMean
from timerobust.model import bernoulli, gaussian, product_gaussian, rate_f
from timerobust.trajectory import Trajectory


class FixedPaths:
    """Minimal trajectory stand-in over given observation rows."""

    def __init__(self, x, mu=0.0):
        self.phi = np.atleast_2d(np.asarray(x, dtype=float))
        self.sums = np.cumsum(self.phi, axis=1)
        self.mu = np.full(self.phi.shape[0], mu)
        self.reps = self.phi.shape[0]
        self.n = self.phi.shape[1]

    def extend(self, n):
        if n > self.n:
            raise AssertionError("path too short for this test")
        return self


def scan_first(event, n0, nmax):
    """Brute-force stop time: first n in (n0, nmax) with event(n), else nmax."""
    for n in range(n0 + 1, nmax):
        if event(n):
            return n, True
    return nmax, False


class TestLilStop:
    def test_immediate_trigger(self):
        x = np.zeros(200)
        x[27] = 100.0
        res = lil_stop(0.0, 0.1, 27, 200).stop_times(FixedPaths(x))
        assert res.tau[0] == 28 and res.triggered[0]

    def test_never_triggers_at_the_mean(self):
        res = lil_stop(0.0, 0.1, 27, 500).stop_times(FixedPaths(np.zeros(500)))
        assert res.tau[0] == 500 and not res.triggered[0]
        assert res.cap_hits == 1

    def test_c_must_be_positive(self):
        with pytest.raises(ValueError):
            lil_stop(0.0, 0.0)

    def test_matches_brute_force_scan(self):
        traj = Trajectory(gaussian(), 0.0, seed=8, start=0, stop=40)
        rule = lil_stop(None, 0.1, 27, 5000)
        res = rule.stop_times(traj)
        for r in range(40):
            x = traj.phi[r]
            want = scan_first(lambda n: (PosteriorMean()(x, n) - 0.0) ** 2 >= 0.1 * rate_f(n), 27, 5000)
            assert (res.tau[r], res.triggered[r]) == want

    def test_postcondition_on_every_trigger(self):
        traj = Trajectory(gaussian(), 1.3, seed=1, start=0, stop=300)
        rule = lil_stop(None, 0.1, 27, 10**4)
        res = rule.stop_times(traj)
        t = res.tau[res.triggered]
        post = PosteriorMean().at_each(traj.phi[res.triggered], traj.sums[res.triggered], t)
        assert np.all((1.3 - post) ** 2 >= 0.1 * rate_f(t))
        assert np.all(rule.holds_at(traj, res.tau)[res.triggered])

    def test_decide_agrees_with_batch(self):
        traj = Trajectory(gaussian(), 0.0, seed=3, start=0, stop=10)
        rule = lil_stop(None, 0.1, 27, 3000)
        res = rule.stop_times(traj)
        for r in range(10):
            x = traj.phi[r]
            first = next(n for n in range(1, 3001) if rule.decide(x, n, mu=0.0))
            assert first == res.tau[r]

    def test_withheld_mean(self):
        rule = lil_stop(None, 0.1, 27, 100)
        with pytest.raises(ValueError, match="withheld"):
            rule.decide(np.zeros(50), 40)

    def test_bound_mean_is_used(self):
        x = np.zeros(100)
        assert lil_stop(5.0, 0.1, 2, 100).decide(x, 3)
        assert not lil_stop(0.0, 0.1, 2, 100).decide(x, 3)

    def test_cap_hits_nonincreasing_in_cap(self):
        caps = []
        for nmax in (100, 1000, 10_000):
            traj = Trajectory(gaussian(), 0.0, seed=12, start=0, stop=400)
            caps.append(lil_stop(None, 0.3, 27, nmax).stop_times(traj).cap_hits)
        assert caps[0] >= caps[1] >= caps[2]

    def test_vector_family(self):
        traj = Trajectory(product_gaussian(2), [0.0, 0.0], seed=0, start=0, stop=20)
        res = lil_stop(None, 0.1, 27, 2000).stop_times(traj)
        post = PosteriorMean().at_each(traj.phi, traj.sums, res.tau)
        hit = res.triggered
        assert np.all((post[hit] ** 2).sum(axis=1) >= 0.1 * rate_f(res.tau[hit]))

    def test_needs_gaussian(self):
        with pytest.raises(ValueError):
            lil_stop(None).validate(bernoulli())


class TestMeasurability:
    @pytest.mark.parametrize(
        "rule",
        [
            LilStop(None, 0.2, 27, 4000),
            GapStop(Offset(MLE(), LilOffset(0.05)), 0.1, 27, 4000),
            CappedStop(MLE(), None, 0.1, 5, 800),
        ],
        ids=["lil", "gap", "capped"],
    )
    def test_changing_the_future_keeps_tau(self, rule):
        traj = Trajectory(gaussian(), 0.0, seed=31, start=0, stop=64)
        res = rule.stop_times(traj)
        other = Trajectory(gaussian(), 0.0, seed=99, start=0, stop=64)
        other.extend(traj.n)
        phi = other.phi.copy()
        for r in range(64):
            phi[r, : res.tau[r]] = traj.phi[r, : res.tau[r]]
        res2 = rule.stop_times(FixedPaths(phi))
        assert np.array_equal(res.tau, res2.tau)

    @given(st.integers(28, 400), st.integers(0, 10**6))
    def test_decision_ignores_later_observations(self, n, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=500)
        y = x.copy()
        y[n:] = rng.normal(size=500 - n) * 50
        rule = lil_stop(0.0, 0.1, 27, 1000)
        assert rule.decide(x, n) == rule.decide(y, n)


class TestGapStop:
    def test_posterior_mean_never_triggers(self):
        traj = Trajectory(gaussian(), 0.0, seed=0, start=0, stop=8)
        res = gap_stop(PosteriorMean(), 0.1, 27, 2000).stop_times(traj)
        assert np.all(res.tau == 2000) and res.cap_hits == 8

    def test_offset_estimator_triggers_immediately(self):
        traj = Trajectory(gaussian(), 0.0, seed=0, start=0, stop=8)
        est = Offset(PosteriorMean(), LilOffset(0.1))
        res = gap_stop(est, 0.1, 27, 2000).stop_times(traj)
        assert np.all(res.tau == 28)

    def test_mle_against_direct_scan(self):
        # gap^2 = (S_n/n - S_n/(n+1))^2 = (S_n / (n(n+1)))^2
        traj = Trajectory(gaussian(), 0.0, seed=4, start=0, stop=30)
        rule = gap_stop(MLE(), 1e-4, 2, 3000)
        res = rule.stop_times(traj)
        for r in range(30):
            s = traj.sums[r]
            want = scan_first(lambda n: (s[n - 1] / (n * (n + 1))) ** 2 >= 0.5e-4 * rate_f(n), 2, 3000)
            assert (res.tau[r], res.triggered[r]) == want
        assert res.triggered.any()

    def test_postcondition(self):
        traj = Trajectory(gaussian(), 0.5, seed=6, start=0, stop=200)
        est = Offset(MLE(), LilOffset(0.02))
        res = gap_stop(est, 0.1, 27, 5000).stop_times(traj)
        t = res.tau[res.triggered]
        rows = res.triggered
        gap = PosteriorMean().at_each(traj.phi[rows], traj.sums[rows], t) - est.at_each(traj.phi[rows], traj.sums[rows], t)
        assert np.all(gap**2 >= 0.05 * rate_f(t))

    def test_does_not_need_the_mean(self):
        assert not gap_stop(MLE()).needs_true_mu


class TestCappedStop:
    def test_joint_trigger_at_first_step(self):
        x = np.zeros(100)
        x[10] = 50.0
        est = Offset(PosteriorMean(), LilOffset(1.0))
        res = capped_stop(0.0, est, 0.1, 10, 60).stop_times(FixedPaths(x))
        assert res.tau[0] == 11

    def test_cap(self):
        res = capped_stop(0.0, PosteriorMean(), 0.1, 10, 60).stop_times(FixedPaths(np.ones((3, 100))))
        assert np.all(res.tau == 60) and res.cap_hits == 3

    def test_joint_frequency_against_scan(self):
        traj = Trajectory(gaussian(), 0.0, seed=17, start=0, stop=1000)
        est = Offset(MLE(), LilOffset(0.03))
        rule = capped_stop(None, est, 0.1, 27, 400)
        res = rule.stop_times(traj)
        ns = np.arange(28, 400)
        post = PosteriorMean().at(traj.phi, traj.sums, ns)
        e = est.at(traj.phi, traj.sums, ns)
        joint = (post**2 >= 0.1 * rate_f(ns)) & ((post - e) ** 2 >= 0.05 * rate_f(ns))
        want = np.where(joint.any(axis=1), ns[joint.argmax(axis=1)], 400)
        assert np.array_equal(res.tau, want)
        assert res.triggered.mean() == joint.any(axis=1).mean()
        assert 0 < res.triggered.mean() < 1

    def test_window_validation(self):
        with pytest.raises(ValueError):
            capped_stop(0.0, MLE(), 0.1, 50, 50)


class TestFixedStop:
    @pytest.mark.parametrize("n", [1, 100])
    def test_stops_at_n(self, n):
        traj = Trajectory(gaussian(), 0.0, seed=0, start=0, stop=5)
        res = fixed_stop(n).stop_times(traj)
        assert np.all(res.tau == n) and res.cap_hits == 0
        assert fixed_stop(n).decide(np.zeros(n), n)

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            fixed_stop(0)


class TestParseRule:
    def test_forms(self):
        assert isinstance(parse_rule("fixed:10"), FixedStop)
        r = parse_rule("lil:0.2,30,500")
        assert (r.c, r.n0, r.nmax) == (0.2, 30, 500)
        g = parse_rule("gap:dyadic:mle,0.1,27,1000")
        assert g.estimator.name == "dyadic:mle" and g.nmax == 1000
        c = parse_rule("capped:0.1,27,300")
        assert c.n1 == 300

    def test_defaults_fill_missing_fields(self):
        r = parse_rule("lil", n0=27, nmax=10**5)
        assert (r.c, r.n0, r.nmax) == (0.1, 27, 10**5)
        assert parse_rule("lil:0.05").c == 0.05

    @pytest.mark.parametrize("text", ["wald:1", "fixed:", "lil:0.1,2.5,10", "lil:-1", "gap:foo,0.1"])
    def test_invalid(self, text):
        with pytest.raises(ValueError):
            parse_rule(text)
