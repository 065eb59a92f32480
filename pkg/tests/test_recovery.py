import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from unilearn.bounds import upper_bound_error
from unilearn.hats import HatSpec, hat_lp_bounds, hat_lp_norm_numeric
from unilearn.nn import INF, NetworkClass
from unilearn.recovery import (
    BlindnessViolation,
    BudgetExceeded,
    DeterministicMethod,
    FoolingFunction,
    GridPredictor,
    Oracle,
    ZeroMethod,
    fooling_attack,
    grid_recovery_method,
    iroot_ceil,
    iroot_floor,
    lattice,
    lp_error_estimate,
    run_with_recording,
    zero_function,
)
from unilearn.witness import construct_small_q


def identity_1d(X):
    return np.asarray(X)[:, 0]


class AdaptiveMethod(DeterministicMethod):
    """Second query is 0.25 or 0.75 depending on the sign of the first answer."""

    name = "adaptive"

    def run(self, oracle):
        a = oracle([0.5])
        oracle([0.75 if a > 0 else 0.25])
        return GridPredictor(1, [a], 1)


class CoinMethod(DeterministicMethod):
    """Not deterministic: query position depends on hidden state."""

    name = "coin"

    def __init__(self):
        super().__init__(1, 4)
        self.calls = 0

    def run(self, oracle):
        self.calls += 1
        oracle([0.03 * self.calls])
        return GridPredictor(1, [0.0], 1)


class GreedyMethod(DeterministicMethod):
    name = "greedy"

    def run(self, oracle):
        for i in range(self.budget + 1):
            oracle([i / (self.budget + 1)])
        return GridPredictor(1, [0.0], 1)


class TestIntegerRoots:
    @pytest.mark.parametrize("m,d,K", [(1, 1, 1), (16, 2, 4), (15, 2, 3), (27, 3, 3), (26, 3, 2), (10**12, 3, 10**4)])
    def test_floor(self, m, d, K):
        assert iroot_floor(m, d) == K

    @pytest.mark.parametrize("m,s,k", [(1, 1, 1), (16, 1, 16), (16, 2, 4), (17, 2, 5), (9, 3, 3)])
    def test_ceil(self, m, s, k):
        assert iroot_ceil(m, s) == k


class TestGridRecovery:
    def test_staircase(self):
        method = grid_recovery_method(1, 4)
        t = run_with_recording(method, identity_1d)
        assert t.points[:, 0].tolist() == [0.0, 0.25, 0.5, 0.75]
        err = lp_error_estimate(identity_1d, t.predictor, INF, 10_000, 0, 1)
        assert math.isclose(err, 0.25, rel_tol=1e-6)
        assert err <= method.guaranteed_error == 0.5

    def test_constant_exact(self, rng):
        t = run_with_recording(grid_recovery_method(2, 30), lambda X: np.full(len(X), 1.7))
        assert np.all(t.predictor(rng.random((1000, 2))) == 1.7)

    def test_zero_function(self):
        t = run_with_recording(grid_recovery_method(2, 9), zero_function)
        assert np.all(t.values == 0)
        assert np.all(t.predictor(np.random.default_rng(0).random((50, 2))) == 0)

    def test_lattice_size(self):
        assert lattice(3, 2).shape == (9, 2)
        assert len(run_with_recording(grid_recovery_method(2, 15), zero_function)) == 9

    def test_predictor_total_on_faces(self):
        K, d = 4, 2
        pred = GridPredictor(K, np.arange(K**d, dtype=float), d)
        t = np.linspace(0, 1, 41)
        faces = np.array([[a, b] for a in t for b in (0.0, 1.0)] + [[b, a] for a in t for b in (0.0, 1.0)])
        vals = pred(faces)
        assert np.all(np.isfinite(vals))
        assert pred([[1.0, 1.0]])[0] == K**d - 1
        assert pred([[0.0, 0.0]])[0] == 0
        assert pred([[0.25, 0.0]])[0] == 4  # row-major, lower faces belong to their own cell

    def test_hat_network_within_upper_bound(self):
        rng = np.random.default_rng(5)
        for d in (1, 2):
            cls = NetworkClass.uniform(d, 3 * d, 3, 1.0, 1.5)
            spec = HatSpec(d, d, 2, rng.random(d))
            net, _ = construct_small_q(cls, spec)
            for m in (16, 256):
                t = run_with_recording(grid_recovery_method(d, m), net)
                err = lp_error_estimate(net, t.predictor, INF, 100_000, 1, d)
                assert err <= upper_bound_error(cls, m)


class TestRecording:
    def test_zero_method(self):
        t = run_with_recording(ZeroMethod(2, 5), zero_function)
        assert len(t) == 0 and t.points.shape == (0, 2)
        assert np.all(t.predictor(np.ones((3, 2))) == 0)

    def test_replay_identical(self, rng):
        f = lambda X: np.sin(7 * X[:, 0]) * X[:, 1]  # noqa: E731
        a = run_with_recording(grid_recovery_method(2, 50), f)
        b = run_with_recording(grid_recovery_method(2, 50), f)
        assert a.same_as(b, rng.random((100, 2)))

    def test_adaptivity(self):
        a = run_with_recording(AdaptiveMethod(1, 2), lambda X: np.ones(len(X)))
        b = run_with_recording(AdaptiveMethod(1, 2), lambda X: -np.ones(len(X)))
        assert a.points[1, 0] == 0.75 and b.points[1, 0] == 0.25

    def test_budget_overrun(self):
        with pytest.raises(BudgetExceeded):
            run_with_recording(GreedyMethod(1, 3), zero_function)

    def test_oracle_shape_check(self):
        with pytest.raises(ValueError):
            Oracle(zero_function, 2, 5).query_many(np.zeros((2, 3)))


class TestFoolingAttack:
    def test_zero_method_example(self):
        r = fooling_attack(ZeroMethod(1, 1), 1, 1, 1.0, p=INF)
        assert (r.k, r.M) == (1, 8)
        assert r.untouched_count == 4
        assert r.chosen_ell == (1,)
        assert r.fooling_function["y"] == [0.125]
        assert r.measured_error == 1.0
        assert r.theoretical_floor == 0.5

    def test_grid_method_m16(self):
        r = fooling_attack(grid_recovery_method(1, 16), 1, 1, 1.0, p=INF)
        # k = ceil(16^(1/1)) = 16, M = 128; 64 cells, 16 queries
        assert (r.k, r.M) == (16, 128)
        assert r.untouched_count >= 64 - 16
        assert r.measured_error >= 0.5
        assert r.blind

    def test_p1_floor(self):
        r = fooling_attack(grid_recovery_method(1, 16), 1, 1, 1.0, p=1)
        assert r.measured_error >= r.theoretical_floor == hat_lp_bounds(1, 128, 1)[0]

    def test_nonzero_u0(self):
        cls = NetworkClass.uniform(1, 3, 3, 1.0, 1)
        u0, _ = construct_small_q(cls, HatSpec(1, 1, 2, [0.5]))
        r = fooling_attack(ZeroMethod(1, 3), 1, 1, 1.0, u0=u0, p=INF, u0_label="net")
        assert r.measured_error >= 1.0
        assert r.blind

    def test_blindness_violation_detected(self):
        with pytest.raises(BlindnessViolation):
            fooling_attack(CoinMethod(), 1, 1, 1.0)

    def test_half_separation(self):
        for p in (1, 2, INF):
            r = fooling_attack(grid_recovery_method(2, 9), 2, 2, 0.7, p=p, n_mc=200_000)
            spec = HatSpec.from_dict(r.fooling_function)
            numeric = 0.7 * hat_lp_norm_numeric(spec, p, 8 * r.M * 2)
            assert r.measured_error >= 0.95 * numeric
            assert numeric >= r.theoretical_floor

    def test_squeeze_on_one_run(self):
        cls = NetworkClass.uniform(1, 3, 3, 1.0, 2)
        u, _ = construct_small_q(cls, HatSpec(1, 1, 2, [0.4]))
        method = grid_recovery_method(1, 16)
        t = run_with_recording(method, u)
        assert lp_error_estimate(u, t.predictor, INF, 50_000, 0, 1) <= upper_bound_error(cls, 16)
        r = fooling_attack(method, 1, 1, 0.25, u0=u, p=INF)
        assert r.measured_error >= r.theoretical_floor

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 2).flatmap(lambda d: st.tuples(st.just(d), st.integers(1, d))), st.integers(1, 40))
    def test_cardinality(self, ds, m):
        d, s = ds
        r = fooling_attack(grid_recovery_method(d, m), d, s, 1.0, n_mc=2000)
        assert r.untouched_count >= (4 * r.k) ** s - r.n_queries
        assert r.untouched_count > 0
        assert r.measured_error >= r.theoretical_floor


    @pytest.mark.parametrize("d,s", [(1, 1), (2, 1), (2, 2), (3, 2)])
    def test_cardinality_sweep_face_aligned_queries(self, d, s):
        # lattice nodes often sit exactly on faces shared by two fooling boxes
        for m in range(1, 65):
            r = fooling_attack(grid_recovery_method(d, m), d, s, 1.0, n_mc=200)
            assert r.untouched_count >= (4 * r.k) ** s - r.n_queries, m


class TestLpEstimate:
    def test_identical(self):
        assert lp_error_estimate(identity_1d, identity_1d, 2, 100, 0, 1) == 0.0

    def test_narrow_peak_found(self):
        spec = HatSpec(2, 2, 64, [0.37, 0.61], amplitude=0.8)
        f = FoolingFunction(zero_function, spec)
        # about 20 of the samples land in the support; refinement climbs to the peak
        est = lp_error_estimate(f, zero_function, INF, 20_000, 0, 2)
        assert abs(est - 0.8) <= 1e-3

    def test_probe_point_rescues_missed_spike(self):
        spec = HatSpec(2, 2, 512, [0.37, 0.61], amplitude=0.8)
        f = FoolingFunction(zero_function, spec)
        assert lp_error_estimate(f, zero_function, INF, 100, 0, 2, refine=False) == 0.0
        near = [[0.37 + 1e-3, 0.61]]
        assert abs(lp_error_estimate(f, zero_function, INF, 100, 0, 2, probe_points=near) - 0.8) <= 1e-3

    def test_tent_area(self):
        a = 1.3
        f = FoolingFunction(zero_function, HatSpec(1, 1, 2, [0.5], amplitude=a))
        est = lp_error_estimate(f, zero_function, 1, 200_000, 0, 1)
        assert abs(est - a / 2) <= 0.02 * a / 2

    def test_seeded(self):
        f = FoolingFunction(zero_function, HatSpec(1, 1, 4, [0.5]))
        assert lp_error_estimate(f, zero_function, 2, 500, 9, 1) == lp_error_estimate(f, zero_function, 2, 500, 9, 1)
