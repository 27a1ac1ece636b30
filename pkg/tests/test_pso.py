import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lords.errors import DomainError
from lords.pso import (
    ContinuousEncoding,
    DiscreteEncoding,
    InertiaSchedule,
    PsoConfig,
    decode,
    normalize_weights,
    optimize,
    swarm_minimize,
)


def quadratic(target):
    def f(x):
        return np.sum((x - target) ** 2, axis=-1)

    return f


class TestInertia:
    def test_endpoints(self):
        w = InertiaSchedule().weights(1500)
        assert w[0] == pytest.approx(0.9)
        assert w[-1] == pytest.approx(0.4)
        assert np.all(np.diff(w) <= 0)

    def test_midpoint(self):
        w = InertiaSchedule(0.9, 0.4, 1.25).weights(3)
        assert w[1] == pytest.approx(0.4 + 0.5 * 0.5**1.25)

    def test_invalid(self):
        with pytest.raises(DomainError):
            InertiaSchedule(0.3, 0.4)


class TestConfig:
    @pytest.mark.parametrize("kw", [{"swarm_size": 1}, {"max_iters": 0}, {"c1": -1}, {"restarts": 0}])
    def test_invalid(self, kw):
        with pytest.raises(DomainError):
            PsoConfig(**kw)

    def test_published_defaults(self):
        cfg = PsoConfig()
        assert (cfg.swarm_size, cfg.max_iters, cfg.c1, cfg.c2) == (50, 1500, 2.5, 0.5)


class TestSwarm:
    def test_quadratic_box(self):
        target = np.array([0.3, -0.7, 1.2, 0.0, 2.5])
        lo, hi = np.full(5, -3.0), np.full(5, 3.0)
        cfg = PsoConfig(restarts=2, max_iters=1500)
        rngs = [np.random.default_rng(s) for s in (1, 2)]
        runs = swarm_minimize(quadratic(target), lo, hi, cfg, rngs)
        for run in runs:
            assert np.allclose(run.position, target, atol=1e-4)
            assert run.value < 1e-8

    def test_optimum_on_boundary(self):
        target = np.array([5.0, -5.0])
        cfg = PsoConfig(restarts=1, max_iters=400)
        run = swarm_minimize(quadratic(target), np.full(2, -1.0), np.full(2, 1.0), cfg,
                             [np.random.default_rng(0)])[0]
        assert np.allclose(run.position, [1.0, -1.0])

    def test_history_monotone(self):
        cfg = PsoConfig(restarts=1, max_iters=300)
        run = swarm_minimize(quadratic(np.zeros(3)), -np.ones(3), np.ones(3), cfg,
                             [np.random.default_rng(5)])[0]
        vals = [v for _, v in run.history]
        assert all(b <= a for a, b in zip(vals, vals[1:]))
        assert run.history[0][0] == 0

    def test_positions_stay_in_box(self):
        seen = []

        def f(x):
            seen.append(x.copy())
            return np.sum(x, axis=-1)

        cfg = PsoConfig(restarts=2, max_iters=50, swarm_size=10)
        swarm_minimize(f, np.zeros(3), np.ones(3), cfg, [np.random.default_rng(i) for i in range(2)])
        allx = np.concatenate(seen)
        assert allx.min() >= 0 and allx.max() <= 1

    def test_stall_stops_early(self):
        cfg = PsoConfig(restarts=1, max_iters=1500, stall_iters=50)
        run = swarm_minimize(lambda x: np.zeros(len(x)), np.zeros(2), np.ones(2), cfg,
                             [np.random.default_rng(0)])[0]
        assert run.iterations == 50


class TestDecode:
    def test_continuous(self):
        enc = ContinuousEncoding(3, -1.0, 5.0)
        d = decode(np.array([0.0, 2.0, 4.0, 1.0, 1.0, 2.0]), enc)
        assert d.points == (0.0, 2.0, 4.0)
        assert np.allclose(d.weights, [1 / 6, 1 / 6, 4 / 6])

    def test_merges_close_points(self):
        enc = ContinuousEncoding(3, -1.0, 5.0)
        d = decode(np.array([1.0, 1.0 + 1e-6, 4.0, 1.0, 1.0, 1.0]), enc)
        assert len(d) == 2
        assert d.weights[0] == pytest.approx(2 / 3)

    def test_discrete_never_merges(self):
        enc = DiscreteEncoding((0.0, 0.01, 1.0))
        d = decode(np.array([1.0, 1.0, 1.0]), enc)
        assert len(d) == 3

    def test_drops_tiny(self):
        enc = DiscreteEncoding((0.0, 1.0, 2.0))
        d = decode(np.array([1.0, 0.05, 1.0]), enc)
        assert d.points == (0.0, 2.0)

    def test_all_zero_weights_uniform(self):
        w = normalize_weights(np.zeros((2, 4)))
        assert np.allclose(w, 0.25)


@settings(max_examples=300, deadline=None)
@given(arrays(np.float64, 10, elements=st.floats(0, 1)), arrays(np.float64, 10, elements=st.floats(-1.2, 5.77)))
def test_decode_simplex_invariants(raw, pts):
    enc = ContinuousEncoding(10, -1.2, 5.77)
    for clean in (False, True):
        d = decode(np.r_[pts, raw], enc, cleanup=clean)
        w = d.weight_array
        assert np.all(w >= 0)
        assert w.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(d.point_array >= -1.2) and np.all(d.point_array <= 5.77)
        if clean:
            assert np.all(np.diff(d.point_array) >= 0.05 - 1e-12)
            assert np.all(w >= 0.01) or len(d) == 1


class TestOptimize:
    @staticmethod
    def obj(points, weights):
        # minimized by putting mass at the lowest admissible dose
        return np.sum(weights * points, axis=-1)

    def test_deterministic(self):
        enc = ContinuousEncoding(4, 0.0, 1.0)
        cfg = PsoConfig(restarts=3, max_iters=100, seed=42)
        a = optimize(self.obj, enc, cfg)
        b = optimize(self.obj, enc, cfg)
        assert a.best_design == b.best_design
        assert a.history == b.history
        assert a.restart_values == b.restart_values

    def test_seed_changes_path(self):
        enc = ContinuousEncoding(4, 0.0, 1.0)
        a = optimize(self.obj, enc, PsoConfig(restarts=2, max_iters=30, seed=1, polish=False))
        b = optimize(self.obj, enc, PsoConfig(restarts=2, max_iters=30, seed=2, polish=False))
        assert a.history != b.history

    def test_linear_objective(self):
        enc = ContinuousEncoding(4, 0.0, 1.0)
        res = optimize(self.obj, enc, PsoConfig(restarts=2, max_iters=200, seed=3))
        assert res.best_value == pytest.approx(0.0, abs=1e-6)
        assert res.best_design.points[0] == pytest.approx(0.0, abs=1e-6)
