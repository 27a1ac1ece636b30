import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lords.cr_model import ThetaParams, obd, outcome_probabilities
from lords.errors import DegenerateDoseError, DomainError, SingularDesignError
from lords.information import (
    DesignMeasure,
    c_criterion,
    c_criterion_fim,
    c_vector,
    cholesky_batch,
    d_criterion,
    d_criterion_fim,
    design_fim,
    design_fim_batch,
    mu,
    mu_many,
    solve_fim,
)
from lords.scenarios import SCENARIOS


def jacobian_mu(d, theta):
    """Multinomial information J^T diag(1/pi) J with J by central differences."""
    t = theta.as_array()
    h = 1e-6
    jac = np.zeros((3, 4))
    for k in range(4):
        up, dn = t.copy(), t.copy()
        up[k] += h
        dn[k] -= h
        pu = np.array([float(v) for v in outcome_probabilities(d, _raw(up))])
        pd = np.array([float(v) for v in outcome_probabilities(d, _raw(dn))])
        jac[:, k] = (pu - pd) / (2 * h)
    pi = np.array([float(v) for v in outcome_probabilities(d, theta)])
    return jac.T @ np.diag(1 / pi) @ jac


def _raw(t):
    # bypass validation for perturbed parameters
    obj = object.__new__(ThetaParams)
    for name, v in zip(("theta1", "theta2", "theta3", "theta4"), t):
        object.__setattr__(obj, name, float(v))
    return obj


def random_theta(rng):
    t3 = -rng.uniform(0.5, 12)
    return ThetaParams(t3 + rng.uniform(0, 8), rng.uniform(0.1, 3), t3, rng.uniform(0.1, 3))


class TestDesignMeasure:
    def test_validation(self):
        with pytest.raises(DomainError):
            DesignMeasure((0.0, 1.0), (0.5, 0.6))
        with pytest.raises(DomainError):
            DesignMeasure((0.0,), (-0.0 - 1.0,))
        with pytest.raises(DomainError):
            DesignMeasure((), ())
        with pytest.raises(DomainError):
            DesignMeasure((np.nan,), (1.0,))

    def test_cleanup_merges_and_drops(self):
        d = DesignMeasure((1.0, 1.0 + 1e-6, 3.0, 5.0), (0.3, 0.3, 0.395, 0.005))
        c = d.cleanup()
        assert len(c) == 2
        assert c.points[0] == pytest.approx(1.0 + 5e-7)
        assert c.weights[0] == pytest.approx(0.6 / 0.995)
        assert sum(c.weights) == pytest.approx(1.0)

    def test_cleanup_no_merge_on_zero_tol(self):
        d = DesignMeasure((1.0, 1.01), (0.5, 0.5))
        assert len(d.cleanup(merge_tol=0.0)) == 2

    def test_cleanup_keeps_heaviest_when_all_small(self):
        d = DesignMeasure((0.0, 1.0), (0.4, 0.6))
        c = d.cleanup(min_weight=0.9)
        assert c.points == (1.0,) and c.weights == (1.0,)


class TestMu:
    @pytest.mark.parametrize("name", "ABCD")
    @pytest.mark.parametrize("d", [-1.2, 0.0, 2.5, 5.77])
    def test_matches_multinomial_jacobian(self, name, d):
        th = SCENARIOS[name]
        assert np.allclose(mu(d, th), jacobian_mu(d, th), rtol=1e-6, atol=1e-10)

    def test_rank_two_psd_bulk(self):
        rng = np.random.default_rng(1)
        for _ in range(10_000):
            th = random_theta(rng)
            d = rng.uniform(-5, 5)
            m = mu_many(d, th)
            ev = np.linalg.eigvalsh(m)
            scale = max(ev.max(), 1e-300)
            assert ev.min() >= -1e-12 * scale
            assert np.sum(ev > 1e-10 * scale) <= 2
            assert np.allclose(m, m.T)

    def test_degenerate_dose(self):
        th = SCENARIOS["C"]
        with pytest.raises(DegenerateDoseError):
            mu(1e4, th)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-3, 3), min_size=1, max_size=6), st.integers(0, 2**32 - 1))
    def test_fim_is_linear_in_weights(self, pts, seed):
        th = SCENARIOS["B"]
        rng = np.random.default_rng(seed)
        w1 = rng.dirichlet(np.ones(len(pts)))
        w2 = rng.dirichlet(np.ones(len(pts)))
        a = rng.uniform()
        m1 = design_fim(DesignMeasure(tuple(pts), tuple(w1)), th)
        m2 = design_fim(DesignMeasure(tuple(pts), tuple(w2)), th)
        mix = design_fim(DesignMeasure.normalized(pts, a * w1 + (1 - a) * w2), th)
        assert np.allclose(mix, a * m1 + (1 - a) * m2, rtol=1e-10, atol=1e-14)

    def test_batch_matches_single(self):
        rng = np.random.default_rng(2)
        pts = rng.uniform(-1, 5, (7, 4))
        w = rng.dirichlet(np.ones(4), 7)
        batch = design_fim_batch(pts, w, SCENARIOS["A"])
        for i in range(7):
            assert np.allclose(batch[i], design_fim(DesignMeasure(tuple(pts[i]), tuple(w[i])), SCENARIOS["A"]))


class TestCriteria:
    def test_two_point_singular(self):
        d = DesignMeasure((0.0,), (1.0,))
        assert d_criterion(d, SCENARIOS["A"]) == np.inf
        assert c_criterion(d, SCENARIOS["A"], c_vector(SCENARIOS["A"])) == np.inf

    def test_two_point_against_dense_solve(self):
        th = SCENARIOS["A"]
        d = DesignMeasure((0.0, 3.0), (0.5, 0.5))
        m = design_fim(d, th)
        assert d_criterion(d, th) == pytest.approx(-np.log(np.linalg.det(m)), rel=1e-10)
        c = c_vector(th)
        assert c_criterion(d, th, c) == pytest.approx(c @ np.linalg.solve(m, c), rel=1e-10)

    def test_cholesky_batch_against_numpy(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=(50, 4, 4))
        m = a @ np.swapaxes(a, -1, -2) + 0.1 * np.eye(4)
        lower, ok = cholesky_batch(m)
        assert ok.all()
        assert np.allclose(lower, np.linalg.cholesky(m))
        assert np.allclose(d_criterion_fim(m), -np.linalg.slogdet(m)[1])

    def test_singular_flagged(self):
        m = np.zeros((4, 4))
        m[0, 0] = m[1, 1] = 1.0
        assert d_criterion_fim(m) == np.inf
        assert c_criterion_fim(m, np.ones(4)) == np.inf
        with pytest.raises(SingularDesignError):
            solve_fim(m, np.ones(4))

    def test_solve_fim(self):
        rng = np.random.default_rng(4)
        a = rng.normal(size=(4, 4))
        m = a @ a.T + np.eye(4)
        b = rng.normal(size=4)
        assert np.allclose(solve_fim(m, b), np.linalg.solve(m, b))

    def test_c_criterion_scale(self):
        th = SCENARIOS["B"]
        d = DesignMeasure((-1.2, 0.0, 3.0, 5.0), (0.25,) * 4)
        c = c_vector(th)
        assert c_criterion(d, th, 2 * c) == pytest.approx(4 * c_criterion(d, th, c))


class TestCVector:
    @pytest.mark.parametrize("name", "ABCD")
    def test_finite_differences(self, name):
        th = SCENARIOS[name]
        t = th.as_array()
        fd = np.zeros(4)
        for k in range(4):
            h = 1e-6 * max(1.0, abs(t[k]))
            up, dn = t.copy(), t.copy()
            up[k] += h
            dn[k] -= h
            fd[k] = (obd(_raw(up)) - obd(_raw(dn))) / (2 * h)
        assert np.allclose(c_vector(th), fd, rtol=1e-5, atol=1e-9)
