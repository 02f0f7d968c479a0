import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from gsrisk import HeavyTail, MixtureClaim, PhaseType, erlang_ph, exponential_ph
from gsrisk.errors import (InfiniteMean, InputError, InvalidSubintensity,
                           NonStochasticAlpha, TransformDivergence)


class TestPhaseType:
    def test_exponential_cdf(self):
        ph = exponential_ph(2.0)
        x = np.linspace(0, 5, 11)
        assert np.allclose(ph.cdf(x), 1 - np.exp(-2 * x), atol=1e-12)

    def test_erlang_moments(self):
        ph = erlang_ph(3, 2.0)
        assert ph.mean == pytest.approx(1.5, rel=1e-12)
        # Erlang(3, 2): E[X^2] = k(k+1)/rate^2
        assert ph.second_moment() == pytest.approx(3.0, rel=1e-10)

    def test_lst_matches_quadrature(self):
        ph = erlang_ph(2, 1.5)
        for s in (0.3, 1.0, 2.0 + 1.0j):
            direct, _ = quad(lambda x: np.exp(-s * x) * ph.pdf(x), 0, np.inf,
                             complex_func=True)
            assert ph.lst(s) == pytest.approx(direct, rel=1e-9)

    def test_equilibrium_density_is_scaled_tail(self):
        ph = erlang_ph(2, 1.0)
        eq = ph.equilibrium()
        x = np.linspace(0.0, 8, 17)
        assert np.allclose(eq.pdf(x), ph.sf(x) / ph.mean, atol=1e-10)

    def test_alpha_must_be_stochastic(self):
        with pytest.raises(NonStochasticAlpha):
            PhaseType(np.array([0.5, 0.6]), np.array([[-1.0, 0.0], [0.0, -1.0]]))

    def test_subintensity_rowsums(self):
        with pytest.raises(InvalidSubintensity):
            PhaseType(np.array([1.0]), np.array([[0.5]]))

    def test_sampling_mean(self):
        ph = erlang_ph(2, 2.0)
        rng = np.random.default_rng(0)
        xs = ph.sample(rng, size=200_000)
        assert np.mean(xs) == pytest.approx(ph.mean, rel=0.01)

    @given(rate=st.floats(0.2, 5.0))
    @settings(max_examples=25, deadline=None)
    def test_exponential_lst_identity(self, rate):
        ph = exponential_ph(rate)
        s = 0.7
        assert complex(ph.lst(s)) == pytest.approx(rate / (rate + s), rel=1e-10)


class TestHeavyTail:
    def test_pareto_mean(self):
        ht = HeavyTail("pareto", (2.0, 1.0))
        assert ht.mean == pytest.approx(1.0, rel=1e-12)

    def test_pareto_shape_one_rejected(self):
        with pytest.raises(InfiniteMean):
            HeavyTail("pareto", (1.0, 1.0))

    def test_unknown_kind_rejected(self):
        with pytest.raises(InputError):
            HeavyTail("cauchy", (1.0, 1.0))

    @pytest.mark.parametrize("ht", [
        HeavyTail("pareto", (2.5, 1.3)),
        HeavyTail("weibull", (0.6, 1.0)),
        HeavyTail("lognormal", (0.0, 1.0)),
    ])
    def test_integrated_tail_matches_quadrature(self, ht):
        for x in (0.0, 0.5, 2.0, 10.0):
            direct, _ = quad(lambda y: float(ht.tail(y)), x, np.inf, limit=300)
            assert float(ht.integrated_tail(x)) == pytest.approx(direct, rel=1e-7)

    @pytest.mark.parametrize("ht", [
        HeavyTail("pareto", (2.0, 1.0)),
        HeavyTail("weibull", (0.7, 2.0)),
        HeavyTail("lognormal", (0.2, 0.8)),
    ])
    def test_mean_matches_integrated_tail_at_zero(self, ht):
        assert float(ht.integrated_tail(0.0)) == pytest.approx(ht.mean, rel=1e-10)

    def test_equilibrium_lst_small_s_continuity(self):
        ht = HeavyTail("pareto", (2.0, 1.0))
        assert abs(ht.equilibrium_lst(1e-8) - 1.0) < 1e-4

    def test_equilibrium_lst_diverges_left_half_plane(self):
        ht = HeavyTail("pareto", (2.0, 1.0))
        with pytest.raises(TransformDivergence):
            ht.equilibrium_lst(-0.5)

    def test_equilibrium_lst_matches_quadrature(self):
        ht = HeavyTail("weibull", (0.5, 1.0))
        s = 0.8
        direct, _ = quad(lambda x: math.exp(-s * x) * float(ht.tail(x)),
                         0, np.inf, limit=400)
        assert complex(ht.equilibrium_lst(s)) == pytest.approx(
            direct / ht.mean, rel=1e-8)

    @pytest.mark.parametrize("kind,params", [
        ("pareto", (2.0, 1.0)), ("weibull", (0.6, 1.0)), ("lognormal", (0.0, 0.9)),
    ])
    def test_sampling_tail_frequency(self, kind, params):
        ht = HeavyTail(kind, params)
        rng = np.random.default_rng(1)
        xs = ht.sample(rng, size=200_000)
        x0 = 2.0
        assert np.mean(xs > x0) == pytest.approx(float(ht.tail(x0)), abs=0.005)


class TestMixtureClaim:
    def test_mean_is_convex_combination(self):
        mix = MixtureClaim(exponential_ph(2.0), HeavyTail("pareto", (3.0, 1.0)), 0.1)
        assert mix.mean(0.1) == pytest.approx(0.9 * 0.5 + 0.1 * 0.5, rel=1e-12)

    def test_cdf_mixes(self):
        mix = MixtureClaim(exponential_ph(1.0), HeavyTail("pareto", (2.0, 1.0)), 0.25)
        x = 1.7
        expect = 0.75 * (1 - math.exp(-x)) + 0.25 * (1 - (1 + x) ** -2)
        assert float(mix.cdf(x, 0.25)) == pytest.approx(expect, rel=1e-12)

    def test_eps_validated(self):
        with pytest.raises(InputError):
            MixtureClaim(exponential_ph(1.0), HeavyTail("pareto", (2.0, 1.0)), 1.5)
