import numpy as np
import pytest
from scipy.integrate import quad

from gsrisk.exppoly import ExpPoly, ExpPolyMeasure


def poly_exp(zeta, coeffs):
    ep = ExpPoly()
    ep.add_term(zeta, coeffs)
    return ep


class TestExpPolyAlgebra:
    def test_eval_single_term(self):
        ep = poly_exp(-1.0, [2.0, 3.0])  # (2 + 3x) e^{-x}
        x = np.array([0.0, 1.0, 2.5])
        assert np.allclose(ep.eval_real(x), (2 + 3 * x) * np.exp(-x))

    def test_add_merges_close_exponents(self):
        a = poly_exp(-1.0, [1.0])
        b = poly_exp(-1.0 + 1e-12, [2.0])
        c = a + b
        assert np.allclose(c.eval_real(np.array([0.7])), 3 * np.exp(-0.7))

    def test_pointwise_product(self):
        a = poly_exp(-0.5, [1.0, 1.0])
        b = poly_exp(-0.25, [2.0])
        c = a * b
        x = np.linspace(0, 3, 7)
        assert np.allclose(c.eval_real(x),
                           (1 + x) * np.exp(-0.5 * x) * 2 * np.exp(-0.25 * x))

    def test_antiderivative_vanishes_at_zero(self):
        ep = poly_exp(-2.0, [1.0, 4.0, 1.0])
        F = ep.antiderivative()
        assert F(0.0) == pytest.approx(0.0, abs=1e-14)
        val, _ = quad(ep.eval_real, 0, 1.3)
        assert float(np.real(F(1.3))) == pytest.approx(val, rel=1e-10)

    def test_integral_to_infinity(self):
        ep = poly_exp(-1.5, [1.0, 2.0])
        val, _ = quad(ep.eval_real, 0, np.inf)
        assert float(np.real(ep.integral_0_inf())) == pytest.approx(val, rel=1e-10)

    def test_laplace_transform(self):
        ep = poly_exp(-1.0, [0.0, 1.0])  # x e^{-x}
        s = 0.7
        assert complex(ep.laplace(s)) == pytest.approx(1 / (s + 1) ** 2, rel=1e-12)


class TestConvolution:
    def test_distinct_poles(self):
        # e^{-x} * e^{-2x} = e^{-x} - e^{-2x}
        c = poly_exp(-1.0, [1.0]).convolve(poly_exp(-2.0, [1.0]))
        x = np.linspace(0.01, 5, 9)
        assert np.allclose(c.eval_real(x), np.exp(-x) - np.exp(-2 * x), atol=1e-12)

    def test_equal_poles(self):
        # e^{-x} * e^{-x} = x e^{-x}
        c = poly_exp(-1.0, [1.0]).convolve(poly_exp(-1.0, [1.0]))
        x = np.linspace(0.01, 5, 9)
        assert np.allclose(c.eval_real(x), x * np.exp(-x), atol=1e-12)

    def test_polynomial_factors_against_quadrature(self):
        f = poly_exp(-0.8, [1.0, 2.0])
        g = poly_exp(-1.7, [0.5, 0.0, 1.0])
        c = f.convolve(g)
        for x in (0.5, 2.0, 6.0):
            direct, _ = quad(lambda w: f.eval_real(w) * g.eval_real(x - w), 0, x)
            assert float(c.eval_real(np.array([x]))[0]) == pytest.approx(
                direct, rel=1e-9)

    def test_growing_exponent_supported(self):
        f = poly_exp(0.3, [1.0])
        g = poly_exp(-1.0, [1.0])
        c = f.convolve(g)
        x = 1.2
        direct, _ = quad(lambda w: np.exp(0.3 * w) * np.exp(-(x - w)), 0, x)
        assert float(c.eval_real(np.array([x]))[0]) == pytest.approx(direct, rel=1e-10)


class TestFromRational:
    def test_matrix_exponential_row(self):
        T = np.array([[-2.0, 1.0], [0.5, -1.5]])
        alpha = np.array([0.3, 0.7])
        col = np.array([1.0, 1.0])
        ep = ExpPoly.from_matrix_exp(alpha, T, col)
        from scipy.linalg import expm
        for x in (0.0, 0.9, 3.0):
            direct = alpha @ expm(T * x) @ col
            assert float(ep.eval_real(np.array([x]))[0]) == pytest.approx(
                direct, rel=1e-10)

    def test_shifted_matrix_exponential(self):
        T = np.array([[-1.0]])
        ep = ExpPoly.from_matrix_exp(np.array([1.0]), T, np.array([1.0]), shift=0.5)
        x = 2.0
        assert float(ep.eval_real(np.array([x]))[0]) == pytest.approx(
            np.exp(-1.5 * x), rel=1e-12)


class TestPruneGrowing:
    def test_cancelled_growth_pruned(self):
        ep = poly_exp(0.4, [1.0]) + poly_exp(-1.0, [2.0])
        ep.add_term(0.4, [-1.0])
        out = ep.prune().prune_growing(tol=1e-9)
        x = np.array([5.0])
        assert np.allclose(out.eval_real(x), 2 * np.exp(-5.0))

    def test_surviving_growth_raises(self):
        ep = poly_exp(0.4, [1.0]) + poly_exp(-1.0, [2.0])
        with pytest.raises(Exception):
            ep.prune_growing(tol=1e-9)


class TestExpPolyMeasure:
    def test_atom_in_convolution(self):
        # (a delta_0 + f) * g = a g + f * g
        f = poly_exp(-1.0, [1.0])
        g = poly_exp(-2.0, [1.0])
        m = ExpPolyMeasure(atom=0.5, density=f)
        conv = m.convolve(ExpPolyMeasure(atom=0.0, density=g))
        x = 1.1
        expect = 0.5 * g.eval_real(np.array([x]))[0] \
            + f.convolve(g).eval_real(np.array([x]))[0]
        assert float(conv.density.eval_real(np.array([x]))[0]) == pytest.approx(
            expect, rel=1e-10)

    def test_cdf(self):
        m = ExpPolyMeasure(atom=0.25, density=poly_exp(-1.0, [0.75]))
        cdf = m.cdf()
        assert float(np.real(cdf(0.0))) == pytest.approx(0.25)
        x = 3.0
        assert float(np.real(cdf(x))) == pytest.approx(
            0.25 + 0.75 * (1 - np.exp(-3.0)), rel=1e-10)
