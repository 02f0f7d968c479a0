import numpy as np
import pytest
from scipy.optimize import brentq

from conftest import make_model_a, random_valid_model
from gsrisk.fluid_map import det_polynomial, matrix_exponent
from gsrisk.spectral import build_spectral, positive_roots, rho_first_order


def perturbed_positive_roots(model, eps, base_roots, window=0.05):
    """Roots of det F_{eps,q} continued from the base roots by bracketing."""
    out = []
    for r in np.real(base_roots):
        f = lambda s: np.real(np.linalg.det(matrix_exponent(model, s, eps=eps)))
        lo, hi = r - window, r + window
        assert f(lo) * f(hi) < 0
        out.append(brentq(f, lo, hi, xtol=1e-13))
    return np.array(out)


class TestPositiveRoots:
    def test_count_with_killing(self, model_a):
        roots = positive_roots(model_a)
        assert roots.size == model_a.dimension  # N_+ + 1

    def test_count_without_killing(self):
        m = make_model_a(q=0.0)
        roots = positive_roots(m)
        assert roots.size == m.dimension
        assert np.min(np.abs(roots)) < 1e-12  # zero root included explicitly

    def test_random_models(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            m = random_valid_model(rng)
            assert positive_roots(m).size == m.dimension


class TestSpectralData:
    def test_eigenrow_residuals(self, model_a_pipeline):
        m, detp, sp, _ = model_a_pipeline
        for i, rho in enumerate(sp.rho):
            res = sp.Lambda[i, :] @ matrix_exponent(m, rho, eps=0.0)
            assert np.max(np.abs(res)) < 1e-8

    def test_R_eigenvalues_are_roots(self, model_a_pipeline):
        _, _, sp, _ = model_a_pipeline
        ev = np.sort(np.linalg.eigvals(sp.R).real)
        assert np.allclose(ev, np.sort(sp.rho.real), atol=1e-8)

    def test_semigroup(self, model_a_pipeline):
        _, _, sp, _ = model_a_pipeline
        assert np.allclose(sp.exp_R(0.0), np.eye(sp.R.shape[0]), atol=1e-12)
        assert np.allclose(sp.exp_R(1.0) @ sp.exp_R(2.0), sp.exp_R(3.0),
                           atol=1e-10)

    def test_exp_R_solves_ode(self, model_a_pipeline):
        _, _, sp, _ = model_a_pipeline
        z, dz = 0.8, 1e-6
        deriv = (sp.exp_R(z + dz) - sp.exp_R(z - dz)) / (2 * dz)
        assert np.allclose(deriv, -sp.R @ sp.exp_R(z), atol=1e-5)


class TestFirstOrder:
    """O(eps) consistency of the perturbation series against numerical
    continuation of the exact spectral objects in eps."""

    EPS = 1e-3

    def test_rho_first_order(self, model_a_pipeline):
        m, detp, sp, _ = model_a_pipeline
        pert = perturbed_positive_roots(m, self.EPS, sp.rho)
        for i in range(sp.rho.size):
            fd = (pert[i] - sp.rho[i].real) / self.EPS
            assert sp.rho1[i].real == pytest.approx(fd, rel=5e-2)

    def test_exp_R_first_order(self, model_a_pipeline):
        m, detp, sp, _ = model_a_pipeline
        eps = self.EPS
        pert_roots = perturbed_positive_roots(m, eps, sp.rho)
        # rebuild the perturbed spectral objects from scratch
        from gsrisk.fluid_map import adj_row_polys
        row_polys = adj_row_polys(m)
        Lam = np.array([[np.polynomial.polynomial.polyval(r, row_polys[j])
                         for j in range(m.dimension)] for r in pert_roots])
        Gam = np.diag(pert_roots.astype(complex))
        R_eps = np.linalg.solve(Lam, Gam @ Lam)
        for z in (0.3, 1.0, 2.5):
            E_eps = np.linalg.solve(
                Lam, np.diag(np.exp(-pert_roots * z)) @ Lam)
            fd = (E_eps - sp.exp_R(z)) / eps
            e1 = sp.exp_R_first_order(z)
            scale = np.max(np.abs(fd))
            assert np.max(np.abs(fd - e1)) / scale < 5e-2

    def test_zero_eps_no_shift(self, model_a_pipeline):
        m, _, sp, _ = model_a_pipeline
        # k(s) multiplies every first-order term; with mu_h = mu_p and the
        # same equilibrium transform the shift vanishes at s where they agree
        assert np.all(np.isfinite(sp.rho1))
