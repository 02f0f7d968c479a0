"""Gerber-Shiu values: base, first-order coefficient, corrected output,
the Cramer-Lundberg specialization, and the asymptotic bound.

The strongest oracle here swaps the heavy component for a hyperexponential
stand-in with identical call surface.  The mixture is then itself
phase-type, so the exact value at any eps is computable through the base
pipeline on an expanded model and the first-order coefficient has an
exact finite-difference oracle with no Monte Carlo noise.
"""

import math
import warnings

import numpy as np
import pytest
from scipy.linalg import block_diag

from gsrisk import (HeavyTail, InputError, MixtureClaim, PenaltyFunction,
                    PhaseType, build_model, exponential_ph)
from gsrisk.errors import PreconditionViolated
from gsrisk.fluid_map import det_polynomial
from gsrisk.gerber_shiu import (CorrectionKernel, asymptotic_bound,
                                cl_ruin_corrected, gs_base,
                                gs_correction_analytic, gs_correction_grid,
                                gs_corrected, resolvent_first_row)
from gsrisk.scale import base_scale_matrix, scale_row_correction
from gsrisk.spectral import build_spectral

from conftest import PARETO, make_cl_model, make_model_a

UNIT = PenaltyFunction.constant(1.0)

# frozen regression values for the reference model (q = 0.1), validated
# against event-driven Monte Carlo within its confidence interval
BASE_REF = {
    0.0: 0.662264139079,
    1.0: 0.472448438951,
    2.0: 0.337037013325,
    3.0: 0.240436710095,
    4.0: 0.171523628788,
    5.0: 0.122362160175,
}


def pipeline(model):
    detp = det_polynomial(model)
    sp = build_spectral(model, detp)
    W = base_scale_matrix(model, detp)
    return sp, W


# -- hyperexponential stand-in for the heavy component ------------------------

H_PH = PhaseType(np.array([0.5, 0.5]), np.array([[-0.7, 0.0], [0.0, -3.0]]))


class HyperExpTail:
    """Duck-typed heavy component backed by a hyperexponential law."""

    kind = "pareto"
    params = (2.0, 1.0)
    mean = H_PH.mean

    def tail(self, x):
        return H_PH.sf(x)

    def cdf(self, x):
        return H_PH.cdf(x)

    def pdf(self, x):
        return H_PH.pdf(x)

    def equilibrium_tail(self, x):
        return H_PH.equilibrium().sf(x)

    def equilibrium_lst(self, s):
        return H_PH.equilibrium().lst(s)


def expanded_mixture_ph(eps):
    """The (1 - eps, eps) mixture of exp(1) and H_PH as a single PH law."""
    p = exponential_ph(1.0)
    alpha = np.concatenate([(1 - eps) * p.alpha, eps * H_PH.alpha])
    return PhaseType(alpha, block_diag(p.T, H_PH.T))


def exact_gs_hyperexp(eps, u, q=0.1):
    """Exact GS value when the heavy slot holds the hyperexponential."""
    ph = expanded_mixture_ph(eps) if eps > 0 else exponential_ph(1.0)
    claims = MixtureClaim(ph, PARETO, 0.0)
    m = build_model(1.0, 1.0, claims, lambda_plus=0.5,
                    gains=exponential_ph(2.0), q=q)
    sp, W = pipeline(m)
    return gs_base(m, sp, W, UNIT, u)


# -- base value ----------------------------------------------------------------


def test_base_matches_frozen_reference(model_a_pipeline):
    model, _, sp, W = model_a_pipeline
    for u, ref in BASE_REF.items():
        assert gs_base(model, sp, W, UNIT, u) == pytest.approx(ref, rel=1e-9)


def test_base_matches_scalar_cl_closed_form():
    # scalar chain: c=1, lam=0.8, exp(1) claims, q=0.1; the Laplace exponent
    # psi(s) - q has roots of s^2 + 0.1 s - 0.1, giving W_q and Z_q in closed
    # form and phi(u) = Z_q(u) - q W_q(u) / Phi(q)
    m = make_cl_model(lam=0.8, q=0.1)
    sp, W = pipeline(m)
    disc = math.sqrt(0.01 + 0.4)
    phi_q = (-0.1 + disc) / 2.0
    rho = (0.1 + disc) / 2.0
    A = (1.0 + phi_q) / (phi_q + rho)
    B = (1.0 - rho) / (-rho - phi_q)

    def W_q(u):
        return A * math.exp(phi_q * u) + B * math.exp(-rho * u)

    def Z_q(u):
        return 1.0 + 0.1 * (A / phi_q * (math.exp(phi_q * u) - 1.0)
                            - B / rho * (math.exp(-rho * u) - 1.0))

    for u in (0.0, 0.5, 1.0, 2.0, 5.0, 10.0):
        expect = Z_q(u) - 0.1 * W_q(u) / phi_q
        assert gs_base(m, sp, W, UNIT, u) == pytest.approx(expect, rel=1e-9)


def test_base_requires_killing(cl_model):
    sp, W = pipeline(cl_model)
    with pytest.raises(PreconditionViolated):
        gs_base(cl_model, sp, W, UNIT, 1.0)


# -- resolvent first row --------------------------------------------------------


def test_resolvent_vanishes_at_zero_level(model_a_pipeline):
    model, _, sp, W = model_a_pipeline
    for u in (0.5, 1.0, 3.0):
        row = resolvent_first_row(model, sp, W, u, 0.0)
        assert np.allclose(row, 0.0, atol=1e-10)


def test_resolvent_at_zero_surplus_is_atom_row(model_a_pipeline):
    model, _, sp, W = model_a_pipeline
    for z in (0.3, 1.0, 4.0):
        row = resolvent_first_row(model, sp, W, 0.0, z)
        expect = W.atom[0, :] @ sp.exp_R(z)
        assert np.allclose(row, expect, rtol=1e-9, atol=1e-12)


def test_resolvent_nonnegative(model_a_pipeline):
    model, _, sp, W = model_a_pipeline
    rng = np.random.default_rng(7)
    for _ in range(40):
        u, z = rng.uniform(0.0, 8.0, size=2)
        assert resolvent_first_row(model, sp, W, u, z)[0] >= -1e-10


def test_resolvent_mass_below_discount_budget(model_a_pipeline):
    # q * int U_11(u, z) dz <= 1: the discounted occupation of phase 1
    # cannot exceed the total budget of the exponential clock
    from scipy.integrate import quad
    model, _, sp, W = model_a_pipeline
    for u in (0.0, 2.0, 20.0):
        val = sum(quad(lambda z: resolvent_first_row(model, sp, W, u, z)[0],
                       a, b, limit=300)[0]
                  for a, b in ((0.0, u), (u, np.inf)) if a != b)
        assert 0.0 <= model.q * val <= 1.0 + 1e-9


# -- first-order coefficient -----------------------------------------------------


def test_correction_matches_exact_hyperexp_oracle():
    # exact adjudication: with the hyperexponential stand-in the true value
    # at any eps comes from the expanded PH model, so the coefficient has
    # a noise-free finite-difference oracle
    claims = MixtureClaim(exponential_ph(1.0), HyperExpTail(), 0.1)
    m = build_model(1.0, 1.0, claims, lambda_plus=0.5,
                    gains=exponential_ph(2.0), q=0.1)
    e = 1e-3
    for u in (0.0, 1.0, 2.0, 5.0):
        res = gs_corrected(m, UNIT, [u], 0.1)[0]
        p0 = exact_gs_hyperexp(0.0, u)
        p1 = exact_gs_hyperexp(e, u)
        p2 = exact_gs_hyperexp(2 * e, u)
        oracle = (4.0 * p1 - p2 - 3.0 * p0) / (2.0 * e)
        assert res.base == pytest.approx(p0, rel=1e-9)
        assert res.correction == pytest.approx(oracle, rel=1e-6)


def test_grid_and_analytic_corrections_agree(model_a_pipeline):
    model, _, sp, W = model_a_pipeline
    corr = scale_row_correction(model, W, 0.01, 4.0)
    u_values = np.array([0.0, 0.5, 1.0])
    analytic = gs_correction_analytic(model, sp, W, UNIT, u_values)
    for u, a in zip(u_values, analytic):
        g = gs_correction_grid(model, sp, W, corr, UNIT, float(u))
        assert g == pytest.approx(a, abs=5e-5)


def test_correction_kernel_matches_pointwise_helper(model_a_pipeline):
    from gsrisk.gerber_shiu import correction_v
    model, _, sp, W = model_a_pipeline
    corr = scale_row_correction(model, W, 0.01, 4.0)
    kern = CorrectionKernel.build(model, sp, W, corr)
    for u, z in ((0.5, 0.2), (1.0, 1.5), (1.0, 0.5)):
        assert kern.v(u, z) == pytest.approx(
            correction_v(model, sp, W, corr, u, z), rel=1e-12)


# -- corrected approximation ------------------------------------------------------


def test_corrected_is_base_plus_eps_times_coefficient(model_a):
    for r in gs_corrected(model_a, UNIT, [0.0, 1.0, 3.0], 0.05):
        assert r.corrected == pytest.approx(r.base + 0.05 * r.correction,
                                            abs=1e-15)


def test_eps_zero_degenerates_to_base(model_a):
    for r in gs_corrected(model_a, UNIT, [0.0, 1.0, 2.0, 5.0], 0.0):
        assert r.corrected == r.base
        assert r.correction == 0.0


def test_eps_above_expansion_range_warns(model_a):
    with pytest.warns(UserWarning, match="eps above 0.2"):
        gs_corrected(model_a, UNIT, [1.0], 0.3)


def test_input_validation(model_a):
    with pytest.raises(InputError):
        gs_corrected(model_a, UNIT, [1.0], -0.1)
    with pytest.raises(InputError):
        gs_corrected(model_a, UNIT, [1.0], 0.6)
    with pytest.raises(InputError):
        gs_corrected(model_a, UNIT, [-1.0], 0.05)
    with pytest.raises(InputError):
        gs_corrected(model_a, UNIT, [1.0], 0.05, method="nope")


def test_penalty_kinds_behave(model_a):
    const = gs_corrected(model_a, UNIT, [1.0], 0.05)[0]
    # indicator of a deficit beyond y0 is dominated by the constant penalty
    ind = gs_corrected(model_a, PenaltyFunction.deficit_indicator(1.0),
                       [1.0], 0.05)[0]
    assert 0.0 < ind.corrected < const.corrected
    bil = gs_corrected(model_a,
                       PenaltyFunction.bilateral_exponential(0.5, 0.3),
                       [1.0], 0.05)[0]
    assert 0.0 < bil.corrected < const.corrected


def test_table_penalty_falls_back_to_grid(model_a):
    g = np.linspace(0.0, 40.0, 9)
    pen = PenaltyFunction.table(g, g, np.ones((9, 9)))
    res = gs_corrected(model_a, pen, [1.0], 0.05)[0]
    assert res.diagnostics["method"] == "grid"
    # a tabulated all-ones penalty approximates the constant unit penalty
    const = gs_corrected(model_a, UNIT, [1.0], 0.05)[0]
    assert res.corrected == pytest.approx(const.corrected, rel=1e-3)


def test_omega_evaluation():
    assert UNIT.omega(3.0, 7.0) == 1.0
    ind = PenaltyFunction.deficit_indicator(2.0)
    assert ind.omega(2.5, 0.0) == 1.0 and ind.omega(1.5, 0.0) == 0.0
    bil = PenaltyFunction.bilateral_exponential(1.0, 2.0)
    assert bil.omega(0.5, 0.25) == pytest.approx(math.exp(-1.0))
    assert UNIT.bound == 1.0 and ind.bound == 1.0
    with pytest.raises(InputError):
        PenaltyFunction("mystery")
    with pytest.raises(InputError):
        PenaltyFunction.table([0, 1], [0, 1], [[1.0, -1.0], [0.0, 0.0]])


# -- Cramer-Lundberg specialization ------------------------------------------------


def test_cl_base_ruin_closed_form(cl_model):
    # Psi(u) = 0.8 exp(-0.2 u) for c=1, lam=0.8, exp(1) claims
    u = np.array([0.0, 1.0, 2.0, 5.0, 10.0])
    out = cl_ruin_corrected(cl_model, u, 0.0)
    assert np.allclose(out, 0.8 * np.exp(-0.2 * u), rtol=1e-10)


def test_cl_correction_matches_exact_hyperexp_oracle():
    # same stand-in trick at q = 0: the exact ruin probability of the
    # expanded PH mixture follows from Pollaczek-Khinchine
    def exact_psi(eps, u):
        ph = expanded_mixture_ph(eps) if eps > 0 else exponential_ph(1.0)
        m = build_model(1.0, 0.8, MixtureClaim(ph, PARETO, 0.0), q=0.0)
        W = base_scale_matrix(m)
        drift = 1.0 - 0.8 * ph.mean
        return 1.0 - drift * float(W.entry(0, 0).eval_real(np.array([u]))[0])

    claims = MixtureClaim(exponential_ph(1.0), HyperExpTail(), 0.1)
    m = build_model(1.0, 0.8, claims, q=0.0)
    e = 1e-3
    for u in (1.0, 3.0, 8.0):
        psi0 = exact_psi(0.0, u)
        coeff = (cl_ruin_corrected(m, u, 0.1) - psi0) / 0.1
        p1, p2 = exact_psi(e, u), exact_psi(2 * e, u)
        oracle = (4.0 * p1 - p2 - 3.0 * psi0) / (2.0 * e)
        assert coeff == pytest.approx(oracle, rel=1e-5)


def test_cl_preconditions():
    with pytest.raises(PreconditionViolated):
        cl_ruin_corrected(make_model_a(), 1.0, 0.05)
    with pytest.raises(PreconditionViolated):
        cl_ruin_corrected(make_cl_model(q=0.1), 1.0, 0.05)


# -- asymptotic bound ----------------------------------------------------------------


def test_asymptotic_bound_finite_and_linear_in_eps(model_a_pipeline):
    model, _, sp, W = model_a_pipeline
    b1 = asymptotic_bound(model, sp, W, UNIT, 0.05)
    b2 = asymptotic_bound(model, sp, W, UNIT, 0.10)
    assert np.isfinite(b1) and b1 > 0.0
    assert b2 == pytest.approx(2.0 * b1, rel=1e-12)


def test_asymptotic_bound_preconditions(cl_model, model_a_pipeline):
    model, _, sp, W = model_a_pipeline
    sp0, W0 = pipeline(cl_model)
    with pytest.raises(PreconditionViolated):
        asymptotic_bound(cl_model, sp0, W0, UNIT, 0.05)
    g = np.linspace(0.0, 10.0, 5)
    pen = PenaltyFunction.table(g, g, np.ones((5, 5)))
    with pytest.raises(PreconditionViolated):
        asymptotic_bound(model, sp, W, pen, 0.05)
