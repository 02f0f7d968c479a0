"""Risk model assembly and the fluid-embedding matrix exponent.

The surplus process has premium income at rate c, PH-distributed upward
jumps (gains) arriving at rate lambda_plus, and downward jumps (claims)
drawn from a mixture of a PH body and a heavy tail with weight eps.  Gains
are unfolded into unit-slope ascending stretches, giving a spectrally
negative Markov additive process on N_+ + 1 states whose matrix exponent
F_{eps,q}(s) drives everything downstream: roots, scale matrix, resolvents.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distributions import MixtureClaim, PhaseType
from .errors import (DegenerateCancellation, InvalidComponent,
                     SafetyLoadingViolated, SingularMatrix)
from .numerics import poly_roots


@dataclass(frozen=True)
class RiskModel:
    """Perturbed risk process parameters with cached claim means."""

    c: float
    lambda_minus: float
    claims: MixtureClaim
    lambda_plus: float
    gains: PhaseType | None
    q: float
    mu_p: float = field(init=False)
    mu_h: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "mu_p", self.claims.ph.mean)
        object.__setattr__(self, "mu_h", self.claims.ht.mean)

    @property
    def eps(self) -> float:
        return self.claims.eps

    @property
    def n_plus(self) -> int:
        return 0 if self.gains is None else self.gains.alpha.size

    @property
    def dimension(self) -> int:
        return self.n_plus + 1

    def claim_mean(self, eps: float | None = None) -> float:
        return self.claims.mean(self.eps if eps is None else eps)

    def loading(self, eps: float | None = None) -> float:
        gain = 0.0 if self.gains is None else self.lambda_plus * self.gains.mean
        return self.c + gain - self.lambda_minus * self.claim_mean(eps)


def build_model(c: float, lambda_minus: float, claims: MixtureClaim,
                lambda_plus: float = 0.0, gains: PhaseType | None = None,
                q: float = 0.0) -> RiskModel:
    """Validate parameters and assemble an immutable RiskModel."""
    if c <= 0:
        raise InvalidComponent("premium rate c must be positive")
    if lambda_minus < 0 or lambda_plus < 0:
        raise InvalidComponent("arrival rates must be nonnegative")
    if q < 0:
        raise InvalidComponent("discount rate q must be nonnegative")
    if lambda_plus > 0 and gains is None:
        raise InvalidComponent("lambda_plus > 0 requires a gain distribution")
    if lambda_plus == 0:
        gains = None
    model = RiskModel(c=c, lambda_minus=lambda_minus, claims=claims,
                      lambda_plus=lambda_plus, gains=gains, q=q)
    if model.loading() <= 0:
        raise SafetyLoadingViolated(
            f"net drift {model.loading():.6g} is not positive")
    return model


def psi(model: RiskModel, s: complex, eps: float | None = None) -> complex:
    """Laplace exponent of the Levy part (premium minus claims), excluding
    the gain mechanism, expressed through equilibrium transforms:

        psi_eps(s) = c s - lambda_- s ((1-eps) mu_p Fhat_e^p(s)
                                       + eps mu_h Hhat_e(s)).
    """
    if eps is None:
        eps = model.eps
    if s == 0:
        return 0.0 + 0.0j
    light = model.claims.ph.equilibrium().lst(s)
    total = (1.0 - eps) * model.mu_p * light
    if eps != 0.0:
        total += eps * model.mu_h * model.claims.ht.equilibrium_lst(s)
    return model.c * s - model.lambda_minus * s * total


def k_perturbation(model: RiskModel, s: complex) -> complex:
    """k(s) = lambda_- (mu_h Hhat_e(s) - mu_p Fhat_e^p(s)), the scalar
    carrying the entire eps-dependence of the matrix exponent."""
    if s == 0:
        return model.lambda_minus * (model.mu_h - model.mu_p)
    return model.lambda_minus * (
        model.mu_h * model.claims.ht.equilibrium_lst(s)
        - model.mu_p * model.claims.ph.equilibrium().lst(s))


def matrix_exponent(model: RiskModel, s: complex, eps: float | None = None) -> np.ndarray:
    """Assemble F_{eps,q}(s) on the fluid state space.

    Block layout: entry (1,1) is psi_eps(s) - lambda_+ - q, first row tail
    lambda_+ beta_+, first column tail t_+, lower-right block B_+ + s I.
    """
    n = model.dimension
    F = np.zeros((n, n), dtype=complex)
    F[0, 0] = psi(model, s, eps) - model.lambda_plus - model.q
    if model.gains is not None:
        F[0, 1:] = model.lambda_plus * model.gains.alpha
        F[1:, 0] = model.gains.exit
        F[1:, 1:] = model.gains.T + s * np.eye(n - 1)
    return F


def adjugate(M: np.ndarray) -> np.ndarray:
    """Adjugate by cofactor expansion; valid for singular M (rank n-1),
    where inverse-based shortcuts break down."""
    M = np.asarray(M)
    n = M.shape[0]
    if n == 1:
        return np.ones((1, 1), dtype=M.dtype)
    adj = np.empty((n, n), dtype=complex)
    rows = np.arange(n)
    for i in range(n):
        for j in range(n):
            minor = M[np.ix_(rows != i, rows != j)]
            adj[j, i] = (-1.0) ** (i + j) * np.linalg.det(minor)
    return adj


def _fit_polynomial(func, degree: int, avoid=(), radius: float = 3.0) -> np.ndarray:
    """Exact coefficients of a polynomial known through point evaluation.

    Samples 2(degree+1) real points spread over [-radius, radius], nudged
    off any pole in ``avoid``, and solves the Vandermonde system in the
    least-squares sense.  Coefficients ascending.
    """
    m = 2 * (degree + 1)
    pts = np.linspace(-radius, radius, m)
    for p in avoid:
        if abs(p.imag) < 1e-9:
            bad = np.abs(pts - p.real) < 0.05 * radius
            pts[bad] += 0.07 * radius
    V = np.vander(pts, degree + 1, increasing=True)
    y = np.array([func(x) for x in pts], dtype=complex)
    coeffs, *_ = np.linalg.lstsq(V, y, rcond=None)
    if np.max(np.abs(coeffs.imag)) > 1e-8 * max(1.0, np.max(np.abs(coeffs))):
        raise SingularMatrix("polynomial fit produced non-real coefficients")
    return coeffs.real


@dataclass(frozen=True)
class DetPolynomial:
    """Cleared-denominator determinant of the base matrix exponent:
    P(s) = det F_q(s) * det(sI - T_p), with the claim-PH eigenvalues
    recorded since they are poles of the rational factor."""

    coeffs: np.ndarray
    spurious: np.ndarray
    degree: int

    def __call__(self, s):
        return np.polynomial.polynomial.polyval(s, self.coeffs)

    def derivative(self, s):
        d = np.polynomial.polynomial.polyder(self.coeffs)
        return np.polynomial.polynomial.polyval(s, d)

    def claim_factor(self, s):
        """D(s) = det(sI - T_p)."""
        return np.prod(s - self.spurious)

    def roots(self) -> np.ndarray:
        r = poly_roots(self.coeffs)
        for p in self.spurious:
            if np.min(np.abs(r - p)) < 1e-7 * max(1.0, abs(p)):
                raise DegenerateCancellation(
                    f"determinant root coincides with claim-PH eigenvalue {p}")
        return r


def det_polynomial(model: RiskModel) -> DetPolynomial:
    """Polynomial form of det F_q(s) for the base (eps = 0) model."""
    Tp = model.claims.ph.T
    eig_p = np.linalg.eigvals(Tp)
    n_minus = Tp.shape[0]
    degree = model.n_plus + n_minus + 1

    def cleared(s):
        D = np.linalg.det(s * np.eye(n_minus) - Tp)
        return np.linalg.det(matrix_exponent(model, s, eps=0.0)) * D

    scale = 2.0 + float(np.max(np.abs(eig_p)))
    if model.gains is not None:
        scale = max(scale, 2.0 + float(np.max(np.abs(np.linalg.eigvals(model.gains.T)))))
    coeffs = _fit_polynomial(cleared, degree, avoid=eig_p, radius=scale)
    if abs(coeffs[-1]) < 1e-9 * np.max(np.abs(coeffs)):
        raise SingularMatrix("determinant polynomial degree collapsed")
    return DetPolynomial(coeffs=coeffs, spurious=eig_p, degree=degree)


def adj_row_polys(model: RiskModel) -> np.ndarray:
    """Coefficient matrix of the analytic row  L(s) = (det(B_+ + sI),
    -lambda_+ beta_+ adj(B_+ + sI)), each entry a polynomial of degree
    at most N_+.  Row j of the result holds ascending coefficients of
    entry j.  This row spans the left null space of F_q at its roots."""
    n = model.dimension
    deg = model.n_plus
    out = np.zeros((n, deg + 1))

    def entry(j):
        def f(s):
            if model.gains is None:
                return 1.0
            M = model.gains.T + s * np.eye(deg)
            if j == 0:
                return np.linalg.det(M)
            return -model.lambda_plus * (model.gains.alpha @ adjugate(M))[j - 1]
        return f

    radius = 3.0
    if model.gains is not None:
        radius = 2.0 + float(np.max(np.abs(np.linalg.eigvals(model.gains.T))))
    for j in range(n):
        out[j] = _fit_polynomial(entry(j), deg, radius=radius)
    return out


def constant_C(model: RiskModel) -> float:
    """C = [q ((qI - F(0))^{-1})_{11}]^{-1}, the occupation correction from
    starting the exponential clock in fluid state 1.  Independent of eps."""
    if model.q <= 0:
        raise InvalidComponent("constant C requires q > 0")
    n = model.dimension
    # F(0) is the generator: strip the -q already folded into entry (1,1)
    F0 = matrix_exponent(model, 0.0, eps=0.0)
    F0[0, 0] += model.q
    M = model.q * np.eye(n) - F0
    try:
        inv_11 = np.linalg.solve(M, np.eye(n)[:, 0])[0]
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix("qI - F(0) is singular") from exc
    return float(1.0 / (model.q * inv_11.real))
