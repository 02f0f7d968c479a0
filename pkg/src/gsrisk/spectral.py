"""Spectral data of the matrix exponent: positive roots, eigen-rows, the
matrix R with e^{-Rz} governing first passage downward, and the first-order
eps-corrections of all of these.

The base model is purely phase-type, so det F_q(s) = 0 has exactly
N_+ + 1 simple roots with positive real part (q > 0).  Each root carries a
left null row of F_q given in closed form by the adjoint-row polynomials,
and R = Lambda^{-1} Gamma Lambda.  Perturbing the claim mixture by eps
moves the roots by eps * rho1 and the rows by eps * Lambda1, both available
analytically from the determinant split.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (NonSimpleRoots, RootCountMismatch, SingularLambda,
                     ZeroDerivative, ZeroRow)
from .fluid_map import (DetPolynomial, RiskModel, adj_row_polys,
                        det_polynomial, k_perturbation)

_IMAG_TOL = 1e-9


def _real_strict(M: np.ndarray, what: str) -> np.ndarray:
    scale = max(1.0, float(np.max(np.abs(M))))
    resid = float(np.max(np.abs(np.imag(M))))
    if resid > _IMAG_TOL * scale:
        raise NonSimpleRoots(
            f"imaginary residue {resid:.2e} on {what} exceeds tolerance; "
            "conjugate pairing failed")
    return np.real(M)


def positive_roots(model: RiskModel, detp: DetPolynomial | None = None) -> np.ndarray:
    """The N_+ + 1 roots of det F_q(s) = 0 with Re > 0 (q > 0), or the zero
    root plus N_+ strictly positive ones (q = 0), sorted by real part."""
    if detp is None:
        detp = det_polynomial(model)
    roots = detp.roots()
    want = model.n_plus + 1
    if model.q > 0:
        pos = roots[roots.real > 1e-9]
    else:
        # zero is a root exactly (psi(0) = 0 kills the first column sum)
        near0 = np.abs(roots) < 1e-7
        if near0.sum() != 1:
            raise RootCountMismatch(
                f"expected one root at 0 for q=0, found {int(near0.sum())}")
        pos = np.concatenate(([0.0 + 0.0j], roots[(~near0) & (roots.real > 1e-9)]))
    if pos.size != want:
        raise RootCountMismatch(
            f"expected {want} nonnegative roots, found {pos.size}: {roots}")
    pos = pos[np.argsort(pos.real)]
    scale = max(1.0, float(np.max(np.abs(pos))))
    for i in range(pos.size):
        for j in range(i + 1, pos.size):
            if abs(pos[i] - pos[j]) <= 1e-6 * scale:
                raise NonSimpleRoots(f"roots {pos[i]} and {pos[j]} nearly coincide")
    # conjugate closure
    for r in pos:
        if abs(r.imag) > 1e-9 and np.min(np.abs(pos - np.conj(r))) > 1e-6 * scale:
            raise RootCountMismatch(f"root {r} lacks its conjugate")
    return pos


def lambda_matrix(model: RiskModel, roots: np.ndarray,
                  row_polys: np.ndarray | None = None) -> np.ndarray:
    """Left eigen-rows: row i is (det(B_+ + rho_i I), -lambda_+ beta_+
    adj(B_+ + rho_i I)), a nonzero left null vector of F_q(rho_i)."""
    if row_polys is None:
        row_polys = adj_row_polys(model)
    n = model.dimension
    Lam = np.zeros((n, n), dtype=complex)
    for i, r in enumerate(roots):
        row = np.polynomial.polynomial.polyval(r, row_polys.T)
        if np.max(np.abs(row)) < 1e-12:
            raise ZeroRow(f"adjoint row vanished at root {r}")
        Lam[i] = row
    return Lam


def rho_first_order(model: RiskModel, rho: complex,
                    detp: DetPolynomial | None = None) -> complex:
    """First eps-coefficient of the root path rho(eps).

    Expanding det F_{eps,q}(s) = det F_q(s) - eps s k(s) det(B_+ + sI)
    at s = rho + eps rho1 gives

        rho1 = rho k(rho) det(B_+ + rho I) / (d/ds det F_q)(rho),

    with the derivative taken exactly on the cleared polynomial:
    (d/ds det F_q)(rho) = P'(rho) / D(rho) at a root.
    """
    if detp is None:
        detp = det_polynomial(model)
    if abs(rho) < 1e-12:
        return 0.0 + 0.0j
    dP = detp.derivative(rho)
    D = detp.claim_factor(rho)
    if abs(dP) < 1e-10 * max(1.0, np.max(np.abs(detp.coeffs))):
        raise ZeroDerivative(f"det F_q has (near) multiple root at {rho}")
    detB = 1.0 + 0.0j
    if model.gains is not None:
        detB = np.linalg.det(model.gains.T + rho * np.eye(model.n_plus))
    return rho * k_perturbation(model, rho) * detB * D / dP


@dataclass(frozen=True)
class SpectralData:
    """Roots, eigen-rows, R, and their first-order eps-corrections."""

    model: RiskModel
    rho: np.ndarray
    Lambda: np.ndarray
    LambdaInv: np.ndarray
    R: np.ndarray
    rho1: np.ndarray
    Lambda1: np.ndarray
    cond_lambda: float

    @property
    def Gamma(self) -> np.ndarray:
        return np.diag(self.rho)

    def exp_R(self, z: float) -> np.ndarray:
        """e^{-R z} through the eigendecomposition, truncated to real."""
        M = self.LambdaInv @ np.diag(np.exp(-self.rho * z)) @ self.Lambda
        return _real_strict(M, "exp(-Rz)")

    def exp_R_first_order(self, z: float) -> np.ndarray:
        """First eps-coefficient E1(z) of e^{-R_eps z}:

            E1(z) = Li e^{-Gz} Lambda1 - z Li e^{-Gz} Gamma1 Lambda
                    - Li Lambda1 e^{-Rz},   Li = Lambda^{-1}.
        """
        Eg = np.diag(np.exp(-self.rho * z))
        G1 = np.diag(self.rho1)
        Li = self.LambdaInv
        M = (Li @ Eg @ self.Lambda1
             - z * Li @ Eg @ G1 @ self.Lambda
             - Li @ self.Lambda1 @ (Li @ Eg @ self.Lambda))
        return _real_strict(M, "first-order exp(-Rz)")


def build_spectral(model: RiskModel, detp: DetPolynomial | None = None) -> SpectralData:
    """Assemble all spectral quantities for the base model plus the
    first-order corrections of the mixture perturbation."""
    if detp is None:
        detp = det_polynomial(model)
    roots = positive_roots(model, detp)
    row_polys = adj_row_polys(model)
    Lam = lambda_matrix(model, roots, row_polys)
    cond = float(np.linalg.cond(Lam))
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularLambda(f"eigen-row matrix condition number {cond:.2e}")
    Li = np.linalg.inv(Lam)
    R = _real_strict(Li @ np.diag(roots) @ Lam, "R")

    rho1 = np.array([rho_first_order(model, r, detp) for r in roots])
    drow = np.polynomial.polynomial.polyder(row_polys, axis=1)
    Lam1 = np.zeros_like(Lam)
    for i, r in enumerate(roots):
        Lam1[i] = rho1[i] * np.polynomial.polynomial.polyval(r, drow.T)
    return SpectralData(model=model, rho=roots, Lambda=Lam, LambdaInv=Li,
                        R=R, rho1=rho1, Lambda1=Lam1, cond_lambda=cond)
