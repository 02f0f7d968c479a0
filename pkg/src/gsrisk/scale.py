"""The q-scale matrix of the base model and the first-order corrections of
its first row.

The base matrix exponent inverse (F_q(s))^{-1} = adj F_q(s) / det F_q(s) is
a matrix of rational functions, so Laplace inversion is exact: W(x) is a
finite sum of residue matrices times exponentials over the genuine roots of
det F_q, both signs of real part.  The eps-perturbation of the first row of
the scale measure is a triple convolution built on the equilibrium-density
difference of the two claim components.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridTooCoarse, NonSimpleRoots, ResidueImbalance
from .exppoly import ExpPoly
from .fluid_map import (DetPolynomial, RiskModel, adjugate, det_polynomial,
                        matrix_exponent)
from .numerics import GridFunction, grid_convolve


@dataclass(frozen=True)
class ScaleMatrix:
    """Exponential-sum form W(x) = sum_j C_j exp(zeta_j x), x >= 0."""

    zetas: np.ndarray
    C: np.ndarray

    @property
    def dimension(self) -> int:
        return self.C.shape[1]

    def __call__(self, x: float) -> np.ndarray:
        """W(x); zero matrix for x < 0."""
        n = self.dimension
        if x < 0:
            return np.zeros((n, n))
        M = np.tensordot(np.exp(self.zetas * x), self.C, axes=1)
        return M.real

    def density(self, x: float) -> np.ndarray:
        """W'(x) for x > 0."""
        M = np.tensordot(self.zetas * np.exp(self.zetas * x), self.C, axes=1)
        return M.real

    @property
    def atom(self) -> np.ndarray:
        """W(0+) = sum_j C_j, the mass of the scale measure at zero."""
        return np.sum(self.C, axis=0).real

    def entry(self, i: int, j: int) -> ExpPoly:
        """W_{ij} as an exponential polynomial."""
        out = ExpPoly()
        for z, Cj in zip(self.zetas, self.C):
            out.add_term(z, [Cj[i, j]])
        return out

    def negative_part(self) -> "ScaleMatrix":
        """Terms with decaying exponents only; this is the piece that
        survives the eigen-row cancellation in the resolvent."""
        keep = self.zetas.real < -1e-12
        return ScaleMatrix(zetas=self.zetas[keep], C=self.C[keep])

    def measure_entry(self, i: int, j: int, h: float, n_points: int) -> GridFunction:
        """Discretized measure W_{ij}(dx): density values plus the 0-atom."""
        x = h * np.arange(n_points)
        vals = np.real(np.tensordot(
            np.exp(np.outer(x, self.zetas)) * self.zetas, self.C[:, i, j], axes=1))
        return GridFunction(h=h, values=vals, kind="measure-density",
                            atom=float(self.atom[i, j]))


def base_scale_matrix(model: RiskModel, detp: DetPolynomial | None = None) -> ScaleMatrix:
    """Partial-fraction inversion of (F_q(s))^{-1} for the eps = 0 model.

    Residues at simple roots: C_j = adj F_q(zeta_j) D(zeta_j) / P'(zeta_j),
    where P is the cleared determinant polynomial and D(s) = det(sI - T_p).
    """
    if detp is None:
        detp = det_polynomial(model)
    roots = detp.roots()
    n = model.dimension
    C = np.empty((roots.size, n, n), dtype=complex)
    for j, z in enumerate(roots):
        dP = detp.derivative(z)
        if abs(dP) < 1e-10 * max(1.0, float(np.max(np.abs(detp.coeffs)))):
            raise NonSimpleRoots(f"near-multiple determinant root at {z}")
        C[j] = adjugate(matrix_exponent(model, z, eps=0.0)) * detp.claim_factor(z) / dP
    W = ScaleMatrix(zetas=roots, C=C)

    # Laplace round trip: sum_j C_j/(s - zeta_j) must reproduce F_q(s)^{-1}
    eta = float(np.max(roots.real))
    for s in (eta + 1.0, eta + 2.0):
        lhs = np.tensordot(1.0 / (s - roots), C, axes=1)
        rhs = np.linalg.inv(matrix_exponent(model, s, eps=0.0))
        if np.max(np.abs(lhs - rhs)) > 1e-7 * max(1.0, float(np.max(np.abs(rhs)))):
            raise ResidueImbalance(
                f"partial fractions fail transform check at s={s}")
    return W


def perturbation_density(model: RiskModel, x: np.ndarray) -> np.ndarray:
    """Density of the signed measure lambda_- (mu_h H_e - mu_p F_e^p)(dx),
    the Laplace preimage of k(s)."""
    x = np.asarray(x, dtype=float)
    heavy = model.claims.ht.tail(x)
    light = model.mu_p * model.claims.ph.equilibrium().pdf(x)
    return model.lambda_minus * (heavy - light)


@dataclass(frozen=True)
class ScaleRowCorrection:
    """Grid densities of the eps-coefficient of (W_eps(dx))_{1j}."""

    grids: tuple[GridFunction, ...]

    def __getitem__(self, j: int) -> GridFunction:
        return self.grids[j]


def _correction_grids(model: RiskModel, W: ScaleMatrix, h: float,
                      n_points: int) -> tuple[GridFunction, ...]:
    x = h * np.arange(n_points)
    k_dens = GridFunction(h=h, values=perturbation_density(model, x))
    w11 = W.measure_entry(0, 0, h, n_points)
    inner = grid_convolve(k_dens, w11)
    grids = []
    for j in range(model.dimension):
        w1j = W.measure_entry(0, j, h, n_points)
        g = grid_convolve(inner, w1j)
        grids.append(GridFunction(h=h, values=g.values, kind="measure-density"))
    return tuple(grids)


def scale_row_correction(model: RiskModel, W: ScaleMatrix, h: float,
                         u_max: float, check: bool = True) -> ScaleRowCorrection:
    """First-order term of the first scale-measure row:

        lambda_- (mu_h H_e - mu_p F_e^p)(dx) * (W(dx))_{11} * (W(dx))_{1j},

    discretized with trapezoidal convolution.  The result carries no atom
    since the equilibrium difference is absolutely continuous.
    """
    n_points = int(np.ceil(u_max / h)) + 1
    grids = _correction_grids(model, W, h, n_points)
    if check:
        fine = _correction_grids(model, W, h / 2.0, 2 * n_points - 1)
        for g, gf in zip(grids, fine):
            a, b = g.values[-1], gf.values[-1]
            scale = max(abs(a), abs(b), 1e-12 * max(1.0, np.max(np.abs(g.values))))
            if abs(a - b) > 0.01 * scale:
                raise GridTooCoarse(
                    f"correction changes by {abs(a - b) / scale:.2%} at u_max "
                    f"when halving h={h}")
    return ScaleRowCorrection(grids=grids)
