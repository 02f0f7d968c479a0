"""Exponential-polynomial functions: finite sums  sum_j p_j(x) exp(zeta_j x).

Scale matrices, their convolutions, and the discounted-exit kernels of the
base (all phase-type) model all live in this class, closed under addition,
pointwise products, convolution, differentiation/antidifferentiation, and
Laplace transforms.  Working in this representation lets large arguments be
evaluated after *symbolically* cancelling growing exponentials, which is
impossible in a floating-point grid representation once exp(zeta_max * x)
exceeds 1/eps.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NumericalError

_KEY_TOL = 1e-9


class ExpPoly:
    """Sum of terms coeff[k] * x^k * exp(zeta * x), coefficients complex."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict[complex, np.ndarray] | None = None):
        self.terms: dict[complex, np.ndarray] = {}
        if terms:
            for z, c in terms.items():
                self.add_term(z, c)

    # -- construction -------------------------------------------------------

    def _key(self, zeta: complex) -> complex:
        zeta = complex(zeta)
        scale = max(1.0, abs(zeta))
        for k in self.terms:
            if abs(k - zeta) <= _KEY_TOL * scale:
                return k
        return zeta

    def add_term(self, zeta: complex, coeffs) -> None:
        coeffs = np.atleast_1d(np.asarray(coeffs, dtype=complex))
        k = self._key(zeta)
        if k in self.terms:
            old = self.terms[k]
            n = max(old.size, coeffs.size)
            merged = np.zeros(n, dtype=complex)
            merged[: old.size] += old
            merged[: coeffs.size] += coeffs
            self.terms[k] = merged
        else:
            self.terms[k] = coeffs.copy()

    @classmethod
    def constant(cls, c) -> "ExpPoly":
        return cls({0.0 + 0.0j: np.array([c], dtype=complex)})

    @classmethod
    def exponential(cls, coeff, zeta) -> "ExpPoly":
        return cls({complex(zeta): np.array([coeff], dtype=complex)})

    @classmethod
    def from_rational(cls, func, poles) -> "ExpPoly":
        """Inverse Laplace transform of a strictly proper rational function.

        ``func`` evaluates the transform at complex s; ``poles`` is a list of
        (location, multiplicity).  Laurent coefficients at each pole are
        extracted by trapezoidal contour integration on a circle strictly
        inside the annulus separating it from the other poles.
        """
        out = cls()
        locs = [p for p, _ in poles]
        for i, (p, m) in enumerate(poles):
            dists = [abs(p - q) for j, q in enumerate(locs) if j != i]
            r = 0.45 * min(dists) if dists else max(0.5, 0.2 * (1.0 + abs(p)))
            M = max(64, 8 * m)
            theta = 2.0 * np.pi * np.arange(M) / M
            ring = r * np.exp(1j * theta)
            vals = np.array([func(p + w) for w in ring], dtype=complex)
            # a_{-k} = mean_j G(p + w_j) w_j^k, k = 1..m
            coeffs = np.zeros(m, dtype=complex)
            for k in range(1, m + 1):
                a = np.mean(vals * ring**k)
                coeffs[k - 1] = a / math.factorial(k - 1)
            # sum_k a_{-k}/(s-p)^k  <->  sum_k a_{-k} x^{k-1} e^{px}/(k-1)!
            out.add_term(p, coeffs)
        return out

    @classmethod
    def from_matrix_exp(cls, row, T, col, shift: float = 0.0) -> "ExpPoly":
        """ExpPoly form of  row @ expm((T - shift I) x) @ col."""
        row = np.atleast_1d(np.asarray(row, dtype=complex))
        T = np.atleast_2d(np.asarray(T, dtype=complex))
        col = np.atleast_1d(np.asarray(col, dtype=complex))
        n = T.shape[0]
        eigs = np.linalg.eigvals(T) - shift
        poles = _cluster(eigs)

        def transform(s):
            return row @ np.linalg.solve((s + shift) * np.eye(n) - T, col)

        return cls.from_rational(transform, poles)

    # -- algebra --------------------------------------------------------------

    def copy(self) -> "ExpPoly":
        return ExpPoly({z: c.copy() for z, c in self.terms.items()})

    def __add__(self, other: "ExpPoly") -> "ExpPoly":
        out = self.copy()
        for z, c in other.terms.items():
            out.add_term(z, c)
        return out

    def __sub__(self, other: "ExpPoly") -> "ExpPoly":
        return self + other.scale(-1.0)

    def scale(self, c) -> "ExpPoly":
        return ExpPoly({z: coeffs * c for z, coeffs in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, ExpPoly):
            out = ExpPoly()
            for z1, c1 in self.terms.items():
                for z2, c2 in other.terms.items():
                    out.add_term(z1 + z2, np.convolve(c1, c2))
            return out
        return self.scale(other)

    __rmul__ = __mul__

    def convolve(self, other: "ExpPoly") -> "ExpPoly":
        """(f * g)(x) = int_0^x f(t) g(x - t) dt, exact."""
        out = ExpPoly()
        for z1, c1 in self.terms.items():
            for z2, c2 in other.terms.items():
                for a, ca in enumerate(c1):
                    if ca == 0:
                        continue
                    for b, cb in enumerate(c2):
                        if cb == 0:
                            continue
                        out += _conv_monomials(a, z1, b, z2).scale(ca * cb)
        return out

    def antiderivative(self) -> "ExpPoly":
        """F(x) = int_0^x f(t) dt, exact (F(0) = 0)."""
        out = ExpPoly()
        for z, coeffs in self.terms.items():
            if abs(z) < 1e-14:
                new = np.zeros(coeffs.size + 1, dtype=complex)
                new[1:] = coeffs / (1.0 + np.arange(coeffs.size))
                out.add_term(0.0, new)
                continue
            for k, c in enumerate(coeffs):
                if c == 0:
                    continue
                # int_0^x t^k e^{zt} dt
                poly = np.array(
                    [(-1.0) ** (k - j) * math.factorial(k)
                     / (math.factorial(j) * z ** (k + 1 - j)) for j in range(k + 1)],
                    dtype=complex,
                )
                out.add_term(z, c * poly)
                out.add_term(0.0, -c * (-1.0) ** k * math.factorial(k) / z ** (k + 1))
        return out

    # -- evaluation -----------------------------------------------------------

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        for z, coeffs in self.terms.items():
            p = np.zeros(x.shape, dtype=complex)
            for k in range(coeffs.size - 1, -1, -1):
                p = p * x + coeffs[k]
            out += p * np.exp(z * x)
        return out

    def eval_real(self, x, imag_tol: float = 1e-8):
        v = self(x)
        scale = max(1.0, float(np.max(np.abs(v))) if np.size(v) else 1.0)
        if np.max(np.abs(np.imag(v))) > imag_tol * scale:
            raise NumericalError("imaginary residue exceeds tolerance in ExpPoly evaluation")
        return np.real(v)

    def laplace(self, s) -> complex:
        out = 0.0 + 0.0j
        for z, coeffs in self.terms.items():
            for k, c in enumerate(coeffs):
                out += c * math.factorial(k) / (s - z) ** (k + 1)
        return out

    def integral_0_inf(self) -> complex:
        """int_0^inf f(x) dx; requires every remaining exponent to decay."""
        out = 0.0 + 0.0j
        for z, coeffs in self.terms.items():
            if z.real >= -1e-14:
                if np.max(np.abs(coeffs)) > 0:
                    raise NumericalError(
                        f"non-decaying exponent {z} with nonzero coefficient; "
                        "prune_growing first")
                continue
            for k, c in enumerate(coeffs):
                out += c * math.factorial(k) / (-z) ** (k + 1)
        return out

    def magnitude(self) -> float:
        if not self.terms:
            return 0.0
        return max((np.max(np.abs(c)) for c in self.terms.values()), default=0.0)

    def prune(self, tol: float = 1e-13) -> "ExpPoly":
        """Drop terms whose coefficients are negligible relative to the largest."""
        ref = self.magnitude()
        out = ExpPoly()
        for z, coeffs in self.terms.items():
            c = np.where(np.abs(coeffs) > tol * max(ref, 1e-300), coeffs, 0.0)
            if np.any(c != 0):
                out.add_term(z, np.trim_zeros(c, "b"))
        return out

    def prune_growing(self, tol: float = 1e-7, ref: float | None = None) -> "ExpPoly":
        """Remove exponents with Re >= 0 after checking their coefficients
        cancelled; raises when a growing term survives above tolerance."""
        ref = self.magnitude() if ref is None else ref
        out = ExpPoly()
        for z, coeffs in self.terms.items():
            if z.real >= -1e-12 and abs(z) > 1e-12:
                resid = float(np.max(np.abs(coeffs)))
                if resid > tol * max(ref, 1e-300):
                    raise NumericalError(
                        f"growing exponent {z} kept coefficient {resid:.2e} "
                        f"(reference {ref:.2e}); cancellation failed")
                continue
            out.add_term(z, coeffs)
        return out


def _cluster(values, tol: float = 1e-7):
    """Group nearly equal complex values into (center, multiplicity) pairs."""
    values = list(values)
    groups: list[list[complex]] = []
    for v in values:
        for g in groups:
            if abs(v - g[0]) < tol * max(1.0, abs(g[0])):
                g.append(v)
                break
        else:
            groups.append([v])
    return [(complex(np.mean(g)), len(g)) for g in groups]


def _conv_monomials(a: int, alpha: complex, b: int, beta: complex) -> ExpPoly:
    """Exact convolution of x^a e^{alpha x} with x^b e^{beta x}."""
    if abs(alpha - beta) <= _KEY_TOL * max(1.0, abs(alpha)):
        coeff = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 1)
        c = np.zeros(a + b + 2, dtype=complex)
        c[a + b + 1] = coeff
        return ExpPoly({complex(alpha): c})
    # transform a! b! / ((s-alpha)^{a+1} (s-beta)^{b+1}), explicit partial fractions
    p, q = a + 1, b + 1
    fac = math.factorial(a) * math.factorial(b)
    out = ExpPoly()
    ca = np.zeros(p, dtype=complex)
    cb = np.zeros(q, dtype=complex)
    for k in range(1, p + 1):
        m = p - k
        A = (-1.0) ** m * math.comb(q + m - 1, m) * (alpha - beta) ** (-(q + m))
        ca[k - 1] = fac * A / math.factorial(k - 1)
    for k in range(1, q + 1):
        m = q - k
        B = (-1.0) ** m * math.comb(p + m - 1, m) * (beta - alpha) ** (-(p + m))
        cb[k - 1] = fac * B / math.factorial(k - 1)
    out.add_term(alpha, ca)
    out.add_term(beta, cb)
    return out


class ExpPolyMeasure:
    """A measure atom * delta_0 + density(x) dx with ExpPoly density."""

    __slots__ = ("atom", "density")

    def __init__(self, atom, density: ExpPoly):
        self.atom = complex(atom)
        self.density = density

    def cdf(self) -> ExpPoly:
        """M(x) = atom + int_0^x density, as an ExpPoly (constant included)."""
        return self.density.antiderivative() + ExpPoly.constant(self.atom)

    def total_mass_transform(self, s) -> complex:
        return self.atom + self.density.laplace(s)

    def convolve(self, other: "ExpPolyMeasure") -> "ExpPolyMeasure":
        dens = (self.density.convolve(other.density)
                + other.density.scale(self.atom)
                + self.density.scale(other.atom))
        return ExpPolyMeasure(self.atom * other.atom, dens)

    def convolve_function(self, f: ExpPoly) -> ExpPoly:
        """(f * m)(x) = atom f(x) + int_0^x f(x-t) density(t) dt."""
        return f.scale(self.atom) + f.convolve(self.density)
