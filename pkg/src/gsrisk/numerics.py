"""Shared numerical kernels: polynomial roots, grid functions, convolution,
adaptive quadrature."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import IllConditioned, InputError, NonConvergence, StepMismatch


def poly_roots(coeffs, polish_steps: int = 3) -> np.ndarray:
    """All complex roots of the polynomial sum_k coeffs[k] s^k.

    Companion-matrix eigenvalues followed by a few Newton steps.  Raises
    IllConditioned when the polished residual |p(r)/p'(r)| stays above
    1e-9 times the root scale.
    """
    c = np.asarray(coeffs, dtype=complex)
    c = np.trim_zeros(c, "b")
    if c.size < 2:
        raise InputError("poly_roots requires degree >= 1 with nonzero leading coefficient")
    # np.roots takes highest-degree-first ordering
    roots = np.roots(c[::-1])
    dp = np.polynomial.polynomial.polyder(c)
    for _ in range(polish_steps):
        p = np.polynomial.polynomial.polyval(roots, c)
        d = np.polynomial.polynomial.polyval(roots, dp)
        step = np.where(d != 0, p / np.where(d != 0, d, 1.0), 0.0)
        # guard against divergent Newton steps at near-multiple roots
        step = np.where(np.abs(step) < 1.0 + np.abs(roots), step, 0.0)
        roots = roots - step
    scale = max(1.0, np.abs(roots).max())
    p = np.polynomial.polynomial.polyval(roots, c)
    d = np.polynomial.polynomial.polyval(roots, dp)
    bad = np.abs(p) > 1e-9 * scale * np.maximum(np.abs(d), 1e-300)
    if np.any(bad & (np.abs(d) > 0)):
        worst = np.max(np.abs(p[bad]) / np.abs(d[bad]))
        raise IllConditioned(f"root polishing residual {worst:.2e} exceeds tolerance")
    return roots


@dataclass
class GridFunction:
    """Values of a function (or measure density) at x_k = k h, k = 0..K."""

    h: float
    values: np.ndarray
    kind: str = "pointwise"  # or "measure-density"
    atom: float = 0.0  # point mass at 0 when interpreted as a measure

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.h <= 0:
            raise InputError("grid step must be positive")
        if not np.all(np.isfinite(self.values)):
            raise InputError("grid values must be finite")

    @property
    def x(self) -> np.ndarray:
        return self.h * np.arange(self.values.size)

    @property
    def x_max(self) -> float:
        return self.h * (self.values.size - 1)

    def __call__(self, x):
        """Linear interpolation; zero for x < 0, clamped at the right edge."""
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.x, self.values)
        return np.where(x < 0, 0.0, out)

    @classmethod
    def from_callable(cls, f, h: float, x_max: float, kind: str = "pointwise",
                      atom: float = 0.0) -> "GridFunction":
        k = int(np.ceil(x_max / h)) + 1
        x = h * np.arange(k)
        return cls(h, np.asarray(f(x), dtype=float), kind, atom)


def grid_convolve(f: GridFunction, dg: GridFunction) -> GridFunction:
    """Convolve a pointwise grid function with a grid measure.

    (f * dg)(x) = atom * f(x) + int_0^x f(x - t) g'(t) dt, trapezoidal in the
    density part.  Both grids must share the step h; the result lives on the
    grid of f.
    """
    if abs(f.h - dg.h) > 1e-15 * max(f.h, dg.h):
        raise StepMismatch(f"grid steps differ: {f.h} vs {dg.h}")
    if dg.kind != "measure-density":
        raise InputError("second argument must be a measure-density grid")
    h = f.h
    n = f.values.size
    v = f.values
    w = dg.values[:n] if dg.values.size >= n else np.pad(dg.values, (0, n - dg.values.size))
    full = np.convolve(v, w)[:n] * h
    # trapezoid end-corrections: subtract half of the two endpoint rectangles
    corr = 0.5 * h * (v * w[0] + v[0] * w)
    conv = full - corr
    conv[0] = 0.0
    return GridFunction(h, dg.atom * v + conv, "pointwise")


def quadrature(f, a: float, b: float, rel_tol: float = 1e-9, points=None) -> float:
    """Adaptive quadrature of f over [a, b] (b may be inf)."""
    val, err = quad(f, a, b, epsrel=rel_tol, epsabs=1e-14, limit=500,
                    points=points if b != np.inf else None)
    if not np.isfinite(val):
        raise NonConvergence(f"quadrature of {f} over [{a}, {b}] failed")
    return val
