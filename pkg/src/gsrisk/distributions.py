"""Phase-type and heavy-tailed claim-size distributions.

Phase-type (PH) laws are absorption times of a killed finite Markov chain
with initial vector ``alpha`` and subintensity ``T``.  The heavy-tailed menu
is Pareto / Weibull / lognormal, all with finite mean so the stationary-excess
(equilibrium) distribution exists.  A claim of the mixture model is
phase-type with probability ``1 - eps`` and heavy-tailed with probability
``eps``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.linalg import expm
from scipy.special import gamma as gamma_fn, gammainc, gammaincc
from scipy.stats import norm

from .errors import (
    InfiniteMean,
    InputError,
    InvalidSubintensity,
    NonStochasticAlpha,
    SingularResolvent,
)

_STOCH_TOL = 1e-12


@dataclass(frozen=True)
class PhaseType:
    """PH distribution with initial vector ``alpha`` and subintensity ``T``."""

    alpha: np.ndarray
    T: np.ndarray
    exit: np.ndarray = field(init=False)
    mean: float = field(init=False)

    def __post_init__(self):
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        T = np.atleast_2d(np.asarray(self.T, dtype=float))
        if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(T))):
            raise InputError("alpha and T must be finite")
        if T.shape[0] != T.shape[1] or alpha.shape[0] != T.shape[0]:
            raise InputError(f"dimension mismatch: alpha {alpha.shape}, T {T.shape}")
        if np.any(alpha < -_STOCH_TOL) or abs(alpha.sum() - 1.0) > _STOCH_TOL:
            raise NonStochasticAlpha(f"alpha = {alpha} is not a probability vector")
        if np.any(np.diag(T) >= 0):
            raise InvalidSubintensity("diagonal of T must be strictly negative")
        off = T - np.diag(np.diag(T))
        if np.any(off < -_STOCH_TOL):
            raise InvalidSubintensity("off-diagonal of T must be nonnegative")
        if np.any(T.sum(axis=1) > _STOCH_TOL):
            raise InvalidSubintensity("row sums of T must be <= 0")
        if np.any(np.linalg.eigvals(T).real >= 0):
            raise InvalidSubintensity("T must be a stable (invertible) subintensity")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "exit", -T @ np.ones(T.shape[0]))
        # mean = alpha (-T)^{-1} 1
        object.__setattr__(self, "mean", float(alpha @ np.linalg.solve(-T, np.ones(T.shape[0]))))

    @property
    def n_phases(self) -> int:
        return self.T.shape[0]

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        out = np.array([1.0 - self.alpha @ expm(self.T * xi) @ np.ones(self.n_phases)
                        if xi >= 0 else 0.0 for xi in np.atleast_1d(x)])
        return float(out[0]) if scalar else out

    def sf(self, x):
        """Survival function 1 - cdf."""
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        out = np.array([self.alpha @ expm(self.T * xi) @ np.ones(self.n_phases)
                        if xi >= 0 else 1.0 for xi in np.atleast_1d(x)])
        return float(out[0]) if scalar else out

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        out = np.array([self.alpha @ expm(self.T * xi) @ self.exit
                        if xi >= 0 else 0.0 for xi in np.atleast_1d(x)])
        return float(out[0]) if scalar else out

    def lst(self, s):
        """Laplace-Stieltjes transform alpha (sI - T)^{-1} t."""
        n = self.n_phases
        A = s * np.eye(n) - self.T
        try:
            return self.alpha @ np.linalg.solve(A, self.exit)
        except np.linalg.LinAlgError as exc:
            raise SingularResolvent(f"sI - T singular at s = {s}") from exc

    def second_moment(self) -> float:
        ones = np.ones(self.n_phases)
        Tinv1 = np.linalg.solve(-self.T, ones)
        return float(2.0 * self.alpha @ np.linalg.solve(-self.T, Tinv1))

    def equilibrium(self) -> "PhaseType":
        """Stationary-excess distribution: PH(pi, T) with pi = alpha (-T)^{-1} / mean."""
        if self.mean <= 0:
            raise InputError("equilibrium requires positive mean")
        pi = np.linalg.solve(-self.T.T, self.alpha) / self.mean
        return PhaseType(pi, self.T)

    def sample(self, rng: np.random.Generator, size: int | None = None):
        n = size if size is not None else 1
        out = np.empty(n)
        rates = -np.diag(self.T)
        # jump kernel: row i -> phase j w.p. T[i,j]/rates[i], absorb w.p. exit[i]/rates[i]
        probs = self.T / rates[:, None]
        np.fill_diagonal(probs, 0.0)
        absorb = self.exit / rates
        for k in range(n):
            state = rng.choice(self.n_phases, p=self.alpha)
            t = 0.0
            while True:
                t += rng.exponential(1.0 / rates[state])
                u = rng.random()
                if u < absorb[state]:
                    break
                # conditional jump among transient states
                p = probs[state] / (1.0 - absorb[state])
                state = rng.choice(self.n_phases, p=p)
            out[k] = t
        return float(out[0]) if size is None else out


def exponential_ph(rate: float) -> PhaseType:
    """One-phase PH: exponential with the given rate."""
    return PhaseType(np.array([1.0]), np.array([[-rate]]))


def erlang_ph(k: int, rate: float) -> PhaseType:
    """Erlang(k, rate) as a PH chain of k sequential phases."""
    T = np.diag(np.full(k, -rate)) + np.diag(np.full(k - 1, rate), 1)
    alpha = np.zeros(k)
    alpha[0] = 1.0
    return PhaseType(alpha, T)


_HT_KINDS = ("pareto", "weibull", "lognormal")


@dataclass(frozen=True)
class HeavyTail:
    """Parametric heavy-tailed law with finite mean.

    kinds and params:
      pareto:    (shape a > 1, scale sigma > 0), tail (1 + x/sigma)^(-a)
      weibull:   (shape k > 0, scale lam > 0), tail exp(-(x/lam)^k); heavy for k < 1
      lognormal: (mu, sigma > 0)
    """

    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in _HT_KINDS:
            raise InputError(f"unknown heavy-tail kind {self.kind!r}")
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, "params", params)
        if self.kind == "pareto":
            a, sigma = params
            if sigma <= 0:
                raise InputError("pareto scale must be positive")
            if a <= 1:
                raise InfiniteMean(f"pareto shape {a} <= 1 has no finite mean")
        elif self.kind == "weibull":
            k, lam = params
            if k <= 0 or lam <= 0:
                raise InputError("weibull shape and scale must be positive")
        else:
            mu, sigma = params
            if sigma <= 0:
                raise InputError("lognormal sigma must be positive")

    @property
    def mean(self) -> float:
        if self.kind == "pareto":
            a, sigma = self.params
            return sigma / (a - 1.0)
        if self.kind == "weibull":
            k, lam = self.params
            return lam * gamma_fn(1.0 + 1.0 / k)
        mu, sigma = self.params
        return math.exp(mu + 0.5 * sigma * sigma)

    def tail(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        if self.kind == "pareto":
            a, sigma = self.params
            return (1.0 + x / sigma) ** (-a)
        if self.kind == "weibull":
            k, lam = self.params
            return np.exp(-((x / lam) ** k))
        mu, sigma = self.params
        with np.errstate(divide="ignore"):
            return np.where(x > 0, norm.sf((np.log(np.maximum(x, 1e-300)) - mu) / sigma), 1.0)

    def cdf(self, x):
        return 1.0 - self.tail(x)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "pareto":
            a, sigma = self.params
            return (a / sigma) * (1.0 + np.maximum(x, 0.0) / sigma) ** (-a - 1.0)
        if self.kind == "weibull":
            k, lam = self.params
            xx = np.maximum(x, 1e-300)
            return (k / lam) * (xx / lam) ** (k - 1.0) * np.exp(-((xx / lam) ** k))
        mu, sigma = self.params
        xx = np.maximum(x, 1e-300)
        return norm.pdf((np.log(xx) - mu) / sigma) / (xx * sigma)

    def integrated_tail(self, x):
        """int_x^inf tail(y) dy, in closed form."""
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        if self.kind == "pareto":
            a, sigma = self.params
            return sigma / (a - 1.0) * (1.0 + x / sigma) ** (1.0 - a)
        if self.kind == "weibull":
            k, lam = self.params
            t = (x / lam) ** k
            return (lam / k) * gammaincc(1.0 / k, t) * gamma_fn(1.0 / k)
        mu, sigma = self.params
        # E[(X - x)^+] for lognormal
        m = self.mean
        with np.errstate(divide="ignore"):
            lx = np.log(np.maximum(x, 1e-300))
        return np.where(
            x > 0,
            m * norm.cdf((mu + sigma * sigma - lx) / sigma) - x * norm.cdf((mu - lx) / sigma),
            m,
        )

    def equilibrium_tail(self, x):
        return self.integrated_tail(x) / self.mean

    def equilibrium_cdf(self, x):
        return 1.0 - self.equilibrium_tail(x)

    def equilibrium_lst(self, s) -> complex:
        """LST of the stationary-excess law: (1/mean) int_0^inf e^{-sx} tail(x) dx.

        Defined for Re(s) > 0 (and s = 0, where it equals 1); heavy tails
        make the transform diverge for Re(s) < 0.
        """
        from .errors import TransformDivergence

        s = complex(s)
        if s == 0:
            return 1.0 + 0.0j
        if s.real < 0:
            raise TransformDivergence(f"heavy-tail transform diverges at Re(s) = {s.real}")
        val, _ = quad(lambda x: np.exp(-s * x) * float(self.tail(x)), 0.0, np.inf,
                      complex_func=True, limit=400, epsabs=1e-13, epsrel=1e-11)
        return val / self.mean

    def sample(self, rng: np.random.Generator, size: int | None = None):
        n = size if size is not None else 1
        u = rng.random(n)
        if self.kind == "pareto":
            a, sigma = self.params
            out = sigma * (u ** (-1.0 / a) - 1.0)
        elif self.kind == "weibull":
            k, lam = self.params
            out = lam * (-np.log(u)) ** (1.0 / k)
        else:
            mu, sigma = self.params
            out = np.exp(mu + sigma * rng.standard_normal(n))
        return float(out[0]) if size is None else out


@dataclass(frozen=True)
class MixtureClaim:
    """Claim size: PH with probability 1-eps, heavy-tailed with probability eps."""

    ph: PhaseType
    ht: HeavyTail
    eps: float

    def __post_init__(self):
        if not 0.0 <= self.eps <= 1.0:
            raise InputError(f"eps = {self.eps} outside [0, 1]")

    def mean(self, eps: float | None = None) -> float:
        e = self.eps if eps is None else eps
        return (1.0 - e) * self.ph.mean + e * self.ht.mean

    def cdf(self, x, eps: float | None = None):
        e = self.eps if eps is None else eps
        return (1.0 - e) * self.ph.cdf(x) + e * self.ht.cdf(x)

    def sample(self, rng: np.random.Generator, size: int | None = None):
        n = size if size is not None else 1
        heavy = rng.random(n) < self.eps
        out = np.empty(n)
        n_heavy = int(heavy.sum())
        if n_heavy:
            out[heavy] = np.atleast_1d(self.ht.sample(rng, n_heavy))
        if n_heavy < n:
            out[~heavy] = np.atleast_1d(self.ph.sample(rng, n - n_heavy))
        return float(out[0]) if size is None else out


# -- operation-style wrappers -------------------------------------------------

def ph_build(alpha, T) -> PhaseType:
    return PhaseType(np.asarray(alpha, dtype=float), np.asarray(T, dtype=float))


def ph_eval(ph: PhaseType, what: str, arg):
    if what == "cdf":
        return ph.cdf(arg)
    if what == "pdf":
        return ph.pdf(arg)
    if what == "lst":
        return ph.lst(arg)
    if what == "mean":
        return ph.mean
    raise InputError(f"unknown ph_eval request {what!r}")


def ph_equilibrium(ph: PhaseType) -> PhaseType:
    return ph.equilibrium()


def ht_eval(ht: HeavyTail, what: str, x):
    if what == "cdf":
        return ht.cdf(x)
    if what == "tail":
        return ht.tail(x)
    if what == "mean":
        return ht.mean
    if what == "equilibrium_cdf":
        return ht.equilibrium_cdf(x)
    if what == "equilibrium_tail":
        return ht.equilibrium_tail(x)
    raise InputError(f"unknown ht_eval request {what!r}")


def sample(dist, rng: np.random.Generator, size: int | None = None):
    return dist.sample(rng, size)
