"""Monte Carlo oracle for the risk process with two-sided jumps.

Simulation is exact and event-driven: between jumps the surplus is linear
with slope c, so ruin can only happen at claim epochs and no time
discretization is needed.  A single kernel simulates a whole ladder of
mixing weights eps from one shared event stream (common random numbers):
per claim epoch one uniform coin decides heavy-vs-light for every eps at
once, so the heavy-claim sets are nested across the ladder and the
eps-slope comparisons see strongly correlated noise.

Paths are split into a fixed number of chunks with independent seeded
streams; chunk results merge by summation, so estimates are bit-identical
for a given seed regardless of how many worker threads run the chunks.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np
from scipy.optimize import brentq

from .distributions import PhaseType
from .errors import InputError, InsufficientPaths, PreconditionViolated
from .fluid_map import RiskModel

_N_CHUNKS = 16
_Z95 = 1.959963984540054

_HT_CODES = {"pareto": 0, "weibull": 1, "lognormal": 2}
_PEN_CODES = {"constant": 0, "deficit_indicator": 1, "bilateral_exponential": 2}


@dataclass(frozen=True)
class PathOutcome:
    """Terminal state of one simulated surplus path."""

    ruined: bool
    tau: float
    deficit: float
    surplus_prior: float
    stop_reason: str  # "ruin" | "horizon" | "barrier"


@dataclass(frozen=True)
class McEstimate:
    mean: float
    half_width_95: float
    n_paths: int
    seed: int
    truncation_bias_bound: float

    @property
    def stderr(self) -> float:
        return self.half_width_95 / _Z95


def _ph_tables(ph: PhaseType | None):
    """Cumulative-probability tables for embedded-chain PH sampling."""
    if ph is None:
        return (np.ones(1), np.ones((1, 1)), np.ones(1))
    k = ph.alpha.size
    a_cum = np.cumsum(ph.alpha)
    a_cum[-1] = 1.0
    rates = -np.diag(ph.T)
    # row j of jump_cum: cumulative move-to-state probabilities; falling
    # through all k entries means absorption (service complete)
    jump = ph.T / rates[:, None]
    np.fill_diagonal(jump, 0.0)
    jump_cum = np.cumsum(jump, axis=1)
    return (a_cum, jump_cum, rates)


@numba.njit(nogil=True, cache=True)
def _ph_draw(a_cum, jump_cum, rates):
    v = np.random.random()
    s = 0
    while s < a_cum.size - 1 and v > a_cum[s]:
        s += 1
    x = 0.0
    k = rates.size
    while True:
        x += np.random.exponential(1.0 / rates[s])
        v = np.random.random()
        j = 0
        while j < k and v > jump_cum[s, j]:
            j += 1
        if j == k:
            return x
        s = j


@numba.njit(nogil=True, cache=True)
def _ht_draw(kind, p0, p1):
    v = np.random.random()
    if kind == 0:
        return p1 * (v ** (-1.0 / p0) - 1.0)
    if kind == 1:
        return p1 * (-np.log(v)) ** (1.0 / p0)
    return np.exp(p0 + p1 * np.random.standard_normal())


@numba.njit(nogil=True, cache=True)
def _omega(kind, p0, p1, y, z):
    if kind == 0:
        return p0
    if kind == 1:
        return 1.0 if y > p0 else 0.0
    return np.exp(-p0 * y - p1 * z)


@numba.njit(nogil=True, cache=True)
def _run_chunk(u, c, lam_m, lam_p, q, eps,
               ac, jc, rc, ag, jg, rg,
               ht_kind, h0, h1, pk, p0, p1,
               n_paths, tmax, barrier, stop_mode, seed):
    """Simulate n_paths shared-stream paths for every eps in the ladder.

    stop_mode 0: horizon tmax (payoff e^{-q tau} omega); 1: barrier
    (payoff omega at ruin, stop once the surplus reaches the barrier).
    Returns per-eps payoff sums, squared sums, and ruin counts.
    """
    np.random.seed(seed)
    ne = eps.size
    s1 = np.zeros(ne)
    s2 = np.zeros(ne)
    # cross sums against the first ladder entry, for paired-difference
    # statistics under common random numbers
    sx = np.zeros(ne)
    ruins = np.zeros(ne, dtype=np.int64)
    tot = lam_m + lam_p
    pclaim = lam_m / tot
    x = np.empty(ne)
    pay = np.empty(ne)
    alive = np.empty(ne, dtype=np.bool_)
    for _ in range(n_paths):
        for e in range(ne):
            x[e] = u
            pay[e] = 0.0
            alive[e] = True
        n_alive = ne
        t = 0.0
        while n_alive > 0:
            dt = np.random.exponential(1.0 / tot)
            t += dt
            if stop_mode == 0 and t > tmax:
                break
            if np.random.random() < pclaim:
                coin = np.random.random()
                # both sizes are drawn every epoch so the stream stays
                # aligned across the eps ladder
                y_light = _ph_draw(ac, jc, rc)
                y_heavy = _ht_draw(ht_kind, h0, h1)
                for e in range(ne):
                    if not alive[e]:
                        continue
                    x[e] += c * dt
                    if stop_mode == 1 and x[e] >= barrier:
                        alive[e] = False
                        n_alive -= 1
                        continue
                    y = y_heavy if coin < eps[e] else y_light
                    if x[e] - y < 0.0:
                        w = _omega(pk, p0, p1, y - x[e], x[e])
                        pay[e] = w * np.exp(-q * t) if stop_mode == 0 else w
                        ruins[e] += 1
                        alive[e] = False
                        n_alive -= 1
                    else:
                        x[e] -= y
            else:
                g = _ph_draw(ag, jg, rg)
                for e in range(ne):
                    if not alive[e]:
                        continue
                    x[e] += c * dt + g
                    if stop_mode == 1 and x[e] >= barrier:
                        alive[e] = False
                        n_alive -= 1
        for e in range(ne):
            s1[e] += pay[e]
            s2[e] += pay[e] * pay[e]
            sx[e] += pay[e] * pay[0]
    return s1, s2, sx, ruins


def _chunk_seeds(seed: int) -> np.ndarray:
    ss = np.random.SeedSequence(seed)
    return ss.generate_state(_N_CHUNKS, dtype=np.uint32).astype(np.int64)


def _n_workers() -> int:
    raw = os.environ.get("GSRISK_THREADS", "1")
    try:
        return max(1, min(int(raw), _N_CHUNKS))
    except ValueError:
        return 1


def _run_ladder(model: RiskModel, eps_arr: np.ndarray, penalty_code, penalty_params,
                u: float, n_paths: int, seed: int, tmax: float,
                barrier: float, stop_mode: int):
    if u < 0:
        raise InputError("initial surplus u must be nonnegative")
    ac, jc, rc = _ph_tables(model.claims.ph)
    ag, jg, rg = _ph_tables(model.gains)
    ht = model.claims.ht
    hk = _HT_CODES[ht.kind]
    h0, h1 = ht.params
    p0 = penalty_params[0] if len(penalty_params) > 0 else 1.0
    p1 = penalty_params[1] if len(penalty_params) > 1 else 0.0
    q = model.q if stop_mode == 0 else 0.0
    seeds = _chunk_seeds(seed)
    bounds = np.linspace(0, n_paths, _N_CHUNKS + 1).astype(int)
    counts = np.diff(bounds)

    def work(i):
        return _run_chunk(u, model.c, model.lambda_minus, model.lambda_plus, q,
                          eps_arr, ac, jc, rc, ag, jg, rg, hk, h0, h1,
                          penalty_code, p0, p1, int(counts[i]), tmax,
                          barrier, stop_mode, int(seeds[i]))

    workers = _n_workers()
    if workers == 1:
        parts = [work(i) for i in range(_N_CHUNKS)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, range(_N_CHUNKS)))
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    sx = sum(p[2] for p in parts)
    ruins = sum(p[3] for p in parts)
    return s1, s2, sx, ruins


def _estimates(s1, s2, n_paths, seed, bias) -> list[McEstimate]:
    out = []
    for a, b in zip(s1, s2):
        mean = a / n_paths
        var = max(b / n_paths - mean * mean, 0.0)
        hw = _Z95 * math.sqrt(var / n_paths)
        out.append(McEstimate(mean, hw, n_paths, seed, bias))
    return out


def default_horizon(model: RiskModel) -> float:
    """Horizon making the truncation bias a factor 1e-7 of the penalty bound."""
    return -math.log(1e-7) / model.q


def default_barrier(model: RiskModel, u: float) -> float:
    return 10.0 * u + 50.0 * model.claim_mean()


def estimate_gs_differences(model: RiskModel, eps_ladder, penalty, u: float,
                            n_paths: int, seed: int,
                            horizon: float | None = None):
    """CRN estimates plus paired differences against the first ladder entry.

    Returns (estimates, differences) where differences[i] estimates
    GS(eps_i) - GS(eps_0) with the paired (much narrower) confidence
    interval; under common random numbers most path payoffs cancel
    exactly, so the difference isolates the eps-slope from the shared
    noise floor."""
    ests, diffs = _gs_ladder_core(model, eps_ladder, penalty, u, n_paths,
                                  seed, horizon)
    return ests, diffs


def estimate_gs_ladder(model: RiskModel, eps_ladder, penalty, u: float,
                       n_paths: int, seed: int,
                       horizon: float | None = None,
                       tol: float | None = None) -> list[McEstimate]:
    """Common-random-number GS estimates for several eps at once."""
    results, _ = _gs_ladder_core(model, eps_ladder, penalty, u, n_paths,
                                 seed, horizon)
    if tol is not None:
        worst = max(r.stderr for r in results)
        if worst > tol:
            raise InsufficientPaths(
                f"stderr {worst:.3e} exceeds tolerance {tol:.3e} "
                f"with {n_paths} paths")
    return results


def _gs_ladder_core(model: RiskModel, eps_ladder, penalty, u: float,
                    n_paths: int, seed: int, horizon: float | None):
    if model.q <= 0:
        raise PreconditionViolated("horizon stopping needs q > 0; use estimate_ruin")
    if penalty.kind not in _PEN_CODES:
        raise InputError(f"Monte Carlo does not support penalty kind {penalty.kind!r}")
    eps_arr = np.asarray([float(e) for e in eps_ladder])
    if np.any(eps_arr < 0) or np.any(eps_arr > 1):
        raise InputError("eps must lie in [0, 1]")
    tmax = default_horizon(model) if horizon is None else float(horizon)
    bias = penalty.bound * math.exp(-model.q * tmax)
    s1, s2, sx, _ = _run_ladder(model, eps_arr, _PEN_CODES[penalty.kind],
                                penalty.params, u, n_paths, seed, tmax, 0.0, 0)
    results = _estimates(s1, s2, n_paths, seed, bias)
    return results, _paired_diffs(s1, s2, sx, n_paths, seed, bias)


def _paired_diffs(s1, s2, sx, n, seed, bias) -> list[McEstimate]:
    # paired difference D_i = pay_i - pay_0: Var(D) = Var_i + Var_0 - 2 Cov
    diffs = []
    m0, v0 = s1[0] / n, max(s2[0] / n - (s1[0] / n) ** 2, 0.0)
    for a, b, x in zip(s1, s2, sx):
        mi, vi = a / n, max(b / n - (a / n) ** 2, 0.0)
        cov = x / n - mi * m0
        var_d = max(vi + v0 - 2.0 * cov, 0.0)
        hw = _Z95 * math.sqrt(var_d / n)
        diffs.append(McEstimate(mi - m0, hw, n, seed, 2.0 * bias))
    return diffs


def estimate_gs(model: RiskModel, eps: float, penalty, u: float,
                n_paths: int, seed: int, horizon: float | None = None,
                tol: float | None = None) -> McEstimate:
    """E[e^{-q tau} omega(deficit, surplus prior); tau < horizon]."""
    return estimate_gs_ladder(model, [eps], penalty, u, n_paths, seed,
                              horizon=horizon, tol=tol)[0]


def _lundberg_gamma(model: RiskModel) -> float:
    """Adjustment coefficient of the base (eps = 0) model: the positive
    gamma with c gamma = lam_-(f_p(-gamma) - 1) + lam_+(g(gamma) - 1)."""
    ph = model.claims.ph
    decay = min(-np.real(ev) for ev in np.linalg.eigvals(ph.T))

    def kappa_neg(g):
        claims = model.lambda_minus * (np.real(ph.lst(-g)) - 1.0)
        gains = 0.0
        if model.lambda_plus > 0:
            gains = model.lambda_plus * (np.real(model.gains.lst(g)) - 1.0)
        return -model.c * g + claims + gains

    hi = 0.999 * decay
    while kappa_neg(hi) < 0 and hi > 1e-12:
        hi *= 0.5
    if hi <= 1e-12:
        return 0.0
    return float(brentq(kappa_neg, 1e-12, hi, xtol=1e-12))


def barrier_bias_bound(model: RiskModel, barrier: float,
                       eps: float | None = None) -> float:
    """Upper estimate for P(ruin after first exceeding the barrier):
    exponential Lundberg bound for the light part plus a first-order
    heavy-ladder inflation term."""
    gamma = _lundberg_gamma(model)
    light = math.exp(-gamma * barrier) if gamma > 0 else 1.0
    eps = model.claims.eps if eps is None else float(eps)
    rho = model.lambda_minus * model.claim_mean(eps) / model.c
    heavy = 0.0
    if eps > 0 and rho < 1:
        p_heavy_ladder = eps * model.mu_h / model.claim_mean()
        heavy = rho / (1.0 - rho) * p_heavy_ladder \
            * float(model.claims.ht.equilibrium_tail(barrier))
    return light + heavy


def estimate_ruin(model: RiskModel, eps: float, u: float, n_paths: int,
                  seed: int, barrier: float | None = None,
                  tol: float | None = None) -> McEstimate:
    """Ruin frequency before the surplus exceeds the barrier (q = 0
    semantics; the model's killing rate is ignored)."""
    B = default_barrier(model, u) if barrier is None else float(barrier)
    if not math.isfinite(B) or B <= u:
        raise InputError("barrier must be finite and exceed u")
    eps_arr = np.asarray([float(eps)])
    s1, s2, _, _ = _run_ladder(model, eps_arr, 0, (1.0,), u, n_paths, seed,
                               0.0, B, 1)
    bias = barrier_bias_bound(model, B, eps)
    result = _estimates(s1, s2, n_paths, seed, bias)[0]
    if tol is not None and result.stderr > tol:
        raise InsufficientPaths(
            f"stderr {result.stderr:.3e} exceeds tolerance {tol:.3e} "
            f"with {n_paths} paths")
    return result


def estimate_ruin_differences(model: RiskModel, eps_ladder, u: float,
                              n_paths: int, seed: int,
                              barrier: float | None = None):
    """CRN ruin-frequency estimates plus paired differences against the
    first ladder entry, mirroring estimate_gs_differences for q = 0
    barrier stopping."""
    B = default_barrier(model, u) if barrier is None else float(barrier)
    if not math.isfinite(B) or B <= u:
        raise InputError("barrier must be finite and exceed u")
    eps_arr = np.asarray([float(e) for e in eps_ladder])
    if np.any(eps_arr < 0) or np.any(eps_arr > 1):
        raise InputError("eps must lie in [0, 1]")
    s1, s2, sx, _ = _run_ladder(model, eps_arr, 0, (1.0,), u, n_paths, seed,
                                0.0, B, 1)
    bias = barrier_bias_bound(model, B, float(eps_arr.max()))
    results = _estimates(s1, s2, n_paths, seed, bias)
    return results, _paired_diffs(s1, s2, sx, n_paths, seed, bias)


def simulate_path(model: RiskModel, eps: float, u: float,
                  rng: np.random.Generator,
                  horizon: float | None = None,
                  barrier: float | None = None) -> PathOutcome:
    """One exact event-driven path; stop at ruin, the horizon, or the
    barrier, whichever comes first.  Mainly for inspection and tests; the
    estimators use a compiled kernel."""
    if (horizon is None) == (barrier is None):
        raise InputError("specify exactly one of horizon or barrier")
    if u < 0:
        raise InputError("initial surplus u must be nonnegative")
    tot = model.lambda_minus + model.lambda_plus
    if tot == 0 or model.lambda_minus == 0:
        # positive drift and no claims: ruin is impossible
        reason = "horizon" if horizon is not None else "barrier"
        return PathOutcome(False, math.inf, 0.0, 0.0, reason)
    x, t = float(u), 0.0
    while True:
        dt = rng.exponential(1.0 / tot)
        if horizon is not None and t + dt > horizon:
            return PathOutcome(False, math.inf, 0.0, 0.0, "horizon")
        t += dt
        x += model.c * dt
        if barrier is not None and x >= barrier:
            return PathOutcome(False, math.inf, 0.0, 0.0, "barrier")
        if rng.random() < model.lambda_minus / tot:
            heavy = rng.random() < eps
            y = model.claims.ht.sample(rng) if heavy else model.claims.ph.sample(rng)
            if x - y < 0:
                return PathOutcome(True, t, y - x, x, "ruin")
            x -= y
        else:
            x += model.gains.sample(rng)
