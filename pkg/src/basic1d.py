# src/basic1d.py
"""
One-dimensional basic processes
-------------------------------
A basic process with density gamma is realised as a randomised block factor of
an i.i.d. Bernoulli(p) driver X: site i is occupied with probability
q(X_i, ..., X_{i+w-1}), decided independently per site given the driver.
Correlations at lag >= w equal gamma^2 because the windows are disjoint, so
only lags 1..w-1 need to be matched to g^(alpha).

Contents:
  - exact enumeration oracle (density, lag correlations, profile)
  - the alpha = 0 exclusion factor A_i = X_i (1 - X_{i+1})
  - multi-start penalty synthesis of response tables for general alpha
  - independent thinning, path sampling and the flat text record
"""

from __future__ import annotations
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterator, List, Literal, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy import optimize

from .errors import EnumerationTooLarge, InfeasibleAtWindow, LatticeError, RecordParseError

__all__ = [
    "BlockFactorProcess1D", "CorrelationProfile1D", "StartOutcome", "SynthesisReport",
    "exact_density", "exact_lag_correlation", "alpha0_exclusion_factor", "constant_process",
    "profile", "synthesize", "thin", "sample_path", "empirical_lag_correlation",
    "to_record", "from_record", "MAX_ENUMERATION_SITES", "MAX_SYNTHESIS_SITES",
]

logger = logging.getLogger(__name__)

MAX_ENUMERATION_SITES = 30
MAX_SYNTHESIS_SITES = 22
_CHUNK = 1 << 16

SynthesisMode = Literal["maximize_density", "hit_density"]


# ----------------------------- Types ----------------------------- #

@dataclass(frozen=True)
class BlockFactorProcess1D:
    window: int
    driver_p: float
    response: Tuple[float, ...]

    def __post_init__(self):
        w = int(self.window)
        if w < 1:
            raise LatticeError(f"window must be >= 1, got {self.window}")
        p = float(self.driver_p)
        if not (0.0 <= p <= 1.0):
            raise LatticeError(f"driver_p must lie in [0, 1], got {p}")
        q = tuple(float(v) for v in self.response)
        if len(q) != 1 << w:
            raise LatticeError(f"response needs 2^{w} = {1 << w} entries, got {len(q)}")
        if any(not (0.0 <= v <= 1.0) for v in q):
            raise LatticeError("response entries must lie in [0, 1]")
        object.__setattr__(self, "window", w)
        object.__setattr__(self, "driver_p", p)
        object.__setattr__(self, "response", q)

    @property
    def q(self) -> np.ndarray:
        return np.asarray(self.response, dtype=float)


@dataclass(frozen=True)
class CorrelationProfile1D:
    density: float
    window: int
    lag_values: Dict[int, float]
    alpha_hat: Optional[float]
    residual: float

    def lag(self, k: int) -> float:
        if k == 0:
            return self.density
        if k >= self.window:
            return self.density ** 2
        return self.lag_values[k]


# --------------------------- Enumeration --------------------------- #

def _index_chunks(n_sites: int) -> Iterator[np.ndarray]:
    """Driver patterns over n_sites as little-endian integers, _CHUNK at a time."""
    total = 1 << n_sites
    for start in range(0, total, _CHUNK):
        yield np.arange(start, min(start + _CHUNK, total), dtype=np.int64)


def _popcount(idx: np.ndarray, n_sites: int) -> np.ndarray:
    ones = np.zeros(idx.shape, dtype=np.int64)
    for j in range(n_sites):
        ones += (idx >> j) & 1
    return ones


def _count_weights(p: float, n_sites: int) -> np.ndarray:
    """P(pattern) indexed by its number of ones."""
    k = np.arange(n_sites + 1)
    return np.power(p, k) * np.power(1.0 - p, n_sites - k)


def _window(idx: np.ndarray, start: int, w: int) -> np.ndarray:
    return (idx >> start) & ((1 << w) - 1)


def exact_density(proc: BlockFactorProcess1D) -> float:
    """gamma = sum_b P(b) q(b), compensated summation."""
    w = proc.window
    if w > MAX_ENUMERATION_SITES:
        raise EnumerationTooLarge(w, MAX_ENUMERATION_SITES)
    q, pw = proc.q, _count_weights(proc.driver_p, w)
    partials = [math.fsum(pw[_popcount(idx, w)] * q[idx]) for idx in _index_chunks(w)]
    return math.fsum(partials)


def exact_lag_correlation(proc: BlockFactorProcess1D, lag: int, *,
                          max_sites: int = MAX_ENUMERATION_SITES) -> float:
    """<A_0 A_lag> by enumerating the 2^(w+lag) joint driver patterns, one chunk in memory at a time."""
    lag = int(lag)
    if lag < 0:
        raise LatticeError(f"lag must be >= 0, got {lag}")
    if lag == 0:
        return exact_density(proc)
    w = proc.window
    if lag >= w:
        return exact_density(proc) ** 2
    n = w + lag
    if n > max_sites:
        raise EnumerationTooLarge(n, max_sites)
    q, pw = proc.q, _count_weights(proc.driver_p, n)
    partials = [
        math.fsum(pw[_popcount(idx, n)] * q[_window(idx, 0, w)] * q[_window(idx, lag, w)])
        for idx in _index_chunks(n)
    ]
    return math.fsum(partials)


def profile(proc: BlockFactorProcess1D) -> CorrelationProfile1D:
    gamma = exact_density(proc)
    g2 = gamma * gamma
    lags = {k: exact_lag_correlation(proc, k) for k in range(1, proc.window)}
    lags[proc.window] = g2
    lag1 = lags.get(1, g2)
    # gamma^2 underflows for very sparse processes; alpha is then undefined as for the empty one
    alpha_hat = lag1 / g2 if g2 > 0 else None
    mid = [abs(lags[k] - g2) for k in range(2, proc.window)]
    return CorrelationProfile1D(
        density=gamma, window=proc.window, lag_values=lags,
        alpha_hat=alpha_hat, residual=max(mid) if mid else 0.0,
    )


# ----------------------- Explicit constructions ----------------------- #

def alpha0_exclusion_factor(p: float = 0.5) -> BlockFactorProcess1D:
    """A_i = X_i (1 - X_{i+1}); density p(1-p), no occupied nearest neighbours."""
    if not (0.0 <= p <= 1.0):
        raise LatticeError(f"p must lie in [0, 1], got {p}")
    # pattern index b = X_i + 2 X_{i+1}; only (1, 0) -> index 1 is occupied
    return BlockFactorProcess1D(window=2, driver_p=p, response=(0.0, 1.0, 0.0, 0.0))


def constant_process(value: float = 1.0, window: int = 1) -> BlockFactorProcess1D:
    """Response identically `value`: the full lattice for 1, the empty process for 0."""
    return BlockFactorProcess1D(window=window, driver_p=0.5, response=(float(value),) * (1 << window))


def thin(proc: BlockFactorProcess1D, t: float) -> BlockFactorProcess1D:
    """Keep each occupied site independently with probability t."""
    if not (0.0 <= t <= 1.0):
        raise LatticeError(f"thinning probability must lie in [0, 1], got {t}")
    return BlockFactorProcess1D(proc.window, proc.driver_p, tuple(t * v for v in proc.response))


# ---------------------------- Synthesis ---------------------------- #

@lru_cache(maxsize=32)
def _lag_kernel(w: int) -> Tuple[Tuple[np.ndarray, np.ndarray, np.ndarray, int], ...]:
    """Per lag k in 1..w-1: (ones count, window index at 0, window index at k, n sites), compact dtypes."""
    out = []
    for k in range(1, w):
        n = w + k
        ones, i0, ik = [], [], []
        for idx in _index_chunks(n):
            ones.append(_popcount(idx, n).astype(np.uint8))
            i0.append(_window(idx, 0, w).astype(np.int32))
            ik.append(_window(idx, k, w).astype(np.int32))
        out.append((np.concatenate(ones), np.concatenate(i0), np.concatenate(ik), n))
    return tuple(out)


@lru_cache(maxsize=32)
def _density_kernel(w: int) -> np.ndarray:
    return np.concatenate([_popcount(idx, w).astype(np.uint8) for idx in _index_chunks(w)])


def _fast_stats(x: np.ndarray, w: int) -> Tuple[float, np.ndarray]:
    """(gamma, lags 1..w-1) in plain float64; the synthesizer's inner model."""
    p, q = float(x[0]), x[1:]
    ones = _density_kernel(w)
    gamma = float(np.dot(np.power(p, ones) * np.power(1.0 - p, w - ones), q))
    lags = np.empty(max(w - 1, 0))
    for j, (ones_k, i0, ik, n) in enumerate(_lag_kernel(w)):
        wt = np.power(p, ones_k) * np.power(1.0 - p, n - ones_k)
        lags[j] = float(np.dot(wt, q[i0] * q[ik]))
    return gamma, lags


def _residuals(x: np.ndarray, w: int, alpha: float, gamma_target: Optional[float]) -> np.ndarray:
    gamma, lags = _fast_stats(x, w)
    g2 = gamma * gamma
    lag1 = lags[0] if w >= 2 else g2
    r = [lag1 - alpha * g2]
    r.extend(lags[1:] - g2)
    if gamma_target is not None:
        r.append(gamma - gamma_target)
    return np.asarray(r, dtype=float)


def _central_gradient(fun, x: np.ndarray, step: float) -> np.ndarray:
    grad = np.empty_like(x)
    for i in range(x.size):
        hi = x.copy(); lo = x.copy()
        hi[i] = min(1.0, x[i] + step)
        lo[i] = max(0.0, x[i] - step)
        grad[i] = (fun(hi) - fun(lo)) / (hi[i] - lo[i])
    return grad


@dataclass
class StartOutcome:
    index: int
    seed: int
    gamma: float
    residual: float
    iterations: int
    feasible: bool
    x: np.ndarray = field(repr=False)


@dataclass
class SynthesisReport:
    alpha_target: float
    window: int
    mode: str
    gamma_target: Optional[float]
    tol: float
    seed: int
    starts: List[StartOutcome]
    best_index: Optional[int] = None
    gamma: float = float("nan")
    residuals: Dict[str, float] = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values()) if self.residuals else float("nan")

    @property
    def total_iterations(self) -> int:
        return int(sum(s.iterations for s in self.starts))


def oracle_residuals(proc: BlockFactorProcess1D, alpha: float,
                     gamma_target: Optional[float] = None) -> Dict[str, float]:
    """Absolute constraint residuals recomputed by the exact oracle."""
    prof = profile(proc)
    g2 = prof.density ** 2
    out = {"lag1": abs(prof.lag(1) - alpha * g2)}
    for k in range(2, proc.window):
        out[f"lag{k}"] = abs(prof.lag(k) - g2)
    if gamma_target is not None:
        out["density"] = abs(prof.density - gamma_target)
    return out


def _run_start(index: int, seed: int, w: int, alpha: float, gamma_target: Optional[float],
               tol: float, penalties: Sequence[float], max_iter: int, fd_step: float) -> StartOutcome:
    rng = np.random.default_rng(seed)
    x = rng.random((1 << w) + 1)
    bounds = [(0.0, 1.0)] * x.size
    iterations = 0

    def res_fn(z):
        return _residuals(z, w, alpha, gamma_target)

    for mu in penalties:
        if gamma_target is None:
            fun = lambda z, mu=mu: -_fast_stats(z, w)[0] + mu * float(np.sum(res_fn(z) ** 2))
        else:
            fun = lambda z, mu=mu: mu * float(np.sum(res_fn(z) ** 2))
        sol = optimize.minimize(
            fun, x, method="L-BFGS-B", bounds=bounds,
            jac=lambda z, fun=fun: _central_gradient(fun, z, fd_step),
            options={"maxiter": int(max_iter)},
        )
        x = np.clip(sol.x, 0.0, 1.0)
        iterations += int(sol.nit)
        if float(np.max(np.abs(res_fn(x)))) <= 0.1 * tol:
            break

    # feasibility polish on the constraint residuals only
    polish = optimize.least_squares(res_fn, x, bounds=(0.0, 1.0), xtol=1e-15, ftol=1e-15, gtol=1e-15)
    iterations += int(polish.nfev)
    if float(np.max(np.abs(polish.fun))) <= float(np.max(np.abs(res_fn(x)))):
        x = np.clip(polish.x, 0.0, 1.0)

    proc = BlockFactorProcess1D(w, float(x[0]), tuple(float(v) for v in x[1:]))
    resid = max(oracle_residuals(proc, alpha, gamma_target).values())
    gamma = exact_density(proc)
    feasible = resid <= tol and (gamma_target is not None or gamma > tol)
    logger.debug("start %d: gamma=%.6f residual=%.3e feasible=%s", index, gamma, resid, feasible)
    return StartOutcome(index, seed, gamma, resid, iterations, feasible, x)


def _rank(outcome: StartOutcome, maximize: bool) -> tuple:
    if outcome.feasible:
        key = -outcome.gamma if maximize else outcome.residual
        return (0, key, outcome.residual, outcome.index)
    return (1, outcome.residual, 0.0, outcome.index)


def synthesize(alpha_target: float, w: int, mode: SynthesisMode = "maximize_density", tol: float = 1e-6,
               seed: int = 0, *, gamma: Optional[float] = None, starts: int = 32, n_jobs: int = 1,
               penalties: Sequence[float] = (1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8),
               max_iter: int = 500, fd_step: float = 1e-6) -> Tuple[BlockFactorProcess1D, SynthesisReport]:
    """
    Multi-start penalty search over (driver_p, response table).

    Constraints: lag1 = alpha gamma^2 and lag_k = gamma^2 for 2 <= k <= w-1,
    plus gamma = target in hit_density mode; the objective is -gamma in
    maximize_density mode. Start i uses seed XOR i. Every start is
    re-verified by the exact oracle before ranking.
    """
    if alpha_target < 0 or not math.isfinite(alpha_target):
        raise LatticeError(f"alpha must be >= 0, got {alpha_target}")
    if int(w) < 1:
        raise LatticeError(f"window must be >= 1, got {w}")
    if mode not in ("maximize_density", "hit_density"):
        raise LatticeError(f"unknown synthesis mode {mode!r}")
    gamma_target = None
    if mode == "hit_density":
        if gamma is None or not (0.0 < gamma < 1.0):
            raise LatticeError(f"hit_density needs a target density in (0, 1), got {gamma}")
        gamma_target = float(gamma)
    if tol <= 0 or starts < 1:
        raise LatticeError("tol must be > 0 and starts >= 1")
    w = int(w)
    if w == 1 and alpha_target != 1.0:
        # lag 1 is gamma^2 at window 1; residual reported at the densest admissible gamma
        g = gamma_target if gamma_target is not None else 1.0
        raise InfeasibleAtWindow(1, abs(1.0 - alpha_target) * g * g)
    if 2 * w - 1 > MAX_SYNTHESIS_SITES:
        # the inner model keeps every joint pattern of the longest lag in memory
        raise EnumerationTooLarge(2 * w - 1, MAX_SYNTHESIS_SITES)

    logger.info("synthesizing w=%d alpha=%.6g mode=%s with %d starts", w, alpha_target, mode, starts)
    seeds = [int(seed) ^ i for i in range(int(starts))]
    outcomes = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_run_start)(i, s, w, float(alpha_target), gamma_target, float(tol),
                            tuple(penalties), max_iter, fd_step)
        for i, s in enumerate(seeds)
    )
    outcomes = sorted(outcomes, key=lambda o: o.index)
    best = min(outcomes, key=lambda o: _rank(o, gamma_target is None))

    report = SynthesisReport(alpha_target=float(alpha_target), window=w, mode=mode,
                             gamma_target=gamma_target, tol=float(tol), seed=int(seed), starts=outcomes)
    proc = BlockFactorProcess1D(w, float(best.x[0]), tuple(float(v) for v in best.x[1:]))
    report.best_index = best.index
    report.gamma = exact_density(proc)
    report.residuals = oracle_residuals(proc, float(alpha_target), gamma_target)
    if not best.feasible:
        raise InfeasibleAtWindow(w, best.residual, report)
    logger.info("best start %d: gamma=%.9f max residual=%.3e", best.index, report.gamma, report.max_residual)
    return proc, report


# ---------------------------- Sampling ---------------------------- #

def sample_path(proc: BlockFactorProcess1D, n: int, seed) -> np.ndarray:
    """n sites; driver drawn over n + w - 1 sites. `seed` may be an int or a SeedSequence."""
    n = int(n)
    if n < 1:
        raise LatticeError(f"path length must be >= 1, got {n}")
    w = proc.window
    rng = np.random.default_rng(seed)
    driver = (rng.random(n + w - 1) < proc.driver_p).astype(np.int64)
    u = rng.random(n)
    idx = np.zeros(n, dtype=np.int64)
    for j in range(w):
        idx += driver[j:j + n] << j
    return (u < proc.q[idx]).astype(np.int8)


def empirical_lag_correlation(path: np.ndarray, lag: int, n_batches: int = 50) -> Tuple[float, float]:
    """Mean of A_i A_{i+lag} with a batch-means standard error."""
    a = np.asarray(path, dtype=float)
    prod = a if lag == 0 else a[:-lag] * a[lag:]
    batches = np.array_split(prod, int(n_batches))
    means = np.array([b.mean() for b in batches if b.size])
    se = float(means.std(ddof=1) / math.sqrt(len(means))) if len(means) > 1 else float("nan")
    return float(prod.mean()), se


# ----------------------------- Record ----------------------------- #

def _bits_label(b: int, w: int) -> str:
    return "".join(str((b >> j) & 1) for j in range(w))


def to_record(proc: BlockFactorProcess1D, header: Sequence[str] = ()) -> str:
    lines = [f"# {h}" for h in header]
    lines.append(f"{proc.window} {proc.driver_p:.17g}")
    for b, v in enumerate(proc.response):
        lines.append(f"{_bits_label(b, proc.window)} {v:.17g}")
    return "\n".join(lines) + "\n"


def from_record(text: str) -> BlockFactorProcess1D:
    rows = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    rows = [(i, ln) for i, ln in rows if ln and not ln.startswith("#")]
    if not rows:
        raise RecordParseError("empty process record")
    line_no, first = rows[0]
    try:
        w_str, p_str = first.split()
        w, p = int(w_str), float(p_str)
    except ValueError:
        raise RecordParseError("expected '<window> <driver_p>'", line_no) from None
    if w < 1 or w > MAX_ENUMERATION_SITES:
        raise RecordParseError(f"window {w} out of range", line_no)
    if len(rows) - 1 != 1 << w:
        raise RecordParseError(f"expected {1 << w} response lines, found {len(rows) - 1}")
    response: List[Optional[float]] = [None] * (1 << w)
    for line_no, ln in rows[1:]:
        parts = ln.split()
        if len(parts) != 2 or len(parts[0]) != w or set(parts[0]) - {"0", "1"}:
            raise RecordParseError("expected '<pattern bits> <value>'", line_no)
        b = sum(int(c) << j for j, c in enumerate(parts[0]))
        if response[b] is not None:
            raise RecordParseError(f"duplicate pattern {parts[0]}", line_no)
        try:
            response[b] = float(parts[1])
        except ValueError:
            raise RecordParseError(f"bad response value {parts[1]!r}", line_no) from None
    try:
        return BlockFactorProcess1D(w, p, tuple(response))
    except LatticeError as e:
        raise RecordParseError(str(e)) from None
