# src/bounds.py
"""
Bounds on the maximal realizable density
----------------------------------------
Upper bound R_F from non-negativity of the structure function, the general
lower bound r_A, the 1D constructive lower bound and its d-th power r_C from
the product construction, the crossover alpha_C(d) between r_A and r_C, and a
numerical 1D upper bound from the Yamada variance condition.

Outputs used by the CLI:
  - figure4_table: r_C/R_F and r_A/R_F over (alpha, d)
  - bounds_table:  all bound values over (alpha, d)
"""

from __future__ import annotations
import logging
import math
from dataclasses import asdict, dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import optimize

from .lattice_core import RadialSpec, max_f_alpha, psd_margin, yamada_slack_1d

__all__ = [
    "BoundsReport", "CrossoverResult", "YamadaResult", "ReferenceConstants",
    "upper_R_F", "lower_r_A", "lower_1d", "lower_r_C", "bounds_report", "bounds_table",
    "crossover_alpha_C", "alpha_grid", "figure4_table", "yamada_upper_1d",
    "yamada_equality_family", "reference_constants",
]

logger = logging.getLogger(__name__)


def _check(alpha: float, d: int = 1, min_d: int = 1) -> None:
    if not (math.isfinite(alpha) and alpha >= 0.0):
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    if int(d) < min_d:
        raise ValueError(f"dimension must be >= {min_d}, got {d}")


# ----------------------------- Closed forms ----------------------------- #

def upper_R_F(alpha: float, d: int) -> float:
    """R_F(alpha, d) = 1 / (1 + 2d|1 - alpha|)."""
    _check(alpha, d)
    return 1.0 / max_f_alpha(alpha, d)


def lower_r_A(alpha: float, d: int) -> float:
    # alpha = 1 belongs to the second branch; the first branch tends to 1/e there
    _check(alpha, d)
    if alpha < 1.0:
        return 1.0 / (math.e * (2 * d + 1 - 2 * d * alpha))
    return 1.0 / alpha ** (2 * d)


def lower_1d(alpha: float) -> float:
    _check(alpha)
    if alpha < 0.5:
        return 1.0 / (1.0 + math.sqrt(1.0 - alpha)) ** 2
    if alpha <= 1.0:
        return 1.0 / (1.0 + math.sqrt(2.0 - 2.0 * alpha))
    return 1.0 / (2.0 * alpha - 1.0)


def lower_r_C(alpha: float, d: int) -> float:
    """lower_1d(alpha)^d; for d = 1 this is lower_1d itself."""
    _check(alpha, d)
    return lower_1d(alpha) ** int(d)


@dataclass(frozen=True)
class BoundsReport:
    alpha: float
    dim: int
    R_F: float
    r_A: float
    r_C: float
    lower_1d: float
    ratio_C: float
    ratio_A: float


def bounds_report(alpha: float, d: int) -> BoundsReport:
    rf = upper_R_F(alpha, d)
    ra = lower_r_A(alpha, d)
    rc = lower_r_C(alpha, d)
    return BoundsReport(float(alpha), int(d), rf, ra, rc, lower_1d(alpha), rc / rf, ra / rf)


def bounds_table(alphas: Iterable[float], dims: Iterable[int]) -> pd.DataFrame:
    rows = [asdict(bounds_report(a, d)) for d in dims for a in alphas]
    return pd.DataFrame(rows).sort_values(["dim", "alpha"], kind="mergesort").reset_index(drop=True)


# ----------------------------- Crossover ----------------------------- #

@dataclass(frozen=True)
class CrossoverResult:
    dim: int
    alpha: float
    boundary: bool
    h: float


def crossover_alpha_C(d: int, tol: float = 1e-12, *, pre_step: float = 1e-3, max_iter: int = 200) -> CrossoverResult:
    """
    Leftmost sign change of h = r_C - r_A on [1/2, 1].

    h >= 0 on the whole pre-grid returns 1/2 flagged as boundary; otherwise the
    bracketing pre-grid cell is refined by bisection.
    """
    _check(0.0, d, min_d=2)
    h = lambda a: lower_r_C(a, d) - lower_r_A(a, d)
    n = int(round(0.5 / pre_step))
    grid = 0.5 + 0.5 * np.arange(n + 1) / n
    signs = np.array([h(a) >= 0.0 for a in grid])
    if signs.all():
        return CrossoverResult(int(d), 0.5, True, h(0.5))
    for k in range(n):
        if signs[k] != signs[k + 1]:
            a, b = float(grid[k]), float(grid[k + 1])
            root = optimize.bisect(h, a, b, xtol=tol, maxiter=max_iter)
            logger.info("crossover d=%d at alpha=%.12f", d, root)
            return CrossoverResult(int(d), float(root), False, h(root))
    # h < 0 throughout: only the branch point alpha = 1 is left
    return CrossoverResult(int(d), 1.0, True, h(1.0))


# ----------------------------- Figure table ----------------------------- #

def alpha_grid(step: float) -> List[float]:
    """0, step, 2 step, ... strictly below 1."""
    if not (0.0 < step <= 0.5):
        raise ValueError(f"alpha step must lie in (0, 0.5], got {step}")
    out, k = [], 0
    while k * step < 1.0 - 1e-12:
        out.append(k * step)
        k += 1
    return out


def figure4_table(d_list: Sequence[int], alphas: Sequence[float]) -> pd.DataFrame:
    """Rows (alpha, d, r_C/R_F, r_A/R_F) sorted by (d, alpha); r_A/R_F is 1/e for alpha < 1."""
    if any(not (0.0 <= a < 1.0) for a in alphas):
        raise ValueError("figure grid must lie in [0, 1)")
    rows = []
    for d in sorted(int(x) for x in d_list):
        for a in sorted(alphas):
            rf = upper_R_F(a, d)
            rows.append({"alpha": float(a), "d": d,
                         "ratio_C": lower_r_C(a, d) / rf, "ratio_A": lower_r_A(a, d) / rf})
    return pd.DataFrame(rows, columns=["alpha", "d", "ratio_C", "ratio_A"])


# ----------------------------- Yamada bound ----------------------------- #

@dataclass(frozen=True)
class YamadaResult:
    alpha: float
    R_Y: float
    R_F: float
    n_max: int
    rho_step: float
    witness_n: Optional[int]
    witness_rho: Optional[float]
    # Yamada inequality alone, without the structure-function condition
    R_Y_interval: float = 1.0
    interval_witness_n: Optional[int] = None


def yamada_upper_1d(alpha: float, n_max: int = 256, rho_step: float = 1e-4, *, atol: float = 1e-12) -> YamadaResult:
    """
    Largest grid rho passing the structure-function condition and the Yamada
    inequality on every interval of length n <= n_max, scanning upward.

    The witness is the first failing (n, rho); n is None when the
    structure-function condition failed first. R_Y_interval repeats the scan
    with the Yamada inequality alone, so for alpha > 1 it shows what the
    interval condition contributes on its own.
    """
    _check(alpha)
    if int(n_max) < 2:
        raise ValueError(f"n_max must be >= 2, got {n_max}")
    steps = int(round(1.0 / rho_step))
    rhos = np.arange(steps + 1) / steps
    ns = np.arange(1, int(n_max) + 1)
    slack = yamada_slack_1d(alpha, rhos[:, None], ns[None, :])
    yam_ok = (slack >= -atol).all(axis=1)
    psd_ok = np.array([psd_margin(RadialSpec(alpha, float(r), 1)) >= -atol for r in rhos])
    ok = yam_ok & psd_ok
    bad = np.flatnonzero(~ok)
    rf = upper_R_F(alpha, 1)

    yam_bad = np.flatnonzero(~yam_ok)
    if yam_bad.size == 0:
        interval = {"R_Y_interval": float(rhos[-1]), "interval_witness_n": None}
    else:
        fy = int(yam_bad[0])
        interval = {
            "R_Y_interval": float(rhos[fy - 1]) if fy > 0 else 0.0,
            "interval_witness_n": int(ns[np.flatnonzero(slack[fy] < -atol)[0]]),
        }

    if bad.size == 0:
        return YamadaResult(float(alpha), float(rhos[-1]), rf, int(n_max), float(rho_step), None, None, **interval)
    first = int(bad[0])
    r_y = float(rhos[first - 1]) if first > 0 else 0.0
    if psd_ok[first] and not yam_ok[first]:
        witness_n = int(ns[np.flatnonzero(slack[first] < -atol)[0]])
    else:
        witness_n = None
    return YamadaResult(float(alpha), r_y, rf, int(n_max), float(rho_step), witness_n, float(rhos[first]),
                        **interval)


def yamada_equality_family(k_max: int = 5, n_max: int = 256, rho_step: float = 1e-4) -> pd.DataFrame:
    """Spot checks of R_Y against R_F at alpha = 1/2 and alpha = (k +- 1)/(2k)."""
    alphas = {0.5}
    for k in range(1, int(k_max) + 1):
        alphas.update({(k - 1) / (2 * k), (k + 1) / (2 * k)})
    rows = []
    for a in sorted(alphas):
        res = yamada_upper_1d(a, n_max, rho_step)
        rows.append({"alpha": a, "R_Y": res.R_Y, "R_F": res.R_F, "gap": res.R_F - res.R_Y})
    return pd.DataFrame(rows, columns=["alpha", "R_Y", "R_F", "gap"])


# --------------------------- Reference values --------------------------- #

@dataclass(frozen=True)
class ReferenceConstants:
    lower_alpha0_1d: float
    upper_alpha0_1d: float


def reference_constants() -> ReferenceConstants:
    """Best known 1D alpha = 0 bounds; annotation only."""
    return ReferenceConstants(0.265, (326.0 - math.sqrt(3115.0)) / 822.0)
