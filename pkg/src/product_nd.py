# src/product_nd.py
"""
Product construction on Z^d
---------------------------
P_i = B^(1)_i ... B^(d)_i where, for every line parallel to axis m, the values
of B^(m) along that line form an independent copy of a 1D basic process.
With a 1D process of density gamma and radial distribution g^(alpha) the
product realises (rho = gamma^d, g^(alpha)).

Axes are numbered 1..d in the public API; B^(m) runs along axis m.
"""

from __future__ import annotations
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .basic1d import BlockFactorProcess1D, CorrelationProfile1D, profile, sample_path
from .errors import DimensionMismatch, LatticeError, NotGAlphaProfile, RecordParseError
from .lattice_core import BoxRegion, LatticeVector, RadialSpec, _as_vector

__all__ = [
    "ProductProcessND", "FieldSample", "VerificationReport", "CaseRow",
    "realize", "axis_pair_expectation", "exact_pair_expectation",
    "verify_against_target", "case_table", "sample_box",
    "field_to_text", "field_from_text",
]

logger = logging.getLogger(__name__)

PROFILE_ATOL = 1e-9


@dataclass(frozen=True)
class ProductProcessND:
    dim: int
    axis_processes: Tuple[BlockFactorProcess1D, ...]
    alpha: float
    profiles: Tuple[CorrelationProfile1D, ...] = field(repr=False, compare=False, default=())

    def __post_init__(self):
        if int(self.dim) < 2:
            raise LatticeError(f"product construction needs d >= 2, got {self.dim}")
        if len(self.axis_processes) != self.dim:
            raise DimensionMismatch(self.dim, len(self.axis_processes), "axis process list")
        profs = self.profiles or tuple(profile(p) for p in self.axis_processes)
        ref = profs[0]
        for pr in profs[1:]:
            same = abs(pr.density - ref.density) <= 1e-12 and all(
                abs(pr.lag(k) - ref.lag(k)) <= 1e-12
                for k in range(1, max(pr.window, ref.window) + 1)
            )
            if not same:
                raise LatticeError("axis processes must share one (gamma, lag) profile")
        object.__setattr__(self, "profiles", profs)

    @property
    def gamma(self) -> float:
        return self.profiles[0].density

    @property
    def rho(self) -> float:
        return self.gamma ** self.dim

    @property
    def target(self) -> RadialSpec:
        return RadialSpec(alpha=self.alpha, rho=min(1.0, max(0.0, self.rho)), dim=self.dim)


@dataclass
class FieldSample:
    box: BoxRegion
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.int8)
        if vals.shape != self.box.shape:
            raise LatticeError(f"field sample has shape {vals.shape}, box expects {self.box.shape}")
        if vals.size and (vals.min() < 0 or vals.max() > 1):
            raise LatticeError("field values must be 0/1")
        self.values = vals


def realize(proc1d: BlockFactorProcess1D, d: int, *, alpha: Optional[float] = None) -> ProductProcessND:
    """
    Product process from d copies of `proc1d` with independent randomness.

    The realised alpha is lag1/gamma^2 of the 1D profile; `alpha` only
    labels the empty process, where that ratio is undefined.
    """
    d = int(d)
    if d < 2:
        raise LatticeError(f"product construction needs d >= 2, got {d}")
    prof = profile(proc1d)
    if prof.residual > PROFILE_ATOL:
        raise NotGAlphaProfile(
            f"lags 2..{proc1d.window - 1} deviate from gamma^2 by {prof.residual:.3e}"
        )
    if prof.alpha_hat is not None:
        a = prof.alpha_hat
    elif alpha is not None:
        a = float(alpha)
    else:
        a = 1.0
    return ProductProcessND(dim=d, axis_processes=(proc1d,) * d, alpha=a, profiles=(prof,) * d)


# ------------------------- Exact expectations ------------------------- #

def _check_pair(proc: ProductProcessND, i, j) -> Tuple[LatticeVector, LatticeVector]:
    vi, vj = _as_vector(i), _as_vector(j)
    for v in (vi, vj):
        if v.dim != proc.dim:
            raise DimensionMismatch(proc.dim, v.dim)
    return vi, vj


def axis_pair_expectation(proc: ProductProcessND, m: int, i, j) -> float:
    """<B^(m)_i B^(m)_j>: gamma^2 on different lines, else the 1D lag value."""
    vi, vj = _check_pair(proc, i, j)
    if not (1 <= m <= proc.dim):
        raise LatticeError(f"axis index must lie in 1..{proc.dim}, got {m}")
    ax = m - 1
    prof = proc.profiles[ax]
    off_axis_differs = any(a != b for k, (a, b) in enumerate(zip(vi.coords, vj.coords)) if k != ax)
    if off_axis_differs:
        return prof.density ** 2
    return prof.lag(abs(vi.coords[ax] - vj.coords[ax]))


def exact_pair_expectation(proc: ProductProcessND, i, j) -> float:
    vi, vj = _check_pair(proc, i, j)
    return math.prod(axis_pair_expectation(proc, m, vi, vj) for m in range(1, proc.dim + 1))


def _displacements(dim: int, radius: int):
    for x in itertools.product(range(-radius, radius + 1), repeat=dim):
        yield LatticeVector(x)


@dataclass
class VerificationReport:
    dim: int
    radius: int
    rho: float
    alpha: float
    max_deviation: float
    worst_displacement: Tuple[int, ...]
    classes: Dict[Tuple[int, ...], Tuple[float, float]]
    mismatches: List[Tuple[int, ...]]

    @property
    def passed(self) -> bool:
        return not self.mismatches


def verify_against_target(proc: ProductProcessND, radius: int = 3, *, atol: float = 1e-12) -> VerificationReport:
    """Product formula against rho^2 g^(alpha)(x) for every x in the sup-norm ball."""
    if int(radius) < 2:
        raise LatticeError(f"radius must be >= 2, got {radius}")
    spec = proc.target
    origin = LatticeVector.zero(proc.dim)
    worst, worst_x = -1.0, origin.coords
    classes: Dict[Tuple[int, ...], Tuple[float, float]] = {}
    mismatches: List[Tuple[int, ...]] = []
    for x in _displacements(proc.dim, int(radius)):
        value = exact_pair_expectation(proc, origin, x)
        target = spec.pair_target(x)
        dev = abs(value - target)
        if dev > worst:
            worst, worst_x = dev, x.coords
        key = tuple(sorted(abs(c) for c in x.coords))
        if key not in classes:
            classes[key] = (value, target)
        if dev > atol and key not in mismatches:
            mismatches.append(key)
    logger.info("verified %d displacements, max deviation %.3e", (2 * radius + 1) ** proc.dim, worst)
    return VerificationReport(proc.dim, int(radius), spec.rho, spec.alpha, worst, worst_x, classes, mismatches)


@dataclass(frozen=True)
class CaseRow:
    case: str
    displacement: Tuple[int, ...]
    value: float
    target: float


def case_table(proc: ProductProcessND) -> List[CaseRow]:
    """The four displacement cases: same site, nearest neighbour per axis, diagonal, distance two."""
    d = proc.dim
    zero = (0,) * d
    rows = [("a) same site", zero)]
    for m in range(d):
        unit = tuple(1 if k == m else 0 for k in range(d))
        rows.append((f"b) nearest neighbour, axis {m + 1}", unit))
    rows.append(("c) diagonal", (1, 1) + (0,) * (d - 2)))
    rows.append(("d) distance two, axis 1", (2,) + (0,) * (d - 1)))
    spec = proc.target
    return [CaseRow(label, x, exact_pair_expectation(proc, zero, x), spec.pair_target(x)) for label, x in rows]


# ----------------------------- Sampling ----------------------------- #

def _axis_field(proc1d: BlockFactorProcess1D, shape: Tuple[int, ...], axis: int, seed: int) -> np.ndarray:
    other = tuple(s for k, s in enumerate(shape) if k != axis)
    n_lines = math.prod(other)
    L = shape[axis]
    lines = np.empty((n_lines, L), dtype=np.int8)
    for line in range(n_lines):
        ss = np.random.SeedSequence([int(seed), axis, line])
        lines[line] = sample_path(proc1d, L, ss)
    return np.moveaxis(lines.reshape(other + (L,)), -1, axis)


def sample_box(proc: ProductProcessND, box: BoxRegion, seed: int) -> FieldSample:
    """
    Sitewise product of d axis fields. Each line along axis m is an
    independent 1D path whose stream is keyed by (seed, m, line index).
    """
    if box.dim != proc.dim:
        raise DimensionMismatch(proc.dim, box.dim, "box")
    values = np.ones(box.shape, dtype=np.int8)
    for axis, proc1d in enumerate(proc.axis_processes):
        values *= _axis_field(proc1d, box.shape, axis, seed)
    return FieldSample(box, values)


# ----------------------------- Text form ----------------------------- #

def field_to_text(sample: FieldSample, header: Sequence[str] = ()) -> str:
    lines = [f"# {h}" for h in header]
    lines.append(" ".join(str(v) for v in (sample.box.dim,) + sample.box.side_lengths))
    rows = sample.values.reshape(-1, sample.box.side_lengths[-1])
    lines.extend("".join("1" if v else "0" for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def field_from_text(text: str) -> FieldSample:
    rows = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    rows = [(i, ln) for i, ln in rows if ln and not ln.startswith("#")]
    if not rows:
        raise RecordParseError("empty field sample")
    line_no, head = rows[0]
    try:
        nums = [int(t) for t in head.split()]
    except ValueError:
        raise RecordParseError("expected '<d> <L1> ... <Ld>'", line_no) from None
    if len(nums) < 2 or nums[0] != len(nums) - 1:
        raise RecordParseError("header dimension does not match side lengths", line_no)
    sides = tuple(nums[1:])
    box = BoxRegion(sides)
    n_rows = box.site_count // sides[-1]
    body = rows[1:]
    if len(body) != n_rows:
        raise RecordParseError(f"expected {n_rows} rows, found {len(body)}")
    data = np.empty((n_rows, sides[-1]), dtype=np.int8)
    for r, (line_no, ln) in enumerate(body):
        if len(ln) != sides[-1] or set(ln) - {"0", "1"}:
            raise RecordParseError("row must hold 0/1 characters of the last side length", line_no)
        data[r] = np.frombuffer(ln.encode(), dtype=np.uint8) - ord("0")
    return FieldSample(box, data.reshape(sides))
