# src/lattice_core.py
"""
Target correlation structure on Z^d
-----------------------------------
The pair (rho, g^(alpha)): density rho, radial distribution 0 on-site, alpha at
the 2d nearest neighbours and 1 beyond. Houses the structure function and the
two necessary conditions used by the bounds: non-negativity of the structure
function and the Yamada variance inequality on finite boxes.
"""

from __future__ import annotations
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple, Union

import numpy as np

from .errors import DimensionMismatch, LatticeError

__all__ = [
    "LatticeVector", "RadialSpec", "BoxRegion", "WaveVector",
    "eval_g_alpha", "eval_f_alpha", "max_f_alpha", "eval_structure_function",
    "psd_margin", "min_structure_function", "nearest_neighbor_pairs",
    "number_variance", "yamada_holds", "yamada_slack_1d",
]


# ----------------------------- Types ----------------------------- #

@dataclass(frozen=True)
class LatticeVector:
    coords: Tuple[int, ...]

    def __post_init__(self):
        coords = tuple(int(c) for c in self.coords)
        if len(coords) < 1:
            raise LatticeError("lattice vectors need dimension >= 1")
        object.__setattr__(self, "coords", coords)

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def norm2(self) -> int:
        """Squared Euclidean norm, exact integer."""
        return sum(c * c for c in self.coords)

    @property
    def norm(self) -> float:
        return math.sqrt(self.norm2)

    def __neg__(self) -> "LatticeVector":
        return LatticeVector(tuple(-c for c in self.coords))

    def __sub__(self, other: "LatticeVector") -> "LatticeVector":
        if other.dim != self.dim:
            raise DimensionMismatch(self.dim, other.dim)
        return LatticeVector(tuple(a - b for a, b in zip(self.coords, other.coords)))

    @classmethod
    def zero(cls, dim: int) -> "LatticeVector":
        return cls((0,) * int(dim))


@dataclass(frozen=True)
class RadialSpec:
    alpha: float
    rho: float
    dim: int

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha >= 0.0):
            raise LatticeError(f"alpha must be >= 0, got {self.alpha}")
        if not (0.0 <= self.rho <= 1.0):
            raise LatticeError(f"rho must lie in [0, 1], got {self.rho}")
        if int(self.dim) < 1:
            raise LatticeError(f"dim must be >= 1, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))

    def pair_target(self, x: "LatticeVector | Sequence[int]") -> float:
        """<P_i P_{i+x}>: rho on-site, rho^2 g^(alpha)(x) elsewhere."""
        v = _as_vector(x)
        if v.dim != self.dim:
            raise DimensionMismatch(self.dim, v.dim)
        if v.norm2 == 0:
            return float(self.rho)
        return float(self.rho) ** 2 * eval_g_alpha(self.alpha, v)


@dataclass(frozen=True)
class BoxRegion:
    side_lengths: Tuple[int, ...]
    origin: LatticeVector | None = None

    def __post_init__(self):
        sides = tuple(int(s) for s in self.side_lengths)
        if len(sides) < 1:
            raise LatticeError("boxes need dimension >= 1")
        if any(s < 1 for s in sides):
            raise LatticeError(f"side lengths must be >= 1, got {sides}")
        object.__setattr__(self, "side_lengths", sides)
        if self.origin is None:
            object.__setattr__(self, "origin", LatticeVector.zero(len(sides)))
        elif self.origin.dim != len(sides):
            raise DimensionMismatch(len(sides), self.origin.dim, "box origin")

    @property
    def dim(self) -> int:
        return len(self.side_lengths)

    @property
    def site_count(self) -> int:
        return math.prod(self.side_lengths)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.side_lengths

    def shrink(self, margin: int) -> "BoxRegion":
        """Interior core: the box with `margin` sites removed on every face."""
        sides = tuple(s - 2 * int(margin) for s in self.side_lengths)
        if any(s < 1 for s in sides):
            raise LatticeError(f"box {self.side_lengths} has no interior at margin {margin}")
        origin = LatticeVector(tuple(c + int(margin) for c in self.origin.coords))
        return BoxRegion(sides, origin)

    @classmethod
    def interval(cls, n: int) -> "BoxRegion":
        return cls((int(n),))


@dataclass(frozen=True)
class WaveVector:
    components: Tuple[float, ...]

    def __post_init__(self):
        comps = tuple(float(c) for c in self.components)
        if len(comps) < 1:
            raise LatticeError("wave vectors need dimension >= 1")
        if not all(math.isfinite(c) for c in comps):
            raise LatticeError(f"wave vector components must be finite, got {comps}")
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return len(self.components)


def _as_vector(x: Union[LatticeVector, Iterable[int]]) -> LatticeVector:
    return x if isinstance(x, LatticeVector) else LatticeVector(tuple(x))


def _as_wave(k: Union[WaveVector, Iterable[float]]) -> WaveVector:
    return k if isinstance(k, WaveVector) else WaveVector(tuple(k))


# --------------------------- g and f_alpha --------------------------- #

def eval_g_alpha(alpha: float, x: Union[LatticeVector, Sequence[int]]) -> float:
    if alpha < 0:
        raise LatticeError(f"alpha must be >= 0, got {alpha}")
    n2 = _as_vector(x).norm2
    if n2 == 0:
        return 0.0
    if n2 == 1:
        return float(alpha)
    return 1.0


def eval_f_alpha(alpha: float, k: Union[WaveVector, Sequence[float], np.ndarray]):
    """
    f_alpha(k) = 1 - 2(alpha-1) * sum_j cos(k_j).

    Accepts a single wave vector (returns float) or an array whose last axis
    holds the d components (returns an array over the leading axes).
    """
    if isinstance(k, WaveVector):
        return float(1.0 - 2.0 * (alpha - 1.0) * sum(math.cos(c) for c in k.components))
    arr = np.asarray(k, dtype=float)
    if arr.ndim == 1:
        return eval_f_alpha(alpha, WaveVector(tuple(arr)))
    return 1.0 - 2.0 * (alpha - 1.0) * np.cos(arr).sum(axis=-1)


def max_f_alpha(alpha: float, d: int) -> float:
    """Maximum of f_alpha over R^d: at k=0 for alpha<1, at (pi,...,pi) for alpha>1."""
    return 1.0 + 2.0 * int(d) * abs(1.0 - float(alpha))


def eval_structure_function(spec: RadialSpec, k: Union[WaveVector, Sequence[float], np.ndarray]):
    """S(k) = rho [1 - rho f_alpha(k)]; arrays as in eval_f_alpha."""
    if isinstance(k, WaveVector) or np.ndim(k) == 1:
        kv = _as_wave(k)
        if kv.dim != spec.dim:
            raise DimensionMismatch(spec.dim, kv.dim, "wave vector")
        return float(spec.rho * (1.0 - spec.rho * eval_f_alpha(spec.alpha, kv)))
    arr = np.asarray(k, dtype=float)
    if arr.shape[-1] != spec.dim:
        raise DimensionMismatch(spec.dim, arr.shape[-1], "wave vector")
    return spec.rho * (1.0 - spec.rho * eval_f_alpha(spec.alpha, arr))


def psd_margin(spec: RadialSpec) -> float:
    """R_F(alpha, d) - rho; non-negative iff the structure function is non-negative everywhere."""
    return 1.0 / max_f_alpha(spec.alpha, spec.dim) - float(spec.rho)


def _axis_grid(n_grid: int, refine: int) -> np.ndarray:
    base = np.linspace(-np.pi, np.pi, int(n_grid))
    h = 2.0 * np.pi / max(int(n_grid) - 1, 1)
    near0 = np.linspace(-h, h, int(refine))
    nearpi = np.concatenate([np.linspace(np.pi - h, np.pi, int(refine)),
                             np.linspace(-np.pi, -np.pi + h, int(refine))])
    return np.unique(np.concatenate([base, near0, nearpi, [0.0, np.pi]]))


def min_structure_function(spec: RadialSpec, n_grid: int = 65, refine: int = 33) -> Tuple[float, WaveVector]:
    """
    Grid minimum of S(k), refined near k=0 and k=(pi,...,pi).

    f_alpha is a sum of per-axis terms, so the minimum over the product grid
    is attained where every component sits at the per-axis extremum; the
    full product grid is still evaluated for d <= 3 as a direct check.
    """
    axis = _axis_grid(n_grid, refine)
    if spec.dim <= 3:
        mesh = np.stack(np.meshgrid(*([axis] * spec.dim), indexing="ij"), axis=-1)
        vals = eval_structure_function(spec, mesh)
        flat = int(np.argmin(vals))
        idx = np.unravel_index(flat, vals.shape)
        return float(vals[idx]), WaveVector(tuple(mesh[idx]))
    # separable: pick the per-axis cosine extremum that maximises f_alpha
    cos_pick = axis[np.argmax(-(spec.alpha - 1.0) * np.cos(axis))]
    k = WaveVector((float(cos_pick),) * spec.dim)
    return eval_structure_function(spec, k), k


# --------------------------- Yamada check --------------------------- #

def nearest_neighbor_pairs(box: BoxRegion) -> int:
    """Unordered nearest-neighbour pairs inside the box: sum_m (L_m - 1) prod_{m'!=m} L_m'."""
    sides = box.side_lengths
    total = 0
    for m, L in enumerate(sides):
        rest = math.prod(s for j, s in enumerate(sides) if j != m)
        total += (L - 1) * rest
    return total


def number_variance(spec: RadialSpec, box: BoxRegion) -> float:
    """
    Var(N_box) = rho|box| + rho^2 sum_{x,y in box} (g(x-y) - 1)
               = rho|box|(1 - rho) + 2 rho^2 (alpha - 1) NN(box).

    The double sum includes the diagonal, where g(0) - 1 = -1.
    """
    if box.dim != spec.dim:
        raise DimensionMismatch(spec.dim, box.dim, "box")
    n = box.site_count
    nn = nearest_neighbor_pairs(box)
    rho = float(spec.rho)
    return rho * n * (1.0 - rho) + 2.0 * rho * rho * (spec.alpha - 1.0) * nn


def yamada_holds(spec: RadialSpec, box: BoxRegion, *, atol: float = 1e-12) -> bool:
    """Var(N_box) >= theta(1 - theta) with theta the fractional part of rho|box|."""
    mean = float(spec.rho) * box.site_count
    theta = mean - math.floor(mean)
    return number_variance(spec, box) >= theta * (1.0 - theta) - atol


def yamada_slack_1d(alpha: float, rho, n):
    """
    Var(N) - theta(1 - theta) for 1D intervals of length n, broadcast over rho and n.

    Same closed form as number_variance with NN = n - 1.
    """
    rho = np.asarray(rho, dtype=float)
    n = np.asarray(n, dtype=float)
    var = rho * n * (1.0 - rho) + 2.0 * rho * rho * (alpha - 1.0) * (n - 1.0)
    mean = rho * n
    theta = mean - np.floor(mean)
    return var - theta * (1.0 - theta)
