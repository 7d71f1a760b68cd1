"""Spatial discretization, quadrature, interpolation, and norms for 1-D densities.

Densities are sampled at the ``n_cells + 1`` nodes of a uniform grid on
``[lo, hi]`` and extended by zero outside. Node values at both endpoints must
be exactly zero: the grid domain is meant to contain the whole support tube
of the evolution, so every density it carries is compactly supported strictly
inside. Quadrature is composite Simpson, hence ``n_cells`` must be even.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .errors import ZeroMass

#: Recognized norm selectors for :func:`lp_norm`.
NORM_KINDS = ("L2", "H1_seminorm", "W1inf")


def simpson_weights(n_cells: int) -> np.ndarray:
    """Composite Simpson weights for ``n_cells + 1`` nodes (without the dx factor)."""
    if n_cells % 2 != 0 or n_cells <= 0:
        raise ValueError(f"Simpson quadrature needs a positive even cell count, got {n_cells}")
    w = np.ones(n_cells + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def centered_diff(values: np.ndarray, dx: float) -> np.ndarray:
    """First derivative of node data: centered in the interior, one-sided at the ends."""
    d = np.empty_like(values)
    d[1:-1] = (values[2:] - values[:-2]) / (2.0 * dx)
    d[0] = (values[1] - values[0]) / dx
    d[-1] = (values[-1] - values[-2]) / dx
    return d


def _validate_layout(lo: float, hi: float, values: np.ndarray) -> None:
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise ValueError("grid endpoints must be finite")
    if hi <= lo:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    n_cells = values.size - 1
    if n_cells < 2 or n_cells % 2 != 0:
        raise ValueError(f"n_cells must be even and >= 2, got {n_cells}")
    if not np.all(np.isfinite(values)):
        raise ValueError("grid values must be finite")


@dataclass(frozen=True)
class DensityGrid:
    """A nonnegative mass density sampled on a uniform node grid.

    Parameters
    ----------
    lo, hi : float
        Domain endpoints. The domain is expected to contain the full support
        tube of any evolution applied to this density.
    values : ndarray of shape (n_cells + 1,)
        Nonnegative node samples; both endpoint samples must be exactly 0.
    """

    lo: float
    hi: float
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        _validate_layout(self.lo, self.hi, v)
        if np.any(v < 0.0):
            raise ValueError("density values must be nonnegative")
        if v[0] != 0.0 or v[-1] != 0.0:
            raise ValueError("density must vanish at both endpoint nodes (compact support)")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_cells(self) -> int:
        return self.values.size - 1

    @property
    def dx(self) -> float:
        return (self.hi - self.lo) / self.n_cells

    @property
    def x(self) -> np.ndarray:
        """Node coordinates."""
        return np.linspace(self.lo, self.hi, self.values.size)

    def same_grid_as(self, other: "DensityGrid | GradientGrid") -> bool:
        return (
            self.lo == other.lo
            and self.hi == other.hi
            and self.values.size == other.values.size
        )

    def with_values(self, values: np.ndarray) -> "DensityGrid":
        return DensityGrid(self.lo, self.hi, values)

    @classmethod
    def from_callable(
        cls,
        lo: float,
        hi: float,
        n_cells: int,
        fn: Callable[[np.ndarray], np.ndarray],
        normalize: bool = False,
    ) -> "DensityGrid":
        """Sample ``fn`` at the nodes; optionally rescale to unit Simpson mass.

        ``fn`` must vanish at (and outside) the endpoints.
        """
        x = np.linspace(lo, hi, n_cells + 1)
        v = np.asarray(fn(x), dtype=float)
        m = cls(lo, hi, v)
        if normalize:
            total = total_mass(m)
            if total <= 0.0:
                raise ZeroMass("cannot normalize a zero-mass density")
            m = cls(lo, hi, v / total)
        return m


@dataclass(frozen=True)
class GradientGrid:
    """A signed grid function with the same layout as :class:`DensityGrid`.

    Used for Frechet-differential representers paired against densities; the
    values may take any sign and need not vanish at the endpoints.
    """

    lo: float
    hi: float
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        _validate_layout(self.lo, self.hi, v)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_cells(self) -> int:
        return self.values.size - 1

    @property
    def dx(self) -> float:
        return (self.hi - self.lo) / self.n_cells

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.values.size)

    def same_grid_as(self, other: "DensityGrid | GradientGrid") -> bool:
        return (
            self.lo == other.lo
            and self.hi == other.hi
            and self.values.size == other.values.size
        )


def total_mass(m: DensityGrid) -> float:
    """Total mass by composite Simpson quadrature; nonnegative."""
    return float(np.dot(simpson_weights(m.n_cells), m.values) * m.dx)


def mean(m: DensityGrid) -> float:
    """The unnormalized first moment ``integral of x * m(x) dx``.

    For unit-mass densities this is the centroid. Note the same symbol
    conventionally denotes both a density and its mean; here "mean" always
    means this moment.
    """
    if total_mass(m) <= 0.0:
        raise ZeroMass("mean undefined for a zero-mass density")
    return float(np.dot(simpson_weights(m.n_cells), m.x * m.values) * m.dx)


def lp_norm(m: "DensityGrid | GradientGrid", which: str) -> float:
    """Norm of the node data: ``L2``, ``H1_seminorm``, or ``W1inf``.

    The derivative entering the H1 seminorm and the W1inf norm is the
    centered difference of node values (one-sided at the endpoints). W1inf is
    ``max |values| + max |derivative|``.
    """
    if which not in NORM_KINDS:
        raise ValueError(f"unknown norm {which!r}; expected one of {NORM_KINDS}")
    v = m.values
    if which == "L2":
        return float(np.sqrt(np.dot(simpson_weights(m.n_cells), v * v) * m.dx))
    d = centered_diff(v, m.dx)
    if which == "H1_seminorm":
        return float(np.sqrt(np.dot(simpson_weights(m.n_cells), d * d) * m.dx))
    return float(np.max(np.abs(v)) + np.max(np.abs(d)))


def h1_norm(m: "DensityGrid | GradientGrid") -> float:
    """Full H1 norm: sqrt(L2^2 + seminorm^2)."""
    return float(np.hypot(lp_norm(m, "L2"), lp_norm(m, "H1_seminorm")))


def sample_at(m: "DensityGrid | GradientGrid", x: "float | np.ndarray") -> "float | np.ndarray":
    """Linear interpolation between neighboring nodes; 0 outside [lo, hi]."""
    out = np.interp(x, m.x, m.values, left=0.0, right=0.0)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out


def support_interval(m: DensityGrid, rel_threshold: float = 0.0) -> "tuple[float, float] | None":
    """Smallest node interval containing all values above the threshold.

    The threshold is relative to the max value; 0 selects strictly positive
    nodes. Returns None for an (effectively) zero density.
    """
    peak = float(np.max(m.values))
    if peak <= 0.0:
        return None
    idx = np.nonzero(m.values > rel_threshold * peak)[0]
    if idx.size == 0:
        return None
    x = m.x
    return float(x[idx[0]]), float(x[idx[-1]])


def density_to_csv(m: "DensityGrid | GradientGrid", path: "str | Path") -> None:
    """Write ``x,value`` rows at full precision (17 significant digits)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,value\n")
        for xi, vi in zip(m.x, m.values):
            fh.write(f"{xi:.17g},{vi:.17g}\n")


def density_from_csv(path: "str | Path") -> DensityGrid:
    """Read a density written by :func:`density_to_csv` (uniform grid assumed)."""
    rows = np.loadtxt(path, delimiter=",", skiprows=1)
    if rows.ndim != 2 or rows.shape[1] != 2 or rows.shape[0] < 3:
        raise ValueError(f"{path}: expected 'x,value' rows")
    x, v = rows[:, 0], rows[:, 1]
    dxs = np.diff(x)
    if not np.allclose(dxs, dxs[0], rtol=1e-12, atol=1e-15):
        raise ValueError(f"{path}: grid nodes are not uniformly spaced")
    return DensityGrid(float(x[0]), float(x[-1]), v)


def window_integral(m: "DensityGrid | GradientGrid", a: float, b: float) -> float:
    """Integral of the node data over [a, b] inside the grid.

    Whole node panels are summed with composite Simpson; the partial end
    cells (and any leftover odd cell) integrate the linear interpolant
    exactly. Outside [lo, hi] the density is zero.
    """
    if b <= a:
        return 0.0
    a = max(a, m.lo)
    b = min(b, m.hi)
    if b <= a:
        return 0.0
    x, v, dx = m.x, m.values, m.dx

    def _linear_piece(u0: float, u1: float) -> float:
        # exact integral of the interpolant over [u0, u1] within one cell
        return 0.5 * (sample_at(m, u0) + sample_at(m, u1)) * (u1 - u0)

    i0 = int(np.ceil((a - m.lo) / dx - 1e-12))
    i1 = int(np.floor((b - m.lo) / dx + 1e-12))
    if i1 <= i0:
        return float(_linear_piece(a, b))
    total = _linear_piece(a, x[i0]) + _linear_piece(x[i1], b)
    n_panels = i1 - i0
    if n_panels % 2 == 1:
        total += _linear_piece(x[i0], x[i0 + 1])
        i0 += 1
        n_panels -= 1
    if n_panels > 0:
        w = simpson_weights(n_panels)
        total += float(np.dot(w, v[i0 : i1 + 1]) * dx)
    return float(total)


def require_same_grid(*grids: Iterable) -> None:
    """Raise :class:`~masschase.errors.GridMismatch` unless all layouts agree."""
    from .errors import GridMismatch

    first = grids[0]
    for g in grids[1:]:
        if not first.same_grid_as(g):
            raise GridMismatch(
                f"grids differ: [{first.lo},{first.hi}]x{first.n_cells} vs [{g.lo},{g.hi}]x{g.n_cells}"
            )
