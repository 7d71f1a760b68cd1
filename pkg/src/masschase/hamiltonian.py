"""Transport pairings, the min-max Hamiltonian, and residual checks.

The pairing of a gradient representer p with the transport term div(f*m) is
evaluated in integration-by-parts form, -integral f*m*p', which is exact for
compactly supported m. Discretely it uses trapezoid weights with centered
differences: that pair satisfies summation by parts exactly, so the two
closed-form candidate values below have Isaacs residuals at machine
precision instead of quadrature-noise level. The direct form (differentiate
the product f*m) exists behind a flag for consistency checks only, since it
amplifies grid noise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .controls import ControlDictionary, ControlField
from .cost import RunningCost, final_cost, psi1, running_cost, running_cost_modulus
from .errors import GridMismatch
from .grid import DensityGrid, GradientGrid, centered_diff, lp_norm, mean, require_same_grid


def _trapz_weights(n_cells: int, dx: float) -> np.ndarray:
    w = np.full(n_cells + 1, dx)
    w[0] = w[-1] = 0.5 * dx
    return w


def transport_pairing(
    p: GradientGrid,
    f: ControlField,
    m: DensityGrid,
    sigma: float = 0.0,
    form: str = "by_parts",
) -> float:
    """Pairing of p with the (possibly diffusive) transport operator on m.

    Returns -integral f*m*p' dx, plus -sigma * integral m'' * p dx when
    sigma > 0. The density must vanish at the grid boundary for the
    integration-by-parts form to hold.
    """
    require_same_grid(p, m)
    x = m.x
    w = _trapz_weights(m.n_cells, m.dx)
    fv = f.value(x)
    if form == "by_parts":
        val = -float(np.dot(w, fv * m.values * centered_diff(p.values, p.dx)))
    elif form == "direct":
        val = float(np.dot(w, p.values * centered_diff(fv * m.values, m.dx)))
    else:
        raise ValueError(f"unknown pairing form {form!r}")
    if sigma > 0.0:
        m2 = np.zeros_like(m.values)
        m2[1:-1] = (m.values[2:] - 2.0 * m.values[1:-1] + m.values[:-2]) / m.dx**2
        val -= sigma * float(np.dot(w, m2 * p.values))
    return val


@dataclass(frozen=True)
class HamiltonianResult:
    """Value and optimizer bookkeeping of one min-max evaluation.

    ``matrix[b][a]`` holds the inner objective; ties in either optimization
    break toward the lowest dictionary index, so results are deterministic.
    """

    value: float
    argmin_b: int
    argmax_a_per_b: "tuple[int, ...]"
    matrix: "tuple[tuple[float, ...], ...]"

    def to_json(self) -> str:
        return json.dumps(
            {
                "value": self.value,
                "argmin_b": self.argmin_b,
                "argmax_a_per_b": list(self.argmax_a_per_b),
                "matrix": [list(row) for row in self.matrix],
            }
        )


def hamiltonian_minmax(
    mX: DensityGrid,
    mY: DensityGrid,
    t: float,
    p: GradientGrid,
    q: GradientGrid,
    dictA: ControlDictionary,
    dictB: ControlDictionary,
    rc: RunningCost,
    sigma: float = 0.0,
) -> HamiltonianResult:
    """Exact min over the b-dictionary of max over the a-dictionary.

    The objective is pairing(p, a, mX) + pairing(q, b, mY) - running cost.
    """
    tube = (mX.lo, mX.hi)
    pair_a = [transport_pairing(p, a, mX, sigma) for a in dictA.fields]
    pair_b = [transport_pairing(q, b, mY, sigma) for b in dictB.fields]
    matrix = []
    argmax_per_b = []
    inner = []
    for bi, b in enumerate(dictB.fields):
        row = []
        for ai, a in enumerate(dictA.fields):
            row.append(pair_a[ai] + pair_b[bi] - running_cost(rc, mX, mY, t, a, b, tube))
        best_a = int(np.argmax(row))
        argmax_per_b.append(best_a)
        inner.append(row[best_a])
        matrix.append(tuple(row))
    best_b = int(np.argmin(inner))
    return HamiltonianResult(
        value=float(inner[best_b]),
        argmin_b=best_b,
        argmax_a_per_b=tuple(argmax_per_b),
        matrix=tuple(matrix),
    )


class Psi3Analytic:
    """Closed-form candidate for the mean-gap game: V = (muX - muY)^2.

    Time-independent; its density differentials are the linear representers
    2*(muX - muY)*x and -2*(muX - muY)*x sampled on the grid.
    """

    def value(self, mX: DensityGrid, mY: DensityGrid, t: float) -> float:
        return (mean(mX) - mean(mY)) ** 2

    def time_derivative(self, mX: DensityGrid, mY: DensityGrid, t: float) -> float:
        return 0.0

    def grad_x(self, mX: DensityGrid, mY: DensityGrid, t: float) -> GradientGrid:
        gap = mean(mX) - mean(mY)
        return GradientGrid(mX.lo, mX.hi, 2.0 * gap * mX.x)

    def grad_y(self, mX: DensityGrid, mY: DensityGrid, t: float) -> GradientGrid:
        gap = mean(mX) - mean(mY)
        return GradientGrid(mY.lo, mY.hi, -2.0 * gap * mY.x)


class Psi1Analytic:
    """Closed-form candidate for the overlap game: V = integral mX*mY.

    Time-independent; the differential in each density is the other density.
    """

    def value(self, mX: DensityGrid, mY: DensityGrid, t: float) -> float:
        return psi1(mX, mY)

    def time_derivative(self, mX: DensityGrid, mY: DensityGrid, t: float) -> float:
        return 0.0

    def grad_x(self, mX: DensityGrid, mY: DensityGrid, t: float) -> GradientGrid:
        return GradientGrid(mY.lo, mY.hi, mY.values)

    def grad_y(self, mX: DensityGrid, mY: DensityGrid, t: float) -> GradientGrid:
        return GradientGrid(mX.lo, mX.hi, mX.values)


class TabulatedCandidate:
    """Candidate backed by a solved value table of a reduced game.

    Valid only for constant-control reduced games with unit masses: there a
    density state is a pure translate of the initial one, so its offset is
    recovered from the mean shift, and for constant fields the pairing with
    any representer is determined by the offset-derivative of the table
    value. The linear representer (dV/dh) * x reproduces exactly that
    pairing. Time derivatives come from one-sided level differencing, so
    residuals of an unconverged table are O(dt) by construction: they are
    meant to be reported, not asserted small.
    """

    def __init__(self, table, spec, use_lower: bool = True):
        from .game import GameSpec, ValueTable  # deferred to avoid an import cycle

        self.table = table
        self.spec = spec
        self.use_lower = use_lower
        self._mu_x0 = mean(spec.mX0)
        self._mu_y0 = mean(spec.mY0)

    def _offsets(self, mX: DensityGrid, mY: DensityGrid) -> "tuple[float, float]":
        return mean(mX) - self._mu_x0, mean(mY) - self._mu_y0

    def _level_near(self, t: float) -> int:
        times = self.table.times
        return int(np.clip(np.searchsorted(times, t + 1e-12) - 1, 0, times.size - 2))

    def _v(self, level: int, hX: float, hY: float) -> float:
        which = "lower" if self.use_lower else "upper"
        return self.table.value_at(which, level, hX, hY)

    def value(self, mX: DensityGrid, mY: DensityGrid, t: float) -> float:
        hX, hY = self._offsets(mX, mY)
        return self._v(self._level_near(t), hX, hY)

    def time_derivative(self, mX: DensityGrid, mY: DensityGrid, t: float) -> float:
        hX, hY = self._offsets(mX, mY)
        k = self._level_near(t)
        dt = self.table.times[k + 1] - self.table.times[k]
        return (self._v(k + 1, hX, hY) - self._v(k, hX, hY)) / dt

    def grad_x(self, mX: DensityGrid, mY: DensityGrid, t: float) -> GradientGrid:
        hX, hY = self._offsets(mX, mY)
        k = self._level_near(t)
        dh = self.table.dh_x
        dv = (self._v(k, hX + dh, hY) - self._v(k, hX - dh, hY)) / (2.0 * dh)
        return GradientGrid(mX.lo, mX.hi, dv * mX.x)

    def grad_y(self, mX: DensityGrid, mY: DensityGrid, t: float) -> GradientGrid:
        hX, hY = self._offsets(mX, mY)
        k = self._level_near(t)
        dh = self.table.dh_y
        dv = (self._v(k, hX, hY + dh) - self._v(k, hX, hY - dh)) / (2.0 * dh)
        return GradientGrid(mY.lo, mY.hi, dv * mY.x)


def isaacs_residual(
    candidate,
    mX: DensityGrid,
    mY: DensityGrid,
    t: float,
    dictA: ControlDictionary,
    dictB: ControlDictionary,
    rc: RunningCost,
    sigma: float = 0.0,
) -> float:
    """-V_t + H(mX, mY, t, D_X V, D_Y V) for a candidate value function.

    With a zero running cost the min-max and the separate sup/inf split
    agree because the objective is separable in the two controls.
    """
    p = candidate.grad_x(mX, mY, t)
    q = candidate.grad_y(mX, mY, t)
    h = hamiltonian_minmax(mX, mY, t, p, q, dictA, dictB, rc, sigma)
    return -candidate.time_derivative(mX, mY, t) + h.value


@dataclass(frozen=True)
class GapCheck:
    lhs: float
    rhs: float
    passed: bool


def continuity_gap_check(
    m1X: DensityGrid,
    m1Y: DensityGrid,
    t1: float,
    m2X: DensityGrid,
    m2Y: DensityGrid,
    t2: float,
    zeta: float,
    xi: float,
    dictA: ControlDictionary,
    dictB: ControlDictionary,
    rc: RunningCost,
    M_bound: float,
) -> GapCheck:
    """Hamiltonian continuity gap at the doubling-of-variables arguments.

    Evaluates |H(state1, p, q) - H(state2, p, q)| with the specific
    representers p = 2*(m1X - m2X)/zeta^2 and q = 2*(m1Y - m2Y)/xi^2, and
    compares against M_bound times the squared L2 distances (scaled by the
    same parameters) plus the running-cost modulus term, which is zero for
    both built-in running costs. A small absolute slack absorbs the
    quadrature mismatch between the two sides.
    """
    if zeta <= 0 or xi <= 0:
        raise ValueError("zeta and xi must be positive")
    require_same_grid(m1X, m2X)
    require_same_grid(m1Y, m2Y)
    p = GradientGrid(m1X.lo, m1X.hi, 2.0 * (m1X.values - m2X.values) / zeta**2)
    q = GradientGrid(m1Y.lo, m1Y.hi, 2.0 * (m1Y.values - m2Y.values) / xi**2)
    h1 = hamiltonian_minmax(m1X, m1Y, t1, p, q, dictA, dictB, rc).value
    h2 = hamiltonian_minmax(m2X, m2Y, t2, p, q, dictA, dictB, rc).value
    lhs = abs(h1 - h2)
    dX = GradientGrid(m1X.lo, m1X.hi, m1X.values - m2X.values)
    dY = GradientGrid(m1Y.lo, m1Y.hi, m1Y.values - m2Y.values)
    rhs = M_bound * (
        lp_norm(dX, "L2") ** 2 / zeta**2 + lp_norm(dY, "L2") ** 2 / xi**2
    ) + running_cost_modulus(rc)
    return GapCheck(lhs=lhs, rhs=rhs, passed=lhs <= rhs + 1e-6)
