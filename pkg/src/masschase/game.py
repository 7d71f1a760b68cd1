"""Discrete-time lower/upper game values on the rigid-translation state space.

When every dictionary field is spatially constant, transport is a pure
translation and the infinite-dimensional density state collapses to a pair
of offsets (hX, hY). The backward recursion follows the step-local strategy
discretization: the minimizer's step strategy is a map from the opponent's
choice to its own, and optimizing over such maps turns the lower value into
a max-over-b of min-over-a at every step (the upper value is the mirror
image, min-over-a of max-over-b). Ties break toward the lowest dictionary
index.

The value table lives on per-axis uniform offset grids sized so that every
offset reachable from the origin, together with the interpolation neighbors
of all its one-step advances, stays inside; cells outside that shrinking
safe region hold NaN and are excluded from residual checks. When every
dictionary speed advances by an exact multiple of the spacing (the default
spacing max-speed*dt with a {-c, 0, c} dictionary does), no interpolation
neighbors are needed and the box stays at its tight physical size. A
configuration whose reachable cone cannot fit raises BoxOverflow instead of
clamping, which would silently corrupt values near the edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .controls import Constant, ControlDictionary, ControlSchedule, schedule_from_sequence
from .cost import (
    FinalCost,
    MeanDiffSquared,
    Overlap,
    RunningCost,
    final_cost,
    running_cost,
)
from .errors import BoxOverflow, NotReduced, TooDeep, TubeOverflow
from .flow import cfl_time_steps, fokker_planck_solve
from .grid import DensityGrid, mean, simpson_weights, support_interval


@dataclass(frozen=True)
class GameSpec:
    """One full game instance.

    ``reduced`` asserts that all dictionary fields are constant so the
    translation reduction applies; shape-changing fields can only be played
    through explicit schedules and cost evaluation, not value iteration.
    """

    T: float
    t0: float
    n_steps: int
    mX0: DensityGrid
    mY0: DensityGrid
    dictA: ControlDictionary
    dictB: ControlDictionary
    rc: RunningCost
    fc: FinalCost
    sigma: float = 0.0
    reduced: bool = True

    def __post_init__(self) -> None:
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if not self.T > self.t0:
            raise ValueError("need T > t0")
        if self.reduced and not (self.dictA.all_constant() and self.dictB.all_constant()):
            raise ValueError("reduced game requires constant-only dictionaries")

    @property
    def dt(self) -> float:
        return (self.T - self.t0) / self.n_steps

    @property
    def level_times(self) -> np.ndarray:
        return np.linspace(self.t0, self.T, self.n_steps + 1)


def translate_density(m: DensityGrid, h: float) -> DensityGrid:
    """Rigid translation by h via linear resampling; exact at node shifts.

    The shifted support must stay inside the grid domain.
    """
    if h == 0.0:
        return m
    supp = support_interval(m)
    if supp is not None and (supp[0] + h < m.lo - 1e-12 or supp[1] + h > m.hi + 1e-12):
        raise TubeOverflow(
            f"translation by {h:g} pushes support [{supp[0]:g},{supp[1]:g}] "
            f"outside [{m.lo:g},{m.hi:g}]"
        )
    v = np.interp(m.x - h, m.x, m.values, left=0.0, right=0.0)
    v[0] = 0.0
    v[-1] = 0.0
    return DensityGrid(m.lo, m.hi, v)


def advance_reduced(
    hX: float, hY: float, a_index: int, b_index: int, spec: GameSpec, dt: float
) -> "tuple[float, float]":
    """One translation step under the chosen constant fields."""
    if not spec.reduced:
        raise NotReduced("advance_reduced requires a reduced game")
    if dt <= 0:
        raise ValueError("dt must be positive")
    return hX + spec.dictA[a_index].c * dt, hY + spec.dictB[b_index].c * dt


class _Axis:
    """Offset axis bookkeeping: nodes, spacing, and per-level safe shrinkage."""

    def __init__(self, dictionary: ControlDictionary, dh: float, n_steps: int, dt: float):
        speeds = [f.c for f in dictionary.fields]
        self.c_max = max(abs(s) for s in speeds)
        self.dh = dh
        if self.c_max == 0.0:
            self.nodes = np.array([0.0])
            self.shrink = 0.0
            return
        grid_exact = all(
            abs(s * dt / dh - round(s * dt / dh)) < 1e-9 for s in speeds
        )
        # each backward level loses one advance length, plus one cell of
        # interpolation buffer when advances can land between nodes
        self.shrink = self.c_max * dt + (0.0 if grid_exact else dh)
        n_half = int(math.ceil(n_steps * self.shrink / dh - 1e-9))
        self.nodes = np.arange(-n_half, n_half + 1) * dh

    def safe_radius(self, steps_left: int) -> float:
        if self.nodes.size == 1:
            return 1e-9
        return float(self.nodes[-1]) - steps_left * self.shrink + 1e-9


@dataclass(frozen=True)
class ValueTable:
    """Lower/upper value arrays over offset grid x time levels.

    NaN marks cells outside the safe (everything-interpolable) region of a
    level; the valid mask selects the rest.
    """

    times: np.ndarray
    hx: np.ndarray
    hy: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    valid: np.ndarray

    @property
    def dh_x(self) -> float:
        return float(self.hx[1] - self.hx[0]) if self.hx.size > 1 else 1.0

    @property
    def dh_y(self) -> float:
        return float(self.hy[1] - self.hy[0]) if self.hy.size > 1 else 1.0

    @staticmethod
    def _locate(nodes: np.ndarray, h: float) -> "tuple[int, float]":
        if nodes.size == 1:
            if abs(h - nodes[0]) > 1e-9:
                raise BoxOverflow(f"offset {h:g} outside the single-node axis")
            return 0, 0.0
        dh = nodes[1] - nodes[0]
        r = (h - nodes[0]) / dh
        if r < -1e-9 or r > nodes.size - 1 + 1e-9:
            raise BoxOverflow(
                f"offset {h:g} outside the table box [{nodes[0]:g},{nodes[-1]:g}]"
            )
        i = int(np.clip(math.floor(r), 0, nodes.size - 2))
        return i, float(np.clip(r - i, 0.0, 1.0))

    def value_at(self, which: str, level: int, hX: float, hY: float) -> float:
        """Bilinear interpolation of one stored value surface."""
        if which not in ("lower", "upper"):
            raise ValueError("which must be 'lower' or 'upper'")
        W = (self.lower if which == "lower" else self.upper)[level]
        ix, fx = self._locate(self.hx, hX)
        iy, fy = self._locate(self.hy, hY)
        ix2 = min(ix + 1, self.hx.size - 1)
        iy2 = min(iy + 1, self.hy.size - 1)
        return float(
            (1 - fx) * (1 - fy) * W[ix, iy]
            + fx * (1 - fy) * W[ix2, iy]
            + (1 - fx) * fy * W[ix, iy2]
            + fx * fy * W[ix2, iy2]
        )

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("level,time,hX,hY,lower,upper\n")
            for k, t in enumerate(self.times):
                for i, hx in enumerate(self.hx):
                    for j, hy in enumerate(self.hy):
                        fh.write(
                            f"{k},{t:.17g},{hx:.17g},{hy:.17g},"
                            f"{self.lower[k, i, j]:.17g},{self.upper[k, i, j]:.17g}\n"
                        )


@dataclass(frozen=True)
class FeedbackStrategy:
    """Per-level argmax/argmin maps of the lower recursion; -1 where invalid."""

    hx: np.ndarray
    hy: np.ndarray
    a_index: np.ndarray
    b_index: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("level,hX,hY,a_index,b_index\n")
            for k in range(self.a_index.shape[0]):
                for i, hx in enumerate(self.hx):
                    for j, hy in enumerate(self.hy):
                        fh.write(
                            f"{k},{hx:.17g},{hy:.17g},"
                            f"{self.a_index[k, i, j]},{self.b_index[k, i, j]}\n"
                        )


def _prediffused(spec: GameSpec) -> "tuple[DensityGrid, DensityGrid]":
    """Terminal-time densities before translation.

    Diffusion commutes with translation and the noise level is not
    controlled, so with sigma > 0 the initial densities are diffused once
    over the whole horizon and only then translated per offset.
    """
    if spec.sigma <= 0.0:
        return spec.mX0, spec.mY0
    zero = ControlSchedule.constant(Constant(0.0), spec.t0, spec.T)
    n = cfl_time_steps(spec.mX0, zero, spec.sigma, spec.t0, spec.T)
    mX = fokker_planck_solve(spec.mX0, zero, spec.sigma, spec.t0, spec.T, n)
    mY = fokker_planck_solve(spec.mY0, zero, spec.sigma, spec.t0, spec.T, n)
    return mX, mY


def _terminal_grid(spec: GameSpec, hx: np.ndarray, hy: np.ndarray) -> np.ndarray:
    """Final cost on every translated pair; fast paths for the common costs."""
    mX, mY = _prediffused(spec)
    if isinstance(spec.fc, MeanDiffSquared):
        mu_x = np.array([mean(translate_density(mX, h)) for h in hx])
        mu_y = np.array([mean(translate_density(mY, h)) for h in hy])
        return (mu_x[:, None] - mu_y[None, :]) ** 2
    if isinstance(spec.fc, Overlap):
        w = simpson_weights(mX.n_cells) * mX.dx
        VX = np.stack([translate_density(mX, h).values for h in hx])
        VY = np.stack([translate_density(mY, h).values for h in hy])
        return np.einsum("ik,k,jk->ij", VX, w, VY)
    tx = [translate_density(mX, h) for h in hx]
    ty = [translate_density(mY, h) for h in hy]
    out = np.empty((hx.size, hy.size))
    for i, mx_i in enumerate(tx):
        for j, my_j in enumerate(ty):
            out[i, j] = final_cost(spec.fc, mx_i, my_j)
    return out


def _shift_bilinear(W: np.ndarray, sx: float, sy: float, dhx: float, dhy: float) -> np.ndarray:
    """Evaluate W at every node shifted by (sx, sy); NaN where support leaves the grid."""

    def split(shift: float, dh: float, n: int):
        if n == 1:
            return (0, 0.0) if abs(shift) <= 1e-12 else None
        r = shift / dh
        i = math.floor(r + 1e-9)
        f = r - i
        if f < 1e-9:
            f = 0.0
        return (i, f)

    nx, ny = W.shape
    px, py = split(sx, dhx, nx), split(sy, dhy, ny)
    if px is None or py is None:
        return np.full_like(W, np.nan)
    ix, fx = px
    iy, fy = py

    def islice(kx: int, ky: int) -> np.ndarray:
        out = np.full_like(W, np.nan)
        xs0, xs1 = max(0, -kx), min(nx, nx - kx)
        ys0, ys1 = max(0, -ky), min(ny, ny - ky)
        if xs0 < xs1 and ys0 < ys1:
            out[xs0:xs1, ys0:ys1] = W[xs0 + kx : xs1 + kx, ys0 + ky : ys1 + ky]
        return out

    if fx == 0.0 and fy == 0.0:
        return islice(ix, iy)
    return (
        (1 - fx) * (1 - fy) * islice(ix, iy)
        + fx * (1 - fy) * islice(ix + 1, iy)
        + (1 - fx) * fy * islice(ix, iy + 1)
        + fx * fy * islice(ix + 1, iy + 1)
    )


def _step_candidates(
    spec: GameSpec, next_level: np.ndarray, dhx: float, dhy: float, t_k: float
) -> np.ndarray:
    """Per-(b, a) candidate arrays: dt * running cost + advanced next level.

    The running cost is evaluated at the step's start state; both built-in
    kinds ignore the translated densities, so the initial pair stands in.
    """
    dt = spec.dt
    tube = (spec.mX0.lo, spec.mX0.hi)
    nb, na = len(spec.dictB), len(spec.dictA)
    cands = np.empty((nb, na) + next_level.shape)
    for bi, b in enumerate(spec.dictB.fields):
        for ai, a in enumerate(spec.dictA.fields):
            ell = running_cost(spec.rc, spec.mX0, spec.mY0, t_k, a, b, tube)
            adv = _shift_bilinear(next_level, a.c * dt, b.c * dt, dhx, dhy)
            cands[bi, ai] = dt * ell + adv
    return cands


def solve_values(
    spec: GameSpec,
    dh_x: "float | None" = None,
    dh_y: "float | None" = None,
) -> ValueTable:
    """Backward min-max recursion over the offset grid.

    Default spacing is max-speed times dt per axis, which makes one-step
    advances grid-exact for dictionaries of the form {-c, 0, c} and removes
    interpolation error on the canonical configurations.
    """
    if not spec.reduced:
        raise NotReduced("solve_values requires a reduced game")
    dt = spec.dt
    ax = _Axis(spec.dictA, dh_x if dh_x is not None else (spec.dictA.max_speed * dt or 1.0),
               spec.n_steps, dt)
    ay = _Axis(spec.dictB, dh_y if dh_y is not None else (spec.dictB.max_speed * dt or 1.0),
               spec.n_steps, dt)
    hx, hy = ax.nodes, ay.nodes

    L = spec.n_steps + 1
    for k in range(L):
        steps_left = spec.n_steps - k
        t_gone = spec.level_times[k] - spec.t0
        if ax.c_max * t_gone > ax.safe_radius(steps_left) + 1e-9:
            raise BoxOverflow("offset box too small for the reachable cone (x axis)")
        if ay.c_max * t_gone > ay.safe_radius(steps_left) + 1e-9:
            raise BoxOverflow("offset box too small for the reachable cone (y axis)")

    lower = np.full((L, hx.size, hy.size), np.nan)
    upper = np.full_like(lower, np.nan)
    valid = np.zeros(lower.shape, dtype=bool)

    terminal = _terminal_grid(spec, hx, hy)
    lower[-1] = terminal
    upper[-1] = terminal.copy()
    valid[-1] = True

    for k in range(spec.n_steps - 1, -1, -1):
        steps_left = spec.n_steps - k
        mask = (np.abs(hx)[:, None] <= ax.safe_radius(steps_left)) & (
            np.abs(hy)[None, :] <= ay.safe_radius(steps_left)
        )
        t_k = spec.level_times[k]
        c_lo = _step_candidates(spec, lower[k + 1], ax.dh, ay.dh, t_k)
        lo_k = np.max(np.min(c_lo, axis=1), axis=0)
        c_up = _step_candidates(spec, upper[k + 1], ax.dh, ay.dh, t_k)
        up_k = np.min(np.max(c_up, axis=1), axis=0)
        if not (np.all(np.isfinite(lo_k[mask])) and np.all(np.isfinite(up_k[mask]))):
            raise BoxOverflow(f"level {k}: a safe-region cell lost its interpolation support")
        lower[k] = np.where(mask, lo_k, np.nan)
        upper[k] = np.where(mask, up_k, np.nan)
        valid[k] = mask

    times = spec.level_times
    for arr in (lower, upper, valid, hx, hy, times):
        arr.setflags(write=False)
    return ValueTable(times=times, hx=hx, hy=hy, lower=lower, upper=upper, valid=valid)


def extract_strategy(spec: GameSpec, table: ValueTable) -> FeedbackStrategy:
    """Argmax-b / argmin-a maps of the lower recursion, per level and cell."""
    if not spec.reduced:
        raise NotReduced("extract_strategy requires a reduced game")
    L = spec.n_steps
    shape = table.lower.shape[1:]
    a_idx = np.full((L,) + shape, -1, dtype=int)
    b_idx = np.full((L,) + shape, -1, dtype=int)
    for k in range(L):
        cands = _step_candidates(spec, table.lower[k + 1], table.dh_x, table.dh_y, table.times[k])
        inner = np.where(np.isfinite(cands), cands, np.inf).min(axis=1)  # over a
        bk = np.where(np.isfinite(inner), inner, -np.inf).argmax(axis=0)
        picked = np.take_along_axis(cands, bk[None, None, :, :], axis=0)[0]  # (na, nx, ny)
        ak = np.where(np.isfinite(picked), picked, np.inf).argmin(axis=0)
        mask = table.valid[k]
        a_idx[k][mask] = ak[mask]
        b_idx[k][mask] = bk[mask]
    return FeedbackStrategy(hx=table.hx, hy=table.hy, a_index=a_idx, b_index=b_idx)


def dpp_residual(table: ValueTable, spec: GameSpec, k: int) -> float:
    """Max mismatch between level k and a recomputed one-step lower recursion.

    Evaluated over cells valid at level k; the solver's own table reproduces
    itself to roundoff, while an injected candidate table shows its
    interpolation-scale defect.
    """
    if not 0 <= k < spec.n_steps:
        raise ValueError(f"level k must be in [0, {spec.n_steps}), got {k}")
    cands = _step_candidates(spec, table.lower[k + 1], table.dh_x, table.dh_y, table.times[k])
    recomputed = np.max(np.min(cands, axis=1), axis=0)
    mask = table.valid[k] & np.isfinite(recomputed) & np.isfinite(table.lower[k])
    if not np.any(mask):
        return 0.0
    return float(np.max(np.abs(recomputed[mask] - table.lower[k][mask])))


def analytic_table(spec: GameSpec, value_fn, dh_x=None, dh_y=None) -> ValueTable:
    """Tabulate a closed-form candidate value on the solver's own layout.

    ``value_fn(hX, hY, t)`` supplies the value at a translated state; used to
    measure the recursion residual of analytic candidates.
    """
    ref = solve_values(spec, dh_x=dh_x, dh_y=dh_y)
    lower = np.full_like(ref.lower, np.nan)
    for k, t in enumerate(ref.times):
        for i, hx in enumerate(ref.hx):
            for j, hy in enumerate(ref.hy):
                lower[k, i, j] = value_fn(float(hx), float(hy), float(t))
    return ValueTable(
        times=ref.times, hx=ref.hx, hy=ref.hy, lower=lower, upper=lower.copy(), valid=ref.valid
    )


def brute_force_value(spec: GameSpec, max_steps: int = 4) -> "tuple[float, float]":
    """Exact game-tree evaluation at exact offsets; the oracle for tiny depths.

    Lower tree: max over b then min over a at each step; upper tree is the
    mirror image. Leaves evaluate the final cost on exactly translated
    densities, so no value interpolation enters anywhere.
    """
    if not spec.reduced:
        raise NotReduced("brute_force_value requires a reduced game")
    if spec.n_steps > max_steps:
        raise TooDeep(f"n_steps={spec.n_steps} exceeds the brute-force cap {max_steps}")

    mX, mY = _prediffused(spec)
    dt = spec.dt
    tube = (spec.mX0.lo, spec.mX0.hi)
    cache: dict = {}

    def leaf(hX: float, hY: float) -> float:
        key = ("leaf", hX, hY)
        if key not in cache:
            cache[key] = final_cost(spec.fc, translate_density(mX, hX), translate_density(mY, hY))
        return cache[key]

    def ell(t: float, ai: int, bi: int) -> float:
        return running_cost(spec.rc, spec.mX0, spec.mY0, t, spec.dictA[ai], spec.dictB[bi], tube)

    def rec(k: int, hX: float, hY: float, lower: bool) -> float:
        if k == spec.n_steps:
            return leaf(hX, hY)
        key = (k, hX, hY, lower)
        if key in cache:
            return cache[key]
        t_k = spec.level_times[k]
        if lower:
            outer = -np.inf
            for bi in range(len(spec.dictB)):
                inner = np.inf
                for ai in range(len(spec.dictA)):
                    hX2, hY2 = advance_reduced(hX, hY, ai, bi, spec, dt)
                    inner = min(inner, dt * ell(t_k, ai, bi) + rec(k + 1, hX2, hY2, True))
                outer = max(outer, inner)
        else:
            outer = np.inf
            for ai in range(len(spec.dictA)):
                inner = -np.inf
                for bi in range(len(spec.dictB)):
                    hX2, hY2 = advance_reduced(hX, hY, ai, bi, spec, dt)
                    inner = max(inner, dt * ell(t_k, ai, bi) + rec(k + 1, hX2, hY2, False))
                outer = min(outer, inner)
        cache[key] = float(outer)
        return cache[key]

    return rec(0, 0.0, 0.0, True), rec(0, 0.0, 0.0, False)


@dataclass(frozen=True)
class PlayResult:
    offsets: "tuple[tuple[float, float], ...]"
    a_indices: "tuple[int, ...]"
    b_indices: "tuple[int, ...]"
    realized_J: float
    table_value: float


def simulate_play(spec: GameSpec, table: ValueTable) -> PlayResult:
    """Forward play from the origin under the lower-recursion optimizers.

    At each step the maximizer commits its argmax choice and the minimizer
    answers with the argmin response; the realized cost is then evaluated on
    the induced explicit schedules through the transport machinery, closing
    the loop against the table value.
    """
    if not spec.reduced:
        raise NotReduced("simulate_play requires a reduced game")
    dt = spec.dt
    tube = (spec.mX0.lo, spec.mX0.hi)
    hX, hY = 0.0, 0.0
    offsets = [(hX, hY)]
    a_seq: "list[int]" = []
    b_seq: "list[int]" = []
    for k in range(spec.n_steps):
        t_k = spec.level_times[k]
        best = None  # (value, bi, ai)
        for bi in range(len(spec.dictB)):
            inner = None  # (value, ai)
            for ai in range(len(spec.dictA)):
                hX2, hY2 = advance_reduced(hX, hY, ai, bi, spec, dt)
                ell = running_cost(
                    spec.rc, spec.mX0, spec.mY0, t_k, spec.dictA[ai], spec.dictB[bi], tube
                )
                v = dt * ell + table.value_at("lower", k + 1, hX2, hY2)
                if inner is None or v < inner[0]:
                    inner = (v, ai)
            if best is None or inner[0] > best[0]:
                best = (inner[0], bi, inner[1])
        _, bi, ai = best
        a_seq.append(ai)
        b_seq.append(bi)
        hX, hY = advance_reduced(hX, hY, ai, bi, spec, dt)
        offsets.append((hX, hY))

    times = tuple(spec.level_times)
    alpha = schedule_from_sequence(times, a_seq, spec.dictA)
    beta = schedule_from_sequence(times, b_seq, spec.dictB)
    from .cost import evaluate_J

    realized = evaluate_J(spec, alpha, beta, n_time_samples=max(1, spec.n_steps))
    return PlayResult(
        offsets=tuple(offsets),
        a_indices=tuple(a_seq),
        b_indices=tuple(b_seq),
        realized_J=realized,
        table_value=table.value_at("lower", 0, 0.0, 0.0),
    )
