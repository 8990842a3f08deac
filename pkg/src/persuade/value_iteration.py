"""Grid approximation of the optimal value by iterated concavification.

One Bellman step evaluates the discounted operand at every grid node and
replaces it by its least concave majorant: the upper facets of the convex
hull of the lifted node set.  Supported on two and three states; beyond
that the harness falls back to greedy-value / first-best comparisons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .exceptions import DivergenceError, InvalidArgumentError, NotApplicableError
from .model import Belief, MarkovModel, PayoffStructure, invests
from .splitting import Splitting, make_splitting, no_disclosure

DEFAULT_RESOLUTION = {2: 2000, 3: 150}
DEFAULT_EPS = {2: 1e-6, 3: 1e-4}
_SNAP = 1e-9


class SimplexGrid:
    """Uniform lattice on the belief simplex with resolution h = 1/n.

    Nodes are all beliefs whose coordinates are integer multiples of h.
    For three states the triangulation is the standard subdivision of each
    lattice cell into an upward and a downward triangle.
    """

    __slots__ = ("n_states", "n", "_nodes", "_row_offsets")

    def __init__(self, n_states: int, n: int):
        if n_states not in (2, 3):
            raise NotApplicableError("simplex grids support 2 or 3 states only")
        if n < 1:
            raise InvalidArgumentError("resolution denominator must be >= 1")
        self.n_states = n_states
        self.n = n
        if n_states == 2:
            x = np.arange(n + 1) / n
            self._nodes = np.column_stack([x, 1.0 - x])
            self._row_offsets = None
        else:
            ii, jj = [], []
            for i in range(n + 1):
                for j in range(n + 1 - i):
                    ii.append(i)
                    jj.append(j)
            ii = np.asarray(ii, dtype=float)
            jj = np.asarray(jj, dtype=float)
            self._nodes = np.column_stack([ii / n, jj / n, 1.0 - (ii + jj) / n])
            # first flat index of each i-row
            counts = np.array([n + 1 - i for i in range(n + 1)])
            self._row_offsets = np.concatenate([[0], np.cumsum(counts)])
        self._nodes.flags.writeable = False

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def nodes(self) -> np.ndarray:
        return self._nodes

    @property
    def n_nodes(self) -> int:
        return self._nodes.shape[0]

    def node_index(self, i, j=None):
        if self.n_states == 2:
            return np.asarray(i, dtype=np.int64)
        return self._row_offsets[np.asarray(i, dtype=np.int64)] + np.asarray(j, dtype=np.int64)


@dataclass(frozen=True)
class ValueField:
    """Real values attached to the nodes of a simplex grid."""

    grid: SimplexGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_nodes,):
            raise InvalidArgumentError("value vector does not match the grid")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def with_values(self, values) -> "ValueField":
        return ValueField(self.grid, values)


def _interp_structure(grid: SimplexGrid, points: np.ndarray):
    """Barycentric interpolation stencil: node indices and weights per point."""
    n = grid.n
    P = np.asarray(points, dtype=float)
    if grid.n_states == 2:
        t = P[:, 0] * n
        snap = np.rint(t)
        t = np.where(np.abs(t - snap) <= _SNAP, snap, t)
        i = np.clip(np.floor(t).astype(np.int64), 0, n - 1)
        a = t - i
        idx = np.column_stack([i, i + 1])
        wts = np.column_stack([1.0 - a, a])
        return idx, wts

    u = P[:, 0] * n
    v = P[:, 1] * n
    su, sv = np.rint(u), np.rint(v)
    u = np.where(np.abs(u - su) <= _SNAP, su, u)
    v = np.where(np.abs(v - sv) <= _SNAP, sv, v)
    i = np.clip(np.floor(u).astype(np.int64), 0, n - 1)
    j = np.clip(np.floor(v).astype(np.int64), 0, n - 1)
    # keep the cell origin inside the lattice triangle
    over = i + j > n - 1
    shift_i = over & (i > 0)
    i = np.where(shift_i, i - 1, i)
    j = np.where(over & ~shift_i, j - 1, j)
    a = u - i
    b = v - j
    down = (a + b > 1.0 + 1e-12) & (i + j <= n - 2)

    idx = np.empty((P.shape[0], 3), dtype=np.int64)
    wts = np.empty((P.shape[0], 3))
    up = ~down
    idx[up, 0] = grid.node_index(i[up], j[up])
    idx[up, 1] = grid.node_index(i[up] + 1, j[up])
    idx[up, 2] = grid.node_index(i[up], j[up] + 1)
    wts[up, 0] = 1.0 - a[up] - b[up]
    wts[up, 1] = a[up]
    wts[up, 2] = b[up]
    if np.any(down):
        idx[down, 0] = grid.node_index(i[down] + 1, j[down])
        idx[down, 1] = grid.node_index(i[down], j[down] + 1)
        idx[down, 2] = grid.node_index(i[down] + 1, j[down] + 1)
        wts[down, 0] = 1.0 - b[down]
        wts[down, 1] = 1.0 - a[down]
        wts[down, 2] = a[down] + b[down] - 1.0
    wts = np.clip(wts, 0.0, None)
    wts /= wts.sum(axis=1, keepdims=True)
    return idx, wts


def interpolate_many(field: ValueField, points: np.ndarray) -> np.ndarray:
    idx, wts = _interp_structure(field.grid, points)
    return (field.values[idx] * wts).sum(axis=1)


def interpolate(field: ValueField, p: Belief) -> float:
    """Barycentric interpolation of the field at a belief.

    Exact at nodes, linear inside each triangulation cell, and confined to
    the range of the node values.
    """
    return float(interpolate_many(field, np.asarray(p, dtype=float)[None, :])[0])


def _upper_envelope_1d(x: np.ndarray, v: np.ndarray):
    """Upper concave envelope on a sorted 1-d grid; returns (values, hull indices)."""
    hull = []
    for k in range(x.size):
        while len(hull) >= 2:
            i, j = hull[-2], hull[-1]
            # drop the middle point when it is on or below the chord
            if (x[j] - x[i]) * (v[k] - v[i]) - (v[j] - v[i]) * (x[k] - x[i]) >= 0.0:
                hull.pop()
            else:
                break
        hull.append(k)
    hull = np.asarray(hull, dtype=np.int64)
    env = np.interp(x, x[hull], v[hull])
    return np.maximum(env, v), hull


def _upper_facets_2d(xy: np.ndarray, v: np.ndarray):
    """Upper facets of the hull of lifted points; (simplices, planes) or None if flat."""
    pts = np.column_stack([xy, v])
    try:
        hull = ConvexHull(pts, qhull_options="Qt")
    except QhullError:
        return None
    eq = hull.equations
    upper = eq[:, 2] > 1e-12
    if not np.any(upper):
        return None
    return hull.simplices[upper], eq[upper]


def _envelope_2d(grid: SimplexGrid, values: np.ndarray):
    """Concave envelope at all nodes of a 3-state grid, plus the facet data."""
    n = grid.n
    xy = grid.nodes[:, :2]
    facets = _upper_facets_2d(xy, values)
    env = values.copy()
    if facets is None:
        return env, None
    simp, eq = facets
    vi = np.rint(xy[:, 0][simp] * n).astype(np.int64)
    vj = np.rint(xy[:, 1][simp] * n).astype(np.int64)
    imin, imax = vi.min(axis=1), vi.max(axis=1)
    jmin, jmax = vj.min(axis=1), vj.max(axis=1)
    wi = imax - imin + 1
    wj = jmax - jmin + 1
    cnt = wi * wj
    tot = int(cnt.sum())
    fidx = np.repeat(np.arange(simp.shape[0]), cnt)
    starts = np.concatenate([[0], np.cumsum(cnt)[:-1]])
    off = np.arange(tot) - np.repeat(starts, cnt)
    ii = imin[fidx] + off // wj[fidx]
    jj = jmin[fidx] + off % wj[fidx]
    inside_lattice = ii + jj <= n
    fidx, ii, jj = fidx[inside_lattice], ii[inside_lattice], jj[inside_lattice]

    # barycentric containment in the projected facet triangle
    x0, y0 = vi[fidx, 0], vj[fidx, 0]
    e1x, e1y = vi[fidx, 1] - x0, vj[fidx, 1] - y0
    e2x, e2y = vi[fidx, 2] - x0, vj[fidx, 2] - y0
    det = e1x * e2y - e2x * e1y
    ok = det != 0
    fidx, ii, jj = fidx[ok], ii[ok], jj[ok]
    x0, y0 = x0[ok], y0[ok]
    e1x, e1y, e2x, e2y, det = e1x[ok], e1y[ok], e2x[ok], e2y[ok], det[ok]
    px, py = ii - x0, jj - y0
    l1 = (e2y * px - e2x * py) / det
    l2 = (-e1y * px + e1x * py) / det
    inside = (l1 >= -1e-9) & (l2 >= -1e-9) & (l1 + l2 <= 1.0 + 1e-9)
    fidx, ii, jj = fidx[inside], ii[inside], jj[inside]

    planes = eq[fidx]
    val = -(planes[:, 0] * (ii / n) + planes[:, 1] * (jj / n) + planes[:, 3]) / planes[:, 2]
    # the plane over the closed facet attains its extremes at the vertices
    fv = values[simp]
    val = np.clip(val, fv.min(axis=1)[fidx], fv.max(axis=1)[fidx])
    np.maximum.at(env, grid.node_index(ii, jj), val)
    return env, (simp, eq)


def concavify(field: ValueField) -> ValueField:
    """Least concave function above the node values, sampled at the nodes.

    Computed from the upper facets of the convex hull of the lifted node
    set (a 1-d upper envelope for two states).  Degenerate inputs whose
    lift is flat are already concave and returned unchanged.
    """
    grid = field.grid
    if grid.n_states == 2:
        env, _ = _upper_envelope_1d(grid.nodes[:, 0], field.values)
        return field.with_values(env)
    env, _ = _envelope_2d(grid, field.values)
    return field.with_values(env)


def envelope_value(field: ValueField, p: Belief) -> float:
    """Exact value of the concave envelope of the node values at p.

    Unlike interpolating the concavified node values over the standard
    triangulation, this locates the supporting hull facet through p, so it
    is exact even where the envelope's facets cross the grid cells.
    """
    grid = field.grid
    pw = np.asarray(p, dtype=float)
    if grid.n_states == 2:
        env, hull = _upper_envelope_1d(grid.nodes[:, 0], field.values)
        return float(np.interp(pw[0], grid.nodes[hull, 0], env[hull]))
    _, facets = _envelope_2d(grid, field.values)
    if facets is None:
        return float(interpolate_many(field, pw[None, :])[0])
    atoms = _facet_atoms(grid, facets[0], pw)
    if atoms is None:
        return float(interpolate_many(field, pw[None, :])[0])
    return sum(w * float(interpolate_many(field, np.asarray(q)[None, :])[0])
               for w, q in atoms)


class _BellmanOperator:
    """One-step operator with the drift interpolation stencil precomputed."""

    def __init__(self, grid: SimplexGrid, delta: float, chain: MarkovModel,
                 payoffs: PayoffStructure):
        if chain.dim != grid.n_states or payoffs.dim != grid.n_states:
            raise InvalidArgumentError("grid, chain, and payoffs dimensions differ")
        self.grid = grid
        self.delta = delta
        drifted = grid.nodes @ chain.transition
        self.idx, self.wts = _interp_structure(grid, drifted)
        self.invest = (grid.nodes @ payoffs.r) >= -1e-12

    def operand(self, values: np.ndarray) -> np.ndarray:
        cont = (values[self.idx] * self.wts).sum(axis=1)
        return (1.0 - self.delta) * self.invest + self.delta * cont

    def apply(self, values: np.ndarray) -> np.ndarray:
        w = self.operand(values)
        if self.grid.n_states == 2:
            env, _ = _upper_envelope_1d(self.grid.nodes[:, 0], w)
        else:
            env, _ = _envelope_2d(self.grid, w)
        return env


def bellman_step(field: ValueField, delta: float, chain: MarkovModel,
                 payoffs: PayoffStructure) -> ValueField:
    """One dynamic-programming sweep: discounted operand, then concavification."""
    op = _BellmanOperator(field.grid, delta, chain, payoffs)
    return field.with_values(op.apply(field.values))


@dataclass(frozen=True)
class SolveResult:
    field: ValueField
    iterations: int
    final_diff: float


def solve(delta: float, chain: MarkovModel, payoffs: PayoffStructure,
          grid: SimplexGrid, eps: Optional[float] = None) -> SolveResult:
    """Fixed point of the Bellman operator on the grid, from the zero field.

    Iterates until the successive sup-distance drops to eps (1 - delta) /
    delta, which leaves a fixed-point residual of at most eps (1 - delta).
    Termination is guaranteed by the contraction factor delta.
    """
    if not (0.0 <= delta < 1.0):
        raise InvalidArgumentError("discount must lie in [0, 1)")
    if eps is None:
        eps = DEFAULT_EPS[grid.n_states]
    op = _BellmanOperator(grid, delta, chain, payoffs)
    values = np.zeros(grid.n_nodes)
    threshold = math.inf if delta == 0.0 else eps * (1.0 - delta) / delta
    iterations = 0
    diff = math.inf
    while True:
        new = op.apply(values)
        diff = float(np.max(np.abs(new - values)))
        values = new
        iterations += 1
        if diff <= threshold or delta == 0.0:
            break
        if iterations > 100_000:
            raise DivergenceError("value iteration failed to contract")
    return SolveResult(ValueField(grid, values), iterations, diff)


def grid_variation(field: ValueField) -> float:
    """Largest value jump across one triangulation edge, a practical grid tolerance."""
    grid = field.grid
    v = field.values
    if grid.n_states == 2:
        return float(np.max(np.abs(np.diff(v)))) if v.size > 1 else 0.0
    n = grid.n
    worst = 0.0
    for i in range(n + 1):
        row = v[grid.node_index(i, np.arange(n + 1 - i))]
        if row.size > 1:
            worst = max(worst, float(np.max(np.abs(np.diff(row)))))
        if i < n:
            j = np.arange(n - i)
            right = v[grid.node_index(i + 1, j)]
            here = v[grid.node_index(i, j)]
            diag = v[grid.node_index(i, j + 1)]
            worst = max(worst, float(np.max(np.abs(right - here))))
            worst = max(worst, float(np.max(np.abs(right - diag))))
    return worst


def splitting_value(mu: Splitting, field: ValueField, delta: float,
                    chain: MarkovModel, payoffs: PayoffStructure) -> float:
    """Expected Bellman operand of a splitting under the given field."""
    total = 0.0
    for w, q in mu.atoms:
        stage = 1.0 if invests(q, payoffs) else 0.0
        cont = interpolate(field, Belief(np.asarray(q) @ chain.transition))
        total += w * ((1.0 - delta) * stage + delta * cont)
    return total


def extract_splitting(p: Belief, field: ValueField, delta: float,
                      chain: MarkovModel, payoffs: PayoffStructure) -> Splitting:
    """Optimal two-point splitting at p, read off the concavified operand.

    On the investment region nothing is disclosed.  Elsewhere the
    supporting facet of the concavified operand containing p identifies
    the atoms; its vertices are merged into the conditional means on the
    investing and noninvesting sides, so at most two posteriors remain.
    """
    if invests(p, payoffs):
        return no_disclosure(p)
    op = _BellmanOperator(field.grid, delta, chain, payoffs)
    w = op.operand(field.values)
    grid = field.grid
    pw = np.asarray(p, dtype=float)

    if grid.n_states == 2:
        _, hull = _upper_envelope_1d(grid.nodes[:, 0], w)
        hx = grid.nodes[hull, 0]
        x = pw[0]
        k = int(np.searchsorted(hx, x, side="right"))
        k = min(max(k, 1), hx.size - 1)
        left, right = hull[k - 1], hull[k]
        if hx[k - 1] == x:
            atoms = [(1.0, Belief(grid.nodes[left]))]
        else:
            t = (x - hx[k - 1]) / (hx[k] - hx[k - 1])
            atoms = [(1.0 - t, Belief(grid.nodes[left])), (t, Belief(grid.nodes[right]))]
    else:
        env, facets = _envelope_2d(grid, w)
        if facets is None:
            return no_disclosure(p)
        simp, _ = facets
        atoms = _facet_atoms(grid, simp, pw)
        if atoms is None:
            return no_disclosure(p)

    # merge to at most two points: conditional means on each side of the frontier
    groups = {}
    for weight, q in atoms:
        if weight <= 0.0:
            continue
        side = invests(q, payoffs)
        acc = groups.setdefault(side, [0.0, np.zeros(p.dim)])
        acc[0] += weight
        acc[1] += weight * np.asarray(q)
    merged = [(wt, Belief(vec / wt)) for wt, vec in groups.values()]
    return make_splitting(p, merged)


def _facet_atoms(grid: SimplexGrid, simplices: np.ndarray, pw: np.ndarray):
    """Barycentric atoms of pw in the facet that contains it, or None."""
    xy = grid.nodes[:, :2]
    best = None
    best_margin = -math.inf
    x, y = pw[0], pw[1]
    for tri in simplices:
        (x0, y0), (x1, y1), (x2, y2) = xy[tri]
        det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if abs(det) < 1e-15:
            continue
        l1 = ((y2 - y0) * (x - x0) - (x2 - x0) * (y - y0)) / det
        l2 = (-(y1 - y0) * (x - x0) + (x1 - x0) * (y - y0)) / det
        l0 = 1.0 - l1 - l2
        margin = min(l0, l1, l2)
        if margin > best_margin:
            best_margin = margin
            best = (tri, (l0, l1, l2))
    if best is None or best_margin < -1e-9:
        return None
    tri, lams = best
    return [(max(l, 0.0), Belief(grid.nodes[i])) for l, i in zip(lams, tri)]
