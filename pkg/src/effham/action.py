"""Minimal-action kernels on covers and the variational HJ solvers.

Three layers:

* ``minimal_action``: the two-point action over a fixed horizon.  Graphs
  reduce exactly to finitely many edge-traversal multisets, each priced
  by a closed-form time allocation at a common energy; tori run a
  piecewise-linear trajectory descent with analytic gradients and
  segment-doubling refinement.
* ``lax_oleinik``: the rescaled cover solution, an infimum of
  datum + eps * action over starting points, truncated to a certified
  window (``search_radius``), seeded on a mesh and polished.
* ``hopf_lax``: the limit solution on homology space, an inf-convolution
  against t * beta((h - q)/t) over a certified compact box.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import SolverError
from .model import GraphLagrangian, TorusHamiltonian, TrigPolynomial
from .topology import CoverPoint, dual_norm_value, norm_value

# sup |v|_b / |v|_a over v != 0 in dimension k, as a function factory
_RATIO = {
    ("l1", "l1"): lambda k: 1.0,
    ("l2", "l2"): lambda k: 1.0,
    ("linf", "linf"): lambda k: 1.0,
    ("l1", "l2"): lambda k: 1.0,
    ("l1", "linf"): lambda k: 1.0,
    ("l2", "linf"): lambda k: 1.0,
    ("l2", "l1"): lambda k: math.sqrt(k),
    ("linf", "l2"): lambda k: math.sqrt(k),
    ("linf", "l1"): lambda k: float(k),
}


def norm_ratio(from_kind: str, to_kind: str, dim: int) -> float:
    """Smallest C with |v|_to <= C |v|_from for all v in R^dim."""
    return _RATIO[(from_kind, to_kind)](dim)


@dataclass(frozen=True)
class ActionQuery:
    """Two-point action query: start, end, and a positive horizon."""

    start: CoverPoint
    end: CoverPoint
    horizon: float

    def __post_init__(self):
        if not self.horizon > 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")


class InitialDatum:
    """Limit-space initial datum with linear-growth certificates.

    Families: affine p.h + c; cone slope*|h - center| + c (slope >= 0);
    quadratic h.Q.h/2 + p.h + c with Q positive semidefinite.  Growth
    constants (A, B) certify f(h) >= -A|h| - B in a requested norm.
    """

    def __init__(self, kind, *, p=None, c=0.0, slope=0.0, center=None,
                 q_matrix=None, cone_norm="l1", dim=None):
        self.kind = kind
        self.c = float(c)
        self.dim = dim
        self.p = None if p is None else np.atleast_1d(np.asarray(p, dtype=float))
        if self.p is not None:
            self.dim = self.p.size
        self.q_matrix = None
        if q_matrix is not None:
            self.q_matrix = np.atleast_2d(np.asarray(q_matrix, dtype=float))
            if self.dim is None:
                self.dim = self.q_matrix.shape[0]
        if center is not None:
            self.center = np.atleast_1d(np.asarray(center, dtype=float))
            if self.dim is None:
                self.dim = self.center.size
        else:
            self.center = np.zeros(self.dim if self.dim is not None else 1)
        if self.dim is None:
            self.dim = self.center.size
        self.slope = float(slope)
        self.cone_norm = cone_norm
        if kind == "affine":
            if self.p is None:
                raise ValueError("affine datum needs a slope vector")
        elif kind == "cone":
            if self.slope < 0.0:
                raise ValueError("cone slope must be nonnegative")
        elif kind == "quadratic":
            if self.q_matrix is None:
                raise ValueError("quadratic datum needs a matrix")
            self.dim = self.q_matrix.shape[0]
            if self.p is None:
                self.p = np.zeros(self.dim)
            w = np.linalg.eigvalsh(0.5 * (self.q_matrix + self.q_matrix.T))
            if w[0] < -1e-12:
                raise ValueError("quadratic datum matrix must be positive semidefinite")
            self._qmax = float(w[-1])
        else:
            raise ValueError(f"unknown datum kind {kind!r}")

    @staticmethod
    def affine(p, c: float = 0.0) -> "InitialDatum":
        return InitialDatum("affine", p=p, c=c)

    @staticmethod
    def cone(slope: float, center=None, c: float = 0.0, norm: str = "l1",
             dim: int = 1) -> "InitialDatum":
        return InitialDatum("cone", slope=slope, center=center, c=c,
                            cone_norm=norm, dim=dim)

    @staticmethod
    def quadratic(q_matrix, p=None, c: float = 0.0) -> "InitialDatum":
        return InitialDatum("quadratic", q_matrix=q_matrix, p=p, c=c)

    def value(self, h) -> float:
        h = np.atleast_1d(np.asarray(h, dtype=float))
        if self.kind == "affine":
            return float(self.p @ h) + self.c
        if self.kind == "cone":
            return self.slope * norm_value(h - self.center, self.cone_norm) + self.c
        return float(0.5 * h @ self.q_matrix @ h + self.p @ h) + self.c

    def value_many(self, hs: np.ndarray) -> np.ndarray:
        hs = np.atleast_2d(np.asarray(hs, dtype=float))
        if self.kind == "affine":
            return hs @ self.p + self.c
        if self.kind == "cone":
            d = hs - self.center
            if self.cone_norm == "l1":
                r = np.sum(np.abs(d), axis=1)
            elif self.cone_norm == "l2":
                r = np.sqrt(np.sum(d * d, axis=1))
            else:
                r = np.max(np.abs(d), axis=1)
            return self.slope * r + self.c
        quad = 0.5 * np.einsum("mi,ij,mj->m", hs, self.q_matrix, hs)
        return quad + hs @ self.p + self.c

    def gradient(self, h):
        """Gradient where smooth; None for kinds without a usable one."""
        h = np.atleast_1d(np.asarray(h, dtype=float))
        if self.kind == "affine":
            return self.p.copy()
        if self.kind == "quadratic":
            return self.q_matrix @ h + self.p
        if self.cone_norm == "l2":
            d = h - self.center
            r = float(np.linalg.norm(d))
            if r < 1e-12:
                return np.zeros_like(d)
            return self.slope * d / r
        return None

    def growth_constants(self, norm: str):
        """(A, B) with f(h) >= -A|h|_norm - B for all h."""
        if self.kind == "cone":
            return 0.0, max(0.0, self.slope * norm_value(self.center, self.cone_norm)
                            - self.c)
        a = dual_norm_value(self.p, norm)
        return a, abs(self.c)

    def upper_bound(self, radius: float, norm: str) -> float:
        """sup of f over the ball |h|_norm <= radius."""
        if self.kind == "affine":
            return dual_norm_value(self.p, norm) * radius + self.c
        if self.kind == "cone":
            conv = norm_ratio(norm, self.cone_norm, self.dim)
            reach = conv * radius + norm_value(self.center, self.cone_norm)
            return self.slope * reach + self.c
        r2 = norm_ratio(norm, "l2", self.dim) * radius
        return 0.5 * self._qmax * r2 * r2 + dual_norm_value(self.p, norm) * radius + self.c

    def lipschitz_bound(self, radius: float, norm: str) -> float:
        """Lipschitz constant of f in |.|_norm over the ball of that radius."""
        if self.kind == "affine":
            return dual_norm_value(self.p, norm)
        if self.kind == "cone":
            return self.slope * norm_ratio(norm, self.cone_norm, self.dim)
        conv = norm_ratio(norm, "l2", self.dim)
        grad2 = self._qmax * conv * radius + float(np.linalg.norm(self.p))
        return grad2 * conv

    def to_config(self):
        out = {"kind": self.kind, "offset": self.c}
        if self.kind == "affine":
            out["slope_vector"] = [float(v) for v in self.p]
        elif self.kind == "cone":
            out.update(slope=self.slope, center=[float(v) for v in self.center],
                       norm=self.cone_norm)
        else:
            out["matrix"] = [[float(v) for v in row] for row in self.q_matrix]
            out["slope_vector"] = [float(v) for v in self.p]
        return out


class TorusBump:
    """Deck-invariant perturbation of the cover datum (torus base)."""

    def __init__(self, trig: TrigPolynomial):
        self.trig = trig

    def value_at_lift(self, lift) -> float:
        return float(self.trig.value(lift))

    def value_many(self, lifts) -> np.ndarray:
        return self.trig.value_many(lifts)

    def gradient_at_lift(self, lift) -> np.ndarray:
        return self.trig.gradient(lift)

    def bound(self) -> float:
        return self.trig.bound_abs()


class EdgeBump:
    """Deck-invariant perturbation on a graph: per-edge sine in arclength.

    value on edge e at arclength s is amplitude_e * sin(2*pi*freq_e*s/len_e),
    which vanishes at both endpoints, so the bump is continuous.
    """

    def __init__(self, graph, amplitudes, frequencies=None):
        self.graph = graph
        self.amplitudes = np.asarray(amplitudes, dtype=float)
        if frequencies is None:
            frequencies = np.ones(len(graph.edges), dtype=int)
        self.frequencies = np.asarray(frequencies, dtype=int)

    def value_at(self, base) -> float:
        if base[0] == "v":
            return 0.0
        _, e, s = base
        length = self.graph.length(e)
        return float(self.amplitudes[e]
                     * math.sin(2.0 * math.pi * self.frequencies[e] * s / length))

    def bound(self) -> float:
        return float(np.max(np.abs(self.amplitudes))) if self.amplitudes.size else 0.0


def datum_on_cover(cover, datum: InitialDatum, eps: float, bump=None):
    """Callable cover datum: datum(F_eps(point)) + eps * bump(point)."""
    if eps <= 0.0:
        raise ValueError(f"scale eps must be positive, got {eps}")

    def value(point: CoverPoint) -> float:
        out = datum.value(eps * cover.g_map(point))
        if bump is not None:
            if cover.family == "torus":
                out += eps * bump.value_at_lift(cover.lift(point))
            else:
                out += eps * bump.value_at(point.base)
        return out

    return value


# ---------------------------------------------------------------------------
# graph actions: time allocation over traversal multisets


def allocate_time(segments, total_time: float, rest_potential: float):
    """Price a fixed multiset of (length, potential) runs over a horizon.

    All runs share one energy level E (the Lagrange multiplier of the
    time constraint); resting pins E at -rest_potential and absorbs any
    leftover horizon.  Returns (cost, energy, rest_time).

    Internally the energy is handled as an offset s = E + min V above
    the blow-up level, so brackets stay meaningful even when the root
    sits within one ulp of the singular endpoint.
    """
    if total_time <= 0.0:
        raise ValueError("total_time must be positive")
    segs = [(float(l), float(v)) for l, v in segments if l > 1e-140]
    if not segs:
        return rest_potential * total_time, -rest_potential, total_time
    v_floor = min(v for _, v in segs)
    v_rest = min(rest_potential, v_floor)
    # per-segment gap above the cheapest potential; exact when equal
    offs = [(l, v, max(0.0, v - v_floor)) for l, v in segs]

    def travel_time(s):
        return sum(l / math.sqrt(2.0 * (off + s)) for l, _, off in offs)

    def travel_cost(s):
        out = 0.0
        for l, v, off in offs:
            u = off + s
            out += l * (v + u) / math.sqrt(2.0 * u)
        return out

    s_rest = v_floor - v_rest
    if s_rest > 0.0:
        t_rest = travel_time(s_rest)
        if t_rest <= total_time:
            return (travel_cost(s_rest) + (total_time - t_rest) * v_rest,
                    -v_rest, total_time - t_rest)

    lo = 1.0
    while travel_time(lo) < total_time:
        lo /= 16.0
        if lo < 1e-310:
            raise SolverError("time allocation bracket underflowed")
    hi = max(2.0 * lo, 1.0)
    while travel_time(hi) > total_time:
        hi *= 2.0
        if hi > 1e18:
            raise SolverError("time allocation bracket blew up")
    # root can sit arbitrarily close to 0, so convergence must be relative
    s_star = optimize.brentq(lambda s: travel_time(s) - total_time, lo, hi,
                             xtol=1e-300, rtol=8.9e-16, maxiter=600)
    return travel_cost(s_star), float(s_star - v_floor), 0.0


def _tree_flow(graph, divergence: np.ndarray) -> dict:
    """Unique flow on the spanning tree matching a divergence vector."""
    parent = {0: None}
    parent_edge = {}
    order = [0]
    seen = {0}
    for u in order:
        for idx, direction in graph.incident[u]:
            if not graph.tree_edge[idx]:
                continue
            a, b, _ = graph.edges[idx]
            other = b if direction == +1 else a
            if other not in seen:
                seen.add(other)
                parent[other] = u
                parent_edge[other] = idx
                order.append(other)
    flows = {}
    carry = {v: float(divergence[v]) for v in range(graph.n_vertices)}
    for v in reversed(order):
        if parent[v] is None:
            continue
        e = parent_edge[v]
        a, b, _ = graph.edges[e]
        # flow out of the subtree rooted at v
        flows[e] = carry[v] if a == v else -carry[v]
        carry[parent[v]] += carry[v]
    if abs(carry[0]) > 1e-9:
        raise SolverError("tree flow divergence mismatch")
    return flows


def _edge_divergence(graph, edge_flows: dict) -> np.ndarray:
    div = np.zeros(graph.n_vertices)
    for e, m in edge_flows.items():
        u, v, _ = graph.edges[e]
        div[u] += m
        div[v] -= m
    return div


def _used_subgraph_connected(graph, counts, anchor: int) -> bool:
    used = [e for e, c in enumerate(counts) if c > 0]
    if not used:
        return True
    verts = {anchor}
    for e in used:
        u, v, _ = graph.edges[e]
        verts.add(u)
        verts.add(v)
    reached = {anchor}
    frontier = [anchor]
    while frontier:
        w = frontier.pop()
        for idx, _ in graph.incident[w]:
            if counts[idx] <= 0:
                continue
            u, v, _ = graph.edges[idx]
            for other in (u, v):
                if other not in reached:
                    reached.add(other)
                    frontier.append(other)
    return verts <= reached


def _vertex_rest_rate(lagrangian: GraphLagrangian, v: int) -> float:
    graph = lagrangian.graph
    rates = [lagrangian.potentials[e] for e, _ in graph.incident[v]]
    return min(rates)


def _attachment_list(cover, point: CoverPoint):
    if point.base[0] == "v":
        return [(point.base[1], np.array(point.sheet, dtype=int), 0.0, None)]
    _, e, s = point.base
    g = cover.graph
    sheet = np.array(point.sheet, dtype=int)
    return [
        (g.tail(e), sheet, s, e),
        (g.head(e), sheet + g.cocycles[e], g.length(e) - s, e),
    ]


def minimal_action_graph(lagrangian: GraphLagrangian, cover, y: CoverPoint,
                         x: CoverPoint, horizon: float, extra_cap: int = None,
                         details: bool = False):
    """Exact two-point action on a graph cover.

    The action of a path depends on its edge-traversal multiset only, so
    the infimum is a finite minimum: net traversals are forced by the
    sheet change (non-tree edges) and endpoint balance (tree edges), and
    a bounded number of extra back-and-forth pairs covers detours to
    cheaper ground.  Each multiset is priced by ``allocate_time`` with
    resting allowed at the cheapest reachable potential.
    """
    graph = cover.graph
    if extra_cap is None:
        extra_cap = 3 if len(graph.edges) <= 4 else 2
    pots = lagrangian.potentials
    best = (math.inf, None)

    # direct within-edge candidate (never touches a vertex)
    if (y.base[0] == "e" and x.base[0] == "e" and y.base[1] == x.base[1]
            and y.sheet == x.sheet):
        e = y.base[1]
        cost, energy, rest = allocate_time([(abs(x.base[2] - y.base[2]), pots[e])],
                                           horizon, pots[e])
        best = min(best, (cost, {"route": "direct", "energy": energy,
                                 "rest_time": rest}), key=lambda z: z[0])

    r_ranges = [range(extra_cap + 1)] * len(graph.edges)
    for (va, za, off_y, e_y) in _attachment_list(cover, y):
        for (vb, zb, off_x, e_x) in _attachment_list(cover, x):
            net = zb - za
            flows = {e: float(net[j]) for j, e in enumerate(graph.nontree_edges)}
            target_div = np.zeros(graph.n_vertices)
            target_div[va] += 1.0
            target_div[vb] -= 1.0
            residual = target_div - _edge_divergence(graph, flows)
            flows.update(_tree_flow(graph, residual))
            m = np.zeros(len(graph.edges))
            for e, val in flows.items():
                m[e] = val
            m_int = np.round(m).astype(int)
            if np.max(np.abs(m - m_int)) > 1e-9:
                raise SolverError("non-integral edge flow")
            partials = []
            if off_y > 0.0:
                partials.append((off_y, pots[e_y]))
            if off_x > 0.0:
                partials.append((off_x, pots[e_x]))
            for extras in itertools.product(*r_ranges):
                if sum(extras) > extra_cap:
                    continue
                counts = np.abs(m_int) + 2 * np.asarray(extras, dtype=int)
                if not _used_subgraph_connected(graph, counts, va):
                    continue
                if counts.sum() == 0 and va != vb:
                    continue
                segments = list(partials)
                rest_pool = []
                for e, c in enumerate(counts):
                    if c > 0:
                        segments.append((c * graph.length(e), pots[e]))
                        rest_pool.append(pots[e])
                visited = {va, vb}
                for e, c in enumerate(counts):
                    if c > 0:
                        visited.add(graph.tail(e))
                        visited.add(graph.head(e))
                rest_pool.extend(_vertex_rest_rate(lagrangian, v) for v in visited)
                rest_pool.extend(v for _, v in partials)
                rest = min(rest_pool)
                cost, energy, rest_time = allocate_time(segments, horizon, rest)
                if cost < best[0]:
                    best = (cost, {"route": "walk", "counts": counts.tolist(),
                                   "anchors": (va, vb), "energy": energy,
                                   "rest_time": rest_time})
    if not math.isfinite(best[0]):
        raise SolverError("no feasible traversal multiset found")
    return best if details else best[0]


# ---------------------------------------------------------------------------
# torus actions: piecewise-linear trajectory descent


class _TrajectoryCost:
    """Midpoint-rule action of a node chain, with analytic gradient."""

    def __init__(self, model: TorusHamiltonian, horizon: float, n_segments: int):
        self.model = model
        self.horizon = float(horizon)
        self.n_segments = int(n_segments)
        self.dt = self.horizon / self.n_segments

    def action_grad(self, nodes: np.ndarray):
        model = self.model
        dt = self.dt
        diffs = nodes[1:] - nodes[:-1]
        vel = diffs / dt
        mid = 0.5 * (nodes[1:] + nodes[:-1])
        grad = np.zeros_like(nodes)
        if model.n == 1:
            a = model.a_entries[0].value_many(mid)
            vv = vel[:, 0]
            w = vv / a
            kin = 0.5 * vv * w
            pot = model.v.value_many(mid)
            act = dt * float(np.sum(kin - pot))
            da = model.a_entries[0].gradient_many(mid)[:, 0]
            dmid = -0.5 * w * w * da - model.v.gradient_many(mid)[:, 0]
            grad[1:, 0] += w + 0.5 * dt * dmid
            grad[:-1, 0] += -w + 0.5 * dt * dmid
            return act, grad
        a11 = model.a_entries[0].value_many(mid)
        a12 = model.a_entries[1].value_many(mid)
        a22 = model.a_entries[2].value_many(mid)
        det = a11 * a22 - a12 * a12
        w1 = (a22 * vel[:, 0] - a12 * vel[:, 1]) / det
        w2 = (-a12 * vel[:, 0] + a11 * vel[:, 1]) / det
        kin = 0.5 * (w1 * vel[:, 0] + w2 * vel[:, 1])
        pot = model.v.value_many(mid)
        act = dt * float(np.sum(kin - pot))
        g11 = model.a_entries[0].gradient_many(mid)
        g12 = model.a_entries[1].gradient_many(mid)
        g22 = model.a_entries[2].gradient_many(mid)
        gv = model.v.gradient_many(mid)
        # d(kin)/dx = -w . (dA/dx) . w / 2 with w = A^{-1} v
        dmid = -0.5 * (g11 * (w1 * w1)[:, None] + 2.0 * g12 * (w1 * w2)[:, None]
                       + g22 * (w2 * w2)[:, None]) - gv
        wvec = np.stack([w1, w2], axis=1)
        grad[1:] += wvec + 0.5 * dt * dmid
        grad[:-1] += -wvec + 0.5 * dt * dmid
        return act, grad


def _chain_inits(y_lift: np.ndarray, x_lift: np.ndarray, n_segments: int,
                 full: bool):
    frac = np.linspace(0.0, 1.0, n_segments + 1)[:, None]
    straight = y_lift[None, :] + frac * (x_lift - y_lift)[None, :]
    inits = [straight]
    if full:
        hump = np.sin(math.pi * frac)
        dim = y_lift.size
        for axis in range(dim):
            for amp in (0.35, -0.35):
                bumped = straight.copy()
                bumped[:, axis] += amp * hump[:, 0]
                inits.append(bumped)
    return inits


def _solve_fixed_chain(cost: _TrajectoryCost, nodes0: np.ndarray,
                       maxiter: int = 400):
    shape = nodes0.shape
    fixed_first = nodes0[0].copy()
    fixed_last = nodes0[-1].copy()

    def fun(flat):
        nodes = np.empty(shape)
        nodes[0] = fixed_first
        nodes[-1] = fixed_last
        nodes[1:-1] = flat.reshape(shape[0] - 2, shape[1])
        act, grad = cost.action_grad(nodes)
        return act, grad[1:-1].ravel()

    if shape[0] <= 2:
        act, _ = cost.action_grad(nodes0)
        return act, nodes0
    res = optimize.minimize(fun, nodes0[1:-1].ravel(), jac=True, method="L-BFGS-B",
                            options={"maxiter": maxiter, "ftol": 1e-15,
                                     "gtol": 1e-11})
    nodes = np.empty(shape)
    nodes[0] = fixed_first
    nodes[-1] = fixed_last
    nodes[1:-1] = res.x.reshape(shape[0] - 2, shape[1])
    return float(res.fun), nodes


def _refine_nodes(nodes: np.ndarray) -> np.ndarray:
    m, dim = nodes.shape
    old = np.linspace(0.0, 1.0, m)
    new = np.linspace(0.0, 1.0, 2 * (m - 1) + 1)
    out = np.empty((new.size, dim))
    for c in range(dim):
        out[:, c] = np.interp(new, old, nodes[:, c])
    return out


def _auto_segments(horizon: float) -> int:
    return int(min(1024, max(64, 16 * math.ceil(horizon))))


def minimal_action_torus(model: TorusHamiltonian, y_lift, x_lift, horizon: float,
                         tol: float = 1e-6, n_segments: int = None,
                         max_segments: int = 2048, full_inits: bool = True,
                         details: bool = False):
    """Two-point action on the R^n cover by trajectory descent.

    Piecewise-linear chains with midpoint quadrature, L-BFGS descent from
    a straight line plus deterministic sinusoidal perturbations, and
    segment doubling until the action change drops below tol.
    """
    y_lift = np.atleast_1d(np.asarray(y_lift, dtype=float))
    x_lift = np.atleast_1d(np.asarray(x_lift, dtype=float))
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    n = n_segments or _auto_segments(horizon)
    best_val, best_nodes = math.inf, None
    for init in _chain_inits(y_lift, x_lift, n, full_inits):
        val, nodes = _solve_fixed_chain(_TrajectoryCost(model, horizon, n), init)
        if val < best_val:
            best_val, best_nodes = val, nodes
    while n < max_segments:
        n *= 2
        refined = _refine_nodes(best_nodes)
        val, nodes = _solve_fixed_chain(_TrajectoryCost(model, horizon, n), refined)
        improved = best_val - val
        best_val, best_nodes = val, nodes
        if abs(improved) < tol:
            break
    if details:
        return best_val, best_nodes
    return best_val


class _SlowTimeCost:
    """Chain cost of the compressed-time route: integrate L(x, eps*v)
    over horizon t with nodes still in cover coordinates.

    Substituting s = sigma/eps in the action integral turns
    eps * action(y, x, t/eps) into the integral of L(xi, eps*xi') over
    [0, t]; the quadrature below runs entirely in compressed time, so
    agreement with the direct route is a real cross-check.
    """

    def __init__(self, model: TorusHamiltonian, eps: float, t: float,
                 n_segments: int):
        self.model = model
        self.eps = float(eps)
        self.horizon = float(t)
        self.n_segments = int(n_segments)
        self.dt = self.horizon / self.n_segments

    def action_grad(self, nodes: np.ndarray):
        model = self.model
        dt = self.dt
        eps = self.eps
        svel = eps * (nodes[1:] - nodes[:-1]) / dt
        mid = 0.5 * (nodes[1:] + nodes[:-1])
        grad = np.zeros_like(nodes)
        if model.n == 1:
            a = model.a_entries[0].value_many(mid)
            w = svel[:, 0] / a
            kin = 0.5 * svel[:, 0] * w
            pot = model.v.value_many(mid)
            act = dt * float(np.sum(kin - pot))
            da = model.a_entries[0].gradient_many(mid)[:, 0]
            dmid = -0.5 * w * w * da - model.v.gradient_many(mid)[:, 0]
            grad[1:, 0] += eps * w + 0.5 * dt * dmid
            grad[:-1, 0] += -eps * w + 0.5 * dt * dmid
            return act, grad
        a11 = model.a_entries[0].value_many(mid)
        a12 = model.a_entries[1].value_many(mid)
        a22 = model.a_entries[2].value_many(mid)
        det = a11 * a22 - a12 * a12
        w1 = (a22 * svel[:, 0] - a12 * svel[:, 1]) / det
        w2 = (-a12 * svel[:, 0] + a11 * svel[:, 1]) / det
        kin = 0.5 * (w1 * svel[:, 0] + w2 * svel[:, 1])
        pot = model.v.value_many(mid)
        act = dt * float(np.sum(kin - pot))
        g11 = model.a_entries[0].gradient_many(mid)
        g12 = model.a_entries[1].gradient_many(mid)
        g22 = model.a_entries[2].gradient_many(mid)
        gv = model.v.gradient_many(mid)
        dmid = -0.5 * (g11 * (w1 * w1)[:, None] + 2.0 * g12 * (w1 * w2)[:, None]
                       + g22 * (w2 * w2)[:, None]) - gv
        wvec = eps * np.stack([w1, w2], axis=1)
        grad[1:] += wvec + 0.5 * dt * dmid
        grad[:-1] += -wvec + 0.5 * dt * dmid
        return act, grad


def minimal_action_torus_rescaled(model: TorusHamiltonian, eps: float, y_lift,
                                  x_lift, t: float, tol: float = 1e-6,
                                  max_segments: int = 2048) -> float:
    """Second route to eps * action(y, x, t/eps), via compressed time."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    y_lift = np.atleast_1d(np.asarray(y_lift, dtype=float))
    x_lift = np.atleast_1d(np.asarray(x_lift, dtype=float))
    n = _auto_segments(t / eps)
    best_val, best_nodes = math.inf, None
    for init in _chain_inits(y_lift, x_lift, n, True):
        val, nodes = _solve_fixed_chain(_SlowTimeCost(model, eps, t, n), init)
        if val < best_val:
            best_val, best_nodes = val, nodes
    while n < max_segments:
        n *= 2
        refined = _refine_nodes(best_nodes)
        val, nodes = _solve_fixed_chain(_SlowTimeCost(model, eps, t, n), refined)
        improved = best_val - val
        best_val, best_nodes = val, nodes
        if abs(improved) < tol * max(eps, 1e-12):
            break
    return best_val


def minimal_action(cover, lagrangian, query: ActionQuery, **kwargs) -> float:
    """Two-point action, dispatched on the cover family."""
    if cover.family == "graph":
        return minimal_action_graph(lagrangian, cover, query.start, query.end,
                                    query.horizon, **kwargs)
    return minimal_action_torus(lagrangian, cover.lift(query.start),
                                cover.lift(query.end), query.horizon, **kwargs)


# ---------------------------------------------------------------------------
# search windows


def _family_constants(cover, lagrangian):
    """(quad, drift, rest_max): action >= d^2/(2*quad*T) - drift*T and
    staying put costs at most rest_max per unit time."""
    if cover.family == "graph":
        vmin = lagrangian.min_potential()
        vmax = float(np.max(lagrangian.potentials))
        return 1.0, -vmin, vmax
    _, amax = lagrangian.kinetic_eig_bounds()
    vmin, vmax = lagrangian.potential_bounds()
    return float(amax), float(vmax), float(-vmin)


def _window_radius(quad: float, t: float, a_slope: float, k0: float,
                   m_const: float) -> float:
    """Largest rescaled distance a minimizer can sit at.

    Solves D^2/(2*quad*t) <= A*K0*D + m_const for D >= 0.
    """
    lin = quad * t * a_slope * k0
    inner = lin * lin + 2.0 * quad * t * m_const
    return lin + math.sqrt(max(0.0, inner))


def search_radius(datum: InitialDatum, cover, lagrangian, eps: float,
                  box_radius: float, t_interval, bump_bound: float = 0.0) -> float:
    """Certified bound on d_eps(x, y) for any minimizer y of the cover
    formula, uniform over x with |F_eps(x)| <= box_radius and t in the
    interval.

    Chain: the datum can pay at most its growth along the window, the
    action grows quadratically in distance, and the staying-put candidate
    caps the optimum.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    quad, drift, rest_max = _family_constants(cover, lagrangian)
    a_slope, b_const = datum.growth_constants(cover.norm)
    k0 = cover.g_lipschitz()
    pb = eps * bump_bound
    t_lo, t_hi = (t_interval if isinstance(t_interval, (tuple, list))
                  else (t_interval, t_interval))
    best = 0.0
    for t in {t_lo, t_hi, 0.5 * (t_lo + t_hi)}:
        if t <= 0.0:
            raise ValueError("time interval must be positive")
        incumbent = datum.upper_bound(box_radius, cover.norm) + pb + rest_max * t
        m_const = (incumbent + a_slope * box_radius + b_const + pb + drift * t)
        best = max(best, _window_radius(quad, t, a_slope, k0, m_const))
    return best


# ---------------------------------------------------------------------------
# Lax-Oleinik on covers


@dataclass
class LaxResult:
    value: float
    minimizer_g: np.ndarray
    window: float
    candidates: int
    evaluated: int
    mesh: int
    diagnostics: dict = field(default_factory=dict)


def _bump_value_lift(bump, lifts: np.ndarray) -> np.ndarray:
    if bump is None:
        return np.zeros(lifts.shape[0])
    return bump.value_many(lifts)


def _row_norms(rows: np.ndarray, kind: str) -> np.ndarray:
    if kind == "l1":
        return np.sum(np.abs(rows), axis=1)
    if kind == "linf":
        return np.max(np.abs(rows), axis=1)
    return np.sqrt(np.sum(rows * rows, axis=1))


def _shell_offsets(n: int, s: int) -> np.ndarray:
    """Integer offsets with sup-norm exactly s, as an (m, n) array."""
    if s == 0:
        return np.zeros((1, n), dtype=int)
    if n == 1:
        return np.array([[-s], [s]], dtype=int)
    if n == 2:
        edge = np.arange(-s, s + 1)
        inner = np.arange(-s + 1, s)
        return np.concatenate([
            np.stack([np.full(edge.size, -s), edge], axis=1),
            np.stack([np.full(edge.size, s), edge], axis=1),
            np.stack([inner, np.full(inner.size, -s)], axis=1),
            np.stack([inner, np.full(inner.size, s)], axis=1),
        ]).astype(int)
    cells = [dz for dz in itertools.product(range(-s, s + 1), repeat=n)
             if max(abs(v) for v in dz) == s]
    return np.array(cells, dtype=int)


def _lax_torus(cover, model, datum, bump, x, t, eps, mesh, n_top, action_tol):
    horizon = t / eps
    x_lift = cover.lift(x)
    hx = eps * x_lift
    quad, drift, _ = _family_constants(cover, model)
    a_slope, b_const = datum.growth_constants(cover.norm)
    pb = eps * (bump.bound() if bump is not None else 0.0)

    stay, stay_nodes = minimal_action_torus(model, x_lift, x_lift, horizon,
                                            tol=action_tol, details=True)
    bump_x = eps * bump.value_at_lift(x_lift) if bump is not None else 0.0
    incumbent = datum.value(hx) + bump_x + eps * stay
    best_nodes = stay_nodes
    best_g = x_lift.copy()

    m_const = (incumbent - (-a_slope * norm_value(hx, cover.norm) - b_const - pb)
               + drift * t)
    window = _window_radius(quad, t, a_slope, cover.g_lipschitz(), m_const)

    # candidate lifts: mesh fractions per translate cell, cells swept in
    # expanding shells around x; a straight-path upper bound tightens the
    # incumbent during the sweep so only the competitive band of cells is
    # ever materialized (the naive product grid is quadratically larger)
    reach = window / eps
    amin, _ = model.kinetic_eig_bounds()
    vmin, _ = model.potential_bounds()
    f_hx = datum.value(hx)
    lip = datum.lipschitz_bound(norm_value(hx, cover.norm) + window + 1.0,
                                cover.norm)
    n = model.n
    fracs = np.arange(mesh) / mesh
    if n == 1:
        offsets = fracs[:, None]
    else:
        aa, bb = np.meshgrid(fracs, fracs, indexing="ij")
        offsets = np.stack([aa.ravel(), bb.ravel()], axis=1)
    cell_diam = norm_value(np.ones(n), cover.norm)
    center = np.floor(x_lift).astype(int)
    max_shell = int(math.ceil(reach)) + 2
    vertex_d = lip * quad * t

    # corner pre-sweep: price one straight path per translate cell so the
    # incumbent is near-optimal before any cell is materialized; corners are
    # themselves candidates, so every bound stays achievable
    span = np.arange(-max_shell, max_shell + 1)
    if n == 1:
        corners = center[None, :] + span[:, None]
    else:
        ca, cb = np.meshgrid(span, span, indexing="ij")
        corners = center[None, :] + np.stack([ca.ravel(), cb.ravel()], axis=1)
    corners = corners.astype(float)
    cdiff = corners - x_lift[None, :]
    cd2 = np.sqrt(np.sum(cdiff * cdiff, axis=1))
    sel = cd2 <= reach + cell_diam
    if np.any(sel):
        cf = (datum.value_many(eps * corners[sel])
              + eps * _bump_value_lift(bump, corners[sel]))
        cup = cf + (eps * cd2[sel]) ** 2 / (2.0 * amin * t) - vmin * t
        incumbent = min(incumbent, float(np.min(cup)))

    parts = {"lift": [], "f": [], "dist": [], "low": []}
    stored = 0

    def _compact(limit: float):
        nonlocal stored
        for name in parts:
            parts[name] = [np.concatenate(parts[name])] if parts[name] else []
        if parts["low"]:
            keep = parts["low"][0] <= limit + 1e-9
            for name in parts:
                parts[name] = [parts[name][0][keep]]
            stored = int(np.count_nonzero(keep))

    for s in range(max_shell + 1):
        ring = center[None, :] + _shell_offsets(n, s)
        gaps = np.maximum(np.maximum(ring - x_lift[None, :],
                                     x_lift[None, :] - (ring + 1.0)), 0.0)
        d_los = _row_norms(gaps, cover.norm)
        lb_cells = (f_hx - pb - lip * eps * (d_los + cell_diam)
                    + (eps * d_los) ** 2 / (2.0 * quad * t) - drift * t)
        if (float(np.min(lb_cells)) > incumbent + 1e-12
                and eps * float(np.min(d_los)) > vertex_d):
            break
        live = ring[lb_cells <= incumbent + 1e-12]
        if live.shape[0] == 0:
            continue
        lifts_c = (live[:, None, :] + offsets[None, :, :]).reshape(-1, n)
        diff = lifts_c - x_lift[None, :]
        d2_c = np.sqrt(np.sum(diff * diff, axis=1))
        d_c = d2_c if cover.norm == "l2" else _row_norms(diff, cover.norm)
        f_c = (datum.value_many(eps * lifts_c)
               + eps * _bump_value_lift(bump, lifts_c))
        low_c = f_c + (eps * d_c) ** 2 / (2.0 * quad * t) - drift * t
        up_c = f_c + (eps * d2_c) ** 2 / (2.0 * amin * t) - vmin * t
        incumbent = min(incumbent, float(np.min(up_c)))
        keep = (low_c <= incumbent + 1e-9) & (d_c <= reach + 1e-12)
        if not np.any(keep):
            continue
        parts["lift"].append(lifts_c[keep])
        parts["f"].append(f_c[keep])
        parts["dist"].append(d_c[keep])
        parts["low"].append(low_c[keep])
        stored += int(np.count_nonzero(keep))
        if stored > 2_000_000:
            _compact(incumbent)
    _compact(incumbent)
    if parts["lift"]:
        lifts = parts["lift"][0]
        f_vals = parts["f"][0]
        dist = parts["dist"][0]
        lower = parts["low"][0]
    else:
        lifts = np.zeros((0, n))
        f_vals = dist = lower = np.zeros(0)
    order = np.argsort(lower, kind="stable")
    n_candidates = lifts.shape[0]

    coarse_n = max(32, _auto_segments(horizon) // 4)
    scored = []
    evaluated = 0
    for idx in order:
        if lower[idx] > incumbent + 1e-12:
            break
        if dist[idx] < 1e-12:
            continue
        init = _chain_inits(lifts[idx], x_lift, coarse_n, False)[0]
        val, nodes = _solve_fixed_chain(_TrajectoryCost(model, horizon, coarse_n),
                                        init, maxiter=150)
        total = f_vals[idx] + eps * val
        evaluated += 1
        scored.append((total, idx, nodes))
        incumbent = min(incumbent, total)
    scored.sort(key=lambda z: z[0])
    for total_c, idx, _ in scored[:n_top]:
        val, nodes = minimal_action_torus(model, lifts[idx], x_lift, horizon,
                                          tol=action_tol, details=True)
        total = f_vals[idx] + eps * val
        if total < incumbent:
            incumbent = total
            best_nodes = nodes
            best_g = lifts[idx]

    polished = _joint_polish_torus(model, datum, bump, eps, t, best_nodes,
                                   action_tol)
    if polished is not None and polished[0] < incumbent:
        incumbent, best_g = polished
    return LaxResult(value=float(incumbent), minimizer_g=np.asarray(best_g),
                     window=window, candidates=int(n_candidates),
                     evaluated=evaluated, mesh=mesh)


def _joint_polish_torus(model, datum, bump, eps, t, nodes, action_tol):
    """Descend over the start point and the chain together.

    Only used when the datum has a gradient; the cone with a polyhedral
    norm falls back to the mesh value.
    """
    probe = datum.gradient(np.zeros(model.n))
    if probe is None:
        return None
    horizon = t / eps
    shape = nodes.shape
    cost = _TrajectoryCost(model, horizon, shape[0] - 1)
    fixed_last = nodes[-1].copy()

    def fun(flat):
        chain = np.empty(shape)
        chain[-1] = fixed_last
        chain[:-1] = flat.reshape(shape[0] - 1, shape[1])
        act, grad = cost.action_grad(chain)
        q0 = chain[0]
        val = datum.value(eps * q0) + eps * act
        full_grad = eps * grad
        dgrad = datum.gradient(eps * q0)
        full_grad[0] += eps * dgrad
        if bump is not None:
            val += eps * bump.value_at_lift(q0)
            full_grad[0] += eps * bump.gradient_at_lift(q0)
        return val, full_grad[:-1].ravel()

    res = optimize.minimize(fun, nodes[:-1].ravel(), jac=True, method="L-BFGS-B",
                            options={"maxiter": 1500, "ftol": 1e-15,
                                     "gtol": 1e-11, "maxcor": 12})
    chain = np.empty(shape)
    chain[-1] = fixed_last
    chain[:-1] = res.x.reshape(shape[0] - 1, shape[1])
    return float(res.fun), chain[0]


def _golden_min(fn, lo: float, hi: float, tol: float = 1e-9):
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = fn(c), fn(d)
    while (b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = fn(d)
    s = 0.5 * (a + b)
    return s, fn(s)


def _lax_graph(cover, lagrangian, datum, bump, x, t, eps, mesh, action_tol):
    graph = cover.graph
    horizon = t / eps
    gx = cover.g_map(x)
    hx = eps * gx
    quad, drift, _ = _family_constants(cover, lagrangian)
    a_slope, b_const = datum.growth_constants(cover.norm)
    pb = eps * (bump.bound() if bump is not None else 0.0)
    k0 = cover.g_lipschitz()

    cdatum = datum_on_cover(cover, datum, eps, bump)
    incumbent = cdatum(x) + eps * minimal_action_graph(lagrangian, cover, x, x,
                                                       horizon)
    best_point = x
    m_const = (incumbent + a_slope * norm_value(hx, cover.norm) + b_const + pb
               + drift * t)
    window = _window_radius(quad, t, a_slope, k0, m_const)

    lmin = max(graph.min_nontree_length(), 1e-12)
    sheet_reach = int(math.ceil(window / (eps * lmin))) + 2
    x_sheet = np.array(x.sheet, dtype=int)
    sheet_axes = [np.arange(x_sheet[j] - sheet_reach, x_sheet[j] + sheet_reach + 1)
                  for j in range(cover.deck_rank)]
    sheets = np.array(list(itertools.product(*sheet_axes)), dtype=int) \
        if cover.deck_rank else np.zeros((1, 0), dtype=int)

    base_locs = cover.base_mesh(mesh)
    n_sheets = sheets.shape[0]
    lb_all = np.empty(len(base_locs) * n_sheets)
    f_all = np.empty_like(lb_all)
    for i, loc in enumerate(base_locs):
        g0 = cover.g_of_base(loc)
        rows = sheets + g0[None, :]
        f_rows = datum.value_many(eps * rows)
        if bump is not None:
            f_rows = f_rows + eps * bump.value_at(loc)
        diff = rows - gx[None, :]
        if cover.norm == "l1":
            d_lb = np.sum(np.abs(diff), axis=1)
        elif cover.norm == "l2":
            d_lb = np.sqrt(np.sum(diff * diff, axis=1))
        else:
            d_lb = (np.max(np.abs(diff), axis=1) if diff.shape[1]
                    else np.zeros(n_sheets))
        d_lb = d_lb / max(k0, 1e-12)
        sl = slice(i * n_sheets, (i + 1) * n_sheets)
        f_all[sl] = f_rows
        lb_all[sl] = f_rows + (eps * d_lb) ** 2 / (2.0 * quad * t) - drift * t
    order = np.argsort(lb_all, kind="stable")

    evaluated = 0
    best_desc = None
    for flat in order:
        if lb_all[flat] > incumbent + 1e-12:
            break
        loc = base_locs[flat // n_sheets]
        sheet = tuple(int(z) for z in sheets[flat % n_sheets])
        if loc[0] == "v":
            point = cover.vertex_point(loc[1], np.array(sheet, dtype=int))
        else:
            point = cover.edge_point(loc[1], loc[2], np.array(sheet, dtype=int))
        if point == x:
            continue
        total = f_all[flat] + eps * minimal_action_graph(lagrangian, cover,
                                                         point, x, horizon)
        evaluated += 1
        if total < incumbent:
            incumbent = total
            best_point = point
            best_desc = (loc, sheet)

    # continuous polish along the best candidate's edge (or incident edges)
    polish_domains = []
    if best_desc is not None and best_desc[0][0] == "e":
        e = best_desc[0][1]
        polish_domains.append((e, np.array(best_desc[1], dtype=int)))
    elif best_point.base[0] == "e":
        polish_domains.append((best_point.base[1],
                               np.array(best_point.sheet, dtype=int)))
    else:
        v = best_point.base[1]
        for e, direction in graph.incident[v]:
            sheet = np.array(best_point.sheet, dtype=int)
            if direction == -1:
                sheet = sheet - graph.cocycles[e]
            polish_domains.append((e, sheet))
    seen = set()
    for e, sheet in polish_domains:
        key = (e, tuple(int(z) for z in sheet))
        if key in seen:
            continue
        seen.add(key)
        length = graph.length(e)

        def objective(s, e=e, sheet=sheet):
            point = cover.edge_point(e, min(max(s, 0.0), length), sheet)
            return cdatum(point) + eps * minimal_action_graph(
                lagrangian, cover, point, x, horizon)

        s_best, val = _golden_min(objective, 0.0, length, tol=1e-9 * max(1.0, length))
        if val < incumbent:
            incumbent = val
            best_point = cover.edge_point(e, s_best, sheet)

    return LaxResult(value=float(incumbent), minimizer_g=cover.g_map(best_point),
                     window=window, candidates=int(lb_all.size),
                     evaluated=evaluated, mesh=mesh)


def lax_oleinik(cover, lagrangian, datum: InitialDatum, x: CoverPoint, t: float,
                eps: float, bump=None, mesh: int = 64, n_top: int = 6,
                action_tol: float = 1e-7, details: bool = False):
    """Rescaled cover solution at (x, t): inf over starting points of
    datum(F_eps(y)) [+ eps*bump(y)] + eps * action(y, x, t/eps).

    Candidates live on a base mesh crossed with a sheet window certified
    by the search-radius chain; survivors are priced exactly and the
    winner is polished continuously.
    """
    if t <= 0.0:
        raise ValueError(f"time must be positive, got {t}")
    if eps <= 0.0:
        raise ValueError(f"scale eps must be positive, got {eps}")
    if cover.family == "graph":
        result = _lax_graph(cover, lagrangian, datum, bump, x, t, eps, mesh,
                            action_tol)
    else:
        result = _lax_torus(cover, lagrangian, datum, bump, x, t, eps, mesh,
                            n_top, action_tol)
    return result if details else result.value


# ---------------------------------------------------------------------------
# Hopf-Lax on homology space


@dataclass
class HopfResult:
    value: float
    minimizer_q: np.ndarray
    window: float
    evaluated: int


def hopf_lax(beta_eval, datum: InitialDatum, h, t: float,
             details: bool = False):
    """Limit solution u(h, t) = min_q datum(q) + t * beta((h - q)/t).

    ``beta_eval`` must expose value(w), norm, coercivity() -> (kappa,
    v_off, norm_kind) certifying beta(w) >= kappa*|w|^2 - v_off, and
    candidate_nodes(radius) for seeding.  The q-window is certified from
    the datum growth and that coercivity; a simplex polish refines the
    best node.
    """
    if t <= 0.0:
        raise ValueError(f"time must be positive, got {t}")
    h = np.atleast_1d(np.asarray(h, dtype=float))
    norm = beta_eval.norm
    a_slope, b_const = datum.growth_constants(norm)
    kappa, v_off, knorm = beta_eval.coercivity()
    c1 = norm_ratio(knorm, norm, h.size)

    incumbent = datum.value(h) + t * beta_eval.value(np.zeros_like(h))
    best_q = h.copy()

    budget = incumbent + a_slope * norm_value(h, norm) + b_const + t * v_off
    lin = a_slope * c1 / (2.0 * kappa)
    r_max = lin + math.sqrt(max(0.0, lin * lin + max(0.0, budget) / (t * kappa)))
    box = getattr(beta_eval, "box_radius", lambda: None)()
    if box is not None and box + 1e-12 < r_max:
        raise SolverError(
            f"beta evaluator box {box} smaller than certified window {r_max:.3g}")

    evaluated = 0
    for w in beta_eval.candidate_nodes(r_max):
        w = np.asarray(w, dtype=float)
        q = h - t * w
        val = datum.value(q) + t * beta_eval.value(w)
        evaluated += 1
        if val < incumbent:
            incumbent = val
            best_q = q

    def objective(q):
        return datum.value(q) + t * beta_eval.value((h - q) / t)

    res = optimize.minimize(objective, best_q, method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-12,
                                     "maxiter": 4000, "maxfev": 8000})
    if res.fun < incumbent:
        incumbent = float(res.fun)
        best_q = np.atleast_1d(res.x)
    if details:
        return HopfResult(value=float(incumbent), minimizer_q=best_q,
                          window=float(r_max), evaluated=evaluated)
    return float(incumbent)
