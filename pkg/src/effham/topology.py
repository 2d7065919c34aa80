"""Abelian covers of flat tori and metric graphs.

The covers used here are the maximal free abelian ones.  For a torus the
cover is R^n with deck group Z^n acting by translation.  For a metric
graph the deck group is Z^k with k the cycle rank; sheets are glued along
the non-tree edges of a fixed spanning tree.

Every cover carries a coordinate map ``g_map`` into R^k (integrated
closed one-forms, normalized to vanish at the base point) and its scaled
version ``f_eps = eps * g_map``.  Distances are geodesic in the lifted
metric: exact Euclidean for tori, Dijkstra over a certified sheet window
for graphs.

Surjections of the deck group onto Z^l ("subcover maps") are integer
matrices validated through their Smith normal form; intermediate covers
are represented by projected sheets and a translate-minimizing metric.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import WindowExhaustedError

_NORMS = ("l1", "l2", "linf")


def norm_value(v, kind: str) -> float:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if kind == "l1":
        return float(np.sum(np.abs(v)))
    if kind == "l2":
        return float(np.sqrt(np.sum(v * v)))
    if kind == "linf":
        return float(np.max(np.abs(v))) if v.size else 0.0
    raise ValueError(f"unknown norm {kind!r}")


def dual_norm_value(v, kind: str) -> float:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if kind == "l1":
        return float(np.max(np.abs(v))) if v.size else 0.0
    if kind == "l2":
        return float(np.sqrt(np.sum(v * v)))
    if kind == "linf":
        return float(np.sum(np.abs(v)))
    raise ValueError(f"unknown norm {kind!r}")


@dataclass(frozen=True)
class CoverPoint:
    """A point of the cover: a base locator plus an integer sheet.

    ``base`` is either a float array (torus coordinates in [0,1)^n) or a
    tuple ``("v", vertex)`` / ``("e", edge, arclength)`` for graphs.  The
    sheet is always stored as a tuple of ints so points hash cleanly.
    """

    base: object
    sheet: tuple

    def sheet_array(self) -> np.ndarray:
        return np.array(self.sheet, dtype=float)


class MetricGraph:
    """Finite connected multigraph with positive edge lengths.

    Edges are ``(u, v, length)``; loops and parallel edges are allowed.
    A breadth-first spanning tree rooted at vertex 0 (neighbors scanned
    in edge order) fixes the cocycle basis: the j-th non-tree edge is
    assigned the j-th unit vector of Z^k, tree edges are assigned zero.
    The cycle rank is k = |E| - |V| + 1.
    """

    def __init__(self, n_vertices: int, edges):
        if n_vertices < 1:
            raise ValueError("graph needs at least one vertex")
        self.n_vertices = int(n_vertices)
        self.edges = []
        for (u, v, length) in edges:
            u, v, length = int(u), int(v), float(length)
            if not (0 <= u < n_vertices and 0 <= v < n_vertices):
                raise ValueError(f"edge ({u}, {v}) references a missing vertex")
            if length <= 0.0:
                raise ValueError(f"edge ({u}, {v}) has nonpositive length {length}")
            self.edges.append((u, v, length))
        self.lengths = np.array([e[2] for e in self.edges])
        self._build_incidence()
        self._build_tree()
        self._distance_table = None

    def _build_incidence(self):
        self.incident = [[] for _ in range(self.n_vertices)]
        for idx, (u, v, _) in enumerate(self.edges):
            self.incident[u].append((idx, +1))
            if v != u:
                self.incident[v].append((idx, -1))
            else:
                self.incident[u].append((idx, -1))

    def _build_tree(self):
        seen = [False] * self.n_vertices
        seen[0] = True
        queue = [0]
        in_tree = [False] * len(self.edges)
        while queue:
            u = queue.pop(0)
            for idx, direction in self.incident[u]:
                a, b, _ = self.edges[idx]
                other = b if (direction == +1) else a
                if not seen[other]:
                    seen[other] = True
                    in_tree[idx] = True
                    queue.append(other)
        if not all(seen):
            raise ValueError("graph is not connected")
        self.tree_edge = in_tree
        nontree = [i for i, t in enumerate(in_tree) if not t]
        self.nontree_edges = nontree
        self.cycle_rank = len(nontree)
        self.cocycles = np.zeros((len(self.edges), self.cycle_rank), dtype=int)
        for j, e in enumerate(nontree):
            self.cocycles[e, j] = 1

    def tail(self, e: int) -> int:
        return self.edges[e][0]

    def head(self, e: int) -> int:
        return self.edges[e][1]

    def length(self, e: int) -> float:
        return self.edges[e][2]

    def base_distance(self, u: int, v: int) -> float:
        """Shortest path distance between vertices of the base graph."""
        if self._distance_table is None:
            n = self.n_vertices
            d = np.full((n, n), np.inf)
            np.fill_diagonal(d, 0.0)
            for (a, b, length) in self.edges:
                d[a, b] = min(d[a, b], length)
                d[b, a] = min(d[b, a], length)
            for m in range(n):
                d = np.minimum(d, d[:, m:m + 1] + d[m:m + 1, :])
            self._distance_table = d
        return float(self._distance_table[u, v])

    def base_diameter(self) -> float:
        dv = max(self.base_distance(u, v)
                 for u in range(self.n_vertices) for v in range(self.n_vertices))
        return dv + float(self.lengths.max())

    def min_nontree_length(self) -> float:
        if not self.nontree_edges:
            return 0.0
        return float(min(self.length(e) for e in self.nontree_edges))

    def min_cycle_length(self) -> float:
        """Shortest cycle through any non-tree edge."""
        best = np.inf
        for e in self.nontree_edges:
            u, v, length = self.edges[e]
            best = min(best, length + self.base_distance(u, v))
        return best if np.isfinite(best) else 0.0


def single_loop(length: float = 1.0) -> MetricGraph:
    return MetricGraph(1, [(0, 0, length)])


def figure_eight(len_a: float = 1.0, len_b: float = 1.0) -> MetricGraph:
    return MetricGraph(1, [(0, 0, len_a), (0, 0, len_b)])


class TorusCover:
    """Maximal abelian cover of the flat n-torus: R^n over T^n."""

    family = "torus"

    def __init__(self, n: int, norm: str = "l2"):
        if n not in (1, 2):
            raise ValueError("only 1- and 2-tori are supported")
        if norm not in _NORMS:
            raise ValueError(f"unknown norm {norm!r}")
        self.n = n
        self.norm = norm

    @property
    def deck_rank(self) -> int:
        return self.n

    def point(self, base, sheet=None) -> CoverPoint:
        base = np.atleast_1d(np.asarray(base, dtype=float))
        if sheet is None:
            sheet = np.zeros(self.n, dtype=int)
        return CoverPoint(tuple(float(b) for b in base), tuple(int(z) for z in np.atleast_1d(sheet)))

    def lift(self, point: CoverPoint) -> np.ndarray:
        return np.array(point.base, dtype=float) + point.sheet_array()

    def from_lift(self, coords) -> CoverPoint:
        coords = np.atleast_1d(np.asarray(coords, dtype=float))
        sheet = np.floor(coords).astype(int)
        return CoverPoint(tuple(coords - sheet), tuple(int(z) for z in sheet))

    def base_point(self) -> CoverPoint:
        return self.point(np.zeros(self.n))

    def translate(self, point: CoverPoint, z) -> CoverPoint:
        z = np.atleast_1d(np.asarray(z)).astype(int)
        return CoverPoint(point.base, tuple(int(a + b) for a, b in zip(point.sheet, z)))

    def g_map(self, point: CoverPoint) -> np.ndarray:
        """Integrated basis one-forms; for the torus just the lift itself."""
        return self.lift(point)

    def distance(self, x: CoverPoint, y: CoverPoint) -> float:
        # same summation path as norm_value so the Euclidean comparison
        # residual of the flat cover vanishes bit-exactly
        return norm_value(self.lift(x) - self.lift(y), "l2")

    def g_lipschitz(self) -> float:
        """Bound on |G(x) - G(y)| (chosen norm) per unit of cover distance."""
        if self.norm == "l1":
            return float(np.sqrt(self.n))
        return 1.0

    def base_diameter(self) -> float:
        return 0.5 * float(np.sqrt(self.n))

    def base_mesh(self, m: int):
        """Base locators of the canonical m-per-dimension sampling mesh."""
        pts = np.arange(m) / m
        if self.n == 1:
            return [np.array([t]) for t in pts]
        return [np.array([a, b]) for a in pts for b in pts]

    def g_of_base(self, base) -> np.ndarray:
        return np.atleast_1d(np.asarray(base, dtype=float))


class GraphCover:
    """Maximal abelian cover of a metric graph.

    Points on the j-th non-tree edge interpolate the j-th deck coordinate
    linearly in arclength, so ``g_map`` is continuous and increments by
    exactly the cocycle vector across a full traversal.
    """

    family = "graph"

    def __init__(self, graph: MetricGraph, norm: str = "l1"):
        if norm not in _NORMS:
            raise ValueError(f"unknown norm {norm!r}")
        self.graph = graph
        self.norm = norm

    @property
    def deck_rank(self) -> int:
        return self.graph.cycle_rank

    def vertex_point(self, v: int, sheet=None) -> CoverPoint:
        sheet = np.zeros(self.deck_rank, dtype=int) if sheet is None else np.atleast_1d(sheet)
        return CoverPoint(("v", int(v)), tuple(int(z) for z in sheet))

    def edge_point(self, e: int, s: float, sheet=None) -> CoverPoint:
        length = self.graph.length(e)
        if not (0.0 <= s <= length):
            raise ValueError(f"arclength {s} outside edge of length {length}")
        sheet = np.zeros(self.deck_rank, dtype=int) if sheet is None else np.atleast_1d(sheet)
        if s == 0.0:
            return self.vertex_point(self.graph.tail(e), sheet)
        if s == length:
            head_sheet = np.asarray(sheet, dtype=int) + self.graph.cocycles[e]
            return self.vertex_point(self.graph.head(e), head_sheet)
        return CoverPoint(("e", int(e), float(s)), tuple(int(z) for z in sheet))

    def base_point(self) -> CoverPoint:
        return self.vertex_point(0)

    def translate(self, point: CoverPoint, z) -> CoverPoint:
        z = np.atleast_1d(np.asarray(z)).astype(int)
        return CoverPoint(point.base, tuple(int(a + b) for a, b in zip(point.sheet, z)))

    def g_map(self, point: CoverPoint) -> np.ndarray:
        g = point.sheet_array()
        if point.base[0] == "e":
            _, e, s = point.base
            g = g + (s / self.graph.length(e)) * self.graph.cocycles[e]
        return g

    def g_of_base(self, base) -> np.ndarray:
        if base[0] == "v":
            return np.zeros(self.deck_rank)
        _, e, s = base
        return (s / self.graph.length(e)) * np.asarray(self.graph.cocycles[e], dtype=float)

    def g_lipschitz(self) -> float:
        rates = [1.0 / self.graph.length(e) for e in self.graph.nontree_edges]
        return max(rates) if rates else 0.0

    def base_diameter(self) -> float:
        return self.graph.base_diameter()

    def base_mesh(self, m: int):
        locs = [("v", v) for v in range(self.graph.n_vertices)]
        for e, (_, _, length) in enumerate(self.graph.edges):
            for j in range(1, m):
                locs.append(("e", e, length * j / m))
        return locs

    def _attachments(self, point: CoverPoint):
        """(vertex, sheet tuple, offset) pairs reaching the point."""
        if point.base[0] == "v":
            return [(point.base[1], point.sheet, 0.0)]
        _, e, s = point.base
        g = self.graph
        sheet = np.array(point.sheet, dtype=int)
        head_sheet = sheet + g.cocycles[e]
        return [
            (g.tail(e), tuple(int(z) for z in sheet), s),
            (g.head(e), tuple(int(z) for z in head_sheet), g.length(e) - s),
        ]

    def _sheet_box(self, anchors, radius: int):
        sheets = np.array([a[1] for a in anchors], dtype=int)
        lo = sheets.min(axis=0) - radius
        hi = sheets.max(axis=0) + radius
        return lo, hi

    def _dijkstra(self, sources, lo, hi, targets):
        """Multi-source Dijkstra over (vertex, sheet) states inside a box.

        Stops once every target state is settled; returns settled dists.
        """
        g = self.graph
        dist = {}
        todo = set(targets)
        heap = []
        for (v, sheet, offset) in sources:
            state = (v, sheet)
            if np.any(np.array(sheet) < lo) or np.any(np.array(sheet) > hi):
                continue
            if offset < dist.get(state, np.inf):
                dist[state] = offset
                heapq.heappush(heap, (offset, state))
        settled = {}
        while heap:
            d, state = heapq.heappop(heap)
            if state in settled:
                continue
            settled[state] = d
            todo.discard(state)
            if not todo:
                break
            v, sheet = state
            sheet_arr = np.array(sheet, dtype=int)
            for e, direction in g.incident[v]:
                nxt_v = g.head(e) if direction == +1 else g.tail(e)
                nxt_sheet = sheet_arr + direction * g.cocycles[e]
                if np.any(nxt_sheet < lo) or np.any(nxt_sheet > hi):
                    continue
                nxt = (nxt_v, tuple(int(z) for z in nxt_sheet))
                nd = d + g.length(e)
                if nd < dist.get(nxt, np.inf):
                    dist[nxt] = nd
                    heapq.heappush(heap, (nd, nxt))
        return settled

    def distance(self, x: CoverPoint, y: CoverPoint) -> float:
        if x == y:
            return 0.0
        g = self.graph
        best_direct = np.inf
        if (x.base[0] == "e" and y.base[0] == "e"
                and x.base[1] == y.base[1] and x.sheet == y.sheet):
            best_direct = abs(x.base[2] - y.base[2])
        src = self._attachments(y)
        dst = self._attachments(x)
        if self.deck_rank == 0:
            lo = np.zeros(0, dtype=int)
            settled = self._dijkstra(src, lo, lo, {(v, s) for v, s, _ in dst})
            through = min((settled.get((v, s), np.inf) + off for v, s, off in dst),
                          default=np.inf)
            return float(min(best_direct, through))

        sheet_span = max(
            int(np.max(np.abs(np.array(sy, dtype=int) - np.array(sx, dtype=int))))
            for _, sy, _ in src for _, sx, _ in dst)
        lmin = g.min_nontree_length()
        min_cycle = max(g.min_cycle_length(), 1e-12)
        radius = sheet_span + int(np.ceil(g.base_diameter() * self.deck_rank / min_cycle)) + 1
        for _ in range(10):
            lo, hi = self._sheet_box(src + dst, radius)
            settled = self._dijkstra(src, lo, hi, {(v, s) for v, s, _ in dst})
            through = min((settled.get((v, s), np.inf) + off for v, s, off in dst),
                          default=np.inf)
            d = min(best_direct, through)
            # any competitor leaving the window crosses non-tree edges at
            # least 2*radius times beyond what the window already allows
            if d <= 2.0 * radius * lmin:
                return float(d)
            radius *= 2
        raise WindowExhaustedError("cover distance window grew past its cap", radius)


def g_map(cover, point: CoverPoint) -> np.ndarray:
    """Deck coordinates of a cover point (zero at the base point)."""
    return cover.g_map(point)


def f_eps(cover, point: CoverPoint, eps: float) -> np.ndarray:
    """Scaled coordinate map eps * G; the scale must be positive."""
    if eps <= 0.0:
        raise ValueError(f"scale eps must be positive, got {eps}")
    return eps * cover.g_map(point)


def cover_distance(cover, x: CoverPoint, y: CoverPoint, eps: float = None) -> float:
    """Geodesic distance on the cover; with eps, the rescaled eps*d."""
    d = cover.distance(x, y)
    if eps is None:
        return d
    if eps <= 0.0:
        raise ValueError(f"scale eps must be positive, got {eps}")
    return eps * d


def match_point(cover, h, eps: float, mesh: int = 64):
    """Canonical-mesh cover point whose scaled image is nearest h.

    Returns (point, image).  Ties are broken toward the lexicographically
    smaller sheet (then earlier mesh locator) so reruns are reproducible.
    """
    if eps <= 0.0:
        raise ValueError(f"scale eps must be positive, got {eps}")
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if cover.family == "torus":
        target = h / eps
        coords = np.empty_like(target)
        for c, val in enumerate(target):
            lower = math.floor(val * mesh) / mesh
            upper = lower + 1.0 / mesh
            coords[c] = lower if (val - lower) <= (upper - val) + 1e-15 else upper
        point = cover.from_lift(coords)
        return point, eps * cover.g_map(point)
    target = h / eps
    k = cover.deck_rank
    centers = np.round(target).astype(int) if k else np.zeros(0, dtype=int)
    axes = [np.arange(centers[j] - 2, centers[j] + 3) for j in range(k)]
    sheets = (np.array(list(itertools.product(*axes)), dtype=int)
              if k else np.zeros((1, 0), dtype=int))
    best = None
    for loc_idx, loc in enumerate(cover.base_mesh(mesh)):
        g0 = cover.g_of_base(loc)
        for row in sheets:
            image = eps * (row + g0)
            d = norm_value(image - h, cover.norm)
            # quantized distance first, then sheet, then locator order
            key = (int(round(d / 1e-12)), tuple(int(z) for z in row), loc_idx)
            if best is None or key < best[0]:
                best = (key, loc, row)
    _, loc, row = best
    if loc[0] == "v":
        point = cover.vertex_point(loc[1], row)
    else:
        point = cover.edge_point(loc[1], loc[2], row)
    return point, eps * cover.g_map(point)


def _smith_normal_form(mat: np.ndarray):
    """U @ mat @ V = S diagonal, with U, V unimodular integer matrices."""
    a = np.array(mat, dtype=object)
    rows, cols = a.shape
    u = np.eye(rows, dtype=object)
    v = np.eye(cols, dtype=object)

    def swap_rows(i, j):
        a[[i, j], :] = a[[j, i], :]
        u[[i, j], :] = u[[j, i], :]

    def swap_cols(i, j):
        a[:, [i, j]] = a[:, [j, i]]
        v[:, [i, j]] = v[:, [j, i]]

    def add_row(src, dst, factor):
        a[dst, :] += factor * a[src, :]
        u[dst, :] += factor * u[src, :]

    def add_col(src, dst, factor):
        a[:, dst] += factor * a[:, src]
        v[:, dst] += factor * v[:, src]

    t = 0
    while t < min(rows, cols):
        sub = [(abs(a[i, j]), i, j) for i in range(t, rows) for j in range(t, cols)
               if a[i, j] != 0]
        if not sub:
            break
        _, pi, pj = min(sub)
        swap_rows(t, pi)
        swap_cols(t, pj)
        reduced = True
        while reduced:
            reduced = False
            for i in range(t + 1, rows):
                if a[i, t] != 0:
                    add_row(t, i, -(a[i, t] // a[t, t]))
                    if a[i, t] != 0:
                        swap_rows(t, i)
                        reduced = True
            for j in range(t + 1, cols):
                if a[t, j] != 0:
                    add_col(t, j, -(a[t, j] // a[t, t]))
                    if a[t, j] != 0:
                        swap_cols(t, j)
                        reduced = True
        if a[t, t] < 0:
            a[t, :] *= -1
            u[t, :] *= -1
        t += 1
    return (np.array(u, dtype=int), np.array(a, dtype=int), np.array(v, dtype=int))


class SubcoverMap:
    """Surjection of the deck group Z^k onto Z^l, given as an integer matrix.

    Surjectivity is certified through the Smith normal form: all l
    invariant factors must equal one.  The decomposition also yields an
    integer right inverse (for lifting quotient sheets) and a basis of
    the kernel lattice (for translate windows).
    """

    def __init__(self, matrix):
        mat = np.atleast_2d(np.asarray(matrix, dtype=int))
        self.matrix = mat
        self.l, self.k = mat.shape
        if self.l > self.k:
            raise ValueError("cannot surject onto a group of higher rank")
        u, s, v = _smith_normal_form(mat)
        factors = [int(s[i, i]) for i in range(self.l)]
        if any(f != 1 for f in factors):
            raise ValueError(
                f"matrix is not surjective onto Z^{self.l}: invariant factors {factors}")
        embed = np.zeros((self.k, self.l), dtype=int)
        embed[: self.l, : self.l] = np.eye(self.l, dtype=int)
        self.right_inverse = v @ embed @ u
        self.kernel_basis = v[:, self.l:].copy()
        assert np.array_equal(mat @ self.right_inverse, np.eye(self.l, dtype=int))
        assert not self.kernel_basis.size or not np.any(mat @ self.kernel_basis)

    def apply(self, h) -> np.ndarray:
        h = np.atleast_1d(np.asarray(h, dtype=float))
        return self.matrix @ h

    def apply_int(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z)).astype(int)
        return self.matrix @ z

    def lift_sheet(self, q) -> np.ndarray:
        q = np.atleast_1d(np.asarray(q)).astype(int)
        return self.right_inverse @ q

    def pullback(self, p) -> np.ndarray:
        """Adjoint action on momenta/cohomology: f^T p."""
        p = np.atleast_1d(np.asarray(p, dtype=float))
        return self.matrix.T @ p

    def kernel_rank(self) -> int:
        return self.k - self.l

    def kernel_elements(self, radius: int):
        """All kernel lattice points with coefficient box |c_i| <= radius."""
        r = self.kernel_rank()
        if r == 0:
            return [np.zeros(self.k, dtype=int)]
        out = []
        for coeffs in itertools.product(range(-radius, radius + 1), repeat=r):
            out.append(self.kernel_basis @ np.array(coeffs, dtype=int))
        return out

    def quotient_norm(self, q, kind: str) -> float:
        """min { |h| : f h = q } over real h, in the requested norm."""
        q = np.atleast_1d(np.asarray(q, dtype=float))
        h0 = self.right_inverse @ q
        ker = self.kernel_basis.astype(float)
        if ker.size == 0:
            return norm_value(h0, kind)
        if kind == "l2":
            # project h0 onto the orthogonal complement of the kernel
            qmat, _ = np.linalg.qr(ker)
            resid = h0 - qmat @ (qmat.T @ h0)
            return float(np.linalg.norm(resid))
        # l1 / linf reduce to a small linear program in (xi, slack) vars
        r = ker.shape[1]
        k = self.k
        if kind == "l1":
            c = np.concatenate([np.zeros(r), np.ones(k)])
            a_ub = np.block([[ker, -np.eye(k)], [-ker, -np.eye(k)]])
            b_ub = np.concatenate([-h0, h0])
            bounds = [(None, None)] * r + [(0, None)] * k
        else:
            c = np.concatenate([np.zeros(r), [1.0]])
            ones = np.ones((k, 1))
            a_ub = np.block([[ker, -ones], [-ker, -ones]])
            b_ub = np.concatenate([-h0, h0])
            bounds = [(None, None)] * r + [(0, None)]
        res = optimize.linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
        if not res.success:
            raise RuntimeError(f"quotient norm LP failed: {res.message}")
        return float(res.fun)

    def kernel_covering_constant(self, kind: str) -> float:
        """B with: every real kernel vector is within B of the kernel lattice.

        Exact (half the basis norm) in rank one; in higher rank, measured
        on a fine fundamental-cell grid against nearby lattice points.
        """
        r = self.kernel_rank()
        if r == 0:
            return 0.0
        ker = self.kernel_basis.astype(float)
        if r == 1:
            return 0.5 * norm_value(ker[:, 0], kind)
        grid = np.linspace(0.0, 1.0, 17)
        neighbors = [np.array(c) for c in itertools.product((-1, 0, 1, 2), repeat=r)]
        worst = 0.0
        for frac in itertools.product(grid, repeat=r):
            point = ker @ np.array(frac)
            best = min(norm_value(point - ker @ nb, kind) for nb in neighbors)
            worst = max(worst, best)
        return worst


@dataclass(frozen=True)
class QuotientPoint:
    """Point of an intermediate cover: base locator plus projected sheet."""

    base: object
    sheet: tuple


def subcover_project(sub: SubcoverMap, point: CoverPoint) -> QuotientPoint:
    q = sub.apply_int(np.array(point.sheet, dtype=int))
    return QuotientPoint(point.base, tuple(int(z) for z in q))


def subcover_lift(cover, sub: SubcoverMap, qpoint: QuotientPoint) -> CoverPoint:
    """A representative in the maximal cover (sheet via the right inverse)."""
    sheet = sub.lift_sheet(np.array(qpoint.sheet, dtype=int))
    return CoverPoint(qpoint.base, tuple(int(z) for z in sheet))


def ghat_map(cover, sub: SubcoverMap, qpoint: QuotientPoint) -> np.ndarray:
    """Deck coordinates on the intermediate cover; satisfies Ghat o proj = f o G."""
    rep = subcover_lift(cover, sub, qpoint)
    return sub.apply(cover.g_map(rep))


def fhat_eps(cover, sub: SubcoverMap, qpoint: QuotientPoint, eps: float) -> np.ndarray:
    if eps <= 0.0:
        raise ValueError(f"scale eps must be positive, got {eps}")
    return eps * ghat_map(cover, sub, qpoint)


def _sheet_displacement_lower_bound(cover, gap: float) -> float:
    """Distance lower bound for points whose sheets differ by gap (inf-norm).

    Every unit of sheet displacement costs at least one non-tree edge
    traversal (graph) or one unit of Euclidean travel (torus); endpoint
    attachments can absorb at most one unit each.
    """
    if cover.family == "graph":
        return cover.graph.min_nontree_length() * max(0.0, gap - 2.0)
    return max(0.0, gap - 1.0)


def quotient_distance(cover, sub: SubcoverMap, qx: QuotientPoint, qy: QuotientPoint,
                      eps: float = None) -> float:
    """Geodesic distance on the intermediate cover.

    Realized as the minimum of the maximal-cover distance over kernel
    lattice translates of one representative.  The coefficient window
    starts from the kernel covering constant plus the base diameter and
    the incumbent is certified against a displacement lower bound for
    every translate outside the window.
    """
    x = subcover_lift(cover, sub, qx)
    y = subcover_lift(cover, sub, qy)
    if sub.kernel_rank() == 0:
        d = cover.distance(x, y)
        return d if eps is None else eps * d

    ker = sub.kernel_basis.astype(float)
    # coefficient bound: |c|_inf <= pinv_norm * |z|_inf for z = ker @ c
    pinv_norm = float(np.max(np.sum(np.abs(np.linalg.pinv(ker)), axis=1)))
    b_const = sub.kernel_covering_constant(cover.norm)
    sheet_gap0 = float(np.max(np.abs(np.array(y.sheet) - np.array(x.sheet))))
    target = b_const + cover.base_diameter() + sheet_gap0 + 1.0
    radius = int(np.ceil(target * pinv_norm)) + 1
    for _ in range(10):
        best = min(cover.distance(x, cover.translate(y, z))
                   for z in sub.kernel_elements(radius))
        # outside the coefficient box, |z|_inf >= (radius+1)/pinv_norm
        min_gap = (radius + 1) / pinv_norm - sheet_gap0
        if best <= _sheet_displacement_lower_bound(cover, min_gap):
            return best if eps is None else eps * best
        radius *= 2
    raise WindowExhaustedError("quotient distance window grew past its cap", radius)


@dataclass
class SpaceConvergenceReport:
    """Measured metric comparison between rescaled covers and their limit."""

    norm: str
    fitted_k: float
    epsilons: list
    a_eps: list
    covering_radius: list
    n_pairs: int

    def a_slope(self) -> float:
        """Fitted c in A_eps ~ c * eps (zero if all offsets vanish)."""
        eps = np.array(self.epsilons)
        a = np.array(self.a_eps)
        denom = float(np.sum(eps * eps))
        return float(np.sum(eps * a) / denom) if denom > 0 else 0.0

    def a_slope_stable(self, rel_tol: float = 0.25) -> bool:
        """True when the per-rung slopes A_eps/eps agree within rel_tol."""
        slopes = [a / e for a, e in zip(self.a_eps, self.epsilons)]
        top = max(slopes)
        if top <= 1e-12:
            return True
        return (top - min(slopes)) <= rel_tol * top


def _sample_points(cover, n_samples: int, sheet_radius: int, rng):
    pts = []
    if cover.family == "torus":
        for _ in range(n_samples):
            base = rng.random(cover.n)
            sheet = rng.integers(-sheet_radius, sheet_radius + 1, size=cover.n)
            pts.append(cover.point(base, sheet))
    else:
        g = cover.graph
        for _ in range(n_samples):
            sheet = rng.integers(-sheet_radius, sheet_radius + 1, size=cover.deck_rank)
            if rng.random() < 0.2:
                pts.append(cover.vertex_point(int(rng.integers(g.n_vertices)), sheet))
            else:
                e = int(rng.integers(len(g.edges)))
                s = float(rng.random()) * g.length(e)
                pts.append(cover.edge_point(e, s, sheet))
    return pts


def _grid_remainder(values: np.ndarray, spacing: float) -> np.ndarray:
    return np.abs(values - spacing * np.round(values / spacing))


def _image_nearest(cover, eps: float, probe: np.ndarray, mesh: int,
                   norm: str) -> float:
    """Distance from a probe to the f_eps image of the canonical mesh.

    The image is a union of product lattices (each coordinate is either an
    eps-integer or, on one non-tree edge at a time, an eps/mesh-grid
    value), so the nearest point reduces to coordinate-wise rounding.
    """
    k = cover.deck_rank
    if cover.family == "torus":
        # every coordinate carries the fine grid simultaneously
        return norm_value(_grid_remainder(probe, eps / mesh), norm)
    coarse = _grid_remainder(probe, eps)
    best = norm_value(coarse, norm)
    fine = _grid_remainder(probe, eps / mesh)
    for j in range(k):
        d = coarse.copy()
        d[j] = fine[j]
        best = min(best, norm_value(d, norm))
    return best


def _orbit_k_fit(cover, norm: str, sheet_radius: int) -> float:
    """Two-sided distance/coordinate ratio on deck translates of the base.

    On the orbit of the base point the comparison is exactly
    multiplicative (no boundary-layer offsets), which makes it the right
    place to read off K; interior points contribute only to A_eps.
    """
    x0 = cover.base_point()
    ratios = [1.0]
    for z in itertools.product(range(-sheet_radius, sheet_radius + 1),
                               repeat=cover.deck_rank):
        if not any(z):
            continue
        y = cover.translate(x0, np.array(z, dtype=int))
        d = cover.distance(x0, y)
        gn = norm_value(cover.g_map(y) - cover.g_map(x0), norm)
        if d > 1e-12 and gn > 1e-12:
            ratios.append(gn / d)
            ratios.append(d / gn)
    return max(ratios)


def estimate_space_convergence(cover, epsilons, n_samples: int = 120,
                               norm: str = None, sheet_radius: int = 2,
                               seed: int = 0, ball_radius: float = 1.0,
                               mesh: int = 16) -> SpaceConvergenceReport:
    """Fit the metric comparison constants between (cover, eps*d) and R^k.

    K is fitted on deck translates of the base point, where coordinate
    displacement and distance are exactly proportional.  A_eps is the
    additive lower-side residual max(0, K^{-1} d_eps - |Delta F_eps|)
    over all sampled pairs per rung (the eps-rescaled residual, so it is
    proportional to eps by construction of the sample window), and the
    covering radius measures eps-density of the image of the canonical
    mesh inside the fixed ball |h| <= ball_radius.
    """
    if n_samples < 100:
        raise ValueError("need at least 100 sample points")
    norm = cover.norm if norm is None else norm
    if norm not in _NORMS:
        raise ValueError(f"unknown norm {norm!r}")
    rng = np.random.default_rng(seed)
    pts = _sample_points(cover, n_samples, sheet_radius, rng)
    gvals = [cover.g_map(p) for p in pts]
    pairs = []
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            d = cover.distance(pts[i], pts[j])
            gn = norm_value(gvals[i] - gvals[j], norm)
            if d > 1e-12:
                pairs.append((d, gn))
    fitted_k = _orbit_k_fit(cover, norm, max(3, sheet_radius))

    slack = max((d / fitted_k - gn for d, gn in pairs), default=0.0)
    a_eps = [eps * max(0.0, slack) for eps in epsilons]

    probes_1d = np.linspace(-ball_radius, ball_radius, 11)
    k = cover.deck_rank
    probes = [np.array(c) for c in itertools.product(probes_1d, repeat=k)]
    probes = [p for p in probes if norm_value(p, norm) <= ball_radius + 1e-12]
    covering = []
    for eps in epsilons:
        covering.append(max(_image_nearest(cover, eps, p, mesh, norm) for p in probes))

    return SpaceConvergenceReport(
        norm=norm,
        fitted_k=float(fitted_k),
        epsilons=[float(e) for e in epsilons],
        a_eps=[float(a) for a in a_eps],
        covering_radius=[float(c) for c in covering],
        n_pairs=len(pairs),
    )
