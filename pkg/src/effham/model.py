"""Hamiltonian and Lagrangian model families.

Two concrete families are supported in production code:

* ``TorusHamiltonian``: H(x, p) = (1/2) p . A(x) p + V(x) on the flat
  n-torus (n = 1 or 2), with A(x) a symmetric positive definite matrix of
  trigonometric polynomials and V(x) a trigonometric polynomial.  The
  Legendre-dual Lagrangian has the closed form
  L(x, v) = (1/2) v . A(x)^{-1} v - V(x).

* ``GraphLagrangian``: on a metric graph, L_e(v) = v^2 / 2 + V_e on each
  edge, where V_e is a per-edge action-rate offset.  The per-edge dual is
  H_e(p) = p^2 / 2 - V_e.

Generic (non-quadratic) Hamiltonians are admitted only through the
numeric fallback ``legendre_transform_numeric``, which test code uses to
cross-check the closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import ModelValidityError

TWO_PI = 2.0 * np.pi


class TrigPolynomial:
    """Real trigonometric polynomial on the unit torus.

    ``terms`` is a list of ``(k, a, b)`` with integer frequency vector k,
    contributing ``a cos(2 pi k.x) + b sin(2 pi k.x)``.  Values and
    gradients are exact, which keeps periodicity residuals at zero up to
    floating point.
    """

    def __init__(self, n: int, terms):
        self.n = int(n)
        norm_terms = []
        for k, a, b in terms:
            kv = np.atleast_1d(np.asarray(k, dtype=float))
            if kv.shape != (self.n,):
                raise ValueError(f"frequency vector {k} does not match dimension {n}")
            if not np.allclose(kv, np.round(kv)):
                raise ValueError(f"frequency vector {k} must be integral for periodicity")
            norm_terms.append((np.round(kv).astype(int), float(a), float(b)))
        self.terms = norm_terms

    @classmethod
    def constant(cls, n: int, value: float) -> "TrigPolynomial":
        return cls(n, [(np.zeros(n, dtype=int), value, 0.0)])

    def value(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = 0.0
        for k, a, b in self.terms:
            phase = TWO_PI * float(np.dot(k, x))
            out += a * np.cos(phase) + b * np.sin(phase)
        return out

    def value_many(self, xs):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        out = np.zeros(xs.shape[0])
        for k, a, b in self.terms:
            phase = TWO_PI * (xs @ k)
            out += a * np.cos(phase) + b * np.sin(phase)
        return out

    def gradient(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        g = np.zeros(self.n)
        for k, a, b in self.terms:
            phase = TWO_PI * float(np.dot(k, x))
            g += TWO_PI * k * (-a * np.sin(phase) + b * np.cos(phase))
        return g

    def gradient_many(self, xs):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        g = np.zeros_like(xs)
        for k, a, b in self.terms:
            phase = TWO_PI * (xs @ k)
            g += np.outer(TWO_PI * (-a * np.sin(phase) + b * np.cos(phase)), k)
        return g

    def bound_abs(self) -> float:
        """Certified bound on sup |value|: sum of coefficient magnitudes."""
        return float(sum(abs(a) + abs(b) for _, a, b in self.terms))

    def mean(self) -> float:
        """Average over the torus (the zero-frequency cosine coefficient)."""
        total = 0.0
        for k, a, _ in self.terms:
            if not np.any(k):
                total += a
        return total

    def bound_above(self) -> float:
        """Cheap certified upper bound: sum of coefficient magnitudes."""
        total = 0.0
        for k, a, b in self.terms:
            if np.any(k):
                total += abs(a) + abs(b)
            else:
                total += a
        return total

    def to_config(self):
        return [[list(map(int, k)), a, b] for k, a, b in self.terms]


@dataclass
class TorusHamiltonian:
    """Quadratic-in-momentum Hamiltonian on the flat torus.

    ``a_entries`` stores the upper triangle of A(x) as TrigPolynomials in
    row-major order: [A11] for n=1, [A11, A12, A22] for n=2.
    """

    n: int
    a_entries: list
    v: TrigPolynomial

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("only dimensions 1 and 2 are supported")
        expected = {1: 1, 2: 3}[self.n]
        if len(self.a_entries) != expected:
            raise ValueError(f"expected {expected} kinetic entries for n={self.n}")

    @classmethod
    def free(cls, n: int) -> "TorusHamiltonian":
        """H = |p|^2 / 2."""
        ones = TrigPolynomial.constant(n, 1.0)
        zero = TrigPolynomial.constant(n, 0.0)
        entries = [ones] if n == 1 else [ones, zero, TrigPolynomial.constant(n, 1.0)]
        return cls(n, entries, TrigPolynomial.constant(n, 0.0))

    @classmethod
    def mechanical(cls, v: TrigPolynomial) -> "TorusHamiltonian":
        """H = |p|^2 / 2 + V(x)."""
        n = v.n
        ones = TrigPolynomial.constant(n, 1.0)
        zero = TrigPolynomial.constant(n, 0.0)
        entries = [ones] if n == 1 else [ones, zero, TrigPolynomial.constant(n, 1.0)]
        return cls(n, entries, v)

    def kinetic_matrix(self, x) -> np.ndarray:
        if self.n == 1:
            return np.array([[self.a_entries[0].value(x)]])
        a11 = self.a_entries[0].value(x)
        a12 = self.a_entries[1].value(x)
        a22 = self.a_entries[2].value(x)
        return np.array([[a11, a12], [a12, a22]])

    def kinetic_inverse(self, x) -> np.ndarray:
        a = self.kinetic_matrix(x)
        det = np.linalg.det(a)
        if det <= 0.0 or a[0, 0] <= 0.0:
            raise ModelValidityError(f"kinetic matrix not positive definite at x={x}")
        return np.linalg.inv(a)

    def value(self, x, p) -> float:
        p = np.atleast_1d(np.asarray(p, dtype=float))
        a = self.kinetic_matrix(x)
        return 0.5 * float(p @ a @ p) + self.v.value(x)

    def grad_p(self, x, p) -> np.ndarray:
        p = np.atleast_1d(np.asarray(p, dtype=float))
        return self.kinetic_matrix(x) @ p

    def lagrangian(self, x, v) -> float:
        v = np.atleast_1d(np.asarray(v, dtype=float))
        b = self.kinetic_inverse(x)
        return 0.5 * float(v @ b @ v) - self.v.value(x)

    def lagrangian_grad_v(self, x, v) -> np.ndarray:
        v = np.atleast_1d(np.asarray(v, dtype=float))
        return self.kinetic_inverse(x) @ v

    def lagrangian_min_over_v(self, x) -> float:
        """L(x, 0) = -V(x); rest is optimal since the kinetic part is PSD."""
        return -self.v.value(x)

    def kinetic_eig_bounds(self, mesh: int = 64):
        """(min, max) eigenvalue of A(x) over a sampling grid."""
        grid = _torus_grid(self.n, mesh)
        lo, hi = np.inf, -np.inf
        for x in grid:
            w = np.linalg.eigvalsh(self.kinetic_matrix(x))
            lo = min(lo, w[0])
            hi = max(hi, w[-1])
        return lo, hi

    def potential_bounds(self, mesh: int = 256):
        grid = _torus_grid(self.n, mesh)
        vals = self.v.value_many(grid)
        return float(vals.min()), float(vals.max())

    def superlinearity_offset(self, slope: float, mesh: int = 64) -> float:
        """N with L(x, v) >= slope * |v| - N for all x, v (Euclidean |v|).

        With a = max eigenvalue of A, L >= |v|^2/(2a) - max V, and the
        worst case of slope*|v| - |v|^2/(2a) is slope^2 a / 2.
        """
        _, amax = self.kinetic_eig_bounds(mesh)
        _, vmax = self.potential_bounds()
        return 0.5 * slope * slope * amax + vmax


@dataclass
class GraphLagrangian:
    """Per-edge quadratic Lagrangian L_e(v) = v^2/2 + V_e on a metric graph.

    ``potentials`` aligns with the owning graph's edge list.  The offsets
    enter the action directly (units of action per unit time), so the
    per-edge Hamiltonian is H_e(p) = p^2/2 - V_e.
    """

    graph: object
    potentials: np.ndarray = field(default=None)

    def __post_init__(self):
        pot = np.zeros(len(self.graph.edges)) if self.potentials is None else \
            np.asarray(self.potentials, dtype=float)
        if pot.shape != (len(self.graph.edges),):
            raise ValueError("one potential offset per edge required")
        self.potentials = pot

    def edge_value(self, e: int, v: float) -> float:
        return 0.5 * v * v + self.potentials[e]

    def edge_hamiltonian(self, e: int, p: float) -> float:
        return 0.5 * p * p - self.potentials[e]

    def min_potential(self) -> float:
        return float(self.potentials.min())

    def rest_rate(self, e: int) -> float:
        """Action per unit time of sitting still inside edge e."""
        return float(self.potentials[e])

    def superlinearity_offset(self, slope: float) -> float:
        """N with L_e(v) >= slope |v| - N on every edge."""
        return 0.5 * slope * slope - self.min_potential()

    def shifted(self, c: float) -> "GraphLagrangian":
        return GraphLagrangian(self.graph, self.potentials + c)


def legendre_transform(hamiltonian: TorusHamiltonian, x, v) -> float:
    """L(x, v) = max_p [p.v - H(x, p)] for the quadratic torus family.

    The maximizer is p = A(x)^{-1} v, giving the closed form directly.
    """
    return hamiltonian.lagrangian(x, v)


def legendre_transform_numeric(h_of_p, v, p0=None, span: float = 10.0) -> float:
    """Generic concave maximization of p.v - H(p) for scalar or vector p.

    Intended for test Hamiltonians without a closed form.  Seeds a
    quasi-Newton polish from the best point of a coarse scan, so it only
    needs H convex and superlinear on the scanned box.
    """
    v = np.atleast_1d(np.asarray(v, dtype=float))
    dim = v.size

    def neg(p):
        return h_of_p(p if dim > 1 else float(p[0])) - float(np.dot(p, v))

    if p0 is None:
        grid = np.linspace(-span, span, 201)
        if dim == 1:
            cands = grid.reshape(-1, 1)
        else:
            cands = np.array([[a, b] for a in grid for b in grid])
        vals = np.array([neg(c) for c in cands])
        p0 = cands[int(np.argmin(vals))]
    res = optimize.minimize(neg, np.atleast_1d(p0), method="Nelder-Mead",
                            options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000})
    res2 = optimize.minimize(neg, res.x, method="Powell",
                             options={"xtol": 1e-13, "ftol": 1e-15, "maxiter": 20000})
    return -float(min(res.fun, res2.fun))


def fenchel_young_residual(hamiltonian: TorusHamiltonian, x, v, p) -> float:
    """max(0, p.v - H(x,p) - L(x,v)); nonpositive part of the inequality."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    gap = float(np.dot(p, v)) - hamiltonian.value(x, p) - hamiltonian.lagrangian(x, v)
    return max(0.0, gap)


def double_legendre_residual(hamiltonian: TorusHamiltonian, x, p, span: float = 40.0) -> float:
    """|H(x,p) - max_v [p.v - L(x,v)]| via the numeric fallback."""

    def l_of_v(v):
        return hamiltonian.lagrangian(x, v)

    back = legendre_transform_numeric(l_of_v, p, p0=hamiltonian.grad_p(x, p), span=span)
    return abs(back - hamiltonian.value(x, p))


def _torus_grid(n: int, mesh: int) -> np.ndarray:
    pts = np.arange(mesh) / mesh
    if n == 1:
        return pts.reshape(-1, 1)
    xs, ys = np.meshgrid(pts, pts, indexing="ij")
    return np.column_stack([xs.ravel(), ys.ravel()])


@dataclass
class RegularityReport:
    """Outcome of the convexity/periodicity/superlinearity audit."""

    convex_ok: bool
    min_kinetic_eig: float
    periodic_ok: bool
    periodicity_residual: float
    superlinear_ok: bool
    superlinearity_margin: float
    messages: list

    @property
    def ok(self) -> bool:
        return self.convex_ok and self.periodic_ok and self.superlinear_ok


def verify_tonelli(hamiltonian: TorusHamiltonian, mesh: int = 16,
                   probe_radius: float = 1e3, probe_slope: float = 1e2) -> RegularityReport:
    """Audit the standing assumptions on a torus Hamiltonian.

    Findings are reported, not raised: callers decide whether a failed
    audit is fatal.  The checks are sampled on a grid with at least
    ``mesh`` points per dimension.

    * convexity: min eigenvalue of A(x) over the grid must be positive;
    * periodicity: |H(x + e_i, p) - H(x, p)| must vanish (exact up to
      floating point for trigonometric coefficients);
    * superlinearity: min_x min_dirs H(x, R d) / R at R = ``probe_radius``
      must exceed ``probe_slope``.
    """
    mesh = max(int(mesh), 8)
    grid = _torus_grid(hamiltonian.n, mesh)
    messages = []

    min_eig = np.inf
    for x in grid:
        w = np.linalg.eigvalsh(hamiltonian.kinetic_matrix(x))
        min_eig = min(min_eig, float(w[0]))
    convex_ok = min_eig > 0.0
    if not convex_ok:
        messages.append(f"kinetic matrix loses positive definiteness (min eig {min_eig:.6g})")

    p_probe = np.full(hamiltonian.n, 0.7)
    residual = 0.0
    for x in grid[:: max(1, len(grid) // 32)]:
        base = hamiltonian.value(x, p_probe)
        for i in range(hamiltonian.n):
            shifted = x.copy()
            shifted[i] += 1.0
            residual = max(residual, abs(hamiltonian.value(shifted, p_probe) - base))
    periodic_ok = residual <= 1e-9
    if not periodic_ok:
        messages.append(f"periodicity residual {residual:.3g}")

    dirs = [np.eye(hamiltonian.n)[i] for i in range(hamiltonian.n)]
    dirs += [-d for d in dirs]
    if hamiltonian.n == 2:
        dirs.append(np.array([1.0, 1.0]) / np.sqrt(2.0))
    worst_ratio = np.inf
    for x in grid[:: max(1, len(grid) // 16)]:
        for d in dirs:
            try:
                ratio = hamiltonian.value(x, probe_radius * d) / probe_radius
            except ModelValidityError:
                ratio = -np.inf
            worst_ratio = min(worst_ratio, ratio)
    superlinear_ok = worst_ratio > probe_slope
    if not superlinear_ok:
        messages.append(
            f"superlinearity probe ratio {worst_ratio:.6g} at |p|={probe_radius} "
            f"does not clear slope {probe_slope}")

    return RegularityReport(
        convex_ok=convex_ok,
        min_kinetic_eig=min_eig,
        periodic_ok=periodic_ok,
        periodicity_residual=residual,
        superlinear_ok=superlinear_ok,
        superlinearity_margin=worst_ratio - probe_slope,
        messages=messages,
    )
