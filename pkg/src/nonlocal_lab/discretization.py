"""Piecewise-linear Galerkin discretization of the nonlocal form on a line.

The form is

    <K u, v> = int int (u(x) - u(y)) (v(x) - v(y)) k(x, y) |x - y|^(-1-2s) dx dy

over R x R. The mesh covers the box (-X, X) uniformly; unknowns are the
nodes strictly inside the ball (-r, r). The interaction of the unknowns
with |y| > X is lumped onto the diagonal. Beyond the box the kernel is
still followed cell by cell out to ``FAR_REACH * X``, with each piece
integrated in closed form; past that radius it is replaced by
``kernel.far_value``.

On a uniform mesh every cell-pair integral depends only on the offset
between the two cells, so the local matrices are computed once per
offset and reused. Each local matrix is stored as a positive-weight point
rule ``sum_q w_q D_q D_q^T``, which keeps every cell-pair contribution
positive semidefinite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .kernels import KernelField, eval_kernel


class ConfigurationError(ValueError):
    """Mesh, kernel lattice, or quadrature parameters are inconsistent."""


class DomainError(ValueError):
    """A numerical parameter lies outside its admissible range."""


class UnsupportedInputError(ValueError):
    """Input the discretization cannot represent, e.g. unbounded far-field data."""


_ROW_CHUNK = 64
FAR_REACH = 16.0


# ----------------------------------------------------------------------------
# mesh and grid functions
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Mesh1D:
    r: float
    X: float
    n_interior: int
    h: float
    nodes: np.ndarray
    first_ball_cell: int

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    @property
    def n_cells(self) -> int:
        return self.nodes.size - 1

    @cached_property
    def interior_idx(self) -> np.ndarray:
        c0 = self.first_ball_cell
        return np.arange(c0 + 1, c0 + self.n_interior)

    @cached_property
    def is_interior(self) -> np.ndarray:
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[self.interior_idx] = True
        return mask

    @cached_property
    def cell_midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])

    def node_index(self, x: float) -> int:
        """Index of the node at coordinate x; x must be a node."""
        m = (x + self.X) / self.h
        i = int(round(m))
        if abs(m - i) > 1e-8 or not 0 <= i < self.n_nodes:
            raise ConfigurationError(f"{x} is not a mesh node")
        return i


def build_mesh(r: float, X: float | None = None, n_interior: int = 256) -> Mesh1D:
    """Uniform mesh of (-X, X) with spacing 2r/n_interior; X defaults to 4r."""
    if X is None:
        X = 4.0 * r
    if not r > 0:
        raise DomainError(f"ball radius must be positive, got {r}")
    if n_interior < 8 or n_interior % 2:
        raise ConfigurationError(f"n_interior must be even and >= 8, got {n_interior}")
    if X < 2 * r * (1 - 1e-12):
        raise ConfigurationError(
            f"truncation radius X={X} must be at least 2r={2 * r}: the annulus "
            "B_2r \\ B_3r/2 has to fit inside the box"
        )
    h = 2.0 * r / n_interior
    half = X / h
    m = int(round(half))
    if abs(half - m) > 1e-8 * max(1.0, half):
        raise ConfigurationError(f"X={X} is not a multiple of the spacing h={h}")
    nodes = h * np.arange(-m, m + 1, dtype=float)
    return Mesh1D(
        r=float(r), X=float(m * h), n_interior=int(n_interior), h=h,
        nodes=nodes, first_ball_cell=m - n_interior // 2,
    )


@dataclass(frozen=True)
class FarField:
    """Values of a grid function beyond the box, |y| > X.

    kind is ``zero``, ``constant`` (value c) or ``function`` (explicit
    formula ``func`` bounded by ``bound``).
    """

    kind: str = "zero"
    value: float = 0.0
    func: Callable | None = field(default=None, compare=False)
    bound: float | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "function"):
            raise UnsupportedInputError(f"far-field descriptor {self.kind!r} is not supported")
        if self.kind == "function" and (self.func is None or self.bound is None):
            raise UnsupportedInputError("a function far field needs func and a finite bound")

    @classmethod
    def constant(cls, c: float) -> "FarField":
        return cls("constant", float(c))

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(y)
        if self.kind == "constant":
            return np.full_like(y, self.value)
        return np.asarray(self.func(y), dtype=float)

    def scaled(self, c: float) -> "FarField":
        if self.kind == "zero":
            return self
        if self.kind == "constant":
            return FarField("constant", c * self.value)
        f = self.func
        return FarField("function", func=lambda y: c * f(y), bound=abs(c) * self.bound)


@dataclass(eq=False)
class GridFunction:
    """Nodal values on every mesh node plus the far-field description."""

    mesh: Mesh1D
    values: np.ndarray
    far: FarField = field(default_factory=FarField)
    residual: float | None = None
    iterations: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.n_nodes,):
            raise ConfigurationError("values must have one entry per mesh node")

    @classmethod
    def from_callable(cls, mesh: Mesh1D, func: Callable, far: FarField | None = None):
        return cls(mesh, np.asarray(func(mesh.nodes), dtype=float) * np.ones(mesh.n_nodes),
                   far if far is not None else FarField())

    @classmethod
    def constant(cls, mesh: Mesh1D, c: float) -> "GridFunction":
        return cls(mesh, np.full(mesh.n_nodes, float(c)), FarField.constant(c))

    @property
    def x(self) -> np.ndarray:
        return self.mesh.nodes

    def interior_values(self) -> np.ndarray:
        return self.values[self.mesh.interior_idx]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.abs(x) <= self.mesh.X
        return np.where(inside, np.interp(x, self.mesh.nodes, self.values), self.far(x))

    def with_values(self, values, far: FarField | None = None) -> "GridFunction":
        return GridFunction(self.mesh, values, self.far if far is None else far)

    def __neg__(self):
        return self.with_values(-self.values, self.far.scaled(-1.0))

    def __mul__(self, c: float):
        return self.with_values(c * self.values, self.far.scaled(c))

    __rmul__ = __mul__


# ----------------------------------------------------------------------------
# cell-pair quadrature
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PairTemplates:
    """Local matrices for unit-kernel cell pairs on a uniform mesh.

    coincident: 2x2 over the cell's two nodes.
    adjacent:   3x3 over (left, shared, right) nodes of two touching cells,
                both orderings of the pair included.
    separated:  (n_offsets, 4, 4) over (K, K+1, K', K'+1) for K' = K + d,
                both orderings included; rows d < 2 are unused.
    """

    h: float
    s: float
    coincident: np.ndarray
    adjacent: np.ndarray
    separated: np.ndarray


def _rule_matrix(weights: np.ndarray, D: np.ndarray) -> np.ndarray:
    return np.einsum("...q,...qa,...qb->...ab", weights, D, D)


def pair_templates(h: float, s: float, n_offsets: int, order_far: int = 4,
                   order_near: int = 6) -> PairTemplates:
    if not 0 < s < 1:
        raise DomainError(f"fractional order s must lie in (0, 1), got {s}")
    p = 1.0 + 2.0 * s

    # identical cells: the integrand is |x-y|^(1-2s)/h^2 times [[1,-1],[-1,1]];
    # collapse onto z = x - y and integrate z^(1-2s) exactly with Gauss-Jacobi.
    # The Jacobi weight already carries z^(1-2s), so the rule weight divides
    # by z^2 to cancel the D D^T factor.
    xi, wj = roots_jacobi(order_near, 0.0, 1.0 - 2.0 * s)
    z = 0.5 * h * (1.0 + xi)
    w0 = 2.0 * (h - z) * (0.5 * h) ** (2.0 - 2.0 * s) * wj / z**2
    D0 = np.stack([-z / h, z / h], axis=1)
    coincident = _rule_matrix(w0, D0)

    # touching cells: integrand is homogeneous of degree 1-2s about the shared
    # vertex, so the radial integral is done in closed form and Gauss-Legendre
    # handles the angular variable on each Duffy triangle
    t, wt = roots_legendre(order_near)
    t = 0.5 * (1.0 + t)
    wt = 0.5 * wt
    u = np.concatenate([np.full(order_near, h), h * t])
    v = np.concatenate([h * t, np.full(order_near, h)])
    w1 = 2.0 * np.concatenate([wt, wt]) * h**2 / (3.0 - 2.0 * s) / (u + v) ** p
    D1 = np.stack([u / h, (v - u) / h, -v / h], axis=1)
    adjacent = _rule_matrix(w1, D1)

    # separated cells: tensor Gauss-Legendre
    g, wg = roots_legendre(order_far)
    g = 0.5 * (1.0 + g)
    wg = 0.5 * wg
    gx, gy = np.meshgrid(g, g, indexing="ij")
    gx, gy = gx.ravel(), gy.ravel()
    wq = np.outer(wg, wg).ravel()
    d = np.arange(n_offsets, dtype=float)[:, None]
    dist = h * (d + gy - gx)
    with np.errstate(divide="ignore"):
        ws = 2.0 * h * h * wq / np.abs(dist) ** p
    ws[:2] = 0.0
    Ds = np.broadcast_to(np.stack([1.0 - gx, gx, -(1.0 - gy), -gy], axis=1),
                         (n_offsets, gx.size, 4))
    separated = _rule_matrix(ws, Ds)
    return PairTemplates(h, s, coincident, adjacent, separated)


def far_field_weight(x, X: float, s: float) -> np.ndarray:
    """2 * int_{|y|>X} |x - y|^(-1-2s) dy for |x| < X, in closed form."""
    x = np.asarray(x, dtype=float)
    return ((X - x) ** (-2.0 * s) + (X + x) ** (-2.0 * s)) / s


# ----------------------------------------------------------------------------
# assembly
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FarTable:
    """Kernel seen by each interior hat on the pieces X < |y| < Y.

    ``edges`` are the piece boundaries on the positive side (the negative
    side mirrors them); ``right`` and ``left`` hold, per interior node and
    piece, the kernel averaged over the node's two cells.
    """

    edges: np.ndarray
    right: np.ndarray
    left: np.ndarray
    beyond: float

    @property
    def Y(self) -> float:
        return float(self.edges[-1])


def _far_table(mesh: Mesh1D, kernel: KernelField) -> FarTable | None:
    if kernel.is_constant:
        return None
    X = mesh.X
    width = kernel.lattice if kernel.lattice is not None else X / 64.0
    first = np.floor(X / width + 1e-9) + 1
    last = np.ceil(FAR_REACH * X / width)
    edges = np.concatenate([[X], width * np.arange(first, last + 1)])
    mids = 0.5 * (edges[:-1] + edges[1:])
    xi = mesh.nodes[mesh.interior_idx][:, None]
    h = mesh.h

    def avg(y):
        return 0.5 * (eval_kernel(kernel, xi - 0.5 * h, y) + eval_kernel(kernel, xi + 0.5 * h, y))

    return FarTable(edges, avg(mids[None, :]), avg(-mids[None, :]), kernel.far_value)


def _far_diagonal(mesh: Mesh1D, kernel: KernelField, s: float,
                  table: FarTable | None) -> np.ndarray:
    """h * 2 int_{|y|>X} k(x_i, y) |x_i - y|^(-1-2s) dy, piecewise in closed form."""
    xi = mesh.nodes[mesh.interior_idx]
    if table is None:
        return kernel.far_value * (mesh.h * far_field_weight(xi, mesh.X, s))
    e = table.edges
    x = xi[:, None]
    q = -2.0 * s
    right = ((e[None, :-1] - x) ** q - (e[None, 1:] - x) ** q) / (2 * s)
    left = ((e[None, :-1] + x) ** q - (e[None, 1:] + x) ** q) / (2 * s)
    Y = table.Y
    beyond = ((Y - xi) ** q + (Y + xi) ** q) / (2 * s)
    total = (table.right * right).sum(1) + (table.left * left).sum(1) + table.beyond * beyond
    return 2.0 * mesh.h * total


def _cell_kernel(mesh: Mesh1D, kernel: KernelField) -> Callable:
    """k at cell-pair midpoints as a function of cell indices."""
    if kernel.is_constant:
        return lambda i, j: np.ones(np.broadcast(i, j).shape)
    lattice = kernel.lattice
    if lattice is not None:
        ratio = lattice / mesh.h
        if ratio < 1 - 1e-9 or abs(ratio - round(ratio)) > 1e-8 * ratio:
            raise ConfigurationError(
                f"kernel lattice {lattice} is not a multiple of the mesh spacing {mesh.h}"
            )
    xm = mesh.cell_midpoints
    return lambda i, j: np.asarray(eval_kernel(kernel, xm[i], xm[j]), dtype=float)


def _add_local(target, row0, col0, dofs, T, weights):
    """Scatter weights[p] * T into target for local dof tuples dofs[p]."""
    nr, nc = target.shape
    for a in range(T.shape[0]):
        ra = dofs[:, a] - row0
        ok_r = (ra >= 0) & (ra < nr)
        for b in range(T.shape[1]):
            cb = dofs[:, b] - col0
            ok = ok_r & (cb >= 0) & (cb < nc)
            np.add.at(target, (ra[ok], cb[ok]), weights[ok] * T[a, b])


@dataclass(eq=False)
class StiffnessSystem:
    """Interior-dof system of the nonlocal form.

    ``matrix`` is the box part of the form on interior hats, ``far_weights``
    the lumped far-field diagonal; ``operator`` is their sum.
    """

    mesh: Mesh1D
    kernel: KernelField
    s: float
    templates: PairTemplates
    matrix: np.ndarray
    far_weights: np.ndarray
    _kvals: Callable = field(repr=False)
    _scale: float = 1.0
    far_table: FarTable | None = field(default=None, repr=False)

    @cached_property
    def operator(self) -> np.ndarray:
        return self.matrix + np.diag(self.far_weights)

    @cached_property
    def coupling(self) -> np.ndarray:
        """Matrix C with <K g, phi_i> = (C g)_i for g supported on exterior box nodes."""
        return self._scale * _assemble_coupling(self.mesh, self.templates, self._kvals)

    def quadratic_form(self, v: np.ndarray, far: bool = True) -> float:
        """<K v, v> for v on interior dofs, zero elsewhere."""
        A = self.operator if far else self.matrix
        return float(v @ A @ v)

    def apply(self, u: GridFunction) -> np.ndarray:
        """<K u, phi_i> for every interior hat phi_i."""
        mesh = self.mesh
        ext = np.where(mesh.is_interior, 0.0, u.values)
        ui = u.interior_values()
        out = self.matrix @ ui + self.coupling @ ext + self.far_weights * ui
        return out - _far_load(mesh, self, u.far)


def _same_cell_blocks(cells: np.ndarray, nc: int, S: np.ndarray, kv: Callable) -> np.ndarray:
    """Sum over separated partners K' of the (K, K) block of each pair, flattened 2x2."""
    TL = S[:, :2, :2].reshape(-1, 4)
    TR = S[:, 2:, 2:].reshape(-1, 4)
    Kp = np.arange(nc)
    blocks = np.zeros((cells.size, 4))
    for start in range(0, cells.size, _ROW_CHUNK):
        Kc = cells[start:start + _ROW_CHUNK]
        off = Kp[None, :] - Kc[:, None]
        dist = np.abs(off)
        w = kv(Kc[:, None], Kp[None, :]) * (dist >= 2)
        right = off > 0
        blocks[start:start + Kc.size] = (
            np.einsum("ij,ijk->ik", w * right, TL[dist])
            + np.einsum("ij,ijk->ik", w * ~right, TR[dist])
        )
    return blocks


def _assemble_ball(mesh: Mesh1D, T: PairTemplates, kv: Callable) -> np.ndarray:
    """Box part of the form, rows and columns restricted to ball nodes."""
    n = mesh.n_interior
    c0 = mesh.first_ball_cell
    nc = mesh.n_cells
    A = np.zeros((n + 1, n + 1))
    ball = np.arange(c0, c0 + n)

    K = ball
    _add_local(A, c0, c0, np.stack([K, K + 1], 1), T.coincident, kv(K, K))

    K = np.arange(max(c0 - 1, 0), min(c0 + n, nc - 1))
    _add_local(A, c0, c0, np.stack([K, K + 1, K + 2], 1), T.adjacent, kv(K, K + 1))

    # separated pairs inside the ball: cross blocks, each unordered pair once
    S = T.separated
    for d in range(2, n):
        K = np.arange(c0, c0 + n - d)
        w = kv(K, K + d)
        for a in range(2):
            for b in range(2):
                A[K + a - c0, K + d + b - c0] += w * S[d, a, 2 + b]
                A[K + d + b - c0, K + a - c0] += w * S[d, 2 + b, a]

    # separated pairs: same-cell blocks of ball cells against every box cell
    blocks = _same_cell_blocks(ball, nc, S, kv)
    for a in range(2):
        for b in range(2):
            A[ball + a - c0, ball + b - c0] += blocks[:, 2 * a + b]
    return A


def _assemble_coupling(mesh: Mesh1D, T: PairTemplates, kv: Callable) -> np.ndarray:
    """Interior rows of the box form against exterior node columns."""
    n = mesh.n_interior
    c0 = mesh.first_ball_cell
    nc = mesh.n_cells
    C = np.zeros((n + 1, mesh.n_nodes))
    ball = np.arange(c0, c0 + n)

    K = ball
    _add_local(C, c0, 0, np.stack([K, K + 1], 1), T.coincident, kv(K, K))
    K = np.arange(max(c0 - 1, 0), min(c0 + n, nc - 1))
    _add_local(C, c0, 0, np.stack([K, K + 1, K + 2], 1), T.adjacent, kv(K, K + 1))

    S = T.separated
    # all partners: separated pairs inside the ball still reach the boundary nodes
    outside = np.arange(nc)
    for start in range(0, n, _ROW_CHUNK):
        Kc = ball[start:start + _ROW_CHUNK]
        off = outside[None, :] - Kc[:, None]
        dist = np.abs(off)
        w = kv(Kc[:, None], outside[None, :]) * (dist >= 2)
        right = off > 0
        for a in range(2):
            for b in range(2):
                vals = w * np.where(right, S[dist, a, 2 + b], S[dist, 2 + a, b])
                C[np.ix_(Kc + a - c0, outside + b)] += vals

    # same-cell blocks of the two boundary cells link an interior node to r or -r
    edge = np.array([c0, c0 + n - 1])
    blocks = _same_cell_blocks(edge, nc, S, kv)
    C[1, c0] += blocks[0, 2]
    C[n - 1, c0 + n] += blocks[1, 1]

    C = C[1:n]
    C[:, mesh.interior_idx] = 0.0
    return C


def assemble_stiffness(mesh: Mesh1D, kernel: KernelField, s: float,
                       order_far: int = 4, order_near: int = 6) -> StiffnessSystem:
    if not 0 < s < 1:
        raise DomainError(f"fractional order s must lie in (0, 1), got {s}")
    T = pair_templates(mesh.h, s, mesh.n_cells, order_far, order_near)
    kv = _cell_kernel(mesh, kernel)
    A = _assemble_ball(mesh, T, kv)[1:-1, 1:-1]
    A = 0.5 * (A + A.T)
    scale = kernel.L if kernel.is_constant else 1.0
    if kernel.is_constant:
        A = scale * A
    table = _far_table(mesh, kernel)
    far = _far_diagonal(mesh, kernel, s, table)
    return StiffnessSystem(mesh, kernel, s, T, A, far, kv, scale, table)


def _far_load(mesh: Mesh1D, system: StiffnessSystem, far: FarField) -> np.ndarray:
    """Far-field data moved to the right-hand side: int phi_i(x) int_{|y|>X} g(y) ... dy."""
    if far.kind == "zero":
        return np.zeros(mesh.n_interior - 1)
    if far.kind == "constant":
        return far.value * system.far_weights
    from scipy.integrate import quad

    p = 1.0 + 2.0 * system.s
    xi = mesh.nodes[mesh.interior_idx]
    table = system.far_table
    start = mesh.X if table is None else table.Y
    k_beyond = system.kernel.far_value if table is None else table.beyond
    out = np.empty(xi.size)
    for i, x in enumerate(xi):
        right = quad(lambda y: far.func(y) * (y - x) ** (-p), start, np.inf)[0]
        left = quad(lambda y: far.func(-y) * (y + x) ** (-p), start, np.inf)[0]
        out[i] = k_beyond * (left + right)
    if table is not None:
        # pieces are at distance >= X - r from every node, so a fixed Gauss rule suffices
        g, w = roots_legendre(8)
        e = table.edges
        mid, half = 0.5 * (e[1:] + e[:-1]), 0.5 * (e[1:] - e[:-1])
        y = mid[:, None] + half[:, None] * g[None, :]
        gr = np.asarray(far.func(y), dtype=float) * half[:, None]
        gl = np.asarray(far.func(-y), dtype=float) * half[:, None]
        x = xi[:, None, None]
        right = ((gr[None] * (y[None] - x) ** (-p)) @ w)
        left = ((gl[None] * (y[None] + x) ** (-p)) @ w)
        out += (table.right * right).sum(1) + (table.left * left).sum(1)
    return 2.0 * mesh.h * out


def mass_apply(mesh: Mesh1D, f) -> np.ndarray:
    """Consistent P1 mass matrix applied to nodal f, interior rows."""
    fv = np.broadcast_to(np.asarray(f(mesh.nodes) if callable(f) else f, dtype=float),
                         (mesh.n_nodes,))
    i = mesh.interior_idx
    h = mesh.h
    return h / 6.0 * (fv[i - 1] + 4.0 * fv[i] + fv[i + 1])


def assemble_load(mesh: Mesh1D, kernel: KernelField, s: float, f=0.0,
                  g: GridFunction | None = None,
                  system: StiffnessSystem | None = None) -> np.ndarray:
    """Right-hand side for K u = f in B_r, u = g outside.

    f is a scalar, nodal array or callable; g supplies exterior nodal
    values and the far-field description (None means zero data).
    """
    if system is None:
        system = assemble_stiffness(mesh, kernel, s)
    load = mass_apply(mesh, f)
    if g is None:
        return load
    if g.mesh is not mesh:
        raise ConfigurationError("datum lives on a different mesh")
    ext = np.where(mesh.is_interior, 0.0, g.values)
    if np.any(ext):
        load = load - system.coupling @ ext
    return load + _far_load(mesh, system, g.far)


# ----------------------------------------------------------------------------
# seminorms
# ----------------------------------------------------------------------------


def gagliardo_seminorm(u: GridFunction, region: tuple[float, float], s: float,
                       order_far: int = 4, order_near: int = 6) -> float:
    """[u]_{s, region} using the same cell-pair rules as the stiffness assembly."""
    mesh = u.mesh
    a, b = region
    ia, ib = mesh.node_index(a), mesh.node_index(b)
    if ib <= ia:
        raise ConfigurationError("region must have positive length")
    vals = u.values[ia:ib + 1]
    nr = ib - ia
    T = pair_templates(mesh.h, s, nr, order_far, order_near)
    K = np.arange(nr)
    U = np.stack([vals[K], vals[K + 1]], 1)
    energy = np.einsum("ka,ab,kb->", U, T.coincident, U)
    if nr > 1:
        K = np.arange(nr - 1)
        U = np.stack([vals[K], vals[K + 1], vals[K + 2]], 1)
        energy += np.einsum("ka,ab,kb->", U, T.adjacent, U)
    for d in range(2, nr):
        K = np.arange(nr - d)
        U = np.stack([vals[K], vals[K + 1], vals[K + d], vals[K + d + 1]], 1)
        energy += np.einsum("ka,ab,kb->", U, T.separated[d], U)
    return float(np.sqrt(max(energy, 0.0)))
