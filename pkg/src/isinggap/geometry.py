"""Finite boxes of Z^2, their outer boundary, bonds, dual lattice and region masks.

Conventions
-----------
Sites are ordered row-major: by second coordinate, then by first.  Bonds of
the extended set (at least one endpoint in the box) are ordered horizontal
first, then vertical, each group row-major by its lower-left endpoint.  The
dual bond of a bond carries the same ordinal.

Node indices used by the kernels: ``0 .. n_sites-1`` are box sites,
``n_sites .. n_sites+n_boundary-1`` are outer boundary sites.

Sides are numbered 1 (bottom), 2 (left), 3 (top), 4 (right); side ``i+1`` is
the image of side ``i`` under the clockwise quarter turn ``(x, y) -> (y, -x)``.
Corner squares are numbered counter-clockwise starting from the bottom-right
one, see :func:`in_square`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

SIDES = (1, 2, 3, 4)


def rotate_cw(point, times=1):
    """Quarter turn ``(x, y) -> (y, -x)`` applied ``times`` times."""
    x, y = point
    for _ in range(times % 4):
        x, y = y, -x
    return (x, y)


def rotate_ccw(point, times=1):
    x, y = point
    for _ in range(times % 4):
        x, y = -y, x
    return (x, y)


@dataclass(frozen=True, eq=False)
class Geometry:
    """Rectangle ``[x0, x1] x [y0, y1]`` of Z^2 with its outer boundary.

    Use :func:`build_box` for the centred squares and :func:`build_rect` for
    anything else.
    """

    x_range: tuple[int, int]
    y_range: tuple[int, int]
    sites: np.ndarray = field(repr=False)
    boundary: np.ndarray = field(repr=False)
    bonds: np.ndarray = field(repr=False)
    bond_is_horizontal: np.ndarray = field(repr=False)

    @property
    def width(self):
        return self.x_range[1] - self.x_range[0] + 1

    @property
    def height(self):
        return self.y_range[1] - self.y_range[0] + 1

    @property
    def half_width(self):
        """``N`` for the box ``Lambda_N``, ``None`` for other rectangles."""
        (a, b), (c, d) = self.x_range, self.y_range
        if a == -b == c == -d:
            return b
        return None

    @property
    def n_sites(self):
        return len(self.sites)

    @property
    def n_boundary(self):
        return len(self.boundary)

    @property
    def n_bonds(self):
        return len(self.bonds)

    @cached_property
    def site_index(self):
        return {tuple(map(int, s)): i for i, s in enumerate(self.sites)}

    @cached_property
    def boundary_index(self):
        return {tuple(map(int, s)): i for i, s in enumerate(self.boundary)}

    @cached_property
    def node_coords(self):
        return np.concatenate([self.sites, self.boundary])

    def node_of(self, point):
        """Node index of a site of the box or of its boundary."""
        point = tuple(int(v) for v in point)
        if point in self.site_index:
            return self.site_index[point]
        if point in self.boundary_index:
            return self.n_sites + self.boundary_index[point]
        raise KeyError(f"{point} is neither in the box nor on its boundary")

    @cached_property
    def bond_nodes(self):
        """``(n_bonds, 2)`` node indices of bond endpoints."""
        out = np.empty((self.n_bonds, 2), dtype=np.int64)
        for e, (a, b) in enumerate(self.bonds):
            out[e] = self.node_of(a), self.node_of(b)
        return out

    @cached_property
    def interior_bond_mask(self):
        bn = self.bond_nodes
        return (bn[:, 0] < self.n_sites) & (bn[:, 1] < self.n_sites)

    @property
    def n_interior_bonds(self):
        return int(self.interior_bond_mask.sum())

    @cached_property
    def neighbors(self):
        """``(n_nodes, 4)`` neighbour node table, ``-1`` padded.

        Box sites always have four neighbours; boundary sites have one
        (no bond of ``B-bar`` joins two boundary sites).
        """
        n_nodes = self.n_sites + self.n_boundary
        table = np.full((n_nodes, 4), -1, dtype=np.int64)
        fill = np.zeros(n_nodes, dtype=np.int64)
        for a, b in self.bond_nodes:
            table[a, fill[a]] = b
            fill[a] += 1
            table[b, fill[b]] = a
            fill[b] += 1
        return table

    @cached_property
    def site_bonds(self):
        """``(n_nodes, 4)`` incident bond ordinals, aligned with :attr:`neighbors`."""
        n_nodes = self.n_sites + self.n_boundary
        table = np.full((n_nodes, 4), -1, dtype=np.int64)
        fill = np.zeros(n_nodes, dtype=np.int64)
        for e, (a, b) in enumerate(self.bond_nodes):
            table[a, fill[a]] = e
            fill[a] += 1
            table[b, fill[b]] = e
            fill[b] += 1
        return table

    # dual lattice

    @cached_property
    def dual_sites(self):
        """Dual sites ``x + (1/2, 1/2)`` touched by dual bonds, row-major."""
        (a, b), (c, d) = self.x_range, self.y_range
        xs = np.arange(a, b + 2) - 0.5
        ys = np.arange(c, d + 2) - 0.5
        gx, gy = np.meshgrid(xs, ys)
        return np.column_stack([gx.ravel(), gy.ravel()])

    @cached_property
    def dual_site_index(self):
        return {(float(x), float(y)): i for i, (x, y) in enumerate(self.dual_sites)}

    def dual_node_of(self, point):
        return self.dual_site_index[(float(point[0]), float(point[1]))]

    @cached_property
    def dual_bonds(self):
        """``(n_bonds, 2, 2)`` dual bond endpoints; ordinal ``e`` is dual to bond ``e``."""
        return np.array([dual_bond(bond) for bond in self.bonds])

    @cached_property
    def dual_bond_nodes(self):
        out = np.empty((self.n_bonds, 2), dtype=np.int64)
        for e, (u, v) in enumerate(self.dual_bonds):
            out[e] = self.dual_node_of(u), self.dual_node_of(v)
        return out

    @cached_property
    def dual_neighbors(self):
        """Dual adjacency ``(n_dual, 4)`` of dual nodes and ``(n_dual, 4)`` bond ordinals."""
        n = len(self.dual_sites)
        nbr = np.full((n, 4), -1, dtype=np.int64)
        via = np.full((n, 4), -1, dtype=np.int64)
        fill = np.zeros(n, dtype=np.int64)
        for e, (u, v) in enumerate(self.dual_bond_nodes):
            nbr[u, fill[u]], via[u, fill[u]] = v, e
            fill[u] += 1
            nbr[v, fill[v]], via[v, fill[v]] = u, e
            fill[v] += 1
        return nbr, via

    def site_mask(self, points):
        """Boolean mask over box sites for an iterable of lattice points."""
        mask = np.zeros(self.n_sites, dtype=bool)
        for p in points:
            i = self.site_index.get(tuple(int(v) for v in p))
            if i is not None:
                mask[i] = True
        return mask

    def node_mask(self, points):
        """Boolean mask over all nodes (box and boundary sites)."""
        mask = np.zeros(self.n_sites + self.n_boundary, dtype=bool)
        for p in points:
            p = tuple(int(v) for v in p)
            if p in self.site_index:
                mask[self.site_index[p]] = True
            elif p in self.boundary_index:
                mask[self.n_sites + self.boundary_index[p]] = True
        return mask

    def outer_bonds(self):
        """Bonds with an endpoint on the boundary but none in the box.

        This ring (including bonds between two boundary sites) carries bond
        boundary conditions; bonds further out are taken closed.
        """
        inside = set(self.site_index)
        out = set()
        for x, y in map(tuple, self.boundary.tolist()):
            for nb in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
                if nb not in inside:
                    out.add(tuple(sorted([(x, y), nb], key=lambda p: (p[1], p[0]))))
        return sorted(out, key=lambda b: (b[0][1] != b[1][1], b[0][1], b[0][0]))


def dual_bond(bond):
    """Perpendicular bisector of a unit bond, as an ordered pair of endpoints.

    Works for regular and dual bonds alike, so applying it twice returns the
    original bond.
    """
    (x0, y0), (x1, y1) = bond
    mx, my = (x0 + x1) / 2.0, (y0 + y1) / 2.0
    if y0 == y1:
        u, v = (mx, my - 0.5), (mx, my + 0.5)
    else:
        u, v = (mx - 0.5, my), (mx + 0.5, my)
    return tuple(sorted([_snap(u), _snap(v)], key=lambda p: (p[1], p[0])))


def _snap(p):
    return tuple(int(c) if float(c).is_integer() else float(c) for c in p)


def build_rect(x_range, y_range):
    """Rectangle ``[x0, x1] x [y0, y1]`` of Z^2."""
    (a, b), (c, d) = map(tuple, (x_range, y_range))
    if b < a or d < c:
        raise ValueError("empty rectangle")
    sites = [(x, y) for y in range(c, d + 1) for x in range(a, b + 1)]
    inside = set(sites)
    boundary = sorted(
        {
            nb
            for (x, y) in sites
            for nb in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1))
            if nb not in inside
        },
        key=lambda p: (p[1], p[0]),
    )
    horizontal = [((x, y), (x + 1, y)) for y in range(c, d + 1) for x in range(a - 1, b + 1)]
    vertical = [((x, y), (x, y + 1)) for y in range(c - 1, d + 1) for x in range(a, b + 1)]
    bonds = np.array(horizontal + vertical, dtype=np.int64)
    is_h = np.zeros(len(bonds), dtype=bool)
    is_h[: len(horizontal)] = True
    return Geometry(
        x_range=(a, b),
        y_range=(c, d),
        sites=np.array(sites, dtype=np.int64),
        boundary=np.array(boundary, dtype=np.int64),
        bonds=bonds,
        bond_is_horizontal=is_h,
    )


def build_box(N):
    """The box ``Lambda_N = [-N, N]^2 ∩ Z^2``.

    Geometries are immutable, so repeated calls share one cached instance.
    """
    if int(N) != N or N < 1:
        raise ValueError(f"half width must be a positive integer, got {N!r}")
    return _box(int(N))


@lru_cache(maxsize=16)
def _box(N):
    return build_rect((-N, N), (-N, N))


@dataclass(frozen=True, eq=False)
class BoundarySpec:
    """Boundary values in ``{-1, 0, +1}``, aligned with ``geometry.boundary``."""

    geometry: Geometry
    values: np.ndarray
    k: int | None = None
    eps: int | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.int8)
        if values.shape != (self.geometry.n_boundary,):
            raise ValueError(
                f"expected {self.geometry.n_boundary} boundary values, got {values.shape}"
            )
        if not np.isin(values, (-1, 0, 1)).all():
            raise ValueError("boundary values must lie in {-1, 0, 1}")
        object.__setattr__(self, "values", values)

    def __getitem__(self, point):
        return int(self.values[self.geometry.boundary_index[tuple(point)]])

    def as_dict(self):
        return {tuple(map(int, p)): int(v) for p, v in zip(self.geometry.boundary, self.values)}

    @property
    def node_values(self):
        """Values on the boundary nodes, as used by the kernels."""
        return self.values


def constant_boundary(geometry, value):
    return BoundarySpec(geometry, np.full(geometry.n_boundary, value, dtype=np.int8))


def eta(N, k, eps, geometry=None):
    """Boundary condition ``eta^{k,eps}`` on ``Lambda_N``.

    A boundary site is ``+1`` when it lies within distance ``k`` of either
    coordinate axis and ``eps`` otherwise.
    """
    if eps not in (0, -1):
        raise ValueError(f"eps must be 0 or -1, got {eps!r}")
    if not 1 <= k <= N:
        raise ValueError(f"need 1 <= k <= N, got k={k}, N={N}")
    geometry = geometry or build_box(N)
    if geometry.half_width != N:
        raise ValueError("geometry does not match N")
    b = geometry.boundary
    plus = (np.abs(b[:, 0]) <= k) | (np.abs(b[:, 1]) <= k)
    values = np.where(plus, 1, eps).astype(np.int8)
    return BoundarySpec(geometry, values, k=k, eps=eps)


# regions


@dataclass(frozen=True)
class RegionMask:
    kind: str
    side: int
    params: dict
    points: frozenset

    def __contains__(self, point):
        return tuple(point) in self.points

    def __len__(self):
        return len(self.points)


def strip(N, k, i):
    """``Gamma_i``: the ``2k+1`` boundary sites of side ``i`` nearest the axis."""
    base = [(x, -N - 1) for x in range(-k, k + 1)]
    return frozenset(rotate_cw(p, i - 1) for p in base)


def corner_strip(N, k, i):
    """``Gamma_{i,i+1}``: boundary sites between strips ``i`` and ``i+1``, with the corner.

    ``Gamma_{1,2}`` is the bottom-left corner region and contains ``(-N-1, -N-1)``.
    """
    base = (
        [(x, -N - 1) for x in range(-N, -k)]
        + [(-N - 1, y) for y in range(-N, -k)]
        + [(-N - 1, -N - 1)]
    )
    return frozenset(rotate_cw(p, i - 1) for p in base)


def in_triangle(point, a, b, side=1):
    """Closed triangle ``T^side_{a,b}`` with vertices ``(-b,-a), (b,-a), (0,-(a-b))`` for side 1."""
    x, y = rotate_ccw(point, side - 1)
    return y >= -a and abs(x) + (y + a) <= b


def in_square(point, N, m, i):
    """Closed corner square ``S^{i,i+1}_{N,m}``; ``S^{1,2} = [m, N+1] x [-N-1, -m]``.

    Later squares follow counter-clockwise, so ``S^{2,3}`` is the top-right one.
    """
    x, y = rotate_cw(point, i - 1)
    return m <= x <= N + 1 and -N - 1 <= y <= -m


def square_corner_end(N, k, i, j):
    """Dual site ``x_{i,j}``: ``x_{1,1} = (-k-1/2, -N-1/2)``, ``x_{1,2} = (k+1/2, -N-1/2)``.

    Rotated counter-clockwise with the corner squares, so ``x_{i,2}`` and
    ``x_{i+1,1}`` both lie in ``S^{i,i+1}``.
    """
    base = (-k - 0.5, -N - 0.5) if j == 1 else (k + 0.5, -N - 0.5)
    return rotate_ccw(base, i - 1)


def _box_lattice(N):
    return [(x, y) for y in range(-N - 1, N + 2) for x in range(-N - 1, N + 2)]


def _dual_box(N):
    return [(x + 0.5, y + 0.5) for y in range(-N - 1, N + 1) for x in range(-N - 1, N + 1)]


def region(geometry, kind, i, **params):
    """Resolve a region mask on the box ``geometry``.

    kind:
      ``"strip"`` (k), ``"corner_strip"`` (k), ``"dual_corner"`` (k),
      ``"triangle"`` (a, b, dual=False) -- ``T^i_{a,b}``; pass half-integers
      for the shifted triangles,
      ``"square"`` (m, dual=False) -- ``S^{i,i+1}_{N,m}``.
    """
    N = geometry.half_width
    if N is None:
        raise ValueError("regions are defined on centred boxes only")
    if i not in SIDES:
        raise ValueError(f"side index must be in 1..4, got {i}")
    if kind == "strip":
        pts = strip(N, params["k"], i)
    elif kind == "corner_strip":
        pts = corner_strip(N, params["k"], i)
    elif kind == "dual_corner":
        pts = dual_corner(N, params["k"], i)
    elif kind == "triangle":
        a, b = params["a"], params["b"]
        if b >= a:
            raise ValueError("triangle apex must lie strictly inside the box (need b < a)")
        cand = _dual_box(N) if params.get("dual") else _box_lattice(N)
        pts = frozenset(p for p in cand if in_triangle(p, a, b, i))
    elif kind == "square":
        m = params["m"]
        cand = _dual_box(N) if params.get("dual") else _box_lattice(N)
        pts = frozenset(p for p in cand if in_square(p, N, m, i))
    else:
        raise ValueError(f"unknown region kind {kind!r}")
    return RegionMask(kind=kind, side=i, params=dict(params, N=N), points=frozenset(pts))


def dual_corner(N, k, i):
    """``Gamma*_{i,i+1}``: dual sites on the square of radius ``N+1/2`` at corners of ``Q(y)``, ``y`` in ``Gamma_{i,i+1}``."""
    r = N + 0.5
    out = set()
    for y in corner_strip(N, k, i):
        for dx in (-0.5, 0.5):
            for dy in (-0.5, 0.5):
                c = (y[0] + dx, y[1] + dy)
                if max(abs(c[0]), abs(c[1])) == r:
                    out.add(c)
    return frozenset(out)


def q_boundary(phi):
    """Dual bonds forming the boundary of ``Q(phi)``, the union of unit squares about ``phi``.

    Each returned dual bond crosses a bond with exactly one endpoint in ``phi``.
    """
    phi = {tuple(int(v) for v in p) for p in phi}
    if not phi:
        raise ValueError("empty site set")
    out = set()
    for x, y in phi:
        for nb in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if nb not in phi:
                out.add(dual_bond(tuple(sorted([(x, y), nb]))))
    return out
