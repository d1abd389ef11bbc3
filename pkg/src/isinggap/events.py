"""Connectivity events on spin and bond configurations of ``Lambda_N``.

``D``: the plus cluster of every boundary strip ``Gamma_i`` stays inside the
triangle ``T^i_{N, k+3j}``, ``j = (N-k)//4``.
``Dhat``: the minus cluster of every minus corner region stays inside its
corner square ``S_{N, k//4}``.
``E_i``: open dual path from ``Gamma*_{i-1,i}`` to ``Gamma*_{i,i+1}`` inside
``T^i_{N+1/2, k+j+1/2}``.
``F_{i,i+1}``: open dual path from ``x_{i,2}`` to ``x_{i+1,1}`` inside ``S^{i,i+1}_{N, k//4}``.
``A_N``: pairs of strips joined by plus paths.

Plus and minus paths run over the extended bond set; boundary sites take
their boundary value.  Cluster containment is checked on box sites only (the
strips themselves sit one row outside the triangles' bases).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from . import _kernels as K
from .geometry import (
    SIDES,
    dual_corner,
    in_square,
    in_triangle,
    square_corner_end,
    strip,
)

PAIRS = tuple(combinations(SIDES, 2))


def default_j(N, k):
    return (N - k) // 4


@dataclass(frozen=True, eq=False)
class EventContext:
    """Precomputed masks for one boundary condition ``eta^{k,eps}`` on ``Lambda_N``."""

    eta: object
    N: int
    k: int
    j: int
    strip_nodes: tuple
    triangle_sites: tuple
    square_sites: tuple
    corner_minus_nodes: tuple
    dual_triangles: tuple
    dual_corners: tuple
    dual_squares: tuple
    square_ends: tuple

    @property
    def geometry(self):
        return self.eta.geometry

    @property
    def m(self):
        return self.k // 4


@lru_cache(maxsize=32)
def _context(eta, j):
    g = eta.geometry
    N, k = g.half_width, eta.k
    sites = [tuple(s) for s in g.sites.tolist()]
    dual = [tuple(d) for d in g.dual_sites.tolist()]
    m = k // 4
    strip_nodes = tuple(g.node_mask(strip(N, k, i)) for i in SIDES)
    tri = tuple(np.array([in_triangle(s, N, k + 3 * j, i) for s in sites]) for i in SIDES)
    sq = tuple(np.array([in_square(s, N, m, i) for s in sites]) for i in SIDES)
    n = g.n_sites
    corner_minus = []
    for i in SIDES:
        inside = np.array([in_square(tuple(b), N, m, i) for b in g.boundary.tolist()])
        mask = np.zeros(n + g.n_boundary, dtype=bool)
        mask[n:] = inside & (eta.values == -1)
        corner_minus.append(mask)
    a, b = N + 0.5, k + j + 0.5
    dtri = tuple(np.array([in_triangle(d, a, b, i) for d in dual]) for i in SIDES)
    dcorner = tuple(_dual_mask(g, dual_corner(N, k, i)) for i in SIDES)
    dsq = tuple(np.array([in_square(d, N, m, i) for d in dual]) for i in SIDES)
    ends = tuple(
        (g.dual_node_of(square_corner_end(N, k, i, 2)), g.dual_node_of(square_corner_end(N, k, i % 4 + 1, 1)))
        for i in SIDES
    )
    return EventContext(eta, N, k, j, strip_nodes, tri, sq, tuple(corner_minus), dtri, dcorner, dsq, ends)


def _dual_mask(g, points):
    mask = np.zeros(len(g.dual_sites), dtype=bool)
    for p in points:
        idx = g.dual_site_index.get((float(p[0]), float(p[1])))
        if idx is not None:
            mask[idx] = True
    return mask


def context(eta, N=None, k=None, j=None):
    g = eta.geometry
    if g.half_width is None or eta.k is None:
        raise ValueError("events need a boundary condition built by eta(N, k, eps)")
    if N is not None and N != g.half_width:
        raise ValueError(f"geometry has N={g.half_width}, got N={N}")
    if k is not None and k != eta.k:
        raise ValueError(f"boundary condition has k={eta.k}, got k={k}")
    j = default_j(g.half_width, eta.k) if j is None else j
    if j < 0 or eta.k + 3 * j > g.half_width:
        raise ValueError("need j >= 0 and k + 3j <= N")
    return _context(eta, j)


def _values(sigma, eta):
    sigma = np.asarray(sigma, dtype=np.int8)
    if sigma.shape != (eta.geometry.n_sites,):
        raise ValueError("configuration does not match the geometry")
    return np.concatenate([sigma, eta.values])


def _cluster_nodes(values, nbr, start, sign):
    visited = np.zeros(values.size, dtype=np.bool_)
    K.spin_cluster(values, nbr, start, sign, visited)
    return visited


def _phi_mask(g, phi):
    if isinstance(phi, np.ndarray) and phi.dtype == bool:
        return phi
    return g.node_mask(phi)


def plus_cluster(phi, sigma, eta, sign=1):
    """Box sites joined to ``phi`` by paths of ``sign`` spins (boundary sites use ``eta``)."""
    g = eta.geometry
    vis = _cluster_nodes(_values(sigma, eta), g.neighbors, _phi_mask(g, phi), sign)
    return frozenset(tuple(map(int, g.sites[x])) for x in np.flatnonzero(vis[: g.n_sites]))


def minus_cluster(phi, sigma, eta):
    return plus_cluster(phi, sigma, eta, sign=-1)


def bond_cluster(phi, omega, geometry):
    """Box sites joined to ``phi`` by open bonds."""
    n_nodes = geometry.n_sites + geometry.n_boundary
    labels, _ = K.components(n_nodes, geometry.bond_nodes, np.asarray(omega, bool))
    start = _phi_mask(geometry, phi)
    hit = set(labels[start].tolist())
    return frozenset(
        tuple(map(int, geometry.sites[x])) for x in range(geometry.n_sites) if labels[x] in hit
    )


def in_D(sigma, eta, N=None, k=None):
    ctx = context(eta, N, k)
    g = ctx.geometry
    values = _values(sigma, eta)
    n = g.n_sites
    for i in range(4):
        vis = _cluster_nodes(values, g.neighbors, ctx.strip_nodes[i], 1)
        if np.any(vis[:n] & ~ctx.triangle_sites[i]):
            return False
    return True


def in_inner_boundary_D(sigma, eta, N=None, k=None):
    """``sigma`` in ``D`` and some single flip leaves ``D``.

    ``D`` is decreasing, so only minus-to-plus flips of sites next to a strip
    cluster can leave it; each candidate is checked by growing its plus
    cluster after the flip.
    """
    ctx = context(eta, N, k)
    g = ctx.geometry
    n = g.n_sites
    values = _values(sigma, eta)
    nbr = g.neighbors
    clusters = []
    for i in range(4):
        vis = _cluster_nodes(values, nbr, ctx.strip_nodes[i], 1)
        if np.any(vis[:n] & ~ctx.triangle_sites[i]):
            return False
        clusters.append(vis)
    start = np.zeros(values.size, dtype=np.bool_)
    for x in range(n):
        if values[x] != -1:
            continue
        touching = [i for i in range(4) if any(w >= 0 and clusters[i][w] for w in nbr[x])]
        if not touching:
            continue
        values[x] = 1
        start[x] = True
        grown = _cluster_nodes(values, nbr, start, 1)
        start[x] = False
        values[x] = -1
        for i in touching:
            if np.any(grown[:n] & ~ctx.triangle_sites[i]):
                return True
    return False


def in_inner_boundary_D_bruteforce(sigma, eta, N=None, k=None):
    """Reference version: try all single flips."""
    sigma = np.array(sigma, dtype=np.int8)
    if not in_D(sigma, eta, N, k):
        return False
    for x in range(len(sigma)):
        sigma[x] = -sigma[x]
        out = not in_D(sigma, eta, N, k)
        sigma[x] = -sigma[x]
        if out:
            return True
    return False


class DegenerateGeometry(ValueError):
    """Region parameters collapse (corner squares need ``k >= 4``)."""


def in_Dhat(sigma, eta, N=None, k=None, allow_degenerate=False):
    """Minus cluster of each minus corner region stays in its corner square ``S_{N, k//4}``.

    For ``k < 4`` the square parameter ``k//4`` is 0 and the squares become
    box quadrants; this raises unless ``allow_degenerate`` is set.
    """
    ctx = context(eta, N, k)
    if ctx.k < 4 and not allow_degenerate:
        raise DegenerateGeometry(f"k={ctx.k} gives corner squares with k//4 = 0")
    g = ctx.geometry
    values = _values(sigma, eta)
    n = g.n_sites
    for i in range(4):
        vis = _cluster_nodes(values, g.neighbors, ctx.corner_minus_nodes[i], -1)
        if np.any(vis[:n] & ~ctx.square_sites[i]):
            return False
    return True


def _dual_reach(omega, g, allowed, start):
    nbr, via = g.dual_neighbors
    vis = np.zeros(allowed.size, dtype=np.bool_)
    K.dual_reach(np.asarray(omega, dtype=np.int8), nbr, via, allowed, start, vis)
    return vis


def dual_crossing_E(omega, eta, N=None, k=None, j=None, i=1):
    """``Gamma*_{i-1,i}`` joined to ``Gamma*_{i,i+1}`` by open dual bonds inside ``T^i_{N+1/2, k+j+1/2}``."""
    ctx = context(eta, N, k, j)
    g = ctx.geometry
    allowed = ctx.dual_triangles[i - 1]
    before = ctx.dual_corners[(i - 2) % 4]
    after = ctx.dual_corners[i - 1]
    vis = _dual_reach(omega, g, allowed, before)
    return bool(np.any(vis & after))


def square_crossing_F(omega, eta, N=None, k=None, i=1):
    """``x_{i,2}`` joined to ``x_{i+1,1}`` by open dual bonds inside ``S^{i,i+1}_{N, k//4}``."""
    ctx = context(eta, N, k)
    g = ctx.geometry
    a, b = ctx.square_ends[i - 1]
    allowed = ctx.dual_squares[i - 1]
    start = np.zeros(allowed.size, dtype=np.bool_)
    start[a] = True
    vis = _dual_reach(omega, g, allowed, start)
    return bool(vis[b])


def strip_connectivity(sigma, eta, N=None, k=None):
    """Set of pairs ``(i, j)``, ``i < j``, with ``Gamma_i`` joined to ``Gamma_j`` by a plus path."""
    ctx = context(eta, N, k)
    g = ctx.geometry
    values = _values(sigma, eta)
    out = set()
    for i in range(4):
        vis = _cluster_nodes(values, g.neighbors, ctx.strip_nodes[i], 1)
        for jj in range(i + 1, 4):
            if np.any(vis & ctx.strip_nodes[jj]):
                out.add((i + 1, jj + 1))
    return out


def encode_pairs(pairs):
    """Bitmask over ``(1,2),(1,3),(1,4),(2,3),(2,4),(3,4)``."""
    return sum(1 << PAIRS.index(p) for p in pairs)


def _e(i):
    return lambda s, w, eta: dual_crossing_E(w, eta, i=i)


def _f(i):
    return lambda s, w, eta: square_crossing_F(w, eta, i=i)


# name -> f(sigma, omega, eta); events on spins ignore omega
REGISTRY = {
    "D": lambda s, w, eta: in_D(s, eta),
    "dD": lambda s, w, eta: in_inner_boundary_D(s, eta),
    "Dhat": lambda s, w, eta: in_Dhat(s, eta),
    **{f"E{i}": _e(i) for i in SIDES},
    **{f"F{i}{i % 4 + 1}": _f(i) for i in SIDES},
    "AN": lambda s, w, eta: encode_pairs(strip_connectivity(s, eta)),
}

BOND_EVENTS = {f"E{i}" for i in SIDES} | {f"F{i}{i % 4 + 1}" for i in SIDES}


def evaluate(names, sigma, omega, eta):
    return {name: REGISTRY[name](sigma, omega, eta) for name in names}
