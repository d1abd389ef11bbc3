"""Fortuin-Kasteleyn random-cluster model, Edwards-Sokal coupling and duality.

Bond configurations are ``int8`` arrays of 0/1 indexed by the bond ordinals
of the geometry (the extended bond set, every bond with an endpoint in the
box).  Dual configurations use the same ordinals: dual bond ``e`` is open
exactly when bond ``e`` is closed.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .geometry import BoundarySpec, Geometry, constant_boundary
from .ising import bond_probability, gibbs_table


@dataclass(frozen=True, eq=False)
class FKBoundary:
    """Boundary convention for cluster counting.

    ``wired``: all boundary sites joined; clusters touching them are not counted.
    ``site``: boundary sites joined by value, bonds to free (0) sites forced
    closed, and no open connection between +1 and -1 sites.  ``free`` is
    ``site`` with every value 0.  ``bond``: the ring of bonds just outside the
    extended bond set (``geometry.outer_bonds()``) is fixed to ``rho``; clusters
    meeting the box are counted.
    """

    geometry: Geometry
    kind: str
    eta: BoundarySpec | None = None
    rho: np.ndarray | None = None

    @classmethod
    def wired(cls, geometry):
        return cls(geometry, "wired")

    @classmethod
    def free(cls, geometry):
        return cls(geometry, "site", eta=constant_boundary(geometry, 0))

    @classmethod
    def site(cls, eta):
        return cls(eta.geometry, "site", eta=eta)

    @classmethod
    def bond(cls, geometry, rho):
        rho = np.asarray(rho, dtype=np.int8)
        if rho.shape != (len(geometry.outer_bonds()),):
            raise ValueError("rho must give one value per outer bond")
        return cls(geometry, "bond", rho=rho)

    @property
    def forced_closed(self):
        """Bonds that must be closed (bonds to free boundary sites)."""
        g = self.geometry
        if self.kind != "site":
            return np.zeros(g.n_bonds, dtype=bool)
        bn = g.bond_nodes
        vals = np.concatenate([np.ones(g.n_sites, dtype=np.int8), self.eta.values])
        return (vals[bn[:, 0]] == 0) | (vals[bn[:, 1]] == 0)


@dataclass
class ClusterDecomposition:
    """Component labels of box sites and boundary sites, and the weight count ``C``."""

    labels: np.ndarray
    boundary_labels: np.ndarray
    count: int
    valid: bool = True

    @property
    def n_components(self):
        return len(np.unique(np.concatenate([self.labels, self.boundary_labels])))


def _omega(bc, omega):
    omega = np.asarray(omega, dtype=np.int8)
    if omega.shape != (bc.geometry.n_bonds,):
        raise ValueError(f"bond configuration has shape {omega.shape}, expected ({bc.geometry.n_bonds},)")
    return omega


def clusters(omega, bc):
    """Open clusters of ``omega`` with boundary fusing per ``bc``.

    Labels are canonical (ordered by smallest node), so they only depend on
    the partition.
    """
    omega = _omega(bc, omega)
    g = bc.geometry
    n, nb = g.n_sites, g.n_boundary
    edges = g.bond_nodes
    open_mask = omega.astype(bool)

    if bc.kind == "bond":
        ring = g.outer_bonds()
        extra_nodes = sorted({p for b in ring for p in b} - set(g.boundary_index))
        index = {p: n + nb + i for i, p in enumerate(extra_nodes)}
        index.update({p: n + i for p, i in g.boundary_index.items()})
        ring_edges = np.array([[index[a], index[b]] for a, b in ring], dtype=np.int64)
        all_edges = np.concatenate([edges, ring_edges])
        mask = np.concatenate([open_mask, bc.rho.astype(bool)])
        labels, _ = K.components(n + nb + len(extra_nodes), all_edges, mask)
        count = len(np.unique(labels[:n]))
        return ClusterDecomposition(labels[:n], labels[n:n + nb], count)

    if bc.kind == "wired":
        fuse = np.ones(nb, dtype=np.int8)
    elif bc.kind == "site":
        fuse = bc.eta.values
    else:
        raise ValueError(f"unknown boundary kind {bc.kind!r}")
    # super nodes: n+nb for +1 (and wired), n+nb+1 for -1
    fuse_edges = [(n + i, n + nb if v > 0 else n + nb + 1) for i, v in enumerate(fuse) if v != 0]
    fe = np.array(fuse_edges, dtype=np.int64).reshape(-1, 2)
    all_edges = np.concatenate([edges, fe])
    mask = np.concatenate([open_mask, np.ones(len(fe), dtype=bool)])
    labels, _ = K.components(n + nb + 2, all_edges, mask)
    boundary_labels = labels[n:n + nb]
    touched = set(boundary_labels.tolist())
    count = len(set(labels[:n].tolist()) - touched)
    valid = labels[n + nb] != labels[n + nb + 1]
    if bc.kind == "site" and np.any(open_mask & bc.forced_closed):
        valid = False
    return ClusterDecomposition(labels[:n], boundary_labels, count, bool(valid))


def in_V(omega, eta):
    """Membership of ``omega`` in the site-boundary event ``V(box, eta)``."""
    return clusters(omega, FKBoundary.site(eta)).valid


def fk_weight(omega, bc, p, q):
    """Unnormalised weight ``p^|w| (1-p)^(|B|-|w|) q^C``; zero outside ``V`` for site conditions."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if not q > 0:
        raise ValueError("q must be positive")
    omega = _omega(bc, omega)
    dec = clusters(omega, bc)
    if not dec.valid:
        return 0.0
    k = int(omega.sum())
    return p ** k * (1.0 - p) ** (len(omega) - k) * q ** dec.count


def _table_from_counts(n_open, n_free, valid, m, p, q):
    with np.errstate(divide="ignore"):
        logw = n_open * np.log(p) + (m - n_open) * np.log1p(-p) + n_free * math.log(q)
    logw = np.where(valid, logw, -np.inf)
    logw -= logw.max()
    w = np.exp(logw)
    return w / w.sum()


def fk_table(bc, p, q, cap=22):
    """Exact FK probabilities of all ``2^|B|`` bond configurations (bit e = bond e)."""
    g = bc.geometry
    m = g.n_bonds
    if m > cap:
        raise ValueError(f"{m} bonds exceed the enumeration cap of {cap}")
    if bc.kind == "bond":
        w = np.array([fk_weight(_bits(i, m), bc, p, q) for i in range(1 << m)])
        return w / w.sum()
    n, nb = g.n_sites, g.n_boundary
    if bc.kind == "wired":
        vals = np.ones(nb, dtype=np.int8)
    else:
        vals = bc.eta.values
    fuse_pos = np.concatenate([np.zeros(n, bool), vals >= 0])
    fuse_neg = np.concatenate([np.zeros(n, bool), vals < 0])
    n_open, n_free, valid = K.graph_cluster_counts(
        n + nb, g.bond_nodes, 1 << m, bc.forced_closed, fuse_pos, fuse_neg
    )
    return _table_from_counts(n_open, n_free, valid, m, p, q)


def graph_fk_table(n_nodes, edges, p, q):
    """Free-boundary FK law on an arbitrary graph, counting every component."""
    edges = np.asarray(edges, dtype=np.int64)
    m = len(edges)
    none = np.zeros(n_nodes, dtype=bool)
    n_open, n_free, valid = K.graph_cluster_counts(
        n_nodes, edges, 1 << m, np.zeros(m, bool), none, none
    )
    return _table_from_counts(n_open, n_free, valid, m, p, q)


def _bits(i, m):
    return ((i >> np.arange(m)) & 1).astype(np.int8)


def config_index(omega):
    omega = np.asarray(omega, dtype=np.int64)
    return int((omega << np.arange(len(omega))).sum())


def alpha(p, q):
    """Lower bound ``p / (p + q(1-p))`` on the conditional probability that a bond is open."""
    return p / (p + q * (1.0 - p))


def dual_p(p, q):
    """``p*`` solving ``p / (q (1-p)) = (1 - p*) / p*``."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"dual parameter needs 0 < p < 1, got {p}")
    return q * (1.0 - p) / (p + q * (1.0 - p))


def dual_config(omega):
    """Dual configuration on the dual bonds (same ordinals): open iff the primal bond is closed."""
    return (1 - np.asarray(omega, dtype=np.int8)).astype(np.int8)


def dual_graph(geometry):
    """``(n_dual_sites, dual edge array)`` of the dual box; edge ``e`` is dual to bond ``e``."""
    return len(geometry.dual_sites), geometry.dual_bond_nodes


# Edwards-Sokal coupling


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def es_percolation(sigma, eta, p, seed=None):
    """Independent density-``p`` percolation on agreeing bonds; free boundary bonds stay closed.

    Draws one uniform per bond in ordinal order.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    g = eta.geometry
    sigma = np.asarray(sigma, dtype=np.int8)
    omega = np.empty(g.n_bonds, dtype=np.int8)
    K.percolate(sigma, eta.values, g.bond_nodes, float(p), _rng(seed), omega)
    return omega


class CouplingError(ValueError):
    """Bond configuration is not compatible with the site boundary condition."""


def es_label(omega, eta, seed=None, out=None):
    """Cluster labelling: boundary clusters take the boundary value, others a fair coin each.

    Coins are drawn for clusters in order of their smallest site ordinal.
    """
    g = eta.geometry
    omega = np.asarray(omega, dtype=np.int8)
    sigma = np.empty(g.n_sites, dtype=np.int8) if out is None else out
    status = K.label_clusters(omega, eta.values, g.bond_nodes, g.n_sites, _rng(seed), sigma)
    if status == 1:
        raise CouplingError("an open cluster joins boundary sites of opposite sign")
    if status == 2:
        raise CouplingError("an open bond touches a free boundary site")
    return sigma


def sw_sweep(sigma, eta, beta, seed=None, return_bonds=False):
    """One Swendsen-Wang update: percolation at ``p = 1 - exp(-2 beta)`` then labelling."""
    rng = _rng(seed)
    omega = es_percolation(sigma, eta, bond_probability(beta), rng)
    new = es_label(omega, eta, rng)
    return (new, omega) if return_bonds else new


class SWChain:
    """Swendsen-Wang chain keeping the last joint ``(spins, bonds)`` pair."""

    def __init__(self, eta, beta, seed=0, spins=None):
        self.eta = eta
        self.geometry = eta.geometry
        self.beta = float(beta)
        self.p = bond_probability(beta)
        self.rng = _rng(seed)
        g = self.geometry
        self.spins = np.ones(g.n_sites, dtype=np.int8) if spins is None else np.array(spins, dtype=np.int8)
        self.omega = np.zeros(g.n_bonds, dtype=np.int8)
        self.n_sweeps = 0

    def sweep(self, n=1):
        g = self.geometry
        for _ in range(n):
            K.percolate(self.spins, self.eta.values, g.bond_nodes, self.p, self.rng, self.omega)
            K.label_clusters(self.omega, self.eta.values, g.bond_nodes, g.n_sites, self.rng, self.spins)
        self.n_sweeps += n
        return self.spins

    def bonds(self):
        """Fresh percolation of the current spins (joint sample with them)."""
        g = self.geometry
        K.percolate(self.spins, self.eta.values, g.bond_nodes, self.p, self.rng, self.omega)
        return self.omega


def sw_state_samples(eta, beta, sweeps, seed=0, spins=None):
    """Packed spin state after each SW sweep, for comparison with exact tables."""
    g = eta.geometry
    if g.n_sites > 62:
        raise ValueError("state packing needs at most 62 sites")
    sigma = np.ones(g.n_sites, dtype=np.int8) if spins is None else np.array(spins, dtype=np.int8)
    out = np.empty(sweeps, dtype=np.int64)
    K.sw_chain_states(sigma, eta.values, g.bond_nodes, bond_probability(beta), _rng(seed), sweeps, out)
    return out


def fk_marginal_from_spins(eta, beta):
    """Exact bond law obtained by percolating exact Gibbs spins (small boxes)."""
    g = eta.geometry
    p = bond_probability(beta)
    mu = gibbs_table(g, eta, beta)
    m = g.n_bonds
    idx = np.arange(1 << m)
    bits = ((idx[:, None] >> np.arange(m)) & 1).astype(bool)
    out = np.zeros(1 << m)
    vals_b = eta.values
    bn = g.bond_nodes
    for s, w in enumerate(mu):
        spins = np.where((s >> np.arange(g.n_sites)) & 1, 1, -1)
        vals = np.concatenate([spins, vals_b])
        agree = (vals[bn[:, 0]] == vals[bn[:, 1]]) & (vals[bn[:, 0]] != 0)
        ok = ~np.any(bits & ~agree, axis=1)
        k = bits.sum(axis=1)
        n_agree = agree.sum()
        out += np.where(ok, w * p ** k * (1 - p) ** (n_agree - k), 0.0)
    return out


# binary snapshots of joint (spins, bonds) samples

SNAPSHOT_MAGIC = b"ISGSNAP1"
_HEADER = struct.Struct("<8sIiidQIII")


def write_snapshots(path, records, N, k, eps, beta, seed):
    """Write joint samples as fixed-width binary records.

    Layout (little endian): magic ``ISGSNAP1``; uint32 N; int32 k; int32 eps;
    float64 beta; uint64 seed; uint32 record count; uint32 site count;
    uint32 bond count.  Then per record the spins packed one bit per site
    (bit 1 = +1) followed by the bonds packed one bit per bond, both with
    ``numpy.packbits(..., bitorder="little")``.
    """
    records = list(records)
    n_sites = len(records[0][0]) if records else 0
    n_bonds = len(records[0][1]) if records else 0
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SNAPSHOT_MAGIC, N, k, eps, float(beta), seed, len(records), n_sites, n_bonds))
        for sigma, omega in records:
            fh.write(np.packbits(np.asarray(sigma) > 0, bitorder="little").tobytes())
            fh.write(np.packbits(np.asarray(omega) > 0, bitorder="little").tobytes())


def read_snapshots(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, N, k, eps, beta, seed, count, n_sites, n_bonds = _HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError("not a snapshot file")
    header = dict(N=N, k=k, eps=eps, beta=beta, seed=seed)
    sb, bb = (n_sites + 7) // 8, (n_bonds + 7) // 8
    pos = _HEADER.size
    records = []
    for _ in range(count):
        s = np.unpackbits(np.frombuffer(raw, np.uint8, sb, pos), count=n_sites, bitorder="little")
        pos += sb
        w = np.unpackbits(np.frombuffer(raw, np.uint8, bb, pos), count=n_bonds, bitorder="little")
        pos += bb
        records.append(((2 * s.astype(np.int8) - 1), w.astype(np.int8)))
    return header, records
