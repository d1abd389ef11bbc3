"""Compiled inner loops shared by the simulation and enumeration modules.

All kernels take plain arrays.  Node values are spins for box sites and
boundary values for boundary nodes (see ``geometry`` for the node layout).
Random numbers come from a ``numpy.random.Generator`` passed in directly,
so draw order is fixed by the loop order documented on each kernel.
"""

import numpy as np
from numba import njit

HEAT_BATH = 0
METROPOLIS = 1


@njit(cache=True)
def node_value(spins, bvals, node):
    n = spins.size
    if node < n:
        return spins[node]
    return bvals[node - n]


@njit(cache=True)
def local_field(spins, bvals, nbr, x):
    h = 0
    for t in range(4):
        j = nbr[x, t]
        if j >= 0:
            h += node_value(spins, bvals, j)
    return h


@njit(cache=True)
def flip_rate_from_dh(dh, beta, family):
    if family == HEAT_BATH:
        return 1.0 / (1.0 + np.exp(beta * dh))
    if dh <= 0:
        return 1.0
    return np.exp(-beta * dh)


@njit(cache=True)
def energy(spins, bvals, nbr):
    n = spins.size
    e = 0.0
    for x in range(n):
        for t in range(4):
            j = nbr[x, t]
            if j < 0:
                continue
            if j < n:
                if j > x:
                    e -= spins[x] * spins[j]
            else:
                e -= spins[x] * bvals[j - n]
    return e


@njit(cache=True)
def glauber_sweeps(spins, bvals, nbr, beta, family, n_sweeps, rng, energies, mags):
    """Random-scan single-spin-flip chain.

    Each step draws a site (``rng.integers``) then one uniform; the flip is
    accepted when the uniform is below the flip rate.  Energy and
    magnetization are recorded after every sweep of ``n`` steps.
    """
    n = spins.size
    e = energy(spins, bvals, nbr)
    m = 0
    for x in range(n):
        m += spins[x]
    for s in range(n_sweeps):
        for _ in range(n):
            x = rng.integers(0, n)
            dh = 2.0 * spins[x] * local_field(spins, bvals, nbr, x)
            u = rng.random()
            if u < flip_rate_from_dh(dh, beta, family):
                spins[x] = -spins[x]
                e += dh
                m += 2 * spins[x]
        energies[s] = e
        mags[s] = m


@njit(cache=True)
def glauber_states(spins, bvals, nbr, beta, family, n_sweeps, rng, states):
    """Same chain as :func:`glauber_sweeps`, recording the packed state per sweep."""
    n = spins.size
    for s in range(n_sweeps):
        for _ in range(n):
            x = rng.integers(0, n)
            dh = 2.0 * spins[x] * local_field(spins, bvals, nbr, x)
            u = rng.random()
            if u < flip_rate_from_dh(dh, beta, family):
                spins[x] = -spins[x]
        states[s] = pack_spins(spins)


@njit(cache=True)
def pack_spins(spins):
    s = 0
    for x in range(spins.size):
        if spins[x] > 0:
            s |= 1 << x
    return s


# union-find


@njit(cache=True)
def uf_find(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


@njit(cache=True)
def uf_union(parent, size, a, b):
    ra = uf_find(parent, a)
    rb = uf_find(parent, b)
    if ra == rb:
        return ra
    if size[ra] < size[rb] or (size[ra] == size[rb] and rb < ra):
        ra, rb = rb, ra
    parent[rb] = ra
    size[ra] += size[rb]
    return ra


@njit(cache=True)
def components(n_nodes, edges, open_mask):
    """Canonical component labels: label ``c`` is the c-th component by smallest node."""
    parent = np.arange(n_nodes)
    size = np.ones(n_nodes, dtype=np.int64)
    for e in range(edges.shape[0]):
        if open_mask[e]:
            uf_union(parent, size, edges[e, 0], edges[e, 1])
    labels = np.full(n_nodes, -1, dtype=np.int64)
    root_label = np.full(n_nodes, -1, dtype=np.int64)
    count = 0
    for v in range(n_nodes):
        r = uf_find(parent, v)
        if root_label[r] < 0:
            root_label[r] = count
            count += 1
        labels[v] = root_label[r]
    return labels, count


# Edwards-Sokal coupling


@njit(cache=True)
def percolate(spins, bvals, bond_nodes, p, rng, omega):
    """One uniform per bond in ordinal order; open iff endpoints agree, are nonzero, and ``u < p``."""
    for e in range(bond_nodes.shape[0]):
        u = rng.random()
        va = node_value(spins, bvals, bond_nodes[e, 0])
        vb = node_value(spins, bvals, bond_nodes[e, 1])
        omega[e] = 1 if (va != 0 and va == vb and u < p) else 0


@njit(cache=True)
def label_clusters(omega, bvals, bond_nodes, n, rng, spins):
    """Cluster-labelling step.

    Boundary sites are fused into one super-node per value (``n`` for +1,
    ``n+1`` for -1).  Clusters touching a super-node take its value; the others
    get one uniform each, in order of their smallest site ordinal.
    Returns 0 on success, 1 if a cluster joins +1 and -1 boundary sites, 2 if
    an open bond touches a free (0) boundary site.
    """
    parent = np.arange(n + 2)
    size = np.ones(n + 2, dtype=np.int64)
    for e in range(bond_nodes.shape[0]):
        if omega[e] == 0:
            continue
        a = bond_nodes[e, 0]
        b = bond_nodes[e, 1]
        if a >= n:
            v = bvals[a - n]
            if v == 0:
                return 2
            a = n if v > 0 else n + 1
        if b >= n:
            v = bvals[b - n]
            if v == 0:
                return 2
            b = n if v > 0 else n + 1
        uf_union(parent, size, a, b)
    rp = uf_find(parent, n)
    rm = uf_find(parent, n + 1)
    if rp == rm:
        return 1
    lab = np.zeros(n + 2, dtype=np.int8)
    for x in range(n):
        r = uf_find(parent, x)
        if r == rp:
            spins[x] = 1
        elif r == rm:
            spins[x] = -1
        else:
            if lab[r] == 0:
                lab[r] = 1 if rng.random() < 0.5 else -1
            spins[x] = lab[r]
    return 0


@njit(cache=True)
def sw_chain_states(spins, bvals, bond_nodes, p, rng, n_sweeps, states):
    n = spins.size
    omega = np.zeros(bond_nodes.shape[0], dtype=np.int8)
    for s in range(n_sweeps):
        percolate(spins, bvals, bond_nodes, p, rng, omega)
        label_clusters(omega, bvals, bond_nodes, n, rng, spins)
        states[s] = pack_spins(spins)


# breadth-first searches


@njit(cache=True)
def spin_cluster(values, nbr, start, target, visited):
    """Nodes joined to ``start`` (a node mask) by paths of nodes valued ``target``."""
    n_nodes = values.size
    stack = np.empty(n_nodes, dtype=np.int64)
    top = 0
    for v in range(n_nodes):
        visited[v] = False
    for v in range(n_nodes):
        if start[v] and values[v] == target:
            visited[v] = True
            stack[top] = v
            top += 1
    while top > 0:
        top -= 1
        v = stack[top]
        for t in range(4):
            w = nbr[v, t]
            if w >= 0 and not visited[w] and values[w] == target:
                visited[w] = True
                stack[top] = w
                top += 1


@njit(cache=True)
def dual_reach(omega, dual_nbr, dual_via, allowed, start, visited):
    """Dual sites reachable from ``start`` along open dual bonds inside ``allowed``.

    A dual bond is open when its primal bond is closed.
    """
    n = allowed.size
    stack = np.empty(n, dtype=np.int64)
    top = 0
    for v in range(n):
        visited[v] = False
    for v in range(n):
        if start[v] and allowed[v]:
            visited[v] = True
            stack[top] = v
            top += 1
    while top > 0:
        top -= 1
        v = stack[top]
        for t in range(4):
            w = dual_nbr[v, t]
            if w < 0 or visited[w] or not allowed[w]:
                continue
            if omega[dual_via[v, t]] == 0:
                visited[w] = True
                stack[top] = w
                top += 1


# state-space kernels (states bit-packed in site order, bit 1 <-> +1)


@njit(cache=True)
def _spin_of(s, x):
    return 1 if (s >> x) & 1 else -1


@njit(cache=True)
def _field_of_state(s, x, site_nbr, bfield):
    h = bfield[x]
    for t in range(4):
        j = site_nbr[x, t]
        if j >= 0:
            h += _spin_of(s, j)
    return h


@njit(cache=True)
def all_energies(n, site_nbr, bfield):
    dim = 1 << n
    out = np.empty(dim)
    for s in range(dim):
        e = 0.0
        for x in range(n):
            sx = _spin_of(s, x)
            inner = 0
            for t in range(4):
                j = site_nbr[x, t]
                if j > x:
                    inner += _spin_of(s, j)
            e -= sx * (inner + bfield[x])
        out[s] = e
    return out


@njit(cache=True)
def rate_table(n, site_nbr, bfield, beta, family):
    dim = 1 << n
    out = np.empty((n, dim))
    for s in range(dim):
        for x in range(n):
            dh = 2.0 * _spin_of(s, x) * _field_of_state(s, x, site_nbr, bfield)
            out[x, s] = flip_rate_from_dh(dh, beta, family)
    return out


@njit(cache=True)
def sym_matvec(v, out, n, site_nbr, bfield, beta, family):
    """``out = S v`` with ``S = D^{1/2} (-A) D^{-1/2}``, ``D = diag(mu)``.

    Off-diagonal entries are ``-c(x, s) exp(beta dH / 2)``, which is symmetric
    under ``s <-> s^x`` by detailed balance.
    """
    dim = 1 << n
    for s in range(dim):
        acc = 0.0
        vs = v[s]
        for x in range(n):
            dh = 2.0 * _spin_of(s, x) * _field_of_state(s, x, site_nbr, bfield)
            c = flip_rate_from_dh(dh, beta, family)
            acc += c * vs - c * np.exp(0.5 * beta * dh) * v[s ^ (1 << x)]
        out[s] = acc


@njit(cache=True)
def graph_cluster_counts(n_nodes, edges, n_configs, forced_closed, fuse_pos, fuse_neg):
    """For every bond configuration index ``w < n_configs`` (bit e = bond e open):

    returns (number of open bonds, number of components with no fused node,
    validity flag).  Nodes flagged in ``fuse_pos`` are merged into one +1
    node, ``fuse_neg`` into one -1 node; a configuration is invalid if it opens
    a ``forced_closed`` bond or joins the two fused nodes.
    """
    m = edges.shape[0]
    n_open = np.empty(n_configs, dtype=np.int64)
    n_free = np.empty(n_configs, dtype=np.int64)
    valid = np.empty(n_configs, dtype=np.bool_)
    parent = np.empty(n_nodes + 2, dtype=np.int64)
    size = np.empty(n_nodes + 2, dtype=np.int64)
    pos = n_nodes
    neg = n_nodes + 1
    for w in range(n_configs):
        for i in range(n_nodes + 2):
            parent[i] = i
            size[i] = 1
        for i in range(n_nodes):
            if fuse_pos[i]:
                uf_union(parent, size, i, pos)
            elif fuse_neg[i]:
                uf_union(parent, size, i, neg)
        ok = True
        cnt = 0
        for e in range(m):
            if (w >> e) & 1:
                cnt += 1
                if forced_closed[e]:
                    ok = False
                uf_union(parent, size, edges[e, 0], edges[e, 1])
        rp = uf_find(parent, pos)
        rn = uf_find(parent, neg)
        if rp == rn:
            ok = False
        comps = 0
        for i in range(n_nodes):
            if uf_find(parent, i) == i and i != rp and i != rn:
                comps += 1
        n_open[w] = cnt
        n_free[w] = comps
        valid[w] = ok
    return n_open, n_free, valid


@njit(cache=True)
def generator_coo(n, site_nbr, bfield, beta, family, rows, cols, vals, diag):
    """Off-diagonal entries ``A(s, s^x) = c(x, s)`` in COO form and ``diag = -row sums``."""
    dim = 1 << n
    t = 0
    for s in range(dim):
        tot = 0.0
        for x in range(n):
            dh = 2.0 * _spin_of(s, x) * _field_of_state(s, x, site_nbr, bfield)
            c = flip_rate_from_dh(dh, beta, family)
            rows[t] = s
            cols[t] = s ^ (1 << x)
            vals[t] = c
            t += 1
            tot += c
        diag[s] = -tot


@njit(cache=True)
def dirichlet_energy(f, mu, n, site_nbr, bfield, beta, family):
    """``1/2 sum_s sum_x mu(s) c(x, s) (f(s^x) - f(s))^2``."""
    dim = 1 << n
    e = 0.0
    for s in range(dim):
        for x in range(n):
            d = f[s ^ (1 << x)] - f[s]
            if d != 0.0:
                dh = 2.0 * _spin_of(s, x) * _field_of_state(s, x, site_nbr, bfield)
                e += mu[s] * flip_rate_from_dh(dh, beta, family) * d * d
    return 0.5 * e


@njit(cache=True)
def inner_boundary_mask(member, n):
    """States in the set from which one flip leaves it."""
    dim = 1 << n
    out = np.zeros(dim, dtype=np.bool_)
    for s in range(dim):
        if member[s]:
            for x in range(n):
                if not member[s ^ (1 << x)]:
                    out[s] = True
                    break
    return out
