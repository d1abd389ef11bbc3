"""Dual surface tension from connectivity decay, norm models and the crossover point.

The estimator samples the Ising model with all-plus boundary on a box by
Swendsen-Wang, percolates the bonds (a wired FK sample) and asks whether the
dual source ``(1/2, 1/2)`` reaches ``(1/2, 1/2) + n d`` along open dual bonds
(the dual of a wired FK sample is a free FK sample at ``p*``).  Each sample
averages the four rotations of ``d``.  Then ``tau_n = -log(P_n) / n``.

By subadditivity ``tau_n`` decreases towards ``tau``, so the last ladder point
is an upper-biased estimate; its standard error is widened by the spread of
the last two ladder points.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull

from . import _kernels as K
from .fk import SWChain
from .geometry import build_box, constant_boundary, in_triangle, rotate_ccw
from .ising import BETA_C, bond_probability
from .spectral import Estimate

SQRT2 = math.sqrt(2.0)
SOURCE = (0.5, 0.5)


def _rotations(d):
    return [tuple(int(v) for v in rotate_ccw(d, t)) for t in range(4)]


class DualConnectivity:
    """Accumulates dual connection indicators from ``source`` to a set of targets per sample."""

    def __init__(self, eta, source, targets):
        g = eta.geometry
        self.geometry = g
        self.eta = eta
        self.nbr, self.via = g.dual_neighbors
        self.allowed = np.ones(len(g.dual_sites), dtype=np.bool_)
        self.start = np.zeros(len(g.dual_sites), dtype=np.bool_)
        self.start[g.dual_node_of(source)] = True
        self.targets = np.array([g.dual_node_of(t) for t in targets], dtype=np.int64)
        self._vis = np.zeros(len(g.dual_sites), dtype=np.bool_)

    def hits(self, omega):
        K.dual_reach(omega, self.nbr, self.via, self.allowed, self.start, self._vis)
        return self._vis[self.targets]


def dual_connectivity_samples(eta, beta, source, targets, samples, seed=0, burn_in=100):
    """``(samples, len(targets))`` indicators of ``source <->* target`` under SW sampling."""
    chain = SWChain(eta, beta, seed=seed)
    conn = DualConnectivity(eta, source, targets)
    if burn_in:
        chain.sweep(burn_in)
    out = np.empty((samples, len(targets)), dtype=np.bool_)
    for t in range(samples):
        chain.sweep()
        out[t] = conn.hits(chain.bonds())
    return out


def _wired_box(M):
    N = M // 2
    g = build_box(N)
    return constant_boundary(g, 1), N


def _guard(N, M, offsets):
    r = N + 0.5
    for off in offsets:
        tx, ty = SOURCE[0] + off[0], SOURCE[1] + off[1]
        if r - max(abs(tx), abs(ty)) < M / 4:
            raise ValueError(f"target {(tx, ty)} is within M/4 of the boundary of the side-{M} box")


def connectivity_probability(beta, M, x, samples, seed=0, bc="wired", burn_in=100, batches=20):
    """Estimate of ``P(0* <->* x*)`` in a wired box of side ``M`` (dual sites relative to the source)."""
    if bc != "wired":
        raise ValueError("only the wired box is implemented")
    x = tuple(int(v) for v in x)
    if x == (0, 0):
        return Estimate(1.0, 0.0, samples, batches, float("nan"))
    eta, N = _wired_box(M)
    _guard(N, M, [x])
    target = (SOURCE[0] + x[0], SOURCE[1] + x[1])
    h = dual_connectivity_samples(eta, beta, SOURCE, [target], samples, seed, burn_in)
    return Estimate.from_series(h[:, 0], batches=batches)


@dataclass
class DirectionalTension:
    beta: float
    direction: tuple
    ladder: tuple
    p_hat: list
    tau_n: np.ndarray
    tau_n_se: np.ndarray
    tau: float
    tau_se: float
    M: int
    bc: str = "wired"
    flags: list = field(default_factory=list)

    @property
    def norm_direction(self):
        return math.hypot(*self.direction)

    def lower(self, z=3.0):
        return self.tau - z * self.tau_se

    def subadditive_ok(self, z=3.0):
        """Each ladder step down in ``tau_n`` (up to ``z`` combined standard errors)."""
        out = []
        for a in range(len(self.ladder) - 1):
            se = math.hypot(self.tau_n_se[a], self.tau_n_se[a + 1])
            out.append(bool(self.tau_n[a + 1] <= self.tau_n[a] + z * se))
        return out

    def doubling_ok(self, z=3.0):
        """``tau_{2n} <= tau_n`` for ladder pairs ``(n, 2n)``."""
        out = {}
        pos = {n: i for i, n in enumerate(self.ladder)}
        for n, i in pos.items():
            if 2 * n in pos:
                j = pos[2 * n]
                se = math.hypot(self.tau_n_se[i], self.tau_n_se[j])
                out[(n, 2 * n)] = bool(self.tau_n[j] <= self.tau_n[i] + z * se)
        return out

    def upper_bound_ok(self, z=3.0):
        """``P_n <= exp(-n tau_lower) + z se`` at every ladder point."""
        tl = max(self.lower(z), 0.0)
        return [bool(p.value <= math.exp(-n * tl) + z * p.stderr) for n, p in zip(self.ladder, self.p_hat)]

    def rows(self):
        d = f"{self.direction[0]},{self.direction[1]}"
        for n, p, t in zip(self.ladder, self.p_hat, self.tau_n):
            yield dict(beta=self.beta, direction=d, n=n, p_hat=p.value, se=p.stderr, tau_n=float(t),
                       tau_extrap=self.tau, tau_se=self.tau_se)


def _tension_from_hits(beta, direction, ladder, hits, M, batches):
    p_hat, tau_n, tau_se = [], [], []
    for col, n in enumerate(ladder):
        est = Estimate.from_series(hits[:, col], batches=batches)
        if est.value == 0.0:
            raise ValueError(f"no connections observed at n={n} for direction {direction}")
        p_hat.append(est)
        tau_n.append(-math.log(est.value) / n)
        tau_se.append(est.stderr / (est.value * n))
    tau_n, tau_se = np.array(tau_n), np.array(tau_se)
    spread = abs(tau_n[-1] - tau_n[-2]) if len(ladder) > 1 else 0.0
    t = DirectionalTension(beta, tuple(direction), tuple(ladder), p_hat, tau_n, tau_se,
                           float(tau_n[-1]), float(math.hypot(tau_se[-1], spread)), M)
    t.flags = [f"ladder rises between n={ladder[i]} and n={ladder[i + 1]}"
               for i, ok in enumerate(t.subadditive_ok()) if not ok]
    return t


def estimate_tensions(beta, ladders, M, samples, seed=0, burn_in=200, batches=20):
    """Tensions for several directions from one SW run.

    ``ladders`` maps integer directions to increasing tuples of ``n``.
    """
    eta, N = _wired_box(M)
    offsets, slots = [], {}
    for d, ladder in ladders.items():
        if list(ladder) != sorted(set(ladder)) or ladder[0] < 1:
            raise ValueError("ladder must be increasing positive integers")
        for n in ladder:
            rots = _rotations((n * d[0], n * d[1]))
            slots[(d, n)] = range(len(offsets), len(offsets) + 4)
            offsets.extend(rots)
    _guard(N, M, offsets)
    targets = [(SOURCE[0] + a, SOURCE[1] + b) for a, b in offsets]
    h = dual_connectivity_samples(eta, beta, SOURCE, targets, samples, seed, burn_in)
    out = {}
    for d, ladder in ladders.items():
        cols = np.column_stack([h[:, list(slots[(d, n)])].mean(axis=1) for n in ladder])
        out[d] = _tension_from_hits(beta, d, ladder, cols, M, batches)
    return out


def estimate_tau(beta, direction, ladder, M, samples, seed=0, burn_in=200, batches=20):
    direction = tuple(int(v) for v in direction)
    return estimate_tensions(beta, {direction: tuple(ladder)}, M, samples, seed, burn_in, batches)[direction]


def supercritical_check(beta):
    if not bond_probability(beta) > bond_probability(BETA_C):
        raise ValueError("dual connectivity decays only above the critical point")


@dataclass
class EquivnormReport:
    ratio: float
    stderr: float
    lower: float
    upper: float
    passed: bool


def _val(t):
    if isinstance(t, DirectionalTension):
        return t.tau, t.tau_se
    if isinstance(t, tuple):
        return float(t[0]), float(t[1])
    return float(t), 0.0


def check_equivnorm(tau_e1, tau_diag, z=3.0):
    """``tau(e1+e2) / (sqrt2 tau(e1))`` inside ``[1/sqrt2, sqrt2]`` up to ``z`` standard errors.

    This is the norm bound ``tau(e1)/sqrt2 <= tau(x)/|x| <= sqrt2 tau(e1)`` at ``x = e1+e2``.
    """
    if tau_e1 is None or tau_diag is None:
        raise ValueError("both directional tensions are needed")
    a, sa = _val(tau_e1)
    d, sd = _val(tau_diag)
    if a <= 0:
        raise ValueError("tau(e1) must be positive")
    r = d / (SQRT2 * a)
    se = r * math.hypot(sa / a, sd / d if d else 0.0)
    lo, hi = 1 / SQRT2, SQRT2
    return EquivnormReport(r, se, lo, hi, bool(lo - z * se <= r <= hi + z * se))


# norms


class NormModel:
    """Positively homogeneous function on the plane with axis and diagonal symmetry.

    Analytic: ``l1``, ``l2``, ``linf``, ``weighted`` (``a linf + b l1``).
    Sampled: gauge of the convex hull of the points ``u / tau(u)`` and their
    eight symmetric images.
    """

    def __init__(self, kind, a=1.0, b=1.0, facets=None, samples=None):
        self.kind = kind
        self.a, self.b = a, b
        self._facets = facets
        self.samples = samples

    @classmethod
    def analytic(cls, kind, a=1.0, b=1.0):
        if kind not in ("l1", "l2", "linf", "weighted"):
            raise ValueError(f"unknown norm {kind!r}")
        return cls(kind, a, b)

    @classmethod
    def from_samples(cls, samples):
        """``samples`` maps directions ``u`` to ``tau(u)`` (positive)."""
        pts = []
        for u, t in samples.items():
            if not t > 0:
                raise ValueError("tensions must be positive")
            u = np.asarray(u, dtype=float) / t
            for sx in (1, -1):
                for sy in (1, -1):
                    pts.append((sx * u[0], sy * u[1]))
                    pts.append((sy * u[1], sx * u[0]))
        hull = ConvexHull(np.array(pts))
        # rows (n1, n2, c) with n.x + c <= 0 inside; c < 0 since 0 is interior
        return cls("sampled", facets=hull.equations.copy(), samples=dict(samples))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        ax, ay = np.abs(x[..., 0]), np.abs(x[..., 1])
        if self.kind == "l1":
            return ax + ay
        if self.kind == "l2":
            return np.hypot(ax, ay)
        if self.kind == "linf":
            return np.maximum(ax, ay)
        if self.kind == "weighted":
            return self.a * np.maximum(ax, ay) + self.b * (ax + ay)
        f = self._facets
        vals = (x[..., None, 0] * f[:, 0] + x[..., None, 1] * f[:, 1]) / (-f[:, 2])
        return np.max(vals, axis=-1)


def _admissible(z, N, k, m):
    return z[1] >= -N - 0.5 and not in_triangle(z, N + 0.5, k + 2 * m + 0.5, 1)


def _check_params(N, k, m):
    if not (0 < k and m > 0 and k + 2 * m < N):
        raise ValueError("need 0 < k < k + 2m < N")


def normprop_excess_at(norm, N, k, m, z, spacing=1.0):
    """Excess ``(min_x tau(z-x) + min_y tau(y-z) - 2k tau(e1)) / m`` at one ``z``."""
    _check_params(N, k, m)
    z = (float(z[0]), float(z[1]))
    if not _admissible(z, N, k, m):
        raise ValueError(f"z={z} lies below the base line or inside the excluded triangle")
    xs, ys = _base_grid(N, k, spacing)
    return float(_excess(norm, N, k, m, np.array([z]), xs, ys)[0])


def _base_grid(N, k, spacing):
    # x on the base line left of -k, y right of k, anchored at -k and k
    xs = -k - spacing * np.arange(int((N + 1 - k) / spacing) + 1)
    ys = -xs
    return xs, ys


def _excess(norm, N, k, m, zs, xs, ys):
    h = -N - 0.5
    t1 = float(norm(np.array([1.0, 0.0])))
    left = np.stack([zs[:, None, 0] - xs[None, :], np.broadcast_to(zs[:, None, 1] - h, (len(zs), len(xs)))], -1)
    right = np.stack([ys[None, :] - zs[:, None, 0], np.broadcast_to(h - zs[:, None, 1], (len(zs), len(ys)))], -1)
    return (norm(left).min(axis=1) + norm(right).min(axis=1) - 2 * k * t1) / m


def normprop_excess(norm, N, k, m, spacing=1.0, return_argmin=False):
    """Minimal excess over the grid of admissible ``z`` in the box ``[-N-1/2, N+1/2]^2``.

    ``z`` runs over dual sites (half-integer offsets) at the given spacing;
    ``x`` and ``y`` over the base line ``x2 = -N-1/2``.  A positive minimum
    certifies ``tau(z-x) + tau(y-z) > 2k tau(e1)`` on the grid.
    """
    _check_params(N, k, m)
    r = N + 0.5
    axis = np.arange(-r, r + 1e-9, spacing)
    gx, gy = np.meshgrid(axis, axis)
    zs = np.column_stack([gx.ravel(), gy.ravel()])
    keep = np.array([_admissible(tuple(z), N, k, m) for z in zs])
    zs = zs[keep]
    xs, ys = _base_grid(N, k, spacing)
    ex = _excess(norm, N, k, m, zs, xs, ys)
    i = int(np.argmin(ex))
    return (float(ex[i]), tuple(zs[i])) if return_argmin else float(ex[i])


# crossover


def crossover_k(N, tau_e1, tau_diag):
    """``k*`` solving ``2 k tau(e1) = (N - k) tau(e1+e2)``."""
    if not (tau_e1 > 0 and tau_diag > 0):
        raise ValueError("tensions must be positive")
    return N * tau_diag / (2 * tau_e1 + tau_diag)


def crossover_k_error(N, tau_e1, se_e1, tau_diag, se_diag):
    """``(k*, se)`` with delta-method error from independent tension errors."""
    k = crossover_k(N, tau_e1, tau_diag)
    den = (2 * tau_e1 + tau_diag) ** 2
    da = -2 * N * tau_diag / den
    dd = 2 * N * tau_e1 / den
    return k, math.hypot(da * se_e1, dd * se_diag)


CSV_COLUMNS = ["beta", "direction", "n", "p_hat", "se", "tau_n", "tau_extrap", "tau_se"]


def write_tension_csv(path, tensions):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for t in tensions:
            for row in t.rows():
                w.writerow(row)
