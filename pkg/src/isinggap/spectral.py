"""Glauber generator on the full state space, exact gaps and variational bounds.

States are integers: bit ``x`` set means site ``x`` is +1.  The generator
``A`` has off-diagonal entries ``A(s, s^x) = c(x, s)``.  Everything spectral is
done on ``S = D^{1/2} (-A) D^{-1/2}``, ``D = diag(mu)``, which is symmetric by
detailed balance; ``sqrt(mu)`` spans its kernel.

Sign convention: the Dirichlet energy is the nonnegative
``E(f) = 1/2 sum mu(s) c(x, s) (f(s^x) - f(s))^2`` and the gap is
``inf E(f) / var(f)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from . import _kernels as K
from .events import BOND_EVENTS, REGISTRY
from .fk import SWChain
from .ising import get_family, gibbs_table, site_tables, state_spins

DENSE_MAX_SITES = 12
MAX_SITES = 24
RESIDUAL_TOL = 1e-8


class GapConvergenceError(RuntimeError):
    def __init__(self, msg, residual):
        super().__init__(f"{msg} (residual {residual:.3e})")
        self.residual = residual


@dataclass(eq=False)
class GeneratorMatrix:
    geometry: object
    eta: object
    beta: float
    family: object
    mu: np.ndarray = field(repr=False)
    site_nbr: np.ndarray = field(repr=False)
    bfield: np.ndarray = field(repr=False)

    @property
    def n(self):
        return self.geometry.n_sites

    @property
    def dim(self):
        return 1 << self.n

    def sparse(self):
        """``A`` as a CSR matrix (at most 20 sites)."""
        if self.n > 20:
            raise ValueError("explicit generator limited to 20 sites; use the matrix-free operator")
        nnz = self.dim * self.n
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz)
        diag = np.empty(self.dim)
        K.generator_coo(self.n, self.site_nbr, self.bfield, float(self.beta), self.family.code,
                        rows, cols, vals, diag)
        ar = np.arange(self.dim)
        return scipy.sparse.csr_matrix(
            (np.concatenate([vals, diag]), (np.concatenate([rows, ar]), np.concatenate([cols, ar]))),
            shape=(self.dim, self.dim),
        )

    def symmetrized(self):
        """Dense ``S``."""
        if self.n > 14:
            raise ValueError("dense symmetrized matrix limited to 14 sites")
        A = self.sparse().toarray()
        r = np.sqrt(self.mu)
        return -(A * r[:, None]) / r[None, :]

    def sym_matvec(self, v):
        out = np.empty(self.dim)
        K.sym_matvec(np.ascontiguousarray(v, dtype=float), out, self.n, self.site_nbr, self.bfield,
                     float(self.beta), self.family.code)
        return out

    def rate_bounds(self):
        """Smallest and largest flip rate actually present."""
        if self.n > 20:
            raise ValueError("rate table limited to 20 sites")
        t = K.rate_table(self.n, self.site_nbr, self.bfield, float(self.beta), self.family.code)
        return float(t.min()), float(t.max())


def build_generator(geometry, eta, beta, family="heat-bath", max_sites=MAX_SITES):
    if eta.geometry is not geometry:
        raise ValueError("boundary condition belongs to another geometry")
    if geometry.n_sites > max_sites:
        raise ValueError(f"{geometry.n_sites} sites: state space 2^{geometry.n_sites} too large")
    mu = gibbs_table(geometry, eta, beta, cap=max_sites)
    site_nbr, bfield = site_tables(eta)
    return GeneratorMatrix(geometry, eta, float(beta), get_family(family), mu,
                           np.ascontiguousarray(site_nbr), bfield)


@dataclass
class GapResult:
    gap: float
    solver: str
    residual: float
    dim: int
    low_eigenvalues: tuple = ()
    eigenvector: np.ndarray = field(default=None, repr=False)

    def record(self, **params):
        """JSON-ready record; pass N, k, eps, beta, family."""
        out = dict(params)
        out.update(gap=self.gap, solver=self.solver, residual=self.residual)
        return out


def exact_gap(gen, solver="auto", dense_max_sites=DENSE_MAX_SITES, maxiter=None):
    """Second-smallest eigenvalue of ``-A``.

    ``dense``: full symmetric eigendecomposition of ``S``.
    ``iterative``: Lanczos (``eigsh``) on the matrix-free ``S + s P``, where
    ``P`` projects on ``sqrt(mu)`` and ``s`` exceeds the spectral radius, so
    the smallest eigenvalue of the shifted operator is the gap.
    The residual ``|S v - gap v|`` is checked against ``1e-8 |v|``.
    """
    if solver == "auto":
        solver = "dense" if gen.n <= dense_max_sites else "iterative"
    if solver == "dense":
        S = gen.symmetrized()
        S = 0.5 * (S + S.T)
        w, V = scipy.linalg.eigh(S, subset_by_index=[0, min(2, gen.dim - 1)])
        if gen.dim < 2:
            raise ValueError("need at least two states")
        v = V[:, 1]
        gap = float(w[1])
        res = float(np.linalg.norm(S @ v - gap * v))
        low = tuple(float(x) for x in w)
    elif solver == "iterative":
        psi = np.sqrt(gen.mu)
        _, c0 = gen.family.bounds(gen.beta)
        shift = 2.0 * gen.n * c0 + 1.0

        def mv(v):
            v = np.ravel(v)
            return gen.sym_matvec(v) + shift * psi * (psi @ v)

        op = scipy.sparse.linalg.LinearOperator((gen.dim, gen.dim), matvec=mv, dtype=float)
        try:
            w, V = scipy.sparse.linalg.eigsh(op, k=1, which="SA", tol=1e-12, ncv=min(gen.dim - 1, 40),
                                             maxiter=maxiter or 20 * gen.dim, v0=_start_vector(gen, psi))
        except scipy.sparse.linalg.ArpackNoConvergence as err:
            if len(err.eigenvalues) == 0:
                raise GapConvergenceError("Lanczos did not converge", float("inf")) from None
            w, V = err.eigenvalues, err.eigenvectors
        v = V[:, 0]
        v = v - psi * (psi @ v)
        v /= np.linalg.norm(v)
        gap = float(v @ gen.sym_matvec(v))
        res = float(np.linalg.norm(gen.sym_matvec(v) - gap * v))
        low = (0.0, gap)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    if res > RESIDUAL_TOL:
        raise GapConvergenceError(f"{solver} solver residual above tolerance", res)
    return GapResult(gap=gap, solver=solver, residual=res, dim=gen.dim, low_eigenvalues=low,
                     eigenvector=v)


def _start_vector(gen, psi):
    # magnetization-like start has overlap with the slow mode
    s = np.arange(gen.dim)
    bits = np.zeros(gen.dim)
    for x in range(gen.n):
        bits += (s >> x) & 1
    v = psi * (bits - gen.n / 2.0)
    if not np.any(v):
        v = np.random.default_rng(0).standard_normal(gen.dim)
    return v


def dirichlet_energy(gen, f):
    f = np.ascontiguousarray(f, dtype=float)
    if f.shape != (gen.dim,):
        raise ValueError("test function must have one value per state")
    return float(K.dirichlet_energy(f, gen.mu, gen.n, gen.site_nbr, gen.bfield, float(gen.beta),
                                    gen.family.code))


def variance(mu, f):
    m = float(mu @ f)
    return float(mu @ (f - m) ** 2)


def rayleigh_bound(gen, f):
    """``E(f) / var(f)``, an upper bound on the gap."""
    f = np.asarray(f, dtype=float)
    var = variance(gen.mu, f)
    if var <= 1e-14 * max(float(gen.mu @ f**2), 1e-300):
        raise ValueError("test function is constant under mu")
    return dirichlet_energy(gen, f) / var


def state_mask(geometry, S):
    """Membership over all states of a predicate on spin arrays (or pass a mask through)."""
    n = geometry.n_sites
    if callable(S):
        spins = state_spins(np.arange(1 << n), n)
        return np.fromiter((bool(S(s)) for s in spins), dtype=bool, count=1 << n)
    mask = np.asarray(S, dtype=bool)
    if mask.shape != (1 << n,):
        raise ValueError("state mask has the wrong length")
    return mask


def event_masses(geometry, eta, beta, S, mu=None):
    """Exact ``(mu(S), mu(inner boundary of S))``."""
    mask = state_mask(geometry, S)
    mu = gibbs_table(geometry, eta, beta) if mu is None else mu
    inner = K.inner_boundary_mask(mask, geometry.n_sites)
    return float(mu[mask].sum()), float(mu[inner].sum())


def indicator_bound(geometry, eta, beta, S, c0=1.0, mu=None):
    """``c0 |Lambda| mu(inner boundary of S) / (mu(S) (1 - mu(S)))`` by enumeration."""
    m, b = event_masses(geometry, eta, beta, S, mu)
    if m <= 0.0 or m >= 1.0:
        raise ValueError(f"degenerate event: mu(S) = {m}")
    return c0 * geometry.n_sites * b / (m * (1.0 - m))


# Monte Carlo estimates


@dataclass
class Estimate:
    """Monte Carlo mean with batch-means standard error.

    ``tau_int`` is the variance inflation ``n se^2 / var`` (1 for independent
    samples).  With no hits (or all hits) ``upper`` holds a one-sided
    ``1 - alpha`` bound on the mean (``lower`` for all hits).
    """

    value: float
    stderr: float
    n_samples: int
    n_batches: int = 0
    tau_int: float = float("nan")
    upper: float = None
    lower: float = None

    def agrees(self, truth, k=3.0):
        """``truth`` within ``k`` standard errors, or below the one-sided bound for zero hits."""
        if self.stderr > 0:
            return abs(self.value - truth) <= k * self.stderr
        if self.upper is not None:
            return truth <= self.upper
        if self.lower is not None:
            return truth >= self.lower
        return self.value == truth

    @property
    def zero_hits(self):
        return self.n_samples > 0 and self.value == 0.0

    @classmethod
    def from_series(cls, x, batches=20, alpha=0.05, tau_hint=1.0):
        x = np.asarray(x, dtype=float)
        if batches < 10:
            raise ValueError("need at least 10 batches")
        if x.size < batches:
            raise ValueError(f"{x.size} samples cannot fill {batches} batches")
        size = x.size // batches
        means = x[: size * batches].reshape(batches, size).mean(axis=1)
        value = float(x.mean())
        se = float(means.std(ddof=1) / math.sqrt(batches))
        var = float(x.var())
        tau = x.size * se * se / var if var > 0 else float("nan")
        est = cls(value, se, int(x.size), batches, tau)
        # a constant series carries no autocorrelation information; the
        # one-sided bound then treats samples as independent (tau_hint scales it)
        n_eff = x.size / max(tau, 1.0) if var > 0 else x.size / tau_hint
        if value == 0.0:
            est.upper = -math.log(alpha) / n_eff
        elif value == 1.0:
            est.lower = 1.0 + math.log(alpha) / n_eff
        return est

    def as_dict(self):
        return asdict(self)


def _event_fn(event):
    if isinstance(event, str):
        if event not in REGISTRY:
            raise ValueError(f"unknown event {event!r}; choose from {sorted(REGISTRY)}")
        return REGISTRY[event], event in BOND_EVENTS
    return event, False


def sample_events(eta, beta, events, sweeps, burn_in=0, thin=1, seed=0, spins=None,
                  record_energy=False):
    """One SW chain evaluating several events after every ``thin`` sweeps.

    ``events`` maps column names to registry names or ``f(sigma, omega, eta)``.
    Bonds (one fresh percolation of the current spins) are drawn only when a
    bond event is requested.  Returns per-evaluation series.
    """
    if burn_in >= sweeps:
        raise ValueError("burn-in must be shorter than the run")
    fns = {name: _event_fn(ev) for name, ev in events.items()}
    needs_bonds = any(b for _, b in fns.values())
    chain = SWChain(eta, beta, seed=seed, spins=spins)
    if burn_in:
        chain.sweep(burn_in)
    n_eval = (sweeps - burn_in) // thin
    series = {"sweep": burn_in + thin * np.arange(1, n_eval + 1)}
    if record_energy:
        series["energy"] = np.empty(n_eval)
        series["magnetization"] = np.empty(n_eval)
    for name in fns:
        series[name] = np.empty(n_eval)
    nbr = eta.geometry.neighbors
    for t in range(n_eval):
        chain.sweep(thin)
        omega = chain.bonds() if needs_bonds else None
        if record_energy:
            series["energy"][t] = K.energy(chain.spins, eta.values, nbr)
            series["magnetization"][t] = chain.spins.sum()
        for name, (fn, _) in fns.items():
            series[name][t] = float(fn(chain.spins, omega, eta))
    return series


def mc_event_probability(eta, beta, event, sweeps, burn_in=0, thin=1, batches=20, seed=0,
                         spins=None):
    """SW batch-means estimate of ``mu(event)``; ``event`` is a registry name or ``f(sigma, omega, eta)``."""
    if batches < 10:
        raise ValueError("need at least 10 batches")
    if (sweeps - burn_in) // thin < batches:
        raise ValueError("fewer evaluations than batches")
    x = sample_events(eta, beta, {"x": event}, sweeps, burn_in, thin, seed, spins)["x"]
    return Estimate.from_series(x, batches=batches)


@dataclass
class BoundEstimate:
    bound_kind: str
    value: float
    stderr: float
    upper: float = None

    def record(self):
        return asdict(self)


def indicator_bound_estimate(n_sites, est_S, est_dS, c0=1.0, cov=0.0):
    """Indicator bound from MC estimates, with delta-method standard error.

    ``cov`` is the covariance of the two estimates (0 if they come from
    independent runs).  With no boundary hits the point value is replaced by
    an upper confidence bound.
    """
    a, b = est_S.value, est_dS.value
    if not 0.0 < a < 1.0:
        raise ValueError(f"degenerate event estimate {a}")
    scale = c0 * n_sites / (a * (1.0 - a))
    if est_dS.zero_hits:
        return BoundEstimate("indicator", None, None, upper=scale * est_dS.upper)
    value = scale * b
    da = -scale * b * (1.0 - 2.0 * a) / (a * (1.0 - a))
    db = scale
    var = da * da * est_S.stderr**2 + db * db * est_dS.stderr**2 + 2 * da * db * cov
    return BoundEstimate("indicator", value, math.sqrt(max(var, 0.0)))


def dumps(records):
    return json.dumps(records, indent=2, default=_jsonable)


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(type(v))
