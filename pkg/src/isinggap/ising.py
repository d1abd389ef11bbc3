"""Ising Hamiltonian, exact Gibbs tables and single-spin-flip dynamics.

Spin configurations are ``int8`` arrays of ``+1/-1`` indexed by site ordinal.
The Gibbs measure is ``exp(-beta H) / Z`` with unit coupling

    H(sigma) = - sum_{<xy> in box} sigma_x sigma_y - sum_{x in box, y on boundary} sigma_x eta_y.

With this normalisation the Edwards-Sokal bond density is ``1 - exp(-2 beta)``
and the critical point is ``beta_c = log(1 + sqrt 2) / 2``; see
:func:`bond_probability`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .geometry import BoundarySpec

SQRT2 = math.sqrt(2.0)
P_C = SQRT2 / (1.0 + SQRT2)
BETA_C = 0.5 * math.log(1.0 + SQRT2)

ENUMERATION_CAP = 20


def bond_probability(beta):
    """Edwards-Sokal bond density for unit coupling: ``p = 1 - exp(-2 beta)``."""
    return -math.expm1(-2.0 * beta)


def beta_from_p(p):
    return -0.5 * math.log1p(-p)


@dataclass(frozen=True)
class ModelParams:
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    @property
    def p(self):
        return bond_probability(self.beta)

    @property
    def supercritical(self):
        return self.beta > BETA_C


@dataclass(frozen=True)
class RateFamily:
    name: str
    code: int

    def rate(self, dh, beta):
        return float(K.flip_rate_from_dh(float(dh), float(beta), self.code))

    def bounds(self, beta, max_dh=8):
        """``(c0', c0)``: extreme rates over energy changes in ``[-max_dh, max_dh]``."""
        return self.rate(max_dh, beta), self.rate(-max_dh, beta)


FAMILIES = {
    "heat-bath": RateFamily("heat-bath", K.HEAT_BATH),
    "metropolis": RateFamily("metropolis", K.METROPOLIS),
}


def get_family(family):
    if isinstance(family, RateFamily):
        return family
    try:
        return FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown rate family {family!r}; choose from {sorted(FAMILIES)}") from None


def _spins(eta, sigma):
    sigma = np.asarray(sigma, dtype=np.int8)
    if sigma.shape != (eta.geometry.n_sites,):
        raise ValueError(
            f"configuration has shape {sigma.shape}, box has {eta.geometry.n_sites} sites"
        )
    return sigma


def site_tables(eta: BoundarySpec):
    """Box-only neighbour table and the boundary field ``sum_{y on boundary} eta_y`` per site."""
    g = eta.geometry
    nbr = g.neighbors[: g.n_sites]
    site_nbr = np.where(nbr < g.n_sites, nbr, -1)
    bfield = np.zeros(g.n_sites, dtype=np.int64)
    for x in range(g.n_sites):
        for j in nbr[x]:
            if j >= g.n_sites:
                bfield[x] += eta.values[j - g.n_sites]
    return site_nbr, bfield


def energy(sigma, eta):
    sigma = _spins(eta, sigma)
    return int(K.energy(sigma, eta.values, eta.geometry.neighbors))


def _site(geometry, x):
    if isinstance(x, (tuple, list)):
        return geometry.site_index[tuple(x)]
    return int(x)


def energy_change(x, sigma, eta):
    """``H(sigma^x) - H(sigma)``."""
    sigma = _spins(eta, sigma)
    x = _site(eta.geometry, x)
    return 2 * int(sigma[x]) * int(K.local_field(sigma, eta.values, eta.geometry.neighbors, x))


def flip_rate(x, sigma, eta, beta, family="heat-bath"):
    """Rate of flipping site ``x`` in ``sigma``.

    heat-bath: ``1 / (1 + exp(beta dH))``; metropolis: ``min(1, exp(-beta dH))``.
    """
    return get_family(family).rate(energy_change(x, sigma, eta), beta)


def up_rate(x, sigma, eta, beta, family="heat-bath"):
    """Rate at which site ``x`` becomes +1 (zero if it already is)."""
    sigma = _spins(eta, sigma)
    x = _site(eta.geometry, x)
    if sigma[x] > 0:
        return 0.0
    return flip_rate(x, sigma, eta, beta, family)


def state_spins(states, n):
    """Unpack state indices into a ``(len(states), n)`` spin array."""
    states = np.atleast_1d(np.asarray(states, dtype=np.int64))
    bits = (states[:, None] >> np.arange(n)) & 1
    return (2 * bits - 1).astype(np.int8)


def state_index(sigma):
    return int(K.pack_spins(np.asarray(sigma, dtype=np.int8)))


def all_energies(eta):
    g = eta.geometry
    site_nbr, bfield = site_tables(eta)
    return K.all_energies(g.n_sites, site_nbr, bfield)


def gibbs_table(geometry, eta, beta, cap=ENUMERATION_CAP):
    """Exact Gibbs probabilities of all ``2^n`` states, bit-packed in site order."""
    if eta.geometry is not geometry:
        raise ValueError("boundary condition belongs to another geometry")
    if geometry.n_sites > cap:
        raise ValueError(f"{geometry.n_sites} sites exceed the enumeration cap of {cap}")
    logw = -beta * all_energies(eta)
    logw -= logw.max()
    w = np.exp(logw)
    return w / w.sum()


@dataclass
class ChainState:
    spins: np.ndarray
    sweeps: int
    rng: np.random.Generator = field(repr=False)
    series: dict = field(default_factory=dict, repr=False)


def run_chain(geometry, eta, beta, family="heat-bath", seed=0, sweeps=1, observables=None,
              spins=None, rng=None):
    """Random-scan Glauber chain, ``sweeps`` sweeps of ``n`` single-site proposals.

    The discrete chain ``P`` satisfies ``A = n (P - I)`` for the generator
    ``A`` with the same rates, so a sweep is one unit of continuous time.

    ``observables`` maps names to functions of the spin array; they are
    evaluated after every sweep next to energy and magnetization.
    Starts from all plus unless ``spins`` is given.
    """
    if sweeps < 1:
        raise ValueError("need at least one sweep")
    if eta.geometry is not geometry:
        raise ValueError("boundary condition belongs to another geometry")
    fam = get_family(family)
    rng = rng if rng is not None else np.random.default_rng(seed)
    sigma = np.ones(geometry.n_sites, dtype=np.int8) if spins is None else _spins(eta, spins).copy()
    energies = np.empty(sweeps)
    mags = np.empty(sweeps)
    series = {"sweep": np.arange(1, sweeps + 1)}
    nbr = geometry.neighbors
    if not observables:
        K.glauber_sweeps(sigma, eta.values, nbr, float(beta), fam.code, sweeps, rng, energies, mags)
    else:
        values = {name: np.empty(sweeps) for name in observables}
        for s in range(sweeps):
            K.glauber_sweeps(sigma, eta.values, nbr, float(beta), fam.code, 1, rng,
                             energies[s:s + 1], mags[s:s + 1])
            for name, fn in observables.items():
                values[name][s] = fn(sigma)
        series.update(values)
    series["energy"] = energies
    series["magnetization"] = mags
    return ChainState(spins=sigma, sweeps=sweeps, rng=rng, series=series)


def glauber_state_samples(geometry, eta, beta, sweeps, seed=0, family="heat-bath", spins=None):
    """Packed state after each sweep; for small boxes compared against :func:`gibbs_table`."""
    if geometry.n_sites > 62:
        raise ValueError("state packing needs at most 62 sites")
    rng = np.random.default_rng(seed)
    sigma = np.ones(geometry.n_sites, dtype=np.int8) if spins is None else _spins(eta, spins).copy()
    out = np.empty(sweeps, dtype=np.int64)
    K.glauber_states(sigma, eta.values, geometry.neighbors, float(beta),
                     get_family(family).code, sweeps, rng, out)
    return out


def write_series_csv(path, series):
    """Write per-sweep observables: ``sweep, energy, magnetization`` then any events."""
    head = ["sweep", "energy", "magnetization"]
    cols = head + [k for k in series if k not in head]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in zip(*(series[c] for c in cols)):
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)
