"""Experiment orchestration: configs, seeded task grids, CSV/JSON sinks.

A config is one YAML document::

    kind: exact-gap-scan        # bound-scan | sw-sample | tension | crossover-demo
    grid: {N: [1], k: [1], eps: [0, -1], beta: [0.6, "1.2*beta_c"]}
    family: heat-bath
    chain: {sweeps: 20000, burn_in: 1000, thin: 1, batches: 20}
    seed: 7
    output: results/gaps       # writes results/gaps.csv and results/gaps.json

Tasks are the grid points in ``N, k, eps, beta`` order; task ``i`` runs with
``derive_seed(seed, i)``.  Infeasible tasks are written with a ``skip_reason``;
failing tasks with an ``error``.  Rows are written in task order.
"""

from __future__ import annotations

import csv
import itertools
import json
import re
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .events import in_D
from .fk import SWChain, write_snapshots
from .geometry import eta as make_eta
from .ising import BETA_C, get_family
from .spectral import (
    Estimate,
    build_generator,
    event_masses,
    exact_gap,
    indicator_bound_estimate,
    rayleigh_bound,
    sample_events,
    state_mask,
)
from .tension import crossover_k_error, estimate_tensions, write_tension_csv

KINDS = ("exact-gap-scan", "bound-scan", "sw-sample", "tension", "crossover-demo")
MASK64 = (1 << 64) - 1
EXACT_MAX_SITES = 16


# seeds


def splitmix64(x):
    """SplitMix64 finaliser (a bijection of 64-bit integers)."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(master, ordinal):
    """``splitmix64(master + ordinal * 0x9E3779B97F4A7C15 mod 2^64)``.

    The multiplier is odd, so distinct ordinals below ``2^64`` give distinct
    seeds for a fixed master seed.
    """
    return splitmix64((int(master) + int(ordinal) * 0x9E3779B97F4A7C15) & MASK64)


def build_id():
    try:
        rev = subprocess.run(["git", "rev-parse", "--short", "HEAD"], capture_output=True, text=True,
                             cwd=Path(__file__).parent, timeout=5)
        sha = rev.stdout.strip() if rev.returncode == 0 else ""
    except (OSError, subprocess.SubprocessError):
        sha = ""
    return f"{__version__}+{sha}" if sha else __version__


# config

_BETA_RE = re.compile(r"^\s*([0-9.eE+-]+)\s*\*\s*beta_c\s*$")


def parse_beta(v):
    """A number, or ``"<f>*beta_c"``."""
    if isinstance(v, (int, float)):
        return float(v)
    m = _BETA_RE.match(str(v))
    if m:
        return float(m.group(1)) * BETA_C
    return float(v)


@dataclass
class ExperimentConfig:
    kind: str
    seed: int
    output: str
    grid: dict = field(default_factory=dict)
    family: str = "heat-bath"
    chain: dict = field(default_factory=dict)
    events: list = field(default_factory=lambda: ["D"])
    start: str = "plus"
    tension: dict = field(default_factory=dict)
    snapshots: int = 0
    series: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; choose from {KINDS}")
        if self.seed is None:
            raise ValueError("a master seed is required")
        self.seed = int(self.seed)
        get_family(self.family)
        if self.start not in ("plus", "minus"):
            raise ValueError("start must be plus or minus")
        need = {"tension": ("beta",), "crossover-demo": ("N", "k", "eps", "beta")}.get(
            self.kind, ("N", "k", "eps", "beta"))
        for key in need:
            vals = self.grid.get(key)
            if not vals:
                raise ValueError(f"grid.{key} must be a nonempty list")
        self.grid = {key: list(v) if isinstance(v, (list, tuple)) else [v] for key, v in self.grid.items()}
        if "beta" in self.grid:
            self.grid["beta"] = [parse_beta(b) for b in self.grid["beta"]]
        c = dict(sweeps=10000, burn_in=1000, thin=1, batches=20)
        c.update(self.chain)
        if c["burn_in"] >= c["sweeps"]:
            raise ValueError("burn_in must be smaller than sweeps")
        if c["batches"] < 10:
            raise ValueError("need at least 10 batches")
        self.chain = c

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config fields {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(yaml.safe_load(fh))

    def tasks(self):
        keys = [k for k in ("N", "k", "eps", "beta") if k in self.grid]
        for i, vals in enumerate(itertools.product(*(self.grid[k] for k in keys))):
            yield i, dict(zip(keys, vals))


# tasks


class Skip(Exception):
    pass


def _box(params):
    N, k, eps = int(params["N"]), int(params["k"]), int(params["eps"])
    if not 1 <= k <= N:
        raise Skip(f"k={k} outside [1, N={N}]")
    return make_eta(N, k, eps)


def _start(cfg, eta):
    n = eta.geometry.n_sites
    return np.full(n, 1 if cfg.start == "plus" else -1, dtype=np.int8)


def task_exact_gap(cfg, params, seed):
    eta = _box(params)
    g = eta.geometry
    if g.n_sites > EXACT_MAX_SITES:
        raise Skip(f"{g.n_sites} sites: 2^{g.n_sites} states exceed the exact limit")
    gen = build_generator(g, eta, params["beta"], cfg.family)
    r = exact_gap(gen)
    return dict(n_sites=g.n_sites, gap=r.gap, solver=r.solver, residual=r.residual)


def task_bound(cfg, params, seed):
    eta = _box(params)
    g = eta.geometry
    beta = params["beta"]
    c0 = get_family(cfg.family).bounds(beta)[1]
    if g.n_sites <= EXACT_MAX_SITES:
        gen = build_generator(g, eta, beta, cfg.family)
        mask = state_mask(g, lambda s: in_D(s, eta))
        mD, mdD = event_masses(g, eta, beta, mask, gen.mu)
        if not 0 < mD < 1:
            raise Skip(f"degenerate event: mu(D) = {mD}")
        bound = c0 * g.n_sites * mdD / (mD * (1 - mD))
        gap = exact_gap(gen).gap
        ray = rayleigh_bound(gen, mask.astype(float))
        return dict(n_sites=g.n_sites, mode="exact", mu_D=mD, mu_D_se=0.0, mu_dD=mdD, mu_dD_se=0.0,
                    ratio=mdD / mD, bound=bound, bound_se=0.0, rayleigh_D=ray, gap=gap,
                    bound_ge_gap=bool(bound >= gap - 1e-8))
    c = cfg.chain
    series = sample_events(eta, beta, {"D": "D", "dD": "dD"}, c["sweeps"], c["burn_in"], c["thin"], seed,
                           spins=_start(cfg, eta))
    eD = Estimate.from_series(series["D"], c["batches"])
    edD = Estimate.from_series(series["dD"], c["batches"])
    if not 0 < eD.value < 1:
        raise Skip(f"degenerate estimate mu(D) = {eD.value}")
    b = indicator_bound_estimate(g.n_sites, eD, edD, c0,
                                 cov=_batch_cov(series["D"], series["dD"], c["batches"]))
    return dict(n_sites=g.n_sites, mode="mc", mu_D=eD.value, mu_D_se=eD.stderr, mu_dD=edD.value,
                mu_dD_se=edD.stderr, ratio=edD.value / eD.value, bound=b.value if b.value is not None else b.upper,
                bound_se=b.stderr if b.stderr is not None else float("nan"), rayleigh_D=float("nan"),
                gap=float("nan"), bound_ge_gap=None)


def _batch_cov(x, y, batches):
    size = len(x) // batches
    mx = np.asarray(x[: size * batches]).reshape(batches, size).mean(1)
    my = np.asarray(y[: size * batches]).reshape(batches, size).mean(1)
    return float(np.cov(mx, my)[0, 1] / batches)


def task_sw(cfg, params, seed, out_prefix=None, ordinal=0):
    eta = _box(params)
    c = cfg.chain
    events = {name: name for name in cfg.events}
    series = sample_events(eta, params["beta"], events, c["sweeps"], c["burn_in"], c["thin"], seed,
                           spins=_start(cfg, eta), record_energy=True)
    row = {"n_samples": len(series["sweep"])}
    for name in cfg.events:
        x = series[name]
        if name == "AN":
            x = (x == 63).astype(float)
            name = "AN_all"
        e = Estimate.from_series(x, c["batches"])
        row[name] = e.value
        row[f"{name}_se"] = e.stderr
        row[f"{name}_tau_int"] = e.tau_int
    if out_prefix is not None and cfg.series:
        from .ising import write_series_csv

        write_series_csv(f"{out_prefix}.series{ordinal}.csv", series)
    if out_prefix is not None and cfg.snapshots:
        chain = SWChain(eta, params["beta"], seed=derive_seed(seed, 1), spins=_start(cfg, eta))
        chain.sweep(c["burn_in"] or 1)
        recs = []
        for _ in range(cfg.snapshots):
            chain.sweep(c["thin"])
            recs.append((chain.spins.copy(), chain.bonds().copy()))
        write_snapshots(f"{out_prefix}.snap{ordinal}.bin", recs, params["N"], params["k"], params["eps"],
                        params["beta"], seed)
    return row


def _tension_setup(cfg):
    t = dict(M=64, samples=100000, burn_in=200, batches=20,
             ladders={"1,0": [4, 8, 12, 16], "1,1": [3, 6, 9, 12]})
    t.update(cfg.tension)
    ladders = {tuple(int(v) for v in str(d).split(",")): tuple(n) for d, n in t["ladders"].items()}
    return t, ladders


def task_tension(cfg, params, seed):
    t, ladders = _tension_setup(cfg)
    res = estimate_tensions(params["beta"], ladders, t["M"], t["samples"], seed, t["burn_in"], t["batches"])
    return res


# runner


@dataclass
class RunSummary:
    rows: list
    n_errors: int
    n_skipped: int
    paths: list
    extra: dict = field(default_factory=dict)


def _write(prefix, rows, extra=None):
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    cols = []
    for r in rows:
        for key in r:
            if key not in cols:
                cols.append(key)
    csv_path = prefix.with_name(prefix.name + ".csv")
    with open(csv_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in rows:
            w.writerow({key: _cell(r.get(key)) for key in cols})
    json_path = prefix.with_name(prefix.name + ".json")
    with open(json_path, "w") as fh:
        json.dump({"rows": rows, **(extra or {})}, fh, indent=2, default=_jsonable)
    return [str(csv_path), str(json_path)]


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(type(v))


def _run_grid(cfg, fn, **kw):
    rows, errors, skips = [], 0, 0
    build = build_id()
    for i, params in cfg.tasks():
        seed = derive_seed(cfg.seed, i)
        row = dict(task=i, **params, family=cfg.family, seed=seed)
        try:
            row.update(fn(cfg, params, seed, **kw) if kw else fn(cfg, params, seed))
            row["skip_reason"] = ""
        except Skip as s:
            row["skip_reason"] = str(s)
            skips += 1
        except Exception as exc:  # noqa: BLE001 - recorded per task, reflected in the exit code
            row["skip_reason"] = ""
            row["error"] = f"{type(exc).__name__}: {exc}"
            errors += 1
        row["build"] = build
        rows.append(row)
    return rows, errors, skips


def run_experiment(cfg):
    if cfg.kind == "exact-gap-scan":
        rows, err, skip = _run_grid(cfg, task_exact_gap)
        return RunSummary(rows, err, skip, _write(cfg.output, rows))
    if cfg.kind == "bound-scan":
        rows, err, skip = _run_grid(cfg, task_bound)
        return RunSummary(rows, err, skip, _write(cfg.output, rows))
    if cfg.kind == "sw-sample":
        rows, err, skip = [], 0, 0
        build = build_id()
        for i, params in cfg.tasks():
            seed = derive_seed(cfg.seed, i)
            row = dict(task=i, **params, seed=seed)
            try:
                row.update(task_sw(cfg, params, seed, out_prefix=cfg.output, ordinal=i))
                row["skip_reason"] = ""
            except Skip as s:
                row["skip_reason"] = str(s)
                skip += 1
            except Exception as exc:  # noqa: BLE001
                row["skip_reason"] = ""
                row["error"] = f"{type(exc).__name__}: {exc}"
                err += 1
            row["build"] = build
            rows.append(row)
        return RunSummary(rows, err, skip, _write(cfg.output, rows))
    if cfg.kind == "tension":
        return _run_tension(cfg)
    return run_crossover(cfg)


def _run_tension(cfg):
    rows, records, err = [], [], 0
    tensions = []
    for i, beta in enumerate(cfg.grid["beta"]):
        seed = derive_seed(cfg.seed, i)
        try:
            res = task_tension(cfg, {"beta": beta}, seed)
        except Exception as exc:  # noqa: BLE001
            err += 1
            records.append(dict(task=i, beta=beta, seed=seed, error=f"{type(exc).__name__}: {exc}"))
            continue
        for t in res.values():
            tensions.append(t)
            rows.extend(t.rows())
            records.append(dict(task=i, beta=beta, seed=seed, direction=list(t.direction), tau=t.tau,
                                tau_se=t.tau_se, flags=t.flags, subadditive_ok=t.subadditive_ok(),
                                upper_bound_ok=t.upper_bound_ok()))
    prefix = Path(cfg.output)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    csv_path = prefix.with_name(prefix.name + ".csv")
    write_tension_csv(csv_path, tensions)
    json_path = prefix.with_name(prefix.name + ".json")
    with open(json_path, "w") as fh:
        json.dump({"rows": rows, "tensions": records, "build": build_id()}, fh, indent=2, default=_jsonable)
    return RunSummary(rows, err, 0, [str(csv_path), str(json_path)], {"tensions": tensions})


def crossover_report(ks, values, k_star, window=4.0):
    """Shape checks for the ``k -> mu(D)`` curve: monotone trends and the crossing of 1/2."""
    v = np.asarray(values, dtype=float)
    ks = np.asarray(ks, dtype=float)
    nondec = bool(np.all(np.diff(v) >= 0))
    noninc = bool(np.all(np.diff(v) <= 0))
    cross = None
    for a in range(len(v) - 1):
        if (v[a] - 0.5) * (v[a + 1] - 0.5) <= 0 and v[a] != v[a + 1]:
            cross = float(ks[a] + (0.5 - v[a]) * (ks[a + 1] - ks[a]) / (v[a + 1] - v[a]))
            break
    in_window = cross is not None and abs(cross - k_star) <= window
    return dict(nondecreasing=nondec, nonincreasing=noninc, k_cross=cross, k_star=k_star,
                within_window=bool(in_window), flagged=not (nondec and in_window))


def run_crossover(cfg, tensions=None):
    """``k -> mu(D)`` at fixed ``N, eps, beta`` next to ``k*`` from estimated tensions.

    ``tensions`` may carry precomputed ``{(1,0): DirectionalTension, (1,1): ...}``.
    """
    N = int(cfg.grid["N"][0])
    beta = cfg.grid["beta"][0]
    eps = int(cfg.grid["eps"][0])
    if tensions is None:
        t, ladders = _tension_setup(cfg)
        tensions = estimate_tensions(beta, ladders, t["M"], t["samples"], derive_seed(cfg.seed, 10**6),
                                     t["burn_in"], t["batches"])
    a, d = tensions[(1, 0)], tensions[(1, 1)]
    k_star, k_se = crossover_k_error(N, a.tau, a.tau_se, d.tau, d.tau_se)
    rows, err, skip = _run_grid(cfg, task_sw)
    vals = []
    for r in rows:
        r.update(k_star=k_star, k_star_se=k_se, tau_e1=a.tau, tau_diag=d.tau)
        if r.get("D") is not None:
            vals.append((r["k"], r["D"]))
    ks, vs = zip(*vals) if vals else ((), ())
    report = crossover_report(ks, vs, k_star)
    report.update(N=N, beta=beta, eps=eps, k_star_se=k_se)
    paths = _write(cfg.output, rows, {"report": report, "build": build_id()})
    return RunSummary(rows, err, skip, paths, {"report": report, "tensions": tensions})


def summarize(summary):
    lines = [f"{len(summary.rows)} rows, {summary.n_skipped} skipped, {summary.n_errors} errors"]
    lines += [f"  wrote {p}" for p in summary.paths]
    if "report" in summary.extra:
        lines.append("  " + json.dumps(summary.extra["report"], default=_jsonable))
    return "\n".join(lines)
