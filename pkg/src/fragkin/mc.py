"""Stochastic branching-process oracle for the fragmentation equation.

Each fragment of size r decays at rate mu*r.  A decay replaces the parent by
K ~ Poisson(p(1)/p(4)) splinters of sizes r*X with X iid of density
P(x)/p(1) = (alpha+1) x**alpha.  Splinter placements then form a Poisson
process on (0, r) with intensity P(rho/r)/(mu r) per decay, so the mean
number density obeys the kinetic equation exactly.  Volume is conserved per
decay only in expectation.

Two exact samplers are provided:

* ``direct``: Gillespie's direct method, one event at a time, with
  size-biased parent selection.
* ``batched``: every fragment draws its own exponential lifetime at birth and
  all decays due before the next sample time are processed as a vectorised
  generation.  Fragments never interact, so this has the same law as the
  direct method while running orders of magnitude faster.

Populations are kept below ``cap`` by independent halving with weight
doubling, which leaves every linear observable unbiased.
"""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError
from .kernel import Kernel, PowerLaw, mu_coeff, splinter_mean_count

__all__ = [
    "Population",
    "McConfig",
    "ReplicaResult",
    "McResult",
    "sample_daughter_fraction",
    "sample_decay_products",
    "decay_event",
    "halve",
    "gillespie_run",
    "run_replica",
    "merge_replicas",
]

logger = logging.getLogger(__name__)


def _require_power_law(kernel: Kernel) -> PowerLaw:
    if not isinstance(kernel, PowerLaw):
        raise ConfigError("Monte Carlo sampling supports power-law kernels only")
    return kernel


def sample_daughter_fraction(alpha: float, u):
    """Inverse-CDF draw from the splinter-fraction density (alpha+1) x**alpha."""
    return np.power(u, 1.0 / (alpha + 1.0))


def sample_decay_products(parents: np.ndarray, kernel: Kernel, rng: np.random.Generator):
    """Draw splinters for each parent size.

    Returns ``(owner, sizes)``: ``owner[k]`` indexes the parent of splinter ``k``.
    """
    kernel = _require_power_law(kernel)
    parents = np.asarray(parents, dtype=float)
    counts = rng.poisson(splinter_mean_count(kernel), size=parents.size)
    owner = np.repeat(np.arange(parents.size), counts)
    fractions = sample_daughter_fraction(kernel.alpha, rng.random(owner.size))
    return owner, parents[owner] * fractions


@dataclass
class Population:
    """Weighted multiset of fragment sizes."""

    sizes: np.ndarray
    weight: float = 1.0
    t: float = 0.0
    rng: np.random.Generator = field(default_factory=np.random.default_rng)
    frozen_volume: float = 0.0
    r_floor: float = 0.0
    _prefix: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.sizes = np.asarray(self.sizes, dtype=float)
        if np.any(self.sizes <= 0.0):
            raise ConfigError("fragment sizes must be > 0")
        if self.weight < 1.0:
            raise ConfigError("statistical weight must be >= 1")

    def __len__(self) -> int:
        return self.sizes.size

    @property
    def prefix(self) -> np.ndarray:
        if self._prefix is None:
            self._prefix = np.cumsum(self.sizes)
        return self._prefix

    def set_sizes(self, sizes: np.ndarray) -> None:
        self.sizes = sizes
        self._prefix = None

    def weighted_moment(self, power: float) -> float:
        return self.weight * float(np.sum(self.sizes**power))


def _retire_small(pop: Population, sizes: np.ndarray) -> np.ndarray:
    if pop.r_floor <= 0.0:
        return sizes
    small = sizes < pop.r_floor
    if small.any():
        pop.frozen_volume += pop.weight * float(np.sum(sizes[small] ** 3))
        sizes = sizes[~small]
    return sizes


def decay_event(population: Population, kernel: Kernel) -> Population:
    """Decay one fragment chosen with probability proportional to its size."""
    if len(population) == 0:
        warnings.warn("decay_event on an empty population", RuntimeWarning, stacklevel=2)
        return population
    rng = population.rng
    prefix = population.prefix
    u = rng.random() * prefix[-1]
    idx = min(int(np.searchsorted(prefix, u, side="right")), len(population) - 1)
    parent = population.sizes[idx : idx + 1]
    _, daughters = sample_decay_products(parent, kernel, rng)
    daughters = _retire_small(population, daughters)
    population.set_sizes(np.concatenate((np.delete(population.sizes, idx), daughters)))
    return population


def halve(population: Population, *extra: np.ndarray):
    """Keep each fragment with probability 1/2 and double the weight.

    ``extra`` arrays aligned with ``sizes`` are thinned alongside.
    """
    keep = population.rng.random(len(population)) < 0.5
    population.set_sizes(population.sizes[keep])
    population.weight *= 2.0
    return tuple(a[keep] for a in extra)


# --- configuration and results ------------------------------------------------


@dataclass
class McConfig:
    kernel: Kernel
    initial_sizes: Sequence[float]
    t_end: float
    sample_times: Optional[Sequence[float]] = None
    cap: int = 1_000_000
    r_floor: float = 1e-6
    replicas: int = 1
    seed: int = 0
    method: str = "batched"
    hist_edges: Optional[Sequence[float]] = None
    workers: int = 1

    def __post_init__(self):
        _require_power_law(self.kernel)
        self.initial_sizes = np.asarray(self.initial_sizes, dtype=float)
        if self.initial_sizes.size == 0 or np.any(self.initial_sizes <= 0.0):
            raise ConfigError("initial population needs at least one fragment of size > 0")
        if not self.t_end >= 0.0:
            raise ConfigError(f"t_end must be >= 0, got {self.t_end}")
        if self.cap < 100:
            raise ConfigError(f"population cap must be >= 100, got {self.cap}")
        if not self.r_floor > 0.0:
            raise ConfigError(f"size floor must be > 0, got {self.r_floor}")
        if self.replicas < 1 or self.workers < 1:
            raise ConfigError("replicas and workers must be >= 1")
        if self.method not in ("batched", "direct"):
            raise ConfigError(f"unknown Monte Carlo method {self.method!r}")
        if self.sample_times is None:
            self.sample_times = sorted({0.0, float(self.t_end)})
        times = np.asarray(self.sample_times, dtype=float)
        if np.any(np.diff(times) <= 0) or times[0] < 0 or times[-1] > self.t_end:
            raise ConfigError("sample times must be increasing and within [0, t_end]")
        self.sample_times = times
        if self.hist_edges is None:
            top = float(self.initial_sizes.max()) * (1.0 + 1e-9)
            self.hist_edges = np.geomspace(self.r_floor, top, 61)
        self.hist_edges = np.asarray(self.hist_edges, dtype=float)
        if self.hist_edges.size < 2 or np.any(np.diff(self.hist_edges) <= 0):
            raise ConfigError("histogram edges must be increasing")


@dataclass
class ReplicaResult:
    index: int
    t: np.ndarray
    N: np.ndarray
    S: np.ndarray
    V: np.ndarray
    frozen: np.ndarray
    hist: np.ndarray
    extinct_at: Optional[float] = None
    events: int = 0
    final_weight: float = 1.0


def _record(res: dict, pop: Population, tau: float, edges: np.ndarray) -> None:
    sizes = pop.sizes
    res["t"].append(tau)
    res["N"].append(pop.weight * sizes.size)
    res["S"].append(pop.weight * math.fsum(sizes**2))
    res["V"].append(pop.weight * math.fsum(sizes**3))
    res["frozen"].append(pop.frozen_volume)
    res["hist"].append(pop.weight * np.histogram(sizes, bins=edges)[0].astype(float))


def _finish(index: int, res: dict, n_bins: int, extinct_at, events: int, weight: float) -> ReplicaResult:
    hist = np.array(res["hist"]).reshape(-1, n_bins)
    return ReplicaResult(
        index=index,
        t=np.array(res["t"], dtype=float),
        N=np.array(res["N"], dtype=float),
        S=np.array(res["S"], dtype=float),
        V=np.array(res["V"], dtype=float),
        frozen=np.array(res["frozen"], dtype=float),
        hist=hist,
        extinct_at=extinct_at,
        events=events,
        final_weight=weight,
    )


def _replica_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def _run_direct(config: McConfig, pop: Population) -> tuple:
    kernel = config.kernel
    mu = mu_coeff(kernel)
    edges = config.hist_edges
    res = {k: [] for k in ("t", "N", "S", "V", "frozen", "hist")}
    samples = list(config.sample_times)
    k = 0
    events = 0
    extinct_at = None
    while k < len(samples):
        total = mu * float(pop.prefix[-1]) if len(pop) else 0.0
        t_next = pop.t + pop.rng.exponential(1.0 / total) if total > 0.0 else math.inf
        while k < len(samples) and samples[k] < t_next:
            _record(res, pop, samples[k], edges)
            k += 1
        if k == len(samples):
            break
        pop.t = t_next
        decay_event(pop, kernel)
        events += 1
        while len(pop) > config.cap:
            halve(pop)
        if len(pop) == 0:
            extinct_at = pop.t
            break
    return res, extinct_at, events


def _run_batched(config: McConfig, pop: Population) -> tuple:
    kernel = config.kernel
    mu = mu_coeff(kernel)
    edges = config.hist_edges
    rng = pop.rng
    res = {k: [] for k in ("t", "N", "S", "V", "frozen", "hist")}

    def lifetimes(sizes):
        with np.errstate(divide="ignore"):
            return rng.standard_exponential(sizes.size) / (mu * sizes)

    due_at = pop.t + lifetimes(pop.sizes)
    events = 0
    extinct_at = None
    for horizon in config.sample_times:
        while True:
            due = due_at <= horizon
            if not due.any():
                break
            parents, born = pop.sizes[due], due_at[due]
            keep_sizes, keep_due = pop.sizes[~due], due_at[~due]
            events += parents.size
            owner, daughters = sample_decay_products(parents, kernel, rng)
            born = born[owner]
            if pop.r_floor > 0.0:
                small = daughters < pop.r_floor
                if small.any():
                    pop.frozen_volume += pop.weight * math.fsum(daughters[small] ** 3)
                    daughters, born = daughters[~small], born[~small]
            pop.set_sizes(np.concatenate((keep_sizes, daughters)))
            due_at = np.concatenate((keep_due, born + lifetimes(daughters)))
            while len(pop) > config.cap:
                (due_at,) = halve(pop, due_at)
        pop.t = float(horizon)
        _record(res, pop, float(horizon), edges)
        if len(pop) == 0:
            extinct_at = float(horizon)
            break
    return res, extinct_at, events


def run_replica(config: McConfig, index: int) -> ReplicaResult:
    """Simulate one independent replica with its own seeded random stream."""
    pop = Population(
        sizes=np.array(config.initial_sizes, dtype=float),
        rng=_replica_rng(config.seed, index),
        r_floor=config.r_floor,
    )
    while len(pop) > config.cap:
        halve(pop)
    runner = _run_batched if config.method == "batched" else _run_direct
    res, extinct_at, events = runner(config, pop)
    if extinct_at is not None:
        logger.info("replica %d went extinct at t=%g", index, extinct_at)
    return _finish(index, res, len(config.hist_edges) - 1, extinct_at, events, pop.weight)


@dataclass
class McResult:
    """Replica-summed time series; ``replicas`` keeps the per-replica data."""

    t: np.ndarray
    N: np.ndarray
    S: np.ndarray
    V: np.ndarray
    frozen: np.ndarray
    hist: np.ndarray
    hist_edges: np.ndarray
    replicas: list
    truncated: bool

    def standard_error(self, name: str) -> np.ndarray:
        """Standard error of the replica sum of ``name`` ("N", "S", "V", "total_volume")."""
        per = np.array([_padded(r, len(self.t))[name] for r in self.replicas])
        if per.shape[0] < 2:
            return np.full(len(self.t), np.nan)
        return np.sqrt(per.shape[0]) * per.std(axis=0, ddof=1)


def _padded(rep: ReplicaResult, n: int) -> dict:
    """Extend an extinct replica's series: no fragments, frozen volume held."""
    k = len(rep.t)
    out = {}
    for name in ("N", "S", "V"):
        out[name] = np.concatenate((getattr(rep, name), np.zeros(n - k)))
    last = rep.frozen[-1] if k else 0.0
    out["frozen"] = np.concatenate((rep.frozen, np.full(n - k, last)))
    out["hist"] = np.concatenate((rep.hist, np.zeros((n - k, rep.hist.shape[1]))))
    out["total_volume"] = out["V"] + out["frozen"]
    return out


def _fsum_columns(stack: np.ndarray) -> np.ndarray:
    # exactly rounded sums, so merge order cannot change the result
    flat = stack.reshape(stack.shape[0], -1)
    sums = np.array([math.fsum(flat[:, j]) for j in range(flat.shape[1])])
    return sums.reshape(stack.shape[1:])


def merge_replicas(results: Sequence[ReplicaResult], times: np.ndarray, edges: np.ndarray) -> McResult:
    """Sum replica series; the result does not depend on the order of ``results``."""
    results = sorted(results, key=lambda r: r.index)
    n = len(times)
    padded = [_padded(r, n) for r in results]
    merged = {
        name: _fsum_columns(np.array([p[name] for p in padded]))
        for name in ("N", "S", "V", "frozen", "hist")
    }
    return McResult(
        t=np.asarray(times, dtype=float),
        N=merged["N"],
        S=merged["S"],
        V=merged["V"],
        frozen=merged["frozen"],
        hist=merged["hist"],
        hist_edges=np.asarray(edges, dtype=float),
        replicas=list(results),
        truncated=any(r.extinct_at is not None for r in results),
    )


def _replica_task(args):
    config, index = args
    return run_replica(config, index)


def gillespie_run(config: McConfig) -> McResult:
    """Run all replicas (optionally in worker processes) and merge them."""
    tasks = [(config, i) for i in range(config.replicas)]
    if config.workers > 1 and config.replicas > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_replica_task, tasks))
    else:
        results = [_replica_task(task) for task in tasks]
    return merge_replicas(results, config.sample_times, config.hist_edges)
