"""Classical reduction of the dynamics and its kinetic Monte Carlo engine.

The dissipative generator preserves the commutative algebra of
occupation observables; restricted there it is (minus) the generator of
a continuous-time Markov jump process on occupation configurations
``eta`` over the realized sites, with transition rates read directly
off the jump catalogue:

    hop x -> y   at  Gamma_{x->y} eta_x (1 - eta_y),
    exit x       at  Gamma_{x->star} eta_x,
    entry x      at  Gamma_{star->x} (1 - eta_x).

:func:`classical_generator` compiles those tables;
:func:`master_matrix` expands them into the full rate matrix over the
2^n configurations (bit ``k`` of the configuration index is the
occupancy of site rank ``k``, matching the Fock-space convention, so
the reduction identity against the quantum generator is a direct
diagonal comparison). :func:`brute_force_stationary` extracts the
stationary distribution by a dense null-space computation and compares
it with the product Fermi-Dirac weights; without reservoir exchange
the null space splits into particle-number sectors and is reported as
non-unique rather than hidden.

:func:`gillespie_run` simulates the chain exactly: per-site aggregate
rates live in a binary indexed (Fenwick) partial-sum tree, event
selection costs ``O(log n)`` plus a scan of the chosen site's hop
channels, and after each event only the affected neighborhood is
updated (with a full rebuild every 65536 events to arrest float
drift). The compiled kernel releases the GIL, so independent replicas
run on threads (:func:`run_replicas`). Trajectories carry per-site
time-weighted occupancies in event-count batches (for batch-means
error bars), hop-distance and energy-exchange histograms, and an
optional exact event log.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numba import njit
from scipy.special import expit

from .errors import ConfigurationError, SizeError
from .jumps import JumpCatalogue
from .model import DisorderRealization

__all__ = [
    "BRUTE_FORCE_SITE_LIMIT",
    "Configuration",
    "ClassicalGenerator",
    "KmcTrajectory",
    "StationaryReport",
    "classical_generator",
    "empty_configuration",
    "equilibrium_configuration",
    "master_matrix",
    "brute_force_stationary",
    "gillespie_run",
    "run_replicas",
    "hop_statistics",
    "occupancy_report",
]

BRUTE_FORCE_SITE_LIMIT = 12
_REBUILD_EVERY = 65536

_KIND_HOP = 0
_KIND_OUT = 1
_KIND_IN = 2
_KIND_NAMES = ("hop", "out", "in")


# -- configurations ---------------------------------------------------------------


@dataclass(frozen=True)
class Configuration:
    """Occupation bits over the realized sites, in canonical site order."""

    sites: tuple[tuple[int, ...], ...]
    eta: np.ndarray

    def __post_init__(self) -> None:
        eta = np.ascontiguousarray(self.eta, dtype=np.uint8)
        if eta.shape != (len(self.sites),):
            raise ConfigurationError("eta must have one bit per site")
        if eta.size and eta.max() > 1:
            raise ConfigurationError("eta entries must be 0 or 1")
        eta.flags.writeable = False
        object.__setattr__(self, "eta", eta)

    @property
    def n(self) -> int:
        return len(self.sites)

    @property
    def filling(self) -> float:
        return float(self.eta.mean()) if self.n else 0.0

    def index(self) -> int:
        """Configuration as a bitmask integer (bit k = site rank k)."""
        if self.n > 62:
            raise SizeError("bitmask indices are limited to 62 sites")
        return int(np.dot(self.eta.astype(np.int64), 1 << np.arange(self.n)))


def _site_tuple(omega: DisorderRealization) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple(int(c) for c in s) for s in omega.occupied_sites())


def empty_configuration(omega: DisorderRealization) -> Configuration:
    sites = _site_tuple(omega)
    return Configuration(sites, np.zeros(len(sites), dtype=np.uint8))


def equilibrium_configuration(omega: DisorderRealization, seed) -> Configuration:
    """Sample a configuration from the product Fermi-Dirac weights."""
    sites = _site_tuple(omega)
    params = omega.params
    emap = omega.energy_map()
    p = np.array([expit(-params.beta * (emap[s] - params.mu)) for s in sites])
    rng = np.random.default_rng(seed)
    eta = (rng.random(len(sites)) < p).astype(np.uint8)
    return Configuration(sites, eta)


# -- compiled rate tables -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ClassicalGenerator:
    """Compiled transition tables of the classical reduction.

    Hop channels are stored source-major (CSR over site ranks) with a
    mirrored target-major index used for incremental rate updates; all
    rates are nonnegative by construction.
    """

    omega: DisorderRealization
    catalogue: JumpCatalogue
    sites: tuple[tuple[int, ...], ...]
    out_rate: np.ndarray
    in_rate: np.ndarray
    hop_ptr: np.ndarray
    hop_target: np.ndarray
    hop_rate: np.ndarray
    hop_distance: np.ndarray
    hop_denergy: np.ndarray
    rev_ptr: np.ndarray
    rev_source: np.ndarray
    rev_rate: np.ndarray

    @property
    def n(self) -> int:
        return len(self.sites)

    @property
    def n_hop_channels(self) -> int:
        return int(self.hop_rate.size)

    def fermi_occupations(self) -> np.ndarray:
        params = self.omega.params
        emap = self.omega.energy_map()
        return np.array(
            [expit(-params.beta * (emap[s] - params.mu)) for s in self.sites]
        )


def classical_generator(
    omega: DisorderRealization, catalogue: JumpCatalogue
) -> ClassicalGenerator:
    """Compile a jump catalogue into classical transition tables."""
    if catalogue.omega != omega:
        raise ConfigurationError("catalogue was built for a different realization")
    sites = _site_tuple(omega)
    rank = {s: k for k, s in enumerate(sites)}
    n = len(sites)
    out_rate = np.zeros(n)
    in_rate = np.zeros(n)
    by_source: list[list[tuple[int, float, float, float]]] = [[] for _ in range(n)]
    for jump in catalogue.jumps:
        if jump.kind == "out":
            out_rate[rank[jump.sites[0]]] = jump.rate
        elif jump.kind == "in":
            in_rate[rank[jump.sites[0]]] = jump.rate
        else:
            src, tgt = rank[jump.sites[0]], rank[jump.sites[1]]
            dist = float(
                omega.params.distance(
                    np.asarray(jump.sites[0], dtype=float),
                    np.asarray(jump.sites[1], dtype=float),
                )
            )
            by_source[src].append((tgt, jump.rate, dist, jump.energy))
    hop_ptr = np.zeros(n + 1, dtype=np.int64)
    targets: list[int] = []
    rates: list[float] = []
    dists: list[float] = []
    des: list[float] = []
    for k in range(n):
        by_source[k].sort(key=lambda entry: entry[0])
        hop_ptr[k + 1] = hop_ptr[k] + len(by_source[k])
        for tgt, rate, dist, de in by_source[k]:
            targets.append(tgt)
            rates.append(rate)
            dists.append(dist)
            des.append(de)
    hop_target = np.asarray(targets, dtype=np.int64)
    hop_rate = np.asarray(rates)
    # Target-major mirror for neighborhood updates.
    by_target: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for src in range(n):
        for c in range(hop_ptr[src], hop_ptr[src + 1]):
            by_target[hop_target[c]].append((src, hop_rate[c]))
    rev_ptr = np.zeros(n + 1, dtype=np.int64)
    rev_source: list[int] = []
    rev_rate: list[float] = []
    for k in range(n):
        rev_ptr[k + 1] = rev_ptr[k] + len(by_target[k])
        for src, rate in by_target[k]:
            rev_source.append(src)
            rev_rate.append(rate)
    return ClassicalGenerator(
        omega=omega,
        catalogue=catalogue,
        sites=sites,
        out_rate=out_rate,
        in_rate=in_rate,
        hop_ptr=hop_ptr,
        hop_target=hop_target,
        hop_rate=hop_rate,
        hop_distance=np.asarray(dists),
        hop_denergy=np.asarray(des),
        rev_ptr=rev_ptr,
        rev_source=np.asarray(rev_source, dtype=np.int64),
        rev_rate=np.asarray(rev_rate),
    )


# -- master equation oracle -----------------------------------------------------------


def master_matrix(gen: ClassicalGenerator) -> np.ndarray:
    """Dense rate matrix ``Q`` over configurations: ``dp/dt = Q p``.

    ``Q[m', m]`` is the rate from configuration ``m`` to ``m'``;
    columns sum to zero. Configuration indices are occupation bitmasks.
    """
    n = gen.n
    if n > BRUTE_FORCE_SITE_LIMIT:
        raise SizeError(
            f"master matrix needs n <= {BRUTE_FORCE_SITE_LIMIT} sites"
        )
    dim = 1 << n
    q = np.zeros((dim, dim))
    for m in range(dim):
        for k in range(n):
            bit = 1 << k
            if m & bit:
                if gen.out_rate[k] > 0.0:
                    q[m ^ bit, m] += gen.out_rate[k]
                for c in range(gen.hop_ptr[k], gen.hop_ptr[k + 1]):
                    j = int(gen.hop_target[c])
                    if not m & (1 << j):
                        q[m ^ bit ^ (1 << j), m] += gen.hop_rate[c]
            elif gen.in_rate[k] > 0.0:
                q[m | bit, m] += gen.in_rate[k]
    q -= np.diag(q.sum(axis=0))
    return q


@dataclass(frozen=True)
class StationaryReport:
    """Null-space analysis of the classical master equation."""

    null_dim: int
    unique: bool
    distribution: np.ndarray | None
    fermi_deviation: float | None

    def to_json(self) -> str:
        payload = {
            "schema": "mottlind/stationary-report-v1",
            "null_dim": self.null_dim,
            "unique": self.unique,
            "fermi_deviation": self.fermi_deviation,
            "fermi_tolerance": 1e-10,
        }
        return json.dumps(payload, sort_keys=True)


def product_fermi_weights(gen: ClassicalGenerator) -> np.ndarray:
    """Product Fermi-Dirac weights over configurations (bitmask order)."""
    p = gen.fermi_occupations()
    weights = np.ones(1)
    for k in range(gen.n):
        weights = np.kron(np.array([1.0 - p[k], p[k]]), weights)
    return weights


def brute_force_stationary(gen: ClassicalGenerator) -> StationaryReport:
    """Stationary distribution(s) of the master equation, by dense SVD.

    With reservoir exchange the null space is simple and the normalized
    null vector must reproduce the product Fermi-Dirac weights; without
    it the particle-number sectors each carry a stationary state and
    the report flags ``unique=False`` instead of returning a
    distribution.
    """
    q = master_matrix(gen)
    _, svals, vt = np.linalg.svd(q)
    scale = svals[0] if svals.size and svals[0] > 0 else 1.0
    null_dim = int(np.sum(svals < 1e-12 * max(scale, 1.0)))
    if null_dim != 1:
        return StationaryReport(
            null_dim=null_dim, unique=False, distribution=None, fermi_deviation=None
        )
    vec = vt[-1]
    # A simple kernel of a rate matrix has a sign-definite null vector.
    vec = np.abs(vec)
    vec /= vec.sum()
    deviation = float(np.abs(vec - product_fermi_weights(gen)).max())
    return StationaryReport(
        null_dim=1, unique=True, distribution=vec, fermi_deviation=deviation
    )


# -- the Gillespie kernel ---------------------------------------------------------------


@njit(cache=True, inline="always")
def _fen_update(tree, n, i, delta):
    i += 1
    while i <= n:
        tree[i] += delta
        i += i & (-i)


@njit(cache=True)
def _fen_rebuild(tree, n, values):
    for i in range(n + 1):
        tree[i] = 0.0
    for i in range(n):
        _fen_update(tree, n, i, values[i])


@njit(cache=True, inline="always")
def _fen_find(tree, n, top_bit, v):
    pos = 0
    rem = v
    bit = top_bit
    while bit:
        nxt = pos + bit
        if nxt <= n and tree[nxt] <= rem:
            pos = nxt
            rem -= tree[nxt]
        bit >>= 1
    return pos, rem


@njit(cache=True, inline="always")
def _site_total_rate(k, occ, out_rate, in_rate, hop_ptr, hop_target, hop_rate):
    if occ[k] == 1:
        r = out_rate[k]
        for c in range(hop_ptr[k], hop_ptr[k + 1]):
            if occ[hop_target[c]] == 0:
                r += hop_rate[c]
        return r
    return in_rate[k]


@njit(cache=True, inline="always")
def _settle_site(k, occ, t, acc, last):
    if occ[k] == 1:
        acc[k] += t - last[k]
    last[k] = t


@njit(cache=True, inline="always")
def _adjust_neighbors(
    x, new_occ, skip_a, skip_b, occ, rev_ptr, rev_source, rev_rate, site_r, tree, n
):
    """Neighbors with a hop channel into ``x`` gain or lose that channel."""
    sign = -1.0 if new_occ == 1 else 1.0
    delta_total = 0.0
    for c in range(rev_ptr[x], rev_ptr[x + 1]):
        m = rev_source[c]
        if m == skip_a or m == skip_b:
            continue
        if occ[m] == 1:
            delta = sign * rev_rate[c]
            site_r[m] += delta
            _fen_update(tree, n, m, delta)
            delta_total += delta
    return delta_total


@njit(cache=True)
def _kmc_kernel(
    occ,
    out_rate,
    in_rate,
    hop_ptr,
    hop_target,
    hop_rate,
    rev_ptr,
    rev_source,
    rev_rate,
    dist_bin,
    de_bin,
    dist_val,
    de_val,
    max_events,
    t_max,
    rebuild_every,
    rng,
    counts,
    hist_dist,
    hist_de,
    hop_sums,
    batch_time,
    batch_dur,
    site_time,
    log_t,
    log_kind,
    log_src,
    log_tgt,
    log_cap,
):
    n = occ.shape[0]
    n_batches = batch_dur.shape[0]
    tree = np.zeros(n + 1)
    site_r = np.empty(n)
    acc = np.zeros(n)
    last = np.zeros(n)
    for k in range(n):
        site_r[k] = _site_total_rate(
            k, occ, out_rate, in_rate, hop_ptr, hop_target, hop_rate
        )
    _fen_rebuild(tree, n, site_r)
    total = 0.0
    for k in range(n):
        total += site_r[k]
    top_bit = 1
    while top_bit * 2 <= n:
        top_bit *= 2

    t = 0.0
    events = 0
    logged = 0
    batches_done = 0
    batch_t0 = 0.0
    ended = 0  # 0: max_events, 1: t_max, 2: zero rate
    since_rebuild = 0

    while events < max_events:
        if since_rebuild >= rebuild_every:
            for k in range(n):
                site_r[k] = _site_total_rate(
                    k, occ, out_rate, in_rate, hop_ptr, hop_target, hop_rate
                )
            _fen_rebuild(tree, n, site_r)
            total = 0.0
            for k in range(n):
                total += site_r[k]
            since_rebuild = 0
        if total <= 1e-300:
            ended = 2
            break
        u = rng.random()
        dt = -math.log1p(-u) / total
        if t + dt > t_max:
            t = t_max
            ended = 1
            break
        t += dt
        v = rng.random() * total
        k, rem = _fen_find(tree, n, top_bit, v)
        if k >= n:
            k = n - 1
            rem = site_r[k] * 0.5
        kind = -1
        target = -1
        channel = -1
        if occ[k] == 1:
            if rem < out_rate[k]:
                kind = _KIND_OUT
            else:
                rem -= out_rate[k]
                last_active = -1
                for c in range(hop_ptr[k], hop_ptr[k + 1]):
                    j = hop_target[c]
                    if occ[j] == 0:
                        last_active = c
                        if rem < hop_rate[c]:
                            channel = c
                            break
                        rem -= hop_rate[c]
                if channel < 0:
                    channel = last_active
                if channel >= 0:
                    kind = _KIND_HOP
                    target = hop_target[channel]
                elif out_rate[k] > 0.0:
                    kind = _KIND_OUT
            if kind < 0:
                # Stale bookkeeping left a dead site selected; repair and retry.
                delta = (
                    _site_total_rate(
                        k, occ, out_rate, in_rate, hop_ptr, hop_target, hop_rate
                    )
                    - site_r[k]
                )
                site_r[k] += delta
                _fen_update(tree, n, k, delta)
                total += delta
                since_rebuild += 1
                continue
        else:
            if in_rate[k] <= 0.0:
                delta = -site_r[k]
                site_r[k] = 0.0
                _fen_update(tree, n, k, delta)
                total += delta
                since_rebuild += 1
                continue
            kind = _KIND_IN

        # Apply the event.
        if kind == _KIND_HOP:
            _settle_site(k, occ, t, acc, last)
            _settle_site(target, occ, t, acc, last)
            occ[k] = 0
            occ[target] = 1
            hist_dist[dist_bin[channel]] += 1
            hist_de[de_bin[channel]] += 1
            hop_sums[0] += dist_val[channel]
            hop_sums[1] += abs(de_val[channel])
        elif kind == _KIND_OUT:
            _settle_site(k, occ, t, acc, last)
            occ[k] = 0
        else:
            _settle_site(k, occ, t, acc, last)
            occ[k] = 1
        counts[kind] += 1

        # Recompute the flipped sites' aggregate rates in full.
        delta = (
            _site_total_rate(k, occ, out_rate, in_rate, hop_ptr, hop_target, hop_rate)
            - site_r[k]
        )
        site_r[k] += delta
        _fen_update(tree, n, k, delta)
        total += delta
        if kind == _KIND_HOP:
            delta = (
                _site_total_rate(
                    target, occ, out_rate, in_rate, hop_ptr, hop_target, hop_rate
                )
                - site_r[target]
            )
            site_r[target] += delta
            _fen_update(tree, n, target, delta)
            total += delta

        # Neighbors with a hop channel INTO a flipped site gain or lose it.
        other = target if kind == _KIND_HOP else k
        total += _adjust_neighbors(
            k, occ[k], k, other, occ, rev_ptr, rev_source, rev_rate, site_r, tree, n
        )
        if kind == _KIND_HOP:
            total += _adjust_neighbors(
                target, 1, k, target, occ, rev_ptr, rev_source, rev_rate, site_r,
                tree, n,
            )

        if logged < log_cap:
            log_t[logged] = t
            log_kind[logged] = kind
            log_src[logged] = k
            log_tgt[logged] = target
            logged += 1
        events += 1
        since_rebuild += 1

        if batches_done < n_batches:
            boundary = (batches_done + 1) * max_events // n_batches
            if events == boundary:
                for s in range(n):
                    _settle_site(s, occ, t, acc, last)
                for s in range(n):
                    batch_time[batches_done, s] = acc[s]
                    site_time[s] += acc[s]
                    acc[s] = 0.0
                batch_dur[batches_done] = t - batch_t0
                batch_t0 = t
                batches_done += 1

    for s in range(n):
        _settle_site(s, occ, t, acc, last)
        site_time[s] += acc[s]
    return t, events, ended, logged, batches_done


# -- trajectories ------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class KmcTrajectory:
    """One replica's simulation record.

    ``batch_site_time``/``batch_duration`` hold the completed
    event-count batches (time-integrated occupancy per site and batch
    length); ``site_time`` integrates over the whole run. The optional
    event log is exact and strictly increasing in time.
    """

    generator: ClassicalGenerator
    seed_key: tuple[int, ...]
    initial: Configuration
    final: Configuration
    total_time: float
    n_events: int
    ended: str
    counts: dict[str, int]
    site_time: np.ndarray
    batch_site_time: np.ndarray
    batch_duration: np.ndarray
    completed_batches: int
    dist_edges: np.ndarray
    dist_counts: np.ndarray
    de_edges: np.ndarray
    de_counts: np.ndarray
    mean_hop_distance: float
    mean_abs_energy_exchange: float
    event_times: np.ndarray | None
    event_kinds: np.ndarray | None
    event_sources: np.ndarray | None
    event_targets: np.ndarray | None

    @property
    def has_event_log(self) -> bool:
        return self.event_times is not None

    def occupancy_average(self) -> np.ndarray:
        """Time-weighted per-site occupation averages over the whole run."""
        if self.total_time <= 0.0:
            return np.full(self.generator.n, np.nan)
        return self.site_time / self.total_time

    def batch_means(self) -> np.ndarray:
        """Per-batch per-site occupancy means, shape (completed, n)."""
        b = self.completed_batches
        dur = self.batch_duration[:b]
        return self.batch_site_time[:b] / dur[:, None]

    def to_json_record(self, replica: int | None = None) -> dict:
        record = {
            "schema": "mottlind/kmc-replica-v1",
            "replica": replica,
            "seed_key": list(self.seed_key),
            "n_sites": self.generator.n,
            "n_events": self.n_events,
            "total_time": self.total_time,
            "ended": self.ended,
            "counts": dict(self.counts),
            "completed_batches": self.completed_batches,
            "filling_initial": self.initial.filling,
            "filling_final": self.final.filling,
            "mean_occupancy": float(np.mean(self.occupancy_average()))
            if self.total_time > 0
            else None,
            "mean_hop_distance": self.mean_hop_distance,
            "mean_abs_energy_exchange": self.mean_abs_energy_exchange,
        }
        return record

    def events_to_csv(self) -> str:
        """Exact event log as CSV (time, kind, source rank, target rank)."""
        if not self.has_event_log:
            raise ConfigurationError("trajectory was run without an event log")
        lines = ["t,kind,source,target"]
        for t, kind, src, tgt in zip(
            self.event_times, self.event_kinds, self.event_sources, self.event_targets
        ):
            lines.append(f"{t:.16e},{_KIND_NAMES[kind]},{src},{tgt}")
        return "\n".join(lines) + "\n"


def _make_bins(values: np.ndarray, n_bins: int, symmetric: bool) -> tuple[np.ndarray, np.ndarray]:
    if values.size == 0:
        return np.array([0.0, 1.0]), np.zeros(0, dtype=np.int64)
    if symmetric:
        top = float(np.abs(values).max()) or 1.0
        edges = np.linspace(-top, top, n_bins + 1)
    else:
        top = float(values.max()) or 1.0
        edges = np.linspace(0.0, top, n_bins + 1)
    bins = np.clip(np.digitize(values, edges) - 1, 0, n_bins - 1).astype(np.int64)
    return edges, bins


def gillespie_run(
    gen: ClassicalGenerator,
    eta0: Configuration,
    t_max: float,
    seed,
    *,
    max_events: int = 1_000_000,
    n_batches: int = 16,
    n_bins: int = 24,
    log_events: bool = False,
    rebuild_every: int = _REBUILD_EVERY,
) -> KmcTrajectory:
    """Simulate the classical chain exactly; deterministic given the seed.

    The run stops at ``t_max``, after ``max_events`` events, or when the
    total rate vanishes (``ended`` records which). Event-count batches
    (``n_batches`` of them, each ``max_events / n_batches`` events)
    carry the time-weighted occupation integrals for batch-means error
    bars; only completed batches are reported.
    """
    if not t_max > 0:
        raise ConfigurationError("t_max must be positive")
    if max_events < 1 or n_batches < 1 or max_events % n_batches:
        raise ConfigurationError(
            "max_events must be a positive multiple of n_batches"
        )
    if tuple(eta0.sites) != gen.sites:
        raise ConfigurationError("initial configuration sites do not match")
    seed_seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seed_key = tuple(int(x) for x in seed_seq.generate_state(2, np.uint64))
    rng = np.random.default_rng(seed_seq)

    occ = eta0.eta.copy()
    counts = np.zeros(3, dtype=np.int64)
    dist_edges, dist_bin = _make_bins(gen.hop_distance, n_bins, symmetric=False)
    de_edges, de_bin = _make_bins(gen.hop_denergy, n_bins, symmetric=True)
    hist_dist = np.zeros(max(dist_edges.size - 1, 1), dtype=np.int64)
    hist_de = np.zeros(max(de_edges.size - 1, 1), dtype=np.int64)
    hop_sums = np.zeros(2)
    batch_time = np.zeros((n_batches, gen.n))
    batch_dur = np.zeros(n_batches)
    site_time = np.zeros(gen.n)
    log_cap = max_events if log_events else 0
    log_t = np.zeros(max(log_cap, 1))
    log_kind = np.zeros(max(log_cap, 1), dtype=np.int8)
    log_src = np.zeros(max(log_cap, 1), dtype=np.int32)
    log_tgt = np.zeros(max(log_cap, 1), dtype=np.int32)

    t_final, n_events, ended_code, logged, batches_done = _kmc_kernel(
        occ,
        gen.out_rate,
        gen.in_rate,
        gen.hop_ptr,
        gen.hop_target,
        gen.hop_rate,
        gen.rev_ptr,
        gen.rev_source,
        gen.rev_rate,
        dist_bin if dist_bin.size else np.zeros(1, dtype=np.int64),
        de_bin if de_bin.size else np.zeros(1, dtype=np.int64),
        gen.hop_distance if gen.hop_distance.size else np.zeros(1),
        gen.hop_denergy if gen.hop_denergy.size else np.zeros(1),
        max_events,
        float(t_max),
        rebuild_every,
        rng,
        counts,
        hist_dist,
        hist_de,
        hop_sums,
        batch_time,
        batch_dur,
        site_time,
        log_t,
        log_kind,
        log_src,
        log_tgt,
        log_cap,
    )

    n_hops = int(counts[_KIND_HOP])
    if n_hops:
        mean_dist = float(hop_sums[0] / n_hops)
        mean_abs_de = float(hop_sums[1] / n_hops)
    else:
        mean_dist = math.nan
        mean_abs_de = math.nan

    ended = ("max_events", "t_max", "zero_rate")[ended_code]
    final = Configuration(gen.sites, occ)
    return KmcTrajectory(
        generator=gen,
        seed_key=seed_key,
        initial=eta0,
        final=final,
        total_time=float(t_final),
        n_events=int(n_events),
        ended=ended,
        counts={_KIND_NAMES[i]: int(counts[i]) for i in range(3)},
        site_time=site_time,
        batch_site_time=batch_time,
        batch_duration=batch_dur,
        completed_batches=int(batches_done),
        dist_edges=dist_edges,
        dist_counts=hist_dist,
        de_edges=de_edges,
        de_counts=hist_de,
        mean_hop_distance=mean_dist,
        mean_abs_energy_exchange=mean_abs_de,
        event_times=log_t[:logged] if log_events else None,
        event_kinds=log_kind[:logged] if log_events else None,
        event_sources=log_src[:logged] if log_events else None,
        event_targets=log_tgt[:logged] if log_events else None,
    )


def run_replicas(
    gen: ClassicalGenerator,
    n_replicas: int,
    seed,
    t_max: float = math.inf,
    *,
    max_events: int = 1_000_000,
    init: str = "equilibrium",
    threads: int | None = None,
    **kwargs,
) -> list[KmcTrajectory]:
    """Run independent replicas on threads (the kernel releases the GIL).

    Each replica draws its own seed stream from a spawned
    ``SeedSequence``; ``init`` selects the Fermi-Dirac equilibrium start
    or the all-empty configuration.
    """
    if init not in ("equilibrium", "empty"):
        raise ConfigurationError("init must be 'equilibrium' or 'empty'")
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = root.spawn(2 * n_replicas)

    def one(i: int) -> KmcTrajectory:
        if init == "equilibrium":
            eta0 = equilibrium_configuration(gen.omega, children[2 * i])
        else:
            eta0 = empty_configuration(gen.omega)
        return gillespie_run(
            gen, eta0, t_max, children[2 * i + 1], max_events=max_events, **kwargs
        )

    if threads is None or threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, range(n_replicas)))
    return [one(i) for i in range(n_replicas)]


# -- statistics ---------------------------------------------------------------------------


def hop_statistics(traj: KmcTrajectory, omega: DisorderRealization) -> dict:
    """Aggregates over hop events only; flags the empty case."""
    n_hops = traj.counts["hop"]
    if n_hops == 0:
        return {"empty": True, "n_hops": 0}
    rates = {
        kind: count / traj.total_time if traj.total_time > 0 else math.nan
        for kind, count in traj.counts.items()
    }
    return {
        "empty": False,
        "n_hops": n_hops,
        "mean_hop_distance": traj.mean_hop_distance,
        "mean_abs_energy_exchange": traj.mean_abs_energy_exchange,
        "event_rates": rates,
    }


def occupancy_report(
    trajectories: Sequence[KmcTrajectory], se_factor: float = 4.0
) -> dict:
    """Batch-means comparison of empirical occupations with Fermi-Dirac.

    Pools the completed batches of all replicas; a site passes when its
    pooled mean lies within ``se_factor`` standard errors of
    ``1/(1+e^{beta(eps-mu)})``. Returns the per-site table and the
    passing fraction.
    """
    if not trajectories:
        raise ConfigurationError("need at least one trajectory")
    gen = trajectories[0].generator
    for traj in trajectories:
        if traj.generator is not gen and traj.generator.sites != gen.sites:
            raise ConfigurationError("trajectories come from different generators")
    rows = np.vstack([t.batch_means() for t in trajectories])
    if rows.shape[0] < 2:
        raise ConfigurationError("need at least two completed batches")
    mean = rows.mean(axis=0)
    se = rows.std(axis=0, ddof=1) / math.sqrt(rows.shape[0])
    target = gen.fermi_occupations()
    deviation = np.abs(mean - target)
    passed = deviation <= se_factor * se
    return {
        "n_batches": int(rows.shape[0]),
        "mean": mean,
        "se": se,
        "target": target,
        "passed": passed,
        "fraction_within": float(passed.mean()),
        "se_factor": se_factor,
    }


def replicas_to_jsonlines(trajectories: Sequence[KmcTrajectory]) -> str:
    """One JSON record per replica."""
    return "\n".join(
        json.dumps(t.to_json_record(replica=i), sort_keys=True)
        for i, t in enumerate(trajectories)
    )
