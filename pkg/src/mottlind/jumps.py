"""Thermally weighted jump catalogue of the open hopping dynamics.

Each disorder realization induces a family of jumps:

hop ``x -> y``
    rate ``Gamma0 * exp(-d(x,y)/r_loc) / Z * exp(-beta (eps_y - eps_x)^+)``,
    operator ``L = sqrt(rate) a_y^dag a_x`` (even degree),
    energy ``eps_y - eps_x``;
exit ``x -> *``
    rate ``Gamma* exp(-beta (mu - eps_x)^+)``, operator
    ``L = sqrt(rate) a_x`` (odd), energy ``mu - eps_x``;
entry ``* -> x``
    rate ``Gamma* exp(-beta (eps_x - mu)^+)``, operator
    ``L = sqrt(rate) a_x^dag`` (odd), energy ``eps_x - mu``.

All rates are computed in log-space and exponentiated once, so the
detailed-balance ratios ``Gamma(x->y)/Gamma(y->x) = exp(-beta (eps_y -
eps_x))`` and ``Gamma(x->*)/Gamma(*->x) = exp(beta (eps_x - mu))`` hold
to full floating-point accuracy (the two positive parts differ by
exactly the energy transfer). ``Gamma* = 0`` switches the particle
reservoir off: no exit/entry jumps are enumerated.

The catalogue is closed under time reversal (hop ``x->y`` pairs with hop
``y->x``; exit pairs with entry at the same site) and satisfies five
structural axioms, checkable numerically with
:func:`verify_axioms`:

J1  time reversal is an involution that negates the energy;
J2  each jump operator has the declared support and parity degree, and
    the rates are covariant under wrap-around lattice translations
    (checked away from the wrap seam; only meaningful for the
    translation-invariant ``full_lattice`` normalization);
J3  ``alpha_t(L) = e^{it energy} L`` for the free flow;
J4  ``L^dag = e^{-beta energy / 2} L_reversed``;
J5  ``sum over jumps touching a fixed site of L^dag L`` is bounded.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import AxiomViolationError, ConfigurationError, SiteError
from .fock import FockOperator, FockSpace, annihilator, creator, heisenberg_evolve, parity_op
from .model import DisorderRealization, normalization_Z, translate

__all__ = [
    "Jump",
    "JumpCatalogue",
    "AxiomReport",
    "rate_hop",
    "rate_out",
    "rate_in",
    "log_rate_hop",
    "log_rate_out",
    "log_rate_in",
    "enumerate_jumps",
    "build_jump_operator",
    "time_reverse",
    "verify_axioms",
]

_KIND_ORDER = {"hop": 0, "out": 1, "in": 2}

Site = tuple[int, ...]


@dataclass(frozen=True, slots=True)
class Jump:
    """One jump of the catalogue.

    Attributes
    ----------
    kind : {"hop", "out", "in"}
        Hop between two impurity sites, exit to the reservoir, or entry
        from the reservoir.
    sites : tuple of site tuples
        ``(x, y)`` for a hop ``x -> y``; ``(x,)`` for exit/entry.
    rate : float
        The thermally weighted rate; always the exponential of
        ``log_rate``.
    log_rate : float
        The rate in log-space (exact detailed-balance bookkeeping).
    energy : float
        Energy transferred into the system by the jump.
    """

    kind: str
    sites: tuple[Site, ...]
    rate: float
    log_rate: float
    energy: float

    def __post_init__(self) -> None:
        if self.kind not in _KIND_ORDER:
            raise ConfigurationError(f"unknown jump kind {self.kind!r}")
        expected_arity = 2 if self.kind == "hop" else 1
        if len(self.sites) != expected_arity:
            raise ConfigurationError(f"{self.kind} jump needs {expected_arity} site(s)")
        if self.kind == "hop" and self.sites[0] == self.sites[1]:
            raise ConfigurationError("hop endpoints must differ")

    @property
    def degree(self) -> str:
        """Parity degree of the jump operator: hops even, exchange odd."""
        return "even" if self.kind == "hop" else "odd"

    @property
    def support(self) -> tuple[Site, ...]:
        """Sites the jump operator acts on, sorted."""
        return tuple(sorted(self.sites))

    @property
    def key(self) -> tuple[str, tuple[Site, ...]]:
        return (self.kind, self.sites)

    @property
    def reversed_key(self) -> tuple[str, tuple[Site, ...]]:
        if self.kind == "hop":
            return ("hop", (self.sites[1], self.sites[0]))
        return ("in" if self.kind == "out" else "out", self.sites)

    def sort_key(self) -> tuple:
        return (_KIND_ORDER[self.kind], self.sites)

    def to_record(self) -> dict:
        return {
            "kind": self.kind,
            "sites": [list(s) for s in self.sites],
            "rate": self.rate,
            "energy": self.energy,
        }


# -- rate formulas (log-space) -------------------------------------------------


def _positive_part(x: float) -> float:
    return x if x > 0.0 else 0.0


def _hop_factor(omega: DisorderRealization, eps_x, eps_y):
    mod = omega.params.rate_modulation
    if mod is None or mod.hop_factor is None:
        return 1.0
    return mod.hop_factor(eps_x, eps_y, omega.params.beta)


def _star_factor(omega: DisorderRealization, eps_x):
    mod = omega.params.rate_modulation
    if mod is None or mod.star_factor is None:
        return 1.0
    return mod.star_factor(eps_x, omega.params.beta)


def log_rate_hop(
    omega: DisorderRealization,
    x: Sequence[int],
    y: Sequence[int],
    z: float | None = None,
) -> float:
    """Log of the hop rate ``x -> y``; ``-inf`` for an absent jump.

    Unoccupied endpoints produce a structural zero (``-inf``), matching
    the convention that such jumps are simply omitted from the
    catalogue.
    """
    emap = omega.energy_map()
    kx, ky = tuple(int(c) for c in x), tuple(int(c) for c in y)
    if kx not in emap or ky not in emap or kx == ky:
        return -math.inf
    if z is None:
        z = normalization_Z(omega)
    params = omega.params
    dist = float(params.distance(np.asarray(kx), np.asarray(ky)))
    eps_x, eps_y = emap[kx], emap[ky]
    factor = float(_hop_factor(omega, eps_x, eps_y))
    return (
        math.log(params.gamma0)
        + math.log(factor)
        - dist / params.r_loc
        - math.log(z)
        - params.beta * _positive_part(eps_y - eps_x)
    )


def rate_hop(
    omega: DisorderRealization,
    x: Sequence[int],
    y: Sequence[int],
    z: float | None = None,
) -> float:
    """Hop rate ``x -> y``; 0 when either endpoint hosts no impurity."""
    lr = log_rate_hop(omega, x, y, z)
    return 0.0 if lr == -math.inf else math.exp(lr)


def log_rate_out(omega: DisorderRealization, x: Sequence[int]) -> float:
    """Log exit rate ``x -> *``; raises SiteError for unoccupied ``x``."""
    emap = omega.energy_map()
    kx = tuple(int(c) for c in x)
    if kx not in emap:
        raise SiteError(f"site {kx} hosts no impurity")
    params = omega.params
    if params.gamma_star == 0.0:
        return -math.inf
    eps_x = emap[kx]
    factor = float(_star_factor(omega, eps_x))
    return (
        math.log(params.gamma_star)
        + math.log(factor)
        - params.beta * _positive_part(params.mu - eps_x)
    )


def rate_out(omega: DisorderRealization, x: Sequence[int]) -> float:
    lr = log_rate_out(omega, x)
    return 0.0 if lr == -math.inf else math.exp(lr)


def log_rate_in(omega: DisorderRealization, x: Sequence[int]) -> float:
    """Log entry rate ``* -> x``; raises SiteError for unoccupied ``x``."""
    emap = omega.energy_map()
    kx = tuple(int(c) for c in x)
    if kx not in emap:
        raise SiteError(f"site {kx} hosts no impurity")
    params = omega.params
    if params.gamma_star == 0.0:
        return -math.inf
    eps_x = emap[kx]
    factor = float(_star_factor(omega, eps_x))
    return (
        math.log(params.gamma_star)
        + math.log(factor)
        - params.beta * _positive_part(eps_x - params.mu)
    )


def rate_in(omega: DisorderRealization, x: Sequence[int]) -> float:
    lr = log_rate_in(omega, x)
    return 0.0 if lr == -math.inf else math.exp(lr)


# -- catalogue ------------------------------------------------------------------


@dataclass(frozen=True)
class JumpCatalogue:
    """A reversal-closed, duplicate-free family of jumps on one realization.

    Attributes
    ----------
    omega : DisorderRealization
        The generating realization.
    jumps : tuple of Jump
        Canonically ordered (hops by site pair, then exits, then
        entries by site).
    hop_cutoff : float
        Enumeration radius actually used.
    z : float
        The hopping normalization used in the rates.
    dropped_tail_bound : float
        Upper bound on the total per-site hop rate discarded beyond the
        cutoff: ``Gamma0 * exp(-cutoff/r_loc) * n_box_sites / Z``.
    """

    omega: DisorderRealization
    jumps: tuple[Jump, ...]
    hop_cutoff: float
    z: float
    dropped_tail_bound: float

    def __post_init__(self) -> None:
        keys = [j.key for j in self.jumps]
        key_set = set(keys)
        if len(key_set) != len(keys):
            raise ConfigurationError("duplicate (kind, sites) in jump catalogue")
        for j in self.jumps:
            if j.reversed_key not in key_set:
                raise ConfigurationError(
                    f"catalogue not closed under time reversal: {j.key} "
                    f"has no partner {j.reversed_key}"
                )
        object.__setattr__(self, "_index", {j.key: j for j in self.jumps})

    def __iter__(self) -> Iterator[Jump]:
        return iter(self.jumps)

    def __len__(self) -> int:
        return len(self.jumps)

    def get(self, key: tuple[str, tuple[Site, ...]]) -> Jump:
        return self._index[key]  # type: ignore[attr-defined]

    def __contains__(self, key: tuple[str, tuple[Site, ...]]) -> bool:
        return key in self._index  # type: ignore[attr-defined]

    def hops(self) -> tuple[Jump, ...]:
        return tuple(j for j in self.jumps if j.kind == "hop")

    def cemetery(self) -> tuple[Jump, ...]:
        return tuple(j for j in self.jumps if j.kind != "hop")

    def subset(self, keys: Iterable[tuple[str, tuple[Site, ...]]]) -> "JumpCatalogue":
        """A sub-catalogue restricted to ``keys``; must stay reversal-closed."""
        key_set = set(keys)
        jumps = tuple(j for j in self.jumps if j.key in key_set)
        return dataclasses.replace(self, jumps=jumps)

    def counts(self) -> dict[str, int]:
        out = {"hop": 0, "out": 0, "in": 0}
        for j in self.jumps:
            out[j.kind] += 1
        return out

    def to_jsonlines(self) -> str:
        """One JSON record per jump: kind, sites, rate, energy."""
        return "\n".join(json.dumps(j.to_record(), sort_keys=True) for j in self.jumps)


def enumerate_jumps(
    omega: DisorderRealization, hop_cutoff: float | None = None
) -> JumpCatalogue:
    """Enumerate all jumps of a realization within a hop radius.

    ``hop_cutoff`` defaults to the parameter value (itself defaulting to
    ``12 r_loc``). Enlarging the cutoff only ever adds hop pairs, so
    catalogues are monotone in the cutoff. The information lost to the
    truncation is summarized by ``dropped_tail_bound``.
    """
    params = omega.params
    cutoff = float(hop_cutoff) if hop_cutoff is not None else params.effective_hop_cutoff
    if cutoff <= 0:
        raise ConfigurationError("hop_cutoff must be positive")
    z = normalization_Z(omega)
    sites = omega.occupied_sites()
    energies = omega.energies
    n = len(sites)
    jumps: list[Jump] = []

    if n >= 2:
        p_norm = 2.0 if params.metric == "euclidean" else np.inf
        tree = cKDTree(sites.astype(float))
        pairs = tree.query_pairs(r=cutoff, p=p_norm, output_type="ndarray")
        if len(pairs):
            i, j = pairs[:, 0], pairs[:, 1]
            dist = params.distance(sites[i], sites[j])
            log_base = (
                math.log(params.gamma0) - dist / params.r_loc - math.log(z)
            )
            eps_i, eps_j = energies[i], energies[j]
            factor = _hop_factor(omega, eps_i, eps_j)
            log_base = log_base + np.log(np.broadcast_to(factor, dist.shape))
            d_e = eps_j - eps_i
            lr_fwd = log_base - params.beta * np.maximum(d_e, 0.0)
            lr_bwd = log_base - params.beta * np.maximum(-d_e, 0.0)
            site_keys = [tuple(int(c) for c in s) for s in sites]
            for k in range(len(pairs)):
                a, b = site_keys[i[k]], site_keys[j[k]]
                jumps.append(Jump("hop", (a, b), math.exp(lr_fwd[k]),
                                  float(lr_fwd[k]), float(d_e[k])))
                jumps.append(Jump("hop", (b, a), math.exp(lr_bwd[k]),
                                  float(lr_bwd[k]), float(-d_e[k])))

    if params.gamma_star > 0.0:
        for site, eps in zip(sites, energies):
            key = tuple(int(c) for c in site)
            lr_o = log_rate_out(omega, key)
            lr_i = log_rate_in(omega, key)
            jumps.append(Jump("out", (key,), math.exp(lr_o), lr_o,
                              params.mu - float(eps)))
            jumps.append(Jump("in", (key,), math.exp(lr_i), lr_i,
                              float(eps) - params.mu))

    jumps.sort(key=Jump.sort_key)
    if z > 0.0:
        tail = params.gamma0 * math.exp(-cutoff / params.r_loc) * params.n_box_sites / z
    else:
        # A single-site box has no hop pairs at all, hence no tail.
        tail = 0.0
    return JumpCatalogue(
        omega=omega, jumps=tuple(jumps), hop_cutoff=cutoff, z=z,
        dropped_tail_bound=tail,
    )


def time_reverse(catalogue: JumpCatalogue, jump: Jump) -> Jump:
    """The time-reversed partner of a jump, looked up in its catalogue."""
    return catalogue.get(jump.reversed_key)


def build_jump_operator(space: FockSpace, jump: Jump) -> FockOperator:
    """The jump operator ``L = sqrt(rate) x (hop | exit | entry) monomial``.

    Raises :class:`SiteError` when the jump references sites outside the
    Fock space.
    """
    for site in jump.sites:
        if site not in space.sites:
            raise SiteError(f"jump site {site} is not in the Fock space")
    amp = math.sqrt(jump.rate)
    if jump.kind == "hop":
        x, y = jump.sites
        op = creator(space, y) @ annihilator(space, x)
    elif jump.kind == "out":
        op = annihilator(space, jump.sites[0])
    else:
        op = creator(space, jump.sites[0])
    return amp * op


# -- axiom verification ----------------------------------------------------------


@dataclass(frozen=True)
class AxiomReport:
    """Maximal deviations found for each structural axiom.

    ``j5_norm`` is the largest per-site norm of ``sum L^dag L`` (a
    finiteness report, not a deviation). ``j2_translation`` is ``None``
    when the normalization mode is not translation invariant
    (``realized_origin``), in which case the covariance check is not
    meaningful.
    """

    j1_involution: float
    j2_structure: float
    j2_translation: float | None
    j3_covariance: float
    j4_kms: float
    j5_norm: float
    n_jumps: int

    def worst(self) -> float:
        vals = [self.j1_involution, self.j2_structure, self.j3_covariance, self.j4_kms]
        if self.j2_translation is not None:
            vals.append(self.j2_translation)
        return max(vals)

    def ok(self, tol: float = 1e-10) -> bool:
        return self.worst() <= tol

    def raise_if_failed(self, tol: float = 1e-10) -> None:
        checks = {
            "J1": self.j1_involution,
            "J2": self.j2_structure,
            "J3": self.j3_covariance,
            "J4": self.j4_kms,
        }
        if self.j2_translation is not None:
            checks["J2-translation"] = self.j2_translation
        for name, dev in checks.items():
            if not dev <= tol:  # catches NaN as a failure too
                raise AxiomViolationError(name, dev, tol)


def _translation_deviation(
    catalogue: JumpCatalogue, shift: tuple[int, ...]
) -> float:
    """Max relative rate deviation under a wrapped translation.

    Hops are compared only when the (non-periodic) metric distance of
    the pair is unchanged by the wrap, i.e. away from the seam.
    """
    omega = catalogue.omega
    params = omega.params
    moved = translate(omega, shift)
    moved_cat = enumerate_jumps(moved, catalogue.hop_cutoff)

    def wrap(site: Site) -> Site:
        arr = np.asarray(site) + np.asarray(shift)
        out = []
        for c, edge in zip(arr, params.box):
            lo = -((edge - 1) // 2)
            out.append(int((c - lo) % edge + lo))
        return tuple(out)

    worst = 0.0
    for j in catalogue.jumps:
        mapped = tuple(wrap(s) for s in j.sites)
        if j.kind == "hop":
            d_old = params.distance(np.asarray(j.sites[0]), np.asarray(j.sites[1]))
            d_new = params.distance(np.asarray(mapped[0]), np.asarray(mapped[1]))
            if not math.isclose(float(d_old), float(d_new), rel_tol=1e-12):
                continue  # pair straddles the wrap seam
        partner = moved_cat.get((j.kind, mapped))
        worst = max(worst, abs(partner.rate - j.rate) / max(j.rate, 1e-300))
    return worst


def verify_axioms(
    catalogue: JumpCatalogue,
    space: FockSpace,
    *,
    t_samples: Sequence[float] = (0.37, 1.3),
    translation_shift: tuple[int, ...] | None = None,
    strict: bool = False,
    tol: float = 1e-10,
) -> AxiomReport:
    """Numerically verify the structural axioms J1-J5 of a catalogue.

    Returns the per-axiom maximal deviations; with ``strict=True`` a
    deviation above ``tol`` raises :class:`AxiomViolationError` naming
    the failed axiom.
    """
    omega = catalogue.omega
    beta = omega.params.beta
    g = parity_op(space).dense()
    site_index = {s: k for k, s in enumerate(space.sites)}

    j1 = 0.0
    j2 = 0.0
    j3 = 0.0
    j4 = 0.0
    per_site_sum: dict[int, np.ndarray] = {}
    number_diags = [
        ((np.arange(space.dim) >> k) & 1).astype(float) for k in range(space.n)
    ]

    for jump in catalogue.jumps:
        partner = catalogue.get(jump.reversed_key)
        # J1: involution and energy negation.
        if partner.reversed_key != jump.key:
            j1 = math.inf
        j1 = max(j1, abs(jump.energy + partner.energy))

        op = build_jump_operator(space, jump).dense()
        scale = max(1.0, float(np.abs(op).max()))

        # J2: parity degree and support.
        sign = 1.0 if jump.degree == "even" else -1.0
        j2 = max(j2, float(np.abs(g @ op @ g - sign * op).max()) / scale)
        supp_ranks = {site_index[s] for s in jump.sites}
        for k in range(space.n):
            if k in supp_ranks:
                continue
            diag = number_diags[k]
            comm = diag[:, None] * op - op * diag[None, :]
            j2 = max(j2, float(np.abs(comm).max()) / scale)

        # J3: covariance under the free flow.
        for t in t_samples:
            flowed = heisenberg_evolve(omega, build_jump_operator(space, jump), t)
            pred = np.exp(1j * t * jump.energy) * op
            j3 = max(j3, float(np.abs(flowed.dense() - pred).max()) / scale)

        # J4: L^dag = e^{-beta energy / 2} L_reversed.
        pred = math.exp(-beta * jump.energy / 2.0) * build_jump_operator(
            space, partner
        ).dense()
        j4 = max(j4, float(np.abs(op.conj().T - pred).max()) / scale)
        # ... and the equivalent detailed-balance ratio in log-space.
        j4 = max(
            j4,
            abs(jump.log_rate - partner.log_rate + beta * jump.energy)
            / max(1.0, abs(jump.log_rate)),
        )

        # J5 accumulation: sum of L^dag L per touched site.
        ldl = op.conj().T @ op
        for s in jump.sites:
            k = site_index[s]
            per_site_sum[k] = per_site_sum.get(k, 0.0) + ldl

    j5 = 0.0
    for k, total in per_site_sum.items():
        j5 = max(j5, float(np.linalg.norm(total, ord=2)))

    if omega.params.z_mode == "full_lattice" and space.n > 0:
        shift = translation_shift
        if shift is None:
            shift = tuple(1 if d == 0 else 0 for d in range(omega.params.dim))
        j2_translation: float | None = _translation_deviation(catalogue, shift)
    else:
        j2_translation = None

    report = AxiomReport(
        j1_involution=j1,
        j2_structure=j2,
        j2_translation=j2_translation,
        j3_covariance=j3,
        j4_kms=j4,
        j5_norm=j5,
        n_jumps=len(catalogue),
    )
    if strict:
        report.raise_if_failed(tol)
    return report
