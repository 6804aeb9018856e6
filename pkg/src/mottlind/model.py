"""Disordered impurity model: parameters, quenched randomness, geometry.

The physical setting is a finite box of a ``dim``-dimensional integer
lattice. Each box site ``x`` independently hosts an impurity with
probability ``c`` (occupancy ``s_x ~ Bernoulli(c)``), and every impurity
site carries an on-site energy ``eps_x ~ Uniform[delta]``, drawn
independently of the occupancies. A realization ``omega = (s, eps)`` is
the complete quenched-disorder input to everything downstream: jump
rates, Lindblad generators, GNS spectra, and kinetic Monte Carlo.

Box sites live in *centered* coordinates: along an axis of even length
``L`` the coordinates run ``-(L//2 - 1) .. L//2``; for odd ``L`` they run
``-(L-1)//2 .. (L-1)//2``. Translations wrap around the box (periodic
identification), and form a group under composition.

The hopping normalization ``Z`` has two modes:

``full_lattice``
    ``Z = sum_{m in box, m != 0} exp(-|m| / r_loc)`` over the centered
    coordinate set. Depends only on the parameters, hence is exactly
    translation invariant.

``realized_origin``
    ``Z = sum_{m in L(s)} exp(-|m| / r_loc)`` over the *occupied* sites of
    the given realization (the origin contributes ``1`` when occupied).
    Not translation invariant in general; raises
    :class:`~mottlind.errors.DegenerateNormalizationError` when no site is
    occupied.

Classes
-------
ModelParams
    Frozen parameter bundle with validation and JSON round-tripping.
RateModulation
    Optional smooth modulation of the base rates, with declared positive
    lower bounds.
DisorderRealization
    One quenched sample ``(s, eps)`` with geometry helpers.

Functions
---------
sample_disorder
    Draw a realization reproducibly from ``(params, seed)``.
translate
    Wrap-around lattice translation of a realization.
normalization_Z
    The hopping normalization in either mode.
"""

from __future__ import annotations

import dataclasses
import json
from collections.abc import Callable
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import ConfigurationError, DegenerateNormalizationError

__all__ = [
    "ModelParams",
    "RateModulation",
    "DisorderRealization",
    "sample_disorder",
    "translate",
    "normalization_Z",
    "box_site_array",
]

_METRICS = ("euclidean", "sup")
_Z_MODES = ("full_lattice", "realized_origin")

PARAMS_SCHEMA = "mottlind/params-v1"
REALIZATION_SCHEMA = "mottlind/realization-v1"

# Named modulations that can be serialized by name. Entries are
# (gamma0_factor(eps_x, eps_y, beta), gamma_star_factor(eps_x, beta),
#  gamma0_infimum, gamma_star_infimum).
_MODULATION_REGISTRY: dict[str, "RateModulation"] = {}


@dataclass(frozen=True)
class RateModulation:
    """Smooth, strictly positive modulation of the base rates.

    The hop prefactor becomes ``gamma0 * hop_factor(eps_x, eps_y, beta)``
    and the particle-exchange prefactor ``gamma_star *
    star_factor(eps_x, beta)``. Both factors must be bounded below by the
    declared infima, which the spectral bounds use in place of ``1``.

    Parameters
    ----------
    name : str
        Registry key used for serialization.
    hop_factor : callable or None
        ``(eps_x, eps_y, beta) -> float``; must be symmetric in
        ``(eps_x, eps_y)`` so that detailed balance is preserved. ``None``
        leaves hops unmodulated.
    star_factor : callable or None
        ``(eps_x, beta) -> float``; applied to both exchange directions at
        site ``x``. ``None`` leaves exchange unmodulated.
    hop_infimum, star_infimum : float
        Declared strictly positive lower bounds of the factors.
    """

    name: str
    hop_factor: Callable[[float, float, float], float] | None = None
    star_factor: Callable[[float, float], float] | None = None
    hop_infimum: float = 1.0
    star_infimum: float = 1.0

    def __post_init__(self) -> None:
        if self.hop_infimum <= 0 or self.star_infimum <= 0:
            raise ConfigurationError(
                "rate modulation lower bounds must be strictly positive"
            )

    def register(self) -> "RateModulation":
        """Add this modulation to the by-name registry and return it."""
        _MODULATION_REGISTRY[self.name] = self
        return self


def get_modulation(name: str) -> RateModulation:
    """Look up a registered :class:`RateModulation` by name."""
    try:
        return _MODULATION_REGISTRY[name]
    except KeyError:
        raise ConfigurationError(f"unknown rate modulation {name!r}") from None


@dataclass(frozen=True)
class ModelParams:
    """Complete parameter set of the dissipative hopping model.

    Parameters
    ----------
    beta : float
        Inverse temperature, > 0.
    mu : float
        Chemical potential of the particle reservoir.
    gamma0 : float
        Base hop rate scale, > 0.
    gamma_star : float
        Base particle-exchange rate scale, >= 0 (0 switches the reservoir
        coupling off).
    r_loc : float
        Localization length of the hop kernel, > 0.
    delta : tuple(float, float)
        Impurity band ``[eps_min, eps_max]`` for the on-site energies.
    dim : int
        Spatial dimension, >= 1.
    box : tuple of int
        Edge lengths of the finite box, one positive entry per dimension.
    impurity_density : float
        Bernoulli occupation probability ``c`` in ``[0, 1]``.
    metric : {"euclidean", "sup"}
        Distance used in the hop kernel.
    z_mode : {"full_lattice", "realized_origin"}
        Normalization convention, see the module docstring.
    hop_cutoff : float or None
        Default hop enumeration radius; ``None`` means ``12 * r_loc``.
    rate_modulation : RateModulation or None
        Optional modulation of the base rates.
    """

    beta: float
    mu: float
    gamma0: float
    gamma_star: float
    r_loc: float
    delta: tuple[float, float]
    dim: int
    box: tuple[int, ...]
    impurity_density: float
    metric: str = "euclidean"
    z_mode: str = "full_lattice"
    hop_cutoff: float | None = None
    rate_modulation: RateModulation | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "delta", tuple(float(v) for v in self.delta))
        object.__setattr__(self, "box", tuple(int(v) for v in self.box))
        if self.beta <= 0:
            raise ConfigurationError("beta must be strictly positive")
        if self.gamma0 <= 0:
            raise ConfigurationError("gamma0 must be strictly positive")
        if self.gamma_star < 0:
            raise ConfigurationError("gamma_star must be nonnegative")
        if self.r_loc <= 0:
            raise ConfigurationError("r_loc must be strictly positive")
        if len(self.delta) != 2 or self.delta[0] > self.delta[1]:
            raise ConfigurationError("delta must be an interval (lo, hi) with lo <= hi")
        if self.dim < 1:
            raise ConfigurationError("dim must be >= 1")
        if len(self.box) != self.dim or any(edge < 1 for edge in self.box):
            raise ConfigurationError("box needs one positive edge length per dimension")
        if not 0.0 <= self.impurity_density <= 1.0:
            raise ConfigurationError("impurity_density must lie in [0, 1]")
        if self.metric not in _METRICS:
            raise ConfigurationError(f"metric must be one of {_METRICS}")
        if self.z_mode not in _Z_MODES:
            raise ConfigurationError(f"z_mode must be one of {_Z_MODES}")
        if self.hop_cutoff is not None and self.hop_cutoff <= 0:
            raise ConfigurationError("hop_cutoff must be positive when given")

    @property
    def n_box_sites(self) -> int:
        return int(np.prod(self.box))

    @property
    def effective_hop_cutoff(self) -> float:
        return self.hop_cutoff if self.hop_cutoff is not None else 12.0 * self.r_loc

    def distance(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Distance between site coordinates under the configured metric.

        Accepts broadcastable integer arrays whose last axis is the
        coordinate axis.
        """
        diff = np.asarray(u, dtype=float) - np.asarray(v, dtype=float)
        if self.metric == "euclidean":
            return np.linalg.norm(diff, axis=-1)
        return np.max(np.abs(diff), axis=-1)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "schema": PARAMS_SCHEMA,
            "beta": self.beta,
            "mu": self.mu,
            "gamma0": self.gamma0,
            "gamma_star": self.gamma_star,
            "r_loc": self.r_loc,
            "delta": list(self.delta),
            "dim": self.dim,
            "box": list(self.box),
            "impurity_density": self.impurity_density,
            "metric": self.metric,
            "z_mode": self.z_mode,
            "hop_cutoff": self.hop_cutoff,
            "rate_modulation": None
            if self.rate_modulation is None
            else self.rate_modulation.name,
        }
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ModelParams":
        d = dict(d)
        schema = d.pop("schema", PARAMS_SCHEMA)
        if schema != PARAMS_SCHEMA:
            raise ConfigurationError(f"unsupported params schema {schema!r}")
        mod = d.pop("rate_modulation", None)
        if isinstance(mod, str):
            mod = get_modulation(mod)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown parameter keys {sorted(unknown)}")
        try:
            return cls(rate_modulation=mod, **d)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from None

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        return cls.from_dict(json.loads(text))


def box_site_array(params: ModelParams) -> np.ndarray:
    """All box sites in centered coordinates, canonical (lexicographic) order.

    Returns an ``(n_box_sites, dim)`` int array. The canonical order is the
    C-order walk of the coordinate grid, i.e. lexicographic in the centered
    coordinates, which every module uses as the site ordering.
    """
    axes = [np.arange(-((edge - 1) // 2), edge - (edge - 1) // 2) for edge in params.box]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1).astype(np.int64)


@dataclass(frozen=True)
class DisorderRealization:
    """One quenched disorder sample ``omega = (s, eps)`` on the box.

    Attributes
    ----------
    params : ModelParams
        The generating parameters.
    occupancy : numpy.ndarray
        ``(n_box_sites,)`` uint8 occupancies ``s_x`` in canonical site
        order (see :func:`box_site_array`).
    energies : numpy.ndarray
        On-site energies for the occupied sites only, aligned with the
        occupied subsequence of the canonical order.
    seed : int or None
        The sampling seed; ``None`` for synthetic realizations (e.g.
        translates), which are not regenerable from a seed.
    """

    params: ModelParams
    occupancy: np.ndarray
    energies: np.ndarray
    seed: int | None

    def __post_init__(self) -> None:
        occ = np.ascontiguousarray(self.occupancy, dtype=np.uint8)
        ens = np.ascontiguousarray(self.energies, dtype=np.float64)
        if occ.shape != (self.params.n_box_sites,):
            raise ConfigurationError("occupancy length must match the box volume")
        if ens.shape != (int(occ.sum()),):
            raise ConfigurationError("need exactly one energy per occupied site")
        occ.setflags(write=False)
        ens.setflags(write=False)
        object.__setattr__(self, "occupancy", occ)
        object.__setattr__(self, "energies", ens)

    @property
    def n_occupied(self) -> int:
        return int(self.occupancy.sum())

    def box_sites(self) -> np.ndarray:
        """All box sites, canonical order (see :func:`box_site_array`)."""
        return box_site_array(self.params)

    def occupied_sites(self) -> np.ndarray:
        """Coordinates of the occupied sites, canonical order."""
        return self.box_sites()[self.occupancy.astype(bool)]

    def energy_map(self) -> dict[tuple[int, ...], float]:
        """Mapping site coordinate tuple -> on-site energy."""
        return {
            tuple(int(c) for c in site): float(e)
            for site, e in zip(self.occupied_sites(), self.energies)
        }

    def is_occupied(self, site: tuple[int, ...]) -> bool:
        return tuple(site) in self.energy_map()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DisorderRealization):
            return NotImplemented
        return (
            self.params == other.params
            and self.seed == other.seed
            and np.array_equal(self.occupancy, other.occupancy)
            and np.array_equal(self.energies, other.energies)
        )

    def __hash__(self) -> int:
        return hash(
            (self.params, self.seed, self.occupancy.tobytes(), self.energies.tobytes())
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": REALIZATION_SCHEMA,
            "params": self.params.to_dict(),
            "seed": self.seed,
            "occupied_sites": [[int(c) for c in s] for s in self.occupied_sites()],
            "energies": [float(e) for e in self.energies],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "DisorderRealization":
        if d.get("schema") != REALIZATION_SCHEMA:
            raise ConfigurationError(f"unsupported realization schema {d.get('schema')!r}")
        params = ModelParams.from_dict(d["params"])
        sites = box_site_array(params)
        index = {tuple(int(c) for c in s): i for i, s in enumerate(sites)}
        occupancy = np.zeros(params.n_box_sites, dtype=np.uint8)
        order = []
        for s in d["occupied_sites"]:
            key = tuple(int(c) for c in s)
            if key not in index:
                raise ConfigurationError(f"site {key} lies outside the box")
            occupancy[index[key]] = 1
            order.append(index[key])
        if sorted(order) != order:
            raise ConfigurationError("occupied sites must be in canonical order")
        energies = np.asarray(d["energies"], dtype=np.float64)
        return cls(params=params, occupancy=occupancy, energies=energies, seed=d["seed"])

    @classmethod
    def from_json(cls, text: str) -> "DisorderRealization":
        return cls.from_dict(json.loads(text))


def sample_disorder(params: ModelParams, seed: int) -> DisorderRealization:
    """Draw a disorder realization reproducibly from ``(params, seed)``.

    Occupancies are Bernoulli(``impurity_density``) i.i.d. across sites;
    energies are Uniform over ``delta``, i.i.d. and independent of the
    occupancies. Both are derived from one PCG64 stream: the first
    ``n_box_sites`` uniforms decide occupancy, the next ``n_box_sites``
    give each site its (potential) energy, of which only the occupied
    entries are kept. Regeneration from the same ``(params, seed)`` is
    bit-identical.

    Raises
    ------
    ConfigurationError
        If ``params`` fails validation (validated at construction time).
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    n = params.n_box_sites
    u_occ = rng.random(n)
    u_energy = rng.random(n)
    occupancy = (u_occ < params.impurity_density).astype(np.uint8)
    lo, hi = params.delta
    all_energies = lo + (hi - lo) * u_energy
    energies = all_energies[occupancy.astype(bool)]
    return DisorderRealization(
        params=params, occupancy=occupancy, energies=energies, seed=int(seed)
    )


def translate(omega: DisorderRealization, a: tuple[int, ...] | np.ndarray) -> DisorderRealization:
    """Translate a realization by the lattice vector ``a`` with wrap-around.

    The translated realization has ``s'_x = s_{x-a}`` and
    ``eps'_x = eps_{x-a}`` with coordinates wrapped periodically inside the
    box. Translations compose: ``translate(translate(w, a), b) ==
    translate(w, a + b)`` (mod box), and ``a = 0`` is the identity.

    The result carries ``seed=None``: it is not directly regenerable from a
    sampling seed.
    """
    a = np.asarray(a, dtype=np.int64)
    if a.shape != (omega.params.dim,):
        raise ConfigurationError("translation vector must have one entry per dimension")
    box = omega.params.box
    occ_grid = omega.occupancy.reshape(box)
    # Full energy grid with NaN on empty sites, so the roll moves both fields.
    energy_grid = np.full(box, np.nan)
    energy_grid[occ_grid.astype(bool)] = omega.energies
    shift = tuple(int(s) for s in a)
    occ_rolled = np.roll(occ_grid, shift, axis=tuple(range(len(box))))
    energy_rolled = np.roll(energy_grid, shift, axis=tuple(range(len(box))))
    occupancy = occ_rolled.ravel()
    energies = energy_rolled.ravel()[occupancy.astype(bool)]
    return DisorderRealization(
        params=omega.params,
        occupancy=occupancy.astype(np.uint8),
        energies=energies,
        seed=None,
    )


def normalization_Z(omega: DisorderRealization) -> float:
    """Hopping normalization ``Z`` of a realization.

    ``full_lattice`` mode sums ``exp(-|m|/r_loc)`` over every nonzero site
    ``m`` of the centered box; it depends only on the parameters and is
    exactly translation invariant. ``realized_origin`` mode sums over the
    occupied sites of ``omega`` (the origin contributes 1 when occupied)
    and raises :class:`DegenerateNormalizationError` when nothing is
    occupied.
    """
    params = omega.params
    sites = box_site_array(params)
    origin = np.zeros(params.dim, dtype=np.int64)
    if params.z_mode == "full_lattice":
        dist = params.distance(sites, origin)
        nonzero = dist > 0
        return float(np.sum(np.exp(-dist[nonzero] / params.r_loc)))
    occupied = omega.occupied_sites()
    if len(occupied) == 0:
        raise DegenerateNormalizationError(
            "realized_origin normalization over an empty impurity set"
        )
    dist = params.distance(occupied, origin)
    return float(np.sum(np.exp(-dist / params.r_loc)))
