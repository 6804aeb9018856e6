"""Spectral analysis of the generator on the equilibrium (GNS) space.

In the orthonormal basis ``e_{X,Y,Z} = b_X^dag b_Y sigma_Z`` the
dissipative generator becomes a real symmetric positive-semidefinite
matrix; :func:`assemble` builds it along two independent routes and
cross-checks them. The reservoir part alone is exactly diagonal with
eigenvalues

    gamma_{X,Y,Z} = sum_{x in X u Y} gamma_x + 2 sum_{z in Z} gamma_z,
    gamma_x = (rate_out(x) + rate_in(x)) / 2,

(:func:`star_eigenvalue`), which pins the spectral gap from below:
every basis element except the identity carries at least one
``gamma_x >= gamma_star / 2``. The hop part is positive semidefinite,
so the gap of the full generator is bounded by the reservoir floor.

:func:`kernel_and_gap` verifies that the kernel is exactly the span of
the identity vector and reports the gap; :func:`restrict_to_K` exhibits
the invariant block spanned by the pure-``sigma`` elements (the
commutative occupation algebra with the mean removed), whose spectrum
sits above ``gamma_star``; :func:`return_to_equilibrium` turns the gap
into the exponential convergence estimate

    |tr(rho_tilde T_t(A)) - rho(A)| <= C e^{-gap t},
    C = ||zeta(D) - zeta(1)|| ||zeta(A) - rho(A) zeta(1)||,

for any initial diagonal density ``rho_tilde`` with relative density
``D = rho_tilde / rho`` and checks it pointwise on a time grid.

The coherent part is diagonal in the same basis
(:func:`coherent_diagonal`), with purely imaginary eigenvalue
``i (sum_X u_x - sum_Y u_y)``; :func:`full_generator_matrix` returns
the complex matrix of the complete generator.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, ConsistencyError
from .fock import FockOperator
from .gns import GnsBasis, GnsBasisElement, enumerate_basis, to_gns_coords
from .jumps import JumpCatalogue
from .lindblad import (
    GeneratorSpec,
    apply_generator,
    gns_symmetric_dissipator,
    hamiltonian_phase_diagonal,
)

__all__ = [
    "ASSEMBLY_TOL",
    "KERNEL_THRESHOLD",
    "GnsGeneratorMatrix",
    "Spectrum",
    "GapReport",
    "KRestriction",
    "ReturnReport",
    "assemble",
    "site_gamma",
    "star_eigenvalue",
    "coherent_diagonal",
    "full_generator_matrix",
    "spectrum",
    "kernel_and_gap",
    "restrict_to_K",
    "return_to_equilibrium",
]

ASSEMBLY_TOL = 1e-10
KERNEL_THRESHOLD = 1e-10
_EXHAUSTIVE_LIMIT = 256
_MIN_SAMPLED_COLUMNS = 64


@dataclass(frozen=True, eq=False)
class GnsGeneratorMatrix:
    """The generator matrix in the orthonormal GNS basis.

    Real, symmetric (to ``1e-12``), positive semidefinite (eigenvalues
    above ``-1e-10``); both properties are verified on construction.
    """

    catalogue: JumpCatalogue
    basis: GnsBasis
    parts: frozenset[str]
    matrix: np.ndarray
    check_deviation: float
    checked_columns: int

    def __post_init__(self) -> None:
        m = self.matrix
        if m.shape != (len(self.basis), len(self.basis)):
            raise ConfigurationError("matrix shape must match the basis size")
        asym = float(np.abs(m - m.T).max()) if m.size else 0.0
        if asym > 1e-12:
            raise ConsistencyError(
                f"generator matrix asymmetry {asym:.3e} exceeds 1e-12"
            )
        object.__setattr__(self, "matrix", 0.5 * (m + m.T))

    @cached_property
    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        eigvals, eigvecs = np.linalg.eigh(self.matrix)
        if eigvals.size and eigvals[0] < -1e-10:
            raise ConsistencyError(
                f"generator matrix has eigenvalue {eigvals[0]:.3e} below -1e-10"
            )
        return eigvals, eigvecs

    @property
    def dim(self) -> int:
        return len(self.basis)


def assemble(
    catalogue: JumpCatalogue,
    parts: frozenset[str] | set[str] = frozenset({"kin", "star"}),
    check: str = "auto",
    check_seed: int = 0,
) -> GnsGeneratorMatrix:
    """Assemble the generator matrix in the GNS basis, twice.

    Route (a) conjugates the vectorized dissipator into the basis;
    route (b) applies the generator to basis elements directly
    (operator products, no superoperator) and projects. Columns are
    cross-checked exhaustively up to 256 basis elements, otherwise on
    at least 64 sampled columns (``check`` forces ``"exhaustive"``,
    ``"sampled"``, or ``"none"``); any column deviation above ``1e-10``
    raises :class:`ConsistencyError`.
    """
    if check not in ("auto", "exhaustive", "sampled", "none"):
        raise ConfigurationError(
            "check must be one of auto/exhaustive/sampled/none"
        )
    spec = GeneratorSpec(catalogue, parts=frozenset(parts))
    basis = enumerate_basis(catalogue.omega)
    b = basis.matrix
    dhat = gns_symmetric_dissipator(spec)
    matrix = b.T @ dhat @ b

    n_elements = len(basis)
    if check == "auto":
        check = "exhaustive" if n_elements <= _EXHAUSTIVE_LIMIT else "sampled"
    if check == "none" or n_elements == 0:
        columns: list[int] = []
    elif check == "exhaustive":
        columns = list(range(n_elements))
    else:
        rng = np.random.default_rng(check_seed)
        k = min(n_elements, _MIN_SAMPLED_COLUMNS)
        columns = sorted(rng.choice(n_elements, size=k, replace=False).tolist())

    worst = 0.0
    scale = basis._scale
    for j in columns:
        op = basis.operator(basis.element(j))
        image = apply_generator(spec, op).dense()
        if np.abs(image.imag).max() > 1e-12:
            raise ConsistencyError("generator image of a basis element is not real")
        col = b.T @ (image.real.reshape(-1) * scale)
        dev = float(np.abs(col - matrix[:, j]).max())
        worst = max(worst, dev)
        if dev > ASSEMBLY_TOL:
            raise ConsistencyError(
                f"assembly routes disagree on column {j}: deviation {dev:.3e}"
            )
    return GnsGeneratorMatrix(
        catalogue=catalogue,
        basis=basis,
        parts=frozenset(parts),
        matrix=matrix,
        check_deviation=worst,
        checked_columns=len(columns),
    )


def site_gamma(catalogue: JumpCatalogue, site) -> float:
    """Reservoir decay rate ``gamma_x = (rate_out + rate_in) / 2`` of a site."""
    key = tuple(int(c) for c in site)
    r_out = catalogue.get(("out", (key,))).rate if ("out", (key,)) in catalogue else 0.0
    r_in = catalogue.get(("in", (key,))).rate if ("in", (key,)) in catalogue else 0.0
    return 0.5 * (r_out + r_in)


def star_eigenvalue(catalogue: JumpCatalogue, element: GnsBasisElement) -> float:
    """Reservoir eigenvalue of a basis element.

    ``sum_{x in X u Y} gamma_x + 2 sum_{z in Z} gamma_z``; the reservoir
    part of the generator is diagonal in the GNS basis with these
    values.
    """
    total = 0.0
    for site in element.x_sites + element.y_sites:
        total += site_gamma(catalogue, site)
    for site in element.z_sites:
        total += 2.0 * site_gamma(catalogue, site)
    return total


def coherent_diagonal(catalogue: JumpCatalogue, basis: GnsBasis | None = None) -> np.ndarray:
    """Frequencies of the coherent flow on the GNS basis.

    Element ``(X, Y, Z)`` is an eigenvector of the free evolution with
    phase ``e^{i t lambda}``, ``lambda = sum_X u_x - sum_Y u_y``; the
    coherent part of the generator is ``i`` times this diagonal.
    """
    if basis is None:
        basis = enumerate_basis(catalogue.omega)
    emap = catalogue.omega.energy_map()
    mu = catalogue.omega.params.mu
    out = np.zeros(len(basis))
    for idx, element in enumerate(basis):
        out[idx] = sum(emap[s] - mu for s in element.x_sites) - sum(
            emap[s] - mu for s in element.y_sites
        )
    return out


def full_generator_matrix(gm: GnsGeneratorMatrix) -> np.ndarray:
    """Complex matrix of the complete generator (dissipator plus coherent part).

    The coherent part is the skew (purely imaginary) diagonal
    ``i lambda_e``; it commutes with the symmetric dissipative part.
    """
    lam = coherent_diagonal(gm.catalogue, gm.basis)
    return gm.matrix.astype(complex) + 1j * np.diag(lam)


# -- spectrum, kernel, gap -----------------------------------------------------------


@dataclass(frozen=True)
class Spectrum:
    """Ascending eigenvalues and eigenvectors of a generator matrix."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["index", "eigenvalue", "residual_tolerance"])
        for k, val in enumerate(self.eigenvalues):
            writer.writerow([k, f"{val:.16e}", "1e-09"])
        return buf.getvalue()


def spectrum(gm: GnsGeneratorMatrix) -> Spectrum:
    """Eigendecomposition of the generator matrix with residual control.

    Every eigenpair must satisfy ``||M v - lambda v|| <= 1e-9``.
    """
    eigvals, eigvecs = gm.eig
    residual = 0.0
    if eigvals.size:
        r = gm.matrix @ eigvecs - eigvecs * eigvals[None, :]
        residual = float(np.linalg.norm(r, axis=0).max())
    if residual > 1e-9:
        raise ConsistencyError(f"eigenpair residual {residual:.3e} exceeds 1e-9")
    return Spectrum(eigenvalues=eigvals, eigenvectors=eigvecs, residual=residual)


@dataclass(frozen=True)
class GapReport:
    """Kernel structure and spectral gap of a generator matrix."""

    kernel_dim: int
    unique: bool
    identity_overlap: float
    gap: float
    star_floor: float
    threshold: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": "mottlind/gap-report-v1",
                "kernel_dim": self.kernel_dim,
                "unique": self.unique,
                "identity_overlap": self.identity_overlap,
                "identity_overlap_tolerance": 1e-8,
                "gap": self.gap,
                "star_floor": self.star_floor,
                "threshold": self.threshold,
            },
            sort_keys=True,
        )


def kernel_and_gap(
    gm: GnsGeneratorMatrix, threshold: float = KERNEL_THRESHOLD
) -> GapReport:
    """Kernel dimension, identity overlap, and spectral gap.

    Eigenvalues below ``threshold`` count as kernel. When the kernel is
    simple it must be spanned by the identity vector (squared overlap
    within ``1e-8`` of one); a non-simple kernel is reported with
    ``unique=False`` rather than hidden.
    """
    eigvals, eigvecs = gm.eig
    kernel = eigvals < threshold
    kernel_dim = int(kernel.sum())
    above = eigvals[~kernel]
    gap = float(above[0]) if above.size else math.inf
    if kernel_dim and gm.dim:
        e0 = np.zeros(gm.dim)
        e0[0] = 1.0  # the identity element's coordinate vector
        overlap = float(np.linalg.norm(eigvecs[:, kernel].T @ e0))
    else:
        overlap = 0.0
    gamma_star = gm.catalogue.omega.params.gamma_star
    return GapReport(
        kernel_dim=kernel_dim,
        unique=kernel_dim == 1,
        identity_overlap=overlap,
        gap=gap,
        star_floor=gamma_star / 2.0,
        threshold=threshold,
    )


# -- the commutative invariant block ---------------------------------------------------


@dataclass(frozen=True)
class KRestriction:
    """The generator restricted to the pure-``sigma`` (occupation) block."""

    indices: tuple[int, ...]
    matrix: np.ndarray
    coupling: float
    min_eigenvalue: float


def restrict_to_K(gm: GnsGeneratorMatrix) -> KRestriction:
    """Restrict the generator to the span of the ``sigma_Z`` elements, Z nonempty.

    That block (the centered commutative occupation algebra) is
    invariant: the coupling to every other basis element must vanish to
    ``1e-10``. Its smallest eigenvalue sits above ``gamma_star`` (each
    ``sigma_z`` carries ``2 gamma_z``, and the hop part is positive
    semidefinite on the block).
    """
    indices = tuple(
        idx
        for idx, element in enumerate(gm.basis)
        if not element.x_sites and not element.y_sites and element.z_sites
    )
    if not indices:
        return KRestriction(indices=(), matrix=np.zeros((0, 0)), coupling=0.0,
                            min_eigenvalue=math.inf)
    inside = np.asarray(indices)
    outside = np.asarray(
        [i for i in range(gm.dim) if i not in set(indices)], dtype=int
    )
    block = gm.matrix[np.ix_(inside, inside)]
    coupling = float(np.abs(gm.matrix[np.ix_(inside, outside)]).max())
    if coupling > 1e-10:
        raise ConsistencyError(
            f"occupation block couples to its complement at {coupling:.3e}"
        )
    min_eig = float(np.linalg.eigvalsh(block)[0])
    return KRestriction(
        indices=indices, matrix=block, coupling=coupling, min_eigenvalue=min_eig
    )


# -- return to equilibrium ---------------------------------------------------------------


@dataclass(frozen=True)
class ReturnReport:
    """Pointwise verification of the exponential return-to-equilibrium bound."""

    times: np.ndarray
    deviations: np.ndarray
    bounds: np.ndarray
    constant: float
    gap: float
    all_ok: bool

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "deviation", "bound", "ok"])
        for t, dev, bnd in zip(self.times, self.deviations, self.bounds):
            writer.writerow([f"{t:.16e}", f"{dev:.16e}", f"{bnd:.16e}",
                             int(dev <= bnd)])
        return buf.getvalue()


def return_to_equilibrium(
    gm: GnsGeneratorMatrix,
    observable: FockOperator,
    rho_tilde: np.ndarray,
    t_grid,
) -> ReturnReport:
    """Check ``|tr(rho_tilde T_t(A)) - rho(A)| <= C e^{-gap t}`` on a grid.

    ``rho_tilde`` is an initial diagonal density: a nonnegative vector
    over the Fock basis summing to one. The constant is
    ``C = ||zeta(D) - zeta(1)|| ||zeta(A) - rho(A) zeta(1)||`` with
    ``D = rho_tilde / rho`` the relative density; the comparison allows
    a relative slack of ``1e-8``. The deviation is evaluated in GNS
    coordinates and cross-checked against a direct trace on the first
    grid point.
    """
    basis = gm.basis
    space = basis.space
    rho_tilde = np.asarray(rho_tilde, dtype=float)
    if rho_tilde.shape != (space.dim,):
        raise ConfigurationError(
            f"rho_tilde must be a vector of length {space.dim}"
        )
    if np.any(rho_tilde < -1e-15):
        raise ConfigurationError("rho_tilde must be entrywise nonnegative")
    if abs(rho_tilde.sum() - 1.0) > 1e-12:
        raise ConfigurationError("rho_tilde must sum to one")
    times = np.asarray(list(t_grid), dtype=float)
    if times.size == 0 or np.any(times < 0) or np.any(np.diff(times) <= 0):
        raise ConfigurationError("t_grid must be strictly increasing and nonnegative")

    from .gns import equilibrium_weights  # deferred to avoid cycles at import

    w = equilibrium_weights(gm.catalogue.omega, space)
    relative = rho_tilde / w
    v = to_gns_coords(
        FockOperator(space, np.diag(relative), "even"), basis
    ).coeffs.real
    if abs(v[0] - 1.0) > 1e-10:
        raise ConsistencyError("relative density has a bad identity component")
    coords_a = to_gns_coords(observable, basis).coeffs
    mean_a = coords_a[0]

    v_perp = v.copy()
    v_perp[0] = 0.0
    a_perp = coords_a.copy()
    a_perp[0] = 0.0
    constant = float(np.linalg.norm(v_perp) * np.linalg.norm(a_perp))

    report = kernel_and_gap(gm)
    gap = report.gap

    eigvals, eigvecs = gm.eig
    va = eigvecs.T @ a_perp
    vv = eigvecs.T @ v_perp
    deviations = np.empty(times.size)
    for k, t in enumerate(times):
        decay = np.exp(-t * np.clip(eigvals, 0.0, None))
        deviations[k] = abs(np.dot(vv, decay * va))

    # Independent direct check at the first grid point.
    from .lindblad import semigroup_apply

    spec = GeneratorSpec(gm.catalogue, parts=gm.parts)
    evolved = semigroup_apply(spec, observable, float(times[0]))
    direct = abs(
        np.dot(rho_tilde, np.diag(evolved.dense())) - np.dot(w, np.diag(observable.dense()))
    )
    # mean via weights must match the coordinate mean
    if abs(mean_a - np.dot(w, np.diag(observable.dense()))) > 1e-10 * max(
        1.0, abs(mean_a)
    ):
        raise ConsistencyError("observable mean disagrees between routes")
    if abs(direct - deviations[0]) > 1e-8 * max(1.0, deviations[0]):
        raise ConsistencyError(
            f"GNS and direct deviations disagree: {deviations[0]} vs {direct}"
        )

    bounds = constant * np.exp(-gap * times) * (1.0 + 1e-8) + 1e-14
    return ReturnReport(
        times=times,
        deviations=deviations,
        bounds=bounds,
        constant=constant,
        gap=gap,
        all_ok=bool(np.all(deviations <= bounds)),
    )
