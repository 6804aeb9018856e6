"""Equilibrium state, its GNS geometry, and the explicit eigenbasis.

The equilibrium state of a realization is the product Fermi-Dirac state

    rho(A) = tr(e^{-beta F} A) / tr(e^{-beta F}),
    rho(n_x) = f_x = 1 / (1 + e^{beta (eps_x - mu)}),

a faithful product state over the occupied sites. :func:`state_eval`
computes it along two independent paths — the per-site product formula
and the normalized trace — and insists they agree, so every downstream
expectation is double-checked at the source.

The GNS inner product is ``<A, B> = rho(A^dag B)``. An explicit
orthonormal basis of the (finite-dimensional) GNS space is indexed by
triples of disjoint site sets ``(X, Y, Z)``:

    e_{X,Y,Z} = b_X^dag b_Y sigma_Z,

with ``b_X^dag`` a decreasing product of normalized creators, ``b_Y``
an increasing product of normalized annihilators, and ``sigma_Z`` a
product of centered occupation flips. The single-site factors are

    b_x       = a_x / sqrt(f_x),
    b_x^dag   = a_x^dag / sqrt(1 - f_x),
    sigma_x   = e^{beta u_x / 2} n_x - e^{-beta u_x / 2} (1 - n_x),

with ``u_x = eps_x - mu``; each has exactly unit GNS norm, ``sigma_x``
has mean zero, and the 4^n basis elements form an exactly orthonormal
family (the normalizers agree with the weak-coupling expressions
``e^{-beta u^-/2} a_x`` up to the common factor ``sqrt(1 + e^{-beta
|u|})``, which restores exact unit norm at every temperature).

Basis elements are encoded as base-4 integers: digit ``k`` (for site
rank ``k``) is 0 when the site is absent, 1 for ``X``, 2 for ``Y``, 3
for ``Z``; the vacuum triple ``(0,0,0)`` is index 0 and represents the
identity, whose GNS vector spans the expected kernel of the
dissipator.

The modular flow acts diagonally on monomials: a word in creators and
annihilators is an eigenvector of the modular operator power with the
scalar :func:`modular_action` returns. :func:`kms_check` evaluates the
analytic-continuation form of the equilibrium condition,
``rho(A B) = rho(alpha_{-i beta}(B) A)``, which the product state
satisfies identically. :func:`dirichlet_form` is the graded Dirichlet
(energy) form of a catalogue,

    Q(A, B) = (1/2) sum_gamma rho([L_gamma, A]_g^dag [L_gamma, B]_g).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit

from .errors import ConsistencyError, SiteError, SizeError
from .fock import (
    FockOperator,
    FockSpace,
    annihilator,
    creator,
    free_energy_diagonal,
    graded_commutator,
    heisenberg_evolve,
    identity,
    number_op,
)
from .jumps import JumpCatalogue, build_jump_operator

__all__ = [
    "GNS_SITE_CAP",
    "COORDS_SITE_LIMIT",
    "equilibrium_weights",
    "state_eval",
    "inner_product",
    "gns_norm",
    "build_b",
    "build_b_dagger",
    "build_sigma",
    "GnsBasisElement",
    "GnsBasis",
    "enumerate_basis",
    "GnsVector",
    "to_gns_coords",
    "reconstruct",
    "modular_action",
    "kms_check",
    "dirichlet_form",
]

GNS_SITE_CAP = 7
COORDS_SITE_LIMIT = 6

_STATE_TOL = 1e-12


def _site_shifts(omega, space: FockSpace) -> np.ndarray:
    """Per-site energy shifts ``u_x = eps_x - mu`` in rank order."""
    emap = omega.energy_map()
    mu = omega.params.mu
    out = np.empty(space.n)
    for k, site in enumerate(space.sites):
        if site not in emap:
            raise SiteError(f"site {site} is not occupied in this realization")
        out[k] = emap[site] - mu
    return out


def equilibrium_weights(omega, space: FockSpace) -> np.ndarray:
    """Diagonal of the equilibrium density matrix in the bitmask basis.

    Computed by the per-site product formula with occupation
    probabilities ``f_x = expit(-beta u_x)``; strictly positive
    (faithful state) and normalized to sum 1.
    """
    beta = omega.params.beta
    shifts = _site_shifts(omega, space)
    f = expit(-beta * shifts)
    weights = np.ones(1)
    for k in range(space.n):
        weights = np.kron(np.array([1.0 - f[k], f[k]]), weights)
    return weights


def state_eval(omega, a: FockOperator) -> complex:
    """Equilibrium expectation ``rho(A)``, evaluated along two paths.

    Path (a) is the product formula (per-site Fermi factors), path (b)
    the normalized trace against ``e^{-beta F}``. Their difference must
    stay within ``1e-12`` (relative to the observable's size) or a
    :class:`ConsistencyError` is raised; the trace-path value is
    returned.
    """
    space = a.space
    diag = a.dense().diagonal() if not a.is_sparse() else np.asarray(
        a.matrix.diagonal()
    )
    # Path (a): product formula.
    val_a = complex(np.dot(equilibrium_weights(omega, space), diag))
    # Path (b): normalized trace, with an overflow-safe shift.
    beta = omega.params.beta
    f_diag = free_energy_diagonal(omega, space)
    log_w = -beta * f_diag
    log_w -= log_w.max()
    w = np.exp(log_w)
    val_b = complex(np.dot(w, diag) / w.sum())
    scale = max(1.0, float(np.abs(diag).max()) if diag.size else 1.0)
    if abs(val_a - val_b) > _STATE_TOL * scale:
        raise ConsistencyError(
            f"state evaluation paths disagree: product {val_a} vs trace {val_b}"
        )
    return val_b


def inner_product(omega, a: FockOperator, b: FockOperator) -> complex:
    """GNS inner product ``<A, B> = rho(A^dag B)``."""
    return state_eval(omega, a.adjoint() @ b)


def gns_norm(omega, a: FockOperator) -> float:
    """GNS norm ``sqrt(rho(A^dag A))``."""
    return float(np.sqrt(max(inner_product(omega, a, a).real, 0.0)))


# -- normalized single-site factors --------------------------------------------


def build_b(omega, space: FockSpace, site: Sequence[int]) -> FockOperator:
    """Normalized annihilator ``b_x = a_x / sqrt(f_x)``; unit GNS norm."""
    beta = omega.params.beta
    k = space.rank(site)
    u = _site_shifts(omega, space)[k]
    # 1/sqrt(f) = sqrt(1 + e^{beta u}), via a stable softplus.
    factor = float(np.exp(0.5 * np.logaddexp(0.0, beta * u)))
    return factor * annihilator(space, site)


def build_b_dagger(omega, space: FockSpace, site: Sequence[int]) -> FockOperator:
    """Normalized creator ``b_x^dag = a_x^dag / sqrt(1 - f_x)``; unit GNS norm."""
    beta = omega.params.beta
    k = space.rank(site)
    u = _site_shifts(omega, space)[k]
    factor = float(np.exp(0.5 * np.logaddexp(0.0, -beta * u)))
    return factor * creator(space, site)


def build_sigma(omega, space: FockSpace, site: Sequence[int]) -> FockOperator:
    """Centered occupation flip ``sigma_x``; unit GNS norm, mean zero."""
    beta = omega.params.beta
    k = space.rank(site)
    u = _site_shifts(omega, space)[k]
    n = number_op(space, site)
    one = identity(space)
    return float(np.exp(beta * u / 2.0)) * n - float(np.exp(-beta * u / 2.0)) * (
        one - n
    )


# -- basis ----------------------------------------------------------------------


@dataclass(frozen=True)
class GnsBasisElement:
    """One basis triple ``(X, Y, Z)`` of pairwise disjoint site sets."""

    x_sites: tuple[tuple[int, ...], ...]
    y_sites: tuple[tuple[int, ...], ...]
    z_sites: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        for name in ("x_sites", "y_sites", "z_sites"):
            value = tuple(tuple(int(c) for c in s) for s in getattr(self, name))
            if list(value) != sorted(value):
                raise ValueError(f"{name} must be sorted")
            object.__setattr__(self, name, value)
        sets = [set(self.x_sites), set(self.y_sites), set(self.z_sites)]
        if len(sets[0] | sets[1] | sets[2]) != sum(len(s) for s in sets):
            raise ValueError("X, Y, Z must be pairwise disjoint")

    @property
    def is_identity(self) -> bool:
        return not (self.x_sites or self.y_sites or self.z_sites)

    def to_record(self) -> dict:
        return {
            "X": [list(s) for s in self.x_sites],
            "Y": [list(s) for s in self.y_sites],
            "Z": [list(s) for s in self.z_sites],
        }


class GnsBasis:
    """The full orthonormal GNS basis of a realization.

    Elements are ordered by their base-4 encoding (digit ``k`` of the
    index describes site rank ``k``: 0 absent, 1 in X, 2 in Y, 3 in Z),
    so index 0 is the identity element.
    """

    def __init__(self, omega, space: FockSpace, elements: tuple[GnsBasisElement, ...]):
        self.omega = omega
        self.space = space
        self.elements = elements

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def index_of(self, element: GnsBasisElement) -> int:
        digits = {}
        for s in element.x_sites:
            digits[self.space.rank(s)] = 1
        for s in element.y_sites:
            digits[self.space.rank(s)] = 2
        for s in element.z_sites:
            digits[self.space.rank(s)] = 3
        return sum(d * 4**k for k, d in digits.items())

    def element(self, index: int) -> GnsBasisElement:
        return self.elements[index]

    def operator(self, element: GnsBasisElement) -> FockOperator:
        """The operator ``b_X^dag b_Y sigma_Z`` of a basis element."""
        out = identity(self.space)
        for site in reversed(element.x_sites):
            out = out @ build_b_dagger(self.omega, self.space, site)
        for site in element.y_sites:
            out = out @ build_b(self.omega, self.space, site)
        for site in element.z_sites:
            out = out @ build_sigma(self.omega, self.space, site)
        return out

    @cached_property
    def _scale(self) -> np.ndarray:
        """GNS column scaling: vec index ``(i, j)`` carries ``sqrt(w_j)``."""
        w = equilibrium_weights(self.omega, self.space)
        return np.tile(np.sqrt(w), self.space.dim)

    @cached_property
    def matrix(self) -> np.ndarray:
        """Orthogonal matrix whose column ``e`` is the GNS vector of element ``e``.

        Column ``e`` is ``sqrt(w_j)-scaled vec`` of the element's
        operator; orthonormality of the basis makes this matrix
        orthogonal. Needs ``n <= COORDS_SITE_LIMIT``.
        """
        if self.space.n > COORDS_SITE_LIMIT:
            raise SizeError(
                f"GNS coordinate matrix needs n <= {COORDS_SITE_LIMIT} sites"
            )
        dim2 = self.space.dim**2
        out = np.empty((dim2, len(self.elements)))
        for idx, element in enumerate(self.elements):
            op = self.operator(element).dense()
            if np.abs(op.imag).max() > 0.0:
                raise ConsistencyError("basis operators must be real matrices")
            out[:, idx] = op.real.reshape(-1) * self._scale
        return out

    def gram(self) -> np.ndarray:
        """Gram matrix of the basis in the GNS inner product."""
        m = self.matrix
        return m.T @ m

    def to_json(self) -> str:
        records = [
            {"index": i, **e.to_record()} for i, e in enumerate(self.elements)
        ]
        return json.dumps(
            {"schema": "mottlind/gns-basis-v1", "elements": records}, sort_keys=True
        )


def enumerate_basis(omega, cap: int = GNS_SITE_CAP) -> GnsBasis:
    """Enumerate all 4^n basis triples of a realization.

    Raises :class:`SizeError` above the ``cap`` (default
    :data:`GNS_SITE_CAP`).
    """
    space = FockSpace.from_realization(omega)
    if space.n > cap:
        raise SizeError(f"{space.n} sites exceeds the GNS cap of {cap}")
    elements = []
    for index in range(4**space.n):
        xs, ys, zs = [], [], []
        rest = index
        for k in range(space.n):
            digit = rest & 3
            rest >>= 2
            if digit == 1:
                xs.append(space.sites[k])
            elif digit == 2:
                ys.append(space.sites[k])
            elif digit == 3:
                zs.append(space.sites[k])
        elements.append(GnsBasisElement(tuple(xs), tuple(ys), tuple(zs)))
    return GnsBasis(omega, space, tuple(elements))


# -- coordinates -----------------------------------------------------------------


@dataclass
class GnsVector:
    """Coefficients of a GNS vector in a :class:`GnsBasis`."""

    basis: GnsBasis
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        coeffs = np.ascontiguousarray(self.coeffs, dtype=np.complex128)
        if coeffs.shape != (len(self.basis),):
            raise ValueError("coefficient vector length must match the basis")
        self.coeffs = coeffs

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def to_json(self) -> str:
        payload = {
            "schema": "mottlind/gns-vector-v1",
            "coeffs": [[float(c.real), float(c.imag)] for c in self.coeffs],
        }
        return json.dumps(payload, sort_keys=True)


def to_gns_coords(a: FockOperator, basis: GnsBasis) -> GnsVector:
    """Expand an observable over the orthonormal GNS basis.

    ``coeffs[e] = <e, zeta(A)>``; by orthonormality the expansion is
    exact and Parseval holds: ``||coeffs||^2 = rho(A^dag A)``.
    """
    if a.space != basis.space:
        raise SiteError("observable lives on a different Fock space than the basis")
    v = a.dense().reshape(-1) * basis._scale
    return GnsVector(basis, basis.matrix.T @ v)


def reconstruct(vector: GnsVector) -> FockOperator:
    """Rebuild the observable from its GNS coordinates."""
    basis = vector.basis
    v = basis.matrix @ vector.coeffs
    mat = (v / basis._scale).reshape(basis.space.dim, basis.space.dim)
    return FockOperator(basis.space, mat, "mixed")


# -- modular structure / KMS ------------------------------------------------------


def modular_action(
    omega, word: Iterable[tuple[Sequence[int], bool]], power: complex
) -> complex:
    """Eigenvalue of the modular power on a creation/annihilation monomial.

    A word ``[(x, dagger), ...]`` is an eigenvector of the modular flow;
    the returned scalar is ``exp(power * beta * sum_k (+-)(eps_k - mu))``
    with ``+`` for creators and ``-`` for annihilators. ``power`` may be
    complex (purely imaginary powers give the unit-modulus unitary
    flow).
    """
    emap = omega.energy_map()
    beta = omega.params.beta
    mu = omega.params.mu
    total = 0.0
    for site, dagger in word:
        key = tuple(int(c) for c in site)
        if key not in emap:
            raise SiteError(f"site {key} is not occupied in this realization")
        total += (1.0 if dagger else -1.0) * (emap[key] - mu)
    return complex(np.exp(power * beta * total))


def kms_check(omega, a: FockOperator, b: FockOperator) -> float:
    """Deviation ``|rho(AB) - rho(alpha_{-i beta}(B) A)|`` of the KMS identity."""
    beta = omega.params.beta
    lhs = state_eval(omega, a @ b)
    evolved = heisenberg_evolve(omega, b, -1j * beta)
    rhs = state_eval(omega, evolved @ a)
    return abs(lhs - rhs)


def dirichlet_form(
    catalogue: JumpCatalogue,
    a: FockOperator,
    b: FockOperator,
    parts: frozenset[str] | set[str] = frozenset({"kin", "star"}),
) -> complex:
    """Graded Dirichlet form ``Q(A, B)`` of a catalogue.

    ``Q(A, B) = (1/2) sum_gamma rho([L_gamma, A]_g^dag [L_gamma, B]_g)``
    over the selected jump families; agrees with ``rho(A^dag D(B))``
    and ``rho(D(A)^dag B)`` for the matching dissipator.
    """
    omega = catalogue.omega
    space = a.space
    total = 0.0 + 0.0j
    for jump in catalogue.jumps:
        family = "kin" if jump.kind == "hop" else "star"
        if family not in parts:
            continue
        op = build_jump_operator(space, jump)
        la = graded_commutator(op, a)
        lb = graded_commutator(op, b)
        total += state_eval(omega, la.adjoint() @ lb)
    return 0.5 * total
