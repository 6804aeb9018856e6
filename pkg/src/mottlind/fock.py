"""Fermionic Fock-space layer over the realized impurity set.

The CAR algebra over the occupied sites ``L(s)`` of a disorder
realization is represented on ``C^(2^n)`` through a Jordan-Wigner
encoding. Basis states are occupation bitmasks: basis index ``m``
describes the configuration whose ``k``-th site (in canonical site
order) is occupied iff bit ``k`` of ``m`` is set; index 0 is the vacuum.
With site ranks ordered canonically, the annihilator of the rank-``k``
site acts as

    a_k |m> = (-1)^(popcount of occupied ranks below k) |m without bit k>

when bit ``k`` is set, and kills the state otherwise. The canonical
anticommutation relations
``{a_x, a_y} = 0``, ``{a_x, a_y^dag} = delta_xy``
hold exactly in floating point (all entries are 0 or +-1).

Every operator carries a parity ``degree`` under conjugation by the
parity operator ``G = prod_x (1 - 2 n_x)``: ``even`` (``GAG = A``),
``odd`` (``GAG = -A``), or ``mixed``. The graded commutator uses the
parity grading: ``[A, B]_g = AB - (-1)^(|A||B|) BA`` for definite
degrees, extended bilinearly through the even/odd decomposition
``A = (A + GAG)/2 + (A - GAG)/2`` for mixed arguments.

The free energy of a realization is the diagonal operator
``F = sum_x (eps_x - mu) n_x`` over its occupied sites, and the
Heisenberg evolution ``alpha_t(A) = e^{itF} A e^{-itF}`` is evaluated
exactly (``t`` may be complex, which is what the KMS condition at
``t = -i beta`` uses).

Matrices are dense ``numpy`` arrays for up to ``DENSE_SITE_LIMIT``
sites and ``scipy.sparse`` CSR above that; the two storage forms are
interchangeable through the same :class:`FockOperator` interface.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .errors import SiteError, SizeError
from .model import DisorderRealization

__all__ = [
    "DENSE_SITE_LIMIT",
    "MAX_SITES",
    "FockSpace",
    "FockOperator",
    "annihilator",
    "creator",
    "number_op",
    "identity",
    "parity_op",
    "monomial",
    "graded_commutator",
    "classify_degree",
    "free_energy",
    "free_energy_diagonal",
    "heisenberg_evolve",
    "operator_norm",
]

DENSE_SITE_LIMIT = 7
MAX_SITES = 24

Matrix = Union[np.ndarray, sp.spmatrix]

_DEGREES = ("even", "odd", "mixed")


@dataclass(frozen=True)
class FockSpace:
    """The Fock space over an ordered tuple of lattice sites.

    Attributes
    ----------
    sites : tuple of coordinate tuples
        The realized impurity sites in canonical (lexicographic) order;
        rank ``k`` in this tuple owns bit ``k`` of the basis index.
    """

    sites: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        sites = tuple(tuple(int(c) for c in s) for s in self.sites)
        if list(sites) != sorted(sites):
            raise SiteError("sites must be given in canonical (sorted) order")
        if len(set(sites)) != len(sites):
            raise SiteError("duplicate sites in Fock space")
        if len(sites) > MAX_SITES:
            raise SizeError(f"{len(sites)} sites exceeds the {MAX_SITES}-site cap")
        object.__setattr__(self, "sites", sites)

    @classmethod
    def from_realization(cls, omega: DisorderRealization) -> "FockSpace":
        return cls(tuple(tuple(int(c) for c in s) for s in omega.occupied_sites()))

    @property
    def n(self) -> int:
        return len(self.sites)

    @property
    def dim(self) -> int:
        return 1 << self.n

    @property
    def dense(self) -> bool:
        return self.n <= DENSE_SITE_LIMIT

    def rank(self, site: Sequence[int]) -> int:
        """Rank of a site in the canonical order; raises SiteError if absent."""
        key = tuple(int(c) for c in site)
        try:
            return self.sites.index(key)
        except ValueError:
            raise SiteError(f"site {key} is not in this Fock space") from None

    def occupations(self, index: int) -> tuple[int, ...]:
        """Occupation numbers of basis state ``index``, one per site rank."""
        return tuple((index >> k) & 1 for k in range(self.n))


def _popcount(values: np.ndarray) -> np.ndarray:
    return np.bitwise_count(values)


def _empty_matrix(space: FockSpace) -> Matrix:
    if space.dense:
        return np.zeros((space.dim, space.dim), dtype=np.complex128)
    return sp.csr_matrix((space.dim, space.dim), dtype=np.complex128)


def _is_sparse(matrix: Matrix) -> bool:
    return sp.issparse(matrix)


@dataclass(frozen=True)
class FockOperator:
    """A matrix on a :class:`FockSpace` with parity bookkeeping.

    ``degree`` is ``"even"`` when conjugation by the parity operator
    fixes the matrix, ``"odd"`` when it negates it, ``"mixed"``
    otherwise. Arithmetic tracks degrees: products add parities mod 2,
    sums of unequal definite degrees become mixed.
    """

    space: FockSpace
    matrix: Matrix = field(repr=False)
    degree: str

    def __post_init__(self) -> None:
        if self.degree not in _DEGREES:
            raise ValueError(f"degree must be one of {_DEGREES}")
        m = self.matrix
        if m.shape != (self.space.dim, self.space.dim):
            raise ValueError("matrix shape does not match the Fock space dimension")
        if isinstance(m, np.ndarray):
            m = np.ascontiguousarray(m, dtype=np.complex128)
            m.setflags(write=False)
        elif not sp.isspmatrix_csr(m):
            m = sp.csr_matrix(m, dtype=np.complex128)
        object.__setattr__(self, "matrix", m)

    # -- storage ------------------------------------------------------------

    def dense(self) -> np.ndarray:
        """The matrix as a dense complex array."""
        if _is_sparse(self.matrix):
            return np.asarray(self.matrix.todense())
        return np.asarray(self.matrix)

    def is_sparse(self) -> bool:
        return _is_sparse(self.matrix)

    # -- algebra ------------------------------------------------------------

    def _combine_add_degree(self, other: "FockOperator") -> str:
        if self.degree == other.degree and self.degree != "mixed":
            return self.degree
        return "mixed"

    def __add__(self, other: "FockOperator") -> "FockOperator":
        self._check_space(other)
        return FockOperator(self.space, self.matrix + other.matrix,
                            self._combine_add_degree(other))

    def __sub__(self, other: "FockOperator") -> "FockOperator":
        self._check_space(other)
        return FockOperator(self.space, self.matrix - other.matrix,
                            self._combine_add_degree(other))

    def __mul__(self, scalar: complex) -> "FockOperator":
        return FockOperator(self.space, self.matrix * scalar, self.degree)

    __rmul__ = __mul__

    def __neg__(self) -> "FockOperator":
        return self * (-1.0)

    def __matmul__(self, other: "FockOperator") -> "FockOperator":
        self._check_space(other)
        if "mixed" in (self.degree, other.degree):
            degree = "mixed"
        elif self.degree == other.degree:
            degree = "even"
        else:
            degree = "odd"
        return FockOperator(self.space, self.matrix @ other.matrix, degree)

    def adjoint(self) -> "FockOperator":
        if _is_sparse(self.matrix):
            return FockOperator(self.space, self.matrix.getH().tocsr(), self.degree)
        return FockOperator(self.space, self.matrix.conj().T, self.degree)

    def trace(self) -> complex:
        if _is_sparse(self.matrix):
            return complex(self.matrix.diagonal().sum())
        return complex(np.trace(self.matrix))

    def frobenius(self) -> float:
        if _is_sparse(self.matrix):
            return float(np.sqrt(np.sum(np.abs(self.matrix.data) ** 2)))
        return float(np.linalg.norm(self.matrix))

    def _check_space(self, other: "FockOperator") -> None:
        if self.space != other.space:
            raise SiteError("operators live on different Fock spaces")

    # -- serialization --------------------------------------------------------

    def to_json(self) -> str:
        """Portable dump: dimensions, site list, degree, nonzero triplets."""
        coo = sp.coo_matrix(self.matrix)
        entries = [
            [int(i), int(j), float(v.real), float(v.imag)]
            for i, j, v in zip(coo.row, coo.col, coo.data)
        ]
        entries.sort()
        payload: dict[str, Any] = {
            "schema": "mottlind/operator-v1",
            "dims": [self.space.dim, self.space.dim],
            "sites": [list(s) for s in self.space.sites],
            "degree": self.degree,
            "entries": entries,
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FockOperator":
        d = json.loads(text)
        space = FockSpace(tuple(tuple(s) for s in d["sites"]))
        rows, cols, vals = [], [], []
        for i, j, re, im in d["entries"]:
            rows.append(i)
            cols.append(j)
            vals.append(re + 1j * im)
        mat = sp.coo_matrix(
            (vals, (rows, cols)), shape=(space.dim, space.dim), dtype=np.complex128
        )
        matrix: Matrix = mat.toarray() if space.dense else mat.tocsr()
        return cls(space, matrix, d["degree"])


# -- elementary operators ----------------------------------------------------


def _jw_lowering(space: FockSpace, rank: int) -> Matrix:
    """Jordan-Wigner annihilator of the rank-``k`` site (bit ``k``)."""
    dim = space.dim
    bit = 1 << rank
    states = np.arange(dim, dtype=np.int64)
    occupied = states[(states & bit) != 0]
    targets = occupied ^ bit
    signs = 1.0 - 2.0 * (_popcount(occupied & (bit - 1)) & 1).astype(np.float64)
    if space.dense:
        mat = np.zeros((dim, dim), dtype=np.complex128)
        mat[targets, occupied] = signs
        return mat
    return sp.csr_matrix(
        (signs.astype(np.complex128), (targets, occupied)), shape=(dim, dim)
    )


def annihilator(space: FockSpace, site: Sequence[int]) -> FockOperator:
    """The annihilation operator ``a_x``; odd degree.

    Raises :class:`SiteError` when ``site`` is not one of the realized
    (occupied) impurity sites the space was built from.
    """
    return FockOperator(space, _jw_lowering(space, space.rank(site)), "odd")


def creator(space: FockSpace, site: Sequence[int]) -> FockOperator:
    """The creation operator ``a_x^dag``; odd degree."""
    return annihilator(space, site).adjoint()


def number_op(space: FockSpace, site: Sequence[int]) -> FockOperator:
    """The number operator ``n_x = a_x^dag a_x``; even, diagonal 0/1."""
    rank = space.rank(site)
    bit = 1 << rank
    diag = ((np.arange(space.dim) & bit) != 0).astype(np.complex128)
    if space.dense:
        return FockOperator(space, np.diag(diag), "even")
    return FockOperator(space, sp.diags(diag, format="csr"), "even")


def identity(space: FockSpace) -> FockOperator:
    if space.dense:
        return FockOperator(space, np.eye(space.dim, dtype=np.complex128), "even")
    return FockOperator(space, sp.identity(space.dim, dtype=np.complex128, format="csr"),
                        "even")


def parity_op(space: FockSpace) -> FockOperator:
    """The parity operator ``G = prod_x (1 - 2 n_x)``; diagonal +-1."""
    diag = 1.0 - 2.0 * (_popcount(np.arange(space.dim, dtype=np.int64)) & 1)
    diag = diag.astype(np.complex128)
    if space.dense:
        return FockOperator(space, np.diag(diag), "even")
    return FockOperator(space, sp.diags(diag, format="csr"), "even")


def monomial(space: FockSpace, word: Iterable[tuple[Sequence[int], bool]]) -> FockOperator:
    """Ordered product of creation/annihilation operators.

    ``word`` is a sequence of ``(site, dagger)`` pairs, applied left to
    right as written: ``[(x, True), (y, False)]`` gives ``a_x^dag a_y``.
    The empty word is the identity.
    """
    out = identity(space)
    for site, dagger in word:
        factor = creator(space, site) if dagger else annihilator(space, site)
        out = out @ factor
    return out


# -- grading -----------------------------------------------------------------


def classify_degree(space: FockSpace, matrix: Matrix, tol: float = 1e-12) -> str:
    """Classify a matrix as even/odd/mixed under parity conjugation."""
    g = parity_op(space).matrix
    conj = g @ matrix @ g
    scale = max(_norm_any(matrix), 1.0)
    if _norm_any(conj - matrix) <= tol * scale:
        return "even"
    if _norm_any(conj + matrix) <= tol * scale:
        return "odd"
    return "mixed"


def _norm_any(matrix: Matrix) -> float:
    if _is_sparse(matrix):
        return float(np.sqrt(np.sum(np.abs(matrix.data) ** 2))) if matrix.nnz else 0.0
    return float(np.linalg.norm(matrix))


def _parity_parts(a: FockOperator) -> list[tuple[int, FockOperator]]:
    """Decompose into definite-parity parts as ``[(parity_bit, part), ...]``."""
    if a.degree == "even":
        return [(0, a)]
    if a.degree == "odd":
        return [(1, a)]
    g = parity_op(a.space)
    conj = g @ a @ g
    even = (a + conj) * 0.5
    odd = (a - conj) * 0.5
    parts: list[tuple[int, FockOperator]] = []
    if even.frobenius() > 0.0:
        parts.append((0, FockOperator(a.space, even.matrix, "even")))
    if odd.frobenius() > 0.0:
        parts.append((1, FockOperator(a.space, odd.matrix, "odd")))
    return parts


def graded_commutator(a: FockOperator, b: FockOperator) -> FockOperator:
    """The graded commutator ``[A, B]_g = AB - (-1)^(|A||B|) BA``.

    Mixed-degree arguments are decomposed into their even/odd parts and
    the bracket is extended bilinearly; no error is raised for them.
    """
    a._check_space(b)
    total = _empty_matrix(a.space)
    degrees: set[str] = set()
    for pa, part_a in _parity_parts(a):
        for pb, part_b in _parity_parts(b):
            sign = -1.0 if (pa & pb) else 1.0
            term = part_a.matrix @ part_b.matrix - sign * (part_b.matrix @ part_a.matrix)
            total = total + term
            degrees.add("odd" if (pa ^ pb) else "even")
    degree = degrees.pop() if len(degrees) == 1 else "mixed"
    return FockOperator(a.space, total, degree)


# -- free energy and Heisenberg flow -----------------------------------------


def free_energy_diagonal(omega: DisorderRealization, space: FockSpace) -> np.ndarray:
    """Diagonal of ``F = sum_x (eps_x - mu) n_x`` in the bitmask basis."""
    emap = omega.energy_map()
    mu = omega.params.mu
    shifts = np.empty(space.n)
    for k, site in enumerate(space.sites):
        if site not in emap:
            raise SiteError(f"site {site} is not occupied in this realization")
        shifts[k] = emap[site] - mu
    states = np.arange(space.dim, dtype=np.int64)
    bits = (states[:, None] >> np.arange(space.n)[None, :]) & 1
    return bits @ shifts


def free_energy(omega: DisorderRealization, space: FockSpace) -> FockOperator:
    """The free-energy operator ``F = sum_x (eps_x - mu) n_x``; even, diagonal."""
    diag = free_energy_diagonal(omega, space).astype(np.complex128)
    if space.dense:
        return FockOperator(space, np.diag(diag), "even")
    return FockOperator(space, sp.diags(diag, format="csr"), "even")


def heisenberg_evolve(
    omega: DisorderRealization, a: FockOperator, t: complex
) -> FockOperator:
    """Exact Heisenberg flow ``alpha_t(A) = e^{itF} A e^{-itF}``.

    ``t`` may be complex; imaginary time ``t = -i beta`` realizes the
    analytic continuation the KMS condition refers to. Real ``t``
    preserves the Frobenius norm; the flow is a group in ``t`` and
    preserves the parity degree (``F`` is even).
    """
    diag = free_energy_diagonal(omega, a.space)
    left = np.exp(1j * t * diag)
    right = np.exp(-1j * t * diag)
    if a.is_sparse():
        evolved = sp.diags(left) @ a.matrix @ sp.diags(right)
        return FockOperator(a.space, evolved.tocsr(), a.degree)
    evolved = left[:, None] * a.dense() * right[None, :]
    return FockOperator(a.space, evolved, a.degree)


def operator_norm(a: FockOperator) -> float:
    """Spectral (operator) norm."""
    if a.is_sparse():
        if a.space.dim <= 2:
            return float(np.linalg.norm(a.dense(), ord=2))
        val = sp.linalg.svds(a.matrix.astype(np.complex128), k=1,
                             return_singular_vectors=False)
        return float(val[0])
    return float(np.linalg.norm(a.dense(), ord=2))
