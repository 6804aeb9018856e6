"""Equilibrium-state and GNS-geometry tests."""

import json
import math

import numpy as np
import pytest

import mottlind.gns as gns_module
from mottlind.errors import ConsistencyError, SiteError, SizeError
from mottlind.fock import (
    FockOperator,
    FockSpace,
    annihilator,
    creator,
    identity,
    monomial,
    number_op,
)
from mottlind.gns import (
    COORDS_SITE_LIMIT,
    GNS_SITE_CAP,
    GnsBasisElement,
    GnsVector,
    build_b,
    build_b_dagger,
    build_sigma,
    dirichlet_form,
    enumerate_basis,
    equilibrium_weights,
    gns_norm,
    inner_product,
    kms_check,
    modular_action,
    reconstruct,
    state_eval,
    to_gns_coords,
)
from mottlind.jumps import enumerate_jumps
from mottlind.lindblad import GeneratorSpec, apply_generator
from mottlind.model import ModelParams, sample_disorder


def chain_realization(n, seed=0, **overrides):
    kwargs = dict(
        beta=1.7,
        mu=0.2,
        gamma0=1.3,
        gamma_star=0.8,
        r_loc=1.0,
        delta=(-1.0, 1.0),
        dim=1,
        box=(n,),
        impurity_density=1.0,
    )
    kwargs.update(overrides)
    return sample_disorder(ModelParams(**kwargs), seed)


@pytest.fixture(scope="module")
def three_site():
    omega = chain_realization(3, seed=5)
    return omega, FockSpace.from_realization(omega)


@pytest.fixture(scope="module")
def four_site():
    omega = chain_realization(4, seed=2)
    return omega, FockSpace.from_realization(omega)


def fermi_factor(omega, site):
    beta, mu = omega.params.beta, omega.params.mu
    return 1.0 / (1.0 + math.exp(beta * (omega.energy_map()[site] - mu)))


# -- weights and state -------------------------------------------------------------


def test_weights_normalized_positive(three_site):
    omega, space = three_site
    w = equilibrium_weights(omega, space)
    assert w.shape == (space.dim,)
    assert np.all(w > 0)
    assert abs(w.sum() - 1.0) < 1e-14


def test_weights_match_explicit_product(three_site):
    omega, space = three_site
    w = equilibrium_weights(omega, space)
    fs = [fermi_factor(omega, s) for s in space.sites]
    for mask in range(space.dim):
        expected = 1.0
        for k, f in enumerate(fs):
            expected *= f if (mask >> k) & 1 else 1.0 - f
        assert abs(w[mask] - expected) < 1e-15


def test_state_on_number_is_fermi_function(three_site):
    omega, space = three_site
    for site in space.sites:
        value = state_eval(omega, number_op(space, site))
        assert abs(value - fermi_factor(omega, site)) < 1e-14
        assert abs(value.imag) == 0.0


def test_state_kills_odd_monomials(three_site):
    omega, space = three_site
    x, y = space.sites[0], space.sites[1]
    assert abs(state_eval(omega, annihilator(space, x))) < 1e-16
    assert abs(state_eval(omega, creator(space, y))) < 1e-16
    hop = monomial(space, [(x, True), (y, False)])
    assert abs(state_eval(omega, hop)) < 1e-16


def test_state_at_chemical_potential_is_half():
    omega = chain_realization(1, seed=0, delta=(0.2, 0.2), mu=0.2)
    space = FockSpace.from_realization(omega)
    value = state_eval(omega, number_op(space, space.sites[0]))
    assert abs(value - 0.5) < 1e-15


def test_state_marginal_on_subspace(three_site):
    # The product state restricts consistently to any subset of sites.
    omega, space = three_site
    x = space.sites[1]
    small = FockSpace((space.sites[0], x))
    full_value = state_eval(omega, number_op(space, x))
    small_value = state_eval(omega, number_op(small, x))
    assert abs(full_value - small_value) < 1e-15


def test_state_dual_paths_agree_on_random_monomials(four_site):
    omega, space = four_site
    rng = np.random.default_rng(42)
    sites = list(space.sites)
    checked = 0
    for _ in range(1000):
        length = rng.integers(1, 5)
        word = []
        for _ in range(length):
            site = sites[rng.integers(len(sites))]
            word.append((site, bool(rng.integers(2))))
        op = monomial(space, word)
        value = state_eval(omega, op)  # raises ConsistencyError on any split
        assert np.isfinite(value.real) and np.isfinite(value.imag)
        checked += 1
    assert checked == 1000


def test_state_path_disagreement_raises(three_site, monkeypatch):
    omega, space = three_site
    true_diag = gns_module.free_energy_diagonal(omega, space)

    def corrupted(om, sp):
        return true_diag + 1e-3

    # A uniform shift cancels in the normalized trace; corrupt one entry.
    def corrupted_entry(om, sp):
        out = true_diag.copy()
        out[1] += 1e-6
        return out

    monkeypatch.setattr(gns_module, "free_energy_diagonal", corrupted_entry)
    with pytest.raises(ConsistencyError):
        state_eval(omega, number_op(space, space.sites[0]))
    monkeypatch.setattr(gns_module, "free_energy_diagonal", corrupted)
    # Uniform shifts must NOT trip the check (the trace normalizes them away).
    state_eval(omega, number_op(space, space.sites[0]))


def test_state_requires_occupied_sites(three_site):
    omega, _ = three_site
    stranger = FockSpace(((99,),))
    with pytest.raises(SiteError):
        state_eval(omega, number_op(stranger, (99,)))


def test_state_is_faithful(three_site):
    omega, space = three_site
    rng = np.random.default_rng(3)
    m = rng.normal(size=(space.dim, space.dim))
    op = FockOperator(space, m, "mixed")
    assert gns_norm(omega, op) > 1e-3  # nonzero operators have nonzero norm
    assert gns_norm(omega, op * 0.0) == 0.0


# -- normalized site factors --------------------------------------------------------


def test_site_factors_have_unit_norm(three_site):
    omega, space = three_site
    for site in space.sites:
        for factory in (build_b, build_b_dagger, build_sigma):
            op = factory(omega, space, site)
            assert abs(gns_norm(omega, op) - 1.0) < 1e-13


def test_sigma_is_centered(three_site):
    omega, space = three_site
    for site in space.sites:
        sig = build_sigma(omega, space, site)
        assert abs(state_eval(omega, sig)) < 1e-14


def test_site_factors_extreme_beta_stable():
    omega = chain_realization(2, seed=1, beta=400.0)
    space = FockSpace.from_realization(omega)
    for site in space.sites:
        b = build_b(omega, space, site)
        bd = build_b_dagger(omega, space, site)
        assert np.isfinite(b.dense()).all()
        assert np.isfinite(bd.dense()).all()
        # One of the two normalizers is huge, but its GNS norm is still 1.
        assert abs(gns_norm(omega, b) - 1.0) < 1e-10
        assert abs(gns_norm(omega, bd) - 1.0) < 1e-10


def test_b_matches_weak_coupling_form(three_site):
    # b_x equals e^{beta u^- / 2} a_x rescaled by sqrt(1 + e^{-beta |u|}).
    omega, space = three_site
    beta, mu = omega.params.beta, omega.params.mu
    for site in space.sites:
        u = omega.energy_map()[site] - mu
        weak = math.exp(beta * max(u, 0.0) / 2.0)
        exact = math.sqrt(1.0 + math.exp(beta * u))
        ratio = exact / weak
        assert abs(ratio - math.sqrt(1.0 + math.exp(-beta * abs(u)))) < 1e-12


# -- basis ---------------------------------------------------------------------------


@pytest.mark.parametrize("n", [0, 1, 3, 5])
def test_gram_matrix_is_identity(n):
    omega = chain_realization(max(n, 1), seed=n + 10,
                              impurity_density=1.0 if n else 0.0)
    basis = enumerate_basis(omega)
    assert len(basis) == 4 ** basis.space.n
    gram = basis.gram()
    assert np.abs(gram - np.eye(len(basis))).max() < 1e-12


def test_basis_indexing_roundtrip(three_site):
    omega, _ = three_site
    basis = enumerate_basis(omega)
    for idx, element in enumerate(basis):
        assert basis.index_of(element) == idx
    assert basis.element(0).is_identity


def test_basis_digit_encoding(three_site):
    # Index digits (base 4) map rank k to absent/X/Y/Z in order.
    omega, _ = three_site
    basis = enumerate_basis(omega)
    s0, s1, s2 = basis.space.sites
    el = basis.element(1)  # digits (1, 0, 0)
    assert el.x_sites == (s0,) and not el.y_sites and not el.z_sites
    el = basis.element(2)  # digits (2, 0, 0)
    assert el.y_sites == (s0,)
    el = basis.element(3 * 16)  # digits (0, 0, 3)
    assert el.z_sites == (s2,)
    el = basis.element(1 + 2 * 4 + 3 * 16)
    assert el.x_sites == (s0,) and el.y_sites == (s1,) and el.z_sites == (s2,)


def test_basis_element_validation():
    with pytest.raises(ValueError):
        GnsBasisElement(((0,),), ((0,),), ())  # overlap
    with pytest.raises(ValueError):
        GnsBasisElement(((1,), (0,)), (), ())  # unsorted


def test_identity_element_is_identity_operator(three_site):
    omega, space = three_site
    basis = enumerate_basis(omega)
    op = basis.operator(basis.element(0))
    assert np.abs(op.dense() - identity(space).dense()).max() == 0.0


def test_basis_cap_raises():
    omega = chain_realization(GNS_SITE_CAP + 1, seed=0)
    with pytest.raises(SizeError):
        enumerate_basis(omega)
    # A larger explicit cap admits the same realization.
    basis = enumerate_basis(omega, cap=GNS_SITE_CAP + 1)
    assert len(basis) == 4 ** (GNS_SITE_CAP + 1)


def test_coords_matrix_size_cap():
    omega = chain_realization(COORDS_SITE_LIMIT + 1, seed=0)
    basis = enumerate_basis(omega)
    with pytest.raises(SizeError):
        _ = basis.matrix


def test_basis_json_export(three_site):
    omega, _ = three_site
    basis = enumerate_basis(omega)
    payload = json.loads(basis.to_json())
    assert payload["schema"] == "mottlind/gns-basis-v1"
    assert len(payload["elements"]) == len(basis)
    first = payload["elements"][0]
    assert first["index"] == 0
    assert first["X"] == [] and first["Y"] == [] and first["Z"] == []


# -- coordinates ----------------------------------------------------------------------


def test_coords_of_basis_elements_are_unit_vectors(three_site):
    omega, _ = three_site
    basis = enumerate_basis(omega)
    rng = np.random.default_rng(0)
    for idx in rng.choice(len(basis), size=8, replace=False):
        op = basis.operator(basis.element(int(idx)))
        coeffs = to_gns_coords(op, basis).coeffs
        unit = np.zeros(len(basis))
        unit[idx] = 1.0
        assert np.abs(coeffs - unit).max() < 1e-12


def test_coords_roundtrip_and_parseval(four_site):
    omega, space = four_site
    basis = enumerate_basis(omega)
    rng = np.random.default_rng(7)
    m = rng.normal(size=(space.dim, space.dim)) + 1j * rng.normal(
        size=(space.dim, space.dim)
    )
    op = FockOperator(space, m, "mixed")
    vector = to_gns_coords(op, basis)
    back = reconstruct(vector)
    assert np.abs(back.dense() - m).max() < 1e-10
    parseval = abs(vector.norm() ** 2 - inner_product(omega, op, op).real)
    assert parseval < 1e-10


def test_coords_reject_foreign_space(three_site, four_site):
    omega3, space3 = three_site
    _, space4 = four_site
    basis = enumerate_basis(omega3)
    with pytest.raises(SiteError):
        to_gns_coords(identity(space4), basis)


def test_vector_json_roundtrip(three_site):
    omega, _ = three_site
    basis = enumerate_basis(omega)
    rng = np.random.default_rng(1)
    coeffs = rng.normal(size=len(basis)) + 1j * rng.normal(size=len(basis))
    vector = GnsVector(basis, coeffs)
    payload = json.loads(vector.to_json())
    assert payload["schema"] == "mottlind/gns-vector-v1"
    loaded = np.array([complex(re, im) for re, im in payload["coeffs"]])
    assert np.abs(loaded - coeffs).max() < 1e-15


# -- modular structure ----------------------------------------------------------------


def test_modular_action_on_creator(three_site):
    omega, space = three_site
    beta, mu = omega.params.beta, omega.params.mu
    x = space.sites[0]
    u = omega.energy_map()[x] - mu
    assert abs(modular_action(omega, [(x, True)], 1.0) - math.exp(beta * u)) < 1e-14
    assert abs(modular_action(omega, [(x, False)], 1.0) - math.exp(-beta * u)) < 1e-14


def test_modular_action_power_group_law(three_site):
    omega, space = three_site
    word = [(space.sites[0], True), (space.sites[2], False)]
    for p1, p2 in [(0.3, 0.9), (0.5j, 1.0), (-0.25, 0.25)]:
        lhs = modular_action(omega, word, p1) * modular_action(omega, word, p2)
        rhs = modular_action(omega, word, p1 + p2)
        assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(rhs))


def test_modular_flow_is_unitary(three_site):
    omega, space = three_site
    word = [(space.sites[1], True), (space.sites[0], True)]
    for t in (0.3, 2.7, -1.1):
        assert abs(abs(modular_action(omega, word, 1j * t)) - 1.0) < 1e-14


def test_modular_action_matches_state_ratio(three_site):
    # rho(a_x a_x^dag) / rho(a_x^dag a_x) is the modular eigenvalue of a_x^dag.
    omega, space = three_site
    x = space.sites[1]
    num = state_eval(omega, annihilator(space, x) @ creator(space, x)).real
    den = state_eval(omega, creator(space, x) @ annihilator(space, x)).real
    assert abs(num / den - modular_action(omega, [(x, True)], 1.0).real) < 1e-12


def test_modular_action_rejects_unoccupied(three_site):
    omega, _ = three_site
    with pytest.raises(SiteError):
        modular_action(omega, [((99,), True)], 1.0)


def test_araki_cone_embedding_is_positive(three_site):
    # The symmetric embedding A -> rho^{1/4} A rho^{1/4} maps positive
    # observables into a cone with pairwise nonnegative overlaps.
    omega, space = three_site
    w = equilibrium_weights(omega, space)
    quarter = np.diag(w**0.25)
    rng = np.random.default_rng(5)
    embedded = []
    for _ in range(4):
        m = rng.normal(size=(space.dim, space.dim))
        embedded.append(quarter @ (m @ m.T) @ quarter)
    for a in embedded:
        assert np.linalg.eigvalsh(a).min() > -1e-12
        for b in embedded:
            assert np.trace(a @ b).real > -1e-12


# -- KMS condition ---------------------------------------------------------------------


def test_kms_identity_small_systems(four_site):
    omega, space = four_site
    x, y = space.sites[0], space.sites[2]
    pairs = [
        (creator(space, x), annihilator(space, x)),
        (annihilator(space, x), creator(space, x)),
        (monomial(space, [(x, True), (y, False)]),
         monomial(space, [(y, True), (x, False)])),
        (number_op(space, y), monomial(space, [(x, True)])),
    ]
    for a, b in pairs:
        assert kms_check(omega, a, b) < 1e-12


def test_kms_identity_random_observables(four_site):
    omega, space = four_site
    rng = np.random.default_rng(21)
    worst = 0.0
    for _ in range(10):
        a = FockOperator(space, rng.normal(size=(space.dim, space.dim)), "mixed")
        b = FockOperator(space, rng.normal(size=(space.dim, space.dim)), "mixed")
        worst = max(worst, kms_check(omega, a, b))
    assert worst < 1e-10


def test_kms_reduces_to_trace_symmetry_at_high_temperature():
    omega = chain_realization(3, seed=4, beta=1e-9)
    space = FockSpace.from_realization(omega)
    rng = np.random.default_rng(22)
    a = FockOperator(space, rng.normal(size=(space.dim, space.dim)), "mixed")
    b = FockOperator(space, rng.normal(size=(space.dim, space.dim)), "mixed")
    assert kms_check(omega, a, b) < 1e-7
    lhs = state_eval(omega, a @ b)
    rhs = state_eval(omega, b @ a)
    assert abs(lhs - rhs) < 1e-7  # the state is nearly tracial


# -- Dirichlet form ----------------------------------------------------------------------


def test_dirichlet_form_matches_generator(four_site):
    omega, space = four_site
    catalogue = enumerate_jumps(omega)
    spec = GeneratorSpec(catalogue)
    rng = np.random.default_rng(30)
    for _ in range(3):
        a = FockOperator(space, rng.normal(size=(space.dim, space.dim))
                         + 1j * rng.normal(size=(space.dim, space.dim)), "mixed")
        b = FockOperator(space, rng.normal(size=(space.dim, space.dim))
                         + 1j * rng.normal(size=(space.dim, space.dim)), "mixed")
        q = dirichlet_form(catalogue, a, b)
        via_right = state_eval(omega, a.adjoint() @ apply_generator(spec, b))
        via_left = state_eval(omega, apply_generator(spec, a).adjoint() @ b)
        scale = max(1.0, abs(q))
        assert abs(q - via_right) < 1e-10 * scale
        assert abs(q - via_left) < 1e-10 * scale


def test_dirichlet_form_is_positive(four_site):
    omega, space = four_site
    catalogue = enumerate_jumps(omega)
    rng = np.random.default_rng(31)
    for _ in range(5):
        a = FockOperator(space, rng.normal(size=(space.dim, space.dim))
                         + 1j * rng.normal(size=(space.dim, space.dim)), "mixed")
        q = dirichlet_form(catalogue, a, a)
        assert abs(q.imag) < 1e-12 * max(1.0, abs(q))
        assert q.real > -1e-12


def test_dirichlet_form_splits_by_parts(four_site):
    omega, space = four_site
    catalogue = enumerate_jumps(omega)
    rng = np.random.default_rng(32)
    a = FockOperator(space, rng.normal(size=(space.dim, space.dim)), "mixed")
    b = FockOperator(space, rng.normal(size=(space.dim, space.dim)), "mixed")
    total = dirichlet_form(catalogue, a, b)
    kin = dirichlet_form(catalogue, a, b, parts={"kin"})
    star = dirichlet_form(catalogue, a, b, parts={"star"})
    assert abs(total - kin - star) < 1e-12 * max(1.0, abs(total))


def test_dirichlet_hermitian_symmetry(four_site):
    omega, space = four_site
    catalogue = enumerate_jumps(omega)
    rng = np.random.default_rng(33)
    a = FockOperator(space, rng.normal(size=(space.dim, space.dim))
                     + 1j * rng.normal(size=(space.dim, space.dim)), "mixed")
    b = FockOperator(space, rng.normal(size=(space.dim, space.dim))
                     + 1j * rng.normal(size=(space.dim, space.dim)), "mixed")
    lhs = dirichlet_form(catalogue, a, b)
    rhs = np.conj(dirichlet_form(catalogue, b, a))
    assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(lhs))
