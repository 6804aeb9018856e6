"""Generator-layer tests: graded dissipator, semigroup, Leibniz, bounds."""

import math

import numpy as np
import pytest
from scipy.linalg import expm

from mottlind.errors import BoundDivergenceError, ConfigurationError, SizeError
from mottlind.fock import (
    FockOperator,
    FockSpace,
    annihilator,
    classify_degree,
    creator,
    free_energy_diagonal,
    heisenberg_evolve,
    identity,
    monomial,
    number_op,
    parity_op,
)
from mottlind.gns import build_sigma, state_eval
from mottlind.jumps import Jump, JumpCatalogue, build_jump_operator, enumerate_jumps
from mottlind.lindblad import (
    SUPEROPERATOR_SITE_LIMIT,
    GeneratorSpec,
    apply_generator,
    convergence_bound,
    dissipator_superoperator,
    dissipator_term,
    gns_symmetric_dissipator,
    hamiltonian_phase_diagonal,
    leibniz_defect,
    semigroup_apply,
)
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
def four_site():
    omega = chain_realization(4, seed=2)
    catalogue = enumerate_jumps(omega)
    space = FockSpace.from_realization(omega)
    return omega, catalogue, space


def random_operator(space, rng, degree="mixed"):
    m = rng.normal(size=(space.dim, space.dim)) + 1j * rng.normal(
        size=(space.dim, space.dim)
    )
    return FockOperator(space, m, degree)


# -- single-term oracles --------------------------------------------------------


def unit_jump(kind, sites, energy):
    return Jump(kind, sites, 1.0, 0.0, energy)


def test_exit_term_halves_annihilator():
    omega = chain_realization(1, seed=3)
    space = FockSpace.from_realization(omega)
    x = space.sites[0]
    u = omega.energy_map()[x] - omega.params.mu
    op = build_jump_operator(space, unit_jump("out", (x,), -u))
    a = annihilator(space, x)
    got = dissipator_term(op, a).dense()
    assert np.abs(got - 0.5 * a.dense()).max() < 1e-15


def test_entry_term_halves_annihilator():
    omega = chain_realization(1, seed=3)
    space = FockSpace.from_realization(omega)
    x = space.sites[0]
    u = omega.energy_map()[x] - omega.params.mu
    op = build_jump_operator(space, unit_jump("in", (x,), u))
    a = annihilator(space, x)
    got = dissipator_term(op, a).dense()
    assert np.abs(got - 0.5 * a.dense()).max() < 1e-15


def test_exit_term_on_sigma_gives_projector():
    # With a unit-rate exit jump, D(sigma_x) = 2 cosh(beta u / 2) n_x.
    omega = chain_realization(1, seed=3)
    space = FockSpace.from_realization(omega)
    x = space.sites[0]
    beta = omega.params.beta
    u = omega.energy_map()[x] - omega.params.mu
    op = build_jump_operator(space, unit_jump("out", (x,), -u))
    sig = build_sigma(omega, space, x)
    got = dissipator_term(op, sig).dense()
    want = 2.0 * math.cosh(beta * u / 2.0) * number_op(space, x).dense()
    assert np.abs(got - want).max() < 1e-13


def test_entry_term_on_sigma_gives_hole_projector():
    omega = chain_realization(1, seed=3)
    space = FockSpace.from_realization(omega)
    x = space.sites[0]
    beta = omega.params.beta
    u = omega.energy_map()[x] - omega.params.mu
    op = build_jump_operator(space, unit_jump("in", (x,), u))
    sig = build_sigma(omega, space, x)
    got = dissipator_term(op, sig).dense()
    hole = identity(space).dense() - number_op(space, x).dense()
    want = -2.0 * math.cosh(beta * u / 2.0) * hole
    assert np.abs(got - want).max() < 1e-13


def test_exit_and_entry_terms_on_number():
    omega = chain_realization(1, seed=3)
    space = FockSpace.from_realization(omega)
    x = space.sites[0]
    u = omega.energy_map()[x] - omega.params.mu
    n = number_op(space, x)
    out_term = dissipator_term(
        build_jump_operator(space, unit_jump("out", (x,), -u)), n
    ).dense()
    in_term = dissipator_term(
        build_jump_operator(space, unit_jump("in", (x,), u)), n
    ).dense()
    hole = identity(space).dense() - n.dense()
    assert np.abs(out_term - n.dense()).max() < 1e-15
    assert np.abs(in_term + hole).max() < 1e-15


def test_hop_term_on_occupations():
    omega = chain_realization(2, seed=8)
    space = FockSpace.from_realization(omega)
    x, y = space.sites
    jump = unit_jump("hop", (x, y), 0.0)
    op = build_jump_operator(space, jump)
    nx, ny = number_op(space, x).dense(), number_op(space, y).dense()
    blocked = nx @ (np.eye(space.dim) - ny)
    got_x = dissipator_term(op, number_op(space, x)).dense()
    got_y = dissipator_term(op, number_op(space, y)).dense()
    assert np.abs(got_x - blocked).max() < 1e-15
    assert np.abs(got_y + blocked).max() < 1e-15


def test_dissipator_term_is_unital(four_site):
    _, catalogue, space = four_site
    one = identity(space)
    for jump in catalogue.jumps[:6]:
        op = build_jump_operator(space, jump)
        assert np.abs(dissipator_term(op, one).dense()).max() < 1e-14


def test_dissipator_term_rejects_mixed_degree(four_site):
    omega, _, space = four_site
    x = space.sites[0]
    mixed = annihilator(space, x) + number_op(space, x)
    with pytest.raises(ValueError):
        dissipator_term(mixed, identity(space))


# -- full generator -------------------------------------------------------------


def test_kinetic_part_conserves_total_number(four_site):
    _, catalogue, space = four_site
    spec = GeneratorSpec(catalogue, parts=frozenset({"kin"}))
    total = identity(space) * 0.0
    for site in space.sites:
        total = total + number_op(space, site)
    assert np.abs(apply_generator(spec, total).dense()).max() < 1e-13


def test_reservoir_part_scales_sigma(four_site):
    # D^star(sigma_x) = (rate_out + rate_in) sigma_x on every site.
    omega, catalogue, space = four_site
    spec = GeneratorSpec(catalogue, parts=frozenset({"star"}))
    for x in space.sites:
        r_out = catalogue.get(("out", (x,))).rate
        r_in = catalogue.get(("in", (x,))).rate
        sig = build_sigma(omega, space, x)
        got = apply_generator(spec, sig).dense()
        assert np.abs(got - (r_out + r_in) * sig.dense()).max() < 1e-13


def test_generator_matches_sum_of_terms(four_site):
    _, catalogue, space = four_site
    rng = np.random.default_rng(0)
    a = random_operator(space, rng)
    spec = GeneratorSpec(catalogue)
    total = np.zeros((space.dim, space.dim), dtype=complex)
    for jump in catalogue.jumps:
        op = build_jump_operator(space, jump)
        total += dissipator_term(op, a).dense()
    assert np.abs(apply_generator(spec, a).dense() - total).max() < 1e-12


def test_hamiltonian_part_is_commutator(four_site):
    omega, catalogue, space = four_site
    rng = np.random.default_rng(1)
    a = random_operator(space, rng)
    with_h = GeneratorSpec(catalogue, include_hamiltonian=True)
    without = GeneratorSpec(catalogue)
    f = np.diag(free_energy_diagonal(omega, space))
    comm = 1j * (f @ a.dense() - a.dense() @ f)
    diff = apply_generator(with_h, a).dense() - apply_generator(without, a).dense()
    assert np.abs(diff - comm).max() < 1e-12


def test_state_is_stationary(four_site):
    omega, catalogue, space = four_site
    spec = GeneratorSpec(catalogue, include_hamiltonian=True)
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(25):
        a = random_operator(space, rng)
        worst = max(worst, abs(state_eval(omega, apply_generator(spec, a))))
    assert worst < 1e-12


def test_generator_commutes_with_parity_conjugation(four_site):
    _, catalogue, space = four_site
    spec = GeneratorSpec(catalogue, include_hamiltonian=True)
    rng = np.random.default_rng(5)
    a = random_operator(space, rng)
    g = parity_op(space)
    lhs = apply_generator(spec, g @ a @ g).dense()
    rhs = (g @ apply_generator(spec, a) @ g).dense()
    assert np.abs(lhs - rhs).max() < 1e-12


def test_generator_commutes_with_free_flow(four_site):
    # alpha_t . D . alpha_{-t} = D for the dissipative part.
    omega, catalogue, space = four_site
    spec = GeneratorSpec(catalogue)
    rng = np.random.default_rng(6)
    a = random_operator(space, rng)
    t = 0.83
    lhs = heisenberg_evolve(omega, apply_generator(spec, heisenberg_evolve(omega, a, -t)), t)
    rhs = apply_generator(spec, a)
    assert np.abs(lhs.dense() - rhs.dense()).max() < 1e-11


def test_parts_split_adds_up(four_site):
    _, catalogue, space = four_site
    rng = np.random.default_rng(7)
    a = random_operator(space, rng)
    both = apply_generator(GeneratorSpec(catalogue), a).dense()
    kin = apply_generator(GeneratorSpec(catalogue, parts=frozenset({"kin"})), a).dense()
    star = apply_generator(GeneratorSpec(catalogue, parts=frozenset({"star"})), a).dense()
    assert np.abs(both - kin - star).max() < 1e-13


def test_empty_parts_rejected(four_site):
    _, catalogue, _ = four_site
    with pytest.raises(ConfigurationError):
        GeneratorSpec(catalogue, parts=frozenset())
    with pytest.raises(ConfigurationError):
        GeneratorSpec(catalogue, parts=frozenset({"kin", "bogus"}))


# -- Leibniz identity ------------------------------------------------------------


def test_leibniz_identity_holds(four_site):
    _, catalogue, space = four_site
    spec = GeneratorSpec(catalogue, include_hamiltonian=True)
    x, y = space.sites[0], space.sites[1]
    pairs = [
        (creator(space, x), annihilator(space, y)),
        (annihilator(space, x), annihilator(space, x)),
        (monomial(space, [(x, True), (y, False)]), number_op(space, y)),
        (number_op(space, x), monomial(space, [(y, True)])),
    ]
    for a, b in pairs:
        assert leibniz_defect(spec, a, b) < 1e-11


def test_leibniz_identity_holds_on_random_mixed(four_site):
    _, catalogue, space = four_site
    spec = GeneratorSpec(catalogue, include_hamiltonian=True)
    rng = np.random.default_rng(8)
    for _ in range(5):
        a = random_operator(space, rng)
        b = random_operator(space, rng)
        scale = max(a.frobenius() * b.frobenius(), 1.0)
        assert leibniz_defect(spec, a, b) < 1e-10 * scale


def test_ungraded_brackets_break_leibniz(four_site):
    _, catalogue, space = four_site
    spec = GeneratorSpec(catalogue, include_hamiltonian=True)
    a = monomial(space, [(space.sites[0], True)])
    b = monomial(space, [(space.sites[1], False)])
    assert leibniz_defect(spec, a, b, _ungraded_brackets=True) > 1e-2


# -- superoperators ---------------------------------------------------------------


def test_superoperator_matches_generator(four_site):
    _, catalogue, space = four_site
    spec = GeneratorSpec(catalogue)
    dhat = dissipator_superoperator(spec)
    assert dhat.dtype == np.float64
    rng = np.random.default_rng(9)
    a = random_operator(space, rng)
    lhs = (dhat @ a.dense().reshape(-1)).reshape(space.dim, space.dim)
    rhs = apply_generator(spec, a).dense()
    assert np.abs(lhs - rhs).max() < 1e-12


def test_hamiltonian_diagonal_matches_commutator(four_site):
    omega, catalogue, space = four_site
    spec = GeneratorSpec(catalogue, include_hamiltonian=True)
    diag = hamiltonian_phase_diagonal(spec)
    rng = np.random.default_rng(10)
    a = random_operator(space, rng)
    f = np.diag(free_energy_diagonal(omega, space))
    comm = 1j * (f @ a.dense() - a.dense() @ f)
    lhs = (diag * a.dense().reshape(-1)).reshape(space.dim, space.dim)
    assert np.abs(lhs - comm).max() < 1e-12


def test_superoperator_is_cached(four_site):
    _, catalogue, _ = four_site
    spec = GeneratorSpec(catalogue)
    assert dissipator_superoperator(spec) is dissipator_superoperator(spec)


def test_superoperator_size_cap():
    omega = chain_realization(SUPEROPERATOR_SITE_LIMIT + 1, seed=0)
    catalogue = enumerate_jumps(omega)
    with pytest.raises(SizeError):
        dissipator_superoperator(GeneratorSpec(catalogue))


def test_gns_symmetrized_dissipator_is_symmetric_psd(four_site):
    _, catalogue, _ = four_site
    sym = gns_symmetric_dissipator(GeneratorSpec(catalogue))
    assert np.abs(sym - sym.T).max() < 1e-12
    eigs = np.linalg.eigvalsh(sym)
    assert eigs.min() > -1e-10


def test_gns_symmetrization_preserves_spectrum(four_site):
    _, catalogue, _ = four_site
    spec = GeneratorSpec(catalogue)
    raw = np.sort(np.linalg.eigvals(dissipator_superoperator(spec)).real)
    sym = np.sort(np.linalg.eigvalsh(gns_symmetric_dissipator(spec)))
    assert np.abs(raw - sym).max() < 1e-8


# -- semigroup ---------------------------------------------------------------------


def test_semigroup_time_zero_is_identity(four_site):
    _, catalogue, space = four_site
    spec = GeneratorSpec(catalogue, include_hamiltonian=True)
    rng = np.random.default_rng(11)
    a = random_operator(space, rng)
    assert np.abs(semigroup_apply(spec, a, 0.0).dense() - a.dense()).max() < 1e-12


def test_semigroup_is_unital(four_site):
    _, catalogue, space = four_site
    spec = GeneratorSpec(catalogue, include_hamiltonian=True)
    one = identity(space)
    for t in (0.1, 1.0, 10.0):
        evolved = semigroup_apply(spec, one, t)
        assert np.abs(evolved.dense() - one.dense()).max() < 1e-11


def test_semigroup_law(four_site):
    _, catalogue, space = four_site
    spec = GeneratorSpec(catalogue, include_hamiltonian=True)
    rng = np.random.default_rng(12)
    a = random_operator(space, rng)
    for t, s in [(0.1, 0.7), (0.4, 0.4)]:
        once = semigroup_apply(spec, a, t + s).dense()
        twice = semigroup_apply(spec, semigroup_apply(spec, a, t), s).dense()
        assert np.abs(once - twice).max() < 1e-10


def test_semigroup_matches_matrix_exponential():
    omega = chain_realization(3, seed=5)
    catalogue = enumerate_jumps(omega)
    space = FockSpace.from_realization(omega)
    spec = GeneratorSpec(catalogue, include_hamiltonian=True)
    gen = dissipator_superoperator(GeneratorSpec(catalogue)).astype(complex)
    gen += np.diag(hamiltonian_phase_diagonal(spec))
    rng = np.random.default_rng(13)
    a = random_operator(space, rng)
    for t in (0.05, 0.3, 1.7):
        lhs = semigroup_apply(spec, a, t).dense()
        rhs = (expm(-t * gen) @ a.dense().reshape(-1)).reshape(space.dim, space.dim)
        assert np.abs(lhs - rhs).max() < 1e-10


def test_semigroup_preserves_positivity(four_site):
    _, catalogue, space = four_site
    spec = GeneratorSpec(catalogue, include_hamiltonian=True)
    rng = np.random.default_rng(14)
    m = rng.normal(size=(space.dim, space.dim)) + 1j * rng.normal(
        size=(space.dim, space.dim)
    )
    positive = FockOperator(space, m @ m.conj().T, "mixed")
    for t in (0.1, 1.0, 10.0):
        evolved = semigroup_apply(spec, positive, t).dense()
        assert np.abs(evolved - evolved.conj().T).max() < 1e-10
        eigs = np.linalg.eigvalsh(0.5 * (evolved + evolved.conj().T))
        assert eigs.min() > -1e-10


def test_semigroup_preserves_degree(four_site):
    _, catalogue, space = four_site
    spec = GeneratorSpec(catalogue, include_hamiltonian=True)
    odd = creator(space, space.sites[0])
    evolved = semigroup_apply(spec, odd, 0.7)
    assert evolved.degree == "odd"
    assert classify_degree(space, evolved.dense()) == "odd"
    even = number_op(space, space.sites[1])
    evolved = semigroup_apply(spec, even, 0.7)
    assert evolved.degree == "even"
    assert classify_degree(space, evolved.dense()) == "even"


def test_semigroup_converges_to_equilibrium_expectation(four_site):
    omega, catalogue, space = four_site
    spec = GeneratorSpec(catalogue, include_hamiltonian=True)
    n0 = number_op(space, space.sites[0])
    target = state_eval(omega, n0).real
    evolved = semigroup_apply(spec, n0, 200.0)
    # At long times the observable flattens onto its equilibrium mean.
    expectation = evolved.dense()[0, 0].real  # vacuum matrix element
    assert abs(expectation - target) < 1e-8


def test_semigroup_rejects_bad_times(four_site):
    _, catalogue, space = four_site
    spec = GeneratorSpec(catalogue)
    one = identity(space)
    with pytest.raises(ValueError):
        semigroup_apply(spec, one, -0.5)
    with pytest.raises(ValueError):
        semigroup_apply(spec, one, 1.0j)


# -- convergence bound -------------------------------------------------------------


def test_bound_empty_catalogue_is_zero():
    omega = chain_realization(3, seed=1)
    catalogue = enumerate_jumps(omega)
    empty = catalogue.subset([])
    bound = convergence_bound(empty, n_max=1, p=0.5)
    assert bound.c_l == 0.0
    assert bound.c_1 == 0.0
    assert bound.radius == math.inf


def test_bound_cemetery_only():
    omega = chain_realization(4, seed=6, gamma0=1e-300)
    catalogue = enumerate_jumps(omega)
    no_hops = catalogue.subset([j.key for j in catalogue.cemetery()])
    bound = convergence_bound(no_hops, n_max=0, p=0.5)
    # Exit plus entry rates at one site never exceed 2 gamma_star.
    assert bound.c_l <= 2.0 * omega.params.gamma_star + 1e-12
    assert bound.c_l > omega.params.gamma_star  # rates bounded below by gamma_star
    assert bound.c_1 == 0.0  # no multi-site terms at n_max = 0


def test_bound_is_finite_and_below_analytic(four_site):
    omega, catalogue, _ = four_site
    bound = convergence_bound(catalogue, n_max=1, p=0.5 / omega.params.r_loc)
    assert 0 < bound.c_l <= bound.c_l_analytic + 1e-12
    assert 0 < bound.c_1 <= bound.c_1_analytic + 1e-12
    assert 0 < bound.radius < math.inf
    assert bound.radius_analytic <= bound.radius + 1e-15


def test_bound_diverges_at_critical_weight(four_site):
    omega, catalogue, _ = four_site
    with pytest.raises(BoundDivergenceError):
        convergence_bound(catalogue, n_max=1, p=1.0 / omega.params.r_loc)
    with pytest.raises(BoundDivergenceError):
        convergence_bound(catalogue, n_max=1, p=-0.1)


def test_bound_analytic_geometric_oracle():
    # d = 1, n_max = 1: the analytic hop tail is 4 (Gamma0/Z) q/(1-q) with
    # q = e^{p - 1/r_loc}, and sum m e^{-pm} = e^{-p}/(1-e^{-p})^2.
    omega = chain_realization(5, seed=9)
    catalogue = enumerate_jumps(omega)
    params = omega.params
    p = 0.4 / params.r_loc
    bound = convergence_bound(catalogue, n_max=1, p=p)
    q = math.exp(p - 1.0 / params.r_loc)
    tail = 4.0 * (params.gamma0 / catalogue.z) * q / (1.0 - q)
    c_l_expected = 2.0 * params.gamma_star + tail
    assert abs(bound.c_l_analytic - c_l_expected) < 1e-10 * c_l_expected
    series = math.exp(-p) / (1.0 - math.exp(-p)) ** 2
    c_1_expected = 2.0 * c_l_expected * series
    assert abs(bound.c_1_analytic - c_1_expected) < 1e-9 * c_1_expected


def test_bound_supremum_over_catalogues():
    omegas = [chain_realization(4, seed=s) for s in (11, 12, 13)]
    catalogues = [enumerate_jumps(om) for om in omegas]
    separate = [convergence_bound(c, n_max=1, p=0.5).c_l for c in catalogues]
    joint = convergence_bound(catalogues, n_max=1, p=0.5)
    assert joint.c_l >= max(separate) - 1e-12
    assert joint.c_l <= sum(separate) + 1e-12


def test_bound_reports_inputs(four_site):
    _, catalogue, _ = four_site
    bound = convergence_bound(catalogue, n_max=1, p=0.25)
    record = bound.to_dict()
    assert record["p"] == 0.25
    assert record["n_max"] == 1
    assert set(record) == {
        "c_l",
        "c_1",
        "radius",
        "c_l_analytic",
        "c_1_analytic",
        "radius_analytic",
        "p",
        "n_max",
    }
