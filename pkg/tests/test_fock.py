"""Tests for the Jordan-Wigner Fock layer: CAR, grading, flows."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mottlind.errors import SiteError
from mottlind.fock import (
    FockOperator,
    FockSpace,
    annihilator,
    classify_degree,
    creator,
    free_energy,
    graded_commutator,
    heisenberg_evolve,
    identity,
    monomial,
    number_op,
    operator_norm,
    parity_op,
)
from mottlind.model import ModelParams, sample_disorder


def chain_realization(n: int, seed: int = 0, beta: float = 1.0, mu: float = 0.0):
    p = ModelParams(
        beta=beta, mu=mu, gamma0=1.0, gamma_star=1.0, r_loc=1.0,
        delta=(-1.0, 1.0), dim=1, box=(n,), impurity_density=1.0,
    )
    return sample_disorder(p, seed)


@pytest.fixture(scope="module")
def six_sites():
    omega = chain_realization(6)
    return omega, FockSpace.from_realization(omega)


class TestSpace:
    def test_basic_shape(self, six_sites):
        _, space = six_sites
        assert space.n == 6
        assert space.dim == 64
        assert space.dense

    def test_rank_and_missing_site(self, six_sites):
        _, space = six_sites
        assert space.rank(space.sites[0]) == 0
        with pytest.raises(SiteError):
            space.rank((99,))

    def test_occupations_bitmask(self, six_sites):
        _, space = six_sites
        assert space.occupations(0) == (0,) * 6
        assert space.occupations(0b000101) == (1, 0, 1, 0, 0, 0)

    def test_rejects_unsorted_or_duplicate(self):
        with pytest.raises(SiteError):
            FockSpace(((1,), (0,)))
        with pytest.raises(SiteError):
            FockSpace(((0,), (0,)))


class TestElementaryOperators:
    def test_single_site_annihilator_matrix(self):
        omega = chain_realization(1)
        space = FockSpace.from_realization(omega)
        a = annihilator(space, space.sites[0]).dense()
        # Basis order (|empty>, |occupied>): a maps occupied -> empty.
        np.testing.assert_array_equal(a, np.array([[0, 1], [0, 0]], dtype=complex))

    def test_number_trace(self, six_sites):
        _, space = six_sites
        for site in space.sites:
            assert number_op(space, site).trace().real == pytest.approx(2 ** (space.n - 1))

    def test_number_is_adag_a(self, six_sites):
        _, space = six_sites
        x = space.sites[3]
        lhs = (creator(space, x) @ annihilator(space, x)).dense()
        np.testing.assert_allclose(lhs, number_op(space, x).dense(), atol=0)

    def test_annihilator_unoccupied_site_errors(self):
        omega = chain_realization(3)
        space = FockSpace.from_realization(omega)
        with pytest.raises(SiteError):
            annihilator(space, (77,))

    def test_parity_conjugation(self, six_sites):
        _, space = six_sites
        g = parity_op(space).dense()
        a = annihilator(space, space.sites[2]).dense()
        np.testing.assert_allclose(g @ a @ g, -a, atol=0)
        n = number_op(space, space.sites[2]).dense()
        np.testing.assert_allclose(g @ n @ g, n, atol=0)

    def test_classify_degree(self, six_sites):
        _, space = six_sites
        a = annihilator(space, space.sites[0])
        n = number_op(space, space.sites[0])
        assert classify_degree(space, a.matrix) == "odd"
        assert classify_degree(space, n.matrix) == "even"
        assert classify_degree(space, (a + n * 1.0).matrix) == "mixed"

    def test_operator_norm(self, six_sites):
        _, space = six_sites
        assert operator_norm(annihilator(space, space.sites[0])) == pytest.approx(1.0)


class TestCar:
    def test_car_all_pairs_n6(self, six_sites):
        # Exact CAR on every pair of six sites.
        _, space = six_sites
        ops = [annihilator(space, s).dense() for s in space.sites]
        eye = np.eye(space.dim)
        worst = 0.0
        for i, ai in enumerate(ops):
            for j, aj in enumerate(ops):
                worst = max(worst, np.abs(ai @ aj + aj @ ai).max())
                anti = ai @ aj.conj().T + aj.conj().T @ ai
                target = eye if i == j else np.zeros_like(eye)
                worst = max(worst, np.abs(anti - target).max())
        assert worst <= 1e-14

    @given(st.integers(0, 4), st.integers(0, 4))
    @settings(max_examples=25, deadline=None)
    def test_car_hypothesis_pairs(self, i, j):
        omega = chain_realization(5)
        space = FockSpace.from_realization(omega)
        ai = annihilator(space, space.sites[i]).dense()
        aj = annihilator(space, space.sites[j]).dense()
        assert np.abs(ai @ aj + aj @ ai).max() <= 1e-14
        anti = ai @ aj.conj().T + aj.conj().T @ ai
        target = np.eye(space.dim) if i == j else 0.0
        assert np.abs(anti - target).max() <= 1e-14


class TestGradedCommutator:
    def test_number_annihilator(self):
        omega = chain_realization(2)
        space = FockSpace.from_realization(omega)
        x = space.sites[0]
        gc = graded_commutator(number_op(space, x), annihilator(space, x))
        np.testing.assert_allclose(gc.dense(), -annihilator(space, x).dense(), atol=1e-15)
        assert gc.degree == "odd"

    def test_odd_odd_is_anticommutator(self):
        omega = chain_realization(2)
        space = FockSpace.from_realization(omega)
        a0 = annihilator(space, space.sites[0])
        a1 = annihilator(space, space.sites[1])
        gc = graded_commutator(a0, a1.adjoint())
        np.testing.assert_allclose(gc.dense(), np.eye(space.dim) * 0.0, atol=1e-15)
        gc_same = graded_commutator(a0, a0.adjoint())
        np.testing.assert_allclose(gc_same.dense(), np.eye(space.dim), atol=1e-15)
        assert gc_same.degree == "even"

    def test_mixed_degree_decomposition(self):
        # [A, B]_g for mixed A decomposes bilinearly, no error raised.
        omega = chain_realization(2)
        space = FockSpace.from_realization(omega)
        a0 = annihilator(space, space.sites[0])
        n1 = number_op(space, space.sites[1])
        mixed = a0 + n1 * 1.0
        assert mixed.degree == "mixed"
        got = graded_commutator(mixed, a0)
        want = graded_commutator(a0, a0).dense() + graded_commutator(n1, a0).dense()
        np.testing.assert_allclose(got.dense(), want, atol=1e-14)

    @given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 10))
    @settings(max_examples=20, deadline=None)
    def test_monomial_degree_is_word_length_parity(self, la, lb, seed):
        omega = chain_realization(4)
        space = FockSpace.from_realization(omega)
        rng = np.random.default_rng(seed)
        word = [
            (space.sites[rng.integers(4)], bool(rng.integers(2))) for _ in range(la + lb)
        ]
        op = monomial(space, word)
        if op.frobenius() == 0.0:
            return  # the word annihilates everything; degree is unobservable
        assert classify_degree(space, op.matrix) == (
            "even" if (la + lb) % 2 == 0 else "odd"
        )


class TestFreeEnergy:
    def test_single_site_diagonal(self):
        p = ModelParams(
            beta=1.0, mu=0.0, gamma0=1.0, gamma_star=1.0, r_loc=1.0,
            delta=(1.0, 1.0), dim=1, box=(1,), impurity_density=1.0,
        )
        omega = sample_disorder(p, 0)
        space = FockSpace.from_realization(omega)
        f = free_energy(omega, space).dense()
        np.testing.assert_allclose(f, np.diag([0.0, 1.0]), atol=0)

    def test_additive_over_sites(self):
        omega = chain_realization(3)
        space = FockSpace.from_realization(omega)
        f = free_energy(omega, space).dense()
        acc = np.zeros_like(f)
        emap = omega.energy_map()
        for site in space.sites:
            acc += (emap[site] - omega.params.mu) * number_op(space, site).dense()
        np.testing.assert_allclose(f, acc, atol=1e-14)


class TestHeisenbergFlow:
    def test_isometry_real_t(self, six_sites):
        omega, space = six_sites
        a = monomial(space, [(space.sites[0], True), (space.sites[3], False)])
        at = heisenberg_evolve(omega, a, 1.3)
        assert abs(at.frobenius() - a.frobenius()) <= 1e-12

    def test_group_law(self, six_sites):
        omega, space = six_sites
        a = annihilator(space, space.sites[1])
        lhs = heisenberg_evolve(omega, heisenberg_evolve(omega, a, 0.3), 0.4)
        rhs = heisenberg_evolve(omega, a, 0.7)
        np.testing.assert_allclose(lhs.dense(), rhs.dense(), atol=1e-13)

    def test_annihilator_is_covariant_eigenvector(self, six_sites):
        # alpha_t(a_x) = e^{-it(eps_x-mu)} a_x, exactly.
        omega, space = six_sites
        x = space.sites[2]
        eps = omega.energy_map()[x]
        t = 0.9
        at = heisenberg_evolve(omega, annihilator(space, x), t)
        pred = np.exp(-1j * t * (eps - omega.params.mu)) * annihilator(space, x).dense()
        np.testing.assert_allclose(at.dense(), pred, atol=1e-14)

    def test_complex_time(self, six_sites):
        # t = -i beta conjugates by e^{beta F}: entrywise exact formula.
        omega, space = six_sites
        x = space.sites[0]
        beta = omega.params.beta
        eps = omega.energy_map()[x]
        at = heisenberg_evolve(omega, annihilator(space, x), -1j * beta)
        pred = np.exp(-beta * (eps - omega.params.mu)) * annihilator(space, x).dense()
        np.testing.assert_allclose(at.dense(), pred, atol=1e-13)

    def test_degree_preserved(self, six_sites):
        omega, space = six_sites
        at = heisenberg_evolve(omega, annihilator(space, space.sites[0]), 2.0)
        assert at.degree == "odd"


class TestSparsePath:
    def test_large_space_is_sparse_and_consistent(self):
        omega_small = chain_realization(6)
        omega_big = chain_realization(9)
        small = FockSpace.from_realization(omega_small)
        big = FockSpace.from_realization(omega_big)
        assert small.dense and not big.dense
        a_big = annihilator(big, big.sites[4])
        assert a_big.is_sparse()
        # CAR at one pair in the sparse representation.
        b = annihilator(big, big.sites[7])
        anti = (a_big @ b.adjoint() + b.adjoint() @ a_big).dense()
        assert np.abs(anti).max() <= 1e-14
        same = (a_big @ a_big.adjoint() + a_big.adjoint() @ a_big).dense()
        np.testing.assert_allclose(same, np.eye(big.dim), atol=1e-14)

    def test_sparse_heisenberg(self):
        omega = chain_realization(9)
        space = FockSpace.from_realization(omega)
        x = space.sites[3]
        eps = omega.energy_map()[x]
        at = heisenberg_evolve(omega, annihilator(space, x), 0.5)
        assert at.is_sparse()
        pred = np.exp(-1j * 0.5 * eps) * annihilator(space, x).dense()
        np.testing.assert_allclose(at.dense(), pred, atol=1e-14)


class TestSerialization:
    def test_operator_json_roundtrip(self, six_sites):
        _, space = six_sites
        a = monomial(space, [(space.sites[0], True), (space.sites[1], False)])
        back = FockOperator.from_json(a.to_json())
        np.testing.assert_allclose(back.dense(), a.dense(), atol=0)
        assert back.degree == a.degree
        assert back.space == space

    def test_deterministic_dump(self, six_sites):
        _, space = six_sites
        a = annihilator(space, space.sites[0])
        assert a.to_json() == a.to_json()
