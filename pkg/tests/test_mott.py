"""Variable-range-hopping analytics tests."""

import math

import numpy as np
import pytest

from mottlind.errors import ConfigurationError, OptimizationError
from mottlind.mott import (
    KB_MEV_PER_K,
    SILICON,
    MottInputs,
    closed_form_neg_log_p,
    closed_form_r_opt,
    hop_probability,
    mott_T0,
    optimize_hop,
    sweep_to_csv,
)


# -- characteristic temperature ---------------------------------------------------


def test_silicon_t0_value():
    t0 = mott_T0(SILICON)
    assert t0 == pytest.approx((256.0 / 27.0) * 1e3 / KB_MEV_PER_K, rel=1e-14)
    assert abs(t0 - 1.1e5) / 1.1e5 < 0.10
    assert abs(t0**0.25 - 18.0) < 0.5


def test_t0_inverse_in_density_of_states():
    doubled = MottInputs(n_F=2e-9, xi=100.0, d=3, T=1.0)
    assert mott_T0(doubled) == pytest.approx(mott_T0(SILICON) / 2.0, rel=1e-14)


def test_t0_prefactor_in_one_dimension():
    inp = MottInputs(n_F=0.5, xi=2.0, d=1, T=1.0, kB=1.0)
    assert mott_T0(inp) == pytest.approx(4.0 / (0.5 * 2.0), rel=1e-14)


# -- hop probability ----------------------------------------------------------------


def test_hop_probability_extremes():
    assert hop_probability(SILICON, 0.0, 0.0) == 1.0
    kb_t = SILICON.kB * SILICON.T
    assert hop_probability(SILICON, kb_t, SILICON.xi) == pytest.approx(
        math.exp(-2.0), rel=1e-14
    )


def test_hop_probability_rejects_negative_arguments():
    with pytest.raises(ConfigurationError):
        hop_probability(SILICON, -1e-9, 0.0)
    with pytest.raises(ConfigurationError):
        hop_probability(SILICON, 0.0, -1e-9)


def test_probability_at_optimum_matches_stretched_exponential():
    opt = optimize_hop(SILICON)
    direct = hop_probability(SILICON, opt.eps_opt, opt.r_opt)
    assert direct == pytest.approx(
        math.exp(-closed_form_neg_log_p(SILICON)), rel=1e-12
    )


# -- the optimizer ------------------------------------------------------------------


def test_silicon_optimum():
    opt = optimize_hop(SILICON)
    assert abs(opt.neg_log_p - 18.0) < 0.5
    assert opt.p_opt == pytest.approx(1.2e-8, rel=0.05)
    assert opt.r_opt / SILICON.xi == pytest.approx(
        closed_form_r_opt(SILICON) / SILICON.xi, rel=1e-7
    )
    assert opt.t0 == mott_T0(SILICON)
    assert opt.inputs == SILICON


def test_optimum_at_characteristic_temperature():
    inp = SILICON.with_temperature(mott_T0(SILICON))
    assert optimize_hop(inp).neg_log_p == pytest.approx(1.0, rel=1e-9)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_optimizer_matches_closed_form_across_window(d):
    base = MottInputs(n_F=1e-9, xi=100.0, d=d, T=1.0)
    t0 = mott_T0(base)
    for fraction in (1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0):
        inp = base.with_temperature(fraction * t0)
        opt = optimize_hop(inp)
        reference = closed_form_neg_log_p(inp)
        assert abs(opt.neg_log_p - reference) / reference < 1e-9
        assert abs(inp.n_F * opt.eps_opt * opt.r_opt**d - 1.0) < 1e-10


@pytest.mark.parametrize("d", [1, 2, 3])
def test_energy_scale_exponent(d):
    # eps_opt ~ T^(d/(d+1)): log-log slope over a decade.
    base = MottInputs(n_F=1e-9, xi=100.0, d=d, T=1.0)
    t0 = mott_T0(base)
    temps = np.geomspace(1e-4 * t0, 1e-3 * t0, 9)
    eps = [optimize_hop(base.with_temperature(t)).eps_opt for t in temps]
    slope = np.polyfit(np.log(temps), np.log(eps), 1)[0]
    assert abs(slope - d / (d + 1)) < 1e-3


def test_probability_underflow_keeps_exponent_finite():
    inp = SILICON.with_temperature(1e-30)
    opt = optimize_hop(inp)
    assert opt.p_opt == 0.0
    assert math.isfinite(opt.neg_log_p) and opt.neg_log_p > 700.0


def test_boundary_hit_is_reported(monkeypatch):
    import mottlind.mott as mott_module

    # Force the bracket to exclude the true optimum so the minimizer pins
    # to an edge, which must be reported as a bracketing failure.
    monkeypatch.setattr(
        mott_module, "closed_form_r_opt", lambda inp: inp.xi * math.exp(20.0)
    )
    with pytest.raises(OptimizationError):
        optimize_hop(SILICON)


# -- input validation ---------------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(n_F=0.0, xi=100.0, d=3, T=1.0),
        dict(n_F=1e-9, xi=-1.0, d=3, T=1.0),
        dict(n_F=1e-9, xi=100.0, d=3, T=0.0),
        dict(n_F=1e-9, xi=100.0, d=3, T=1.0, kB=0.0),
        dict(n_F=1e-9, xi=100.0, d=3, T=math.inf),
    ],
)
def test_inputs_must_be_strictly_positive(kwargs):
    with pytest.raises(ConfigurationError):
        MottInputs(**kwargs)


def test_dimension_must_be_a_true_integer():
    with pytest.raises(ConfigurationError):
        MottInputs(n_F=1e-9, xi=100.0, d=3.0, T=1.0)
    with pytest.raises(ConfigurationError):
        MottInputs(n_F=1e-9, xi=100.0, d=True, T=1.0)
    with pytest.raises(ConfigurationError):
        MottInputs(n_F=1e-9, xi=100.0, d=-2, T=1.0)


def test_with_temperature_preserves_other_fields():
    warm = SILICON.with_temperature(300.0)
    assert warm.T == 300.0
    assert (warm.n_F, warm.xi, warm.d, warm.kB) == (
        SILICON.n_F,
        SILICON.xi,
        SILICON.d,
        SILICON.kB,
    )


# -- sweep table --------------------------------------------------------------------


def test_sweep_to_csv_rows():
    text = sweep_to_csv(SILICON, [1.0, 4.0, 100.0])
    lines = text.strip().split("\n")
    assert lines[0] == "T,T0,r_opt_over_xi,eps_opt,neg_log_p"
    assert len(lines) == 4
    t, t0, r_over_xi, eps, nlp = (float(v) for v in lines[1].split(","))
    opt = optimize_hop(SILICON.with_temperature(1.0))
    assert t == 1.0
    assert t0 == opt.t0
    assert r_over_xi == pytest.approx(opt.r_opt / SILICON.xi, rel=1e-15)
    assert eps == pytest.approx(opt.eps_opt, rel=1e-15)
    assert nlp == pytest.approx(opt.neg_log_p, rel=1e-15)


def test_sweep_requires_temperatures():
    with pytest.raises(ConfigurationError):
        sweep_to_csv(SILICON, [])
