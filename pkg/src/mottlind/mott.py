"""Variable-range-hopping analytics.

At low temperature a localized electron does not hop to its nearest
neighbor: a long tunneling step to a site that happens to be close in
energy can beat a short step that costs a large activation energy.  The
single-hop transfer probability is modeled as

.. math::

    P(\\varepsilon, r) = \\exp\\!\\left[-\\Bigl(\\frac{\\varepsilon}{k_B T}
        + \\frac{r}{\\xi}\\Bigr)\\right],

where :math:`\\varepsilon \\ge 0` is the energy mismatch the phonon bath
must supply, :math:`r` the hop distance, and :math:`\\xi` the localization
length.  Requiring that a ball of radius ``r`` contain at least one level
within ``epsilon`` of the starting energy ties the two costs together
through the density of states :math:`n_F`:

.. math::

    n_F \\, \\varepsilon \\, r^d = 1 .

Eliminating ``epsilon`` leaves a one-dimensional optimization over ``r``
whose solution is the stretched-exponential law

.. math::

    -\\ln P_{\\mathrm{opt}} = (T_0/T)^{1/(d+1)}, \\qquad
    k_B T_0 = \\frac{(d+1)^{d+1}}{d^d} \\cdot \\frac{1}{n_F\\,\\xi^d}.

This module provides the closed forms, a numerical constrained optimizer
that cross-checks them, and a CSV sweep used by the command-line front
end.  Energies are in meV, lengths in angstrom, temperatures in kelvin.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

from scipy.optimize import minimize_scalar

from .errors import ConfigurationError, ConsistencyError, OptimizationError

__all__ = [
    "KB_MEV_PER_K",
    "SILICON",
    "MottInputs",
    "MottOptimum",
    "closed_form_neg_log_p",
    "closed_form_r_opt",
    "hop_probability",
    "mott_T0",
    "optimize_hop",
    "sweep_to_csv",
]

#: Boltzmann constant in meV per kelvin (fixed internal unit convention).
KB_MEV_PER_K = 0.08617

#: Relative tolerance for the closed-form cross-check inside the optimizer.
_CLOSED_FORM_RTOL = 1e-2

#: Tolerance for the constraint saturation check at the returned optimum.
_CONSTRAINT_TOL = 1e-10


@dataclass(frozen=True)
class MottInputs:
    """Material and thermodynamic inputs for the hopping optimization.

    Parameters
    ----------
    n_F : float
        Density of states at the Fermi level, in 1/(meV · angstrom^d).
    xi : float
        Localization length in angstrom.
    d : int
        Spatial dimension.
    T : float
        Temperature in kelvin.
    kB : float, optional
        Boltzmann constant in meV/K.  Defaults to :data:`KB_MEV_PER_K`.

    Raises
    ------
    ConfigurationError
        If any field is not strictly positive or ``d`` is not an integer.
    """

    n_F: float
    xi: float
    d: int
    T: float
    kB: float = KB_MEV_PER_K

    def __post_init__(self) -> None:
        if not isinstance(self.d, int) or isinstance(self.d, bool):
            raise ConfigurationError(f"dimension must be an integer, got {self.d!r}")
        for name in ("n_F", "xi", "d", "T", "kB"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ConfigurationError(
                    f"{name} must be strictly positive and finite, got {value!r}"
                )

    def with_temperature(self, T: float) -> "MottInputs":
        """Return a copy of these inputs at a different temperature."""
        return MottInputs(self.n_F, self.xi, self.d, T, self.kB)


#: Lightly doped silicon: n_F = 1e-9 / (meV·Å³), localization length 100 Å.
SILICON = MottInputs(n_F=1e-9, xi=100.0, d=3, T=1.0)


def mott_T0(inp: MottInputs) -> float:
    """Characteristic temperature of the stretched-exponential hopping law.

    Parameters
    ----------
    inp : MottInputs
        Material inputs; the temperature field is not used.

    Returns
    -------
    float
        ``T0`` in kelvin, defined through
        ``kB*T0 = ((d+1)^(d+1)/d^d) / (n_F * xi^d)``.
    """
    d = inp.d
    prefactor = (d + 1) ** (d + 1) / d**d
    return prefactor / (inp.n_F * inp.xi**d * inp.kB)


def hop_probability(inp: MottInputs, epsilon: float, r: float) -> float:
    """Transfer probability for a single hop of distance ``r`` and cost ``epsilon``.

    Parameters
    ----------
    inp : MottInputs
        Material inputs supplying ``T``, ``kB`` and ``xi``.
    epsilon : float
        Energy mismatch in meV; must be nonnegative.
    r : float
        Hop distance in angstrom; must be nonnegative.

    Returns
    -------
    float
        ``exp(-(epsilon/(kB*T) + r/xi))``, a value in ``(0, 1]``.
    """
    if epsilon < 0:
        raise ConfigurationError(f"epsilon must be nonnegative, got {epsilon!r}")
    if r < 0:
        raise ConfigurationError(f"r must be nonnegative, got {r!r}")
    return math.exp(-(epsilon / (inp.kB * inp.T) + r / inp.xi))


def closed_form_r_opt(inp: MottInputs) -> float:
    """Closed-form optimal hop distance ``r_opt = (d/(d+1)) * xi * (T0/T)^(1/(d+1))``."""
    ratio = mott_T0(inp) / inp.T
    d = inp.d
    return d / (d + 1) * inp.xi * ratio ** (1.0 / (d + 1))


def closed_form_neg_log_p(inp: MottInputs) -> float:
    """Closed-form optimal exponent ``-ln P_opt = (T0/T)^(1/(d+1))``."""
    return (mott_T0(inp) / inp.T) ** (1.0 / (inp.d + 1))


@dataclass(frozen=True)
class MottOptimum:
    """Result of the constrained hop optimization.

    Attributes
    ----------
    r_opt : float
        Optimal hop distance in angstrom.
    eps_opt : float
        Energy mismatch at the optimum in meV, ``1/(n_F * r_opt^d)``.
    p_opt : float
        Transfer probability at the optimum (may underflow to 0.0 for very
        low temperatures; ``neg_log_p`` never does).
    neg_log_p : float
        ``-ln P`` at the optimum, the physically meaningful exponent.
    t0 : float
        Characteristic temperature ``T0`` in kelvin for these inputs.
    inputs : MottInputs
        The inputs that produced this optimum.
    """

    r_opt: float
    eps_opt: float
    p_opt: float
    neg_log_p: float
    t0: float
    inputs: MottInputs


def _neg_log_p_of_log_r(inp: MottInputs, u: float) -> float:
    """Hop exponent as a function of ``u = ln(r/xi)`` with epsilon eliminated.

    Substituting the constraint ``epsilon = 1/(n_F r^d)`` into the exponent
    gives ``-ln P = exp(-d u)/(n_F xi^d kB T) + exp(u)``, a smooth strictly
    convex function of ``u``.
    """
    a = 1.0 / (inp.n_F * inp.xi**inp.d * inp.kB * inp.T)
    return a * math.exp(-inp.d * u) + math.exp(u)


def optimize_hop(inp: MottInputs) -> MottOptimum:
    """Numerically maximize the hop probability under the level-count constraint.

    The two-variable problem (distance ``r``, energy window ``epsilon``)
    is reduced to one dimension by imposing ``n_F * epsilon * r^d = 1``
    exactly and optimizing over ``u = ln(r/xi)``.  The result is verified
    against the closed forms before being returned.

    Parameters
    ----------
    inp : MottInputs
        Material and thermodynamic inputs.

    Returns
    -------
    MottOptimum
        Optimizer location, energy scale, and probability.

    Raises
    ------
    OptimizationError
        If the minimizer fails to converge or lands on the search
        boundary (bracketing failure).
    ConsistencyError
        If the numerical optimum disagrees with the closed form by more
        than 1% relative in ``-ln P`` or the constraint is not saturated.
    """
    # Bracket u = ln(r/xi) around the analytically expected location, wide
    # enough that a correct optimizer can never touch the edges.
    u_expected = math.log(closed_form_r_opt(inp) / inp.xi)
    lo, hi = u_expected - 12.0, u_expected + 12.0
    result = minimize_scalar(
        lambda u: _neg_log_p_of_log_r(inp, u),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-12},
    )
    if not result.success:
        raise OptimizationError(f"hop optimizer did not converge: {result.message}")
    u_opt = float(result.x)
    margin = 1e-6 * (hi - lo)
    if u_opt - lo < margin or hi - u_opt < margin:
        raise OptimizationError(
            f"hop optimizer hit the search boundary at u={u_opt:.6g} "
            f"(bracket [{lo:.6g}, {hi:.6g}]); bracketing failure"
        )

    r_opt = inp.xi * math.exp(u_opt)
    eps_opt = 1.0 / (inp.n_F * r_opt**inp.d)
    neg_log_p = float(result.fun)

    saturation = abs(inp.n_F * eps_opt * r_opt**inp.d - 1.0)
    if saturation > _CONSTRAINT_TOL:
        raise ConsistencyError(
            f"constraint n_F*eps*r^d = 1 violated by {saturation:.3e}"
        )
    reference = closed_form_neg_log_p(inp)
    deviation = abs(neg_log_p - reference) / reference
    if deviation > _CLOSED_FORM_RTOL:
        raise ConsistencyError(
            f"numerical optimum -ln P = {neg_log_p:.6g} deviates from the "
            f"closed form {reference:.6g} by {deviation:.3e} relative"
        )

    return MottOptimum(
        r_opt=r_opt,
        eps_opt=eps_opt,
        p_opt=math.exp(-neg_log_p) if neg_log_p < 745.0 else 0.0,
        neg_log_p=neg_log_p,
        t0=mott_T0(inp),
        inputs=inp,
    )


def sweep_to_csv(inp: MottInputs, temperatures: list[float]) -> str:
    """Tabulate the hopping optimum over a list of temperatures.

    Parameters
    ----------
    inp : MottInputs
        Base inputs; each row replaces only the temperature.
    temperatures : list of float
        Temperatures in kelvin, each strictly positive.

    Returns
    -------
    str
        CSV text with header ``T,T0,r_opt_over_xi,eps_opt,neg_log_p``.
    """
    if not temperatures:
        raise ConfigurationError("temperature sweep must be nonempty")
    out = io.StringIO()
    out.write("T,T0,r_opt_over_xi,eps_opt,neg_log_p\n")
    for temperature in temperatures:
        opt = optimize_hop(inp.with_temperature(float(temperature)))
        out.write(
            f"{temperature:.17g},{opt.t0:.17g},{opt.r_opt / inp.xi:.17g},"
            f"{opt.eps_opt:.17g},{opt.neg_log_p:.17g}\n"
        )
    return out.getvalue()
