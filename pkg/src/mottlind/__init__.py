"""mottlind: dissipative electron hopping at exact finite volume.

A lightly doped semiconductor is modeled as a random set of impurity
sites in a finite box, coupled to a thermal phonon bath (hops between
impurities) and a particle reservoir (exchange with the valence band).
The package provides, at exact finite volume:

- quenched disorder sampling and geometry (:mod:`mottlind.model`),
- the fermionic Fock-space layer via a Jordan-Wigner encoding
  (:mod:`mottlind.fock`),
- thermally weighted jump operators with their structural axioms
  (:mod:`mottlind.jumps`),
- the graded Lindblad generator and its complete-positivity/KMS
  structure (:mod:`mottlind.lindblad`),
- the equilibrium (Fermi-Dirac) state, its GNS representation, and an
  explicit orthonormal eigenbasis (:mod:`mottlind.gns`),
- exact spectral analysis of the generator: kernel, spectral gap,
  return to equilibrium (:mod:`mottlind.spectra`),
- the induced classical hopping process and a kinetic Monte Carlo
  engine (:mod:`mottlind.kmc`),
- Mott variable-range-hopping analytics (:mod:`mottlind.mott`),
- a deterministic command-line interface (:mod:`mottlind.cli`).
"""

from .errors import (
    AxiomViolationError,
    BoundDivergenceError,
    ConfigurationError,
    ConsistencyError,
    DegenerateNormalizationError,
    MottlindError,
    OptimizationError,
    SiteError,
    SizeError,
)
from .fock import (
    FockOperator,
    FockSpace,
    annihilator,
    creator,
    monomial,
    number_op,
)
from .gns import (
    dirichlet_form,
    enumerate_basis,
    equilibrium_weights,
    kms_check,
    state_eval,
    to_gns_coords,
)
from .jumps import Jump, JumpCatalogue, enumerate_jumps, verify_axioms
from .kmc import (
    brute_force_stationary,
    classical_generator,
    equilibrium_configuration,
    gillespie_run,
    hop_statistics,
    occupancy_report,
    run_replicas,
)
from .lindblad import GeneratorSpec, apply_generator, semigroup_apply
from .model import (
    DisorderRealization,
    ModelParams,
    RateModulation,
    normalization_Z,
    sample_disorder,
    translate,
)
from .mott import MottInputs, mott_T0, optimize_hop
from .spectra import (
    assemble,
    kernel_and_gap,
    restrict_to_K,
    return_to_equilibrium,
    spectrum,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "MottlindError",
    "ConfigurationError",
    "SiteError",
    "DegenerateNormalizationError",
    "ConsistencyError",
    "AxiomViolationError",
    "BoundDivergenceError",
    "SizeError",
    "OptimizationError",
    # disorder model
    "ModelParams",
    "RateModulation",
    "DisorderRealization",
    "sample_disorder",
    "translate",
    "normalization_Z",
    # Fock layer
    "FockSpace",
    "FockOperator",
    "annihilator",
    "creator",
    "number_op",
    "monomial",
    # jumps
    "Jump",
    "JumpCatalogue",
    "enumerate_jumps",
    "verify_axioms",
    # generator
    "GeneratorSpec",
    "apply_generator",
    "semigroup_apply",
    # equilibrium state and its representation
    "state_eval",
    "equilibrium_weights",
    "enumerate_basis",
    "to_gns_coords",
    "kms_check",
    "dirichlet_form",
    # spectral analysis
    "assemble",
    "spectrum",
    "kernel_and_gap",
    "restrict_to_K",
    "return_to_equilibrium",
    # classical process
    "classical_generator",
    "brute_force_stationary",
    "equilibrium_configuration",
    "gillespie_run",
    "run_replicas",
    "hop_statistics",
    "occupancy_report",
    # hopping analytics
    "MottInputs",
    "mott_T0",
    "optimize_hop",
]
