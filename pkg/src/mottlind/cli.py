"""Command-line front end.

The ``mottlind`` executable wires the library modules into seeded,
machine-readable experiments:

``verify``
    Structural identity suite on a sampled disorder realization:
    canonical anticommutation relations, the jump-catalogue axioms
    (involution, grading, covariance, detailed balance, boundedness),
    the KMS condition on random monomial pairs, the graded Leibniz
    rule, the Dirichlet-form/generator identities, and stationarity
    of the equilibrium state.
``spectrum``
    Assembles the generator in the orthonormal equilibrium basis and
    reports eigenvalues, kernel dimension, and the spectral-gap bounds.
``evolve``
    Return-to-equilibrium series: decay of observables under the
    semigroup against the exponential bound.
``kmc``
    Kinetic-Monte-Carlo replicas of the classical reduction with
    batch-means occupation statistics.
``mott``
    Variable-range-hopping analytics table.
``sample``
    Disorder realization dump.

Every run writes a manifest embedding the fully resolved configuration
and seed list; the only field that varies between identical runs is the
manifest timestamp, so report artifacts are byte-identical for equal
configurations.  Exit status: 0 when every enabled assertion passes,
1 when any check fails, 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import datetime
import io
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import __version__
from .errors import ConfigurationError, MottlindError
from .fock import FockOperator, FockSpace, annihilator, monomial
from .gns import dirichlet_form, enumerate_basis, kms_check, state_eval
from .jumps import enumerate_jumps, verify_axioms
from .kmc import (
    classical_generator,
    hop_statistics,
    occupancy_report,
    run_replicas,
)
from .lindblad import GeneratorSpec, apply_generator, leibniz_defect
from .model import ModelParams, sample_disorder
from .mott import KB_MEV_PER_K, MottInputs, closed_form_neg_log_p, optimize_hop
from .spectra import (
    assemble,
    kernel_and_gap,
    restrict_to_K,
    return_to_equilibrium,
    spectrum as compute_spectrum,
    star_eigenvalue,
)

__all__ = [
    "COMMANDS",
    "DEFAULT_TOLERANCES",
    "MANIFEST_SCHEMA",
    "PRESETS",
    "REPORT_SCHEMA",
    "THREADS_ENV_VAR",
    "RunConfig",
    "build_parser",
    "main",
    "resolve_config",
    "run",
]

MANIFEST_SCHEMA = "mottlind/manifest-v1"
REPORT_SCHEMA = "mottlind/report-v1"

#: Environment variable supplying the default worker-thread count.
THREADS_ENV_VAR = "MOTTLIND_THREADS"

COMMANDS = ("verify", "spectrum", "evolve", "kmc", "mott", "sample")

#: Default check tolerances; every report row carries the one it used.
#: An entry can be overridden from the config file (``"tolerances"``
#: block) or with repeatable ``--tol NAME=VALUE`` flags.
DEFAULT_TOLERANCES: dict[str, float] = {
    # verify: absolute ceiling for all structural identity deviations.
    "identity": 1e-10,
    # verify: ceiling for the norm of the aggregate jump-operator sum
    # (a boundedness report; generous by construction at desk scale).
    "aggregate_norm": 1e6,
    # spectrum --parts star: off-diagonal absolute / diagonal relative.
    "star_offdiag": 1e-12,
    "star_diag_rel": 1e-12,
    # spectrum: slack subtracted from the gap and occupation-block bounds.
    "gap_slack": 1e-10,
    # spectrum: minimal overlap of the kernel vector with the identity.
    "overlap": 1e-8,
    # evolve: absolute convergence target at the final grid time.
    "return_abs": 1e-8,
    # kmc: batch-means window (standard errors) and passing fraction.
    "se_factor": 4.0,
    "fraction_within": 0.99,
    # mott: relative agreement of the optimizer with the closed form.
    "mott_rel": 1e-2,
}

_DEFAULT_PARAMS = dict(
    beta=1.0,
    mu=0.0,
    gamma0=1.0,
    gamma_star=1.0,
    r_loc=1.0,
    delta=(-1.0, 1.0),
    dim=1,
    box=(4,),
    impurity_density=1.0,
)

_DEFAULT_MOTT = {
    "n_F": 1e-9,
    "xi": 100.0,
    "d": 3,
    "kB": KB_MEV_PER_K,
    "temperatures": [1.0, 2.0, 4.0, 10.0, 30.0, 100.0, 300.0],
}

#: Named parameter bundles. ``desk-small`` is a four-site chain sized
#: for exact spectra; ``desk-kmc`` is a 20x20x20 box at 10% filling for
#: the stochastic engine; ``silicon`` carries the lightly doped silicon
#: hopping-analytics numbers.
PRESETS: dict[str, dict[str, Any]] = {
    "desk-small": {"params": dict(_DEFAULT_PARAMS)},
    "desk-kmc": {
        "params": dict(
            beta=2.0,
            mu=0.0,
            gamma0=1.0,
            gamma_star=0.3,
            r_loc=0.5,
            delta=(-0.5, 0.5),
            dim=3,
            box=(20, 20, 20),
            impurity_density=0.1,
            hop_cutoff=6.0,
        ),
        "options": {"replicas": 4, "events": 200_000},
    },
    "silicon": {"options": {"mott": dict(_DEFAULT_MOTT)}},
}

_DEFAULT_OPTIONS: dict[str, dict[str, Any]] = {
    "verify": {"kms_pairs": 5, "identity_pairs": 3},
    "spectrum": {"parts": ["kin", "star"]},
    "evolve": {
        "observables": 5,
        "states": 2,
        "t_grid": [0.5, 1.0, 2.0, 5.0, 10.0, 40.0],
    },
    "kmc": {
        "replicas": 4,
        "events": 200_000,
        "t_max": None,
        "init": "equilibrium",
        "log_events": False,
    },
    "mott": {"mott": dict(_DEFAULT_MOTT)},
    "sample": {},
}

_CONFIG_KEYS = {
    "command",
    "params",
    "seeds",
    "output_path",
    "output_format",
    "tolerances",
    "threads",
    "options",
}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved description of one command-line run.

    Attributes
    ----------
    command : str
        One of :data:`COMMANDS`.
    params : ModelParams
        Lattice model parameters (ignored by ``mott``).
    seeds : tuple of int
        Disorder/experiment seeds; one independent run per seed.
    output_path : str or None
        Artifact destination; ``None`` writes the artifact to stdout
        and the manifest to stderr.
    output_format : str
        ``"json"`` or ``"csv"``.
    tolerances : mapping
        Resolved tolerance table (defaults plus overrides).
    threads : int
        Worker threads for replica-level parallelism.
    options : mapping
        Command-specific options.
    """

    command: str
    params: ModelParams
    seeds: tuple[int, ...]
    output_path: str | None
    output_format: str
    tolerances: Mapping[str, float]
    threads: int
    options: Mapping[str, Any]

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigurationError(f"unknown command {self.command!r}")
        if self.output_format not in ("json", "csv"):
            raise ConfigurationError(
                f"output_format must be 'json' or 'csv', got {self.output_format!r}"
            )
        if not self.seeds:
            raise ConfigurationError("at least one seed is required")
        if any(not isinstance(s, int) or isinstance(s, bool) for s in self.seeds):
            raise ConfigurationError("seeds must be integers")
        if self.threads < 1:
            raise ConfigurationError("threads must be at least 1")

    def tolerance(self, name: str) -> float:
        return float(self.tolerances[name])

    def to_manifest(self) -> dict:
        """Manifest dictionary embedding the full resolved configuration."""
        return {
            "schema": MANIFEST_SCHEMA,
            "package_version": __version__,
            "command": self.command,
            "params": self.params.to_dict(),
            "seeds": list(self.seeds),
            "output_path": self.output_path,
            "output_format": self.output_format,
            "tolerances": dict(self.tolerances),
            "threads": self.threads,
            "options": _jsonify(self.options),
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        }


# -- configuration resolution ------------------------------------------------------


def _jsonify(value):
    """Recursively convert numpy scalars/arrays to plain JSON types."""
    if isinstance(value, Mapping):
        return {str(k): _jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonify(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonify(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    return value


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigurationError(
            f"{THREADS_ENV_VAR} must be an integer, got {raw!r}"
        ) from None
    if value < 1:
        raise ConfigurationError(f"{THREADS_ENV_VAR} must be at least 1")
    return value


def _parse_tol_overrides(pairs: Sequence[str] | None) -> dict[str, float]:
    overrides: dict[str, float] = {}
    for pair in pairs or ():
        name, sep, raw = pair.partition("=")
        if not sep or not name:
            raise ConfigurationError(
                f"--tol expects NAME=VALUE, got {pair!r}"
            )
        try:
            overrides[name] = float(raw)
        except ValueError:
            raise ConfigurationError(
                f"--tol value for {name!r} is not a number: {raw!r}"
            ) from None
    return overrides


def _parse_float_list(text: str, flag: str) -> list[float]:
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigurationError(f"{flag} expects comma-separated numbers") from None
    if not values:
        raise ConfigurationError(f"{flag} must be nonempty")
    return values


def _parse_parts(text: str) -> list[str]:
    parts = [tok.strip() for tok in text.split(",") if tok.strip()]
    if not parts or any(p not in ("kin", "star") for p in parts):
        raise ConfigurationError(
            f"--parts expects a comma list drawn from 'kin','star', got {text!r}"
        )
    return sorted(set(parts))


def _load_config_file(path: Path) -> dict:
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigurationError("config file must hold a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigurationError(f"unknown config keys {sorted(unknown)}")
    return raw


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, preset, config file, and CLI flags into a RunConfig.

    Precedence, lowest to highest: built-in defaults, ``--preset``,
    ``--config`` file, explicit command-line flags.
    """
    command = args.command
    params_dict: dict[str, Any] = dict(_DEFAULT_PARAMS)
    seeds: tuple[int, ...] = (0,)
    output_path: str | None = None
    output_format = "json"
    tolerances = dict(DEFAULT_TOLERANCES)
    threads = _default_threads()
    options: dict[str, Any] = json.loads(json.dumps(_DEFAULT_OPTIONS[command]))

    if args.preset is not None:
        preset = PRESETS[args.preset]
        if "params" in preset:
            params_dict = dict(preset["params"])
        for key, value in preset.get("options", {}).items():
            options[key] = json.loads(json.dumps(_jsonify(value)))

    if args.config is not None:
        raw = _load_config_file(Path(args.config))
        if "command" in raw and raw["command"] != command:
            raise ConfigurationError(
                f"config file is for command {raw['command']!r}, "
                f"but {command!r} was requested"
            )
        if "params" in raw:
            if not isinstance(raw["params"], dict):
                raise ConfigurationError("config 'params' must be an object")
            merged = dict(params_dict)
            merged.update(raw["params"])
            params_dict = merged
        if "seeds" in raw:
            if not isinstance(raw["seeds"], list) or not raw["seeds"]:
                raise ConfigurationError("config 'seeds' must be a nonempty list")
            seeds = tuple(raw["seeds"])
        if "output_path" in raw and raw["output_path"] is not None:
            output_path = str(raw["output_path"])
        if "output_format" in raw:
            output_format = raw["output_format"]
        if "tolerances" in raw:
            if not isinstance(raw["tolerances"], dict):
                raise ConfigurationError("config 'tolerances' must be an object")
            for name, value in raw["tolerances"].items():
                if not isinstance(value, (int, float)) or isinstance(value, bool):
                    raise ConfigurationError(
                        f"tolerance {name!r} must be a number"
                    )
                tolerances[name] = float(value)
        if "threads" in raw:
            if not isinstance(raw["threads"], int) or isinstance(raw["threads"], bool):
                raise ConfigurationError("config 'threads' must be an integer")
            threads = raw["threads"]
        if "options" in raw:
            if not isinstance(raw["options"], dict):
                raise ConfigurationError("config 'options' must be an object")
            options.update(raw["options"])

    if args.seed:
        seeds = tuple(args.seed)
    if args.out is not None:
        output_path = str(args.out)
    if args.output_format is not None:
        output_format = args.output_format
    if args.threads is not None:
        threads = args.threads
    tolerances.update(_parse_tol_overrides(args.tol))

    # Command-specific flag overrides.
    if command == "verify":
        if args.kms_pairs is not None:
            options["kms_pairs"] = args.kms_pairs
    elif command == "spectrum":
        if args.parts is not None:
            options["parts"] = _parse_parts(args.parts)
    elif command == "evolve":
        if args.observables is not None:
            options["observables"] = args.observables
        if args.states is not None:
            options["states"] = args.states
        if args.t_grid is not None:
            options["t_grid"] = _parse_float_list(args.t_grid, "--t-grid")
    elif command == "kmc":
        if args.replicas is not None:
            options["replicas"] = args.replicas
        if args.events is not None:
            options["events"] = args.events
        if args.t_max is not None:
            options["t_max"] = args.t_max
        if args.init is not None:
            options["init"] = args.init
        if args.log_events:
            options["log_events"] = True
    elif command == "mott":
        mott_options = dict(options.get("mott", _DEFAULT_MOTT))
        if args.dimension is not None:
            mott_options["d"] = args.dimension
        if args.n_F is not None:
            mott_options["n_F"] = args.n_F
        if args.xi is not None:
            mott_options["xi"] = args.xi
        if args.kB is not None:
            mott_options["kB"] = args.kB
        if args.temperatures is not None:
            mott_options["temperatures"] = _parse_float_list(
                args.temperatures, "--temperatures"
            )
        options["mott"] = mott_options

    try:
        params = ModelParams.from_dict(
            {k: tuple(v) if isinstance(v, list) else v for k, v in params_dict.items()}
        )
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"invalid model parameters: {exc}") from None

    return RunConfig(
        command=command,
        params=params,
        seeds=seeds,
        output_path=output_path,
        output_format=output_format,
        tolerances=tolerances,
        threads=threads,
        options=options,
    )


# -- report rows ---------------------------------------------------------------------


def _row(name, seed, value, bound, cmp, *, extra=None) -> dict:
    """One report row: a named value checked against a bound.

    ``cmp`` is the direction of the check: ``"<="`` for deviations,
    ``">="`` for quantities bounded from below, ``"=="`` for exact
    integer expectations.  Every row carries the bound it was checked
    against.
    """
    value = float(value)
    bound = float(bound)
    if cmp == "<=":
        ok = value <= bound
    elif cmp == ">=":
        ok = value >= bound
    elif cmp == "==":
        ok = value == bound
    else:  # pragma: no cover - internal misuse
        raise ValueError(f"bad comparison {cmp!r}")
    row = {
        "check": name,
        "seed": seed,
        "value": value,
        "tolerance": bound,
        "cmp": cmp,
        "ok": bool(ok),
    }
    if extra:
        row.update(_jsonify(extra))
    return row


def _rows_to_csv(rows: Sequence[dict]) -> str:
    out = io.StringIO()
    out.write("check,seed,value,tolerance,cmp,ok\n")
    for r in rows:
        seed = "" if r["seed"] is None else r["seed"]
        out.write(
            f"{r['check']},{seed},{r['value']:.16e},{r['tolerance']:.16e},"
            f"{r['cmp']},{int(r['ok'])}\n"
        )
    return out.getvalue()


# -- verify -------------------------------------------------------------------------


def _random_monomial(space: FockSpace, rng: np.random.Generator) -> FockOperator:
    length = int(rng.integers(1, 4))
    word = [
        (space.sites[int(rng.integers(space.n))], bool(rng.integers(2)))
        for _ in range(length)
    ]
    return monomial(space, word)


def _random_operator(space: FockSpace, rng: np.random.Generator) -> FockOperator:
    mat = rng.normal(size=(space.dim, space.dim)) + 1j * rng.normal(
        size=(space.dim, space.dim)
    )
    return FockOperator(space, mat, "mixed")


def _car_deviation(space: FockSpace) -> float:
    """Largest deviation of the canonical anticommutation relations."""
    eye = np.eye(space.dim)
    ops = [annihilator(space, s).dense() for s in space.sites]
    worst = 0.0
    for i, ax in enumerate(ops):
        for j in range(i, len(ops)):
            ay = ops[j]
            delta = eye if i == j else np.zeros_like(eye)
            worst = max(
                worst,
                float(np.abs(ax @ ay.conj().T + ay.conj().T @ ax - delta).max()),
                float(np.abs(ax @ ay + ay @ ax).max()),
            )
    return worst


def _run_verify(config: RunConfig) -> tuple[list[dict], dict]:
    tol = config.tolerance("identity")
    rows: list[dict] = []
    for seed in config.seeds:
        omega = sample_disorder(config.params, seed)
        space = FockSpace.from_realization(omega)
        catalogue = enumerate_jumps(omega)
        spec = GeneratorSpec(catalogue)
        rng = np.random.default_rng(seed + 1)

        rows.append(_row("car", seed, _car_deviation(space), tol, "<="))

        axioms = verify_axioms(catalogue, space)
        rows.append(_row("J1-involution", seed, axioms.j1_involution, tol, "<="))
        rows.append(_row("J2-grading", seed, axioms.j2_structure, tol, "<="))
        if axioms.j2_translation is not None:
            rows.append(
                _row("J2-translation", seed, axioms.j2_translation, tol, "<=")
            )
        rows.append(_row("J3-covariance", seed, axioms.j3_covariance, tol, "<="))
        rows.append(_row("J4-detailed-balance", seed, axioms.j4_kms, tol, "<="))
        rows.append(
            _row(
                "J5-aggregate-norm",
                seed,
                axioms.j5_norm,
                config.tolerance("aggregate_norm"),
                "<=",
            )
        )

        kms_dev = 0.0
        for _ in range(int(config.options["kms_pairs"])):
            a = _random_monomial(space, rng)
            b = _random_monomial(space, rng)
            kms_dev = max(kms_dev, kms_check(omega, a, b))
        rows.append(_row("kms-monomials", seed, kms_dev, tol, "<="))

        leibniz = 0.0
        dirichlet = 0.0
        stationarity = 0.0
        for _ in range(int(config.options["identity_pairs"])):
            a = _random_operator(space, rng)
            b = _random_operator(space, rng)
            leibniz = max(leibniz, leibniz_defect(spec, a, b))
            q = dirichlet_form(catalogue, a, b)
            scale = max(1.0, abs(q))
            right = state_eval(omega, a.adjoint() @ apply_generator(spec, b))
            left = state_eval(omega, apply_generator(spec, a).adjoint() @ b)
            dirichlet = max(
                dirichlet, abs(q - right) / scale, abs(q - left) / scale
            )
            image = apply_generator(spec, a)
            a_scale = max(1.0, float(np.abs(a.dense()).max()))
            stationarity = max(
                stationarity, abs(state_eval(omega, image)) / a_scale
            )
        rows.append(_row("leibniz", seed, leibniz, tol, "<="))
        rows.append(_row("dirichlet-identity", seed, dirichlet, tol, "<="))
        rows.append(_row("stationarity", seed, stationarity, tol, "<="))
    return rows, {}


# -- spectrum -----------------------------------------------------------------------


def _run_spectrum(config: RunConfig) -> tuple[list[dict], dict]:
    parts = frozenset(config.options["parts"])
    rows: list[dict] = []
    runs = []
    for seed in config.seeds:
        omega = sample_disorder(config.params, seed)
        catalogue = enumerate_jumps(omega)
        gm = assemble(catalogue, parts=parts)
        spec_result = compute_spectrum(gm)
        gap_report = kernel_and_gap(gm)
        gamma_star = omega.params.gamma_star
        slack = config.tolerance("gap_slack")

        rows.append(
            _row("psd-min-eigenvalue", seed, spec_result.eigenvalues[0], -slack, ">=")
        )
        # The kernel-uniqueness and gap theorems require the reservoir
        # jumps; without them the kernel is legitimately degenerate, so
        # those rows are only asserted when the star part is enabled.
        if "star" in parts:
            rows.append(_row("kernel-dim", seed, gap_report.kernel_dim, 1, "=="))
            rows.append(
                _row(
                    "kernel-identity-overlap",
                    seed,
                    gap_report.identity_overlap,
                    1.0 - config.tolerance("overlap"),
                    ">=",
                )
            )
            rows.append(
                _row(
                    "gap-vs-half-star",
                    seed,
                    gap_report.gap,
                    gap_report.star_floor - slack,
                    ">=",
                )
            )
            restriction = restrict_to_K(gm)
            rows.append(
                _row(
                    "occupation-block-min",
                    seed,
                    restriction.min_eigenvalue,
                    gamma_star - slack,
                    ">=",
                )
            )
        if parts == frozenset({"star"}):
            basis = gm.basis
            mat = gm.matrix
            offdiag = float(np.abs(mat - np.diag(np.diag(mat))).max())
            rows.append(
                _row(
                    "star-offdiagonal",
                    seed,
                    offdiag,
                    config.tolerance("star_offdiag"),
                    "<=",
                )
            )
            diag = np.diag(mat)
            rel = 0.0
            for k in range(len(basis)):
                expected = star_eigenvalue(catalogue, basis.element(k))
                rel = max(rel, abs(diag[k] - expected) / max(expected, 1.0))
            rows.append(
                _row(
                    "star-diagonal-rel",
                    seed,
                    rel,
                    config.tolerance("star_diag_rel"),
                    "<=",
                )
            )
        runs.append(
            {
                "seed": seed,
                "n_sites": omega.n_occupied,
                "dim": gm.dim,
                "parts": sorted(parts),
                "kernel_dim": gap_report.kernel_dim,
                "identity_overlap": gap_report.identity_overlap,
                "gap": gap_report.gap,
                "star_floor": gap_report.star_floor,
                "eigenvalues": [float(v) for v in spec_result.eigenvalues],
                "eigenvalue_residual": spec_result.residual,
            }
        )
    return rows, {"runs": runs}


def _spectrum_csv(config: RunConfig, data: dict) -> str:
    out = io.StringIO()
    out.write("seed,index,eigenvalue,residual_tolerance\n")
    for run in data["runs"]:
        for k, val in enumerate(run["eigenvalues"]):
            out.write(f"{run['seed']},{k},{val:.16e},1e-09\n")
    return out.getvalue()


# -- evolve -------------------------------------------------------------------------


def _run_evolve(config: RunConfig) -> tuple[list[dict], dict]:
    rows: list[dict] = []
    runs = []
    n_obs = int(config.options["observables"])
    n_states = int(config.options["states"])
    grid_units = [float(t) for t in config.options["t_grid"]]
    return_abs = config.tolerance("return_abs")
    for seed in config.seeds:
        omega = sample_disorder(config.params, seed)
        space = FockSpace.from_realization(omega)
        catalogue = enumerate_jumps(omega)
        gm = assemble(catalogue)
        rng = np.random.default_rng(seed + 1)
        gamma_star = omega.params.gamma_star
        t_grid = [t / gamma_star for t in grid_units]
        worst_ratio = 0.0
        final_dev = 0.0
        series = []
        for k_obs in range(n_obs):
            observable = _random_operator(space, rng)
            for k_state in range(n_states):
                raw = rng.exponential(size=space.dim)
                rho_tilde = raw / raw.sum()
                report = return_to_equilibrium(gm, observable, rho_tilde, t_grid)
                ratios = report.deviations / np.maximum(report.bounds, 1e-300)
                worst_ratio = max(worst_ratio, float(ratios.max()))
                final_dev = max(final_dev, float(report.deviations[-1]))
                series.append(
                    {
                        "seed": seed,
                        "observable": k_obs,
                        "state": k_state,
                        "constant": report.constant,
                        "gap": report.gap,
                        "times": [float(t) for t in report.times],
                        "deviations": [float(d) for d in report.deviations],
                        "bounds": [float(b) for b in report.bounds],
                    }
                )
        rows.append(_row("return-bound-ratio", seed, worst_ratio, 1.0, "<="))
        rows.append(
            _row("return-final-deviation", seed, final_dev, return_abs, "<=")
        )
        runs.append({"seed": seed, "series": series})
    return rows, {"runs": runs}


def _evolve_csv(data: dict) -> str:
    out = io.StringIO()
    out.write("seed,observable,state,t,deviation,bound,ok\n")
    for run in data["runs"]:
        for s in run["series"]:
            for t, dev, bnd in zip(s["times"], s["deviations"], s["bounds"]):
                out.write(
                    f"{s['seed']},{s['observable']},{s['state']},"
                    f"{t:.16e},{dev:.16e},{bnd:.16e},{int(dev <= bnd)}\n"
                )
    return out.getvalue()


# -- kmc ----------------------------------------------------------------------------


def _run_kmc(config: RunConfig) -> tuple[list[dict], dict]:
    rows: list[dict] = []
    runs = []
    opts = config.options
    se_factor = config.tolerance("se_factor")
    fraction_tol = config.tolerance("fraction_within")
    t_max = opts.get("t_max")
    for seed in config.seeds:
        omega = sample_disorder(config.params, seed)
        catalogue = enumerate_jumps(omega)
        gen = classical_generator(omega, catalogue)
        trajectories = run_replicas(
            gen,
            int(opts["replicas"]),
            seed=seed,
            t_max=math.inf if t_max is None else float(t_max),
            max_events=int(opts["events"]),
            init=str(opts["init"]),
            threads=config.threads,
            log_events=bool(opts["log_events"]),
        )
        occupancy = occupancy_report(trajectories, se_factor=se_factor)
        rows.append(
            _row(
                "occupancy-fraction-within",
                seed,
                occupancy["fraction_within"],
                fraction_tol,
                ">=",
                extra={"se_factor": se_factor, "n_batches": occupancy["n_batches"]},
            )
        )
        replica_records = []
        for i, traj in enumerate(trajectories):
            record = traj.to_json_record(replica=i)
            record["hop_statistics"] = _jsonify(hop_statistics(traj, omega))
            if bool(opts["log_events"]):
                record["events_csv"] = traj.events_to_csv()
            replica_records.append(record)
        runs.append(
            {
                "seed": seed,
                "n_sites": gen.n,
                "n_hop_channels": gen.n_hop_channels,
                "fraction_within": occupancy["fraction_within"],
                "n_batches": occupancy["n_batches"],
                "se_factor": se_factor,
                "replicas": replica_records,
                "occupancy": {
                    "mean": [float(v) for v in occupancy["mean"]],
                    "se": [float(v) for v in occupancy["se"]],
                    "target": [float(v) for v in occupancy["target"]],
                    "passed": [bool(v) for v in occupancy["passed"]],
                },
            }
        )
    return rows, {"runs": runs}


def _kmc_csv(data: dict) -> str:
    out = io.StringIO()
    out.write("seed,site,mean,target,se,se_factor,ok\n")
    for run in data["runs"]:
        occ = run["occupancy"]
        for k in range(len(occ["mean"])):
            out.write(
                f"{run['seed']},{k},{occ['mean'][k]:.16e},{occ['target'][k]:.16e},"
                f"{occ['se'][k]:.16e},{run['se_factor']:.16e},{int(occ['passed'][k])}\n"
            )
    return out.getvalue()


# -- mott ---------------------------------------------------------------------------


def _run_mott(config: RunConfig) -> tuple[list[dict], dict]:
    opts = dict(config.options["mott"])
    temperatures = [float(t) for t in opts.pop("temperatures")]
    try:
        inputs = MottInputs(
            n_F=float(opts["n_F"]),
            xi=float(opts["xi"]),
            d=int(opts["d"]),
            T=temperatures[0],
            kB=float(opts.get("kB", KB_MEV_PER_K)),
        )
    except KeyError as exc:
        raise ConfigurationError(f"mott options missing key {exc}") from None
    rel_tol = config.tolerance("mott_rel")
    rows: list[dict] = []
    table = []
    for temperature in temperatures:
        inp = inputs.with_temperature(temperature)
        opt = optimize_hop(inp)
        reference = closed_form_neg_log_p(inp)
        rel_dev = abs(opt.neg_log_p - reference) / reference
        rows.append(
            _row(
                f"mott-closed-form:T={temperature:g}",
                None,
                rel_dev,
                rel_tol,
                "<=",
            )
        )
        table.append(
            {
                "T": temperature,
                "T0": opt.t0,
                "r_opt_over_xi": opt.r_opt / inp.xi,
                "eps_opt": opt.eps_opt,
                "neg_log_p": opt.neg_log_p,
                "closed_form_rel_dev": rel_dev,
                "tolerance": rel_tol,
            }
        )
    data = {
        "inputs": {
            "n_F": inputs.n_F,
            "xi": inputs.xi,
            "d": inputs.d,
            "kB": inputs.kB,
        },
        "table": table,
    }
    return rows, data


def _mott_csv(data: dict) -> str:
    out = io.StringIO()
    out.write("T,T0,r_opt_over_xi,eps_opt,neg_log_p,closed_form_rel_dev,tolerance\n")
    for row in data["table"]:
        out.write(
            f"{row['T']:.17g},{row['T0']:.17g},{row['r_opt_over_xi']:.17g},"
            f"{row['eps_opt']:.17g},{row['neg_log_p']:.17g},"
            f"{row['closed_form_rel_dev']:.17g},{row['tolerance']:.17g}\n"
        )
    return out.getvalue()


# -- sample -------------------------------------------------------------------------


def _run_sample(config: RunConfig) -> tuple[list[dict], dict]:
    runs = []
    for seed in config.seeds:
        omega = sample_disorder(config.params, seed)
        runs.append(
            {
                "seed": seed,
                "n_occupied": omega.n_occupied,
                "realization": omega.to_dict(),
            }
        )
    return [], {"runs": runs}


def _sample_csv(config: RunConfig, data: dict) -> str:
    dim = config.params.dim
    coord_names = ",".join(f"x{k}" for k in range(dim))
    out = io.StringIO()
    out.write(f"seed,{coord_names},energy\n")
    for run in data["runs"]:
        omega = sample_disorder(config.params, run["seed"])
        energy = omega.energy_map()
        for site in omega.occupied_sites():
            key = tuple(int(c) for c in site)
            coords = ",".join(str(c) for c in key)
            out.write(f"{run['seed']},{coords},{energy[key]:.17g}\n")
    return out.getvalue()


# -- driver -------------------------------------------------------------------------


_RUNNERS = {
    "verify": _run_verify,
    "spectrum": _run_spectrum,
    "evolve": _run_evolve,
    "kmc": _run_kmc,
    "mott": _run_mott,
    "sample": _run_sample,
}


def run(config: RunConfig) -> tuple[dict, str]:
    """Execute a resolved configuration.

    Returns
    -------
    (report, artifact_text) : tuple
        ``report`` is the JSON-ready report object (rows plus
        command-specific data); ``artifact_text`` is the rendered
        artifact in the configured output format.
    """
    rows, data = _RUNNERS[config.command](config)
    report = {
        "schema": REPORT_SCHEMA,
        "command": config.command,
        "ok": all(r["ok"] for r in rows),
        "n_checks": len(rows),
        "rows": rows,
        **_jsonify(data),
    }
    if config.output_format == "json":
        artifact = json.dumps(_jsonify(report), sort_keys=True, indent=2) + "\n"
    elif config.command == "spectrum":
        artifact = _spectrum_csv(config, data)
    elif config.command == "evolve":
        artifact = _evolve_csv(data)
    elif config.command == "kmc":
        artifact = _kmc_csv(data)
    elif config.command == "mott":
        artifact = _mott_csv(data)
    elif config.command == "sample":
        artifact = _sample_csv(config, data)
    else:  # verify
        artifact = _rows_to_csv(rows)
    return report, artifact


def _emit(config: RunConfig, artifact_text: str) -> None:
    manifest_text = json.dumps(_jsonify(config.to_manifest()), sort_keys=True) + "\n"
    if config.output_path is not None:
        out_path = Path(config.output_path)
        if out_path.parent and not out_path.parent.exists():
            raise ConfigurationError(
                f"output directory {str(out_path.parent)!r} does not exist"
            )
        out_path.write_text(artifact_text)
        manifest_path = out_path.with_name(out_path.stem + ".manifest.json")
        manifest_path.write_text(manifest_text)
    else:
        sys.stdout.write(artifact_text)
        sys.stderr.write(manifest_text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mottlind",
        description=(
            "Dissipative electron hopping in disordered semiconductors: "
            "exact finite-volume verification, spectra, kinetic Monte "
            "Carlo, and hopping analytics."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, metavar="PATH",
                        help="JSON configuration file")
    common.add_argument("--preset", choices=sorted(PRESETS), default=None,
                        help="named parameter bundle")
    common.add_argument("--seed", action="append", type=int, default=None,
                        metavar="N", help="experiment seed (repeatable)")
    common.add_argument("--out", type=Path, default=None, metavar="PATH",
                        help="artifact path (manifest goes next to it)")
    common.add_argument("--format", choices=("json", "csv"), default=None,
                        dest="output_format", help="artifact format")
    common.add_argument("--threads", type=int, default=None, metavar="N",
                        help=f"worker threads (default ${THREADS_ENV_VAR} or 1)")
    common.add_argument("--tol", action="append", default=None,
                        metavar="NAME=VALUE", help="tolerance override (repeatable)")

    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("verify", parents=[common],
                       help="structural identity suite")
    p.add_argument("--kms-pairs", type=int, default=None, metavar="N",
                   help="random monomial pairs for the KMS check")

    p = sub.add_parser("spectrum", parents=[common],
                       help="generator eigenvalues, kernel, and gap")
    p.add_argument("--parts", default=None, metavar="LIST",
                   help="comma list of generator parts: kin,star")

    p = sub.add_parser("evolve", parents=[common],
                       help="return-to-equilibrium series")
    p.add_argument("--observables", type=int, default=None, metavar="N")
    p.add_argument("--states", type=int, default=None, metavar="N")
    p.add_argument("--t-grid", default=None, metavar="LIST",
                   help="comma list of times in units of 1/gamma_star")

    p = sub.add_parser("kmc", parents=[common],
                       help="kinetic Monte Carlo replicas")
    p.add_argument("--replicas", type=int, default=None, metavar="N")
    p.add_argument("--events", type=int, default=None, metavar="N",
                   help="events per replica")
    p.add_argument("--t-max", type=float, default=None, metavar="T")
    p.add_argument("--init", choices=("equilibrium", "empty"), default=None)
    p.add_argument("--log-events", action="store_true", default=False,
                   help="embed the exact event log in each replica record")

    p = sub.add_parser("mott", parents=[common],
                       help="variable-range-hopping analytics table")
    p.add_argument("--temperatures", default=None, metavar="LIST",
                   help="comma list of temperatures in kelvin")
    p.add_argument("--dimension", type=int, default=None, metavar="D")
    p.add_argument("--n-F", dest="n_F", type=float, default=None,
                   metavar="VAL", help="density of states at the Fermi level")
    p.add_argument("--xi", type=float, default=None, metavar="VAL",
                   help="localization length")
    p.add_argument("--kB", dest="kB", type=float, default=None, metavar="VAL")

    sub.add_parser("sample", parents=[common], help="disorder realization dump")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args)
    except ConfigurationError as exc:
        print(f"mottlind: configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        report, artifact = run(config)
        _emit(config, artifact)
    except ConfigurationError as exc:
        print(f"mottlind: configuration error: {exc}", file=sys.stderr)
        return 2
    except MottlindError as exc:
        print(f"mottlind: check failed: {exc}", file=sys.stderr)
        return 1
    if not report["ok"]:
        failures = [r["check"] for r in report["rows"] if not r["ok"]]
        print(
            f"mottlind: {len(failures)} check(s) failed: {', '.join(failures)}",
            file=sys.stderr,
        )
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
