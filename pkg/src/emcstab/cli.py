"""Command-line front end.

Subcommands: list-systems, check-structure, find-re, certify, verify,
report.  Values come from a TOML config file when given, with command-line
flags taking precedence.  Reports are JSON documents with stable key order
and no timestamps, so identical inputs produce identical bytes.

Exit codes: 0 success (certified / experiment consistent), 2 inconclusive or
failed certificate / experiment anomaly, 3 structural check failure,
1 usage or runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys as _sys
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import emc, lie, releq, verify
from .errors import EmcStabError, ParameterError, StructuralError, UnknownSystemError
from .phase import check_structure
from .systems import catalog, instantiate_system, known_equilibria

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INCONCLUSIVE = 2
EXIT_STRUCTURAL = 3

_PARAM_FLAGS = {
    "I": "rigid body inertia triple, comma separated",
    "Mgl": "top: weight times arm",
    "I1": "top: transverse inertia",
    "I3": "top: axial inertia",
    "omega": "top: spin rate of the sleeping state",
}


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in str(text).replace(" ", "").split(",") if v != "")
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}") from err


@dataclass
class RunConfig:
    """Fully resolved inputs of a run; validated before any computation."""

    system: str
    params: dict = field(default_factory=dict)
    at: tuple | None = None
    xi: tuple | None = None
    equilibrium: str | None = None
    refine: bool = False
    tolerances: emc.EmcTolerances = field(default_factory=emc.EmcTolerances)
    sigma_max: float = 1e8
    budget: int = 48
    tube_radius: float = 1.0
    certify_seed: int = 0
    deltas: tuple = verify.DEFAULT_DELTAS
    samples: int = 6
    t_final: float = 20.0
    step: float = 1e-3
    method: str = "rk4"
    escape_radius: float = verify.ESCAPE_RADIUS
    experiment_seed: int = 0

    def validate(self):
        if self.system not in catalog():
            raise UnknownSystemError(self.system, catalog())
        entry = catalog()[self.system]
        for key in self.params:
            if key not in entry.params:
                raise ParameterError(
                    f"{self.system}: unknown parameter {key!r}; "
                    f"admissible: {', '.join(sorted(entry.params)) or '(none)'}"
                )
        if self.at is None and self.equilibrium is None:
            raise ParameterError("no equilibrium given: pass --at or --equilibrium")
        return self


def _load_toml(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _pick(args_value, doc: dict, section: str, key: str, default):
    """Flag beats config file beats default."""
    if args_value is not None:
        return args_value
    return doc.get(section, {}).get(key, default)


def _resolve_config(args) -> RunConfig:
    doc = _load_toml(getattr(args, "config", None))
    system = _pick(getattr(args, "system", None), doc, "system", "name", None)
    if system is None:
        raise ParameterError("no system given (positional argument or [system] name)")
    params = dict(doc.get("system", {}).get("params", {}))
    for key in _PARAM_FLAGS:
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value if len(value) > 1 else value[0]

    tol_doc = dict(doc.get("tolerances", {}))
    for key in ("tol_zero", "tol_pos", "tol_angle", "tol_crit"):
        value = getattr(args, key, None)
        if value is not None:
            tol_doc[key] = value
    tolerances = emc.EmcTolerances(**tol_doc)

    at = _pick(getattr(args, "at", None), doc, "equilibrium", "at", None)
    xi = _pick(getattr(args, "xi", None), doc, "equilibrium", "xi", None)
    cfg = RunConfig(
        system=system,
        params=params,
        at=None if at is None else tuple(float(v) for v in at),
        xi=None if xi is None else tuple(float(v) for v in xi),
        equilibrium=_pick(
            getattr(args, "equilibrium", None), doc, "equilibrium", "name", None
        ),
        refine=bool(getattr(args, "refine", False) or doc.get("equilibrium", {}).get("refine", False)),
        tolerances=tolerances,
        sigma_max=float(_pick(getattr(args, "sigma_max", None), doc, "certify", "sigma_max", 1e8)),
        budget=int(_pick(getattr(args, "budget", None), doc, "certify", "budget", 48)),
        tube_radius=float(
            _pick(getattr(args, "tube_radius", None), doc, "certify", "tube_radius", 1.0)
        ),
        certify_seed=int(_pick(getattr(args, "seed", None), doc, "certify", "seed", 0)),
        deltas=tuple(
            float(v)
            for v in _pick(getattr(args, "deltas", None), doc, "experiment", "deltas",
                           verify.DEFAULT_DELTAS)
        ),
        samples=int(_pick(getattr(args, "samples", None), doc, "experiment", "samples", 6)),
        t_final=float(_pick(getattr(args, "t_final", None), doc, "experiment", "t_final", 20.0)),
        step=float(_pick(getattr(args, "step", None), doc, "experiment", "step", 1e-3)),
        method=str(_pick(getattr(args, "method", None), doc, "experiment", "method", "rk4")),
        escape_radius=float(
            _pick(getattr(args, "escape_radius", None), doc, "experiment", "escape_radius",
                  verify.ESCAPE_RADIUS)
        ),
        experiment_seed=int(
            _pick(getattr(args, "exp_seed", None), doc, "experiment", "seed", 0)
        ),
    )
    return cfg


def _build_re(cfg: RunConfig, sys_obj):
    if cfg.at is not None:
        z = np.asarray(cfg.at, dtype=float)
        xi = None if cfg.xi is None else lie.AlgebraElement(sys_obj.group, np.asarray(cfg.xi))
    else:
        seeds = {s.label: s for s in known_equilibria(cfg.system, cfg.params)}
        if cfg.equilibrium not in seeds:
            raise ParameterError(
                f"{cfg.system}: unknown equilibrium {cfg.equilibrium!r}; "
                f"known: {', '.join(sorted(seeds))}"
            )
        seed = seeds[cfg.equilibrium]
        z = seed.z
        xi = lie.AlgebraElement(sys_obj.group, seed.xi)
    if cfg.refine:
        xi0 = xi if xi is not None else None
        return releq.find_relative_equilibrium(sys_obj, z, xi0)
    return releq.make_relative_equilibrium(sys_obj, z, xi)


def _write_json(doc: dict, path: str | None):
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        _sys.stdout.write(text)


def _emit(line: str):
    print(line)


# ---------------------------------------------------------------------------
# subcommand bodies


def _cmd_list_systems(args) -> int:
    for name, entry in sorted(catalog().items()):
        _emit(f"{name}: {entry.description}")
        for key, spec in entry.params.items():
            bounds = []
            if spec.low is not None:
                bounds.append(f"> {spec.low:g}")
            if spec.high is not None:
                bounds.append(f"< {spec.high:g}")
            constraint = f" ({', '.join(bounds)})" if bounds else ""
            _emit(f"  --{key} default {spec.default}{constraint}  {spec.help}")
        labels = ", ".join(s.label for s in entry.equilibria(
            {k: v.default for k, v in entry.params.items()}))
        _emit(f"  equilibria: {labels}")
    return EXIT_OK


def _cmd_check_structure(args) -> int:
    doc = _load_toml(getattr(args, "config", None))
    system = _pick(args.system, doc, "system", "name", None)
    if system is None:
        raise ParameterError("no system given")
    params = dict(doc.get("system", {}).get("params", {}))
    for key in _PARAM_FLAGS:
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value if len(value) > 1 else value[0]
    sys_obj = instantiate_system(system, params)
    report = check_structure(sys_obj, n_samples=args.samples, seed=args.seed, tol=args.tol)
    for name in (
        "poisson_antisymmetry",
        "poisson_jacobi",
        "hamiltonian_invariance",
        "casimir_invariance",
        "casimir_bracket",
        "momentum_equivariance",
        "generator_match",
    ):
        _emit(f"{name}: {getattr(report, name):.3e}")
    if report.ok:
        _emit(f"ok: worst residual {report.worst():.3e} <= {args.tol:g}")
        return EXIT_OK
    _emit(f"FAILED: worst residual {report.worst():.3e} > {args.tol:g} "
          f"({', '.join(report.failures())})")
    return EXIT_STRUCTURAL


def _cmd_find_re(args) -> int:
    cfg = _resolve_config(args)
    if cfg.at is None:
        raise ParameterError("find-re needs --at (a search seed point)")
    cfg.validate()
    sys_obj = instantiate_system(cfg.system, cfg.params)
    xi0 = None if cfg.xi is None else lie.AlgebraElement(sys_obj.group, np.asarray(cfg.xi))
    re = releq.find_relative_equilibrium(sys_obj, np.asarray(cfg.at, dtype=float), xi0)
    doc = {
        "schema_version": 1,
        "kind": "relative_equilibrium",
        "system": cfg.system,
        "parameters": dict(sys_obj.parameters),
        "z_e": [float(v) for v in re.z_e],
        "xi": [float(v) for v in re.xi.coeffs],
        "mu": [float(v) for v in re.mu.coeffs],
        "residual_norm": float(re.residual_norm),
        "isotropy_dim": int(re.isotropy_dim),
        "iterations": int(re.iterations),
    }
    _write_json(doc, args.output)
    if args.output:
        _emit(f"relative equilibrium written to {args.output} "
              f"(residual {re.residual_norm:.3e})")
    return EXIT_OK


def _cmd_certify(args) -> int:
    cfg = _resolve_config(args).validate()
    sys_obj = instantiate_system(cfg.system, cfg.params)
    re = _build_re(cfg, sys_obj)
    problem = emc.EmcProblem(
        sys=sys_obj,
        re=re,
        tolerances=cfg.tolerances,
        sigma_max=cfg.sigma_max,
        xi_search_budget=cfg.budget,
        tube_radius=cfg.tube_radius,
        seed=cfg.certify_seed,
    )
    cert = emc.certify(problem)
    _write_json(cert.to_json_dict(), args.output)
    if args.output:
        spectrum = ", ".join(f"{v:.6g}" for v in cert.spectrum)
        _emit(f"verdict: {cert.verdict}")
        _emit(f"restricted spectrum: [{spectrum}]")
        if cert.sigma is not None:
            _emit(f"sigma: {cert.sigma:g}  branch: {cert.sign_branch}")
        _emit(f"certificate written to {args.output}")
    return EXIT_OK if cert.verdict == "CertifiedStable" else EXIT_INCONCLUSIVE


def _load_certificate(path: str) -> emc.EmcCertificate:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("kind") != "emc_certificate":
        raise ParameterError(f"{path} is not a certificate document")
    return emc.EmcCertificate.from_json_dict(doc)


def _cmd_verify(args) -> int:
    cert = _load_certificate(args.certificate)
    doc = _load_toml(getattr(args, "config", None))
    # the certificate pins the system, point and generator; the experiment
    # protocol comes from flags/config
    args.system = cert.system
    args.at = tuple(cert.z_e)
    args.xi = tuple(cert.xi_used) if cert.xi_used else None
    cfg = _resolve_config(args)
    cfg.params = dict(cert.parameters)
    cfg.validate()
    sys_obj = instantiate_system(cfg.system, cfg.params)
    xi = lie.AlgebraElement(sys_obj.group, np.asarray(cert.xi_used, dtype=float))
    re = releq.make_relative_equilibrium(sys_obj, np.asarray(cert.z_e, dtype=float), xi)
    report = verify.stability_experiment(
        sys_obj,
        re,
        cert,
        deltas=cfg.deltas,
        samples_per_delta=cfg.samples,
        t_final=cfg.t_final,
        step=cfg.step,
        method=cfg.method,
        escape_radius=cfg.escape_radius,
        seed=cfg.experiment_seed,
        keep_series=args.csv is not None,
    )
    _write_json(report.to_json_dict(), args.output)
    if args.csv:
        _write_series_csv(report, args.csv)
    if args.output:
        _emit(f"verdict: {report.verdict}")
        for delta, dist in zip(report.deltas, report.max_orbit_distance):
            _emit(f"  delta {delta:g}: max orbit distance {dist:.3e}")
        _emit(f"bound violations: {report.violations}")
        _emit(f"report written to {args.output}")
    return EXIT_OK if report.verdict == "consistent_with_stable" else EXIT_INCONCLUSIVE


def _write_series_csv(report: verify.StabilityExperimentReport, path: str):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "delta", "sample", "orbit_distance", "f"])
        for entry in report.series:
            for t, d, f in zip(entry["times"], entry["orbit_distance"], entry["f"]):
                writer.writerow(
                    [
                        repr(float(t)),
                        repr(float(entry["delta"])),
                        entry["sample"],
                        repr(float(d)),
                        "" if np.isnan(f) else repr(float(f)),
                    ]
                )


def _cmd_report(args) -> int:
    cert = _load_certificate(args.certificate)
    with open(args.experiment) as fh:
        exp_doc = json.load(fh)
    if exp_doc.get("kind") != "stability_experiment":
        raise ParameterError(f"{args.experiment} is not an experiment report")
    report = verify.StabilityExperimentReport.from_json_dict(exp_doc)

    lines = []
    lines.append(f"system: {cert.system}  parameters: {json.dumps(cert.parameters, sort_keys=True)}")
    lines.append(f"equilibrium: {cert.z_e}")
    lines.append(f"certificate verdict: {cert.verdict}")
    spectrum = ", ".join(f"{v:.6g}" for v in cert.spectrum)
    lines.append(
        f"  restricted spectrum [{spectrum}] on K (dim {cert.K_dim}, "
        f"orbit dim {cert.orbit_dim_in_K}, zero cluster {cert.zero_cluster_dim})"
    )
    if cert.sigma is not None:
        lines.append(f"  branch {cert.sign_branch}, sigma {cert.sigma:g}, "
                     f"slice minimum {cert.slice_spectrum_min:.3e}")
    lines.append(f"experiment verdict: {report.verdict}")
    for delta, dist, max_f in zip(report.deltas, report.max_orbit_distance, report.max_f):
        f_text = "n/a" if max_f is None else f"{max_f:.3e}"
        lines.append(f"  delta {delta:g}: max orbit distance {dist:.3e}, max f {f_text}")
    lines.append(f"  bound violations: {report.violations}, blow-ups: {report.blow_ups}")
    agree = cert.verdict == "CertifiedStable" and report.verdict == "consistent_with_stable"
    lines.append(
        "conclusion: certificate and experiment agree"
        if agree
        else "conclusion: no certified-stable + consistent pair; see details above"
    )
    text = "\n".join(lines) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        _sys.stdout.write(text)
    return EXIT_OK if agree else EXIT_INCONCLUSIVE


# ---------------------------------------------------------------------------
# parser


def _add_param_flags(p: argparse.ArgumentParser):
    for key, help_text in _PARAM_FLAGS.items():
        p.add_argument(f"--{key}", type=_floats, default=None, help=help_text)


def _add_equilibrium_flags(p: argparse.ArgumentParser):
    p.add_argument("--at", type=_floats, default=None, help="phase-space point, comma separated")
    p.add_argument("--xi", type=_floats, default=None, help="generator coefficients")
    p.add_argument("--equilibrium", default=None, help="named equilibrium from the catalog")
    p.add_argument("--refine", action="store_true",
                   help="run the equilibrium solver from the given point first")


def _add_tolerance_flags(p: argparse.ArgumentParser):
    for key in ("tol_zero", "tol_pos", "tol_angle", "tol_crit"):
        p.add_argument(f"--{key.replace('_', '-')}", dest=key, type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emc",
        description="Stability certificates for relative equilibria and their "
        "empirical corroboration.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list-systems", help="show the built-in system catalog")

    p = sub.add_parser("check-structure", help="validate the geometric wiring of a system")
    p.add_argument("system", nargs="?", default=None)
    p.add_argument("--config", default=None)
    _add_param_flags(p)
    p.add_argument("--samples", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-6)

    p = sub.add_parser("find-re", help="solve for a relative equilibrium from a seed point")
    p.add_argument("system", nargs="?", default=None)
    p.add_argument("--config", default=None)
    _add_param_flags(p)
    _add_equilibrium_flags(p)
    p.add_argument("--output", default=None, help="write the result JSON here")

    p = sub.add_parser("certify", help="run the certificate pipeline")
    p.add_argument("system", nargs="?", default=None)
    p.add_argument("--config", default=None)
    _add_param_flags(p)
    _add_equilibrium_flags(p)
    _add_tolerance_flags(p)
    p.add_argument("--sigma-max", dest="sigma_max", type=float, default=None)
    p.add_argument("--budget", type=int, default=None, help="generator/multiplier search points")
    p.add_argument("--tube-radius", dest="tube_radius", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", default=None, help="write the certificate JSON here")

    p = sub.add_parser("verify", help="randomized perturbation experiment for a certificate")
    p.add_argument("--certificate", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--deltas", type=_floats, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--t-final", dest="t_final", type=float, default=None)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--method", choices=("rk4", "implicit_midpoint"), default=None)
    p.add_argument("--escape-radius", dest="escape_radius", type=float, default=None)
    p.add_argument("--seed", dest="exp_seed", type=int, default=None)
    p.add_argument("--output", default=None, help="write the report JSON here")
    p.add_argument("--csv", default=None, help="write monitored time series here")

    p = sub.add_parser("report", help="merge a certificate and an experiment report")
    p.add_argument("--certificate", required=True)
    p.add_argument("--experiment", required=True)
    p.add_argument("--output", default=None)

    return parser


_COMMANDS = {
    "list-systems": _cmd_list_systems,
    "check-structure": _cmd_check_structure,
    "find-re": _cmd_find_re,
    "certify": _cmd_certify,
    "verify": _cmd_verify,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except StructuralError as err:
        print(f"structural error: {err}", file=_sys.stderr)
        return EXIT_STRUCTURAL
    except (EmcStabError, OSError, ValueError) as err:
        print(f"error: {err}", file=_sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    _sys.exit(main())
