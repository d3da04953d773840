"""Command-line front end: ``coarse-ricci <command> <input> [flags]``.

Exit codes: 0 success, 1 input error, 2 a verification failed (the report
still gets written and carries the failure witness).
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path


from . import __version__
from .concentration import (
    STRATEGIES,
    complete_graph_family,
    constant_family,
    hypercube_family,
    levy_experiment,
    obs_diam,
    obs_diam_profile,
    scalar_from_profile,
    support_diameter,
)
from .curvature import CONTRACTION_SLACK, curvature_report
from .dynamics import ENVELOPE_SLACK, convergence_trace, envelope_slack, invariant_measure, lifted_rate_check
from .errors import BadConfig, CoarseRicciError, MetricError, UnknownCommand
from .gromov_hausdorff import stability_experiment
from .io import csv_text, dumps, load_space, parse_space, read_json, space_document
from .lifting import (
    LIFTED_TRIANGLE_TOL,
    build_lifted_space,
    lift_kernel,
    lifted_curvature_report,
    lifted_invariant_check,
    lifted_measure,
    lifted_reversibility_check,
    reversibility_check,
    verify_lift_theorem,
)
from .metric_core import INGEST_TOL, MASS_TOL
from .transport import DUAL_FEAS_TOL, MARGINAL_TOL, check_exponent

log = logging.getLogger("coarse_ricci")

COMMANDS = ("validate", "curvature", "lift", "invariant", "dynamics", "gh", "obsdiam", "levy")
DEFAULT_TOL = {"lift": 1e-6, "invariant": 1e-10, "dynamics": 1e-10}

TOLERANCES = {
    "metric_ingest": INGEST_TOL,
    "mass": MASS_TOL,
    "marginal": MARGINAL_TOL,
    "dual_feasibility": DUAL_FEAS_TOL,
    "lifted_triangle": LIFTED_TRIANGLE_TOL,
    "contraction_slack": CONTRACTION_SLACK,
    "envelope_slack": ENVELOPE_SLACK,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UnknownCommand(message)


@dataclass
class RunConfig:
    command: str
    input: str
    p: float = 1.0
    grid: int = 2
    tol: float = 1e-8
    seed: int = 0
    threads: int = 1
    out: str | None = None
    format: str = "json"

    def __post_init__(self):
        if not math.isfinite(self.p) or self.p < 1:
            raise BadConfig(f"--p must be a finite real >= 1, got {self.p}")
        if self.grid < 1:
            raise BadConfig(f"--grid must be >= 1, got {self.grid}")
        if not self.tol > 0:
            raise BadConfig(f"--tol must be positive, got {self.tol}")
        if self.threads < 1:
            raise BadConfig(f"--threads must be >= 1, got {self.threads}")
        if not 0 <= self.seed < 2**64:
            raise BadConfig("--seed must fit in an unsigned 64-bit integer")


class VerificationFailed(Exception):
    def __init__(self, result: dict, witness):
        super().__init__("verification failed")
        self.result = result
        self.witness = witness


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("input", help="space file (JSON) or family config (gh, levy)")
    common.add_argument("--p", type=float, default=1.0, help="transport exponent, 1 <= p < inf")
    common.add_argument("--grid", type=int, default=2, help="simplex grid denominator N for lifted spaces")
    common.add_argument("--tol", type=float, default=None, help="verification / stopping tolerance")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--out", default=None, help="report path (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    parser = _Parser(prog="coarse-ricci", description="Coarse Ricci curvature toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.add_parser("validate", parents=[common], help="check the metric axioms of a space file")
    sub.add_parser("curvature", parents=[common], help="kappa_p over all pairs")
    lift = sub.add_parser("lift", parents=[common], help="curvature of the lifted walk on the Wasserstein grid")
    lift.add_argument("--verify", action="store_true", help="compare lifted and base infima")
    lift.add_argument("--export", default=None, help="write the lifted space as a space file")
    sub.add_parser("invariant", parents=[common], help="invariant measure and its lifted invariance")
    dyn = sub.add_parser("dynamics", parents=[common], help="convergence traces against the curvature envelope")
    dyn.add_argument("--steps", type=int, default=50)
    dyn.add_argument("--trace", choices=("base", "lifted"), default="base", help="trace written in CSV mode")
    sub.add_parser("gh", parents=[common], help="stability of curvature under approximation maps")
    od = sub.add_parser("obsdiam", parents=[common], help="observable diameter lower bounds")
    od.add_argument("--kappa", type=float, default=None, help="single kappa; omit for the scalar scan")
    od.add_argument("--strategy", choices=STRATEGIES, default="mcshane_random")
    od.add_argument("--budget", type=int, default=64)
    sub.add_parser("levy", parents=[common], help="observable diameters of a family and its lifts")
    return parser


# commands ----------------------------------------------------------------


def _need_kernel(sf):
    if sf.kernel is None:
        raise BadConfig("this command needs a 'kernel' in the space file")
    return sf.kernel


def cmd_validate(cfg: RunConfig, args) -> dict:
    doc = read_json(cfg.input)
    try:
        sf = parse_space(doc)
    except MetricError as exc:
        exc.report = {"valid": False, "error": type(exc).__name__, "violations": exc.violations}
        raise
    return {
        "valid": True,
        "n": sf.space.n,
        "diameter": sf.space.diameter,
        "has_kernel": sf.kernel is not None,
        "has_measure": sf.measure is not None,
    }


def cmd_curvature(cfg: RunConfig, args):
    kernel = _need_kernel(load_space(cfg.input))
    rep = curvature_report(kernel, cfg.p, threads=cfg.threads)
    return rep.to_dict(), rep.csv_rows()


def cmd_lift(cfg: RunConfig, args):
    sf = load_space(cfg.input)
    kernel = _need_kernel(sf)
    base = curvature_report(kernel, cfg.p, threads=cfg.threads)
    lifted = build_lifted_space(sf.space, kernel, cfg.p, cfg.grid, threads=cfg.threads)
    lk = lift_kernel(lifted)
    lrep = lifted_curvature_report(lifted, lk, threads=cfg.threads)
    result = {
        "base_inf": base.kappa_inf,
        "lifted_inf": lrep.kappa_inf,
        "base_argmin_pair": list(base.argmin_pair),
        "lifted_points": lifted.size,
        "grid_denominator": cfg.grid,
    }
    if args.export:
        Path(args.export).write_text(dumps(space_document(lifted.space, lk.kernel)))
    rows = [["quantity", "value"], ["base_inf", base.kappa_inf], ["lifted_inf", lrep.kappa_inf]]
    if args.verify:
        ver = verify_lift_theorem(base, lrep, tol=cfg.tol, lifted=lifted)
        result["verification"] = ver.to_dict()
        rows.append(["holds", ver.holds])
        if not ver.holds:
            raise VerificationFailed(result, ver.witness)
    return result, rows


def cmd_invariant(cfg: RunConfig, args):
    sf = load_space(cfg.input)
    kernel = _need_kernel(sf)
    nu = invariant_measure(kernel, cfg.p, tol=cfg.tol)
    lifted = build_lifted_space(sf.space, kernel, cfg.p, cfg.grid, threads=cfg.threads)
    lk = lift_kernel(lifted)
    inv = lifted_invariant_check(lk, nu, tol=max(cfg.tol, 1e-8))
    base_rev = reversibility_check(kernel, nu)
    lifted_rev = lifted_reversibility_check(lk, lifted_measure(lifted, nu))
    result = {
        "invariant_measure": nu.weights,
        "lifted_invariance": inv.to_dict(),
        "base_reversible": base_rev.to_dict(),
        "lifted_reversible": lifted_rev.to_dict(),
    }
    rows = [["x", "nu"]] + [[lab, float(w)] for lab, w in zip(sf.space.labels, nu.weights)]
    if not inv.holds:
        raise VerificationFailed(result, {"residual": inv.residual})
    if base_rev.holds and not lifted_rev.holds:
        raise VerificationFailed(result, {"lifted_pair": lifted_rev.witness})
    return result, rows


def _violations(trace) -> list[int]:
    slack = envelope_slack(trace.diameter, trace.p)
    return [t for (t, v), b in zip(trace.steps, trace.bounds) if v > b + slack]


def cmd_dynamics(cfg: RunConfig, args):
    sf = load_space(cfg.input)
    kernel = _need_kernel(sf)
    kinf = curvature_report(kernel, cfg.p, threads=cfg.threads).kappa_inf
    nu = invariant_measure(kernel, cfg.p, tol=cfg.tol, kappa_inf=kinf)
    mu0 = sf.measure if sf.measure is not None else sf.space.dirac(0)
    base = convergence_trace(kernel, mu0, cfg.p, args.steps, nu=nu, kappa_inf=kinf, check=False)
    lifted = lifted_rate_check(kernel, cfg.p, args.steps, nu=nu, kappa_inf=kinf, check=False)
    result = {
        "kappa_inf": kinf,
        "invariant_measure": nu.weights,
        "trace": base.to_dict(),
        "lifted_trace": lifted.to_dict(),
    }
    rows = (base if args.trace == "base" else lifted).csv_rows()
    if kinf > 0:
        bad = {"trace": _violations(base), "lifted_trace": _violations(lifted)}
        if bad["trace"] or bad["lifted_trace"]:
            raise VerificationFailed(result, {"steps_over_envelope": bad})
    return result, rows


def cmd_gh(cfg: RunConfig, args):
    config = read_json(cfg.input)
    rep = stability_experiment(config, p=cfg.p)
    result = rep.to_dict()
    rows = [["n", "kappa_inf", "epsilon"]] + [
        [i, k, e] for i, (k, e) in enumerate(zip(rep.member_kappa_inf, rep.convergence.epsilons))
    ]
    if rep.holds is False:
        raise VerificationFailed(result, {"limit_kappa_inf": rep.limit_kappa_inf, "kappa0": rep.kappa0})
    return result, rows


def cmd_obsdiam(cfg: RunConfig, args):
    sf = load_space(cfg.input)
    mu = sf.measure if sf.measure is not None else sf.space.uniform()
    if args.kappa is not None:
        est = obs_diam(sf.space, mu, args.kappa, args.strategy, args.budget, cfg.seed)
        rows = [["x", "witness"]] + [[lab, float(v)] for lab, v in zip(sf.space.labels, est.witness)]
        return {"estimate": est.to_dict()}, rows
    profile = obs_diam_profile(sf.space, mu, args.strategy, args.budget, cfg.seed)
    scalar = scalar_from_profile(profile, support_diameter(sf.space, mu))
    rows = [["kappa", "obs_diam"]] + [[e.kappa, e.value] for e in profile]
    return {"scalar": scalar, "profile": [e.to_dict() for e in profile]}, rows


def _levy_family(config: dict):
    kind = config.get("family")
    sizes = config.get("sizes")
    laziness = float(config.get("laziness", 0.5))
    if kind in ("hypercube", "complete", "constant") and not sizes:
        raise BadConfig(f"{kind} family needs 'sizes'")
    if kind == "hypercube":
        return hypercube_family(sizes, laziness)
    if kind == "complete":
        return complete_graph_family(sizes, laziness)
    if kind == "constant":
        return constant_family(sizes)
    if kind == "custom":
        out = []
        for doc in config.get("members", []):
            sf = parse_space(doc)
            out.append((sf.space, sf.measure or sf.space.uniform(), _need_kernel(sf)))
        if not out:
            raise BadConfig("custom family needs 'members'")
        return out
    raise BadConfig(f"unknown family {kind!r}; expected hypercube, complete, constant or custom")


def cmd_levy(cfg: RunConfig, args):
    config = read_json(cfg.input)
    if cfg.p != 1.0:
        raise BadConfig("levy uses W_1 lifts; run with --p 1")
    family = _levy_family(config)
    rep = levy_experiment(
        family,
        p=1.0,
        budget=int(config.get("budget", 32)),
        N=int(config.get("grid", cfg.grid)),
        kappas=tuple(config.get("kappas", (0.1, 0.25, 0.4))),
        strategy=config.get("strategy", "mcshane_random"),
        seed=cfg.seed,
        kappa0=config.get("kappa0"),
    )
    rows = [["n", "base_scalar", "lifted_scalar"]] + [
        [m.n_points, m.base_scalar, m.lifted_scalar] for m in rep.members
    ]
    return rep.to_dict(), rows


HANDLERS = {
    "validate": cmd_validate,
    "curvature": cmd_curvature,
    "lift": cmd_lift,
    "invariant": cmd_invariant,
    "dynamics": cmd_dynamics,
    "gh": cmd_gh,
    "obsdiam": cmd_obsdiam,
    "levy": cmd_levy,
}


# driver ------------------------------------------------------------------


def _emit(cfg: RunConfig, report: dict, rows: list[list] | None) -> None:
    text = csv_text(rows) if cfg.format == "csv" and rows is not None else dumps(report)
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


def _setup_logging() -> None:
    level = os.environ.get("CRL_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def run(argv: list[str] | None = None) -> int:
    _setup_logging()
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UnknownCommand(f"missing command; choose from {', '.join(COMMANDS)}")
        check_exponent(args.p)
        cfg = RunConfig(
            command=args.command,
            input=args.input,
            p=args.p,
            grid=args.grid,
            tol=args.tol if args.tol is not None else DEFAULT_TOL.get(args.command, 1e-8),
            seed=args.seed,
            threads=args.threads,
            out=args.out,
            format=args.format,
        )
    except CoarseRicciError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1

    report = {
        "command": cfg.command,
        "version": __version__,
        "config": {k: v for k, v in asdict(cfg).items() if k not in ("threads", "out", "format")},
        "tolerances": TOLERANCES,
    }
    extra = {k: v for k, v in vars(args).items() if k not in asdict(cfg) and k != "command"}
    report["config"].update({k: v for k, v in extra.items() if k != "export"})
    try:
        out = HANDLERS[cfg.command](cfg, args)
        result, rows = out if isinstance(out, tuple) else (out, None)
    except VerificationFailed as exc:
        report.update(status="verification_failed", result=exc.result, witness=exc.witness)
        _emit(cfg, report, None)
        print("verification failed; witness in report", file=sys.stderr)
        return 2
    except AssertionError as exc:  # ContractViolation, InternalInvariantViolation
        report.update(status="verification_failed", result=None, witness=getattr(exc, "witness", str(exc)))
        _emit(cfg, report, None)
        print(f"verification failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (CoarseRicciError, FileNotFoundError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        if getattr(exc, "report", None) is not None and cfg.out:
            report.update(status="invalid", result=exc.report)
            _emit(cfg, report, None)
        return 1
    report.update(status="ok", result=result)
    _emit(cfg, report, rows)
    return 0


def main(argv: list[str] | None = None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
