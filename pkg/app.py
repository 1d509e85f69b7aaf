# app.py

import argparse
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from config.settings import config
from core.b_invariant import positivity_certificate
from core.deformation import isometric_deformation_space, closure_residual
from core.errors import HypothesisViolated, InfeasibleLengths, PolyflexError
from core.geometry import Geometry, check_triangle_laws
from core.isoperimetric import area_hessian, is_critical, maximality_check, solve_max_area
from core.moduli import BarycenterKind, convergence_experiment, moduli_metric
from core.polyhedron import rigidity_verdict
from core.sampling import (
    DE_SITTER_CASES,
    cube,
    icosahedron,
    random_convex_hull,
    random_convex_polygon,
    random_triangle,
    tetrahedron,
)
from ui.components import ReportComponents
from utils.logger import PerformanceLogger, report_handler, set_level, setup_logger
from utils.validators import ParseError, parse_lengths, parse_polygon, parse_polyhedron

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_PARSE = 2
EXIT_INFEASIBLE = 3
EXIT_ASSERTION = 4

SOLIDS = {"tetrahedron": tetrahedron, "cube": cube, "icosahedron": icosahedron}

ENV_HELP = """environment:
  POLYFLEX_SEED           default seed (7)
  POLYFLEX_LOG_LEVEL      default log level (INFO)
  POLYFLEX_CACHE_ENTRIES  deformation-space cache size (256)
  POLYFLEX_<TOLERANCE>    numeric tolerance override, e.g. POLYFLEX_RANK_RTOL=1e-9

CSV columns:
  maxarea   sample, area, excess, convex, length_residual
  converge  k, a_k, discrepancy, quotient_dimension
  verify    instance, n, quotient_dimension, vector_residual, scalar_residual, min_product
"""

logger = setup_logger(__name__)
ui = ReportComponents()
perf_logger = PerformanceLogger()


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e}")


def run_verify(args) -> Dict[str, Any]:
    """Deformation-space dimension, angle-variation identities and positivity on many polygons."""
    rng = np.random.default_rng(args.seed)
    if args.input:
        polygons = [parse_polygon(_read(args.input))]
    else:
        geometry = Geometry(args.geometry)
        polygons = [random_convex_polygon(geometry, args.n, rng) for _ in range(args.count)]

    rows = []
    for k, p in enumerate(polygons):
        space = isometric_deformation_space(p)
        vec_res, scal_res, min_product = 0.0, 0.0, math.inf
        for j in range(space.quotient_dimension):
            U = space.deformation(j)
            v, s = closure_residual(p, U)
            vec_res, scal_res = max(vec_res, v), max(scal_res, s)
            if p.geometry is not Geometry.E2:
                min_product = min(min_product, positivity_certificate(p, U, closed_forms=False).min_product)
        rows.append({
            "instance": k,
            "n": p.n,
            "quotient_dimension": space.quotient_dimension,
            "gap_ratio": space.gap_ratio,
            "vector_residual": vec_res,
            "scalar_residual": scal_res,
            "min_product": None if math.isinf(min_product) else min_product,
        })
    table = pd.DataFrame(rows)

    tol = config.tolerances.closure
    failures = {
        "dimension": int((table["quotient_dimension"] != table["n"] - 3).sum()),
        "vector_residual": int((table["vector_residual"] >= tol).sum()),
        "scalar_residual": int((table["scalar_residual"] >= tol).sum()),
        "positivity": int((table["min_product"].dropna() <= 0).sum()),
    }
    report = {
        "command": "verify",
        "geometry": polygons[0].geometry.value,
        "instances": len(polygons),
        "quotient_dimensions": sorted(set(int(d) for d in table["quotient_dimension"])),
        "max_vector_residual": float(table["vector_residual"].max()),
        "max_scalar_residual": float(table["scalar_residual"].max()),
        "min_product": None if table["min_product"].dropna().empty else float(table["min_product"].min()),
        "failures": failures,
        "passed": not any(failures.values()),
    }
    if args.input:
        report["polygon"] = polygons[0].to_dict()
    return {"report": report, "table": table}


def run_solve(args) -> Dict[str, Any]:
    """Maximal-area polygon for a length vector, with criticality and competitor checks."""
    if args.input:
        geometry, lengths = parse_lengths(_read(args.input))
    else:
        if not args.lengths:
            raise ParseError("maxarea needs an input file or --lengths")
        geometry, lengths = args.geometry, [float(v) for v in args.lengths.split(",")]
    g = Geometry(geometry)
    solution = solve_max_area(lengths, g)
    criticality = is_critical(solution.polygon)
    hessian = area_hessian(solution.polygon)
    rng = np.random.default_rng(args.seed)
    samples = maximality_check(solution, args.samples, rng)
    convex = samples[samples["convex"]] if not samples.empty else samples
    violations = int((convex["excess"] > 1e-8).sum()) if not convex.empty else 0
    length_residual = float(np.max(np.abs(np.array(lengths) - np.array(solution.lengths))))
    report = {
        "command": "maxarea",
        "solution": solution.to_dict(),
        "criticality": criticality.to_dict(),
        "hessian": hessian.to_dict(),
        "samples": len(samples),
        "violations": violations,
        "length_residual": length_residual,
        "passed": criticality.critical and violations == 0 and hessian.negative_definite is not False,
    }
    return {"report": report, "table": samples, "optimum": solution.area}


def run_rigidity(args) -> Dict[str, Any]:
    """Rigidity verdicts for a polyhedron file, a standard solid, or random hulls."""
    rng = np.random.default_rng(args.seed)
    if args.input:
        polyhedra = [parse_polyhedron(_read(args.input))]
    elif args.solid:
        polyhedra = [SOLIDS[args.solid]()]
    else:
        polyhedra = [random_convex_hull(int(rng.integers(8, 41)), rng) for _ in range(args.count)]
    reports = [rigidity_verdict(P, args.mode).to_dict() for P in polyhedra]
    flexible = [i for i, r in enumerate(reports) if r["verdict"] == "FLEXIBLE"]
    report = {"command": "rigidity", "results": reports, "flexible": flexible, "passed": not flexible}
    if len(reports) == 1:
        report.update(verdict=reports[0]["verdict"], quotient_dim=reports[0]["quotient_dim"])
    return {"report": report}


def run_metric(args) -> Dict[str, Any]:
    """Gram matrix of a moduli metric at one polygon."""
    if not args.input:
        raise ParseError("metric needs a polygon file")
    p = parse_polygon(_read(args.input))
    sample = moduli_metric(p, BarycenterKind(args.kind))
    report = {"command": "metric", **sample.to_dict(), "passed": sample.gram.size == 0 or sample.positive_definite}
    return {"report": report}


def _angles(spec: str) -> List[float]:
    try:
        if spec.startswith("regular"):
            n = int(spec[len("regular"):])
            return [2.0 * math.pi / n] * n
        return [float(v) for v in spec.split(",")]
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"angles must be 'regularN' or a comma-separated list of radians, got {spec!r}")


def _k_values(kmax: int) -> List[int]:
    ks, k = [], 4
    while k <= kmax:
        ks.append(k)
        k *= 2
    return ks


def run_converge(args) -> Dict[str, Any]:
    """Discrepancy table of the rescaled spherical metric against the flat area form."""
    ks = _k_values(args.kmax)
    if not ks:
        raise ParseError(f"--kmax must be at least 4, got {args.kmax}")
    table = convergence_experiment(_angles(args.angles), ks)
    d = table["discrepancy"].to_numpy()
    increases = int(np.sum(np.diff(d) > 0))
    report = {
        "command": "converge",
        "angles": args.angles,
        "rows": table.to_dict(orient="records"),
        "non_monotone_steps": increases,
        "passed": increases <= 1 and bool(np.all(table["a_k"] > 0)),
    }
    return {"report": report, "table": table}


def run_trig(args) -> Dict[str, Any]:
    """Cosine and sine laws on random triangles."""
    rng = np.random.default_rng(args.seed)
    g = Geometry(args.geometry)
    worst = 0.0
    cases: Dict[str, int] = {}
    for i in range(args.count):
        if g is Geometry.DS2:
            case = DE_SITTER_CASES[i % len(DE_SITTER_CASES)]
            A, B, C = random_triangle(g, rng, case=case)
            label = "/".join("spacelike" if real else "antipodal_timelike" for real in case)
            cases[label] = cases.get(label, 0) + 1
        else:
            A, B, C = random_triangle(g, rng, spacelike=True)
        worst = max(worst, check_triangle_laws(A, B, C, g).max_residual)
    report = {"command": "trig", "geometry": g.value, "instances": args.count, "max_residual": worst,
              "passed": worst < 1e-10}
    if cases:
        report["cases"] = cases
    return {"report": report}


COMMANDS = {
    "verify": run_verify,
    "maxarea": run_solve,
    "rigidity": run_rigidity,
    "metric": run_metric,
    "converge": run_converge,
    "trig": run_trig,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polyflex",
        description="First-order deformations of polygons and polyhedra in constant curvature.",
        epilog=ENV_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    common.add_argument("--seed", type=int, default=config.seed, help="seed for every random sweep")
    common.add_argument("--output", default=None, help="JSON report path (stdout when omitted)")
    common.add_argument("--csv", default=None, help="CSV table path")
    common.add_argument("--html", default=None, help="plotly chart path")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common], help="deformation and positivity checks")
    p.add_argument("input", nargs="?", help="polygon JSON; random polygons when omitted")
    p.add_argument("--geometry", default="S2", choices=[g.value for g in Geometry])
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--count", type=int, default=100)

    p = sub.add_parser("maxarea", parents=[common], help="maximal-area polygon for given lengths")
    p.add_argument("input", nargs="?", help='lengths JSON {"geometry": "H2", "lengths": [...]}')
    p.add_argument("--geometry", default="H2", choices=["S2", "H2"])
    p.add_argument("--lengths", default=None, help="comma-separated edge lengths")
    p.add_argument("--samples", type=int, default=50)

    p = sub.add_parser("rigidity", parents=[common], help="infinitesimal rigidity of convex polyhedra")
    p.add_argument("input", nargs="?", help="polyhedron JSON or OFF")
    p.add_argument("--solid", choices=sorted(SOLIDS))
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--mode", default="faces", choices=["faces", "edges"])

    p = sub.add_parser("metric", parents=[common], help="moduli metric gram at a polygon")
    p.add_argument("input", nargs="?", help="polygon JSON")
    p.add_argument("--kind", default="C_i", choices=[k.value for k in BarycenterKind])

    p = sub.add_parser("converge", parents=[common], help="small-polygon metric convergence table")
    p.add_argument("--angles", default="regular5", help="'regularN' or comma-separated angles")
    p.add_argument("--kmax", type=int, default=64)

    p = sub.add_parser("trig", parents=[common], help="triangle laws on random triangles")
    p.add_argument("--geometry", default="DS2", choices=[g.value for g in Geometry])
    p.add_argument("--count", type=int, default=100)
    return parser


def _emit(args, result: Dict[str, Any]) -> None:
    report = result["report"]
    report["seed"] = args.seed
    report["warnings"] = list(report_handler.records)
    text = ui.write_json(report, args.output)
    if not args.output:
        sys.stdout.write(text)
    table = result.get("table")
    if args.csv and table is not None:
        ui.write_csv(table, args.csv)
    if not args.html:
        return
    if args.command == "converge":
        ui.write_html(ui.convergence_chart(table), args.html)
    elif args.command == "maxarea":
        ui.write_html(ui.maxarea_chart(table, result["optimum"]), args.html)
    elif args.command == "metric":
        ui.write_html(ui.eigenvalue_chart(report["eigenvalues"], f"Metric eigenvalues ({report['kind']})"), args.html)


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one subcommand, return the exit code."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_PARSE if e.code else EXIT_OK
    if args.log_level:
        set_level(args.log_level)
    if not config.is_configured:
        logger.critical("Configuration incomplete: tolerances must be positive and finite")
        return EXIT_INTERNAL
    report_handler.clear()

    perf_logger.start_timer(args.command)
    try:
        result = COMMANDS[args.command](args)
    except ParseError as e:
        logger.error(f"Parse error: {e}")
        return EXIT_PARSE
    except (InfeasibleLengths, HypothesisViolated) as e:
        logger.error(f"Infeasible input: {e}")
        return EXIT_INFEASIBLE
    except PolyflexError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_INTERNAL
    except (ValueError, TypeError) as e:
        logger.error(f"Bad input: {e}")
        return EXIT_PARSE
    finally:
        duration = perf_logger.end_timer(args.command)
    logger.info(f"{args.command} finished in {duration:.2f}s")

    _emit(args, result)
    if not result["report"]["passed"]:
        logger.error(f"{args.command}: checks failed")
        return EXIT_ASSERTION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
