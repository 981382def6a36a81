"""Command-line front end: validate, assess, quote, adjust, simulate, export-dot.

Exit codes: 0 success, 1 validation errors (including strict coverage
violations), 2 parse or format errors, 3 numerical errors, 4 usage errors.
Reports go to standard output and diagnostics to standard error.

Precedence for every setting is: command-line flag, then the value in an
input file, then the default. ``$CYBERQUOTE_SEED`` supplies the default seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from .claims import load_claims, settle_all
from .erd import export_dot, parse_org
from .errors import (
    CoverageConstraintError,
    CyberQuoteError,
    Diagnostic,
    FormatError,
    ModelValidationError,
    NumericalError,
    ParseError,
    UnknownEntityError,
    UnknownPracticeError,
)
from .loaders import load_economics, load_scenario_source, load_utility, read_text
from .maturity import (
    LayerAssessment,
    MaturityModelSpec,
    MuRecord,
    load_assessment,
    load_maturity_model,
    load_objective_domain_matrix,
    mu as compute_mu,
    objective_breakdown,
)
from .org import Layer, validate_model
from .pricing import UtilitySpec, quote as build_quote
from .sim import (
    DistributionBlock,
    SimConfig,
    default_seed,
    mc_price_layer,
    parse_distribution_block,
    sample_deltas,
    simulate_losses,
)

EXIT_OK, EXIT_INVALID, EXIT_FORMAT, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit 2
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


# --- input helpers ---------------------------------------------------------------


def _split(paths: str) -> list[Path]:
    return [Path(p.strip()) for p in paths.split(",") if p.strip()]


def _load_assessments(paths: str, role: str | None = None) -> list[tuple[Path, LayerAssessment]]:
    out = []
    seen: set[Layer] = set()
    for path in _split(paths):
        a = load_assessment(read_text(path))
        if role is not None and a.role != role:
            raise FormatError(f"{path}: expected role={role}, found role={a.role}")
        if a.layer in seen:
            raise FormatError(f"{path}: layer {int(a.layer)} assessed twice")
        seen.add(a.layer)
        out.append((path, a))
    if not out:
        raise FormatError("no assessment files given")
    return out


def _model_for(path: Path, assessment: LayerAssessment, flag: str | None, cache: dict) -> MaturityModelSpec:
    if flag:
        model_path = Path(flag)
    elif assessment.model_path:
        model_path = path.parent / assessment.model_path
    else:
        raise FormatError(f"{path}: no maturity model; pass --model or set model= in the file")
    key = model_path.resolve()
    if key not in cache:
        cache[key] = load_maturity_model(read_text(model_path))
    return cache[key]


def _mus(assessed, model_flag: str | None) -> tuple[dict[Layer, MuRecord], dict[Layer, MaturityModelSpec]]:
    cache: dict = {}
    mus, specs = {}, {}
    for path, a in assessed:
        spec = _model_for(path, a, model_flag, cache)
        specs[a.layer] = spec
        mus[a.layer] = compute_mu(a, spec)
    return mus, specs


def _scenarios(arg: str, layers: Sequence[Layer], strict: bool, seed_flag: int | None) -> dict:
    paths = _split(arg)
    if len(paths) not in (1, len(layers)):
        raise FormatError(f"--scenarios needs one file or one per layer ({len(layers)}), got {len(paths)}")
    out = {}
    for i, layer in enumerate(layers):
        src = load_scenario_source(read_text(paths[0] if len(paths) == 1 else paths[i]), strict)
        if isinstance(src, DistributionBlock):
            seed = default_seed(seed_flag if seed_flag is not None else src.seed)
            src = sample_deltas(src.dist_c, src.dist_s, SimConfig(src.n, seed), stream=int(layer) - 1)
        out[layer] = src
    return out


def _utility(text: str) -> UtilitySpec:
    path = Path(text)
    if path.suffix and path.is_file():
        return load_utility(read_text(path))
    return UtilitySpec.parse(text)


def _emit(args, payload: dict, text: str) -> None:
    body = json.dumps(payload, sort_keys=True, indent=2) + "\n" if args.output == "json" else text
    if args.out:
        Path(args.out).write_text(body, encoding="utf-8")
    else:
        sys.stdout.write(body)


def _diagnose(items: Sequence[Diagnostic]) -> None:
    for d in items:
        print(str(d), file=sys.stderr)


# --- subcommands -------------------------------------------------------------------


def cmd_validate(args) -> int:
    try:
        model = parse_org(read_text(args.org))
    except ModelValidationError as exc:
        _diagnose(exc.diagnostics)
        n = len(exc.diagnostics)
        _emit(args, {"errors": [d.to_dict() for d in exc.diagnostics], "valid": False}, f"{n} errors\n")
        return EXIT_INVALID
    report = validate_model(model)
    _diagnose(report)
    payload = {
        "valid": True,
        "errors": [],
        "warnings": [d.to_dict() for d in report],
        "entities": len(model.entities),
        "relationships": len(model.relationships),
    }
    text = f"0 errors, {len(report)} warnings\n{len(model.entities)} entities, {len(model.relationships)} relationships\n"
    _emit(args, payload, text)
    return EXIT_OK


def cmd_assess(args) -> int:
    if not args.assess:
        if not args.model:
            raise UsageError("assess needs --model, --assess or both")
        spec = load_maturity_model(read_text(args.model))
        counts = {
            str(level): {"total": spec.count(level), **{d: spec.count(level, d) for d in spec.domain_codes}}
            for level in range(1, spec.num_levels + 1)
        }
        payload = {"model": spec.name, "levels": spec.num_levels, "practices": len(spec.practices), "counts": counts}
        lines = [f"model: {spec.name or '(unnamed)'}", f"levels: {spec.num_levels}", f"practices: {len(spec.practices)}"]
        for level, row in counts.items():
            per = ", ".join(f"{d} {n}" for d, n in row.items() if d != "total" and n)
            lines.append(f"level {level}: {row['total']}" + (f" ({per})" if per else ""))
        _emit(args, payload, "\n".join(lines) + "\n")
        return EXIT_OK

    assessed = sorted(_load_assessments(args.assess), key=lambda pa: pa[1].layer)
    mus, specs = _mus(assessed, args.model)
    records = []
    lines = [f"{'layer':<12}{'p_bar':>10}{'o':>10}{'m':>10}"]
    for path, a in assessed:
        rec = mus[a.layer]
        entry = rec.to_dict()
        if a.objective_domain_matrix:
            matrix = load_objective_domain_matrix(read_text(path.parent / a.objective_domain_matrix))
            entry["objective_breakdown"] = objective_breakdown(a, specs[a.layer], matrix)
        records.append(entry)
        lines.append(f"{a.layer.title:<12}{rec.p_bar:>10.6f}{rec.o:>10.6f}{rec.m:>10.6f}")
        _diagnose([Diagnostic("warning", w, "maturity assessment", f"layer {int(a.layer)}") for w in rec.warnings])
    _emit(args, {"layers": records}, "\n".join(lines) + "\n")
    return EXIT_OK


def _quote_inputs(args):
    org = parse_org(read_text(args.org))
    economics = load_economics(read_text(args.econ))
    assessed = _load_assessments(args.assess, role="underwriter")
    cache: dict = {}
    assessments = {a.layer: a for _, a in assessed}
    specs = {a.layer: _model_for(p, a, args.model, cache) for p, a in assessed}
    layers = sorted(economics)
    missing = [int(l) for l in layers if l not in assessments]
    if missing:
        raise FormatError(f"no assessment for layer(s) {missing}")
    if len({id(s) for s in specs.values()}) != 1:
        raise FormatError("all assessments of one quote must use the same maturity model")
    spec = next(iter(specs.values()))
    scenarios = _scenarios(args.scenarios, layers, args.strict, args.seed)
    return org, economics, {l: assessments[l] for l in layers}, spec, scenarios


def cmd_quote(args) -> int:
    utility = _utility(args.utility)
    org, economics, assessments, spec, scenarios = _quote_inputs(args)
    q = build_quote(org, assessments, spec, economics, scenarios, utility, strict=args.strict)
    _diagnose(q.warnings)
    _emit(args, q.to_dict(), q.to_text(with_warnings=False))
    return EXIT_OK


def cmd_adjust(args) -> int:
    utility = _utility(args.utility)
    org, economics, assessments, spec, scenarios = _quote_inputs(args)
    q = build_quote(org, assessments, spec, economics, scenarios, utility, strict=args.strict)
    underwriting = {l: compute_mu(a, spec) for l, a in assessments.items()}
    adjuster = {}
    if args.adjuster:
        assessed = _load_assessments(args.adjuster, role="adjuster")
        adj_mus, _ = _mus(assessed, args.model)
        adjuster.update(adj_mus)
    claims = load_claims(read_text(args.claims))
    report = settle_all(claims, economics, underwriting, adjuster)
    _diagnose(list(q.warnings) + report.warnings)
    payload = {"quote": q.to_dict(), **report.to_dict()}
    _emit(args, payload, q.to_text(with_warnings=False) + "\n" + report.to_text())
    return EXIT_OK


def cmd_simulate(args) -> int:
    economics = load_economics(read_text(args.econ))
    assessed = _load_assessments(args.assess)
    mus, _ = _mus(assessed, args.model)
    layer = Layer.parse(args.layer) if args.layer else assessed[0][1].layer
    if layer not in economics or layer not in mus:
        raise FormatError(f"layer {int(layer)} needs both economics and an assessment")
    dist_text = args.dist
    if Path(dist_text).is_file():
        dist_text = ";".join(
            ln.strip() for ln in read_text(dist_text).splitlines() if ln.strip() and not ln.lstrip().startswith("#")
        )
    block = parse_distribution_block(dist_text)
    seed = default_seed(args.seed if args.seed is not None else block.seed)
    n = args.n if args.n is not None else block.n
    config = SimConfig(n, seed)
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    econ, rec = economics[layer], mus[layer]
    result = simulate_losses(econ, rec, block.dist_c, block.dist_s, config, stream=int(layer) - 1, workers=args.workers)
    payload = {"layer": int(layer), "dist_c": str(block.dist_c), "dist_s": str(block.dist_s), **result.to_dict()}
    text = f"layer: {layer.title}\ndist_c: {block.dist_c}\ndist_s: {block.dist_s}\n" + result.to_text()
    if args.utility:
        utility = _utility(args.utility)
        premium = mc_price_layer(econ, rec, block.dist_c, block.dist_s, config, utility, int(layer) - 1, args.workers)
        payload["premium"] = float(premium)
        payload["utility"] = utility.describe()
        text += f"premium ({utility.describe()}): {premium}\n"
    _emit(args, payload, text)
    return EXIT_OK


def cmd_export_dot(args) -> int:
    dot = export_dot(parse_org(read_text(args.org)))
    _emit(args, {"dot": dot}, dot)
    return EXIT_OK


# --- parser ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--output", choices=("text", "json"), default="text", help="report format (default text)")
    common.add_argument("--out", help="write the report to this path instead of stdout")

    pricing = _Parser(add_help=False)
    pricing.add_argument("--org", required=True, help="organization description file")
    pricing.add_argument("--econ", required=True, help="economics CSV, one row per layer")
    pricing.add_argument("--assess", required=True, help="comma-separated underwriter assessment files")
    pricing.add_argument(
        "--scenarios", required=True, help="scenario CSV or distribution block; one file for all layers or one per layer"
    )
    pricing.add_argument("--model", help="maturity model CSV (overrides model= in assessment files)")
    pricing.add_argument("--utility", default="linear", help="'linear', 'cara,a=<real>' or a config file (default linear)")
    pricing.add_argument("--strict", action="store_true", help="coverage-constraint violations and negative deltas are errors")
    pricing.add_argument("--seed", type=int, help="seed for distribution-block scenarios")

    parser = _Parser(prog="cyberquote", description=__doc__.split("\n\n")[0], epilog=__doc__.split("\n\n", 1)[1])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", parents=[common], help="parse and validate an organization file")
    p.add_argument("org")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("assess", parents=[common], help="reduce assessments to p_bar, o, m (or summarize a model)")
    p.add_argument("--model", help="maturity model CSV (overrides model= in assessment files)")
    p.add_argument("--assess", help="comma-separated assessment files")
    p.set_defaults(func=cmd_assess)

    p = sub.add_parser("quote", parents=[common, pricing], help="price all layers")
    p.set_defaults(func=cmd_quote)

    p = sub.add_parser("adjust", parents=[common, pricing], help="settle claims against a quote")
    p.add_argument("--claims", required=True, help="claims CSV: layer,claimed_amount,delta_c,delta_s")
    p.add_argument("--adjuster", help="comma-separated adjuster assessment files (role=adjuster)")
    p.set_defaults(func=cmd_adjust)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo loss statistics for one layer")
    p.add_argument("--econ", required=True)
    p.add_argument("--assess", required=True, help="assessment file(s); the first sets the default layer")
    p.add_argument("--dist", required=True, help="distribution block text or a file containing one")
    p.add_argument("--model", help="maturity model CSV (overrides model= in assessment files)")
    p.add_argument("--layer", help="layer to simulate (1-3 or name)")
    p.add_argument("--seed", type=int, help="overrides seed= in the block and $CYBERQUOTE_SEED")
    p.add_argument("-n", type=int, help="overrides n= in the block")
    p.add_argument("--workers", type=int, default=1, help="parallel workers; results do not depend on it")
    p.add_argument("--utility", help="also report the Monte Carlo premium under this utility")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("export-dot", parents=[common], help="render an organization as Graphviz DOT")
    p.add_argument("org")
    p.set_defaults(func=cmd_export_dot)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    """Run the CLI and return the exit code; never raises for bad input."""
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except (ModelValidationError, CoverageConstraintError) as exc:
        _diagnose(exc.diagnostics)
        return EXIT_INVALID
    except (UnknownEntityError, UnknownPracticeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ParseError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (NumericalError, ZeroDivisionError, OverflowError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CyberQuoteError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
