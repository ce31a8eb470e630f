"""Command-line front end.

Exit codes: 0 success (a nongeneric vector is a result, not an error),
1 a verification found a mismatch, 2 usage or input error.
"""
import argparse
import json
import secrets
import sys
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import __version__
from . import fibercheck as fc
from .chart import load_chart
from .errors import GenericLabError
from .experiments import (
    CATALOG_NAMES,
    PerturbationSpec,
    catalog_chart,
    genericity_census,
    make_rng,
    perturb_metric,
    random_metric,
    sample_vectors,
)
from .genericity import DEFAULT_TOL, scan_geodesic, verdict_at
from .geometry import write_trace_csv
from .tensor import curv_from_coordinates, curv_space_dim

SCHEMA_VERSION = "1.0"
EXIT_OK, EXIT_MISMATCH, EXIT_INPUT = 0, 1, 2


def load_schema(name):
    """JSON schema shipped with the package (``verdict``, ``scan``, ``fiber_report``,
    ``census``, ``catalog`` or ``threshold``)."""
    text = resources.files("genericlab").joinpath("schemas").joinpath(f"{name}.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


class InputError(GenericLabError):
    """Bad command-line input."""


@dataclass
class RunConfig:
    """Validated options of one invocation."""

    command: str
    chart: object = None
    point: np.ndarray = None
    vector: np.ndarray = None
    r: int = 0
    tol: float = DEFAULT_TOL
    step: float = 1e-3
    t_span: tuple = (0.0, 1.0)
    seed: int = None
    fmt: str = "human"
    output: str = None
    extra: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------------


def _floats(text, flag, length=None):
    try:
        values = np.array([float(s) for s in text.split(",")], dtype=float)
    except ValueError:
        raise InputError(f"{flag}: could not parse {text!r} as comma-separated numbers") from None
    if not np.all(np.isfinite(values)):
        raise InputError(f"{flag}: values must be finite")
    if length is not None and len(values) != length:
        raise InputError(f"{flag}: expected {length} components, got {len(values)}")
    return values


def _chart_from(args):
    if getattr(args, "chart", None) and getattr(args, "catalog", None):
        raise InputError("give either --chart or --catalog, not both")
    if getattr(args, "chart", None):
        try:
            chart = load_chart(args.chart)
        except OSError as exc:
            raise InputError(f"--chart: {exc}") from None
    else:
        name = getattr(args, "catalog", None) or "minkowski4"
        try:
            chart = catalog_chart(name)
        except KeyError as exc:
            raise InputError(f"--catalog: {exc.args[0]}") from None
    spec_text = getattr(args, "perturb", None)
    if spec_text:
        try:
            spec = PerturbationSpec.parse(spec_text)
        except ValueError as exc:
            raise InputError(f"--perturb: {exc}") from None
        chart = perturb_metric(chart, spec)
        return chart, spec
    return chart, None


def _check_numbers(r=None, tol=None, step=None):
    if r is not None and r < 0:
        raise InputError("--r must be non-negative")
    if tol is not None and not tol > 0:
        raise InputError("--tol must be positive")
    if step is not None and not step > 0:
        raise InputError("--step must be positive")


def _seed(args):
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise InputError("--seed must fit in 64 bits")
        return args.seed
    seed = secrets.randbits(63)
    print(f"seed: {seed} (pass --seed {seed} to reproduce)", file=sys.stderr)
    return seed


def _emit(text, output):
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _fmt_vec(v):
    return "(" + ", ".join(f"{x:.6g}" for x in v) + ")"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_check_vector(cfg):
    chart = cfg.chart
    chart.require_region(cfg.point)
    verdict = verdict_at(chart, cfg.point, cfg.vector, r=cfg.r, tol=cfg.tol)
    out = verdict.to_dict()
    out["chart"] = chart.name
    out["point"] = [float(x) for x in cfg.point]
    if cfg.fmt == "json":
        text = _json(out)
    else:
        lines = [
            f"chart             {chart.name}",
            f"point             {_fmt_vec(cfg.point)}",
            f"vector            {_fmt_vec(cfg.vector)}  [{verdict.causal_character}]",
            "magnitudes        " + " ".join(f"m{k}={m:.3e}" for k, m in enumerate(verdict.magnitudes)),
            f"generic           {'yes' if verdict.generic else 'no'}",
            f"{cfg.r}-nongeneric".ljust(18) + ("yes" if verdict.r_nongeneric else "no"),
            f"tolerance         {cfg.tol:g}",
        ]
        text = "\n".join(lines) + "\n"
    _emit(text, cfg.output)
    return EXIT_OK


def cmd_scan_geodesic(cfg):
    chart = cfg.chart
    chart.require_region(cfg.point)
    report = scan_geodesic(chart, cfg.vector, cfg.t_span, cfg.step, r=cfg.r, point=cfg.point, tol=cfg.tol)
    trace_path = cfg.extra.get("trace_csv")
    if trace_path:
        write_trace_csv(report.trace, trace_path)
    if cfg.fmt == "csv":
        _emit(write_trace_csv(report.trace), cfg.output)
        print(report.summary(), file=sys.stderr)
        return EXIT_OK
    if cfg.fmt == "json":
        out = report.to_dict()
        if cfg.extra.get("perturbation"):
            out["perturbation"] = cfg.extra["perturbation"]
        text = _json(out)
    else:
        d = report.to_dict()
        lines = [
            report.summary(),
            f"chart {d['chart']}, window [{d['window'][0]:g}, {d['window'][1]:g}], "
            f"{d['samples']} samples at step {d['step']:g}, {d['generic_samples']} generic",
        ]
        for run in d["runs"]:
            lines.append(
                f"  {run['kind']:<8} t in [{run['t_start']:.6g}, {run['t_end']:.6g}] "
                f"({run['length']} samples), higher-order witness: {'yes' if run['higher_order_witness'] else 'no'}"
            )
        lines.append(f"note: {d['note']}")
        text = "\n".join(lines) + "\n"
    _emit(text, cfg.output)
    return EXIT_OK


def verify_report(n, r, seed, samples=20, parts=("surjectivity", "codim")):
    """Run the fiber checks for ``(n, r)``; returns a JSON-ready dict with ``passed``."""
    rng = make_rng(seed)
    checks = []
    out = {"schema_version": SCHEMA_VERSION, "n": n, "r": r, "seed": int(seed)}

    if "surjectivity" in parts:
        surj = fc.surjectivity_report(n, r)
        errs = [
            fc.right_inverse_error(curv_from_coordinates(rng.standard_normal(curv_space_dim(n)), n), r)
            for _ in range(samples)
        ]
        out["surjectivity"] = surj
        out["right_inverse"] = {"samples": samples, "max_relative_error": max(errs), "tolerance": 1e-12}
        checks.append({"name": "alpha fiber matrix surjective", "passed": surj["surjective"],
                       "detail": f"rank {surj['rank']} of {surj['curv_space_dim']}"})
        checks.append({"name": "right inverse identity", "passed": max(errs) <= 1e-12,
                       "detail": f"max relative error {max(errs):.2e}"})

    if "codim" in parts:
        reports = []
        for k, cls in ((0, "non-null"), (1, "null")):
            batch = []
            for _ in range(samples):
                g = random_metric(n, rng)
                batch.append(fc.c_map_rank(n, g, sample_vectors(g, rng)[k], r))
            ranks = sorted({rep.rank for rep in batch})
            ok = all(rep.ok and rep.causal_class == cls for rep in batch)
            checks.append({"name": f"c map rank ({cls})", "passed": ok,
                           "detail": f"rank {'/'.join(map(str, ranks))} (expected {batch[0].expected_rank}), "
                                     f"codimension {batch[0].codimension}"})
            reports.append(batch[0])
        out["c_map"] = [rep.to_dict() for rep in reports]
        out["codimensions"] = {"non_null": fc.codim_nongen(n, r, "non-null"), "null": fc.codim_nongen(n, r, "null")}
        if n >= 3:
            dc = fc.dim_check(n, r)
            out["threshold"] = fc.r_threshold(n)
            out["dim_check"] = dc
            checks.append({"name": "dimension below both codimensions", "passed": dc["passes"],
                           "detail": f"2n = {dc['dimension']} vs {dc['codim_non_null']} and {dc['codim_null']}"})
        else:
            out["threshold"] = None
            out["dim_check"] = None
    out["checks"] = checks
    out["passed"] = all(c["passed"] for c in checks)
    return out


def _verify(cfg, parts):
    n, r = cfg.extra["n"], cfg.r
    if not 2 <= n <= 6:
        raise InputError("--n must be in 2..6")
    if not 1 <= r <= 6:
        raise InputError("--r must be in 1..6")
    out = verify_report(n, r, cfg.seed, cfg.extra["samples"], parts)
    if cfg.fmt == "json":
        text = _json(out)
    else:
        lines = [f"fiber checks for n = {n}, r = {r}"]
        for c in out["checks"]:
            lines.append(f"  [{'PASS' if c['passed'] else 'FAIL'}] {c['name']}: {c['detail']}")
        if "codimensions" in out:
            cd = out["codimensions"]
            lines.append(f"  codimensions (non-null, null) = ({cd['non_null']}, {cd['null']})")
            if out["threshold"] is not None:
                lines.append(f"  threshold r > (4n-2)/((n-1)(n-2)) gives r = {out['threshold']}")
        lines.append("result: " + ("pass" if out["passed"] else "FAIL"))
        text = "\n".join(lines) + "\n"
    _emit(text, cfg.output)
    return EXIT_OK if out["passed"] else EXIT_MISMATCH


def cmd_verify(cfg):
    return _verify(cfg, ("surjectivity", "codim"))


def cmd_census(cfg):
    report = genericity_census(
        cfg.chart,
        cfg.extra["n_samples"],
        r=cfg.r,
        seed=cfg.seed,
        tol=cfg.tol,
        keep_samples=bool(cfg.extra.get("csv")) or cfg.fmt == "csv",
        perturbation=cfg.extra.get("spec"),
    )
    if cfg.extra.get("csv"):
        with open(cfg.extra["csv"], "w", newline="", encoding="utf-8") as fh:
            report.write_csv(fh)
    if cfg.fmt == "json":
        text = report.to_json() + "\n"
    elif cfg.fmt == "csv":
        text = report.write_csv()
    else:
        lines = [f"census of {report.chart}: {report.n_samples} points, r = {report.r}, seed {report.seed}"]
        lines.append(f"  {'class':<10} {'samples':>8} {'generic':>8} {'r-nongeneric':>13}")
        for cls, count in report.counts.items():
            lines.append(f"  {cls:<10} {count:>8} {report.generic[cls]:>8} {report.r_nongeneric[cls]:>13}")
        lines.append(f"generic fraction {report.generic_fraction:.4f}; r-nongeneric count {report.r_nongeneric_count}")
        text = "\n".join(lines) + "\n"
    _emit(text, cfg.output)
    return EXIT_OK


def cmd_catalog(cfg):
    charts = [catalog_chart(name) for name in CATALOG_NAMES]
    show = cfg.extra.get("show")
    if show:
        try:
            chart = catalog_chart(show)
        except KeyError as exc:
            raise InputError(f"--show: {exc.args[0]}") from None
        _emit(chart.source, cfg.output)
        return EXIT_OK
    if cfg.fmt == "json":
        text = _json({
            "schema_version": SCHEMA_VERSION,
            "charts": [
                {"id": c.name, "dimension": c.n, "coordinates": list(c.coords), "note": c.note}
                for c in charts
            ],
        })
    else:
        text = "".join(f"{c.name:<16} n={c.n}  {' '.join(c.coords):<12} {c.note}\n" for c in charts)
    _emit(text, cfg.output)
    return EXIT_OK


def cmd_threshold(cfg):
    rows = []
    for n in cfg.extra["dims"]:
        if n < 3:
            raise InputError("--n: the threshold needs n >= 3")
        r = fc.r_threshold(n)
        dc = fc.dim_check(n, r)
        rows.append({"n": n, "bound": f"{4 * n - 2}/{(n - 1) * (n - 2)}", "r": r,
                     "codim_non_null": dc["codim_non_null"], "codim_null": dc["codim_null"],
                     "dim_check_passes": dc["passes"]})
    if cfg.fmt == "json":
        text = _json({"schema_version": SCHEMA_VERSION, "thresholds": rows})
    else:
        lines = [f"{'n':>3} {'bound':>7} {'r':>3} {'codim':>6} {'codim null':>11}  2n below both"]
        for row in rows:
            lines.append(f"{row['n']:>3} {row['bound']:>7} {row['r']:>3} {row['codim_non_null']:>6} "
                         f"{row['codim_null']:>11}  {'yes' if row['dim_check_passes'] else 'no'}")
        text = "\n".join(lines) + "\n"
    _emit(text, cfg.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_chart(p, perturb=True):
    p.add_argument("--chart", metavar="FILE", help="chart file")
    p.add_argument("--catalog", metavar="ID", help=f"built-in chart ({', '.join(CATALOG_NAMES)})")
    if perturb:
        p.add_argument("--perturb", metavar="EPS:DEG:SEED", help="add a random polynomial perturbation")


def _add_output(p, formats=("human", "json")):
    p.add_argument("--format", choices=formats, default="human")
    p.add_argument("-o", "--output", metavar="PATH", help="write the main output here instead of stdout")


def build_parser():
    parser = argparse.ArgumentParser(prog="genericlab", description="Generic condition lab for Lorentzian metrics.")
    parser.add_argument("--version", action="version", version=f"genericlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-vector", help="test one vector for genericity and r-nongenericity")
    _add_chart(p)
    p.add_argument("--point", required=True, help="comma-separated coordinates")
    p.add_argument("--vector", required=True, help="comma-separated components")
    p.add_argument("--r", type=int, default=0)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    _add_output(p)

    p = sub.add_parser("scan-geodesic", help="integrate a geodesic and locate zeros of the genericity quantity")
    _add_chart(p)
    p.add_argument("--point", required=True)
    p.add_argument("--vector", required=True)
    p.add_argument("--t-span", default="0,1", help="T0,T1 (default 0,1)")
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--trace-csv", metavar="PATH", help="also write the sampled trace as CSV")
    _add_output(p, ("human", "json", "csv"))

    for name, helptext in (
        ("verify", "fiber surjectivity, c-map ranks, codimensions and the threshold check"),
        ("verify-surjectivity", "rank of the fiber matrix and the right-inverse identity"),
        ("verify-codim", "c-map ranks, codimensions and the dimension check"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--r", type=int, default=1)
        p.add_argument("--samples", type=int, default=20, help="random instances per check")
        p.add_argument("--seed", type=int, default=None)
        _add_output(p)

    p = sub.add_parser("census", help="Monte Carlo count of generic and r-nongeneric vectors")
    _add_chart(p)
    p.add_argument("--n-samples", type=int, default=100)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--csv", metavar="PATH", help="per-sample dump")
    _add_output(p, ("human", "json", "csv"))

    p = sub.add_parser("catalog", help="list the built-in charts")
    p.add_argument("--show", metavar="ID", help="print one chart file")
    _add_output(p)

    p = sub.add_parser("threshold", help="smallest admissible r per dimension")
    p.add_argument("--n", default="3,4,5,6", help="comma-separated dimensions")
    _add_output(p)
    return parser


def _config(args):
    cmd = args.command
    cfg = RunConfig(command=cmd, fmt=args.format, output=args.output)
    if cmd in ("check-vector", "scan-geodesic"):
        _check_numbers(r=args.r, tol=args.tol, step=getattr(args, "step", None))
        cfg.chart, spec = _chart_from(args)
        cfg.point = _floats(args.point, "--point", cfg.chart.n)
        cfg.vector = _floats(args.vector, "--vector", cfg.chart.n)
        if not np.any(cfg.vector):
            raise InputError("--vector: the zero vector has no genericity verdict")
        cfg.r, cfg.tol = args.r, args.tol
        if spec is not None:
            cfg.extra["perturbation"] = spec.to_dict()
        if cmd == "scan-geodesic":
            span = _floats(args.t_span, "--t-span", 2)
            if not span[1] > span[0]:
                raise InputError("--t-span: T1 must exceed T0")
            cfg.t_span = (float(span[0]), float(span[1]))
            cfg.step = args.step
            cfg.extra["trace_csv"] = args.trace_csv
    elif cmd.startswith("verify"):
        if args.samples < 1:
            raise InputError("--samples must be at least 1")
        cfg.r = args.r
        cfg.seed = _seed(args)
        cfg.extra.update(n=args.n, samples=args.samples)
    elif cmd == "census":
        _check_numbers(r=args.r, tol=args.tol)
        if args.n_samples < 1:
            raise InputError("--n-samples must be at least 1")
        cfg.chart, spec = _chart_from(args)
        cfg.r, cfg.tol = args.r, args.tol
        cfg.seed = _seed(args)
        cfg.extra.update(n_samples=args.n_samples, csv=args.csv, spec=spec)
    elif cmd == "catalog":
        cfg.extra["show"] = args.show
    elif cmd == "threshold":
        try:
            cfg.extra["dims"] = [int(s) for s in args.n.split(",")]
        except ValueError:
            raise InputError(f"--n: could not parse {args.n!r} as comma-separated integers") from None
    return cfg


COMMANDS = {
    "check-vector": cmd_check_vector,
    "scan-geodesic": cmd_scan_geodesic,
    "verify": cmd_verify,
    "verify-surjectivity": lambda cfg: _verify(cfg, ("surjectivity",)),
    "verify-codim": lambda cfg: _verify(cfg, ("codim",)),
    "census": cmd_census,
    "catalog": cmd_catalog,
    "threshold": cmd_threshold,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config(args)
        return COMMANDS[cfg.command](cfg)
    except (GenericLabError, ValueError, OSError) as exc:
        print(f"genericlab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
