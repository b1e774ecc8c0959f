"""Diagnostics for lightlike hypersurfaces and their connections.

Every file subcommand reads a ``nullgeo-def v1`` file and prints a ``key=value``
report (see :mod:`nullgeo.report`).  Per-point and per-loop work runs on a
thread pool capped by ``NULLGEO_THREADS``; the report is assembled afterwards
in sorted order, so its bytes do not depend on the thread count.

Exit codes: 0 success, 1 definition or expression syntax error, 2 violated
numerical precondition, 3 failed tolerance check.
"""

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .deffile import load
from .errors import DefinitionError, NullGeoError
from .golden import CASES, load_case, run_golden
from .holonomy import (
    DEFAULT_STEPS,
    classify,
    holonomy_at_base,
    proportionality,
    reconstruct_metric,
    straight_path,
    to_coordinates,
    transported_metric,
    verify_weyl_property,
)
from .hypersurface import induced_metric
from .induced import (
    PROPER_TOL,
    UMBILIC_TOL,
    diagnose_geodesic,
    diagnose_umbilic,
    umbilic_verdict,
)
from .linalg import rank_signature
from .report import Report
from .weyl import WeylData, adapted_frame_fields, frame_coefficients, theta_closedness, verify_weyl

EXIT_OK, EXIT_PARSE, EXIT_PRECONDITION, EXIT_TOLERANCE = 0, 1, 2, 3

GEODESIC_TOL = 1e-10
WEYL_TOL = 1e-5
TORSION_TOL = 1e-8
TANGENCY_TOL = 1e-6
CLASSIFY_TOL = 1e-5
RECONSTRUCT_TOL = 1e-4
TRANSPORT_STEPS = 400


def threads():
    """Worker count from ``NULLGEO_THREADS`` (default: up to 4 CPUs)."""
    raw = os.environ.get("NULLGEO_THREADS", "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise NullGeoError(f"NULLGEO_THREADS must be an integer, got {raw!r}") from None
        return max(1, n)
    return max(1, min(4, os.cpu_count() or 1))


def fan_out(func, items):
    """``{key: func(key, value)}`` computed concurrently, returned in sorted key order."""
    keys = sorted(items)
    n = min(threads(), len(keys))
    if n <= 1:
        results = [func(k, items[k]) for k in keys]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(lambda k: func(k, items[k]), keys))
    return dict(zip(keys, results))


def _require_hypersurface(d):
    if d.hypersurface is None:
        raise NullGeoError(f"{d.name}: this command needs a [hypersurface] section")
    return d.hypersurface


def _weyl(d):
    return WeylData(_require_hypersurface(d), tangent_part=d.gauge)


def _connection(d):
    weyl = None
    if d.connection is not None and d.connection.source == "weyl":
        weyl = _weyl(d)
    return d.build_connection(weyl)


def _plot(args, builder, stem, *pieces):
    """Render a figure into ``--report-dir``; returns the written path or None."""
    if not args.report_dir:
        return None
    from . import plotting  # matplotlib loads only when figures are requested

    fig = getattr(plotting, builder)(*pieces)
    return plotting.save(fig, args.report_dir, stem)


def _flat_gamma(G):
    """``Gamma[c, a, b]`` as a ``k x k^2`` matrix (row ``c``, column ``a*k + b``)."""
    k = G.shape[0]
    return G.reshape(k, k * k)


# commands -----------------------------------------------------------------

def cmd_inspect(args, d, rep):
    rep.add("tol.rank", args.tol)
    if d.hypersurface is not None:
        h = d.hypersurface
        rep.add("dimension.ambient", h.ambient.dim)
        rep.add("dimension.hypersurface", h.n + 1)
        rep.add("screen.policy", h.screen_policy)

        def work(name, u):
            form = induced_metric(h, u)
            rank, pos, neg = rank_signature(form, args.tol)
            x = h.position(u)
            return rank, pos, neg, bool(h.ambient.check_signature(x))

        res = fan_out(work, d.points)
        lightlike = True
        for name, (rank, pos, neg, amb_ok) in res.items():
            rep.add(f"point.{name}.coords", d.points[name])
            rep.add(f"point.{name}.rank", rank)
            rep.add(f"point.{name}.positive", pos)
            rep.add(f"point.{name}.negative", neg)
            rep.add(f"point.{name}.ambient_signature_ok", amb_ok)
            lightlike &= rank == h.n
        rep.add("verdict.lightlike", lightlike)
        if lightlike and d.points:
            geo = diagnose_geodesic(h, d.points, GEODESIC_TOL)
            rep.add("tol.geodesic", geo.tol)
            rep.add("verdict.geodesic", geo.verdict)
    if d.connection is not None:
        c = _connection(d)
        rep.add("connection.source", d.connection.source)
        rep.add("connection.dim", c.dim)
        rep.add("connection.framed", c.has_frame)
        if c.base_point is not None:
            rep.add("connection.base", c.base_point)
    rep.add("loops", ",".join(sorted(d.loops)) or "none")
    return EXIT_OK


def cmd_umbilic(args, d, rep):
    h = _require_hypersurface(d)
    rep.add("tol.umbilic", args.tol)
    rep.add("tol.proper", PROPER_TOL)
    rep.add("tol.geodesic", GEODESIC_TOL)

    def work(name, u):
        one = {name: u}
        return diagnose_umbilic(h, one, args.tol), diagnose_geodesic(h, one, GEODESIC_TOL)

    res = fan_out(work, d.points)
    lambdas = {n: r[0].lambdas[n] for n, r in res.items()}
    residuals = {n: r[0].residuals[n] for n, r in res.items()}
    for name in res:
        rep.add(f"point.{name}.coords", d.points[name])
        rep.add(f"point.{name}.lambda", lambdas[name])
        rep.add(f"point.{name}.residual", residuals[name])
        rep.add(f"point.{name}.max_abs_B", res[name][1].max_abs_B[name])
    verdict = umbilic_verdict(lambdas, residuals, args.tol, PROPER_TOL)
    geo = "totally_geodesic" if all(r[1].verdict == "totally_geodesic" for r in res.values()) else "not_geodesic"
    rep.add("verdict.umbilic", verdict)
    rep.add("verdict.geodesic", geo)
    names = list(res)
    path = _plot(args, "lambda_table", "umbilic_lambda", names,
                 [lambdas[n] for n in names], [residuals[n] for n in names], args.tol)
    if path:
        rep.add("figure.lambda", os.path.basename(path))
    return EXIT_OK


def cmd_weyl_build(args, d, rep):
    w = _weyl(d)
    rep.add("tol.umbilic", w.tol)
    rep.add("gauge", "file" if d.gauge is not None else "zero")

    def work(name, u):
        fields = adapted_frame_fields(w, u)
        return (w.lam(u), w.zeta(u), w.theta(u), w.christoffel(u),
                np.stack([f(u) for f in fields]), frame_coefficients(w, u, fields),
                theta_closedness(w, u))

    res = fan_out(work, d.points)
    for name, (lam, zeta, theta, G, E, Gf, closed) in res.items():
        rep.add(f"point.{name}.coords", d.points[name])
        rep.add(f"point.{name}.lambda", lam)
        rep.add(f"point.{name}.zeta", zeta)
        rep.add(f"point.{name}.theta", theta)
        rep.add(f"point.{name}.dtheta", closed)
        rep.add(f"point.{name}.gamma_coord", _flat_gamma(G))
        rep.add(f"point.{name}.frame", E)
        rep.add(f"point.{name}.gamma_frame", _flat_gamma(Gf))
    names = list(res)
    path = _plot(args, "residual_bars", "weyl_theta",
                 {f"theta_{i}": {n: res[n][2][i] for n in names} for i in range(len(w.h.params))},
                 {}, "|theta| components")
    if path:
        rep.add("figure.theta", os.path.basename(path))
    return EXIT_OK


def cmd_weyl_verify(args, d, rep):
    w = _weyl(d)
    rep.add("tol.conformality", args.tol)
    rep.add("tol.torsion", TORSION_TOL)
    rep.add("tol.tangency", TANGENCY_TOL)
    rep.add("seed", args.seed)
    rep.add("triples", args.triples)

    def work(name, u):
        return verify_weyl(w, {name: u}, tol=args.tol, seed=args.seed, triples=args.triples,
                           torsion_tol=TORSION_TOL, tangency_tol=TANGENCY_TOL)

    res = fan_out(work, d.points)
    groups = {"conformality": {}, "torsion": {}, "tangency": {}}
    for name, v in res.items():
        rep.add(f"point.{name}.coords", d.points[name])
        for key in groups:
            groups[key][name] = getattr(v, key)[name]
            rep.add(f"point.{name}.{key}", groups[key][name])
    passed = all(v.passed for v in res.values())
    for key in groups:
        rep.add(f"max.{key}", max(groups[key].values()) if groups[key] else 0.0)
    rep.add("passed", passed)
    path = _plot(args, "residual_bars", "weyl_residuals", groups,
                 {"conformality": args.tol, "torsion": TORSION_TOL, "tangency": TANGENCY_TOL},
                 "Weyl residuals")
    if path:
        rep.add("figure.residuals", os.path.basename(path))
    return EXIT_OK if passed else EXIT_TOLERANCE


def _selected_loops(args, d):
    if not d.loops:
        raise NullGeoError(f"{d.name}: no [loop] sections")
    if not args.loops:
        return dict(d.loops)
    wanted = [n.strip() for n in args.loops.split(",") if n.strip()]
    missing = [n for n in wanted if n not in d.loops]
    if missing:
        raise DefinitionError(f"unknown loop(s): {', '.join(missing)}")
    return {n: d.loops[n] for n in wanted}


def _holonomy(args, d, c):
    return fan_out(lambda name, loop: holonomy_at_base(c, loop, args.steps, loop_id=name),
                   _selected_loops(args, d))


def _add_classification(rep, result):
    rep.add("classify.verdict", result.verdict)
    rep.add("classify.line_residual", result.block_residuals[0])
    rep.add("classify.conformal_residual", result.block_residuals[1])
    if result.invariant_line is not None:
        rep.add("classify.invariant_line", result.invariant_line)
    if result.adapted_change_of_basis is not None:
        rep.add("classify.change_of_basis", result.adapted_change_of_basis)
    if result.quotient_form is not None:
        rep.add("classify.quotient_form", np.atleast_2d(result.quotient_form))
    if result.signature is not None:
        rep.add("classify.signature", np.asarray(result.signature, dtype=float))
    rep.add("classify.flag_count", len(result.flags))
    for i, flag in enumerate(result.flags):
        rep.add(f"classify.flag.{i}", flag)


def cmd_holonomy(args, d, rep):
    c = _connection(d)
    rep.add("steps", args.steps)
    rep.add("tol.classify", args.tol)
    rep.add("seed", args.seed)
    rep.add("base", c.base_point)
    els = _holonomy(args, d, c)
    for name, e in els.items():
        rep.add(f"loop.{name}.matrix", e.matrix)
        rep.add(f"loop.{name}.det", float(np.linalg.det(e.matrix)))
        rep.add(f"loop.{name}.error_estimate", e.integration_error_estimate)
        rep.add(f"loop.{name}.liouville", e.liouville_residual)
    code = EXIT_OK
    if args.classify:
        result = classify([els[n] for n in els], tol=args.tol, seed=args.seed)
        _add_classification(rep, result)
        code = EXIT_OK if result.qualifies else EXIT_TOLERANCE
    path = _plot(args, "holonomy_matrices", "holonomy", [els[n] for n in els])
    if path:
        rep.add("figure.holonomy", os.path.basename(path))
    return code


def cmd_reconstruct(args, d, rep):
    c = _connection(d)
    paths = tuple(p.strip() for p in args.paths.split(",") if p.strip())
    bad = [p for p in paths if p not in ("straight", "elbow")]
    if bad or not paths:
        raise NullGeoError(f"--paths takes straight and/or elbow, got {args.paths!r}")
    rep.add("steps", args.steps)
    rep.add("transport_steps", args.transport_steps)
    rep.add("paths", ",".join(paths))
    rep.add("tol.classify", CLASSIFY_TOL)
    rep.add("tol.reconstruct", args.tol)
    result = classify(list(_holonomy(args, d, c).values()), tol=CLASSIFY_TOL, seed=args.seed)
    _add_classification(rep, result)
    if not result.qualifies:
        raise NullGeoError("holonomy does not qualify; nothing to reconstruct")
    points = d.points
    samples = {}
    for name, one in fan_out(lambda n, x: reconstruct_metric(c, result, {n: x}, paths,
                                                              args.transport_steps, args.tol),
                             points).items():
        samples[name] = one[name]

    def g_field(x):
        g, _ = transported_metric(c, result, x, straight_path(c.base_point, x), args.transport_steps)
        return to_coordinates(c, x, g)

    props = fan_out(lambda n, x: verify_weyl_property(c, g_field, {n: x}, args.tol), points)
    h = d.hypersurface
    worst = 0.0
    factors = {}
    for name, s in samples.items():
        rep.add(f"point.{name}.coords", points[name])
        rep.add(f"point.{name}.g", s.g_coord)
        rep.add(f"point.{name}.line", s.line)
        rep.add(f"point.{name}.kernel_residual", s.kernel_residual)
        rep.add(f"point.{name}.path_residual", s.path_residual)
        p = props[name]
        rep.add(f"point.{name}.theta", p.theta[name])
        rep.add(f"point.{name}.weyl_residual", p.residual[name])
        rep.add(f"point.{name}.forward_residual", p.forward_lemma[name])
        worst = max(worst, p.residual[name], p.forward_lemma[name], s.path_residual)
        if h is not None:
            f, r = proportionality(s.g_coord, h.metric_params(points[name]))
            factors[name] = f
            rep.add(f"point.{name}.induced_factor", f)
            rep.add(f"point.{name}.induced_residual", r)
            worst = max(worst, r)
    rep.add("max.residual", worst)
    passed = worst <= args.tol
    rep.add("passed", passed)
    if factors:
        names = list(factors)
        path = _plot(args, "scalar_profile", "reconstruct_factor", names, [factors[n] for n in names],
                     "g / induced g", "conformal factor")
        if path:
            rep.add("figure.factor", os.path.basename(path))
    return EXIT_OK if passed else EXIT_TOLERANCE


def cmd_golden(args, rep):
    cases = [args.case] if args.case else list(CASES)
    ok = True
    for name in cases:
        g = run_golden(load_case(name))
        for i, row in enumerate(g.rows):
            key = f"{name}.{i:02d}.{row.quantity}"
            rep.add(f"{key}.status", row.status)
            rep.add(f"{key}.residual", row.residual)
            rep.add(f"{key}.tol", row.tol if isinstance(row.tol, float) else str(row.tol))
            if row.paper_conflict:
                rep.add(f"{key}.paper_conflict", True)
        rep.add(f"{name}.passed", g.passed)
        ok &= g.passed
        if not g.passed:
            print(g.diff_table(), file=sys.stderr)
    rep.add("passed", ok)
    return EXIT_OK if ok else EXIT_TOLERANCE


# entry point --------------------------------------------------------------

COMMANDS = {
    "inspect": cmd_inspect,
    "umbilic": cmd_umbilic,
    "weyl-build": cmd_weyl_build,
    "weyl-verify": cmd_weyl_verify,
    "holonomy": cmd_holonomy,
    "reconstruct": cmd_reconstruct,
}


def _loop_steps(text):
    n = int(text)
    if n < 100:
        raise argparse.ArgumentTypeError("holonomy needs at least 100 steps")
    return n


class _Parser(argparse.ArgumentParser):
    """Usage errors are parse errors: exit 1, keeping 2 for preconditions."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARSE, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="nullgeo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"nullgeo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_file(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("file", help="definition file (nullgeo-def v1)")
        p.add_argument("--out", help="also write the report to this path")
        p.add_argument("--report-dir", help="directory for PNG figures")
        return p

    p = with_file("inspect", "rank, signature and lightlike verdict per point")
    p.add_argument("--tol", type=float, default=1e-9, help="relative eigenvalue cutoff (default 1e-9)")
    p = with_file("umbilic", "umbilic factor table and geodesic/umbilic verdicts")
    p.add_argument("--tol", type=float, default=UMBILIC_TOL, help=f"fit residual (default {UMBILIC_TOL:g})")
    with_file("weyl-build", "Weyl connection coefficients and theta samples")
    p = with_file("weyl-verify", "torsion, tangency and conformality residuals")
    p.add_argument("--tol", type=float, default=WEYL_TOL, help=f"conformality (default {WEYL_TOL:g})")
    p.add_argument("--seed", type=int, default=0, help="seed for random test fields (default 0)")
    p.add_argument("--triples", type=int, default=5, help="field triples per point (default 5)")
    p = with_file("holonomy", "holonomy elements of the file's loops")
    p.add_argument("--steps", type=_loop_steps, default=DEFAULT_STEPS, help=f"RK4 steps per loop (default {DEFAULT_STEPS})")
    p.add_argument("--loops", help="comma-separated loop names (default: all)")
    p.add_argument("--classify", action="store_true", help="run the invariant-line structure test")
    p.add_argument("--tol", type=float, default=CLASSIFY_TOL, help=f"classification (default {CLASSIFY_TOL:g})")
    p.add_argument("--seed", type=int, default=0, help="seed for candidate lines (default 0)")
    p = with_file("reconstruct", "metric from the holonomy structure, with Weyl residuals")
    p.add_argument("--paths", default="straight,elbow", help="transport paths to compare (default straight,elbow)")
    p.add_argument("--steps", type=_loop_steps, default=DEFAULT_STEPS, help=f"RK4 steps per loop (default {DEFAULT_STEPS})")
    p.add_argument("--loops", help="comma-separated loop names (default: all)")
    p.add_argument("--transport-steps", type=int, default=TRANSPORT_STEPS,
                   help=f"RK4 steps per reconstruction path (default {TRANSPORT_STEPS})")
    p.add_argument("--tol", type=float, default=RECONSTRUCT_TOL, help=f"residuals (default {RECONSTRUCT_TOL:g})")
    p.add_argument("--seed", type=int, default=0, help="seed for candidate lines (default 0)")
    p = sub.add_parser("golden", help="run the bundled fixtures against their expectations")
    p.add_argument("--case", choices=CASES, help="run one case (default: all)")
    p.add_argument("--out", help="also write the report to this path")
    return parser


def _normalise_argv(argv):
    """Accept ``weyl build`` and ``weyl verify`` as spellings of the dashed commands."""
    argv = list(argv)
    if len(argv) >= 2 and argv[0] == "weyl" and argv[1] in ("build", "verify"):
        argv[:2] = [f"weyl-{argv[1]}"]
    return argv


def run(argv=None):
    """Run a command; returns ``(exit_code, report_text)``."""
    args = build_parser().parse_args(_normalise_argv(sys.argv[1:] if argv is None else argv))
    rep = Report(args.command)
    try:
        if args.command == "golden":
            code = cmd_golden(args, rep)
        else:
            rep.add("file", os.path.basename(args.file))
            d = load(args.file)
            code = COMMANDS[args.command](args, d, rep)
    except NullGeoError as exc:
        print(f"nullgeo: error: {exc}", file=sys.stderr)
        return exc.exit_code, None
    except OSError as exc:
        print(f"nullgeo: error: {exc}", file=sys.stderr)
        return EXIT_PARSE, None
    text = rep.render()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return code, text


def main(argv=None):
    code, text = run(argv)
    if text:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
