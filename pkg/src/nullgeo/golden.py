"""Golden cases: shipped definition files with expected values.

An expectations file starts with ``nullgeo-expect v1``; each other
non-comment line has ``|``-separated columns::

    quantity | point | value | tol | provenance | ref | paper value

``point`` is a point name, ``*`` (all points of the definition, the worst
value is kept) or inline coordinates in parentheses.  ``value`` is a real,
a ``;``-vector or a word (verdicts).  ``tol`` is a real, ``exact`` for words
or ``info`` for values that are recorded but never fail.  ``provenance`` is
``PAPER``, ``DERIVED`` or ``TRIVIAL``; a ``PAPER`` row carries its reference
in ``ref``.  When the published value disagrees with the independent oracle
the oracle value goes in ``value`` and the published one in the last
column; the run then flags ``PAPER-CONFLICT`` for that row.
"""

import time
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources

import numpy as np

from .deffile import loads
from .errors import DefinitionError, NullGeoError
from .fields import bracket
from .holonomy import classify, holonomy_at_base
from .hypersurface import normalizing_pair
from .induced import dbar, diagnose_geodesic, diagnose_umbilic, never_weyl_witness, second_fundamental_form
from .numdiff import directional
from .weyl import WeylData, match_gauge, verify_weyl

EXPECT_HEADER = "nullgeo-expect v1"
PROVENANCE = ("PAPER", "DERIVED", "TRIVIAL")
CASES = ("lightcone", "cone_nabla0", "plane")


@dataclass
class Expectation:
    quantity: str
    point: str
    value: object
    tol: object
    provenance: str
    ref: str = ""
    paper_value: object = None
    line: int = 0


@dataclass
class GoldenCase:
    name: str
    definition_text: str
    expected: list


@dataclass
class GoldenRow:
    quantity: str
    point: str
    expected: object
    computed: object
    residual: float
    tol: object
    provenance: str
    status: str  # pass, fail, info
    paper_conflict: bool = False
    paper_value: object = None
    message: str = ""


@dataclass
class GoldenReport:
    case: str
    rows: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self):
        return all(r.status != "fail" for r in self.rows)

    def diff_table(self):
        lines = []
        for r in self.rows:
            if r.status == "fail":
                lines.append(f"{r.quantity} @ {r.point}: expected {_fmt(r.expected)} got {_fmt(r.computed)}"
                             f" (residual {r.residual:.3e}, tol {r.tol}) {r.message}")
        return "\n".join(lines)


def _fmt(v):
    if isinstance(v, np.ndarray):
        return "(" + ", ".join(f"{x:.10g}" for x in v) + ")"
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def _value(text):
    text = text.strip()
    if text == "":
        return None
    try:
        if ";" in text:
            return np.array([float(p) for p in text.split(";") if p.strip()], dtype=float)
        return float(text)
    except ValueError:
        return text


def parse_expectations(text):
    lines = text.splitlines()
    first = next((i for i, ln in enumerate(lines) if ln.strip() and not ln.strip().startswith("#")), None)
    if first is None or lines[first].strip() != EXPECT_HEADER:
        raise DefinitionError(f"missing header {EXPECT_HEADER!r}", 1)
    out = []
    for no, raw in enumerate(lines[first + 1:], start=first + 2):
        ln = raw.split("#", 1)[0].strip()
        if not ln:
            continue
        cols = [c.strip() for c in ln.split("|")]
        if len(cols) < 5:
            raise DefinitionError("expected at least 5 columns", no)
        cols += [""] * (7 - len(cols))
        q, point, value, tol, prov, ref, paper = cols[:7]
        if prov not in PROVENANCE:
            raise DefinitionError(f"unknown provenance {prov!r}", no)
        if prov == "PAPER" and not ref:
            raise DefinitionError("PAPER rows need a reference", no)
        if tol not in ("exact", "info"):
            try:
                tol = float(tol)
            except ValueError:
                raise DefinitionError(f"bad tolerance {tol!r}", no) from None
        out.append(Expectation(q, point, _value(value), tol, prov, ref, _value(paper), no))
    return out


def load_case(name):
    base = resources.files("nullgeo") / "data"
    text = (base / f"{name}.def").read_text(encoding="utf-8")
    expected = parse_expectations((base / f"{name}.expect").read_text(encoding="utf-8"))
    return GoldenCase(name, text, expected)


# quantities ---------------------------------------------------------------

class Context:
    """Lazily built objects shared by the quantity functions of one case."""

    def __init__(self, definition):
        self.d = definition

    @cached_property
    def h(self):
        if self.d.hypersurface is None:
            raise DefinitionError("case has no hypersurface")
        return self.d.hypersurface

    @cached_property
    def weyl(self):
        return WeylData(self.h, tangent_part=self.d.gauge)

    @cached_property
    def connection(self):
        weyl = self.weyl if self.d.connection is not None and self.d.connection.source == "weyl" else None
        return self.d.build_connection(weyl)

    def point(self, spec):
        if spec.startswith("(") and spec.endswith(")"):
            return np.array([float(p) for p in spec[1:-1].split(";")])
        if spec not in self.d.points:
            raise DefinitionError(f"unknown point {spec!r}")
        return self.d.points[spec]

    def frame(self, u):
        return normalizing_pair(self.h, u)


def _xi_field(u):
    return np.array([1.0, 0.0])


def _p_field(u):
    """The normalised angular frame field ``r^-2 d_t`` on the cone chart."""
    return np.array([0.0, 1.0 / u[0] ** 2])


def _cone_frame_components(ctx, u, v):
    """Components of an ambient vector in ``{xi, P, d_z}``."""
    d = ctx.h.data(u)
    basis = np.column_stack([d.J @ _xi_field(u), d.J @ _p_field(u), [0.0, 0.0, 1.0]])
    return np.linalg.solve(basis, v)


def _dbar_pair(a, b):
    fields = {"xi": _xi_field, "P": _p_field}

    def q(ctx, u):
        return _cone_frame_components(ctx, u, dbar(ctx.h, u, fields[a], fields[b]))

    return q


def q_lambda(ctx, u):
    return diagnose_umbilic(ctx.h, {"p": u}).lambdas["p"]


def q_umbilic_residual(ctx, u):
    return diagnose_umbilic(ctx.h, {"p": u}).residuals["p"]


def q_umbilic_verdict(ctx, _u):
    return diagnose_umbilic(ctx.h, ctx.d.points).verdict


def q_geodesic_verdict(ctx, _u):
    return diagnose_geodesic(ctx.h, ctx.d.points).verdict


def q_max_abs_B(ctx, u):
    return float(np.max(np.abs(second_fundamental_form(ctx.frame(u)))))


def q_bracket_xi_P(ctx, u):
    br = bracket(_xi_field, _p_field, u)
    return np.linalg.solve(np.column_stack([_xi_field(u), _p_field(u)]), br)


def q_zeta(ctx, u):
    return ctx.weyl.zeta(u)


def q_theta_xi(ctx, u):
    return float(ctx.weyl.theta(u) @ ctx.frame(u).xi_params)


def q_weyl_conformality(ctx, _u):
    return verify_weyl(ctx.weyl, ctx.d.points).max("conformality")


def q_weyl_torsion(ctx, _u):
    return verify_weyl(ctx.weyl, ctx.d.points).max("torsion")


def q_weyl_tangency(ctx, _u):
    return verify_weyl(ctx.weyl, ctx.d.points).max("tangency")


def q_witness_B(ctx, u):
    w = never_weyl_witness(ctx.h, {"p": u})
    return w.B_value


def q_vertex_guard(ctx, u):
    try:
        ctx.h.data(u)
    except NullGeoError:
        return "rejected"
    return "accepted"


def framed_nabla_g(c, metric_fn, u):
    """``N[a, b, c] = (nabla_{e_a} g)(e_b, e_c)`` for a metric on coordinate components."""
    u = np.asarray(u, dtype=float)
    E = c.frame_matrix(u)
    G = c.gamma(u)

    def g_frame(p):
        Ep = c.frame_matrix(p)
        return (Ep.T @ metric_fn(p) @ Ep).ravel()

    k = u.size
    gf = g_frame(u).reshape(k, k)
    dg = np.stack([directional(g_frame, u, E[:, a], order=4).reshape(k, k) for a in range(k)])
    return dg - np.einsum("dab,dc->abc", G, gf) - np.einsum("dac,bd->abc", G, gf)


def omega_cone(ctx, u):
    """``(2/r) gbar(., d_z)`` on the frame ``{xi, P}``."""
    d = ctx.h.data(u)
    dz = np.array([0.0, 0.0, 1.0])
    E = ctx.connection.frame_matrix(u)
    return (2.0 / u[0]) * np.array([d.inner(d.J @ E[:, a], dz) for a in range(2)])


def nabla0_samples(count=20, seed=7):
    rng = np.random.default_rng(seed)
    return [np.array([rng.uniform(0.3, 4.0), rng.uniform(-np.pi, np.pi)]) for _ in range(count)]


def q_nabla0_conformality(ctx, _u):
    worst = 0.0
    for u in nabla0_samples():
        N = framed_nabla_g(ctx.connection, ctx.h.metric_params, u)
        E = ctx.connection.frame_matrix(u)
        gf = E.T @ ctx.h.metric_params(u) @ E
        worst = max(worst, float(np.max(np.abs(N - omega_cone(ctx, u)[:, None, None] * gf[None]))))
    return worst


def q_nabla0_radical(ctx, _u):
    worst = 0.0
    for u in nabla0_samples():
        N = framed_nabla_g(ctx.connection, ctx.h.metric_params, u)
        worst = max(worst, float(np.max(np.abs(N[:, 0, :]))))
    return worst


def q_nabla0_screen_xi(ctx, u):
    return float(framed_nabla_g(ctx.connection, ctx.h.metric_params, u)[0, 1, 1])


def q_omega_xi(ctx, u):
    return float(omega_cone(ctx, u)[0])


def q_nabla0_torsion(ctx, u):
    return ctx.connection.torsion(u)[:, 0, 1]


def _holonomy(ctx):
    els = [holonomy_at_base(ctx.connection, loop, loop_id=name) for name, loop in sorted(ctx.d.loops.items())]
    return classify(els)


def q_holonomy_verdict(ctx, _u):
    return _holonomy(ctx).verdict


def q_holonomy_line(ctx, _u):
    return _holonomy(ctx).invariant_line


def q_gauge_match(ctx, u):
    r = u[0]
    target = np.zeros((2, 2, 2))
    target[0, 0, 0] = 2.0 / r
    W, diff = match_gauge(ctx.weyl, u, [_xi_field, _p_field], target)
    return float(np.max(np.abs(diff)))


QUANTITIES = {
    "lambda": q_lambda,
    "umbilic_residual": q_umbilic_residual,
    "umbilic_verdict": q_umbilic_verdict,
    "geodesic_verdict": q_geodesic_verdict,
    "max_abs_B": q_max_abs_B,
    "dbar_xi_xi": _dbar_pair("xi", "xi"),
    "dbar_xi_P": _dbar_pair("xi", "P"),
    "dbar_P_xi": _dbar_pair("P", "xi"),
    "dbar_P_P": _dbar_pair("P", "P"),
    "bracket_xi_P": q_bracket_xi_P,
    "zeta": q_zeta,
    "theta_xi": q_theta_xi,
    "weyl_conformality": q_weyl_conformality,
    "weyl_torsion": q_weyl_torsion,
    "weyl_tangency": q_weyl_tangency,
    "witness_B": q_witness_B,
    "vertex_guard": q_vertex_guard,
    "nabla0_conformality": q_nabla0_conformality,
    "nabla0_radical": q_nabla0_radical,
    "nabla0_screen_xi": q_nabla0_screen_xi,
    "omega_xi": q_omega_xi,
    "nabla0_torsion_xi_P": q_nabla0_torsion,
    "holonomy_verdict": q_holonomy_verdict,
    "holonomy_line": q_holonomy_line,
    "gauge_match_residual": q_gauge_match,
}


def _compare(expected, computed, tol):
    """Residual and pass flag; words compare exactly."""
    if isinstance(expected, str) or isinstance(computed, str):
        ok = str(expected) == str(computed)
        return (0.0 if ok else 1.0), ok
    e = np.atleast_1d(np.asarray(expected, dtype=float))
    c = np.atleast_1d(np.asarray(computed, dtype=float))
    if e.shape != c.shape:
        return float("inf"), False
    res = float(np.max(np.abs(e - c)))
    return res, tol == "info" or res <= tol


def run_golden(case):
    """Evaluate every expectation of ``case``; returns a :class:`GoldenReport`."""
    t0 = time.perf_counter()
    ctx = Context(loads(case.definition_text, case.name))
    rep = GoldenReport(case.name)
    cache = {}
    for ex in case.expected:
        fn = QUANTITIES.get(ex.quantity)
        if fn is None:
            rep.rows.append(GoldenRow(ex.quantity, ex.point, ex.value, None, float("inf"), ex.tol,
                                      ex.provenance, "fail", message="unknown quantity"))
            continue
        key = (ex.quantity, ex.point)
        try:
            if key not in cache:
                u = None if ex.point == "*" else ctx.point(ex.point)
                cache[key] = fn(ctx, u)
            computed = cache[key]
        except NullGeoError as exc:
            rep.rows.append(GoldenRow(ex.quantity, ex.point, ex.value, None, float("inf"), ex.tol,
                                      ex.provenance, "fail", message=str(exc)))
            continue
        res, ok = _compare(ex.value, computed, ex.tol)
        status = "info" if ex.tol == "info" else ("pass" if ok else "fail")
        conflict = False
        if ex.paper_value is not None:
            _, pok = _compare(ex.paper_value, computed, 0.0 if ex.tol == "info" else ex.tol)
            conflict = not pok
        rep.rows.append(GoldenRow(ex.quantity, ex.point, ex.value, computed, res, ex.tol, ex.provenance,
                                  status, conflict, ex.paper_value))
    rep.seconds = time.perf_counter() - t0
    return rep
