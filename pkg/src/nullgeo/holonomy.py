"""Parallel transport around loops, holonomy classification and metric reconstruction.

A connection is given by its coefficients in a frame ``{e_a}`` over a single
chart: ``nabla_{e_a} e_b = Gamma[c, a, b] e_c``.  Without explicit frame
fields the frame is the coordinate frame.  Vectors are carried as frame
components, so a transport matrix maps frame components at the start of a
path to frame components at its end.

The structure test asks whether sampled holonomy elements fit the group of
block matrices ::

    [ alpha  b^T       ]
    [ 0      mu * C    ]   with C in O(p, n-p)

up to one common change of basis: a common invariant line plus a conformal
action on the quotient.  This is the form ``R^n x| [R* x (R*.O(p, n-p))]``;
some texts state the quotient factor as ``R*.SO(n)``, which is the
definite special case.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, LoopNotClosedError, ReconstructionInconsistentError
from .expr import ExprField, parse
from .numdiff import ExprMap, H4, directional, nested_step

DEFAULT_STEPS = 2000
CLOSURE_TOL = 1e-10
LINE_TOL = 1e-6


def _as_fields(entries, variables):
    return [e if isinstance(e, ExprField) else parse(str(e), variables) for e in entries]


class FramedConnection:
    """Connection coefficients over a chart.

    ``coefficients`` is a ``dim x dim x dim`` grid of expressions (or parsed
    fields) indexed ``[c][a][b]``; alternatively ``func`` maps a point (or a
    ``(K, dim)`` array of points, when ``vectorized``) to the coefficient
    array.  ``frame`` lists the frame fields ``e_a`` by coordinate
    components.  ``periods`` maps coordinate indices to their period, used
    when checking that a loop closes.
    """

    def __init__(self, coords, coefficients=None, func=None, frame=None, base_point=None,
                 periods=None, vectorized=False, name=""):
        self.coords = tuple(coords)
        k = len(self.coords)
        if (coefficients is None) == (func is None):
            raise ValueError("give exactly one of coefficients or func")
        self._map = None
        if coefficients is not None:
            grid = [[[coefficients[c][a][b] for b in range(k)] for a in range(k)] for c in range(k)]
            flat = _as_fields([grid[c][a][b] for c in range(k) for a in range(k) for b in range(k)], self.coords)
            self._map = ExprMap(flat)
            self.coefficients = flat
        self._func = func
        self._vectorized = vectorized
        self._frame = None
        if frame is not None:
            if len(frame) != k or any(len(e) != k for e in frame):
                raise ValueError(f"frame needs {k} fields of {k} components")
            self._frame = ExprMap(_as_fields([frame[a][i] for a in range(k) for i in range(k)], self.coords))
        self.base_point = None if base_point is None else np.asarray(base_point, dtype=float)
        self.periods = dict(periods or {})
        self.name = name

    @property
    def dim(self):
        return len(self.coords)

    @property
    def has_frame(self):
        return self._frame is not None

    def gamma(self, x):
        return self.gamma_many(np.asarray(x, dtype=float)[None, :])[0]

    def gamma_many(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        k = self.dim
        if self._map is not None:
            return self._map.many(pts).reshape(len(pts), k, k, k)
        if self._vectorized:
            out = np.asarray(self._func(pts), dtype=float)
        else:
            out = np.stack([np.asarray(self._func(p), dtype=float) for p in pts])
        if not np.all(np.isfinite(out)):
            raise DomainError("non-finite connection coefficient", pts[int(np.argmax(~np.isfinite(out).reshape(len(pts), -1).all(1)))])
        return out.reshape(len(pts), k, k, k)

    def frame_matrix(self, x):
        """Columns are the coordinate components of the frame fields."""
        return self.frame_many(np.asarray(x, dtype=float)[None, :])[0]

    def frame_many(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        k = self.dim
        if self._frame is None:
            return np.broadcast_to(np.eye(k), (len(pts), k, k)).copy()
        # stored as [a][i]; return E[i, a]
        return self._frame.many(pts).reshape(len(pts), k, k).transpose(0, 2, 1)

    def frame_bracket(self, x):
        """``c[c, a, b]`` with ``[e_a, e_b] = c^c_ab e_c``."""
        k = self.dim
        x = np.asarray(x, dtype=float)
        if self._frame is None:
            return np.zeros((k, k, k))
        E = self.frame_matrix(x)
        # dE[i, a, j] = d_j E[i, a]
        dE = np.stack([directional(self.frame_matrix, x, np.eye(k)[j]) for j in range(k)], axis=-1)
        br = np.einsum("ibj,ja->iab", dE, E) - np.einsum("iaj,jb->iab", dE, E)
        return np.linalg.solve(E, br.reshape(k, k * k)).reshape(k, k, k)

    def torsion(self, x):
        """``T[c, a, b] = Gamma^c_ab - Gamma^c_ba - c^c_ab`` at ``x``."""
        G = self.gamma(x)
        return G - G.transpose(0, 2, 1) - self.frame_bracket(x)

    def torsion_residual(self, points):
        return max(float(np.max(np.abs(self.torsion(p)))) for p in points)

    def coordinate_christoffel(self, x):
        """Coefficients in the coordinate frame: ``nabla_{d_i} d_j = Gamma[k, i, j] d_k``."""
        x = np.asarray(x, dtype=float)
        G = self.gamma(x)
        if self._frame is None:
            return G
        k = self.dim
        E = self.frame_matrix(x)
        Einv = np.linalg.inv(E)
        dEinv = np.stack([directional(lambda p: np.linalg.inv(self.frame_matrix(p)), x, np.eye(k)[i])
                          for i in range(k)])  # dEinv[i, b, j] = d_i Einv[b, j]
        frame_part = np.einsum("ibj->bij", dEinv) + np.einsum("cab,ai,bj->cij", G, Einv, Einv)
        return np.einsum("kc,cij->kij", E, frame_part)

    @classmethod
    def levi_civita(cls, ambient, base_point=None, periods=None, name="levi-civita"):
        return cls(ambient.coords, func=ambient.christoffel, base_point=base_point,
                   periods=periods, name=name)


class Segment:
    """A path piece ``t -> x(t)`` on ``[t0, t1]`` given by coordinate expressions in ``t``."""

    def __init__(self, components, t0, t1, variable="t", reverse=False):
        self.fields = _as_fields(components, (variable,))
        self._map = ExprMap(self.fields)
        self.t0 = float(t0)
        self.t1 = float(t1)
        self.variable = variable
        self.reverse = reverse
        if not self.t1 > self.t0:
            raise ValueError("segment needs t1 > t0")

    def _param(self, s):
        """Map ``s`` in ``[0, 1]`` to the curve parameter."""
        s = np.asarray(s, dtype=float)
        if self.reverse:
            s = 1.0 - s
        return self.t0 + s * (self.t1 - self.t0)

    def position(self, s):
        t = np.atleast_1d(self._param(s))
        return self._map.many(t[:, None])

    def velocity(self, s):
        """``dx/ds`` by a fourth-order stencil in ``t``."""
        t = np.atleast_1d(self._param(s))
        h = H4 * max(1.0, float(np.max(np.abs(t))))
        offs = np.array([2.0, 1.0, -1.0, -2.0])
        pts = (t[:, None] + offs[None, :] * h).reshape(-1, 1)
        v = self._map.many(pts).reshape(len(t), 4, -1)
        d = (-v[:, 0] + 8.0 * v[:, 1] - 8.0 * v[:, 2] + v[:, 3]) / (12.0 * h)
        scale = self.t1 - self.t0
        return -d * scale if self.reverse else d * scale

    def reversed(self):
        return Segment(self.fields, self.t0, self.t1, self.variable, not self.reverse)

    def start(self):
        return self.position(0.0)[0]

    def end(self):
        return self.position(1.0)[0]


class LineSegment:
    """Straight coordinate line from ``p`` to ``q``."""

    def __init__(self, p, q):
        self.p = np.asarray(p, dtype=float)
        self.q = np.asarray(q, dtype=float)

    def position(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return self.p[None, :] + s[:, None] * (self.q - self.p)[None, :]

    def velocity(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return np.broadcast_to(self.q - self.p, (len(s), self.p.size)).copy()

    def reversed(self):
        return LineSegment(self.q, self.p)

    def start(self):
        return self.p.copy()

    def end(self):
        return self.q.copy()


@dataclass
class Path:
    segments: list
    name: str = ""

    def reversed(self):
        return Path([s.reversed() for s in reversed(self.segments)], self.name + "^-1")

    def start(self):
        return self.segments[0].start()

    def end(self):
        return self.segments[-1].end()

    def then(self, other):
        return Path(list(self.segments) + list(other.segments), f"{self.name}.{other.name}")


def closure_gap(path, periods=None):
    """Distance between the ends of ``path`` after reducing periodic coordinates."""
    d = path.end() - path.start()
    for i, p in (periods or {}).items():
        d[i] -= p * np.round(d[i] / p)
    return float(np.max(np.abs(d)))


@dataclass
class Transport:
    matrix: np.ndarray
    error_estimate: float
    liouville_residual: float
    trace_integral: float


def _segment_system(c, seg, steps):
    """``A`` at the RK4 nodes ``s_n, s_n + h/2, s_n + h`` (shape ``(2 steps + 1, k, k)``)."""
    s = np.linspace(0.0, 1.0, 2 * steps + 1)
    x = seg.position(s)
    v = seg.velocity(s)
    E = c.frame_many(x)
    va = np.linalg.solve(E, v[:, :, None])[:, :, 0] if c.has_frame else v
    G = c.gamma_many(x)
    return np.einsum("ncab,na->ncb", G, va)


def _rk4(A, steps, k):
    """Integrate ``T' = -A T`` from the identity with nodes from ``_segment_system``."""
    h = 1.0 / steps
    T = np.eye(k)
    for n in range(steps):
        a0, am, a1 = A[2 * n], A[2 * n + 1], A[2 * n + 2]
        k1 = -a0 @ T
        k2 = -am @ (T + 0.5 * h * k1)
        k3 = -am @ (T + 0.5 * h * k2)
        k4 = -a1 @ (T + h * k3)
        T = T + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return T


def transport_path(c, path, steps=DEFAULT_STEPS, estimate_error=True):
    """Transport matrix along ``path`` (frame components, start to end)."""
    if steps < 2:
        raise ValueError("need at least 2 steps")
    k = c.dim
    T = np.eye(k)
    Th = np.eye(k)
    trace = 0.0
    for seg in path.segments:
        A = _segment_system(c, seg, steps)
        T = _rk4(A, steps, k) @ T
        tr = np.trace(A, axis1=1, axis2=2)
        h = 1.0 / steps
        trace += float(h / 6.0 * (tr[0:-1:2] + 4.0 * tr[1::2] + tr[2::2]).sum())
        if estimate_error:
            half = steps // 2
            Th = _rk4(_segment_system(c, seg, half), half, k) @ Th
    err = float(np.max(np.abs(T - Th))) / 15.0 if estimate_error else float("nan")
    expected = np.exp(-trace)
    liou = abs(float(np.linalg.det(T)) - expected) / max(1.0, abs(expected))
    return Transport(T, err, liou, trace)


@dataclass
class HolonomyElement:
    loop_id: str
    matrix: np.ndarray
    integration_error_estimate: float
    liouville_residual: float = 0.0
    steps: int = DEFAULT_STEPS
    base_point: np.ndarray = None


def parallel_transport(c, loop, steps=DEFAULT_STEPS, loop_id=None):
    """Holonomy element of a closed ``loop`` (a :class:`Path`)."""
    if steps < 100:
        raise ValueError("holonomy needs at least 100 steps")
    gap = closure_gap(loop, c.periods)
    if gap > CLOSURE_TOL:
        raise LoopNotClosedError(f"loop {loop_id or loop.name!r} does not close: gap {gap:.3e}")
    tr = transport_path(c, loop, steps)
    if not np.all(np.isfinite(tr.matrix)) or abs(np.linalg.det(tr.matrix)) < 1e-300:
        raise DomainError("transport matrix is not invertible")
    return HolonomyElement(loop_id or loop.name, tr.matrix, tr.error_estimate,
                           tr.liouville_residual, steps, loop.start())


def holonomy_at_base(c, loop, steps=DEFAULT_STEPS, loop_id=None):
    """Holonomy element at ``c.base_point``.

    A loop starting elsewhere is made into a lasso: its element is conjugated
    by transport along the straight path from the base point to its start.
    """
    el = parallel_transport(c, loop, steps, loop_id)
    if c.base_point is None:
        return el
    gap = closure_gap(Path([LineSegment(c.base_point, loop.start())]), c.periods)
    if gap <= CLOSURE_TOL:
        return el
    tr = transport_path(c, straight_path(c.base_point, loop.start()), steps)
    P = tr.matrix
    M = np.linalg.solve(P, el.matrix @ P)
    err = el.integration_error_estimate + 2.0 * tr.error_estimate * float(np.max(np.abs(el.matrix)))
    return HolonomyElement(el.loop_id, M, err, el.liouville_residual, steps, c.base_point.copy())


def circle_loop(fixed, angle_index, name=None, t0=0.0, t1=2 * np.pi):
    """Loop along one angular coordinate with the others held at ``fixed``."""
    comps = ["t" if i == angle_index else repr(float(v)) for i, v in enumerate(fixed)]
    return Path([Segment(comps, t0, t1)], name=name or f"circle{tuple(float(v) for v in fixed)}")


# classification -----------------------------------------------------------

@dataclass
class ClassificationResult:
    invariant_line: np.ndarray
    adapted_change_of_basis: np.ndarray
    block_residuals: tuple  # (line_preservation, conformality)
    verdict: str
    quotient_form: np.ndarray = None
    signature: tuple = None
    flags: list = field(default_factory=list)
    conjugated: list = field(default_factory=list)
    tol: float = 1e-5

    @property
    def qualifies(self):
        return self.verdict == "qualifies"


def _line_residual(mats, v):
    """Largest sine of the angle between ``v`` and ``T v``."""
    v = v / np.linalg.norm(v)
    worst = 0.0
    for T in mats:
        w = T @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 1.0
        worst = max(worst, float(np.linalg.norm(w - (v @ w) * v) / nw))
    return worst


def _candidates(mats, rng, combos=6):
    k = mats[0].shape[0]
    pool = [np.eye(k)[i] for i in range(k)]
    sources = list(mats)
    for _ in range(combos):
        coeffs = rng.normal(size=len(mats))
        sources.append(sum(ci * T for ci, T in zip(coeffs, mats)))
    for S in sources:
        w, V = np.linalg.eig(S)
        for j in range(k):
            if abs(w[j].imag) <= 1e-8 * max(1.0, abs(w[j])):
                vec = V[:, j].real
                n = np.linalg.norm(vec)
                if n > 0:
                    pool.append(vec / n)
    return pool


def _adapted_basis(v):
    k = v.size
    M = np.column_stack([v] + [np.eye(k)[i] for i in range(k)])
    Q, _ = np.linalg.qr(M)
    P = Q[:, :k]
    if P[:, 0] @ v < 0:
        P[:, 0] = -P[:, 0]
    return P


def _sym_basis(n):
    out = []
    for i in range(n):
        for j in range(i, n):
            S = np.zeros((n, n))
            S[i, j] = S[j, i] = 1.0
            out.append(S)
    return out


def fit_conformal_form(blocks, tol=1e-5):
    """Symmetric ``G`` with ``D^T G D = mu G`` for every block, ``mu = |det D|^(2/n)``.

    Returns ``(G, residual, nullity)``; ``nullity > 1`` means the blocks do
    not pin ``G`` down.
    """
    n = blocks[0].shape[0]
    basis = _sym_basis(n)
    rows = []
    for D in blocks:
        mu = abs(np.linalg.det(D)) ** (2.0 / n)
        rows.append(np.stack([(D.T @ S @ D - mu * S).ravel() / max(mu, 1e-300) for S in basis], axis=1))
    A = np.vstack(rows)
    _, sv, Vt = np.linalg.svd(A)
    sv_full = np.concatenate([sv, np.zeros(len(basis) - len(sv))]) if len(sv) < len(basis) else sv
    scale = max(1.0, float(sv_full[0]))
    nullity = int(np.sum(sv_full <= tol * scale))
    coeffs = Vt[-1]
    G = sum(ci * S for ci, S in zip(coeffs, basis))
    G = G / np.linalg.norm(G)
    w = np.linalg.eigvalsh(G)
    if np.sum(w > 0) < np.sum(w < 0) or (np.sum(w > 0) == np.sum(w < 0) and G.flat[0] < 0):
        G = -G
    resid = 0.0
    for D in blocks:
        mu = abs(np.linalg.det(D)) ** (2.0 / n)
        resid = max(resid, float(np.linalg.norm(D.T @ G @ D - mu * G) / max(mu, 1e-300)))
    return G, resid, nullity


def classify(elements, tol=1e-5, seed=0):
    """Test sampled holonomy elements against the invariant-line structure.

    (a) pick the common invariant line among eigenvector candidates of the
    elements and of seeded random combinations, (b) adapt a basis to it,
    (c) conjugate, (d) check the first column and fit a conformal form on the
    quotient blocks.
    """
    if not elements:
        raise ValueError("classify needs at least one element")
    mats = [np.asarray(getattr(e, "matrix", e), dtype=float) for e in elements]
    k = mats[0].shape[0]
    flags = []
    rng = np.random.default_rng(seed)
    scale = max(float(np.max(np.abs(T))) for T in mats)
    if all(np.max(np.abs(T - np.eye(k))) <= tol * max(1.0, scale) for T in mats):
        flags.append("underdetermined: all elements are the identity, e1 chosen as line")
        v = np.eye(k)[0]
        best = _line_residual(mats, v)
    else:
        best, v = None, None
        for cand in _candidates(mats, rng):
            r = _line_residual(mats, cand)
            if best is None or r < best - 1e-15:
                best, v = r, cand
    v = v / np.linalg.norm(v)
    if v[int(np.argmax(np.abs(v)))] < 0:
        v = -v
    P = _adapted_basis(v)
    Pinv = np.linalg.inv(P)
    conj = [Pinv @ T @ P for T in mats]
    line_res = max(float(np.linalg.norm(M[1:, 0]) / max(np.linalg.norm(M), 1e-300)) for M in conj)
    n = k - 1
    if n == 0:
        G, conf, nullity = np.ones((0, 0)), 0.0, 0
    elif n == 1:
        G, conf, nullity = np.ones((1, 1)), 0.0, 1
        flags.append("vacuous for n=1: the quotient block is a scalar")
    else:
        G, conf, nullity = fit_conformal_form([M[1:, 1:] for M in conj], tol)
        if nullity > 1:
            flags.append(f"underdetermined: {nullity}-dimensional family of quotient forms")
    w = np.linalg.eigvalsh(G) if G.size else np.zeros(0)
    gmax = float(np.max(np.abs(w))) if w.size else 1.0
    signature = (int(np.sum(w > 1e-8 * gmax)), int(np.sum(w < -1e-8 * gmax)))
    verdict = "qualifies" if line_res <= tol and conf <= tol else "fails"
    return ClassificationResult(v, P, (line_res, conf), verdict, G, signature, flags, conj, tol)


# reconstruction -----------------------------------------------------------

def straight_path(p, q):
    return Path([LineSegment(p, q)], name="straight")


def elbow_path(p, q):
    """Coordinate-by-coordinate path from ``p`` to ``q``."""
    pts = [np.asarray(p, dtype=float)]
    cur = pts[0].copy()
    for i in range(cur.size):
        if cur[i] != q[i]:
            cur = cur.copy()
            cur[i] = q[i]
            pts.append(cur)
    if len(pts) == 1:
        return straight_path(p, q)
    return Path([LineSegment(a, b) for a, b in zip(pts[:-1], pts[1:])], name="elbow")


def base_form(result):
    """Degenerate form at the base point in frame components: ``G(pi v, pi w)``."""
    Pinv = np.linalg.inv(result.adapted_change_of_basis)
    Q = Pinv[1:, :]
    return Q.T @ result.quotient_form @ Q


def to_coordinates(c, x, g_frame):
    Einv = np.linalg.inv(c.frame_matrix(x))
    return Einv.T @ g_frame @ Einv


def transported_metric(c, result, x, path=None, steps=400):
    """Degenerate metric at ``x`` (frame components) transported from the base point, and the line there."""
    base = c.base_point
    path = straight_path(base, x) if path is None else path
    T = transport_path(c, path, steps, estimate_error=False).matrix
    Tinv = np.linalg.inv(T)
    g = Tinv.T @ base_form(result) @ Tinv
    return 0.5 * (g + g.T), T @ result.invariant_line


def proportionality(g, ref):
    """``(factor, residual)`` with ``g ~ factor * ref``; residual relative to ``|g|``."""
    g = np.asarray(g, dtype=float)
    ref = np.asarray(ref, dtype=float)
    f = float(np.sum(g * ref) / np.sum(ref * ref))
    return f, float(np.linalg.norm(g - f * ref) / max(np.linalg.norm(g), 1e-300))


@dataclass
class ReconstructedSample:
    point: np.ndarray
    g_frame: np.ndarray
    g_coord: np.ndarray
    line: np.ndarray
    kernel_residual: float
    path_residual: float


def reconstruct_metric(c, result, sample_points, paths=("straight", "elbow"), steps=400, tol=1e-4):
    """Degenerate metric samples from transporting the base form and the line.

    Each sample is transported along every named path; the conformal classes
    must agree within ``tol`` or the reconstruction is inconsistent.
    """
    if not result.qualifies:
        raise ValueError("reconstruction needs a qualifying classification")
    builders = {"straight": straight_path, "elbow": elbow_path}
    out = {}
    for name, x in sample_points.items():
        x = np.asarray(x, dtype=float)
        gs = []
        for pname in paths:
            g, line = transported_metric(c, result, x, builders[pname](c.base_point, x), steps)
            gs.append((g, line))
        g, line = gs[0]
        kern = float(np.linalg.norm(g @ line) / max(np.linalg.norm(g) * np.linalg.norm(line), 1e-300))
        pres = 0.0
        for g2, _ in gs[1:]:
            _, r = proportionality(g2, g)
            pres = max(pres, r)
        if pres > tol:
            raise ReconstructionInconsistentError(
                f"transported forms at {name!r} disagree across paths: residual {pres:.3e}")
        out[name] = ReconstructedSample(x, g, to_coordinates(c, x, g), line, kern, pres)
    return out


@dataclass
class WeylPropertyReport:
    theta: dict
    residual: dict
    forward_lemma: dict
    tol: float

    def max(self, which):
        vals = getattr(self, which).values()
        return max(vals) if vals else 0.0


def covariant_metric_derivative(c, g_field, x, step=None):
    """``nabla_i g_jk`` in coordinate components for a callable coordinate metric field."""
    x = np.asarray(x, dtype=float)
    k = x.size
    G = c.coordinate_christoffel(x)
    g = g_field(x)
    step = nested_step(x) if step is None else step
    dg = np.stack([directional(g_field, x, np.eye(k)[i], step) for i in range(k)])
    return dg - np.einsum("mij,mk->ijk", G, g) - np.einsum("mik,jm->ijk", G, g), g


def _kernel_vector(g):
    w, V = np.linalg.eigh(g)
    return V[:, int(np.argmin(np.abs(w)))]


def verify_weyl_property(c, g_field, sample_points, tol=1e-4, step=None):
    """Fit ``theta`` from ``nabla g = theta (x) g`` and check ``g(nabla_X xi, Y) = 0`` for ``xi`` in the kernel.

    ``g_field`` maps a point to coordinate components.  Residuals are relative
    to ``max |g|`` at each point.
    """
    thetas, res, fwd = {}, {}, {}
    for name, x in sample_points.items():
        x = np.asarray(x, dtype=float)
        ng, g = covariant_metric_derivative(c, g_field, x, step)
        gg = float(np.sum(g * g))
        theta = np.array([float(np.sum(ng[i] * g)) / gg for i in range(x.size)])
        scale = float(np.max(np.abs(g)))
        res[name] = float(np.max(np.abs(ng - theta[:, None, None] * g[None]))) / scale
        thetas[name] = theta

        xi = _kernel_vector(g)
        piv = int(np.argmax(np.abs(xi)))
        xi = xi / xi[piv]

        def kernel(p, piv=piv):
            v = _kernel_vector(g_field(p))
            return v / v[piv]

        G = c.coordinate_christoffel(x)
        st = nested_step(x) if step is None else step
        nab_xi = np.stack([directional(kernel, x, np.eye(x.size)[i], st) + G[:, i, :] @ xi
                           for i in range(x.size)])  # row i: nabla_{d_i} xi
        fwd[name] = float(np.max(np.abs(nab_xi @ g))) / scale
    return WeylPropertyReport(thetas, res, fwd, tol)
