"""Reader for ``nullgeo-def v1`` definition files.

A file starts with the header line ``nullgeo-def v1`` followed by
``[section]`` blocks of ``key = value`` lines.  ``#`` starts a comment.
List values are separated by ``;``.  Numbers (points, ranges, periods) may be
constant expressions such as ``2*pi``.

Sections::

    [ambient]         coords, metric[i,j], signature
    [hypersurface]    params, immersion, screen, screen_frame, theta, gauge, domain
    [points]          <name> = v1; v2; ...
    [loop <name>]     t = t0; t1   then   path = c1; c2; ...   (repeatable)
    [connection]      coords, gamma[c,a,b], frame[a], base, periodic, source

``[connection]`` either lists coefficients or sets ``source = weyl`` (the
Weyl connection of the hypersurface) or ``source = levi-civita`` (of the
ambient metric).
"""

import re
from dataclasses import dataclass, field

import numpy as np

from .ambient import AmbientManifold
from .errors import DefinitionError, ParseError
from .expr import parse
from .holonomy import FramedConnection, Path, Segment
from .hypersurface import SCREEN_POLICIES, HypersurfaceChart
from .numdiff import ExprMap

HEADER = "nullgeo-def v1"
_SECTION = re.compile(r"^\[\s*([a-z]+)(?:\s+([A-Za-z0-9_.\-]+))?\s*\]$")
_INDEXED = re.compile(r"^([a-z_]+)\[\s*([0-9,\s]+)\]$")
_DOMAIN = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*(>=|<=|>|<)\s*(.+)$")
_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-]*$")


@dataclass
class ConnectionSpec:
    source: str  # "coefficients", "weyl" or "levi-civita"
    coords: tuple = ()
    gamma: dict = field(default_factory=dict)
    frame: dict = field(default_factory=dict)
    base: np.ndarray = None
    periods: dict = field(default_factory=dict)
    line: int = 0


@dataclass
class Definition:
    name: str
    ambient: AmbientManifold = None
    hypersurface: HypersurfaceChart = None
    points: dict = field(default_factory=dict)
    loops: dict = field(default_factory=dict)
    connection: ConnectionSpec = None
    gauge: ExprMap = None
    text: str = ""

    def sorted_points(self):
        return {k: self.points[k] for k in sorted(self.points)}

    def build_connection(self, weyl=None):
        """FramedConnection for the ``[connection]`` block; ``weyl`` supplies the ``source = weyl`` case."""
        spec = self.connection
        if spec is None:
            raise DefinitionError("no [connection] section")
        if spec.source == "weyl":
            if weyl is None:
                raise DefinitionError("source = weyl needs a hypersurface", spec.line)
            coords = self.hypersurface.params
            return FramedConnection(coords, func=weyl.christoffel_many, vectorized=True,
                                    base_point=_base(spec, self), periods=spec.periods, name="weyl")
        if spec.source == "levi-civita":
            if self.ambient is None:
                raise DefinitionError("source = levi-civita needs an [ambient] section", spec.line)
            return FramedConnection.levi_civita(self.ambient, _base(spec, self), spec.periods)
        k = len(spec.coords)
        grid = [[["0"] * k for _ in range(k)] for _ in range(k)]
        for (c, a, b), src in spec.gamma.items():
            grid[c][a][b] = src
        frame = None
        if spec.frame:
            if len(spec.frame) != k:
                raise DefinitionError(f"frame needs all {k} fields", spec.line)
            frame = [spec.frame[a] for a in range(k)]
        try:
            return FramedConnection(spec.coords, coefficients=grid, frame=frame,
                                    base_point=_base(spec, self), periods=spec.periods, name="file")
        except ParseError as exc:
            raise DefinitionError(f"connection: {exc}", spec.line) from None


def _base(spec, d):
    if spec.base is not None:
        return spec.base
    for loop in d.loops.values():
        return loop.start()
    return None


def _split(value):
    return [p.strip() for p in value.split(";")]


def _number(src, line):
    try:
        v = parse(src, ())(())
    except ParseError as exc:
        raise DefinitionError(f"bad number {src!r}: {exc}", line) from None
    return float(v)


def _numbers(value, line):
    return np.array([_number(p, line) for p in _split(value)], dtype=float)


def _indices(text, count, line):
    try:
        idx = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise DefinitionError(f"bad index list [{text}]", line) from None
    if len(idx) != count:
        raise DefinitionError(f"expected {count} indices, got {len(idx)}", line)
    return idx


def _sections(text):
    lines = text.splitlines()
    first = next((i for i, ln in enumerate(lines) if ln.strip() and not ln.strip().startswith("#")), None)
    if first is None or lines[first].strip() != HEADER:
        raise DefinitionError(f"missing header {HEADER!r}", 1 if first is None else first + 1)
    sections = []
    current = None
    for no, raw in enumerate(lines[first + 1:], start=first + 2):
        ln = raw.split("#", 1)[0].strip()
        if not ln:
            continue
        m = _SECTION.match(ln)
        if m:
            current = (m.group(1), m.group(2), no, [])
            sections.append(current)
            continue
        if current is None:
            raise DefinitionError("entry outside a section", no)
        if "=" not in ln:
            raise DefinitionError(f"expected 'key = value', got {ln!r}", no)
        key, value = ln.split("=", 1)
        current[3].append((key.strip(), value.strip(), no))
    return sections


def loads(text, name="<string>"):
    d = Definition(name=name, text=text)
    amb = hyp = None
    conn = None
    seen = set()
    for kind, label, no, entries in _sections(text):
        if kind in ("ambient", "hypersurface", "points", "connection") and kind in seen:
            raise DefinitionError(f"duplicate [{kind}] section", no)
        seen.add(kind)
        if kind == "ambient":
            amb = (entries, no)
        elif kind == "hypersurface":
            hyp = (entries, no)
        elif kind == "points":
            for key, value, ln in entries:
                if not _NAME.match(key):
                    raise DefinitionError(f"bad point name {key!r}", ln)
                if key in d.points:
                    raise DefinitionError(f"duplicate point {key!r}", ln)
                d.points[key] = _numbers(value, ln)
        elif kind == "loop":
            if not label:
                raise DefinitionError("loop section needs a name: [loop <name>]", no)
            if label in d.loops:
                raise DefinitionError(f"duplicate loop {label!r}", no)
            d.loops[label] = _loop(label, entries, no)
        elif kind == "connection":
            conn = (entries, no)
        else:
            raise DefinitionError(f"unknown section [{kind}]", no)
    if amb is not None:
        d.ambient = _ambient(*amb)
    if hyp is not None:
        if d.ambient is None:
            raise DefinitionError("[hypersurface] needs an [ambient] section", hyp[1])
        d.hypersurface, d.gauge = _hypersurface(d.ambient, *hyp)
    if conn is not None:
        d.connection = _connection(d, *conn)
    _check_dims(d)
    return d


def load(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read(), name=str(path))


def _ambient(entries, no):
    coords = None
    metric = {}
    signature = None
    for key, value, ln in entries:
        m = _INDEXED.match(key)
        if key == "coords":
            coords = tuple(_split(value))
            if any(not _NAME.match(c) for c in coords) or len(set(coords)) != len(coords):
                raise DefinitionError("coords must be distinct identifiers", ln)
        elif m and m.group(1) == "metric":
            metric[_indices(m.group(2), 2, ln)] = (value, ln)
        elif key == "signature":
            signature = tuple(int(_number(p, ln)) for p in _split(value))
        else:
            raise DefinitionError(f"unknown ambient key {key!r}", ln)
    if coords is None:
        raise DefinitionError("[ambient] needs coords", no)
    n = len(coords)
    entries_ = {}
    for (i, j), (src, ln) in metric.items():
        if not (0 <= i < n and 0 <= j < n):
            raise DefinitionError(f"metric index ({i},{j}) out of range", ln)
        try:
            parse(src, coords)
        except ParseError as exc:
            raise DefinitionError(f"metric[{i},{j}]: {exc}", ln) from None
        entries_[(i, j)] = src
    return AmbientManifold.from_entries(coords, entries_, signature)


def _hypersurface(ambient, entries, no):
    params = immersion = None
    policy = "euclidean_complement"
    frame = None
    theta = None
    gauge = None
    domain = []
    where = {}
    for key, value, ln in entries:
        where[key] = ln
        if key == "params":
            params = tuple(_split(value))
        elif key == "immersion":
            immersion = _split(value)
        elif key == "screen":
            policy = value
            if policy not in SCREEN_POLICIES:
                raise DefinitionError(f"unknown screen policy {policy!r}", ln)
        elif key == "screen_frame":
            frame = [_split(v) for v in value.split("|")]
        elif key == "theta":
            theta = _split(value)
        elif key == "gauge":
            gauge = _split(value)
        elif key == "domain":
            domain = [(part, ln) for part in _split(value)]
        else:
            raise DefinitionError(f"unknown hypersurface key {key!r}", ln)
    if params is None or immersion is None:
        raise DefinitionError("[hypersurface] needs params and immersion", no)
    if len(immersion) != ambient.dim:
        raise DefinitionError(f"immersion has {len(immersion)} components, ambient has {ambient.dim}",
                              where["immersion"])
    if len(params) != ambient.dim - 1:
        raise DefinitionError(f"need {ambient.dim - 1} params", where["params"])
    theta_fn = None
    try:
        if theta is not None:
            tmap = ExprMap([parse(s, params) for s in theta])
            theta_fn = tmap
        gauge_fields = None
        if gauge is not None:
            if len(gauge) != len(params):
                raise DefinitionError("gauge needs one component per parameter", where["gauge"])
            gauge_fields = ExprMap([parse(s, params) for s in gauge])
        constraints = []
        for part, ln in domain:
            m = _DOMAIN.match(part)
            if not m or m.group(1) not in params:
                raise DefinitionError(f"bad domain constraint {part!r}; expected '<param> <op> <number>'", ln)
            constraints.append((params.index(m.group(1)), m.group(2), _number(m.group(3), ln)))
        h = HypersurfaceChart(ambient, params, immersion, policy, frame, theta_fn, domain=constraints)
    except ParseError as exc:
        raise DefinitionError(f"hypersurface: {exc}", no) from None
    except ValueError as exc:
        raise DefinitionError(str(exc), no) from None
    return h, gauge_fields


def _loop(name, entries, no):
    rng = None
    segs = []
    for key, value, ln in entries:
        if key == "t":
            r = _numbers(value, ln)
            if r.size != 2 or not r[1] > r[0]:
                raise DefinitionError("t needs 't0; t1' with t1 > t0", ln)
            rng = r
        elif key == "path":
            if rng is None:
                raise DefinitionError("path before its t range", ln)
            try:
                segs.append(Segment(_split(value), rng[0], rng[1]))
            except ParseError as exc:
                raise DefinitionError(f"loop {name}: {exc}", ln) from None
        else:
            raise DefinitionError(f"unknown loop key {key!r}", ln)
    if not segs:
        raise DefinitionError(f"loop {name!r} has no path", no)
    return Path(segs, name)


def _connection(d, entries, no):
    spec = ConnectionSpec("coefficients", line=no)
    periodic = []
    checks = []
    for key, value, ln in entries:
        m = _INDEXED.match(key)
        if key == "source":
            if value not in ("weyl", "levi-civita", "coefficients"):
                raise DefinitionError(f"unknown connection source {value!r}", ln)
            spec.source = value
        elif key == "coords":
            spec.coords = tuple(_split(value))
        elif m and m.group(1) == "gamma":
            spec.gamma[_indices(m.group(2), 3, ln)] = value
            checks.append((value, ln))
        elif m and m.group(1) == "frame":
            (a,) = _indices(m.group(2), 1, ln)
            spec.frame[a] = _split(value)
            checks.extend((v, ln) for v in spec.frame[a])
        elif key == "base":
            spec.base = _numbers(value, ln)
        elif key == "periodic":
            for part in _split(value):
                if ":" not in part:
                    raise DefinitionError("periodic entries are 'coord: period'", ln)
                c, p = part.split(":", 1)
                periodic.append((c.strip(), _number(p.strip(), ln), ln))
        else:
            raise DefinitionError(f"unknown connection key {key!r}", ln)
    if spec.source == "weyl":
        if d.hypersurface is None:
            raise DefinitionError("source = weyl needs a [hypersurface]", no)
        spec.coords = d.hypersurface.params
    elif spec.source == "levi-civita":
        if d.ambient is None:
            raise DefinitionError("source = levi-civita needs an [ambient]", no)
        spec.coords = d.ambient.coords
    elif not spec.coords:
        raise DefinitionError("[connection] needs coords", no)
    k = len(spec.coords)
    for src, ln in checks:
        try:
            parse(src, spec.coords)
        except ParseError as exc:
            raise DefinitionError(f"connection: {exc}", ln) from None
    for (c, a, b) in spec.gamma:
        if max(c, a, b) >= k:
            raise DefinitionError(f"gamma index ({c},{a},{b}) out of range", no)
    for a, comps in spec.frame.items():
        if a >= k or len(comps) != k:
            raise DefinitionError(f"frame[{a}] needs {k} components", no)
    for c, p, ln in periodic:
        if c not in spec.coords:
            raise DefinitionError(f"periodic coordinate {c!r} unknown", ln)
        spec.periods[spec.coords.index(c)] = p
    if spec.base is not None and spec.base.size != k:
        raise DefinitionError(f"base needs {k} components", no)
    return spec


def _check_dims(d):
    if d.hypersurface is not None:
        k = len(d.hypersurface.params)
    elif d.connection is not None:
        k = len(d.connection.coords)
    else:
        k = None
    if k is not None:
        for name, p in d.points.items():
            if p.size != k:
                raise DefinitionError(f"point {name!r} has {p.size} components, expected {k}")
    if d.connection is not None:
        kc = len(d.connection.coords)
        for name, loop in d.loops.items():
            for seg in loop.segments:
                if len(seg.fields) != kc:
                    raise DefinitionError(f"loop {name!r} has {len(seg.fields)} components, connection has {kc}")
