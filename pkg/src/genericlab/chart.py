"""Coordinate charts carrying a metric given by formulas.

Chart file format (one statement per line, ``#`` starts a comment)::

    name        schwarzschild4
    dimension   4
    coordinates t r th ph
    parameter   m = 1
    g[0][0] = -(1 - 2*m/r)
    g[1][1] = 1/(1 - 2*m/r)
    g[2][2] = r^2
    g[3][3] = r^2 * sin(th)^2
    region  r > 2*m
    box     r 3 10
    note    free text

Only the lower triangle ``g[i][j]`` with ``i >= j`` may be given; missing
components are zero.  ``region`` lines are strict inequalities (``>`` or
``<``) between two formulas.  ``box`` sets the sampling interval of one
coordinate (default ``[-1, 1]``).  ``dimension`` and ``coordinates`` must come
before any formula.
"""
import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ParseError, RegionError
from .expr import Expression, compile_expressions, evaluate_many, parse, share_subexpressions
from .tensor import is_lorentzian

__all__ = ["Chart", "load_chart", "loads_chart", "dumps_chart"]


@dataclass(frozen=True, eq=False)
class Chart:
    """A chart of a Lorentzian manifold.

    ``metric`` maps ``(i, j)`` with ``i >= j`` to an :class:`Expression`;
    ``region`` lists expressions that must be strictly positive; ``box`` is the
    default sampling box, shape ``(n, 2)``.
    """

    name: str
    coords: tuple
    metric: dict
    region: tuple = ()
    box: np.ndarray = None
    parameters: dict = field(default_factory=dict)
    note: str = ""
    source: str = None

    def __post_init__(self):
        n = len(self.coords)
        box = np.tile([-1.0, 1.0], (n, 1)) if self.box is None else np.array(self.box, dtype=float)
        if box.shape != (n, 2) or np.any(box[:, 0] >= box[:, 1]):
            raise ValueError(f"box must be {n} increasing intervals")
        box.setflags(write=False)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "coords", tuple(self.coords))
        object.__setattr__(self, "region", tuple(self.region))
        for (i, j) in self.metric:
            if not (0 <= j <= i < n):
                raise ValueError(f"metric component ({i}, {j}) is not in the lower triangle")

    @property
    def n(self):
        return len(self.coords)

    @cached_property
    def _components(self):
        zero = parse("0", self.coords)
        comps = {(i, j): self.metric.get((i, j), zero) for i in range(self.n) for j in range(i + 1)}
        roots = share_subexpressions([e.root for e in comps.values()])
        return {key: Expression(root, self.coords, e.text) for (key, e), root in zip(comps.items(), roots)}

    @cached_property
    def _compiled_float(self):
        return compile_expressions(self._components.values(), "float")

    @cached_property
    def _compiled_dual(self):
        return compile_expressions(self._components.values(), "dual")

    @cached_property
    def _slot_index(self):
        # (n, n) table of positions in the lower-triangle component list
        idx = np.zeros((self.n, self.n), dtype=int)
        for pos, (i, j) in enumerate(self._components):
            idx[i, j] = idx[j, i] = pos
        return idx

    def components(self):
        """All lower-triangle components as Expressions (zero where absent)."""
        return dict(self._components)

    def _assemble(self, values, trailing=()):
        keys = list(self._components)
        first = values[0]
        out = np.zeros(first.shape[: first.ndim - len(trailing)] + (self.n, self.n) + trailing)
        for (i, j), v in zip(keys, values):
            rest = (slice(None),) * len(trailing)
            out[(Ellipsis, i, j) + rest] = v
            out[(Ellipsis, j, i) + rest] = v
        return out

    def metric_at(self, x):
        """Metric matrices at point(s) ``x`` of shape ``(..., n)``."""
        V, _ = self._compiled_float.stacked(x)
        return np.moveaxis(V[self._slot_index], (0, 1), (-2, -1))

    def metric_and_gradient(self, x):
        """``(g, dg)`` with ``dg[..., a, b, c] = d_c g_ab`` (first-order forward mode)."""
        V, G = self._compiled_dual.stacked(x)
        g = np.moveaxis(V[self._slot_index], (0, 1), (-2, -1))
        dg = np.moveaxis(G[self._slot_index], (0, 1, 2), (-3, -2, -1))
        return g, dg

    def metric_coefficients(self, x, k):
        """Taylor coefficient arrays, shape ``(..., n, n, C(n+k, k))``."""
        values = evaluate_many(self._components.values(), x, mode="jet", k=k)
        return self._assemble(values, trailing=(values[0].shape[-1],))

    def in_region(self, x):
        """Boolean (array) telling whether ``x`` satisfies every region inequality."""
        x = np.asarray(x, dtype=float)
        ok = np.ones(x.shape[:-1], dtype=bool)
        if self.region:
            for v in evaluate_many(self.region, x, mode="float"):
                ok &= v > 0
        return ok if x.ndim > 1 else bool(ok)

    def require_region(self, x):
        if not np.all(self.in_region(x)):
            raise RegionError(f"point {np.asarray(x).tolist()} is outside the region of chart '{self.name}'")

    def in_box(self, x):
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.box[:, 0]) & (x <= self.box[:, 1]), axis=-1)

    def grid(self, per_axis=5):
        axes = [np.linspace(lo, hi, per_axis) for lo, hi in self.box]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def signature_grid_check(self, per_axis=5, points=None):
        """True when the metric is Lorentzian at every in-region grid point of the box."""
        pts = self.grid(per_axis) if points is None else np.asarray(points, dtype=float)
        pts = pts[self.in_region(pts)]
        if len(pts) == 0:
            return False
        return bool(np.all(is_lorentzian(self.metric_at(pts))))

    def with_metric(self, name, metric, region=None, note=""):
        return Chart(
            name=name,
            coords=self.coords,
            metric=metric,
            region=self.region if region is None else region,
            box=self.box,
            parameters=self.parameters,
            note=note,
        )


_COMPONENT = re.compile(r"g\s*\[\s*(\d+)\s*\]\s*\[\s*(\d+)\s*\]\s*=")


def _formula(text, line_no, column, coords, params):
    try:
        return parse(text, coords, params)
    except ParseError as exc:
        raise exc.located(line_no, column) from None


def loads_chart(text, name=None):
    """Parse a chart from the text format described in the module docstring."""
    n = None
    coords = None
    params = {}
    metric = {}
    region = []
    box_rows = {}
    note = []
    chart_name = name

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        stripped = line.lstrip()
        if not stripped:
            continue
        indent = len(line) - len(stripped)

        def fail(msg, col=None):
            raise ParseError(msg, line=line_no, column=(indent + 1 if col is None else col), text=raw)

        m = _COMPONENT.match(stripped)
        if m:
            if coords is None:
                fail("metric component before 'coordinates'")
            i, j = int(m.group(1)), int(m.group(2))
            if i >= n or j >= n:
                fail(f"component index out of range for dimension {n}")
            if i < j:
                fail(f"give the lower triangle: write g[{j}][{i}] instead of g[{i}][{j}]")
            if (i, j) in metric:
                fail(f"component g[{i}][{j}] given twice")
            start = indent + m.end()
            metric[(i, j)] = _formula(line[start:], line_no, start, coords, params)
            continue

        keyword, _, rest = stripped.partition(" ")
        rest_col = indent + len(keyword) + 1 + (len(rest) - len(rest.lstrip()))
        rest = rest.strip()
        if keyword == "name":
            chart_name = chart_name or rest
        elif keyword == "dimension":
            if n is not None:
                fail("dimension declared twice")
            try:
                n = int(rest)
            except ValueError:
                fail(f"dimension must be an integer, got {rest!r}", rest_col + 1)
            if n < 2:
                fail("dimension must be at least 2", rest_col + 1)
        elif keyword == "coordinates":
            if n is None:
                fail("'dimension' must precede 'coordinates'")
            names = rest.split()
            if len(names) != n:
                fail(f"expected {n} coordinate names, got {len(names)}", rest_col + 1)
            for nm in names:
                if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", nm):
                    fail(f"invalid coordinate name {nm!r}", rest_col + 1)
            coords = tuple(names)
        elif keyword == "parameter":
            pname, eq, value = rest.partition("=")
            pname = pname.strip()
            if not eq or not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", pname):
                fail("expected 'parameter NAME = VALUE'", rest_col + 1)
            expr = _formula(value, line_no, rest_col + len(rest) - len(value), (), params)
            params[pname] = expr.evaluate(np.zeros(0))
        elif keyword == "region":
            if coords is None:
                fail("'region' before 'coordinates'")
            for op in (">", "<"):
                if op in rest:
                    lhs, rhs = rest.split(op, 1)
                    break
            else:
                fail("region must be an inequality using '>' or '<'", rest_col + 1)
            a = _formula(lhs, line_no, rest_col, coords, params)
            b = _formula(rhs, line_no, rest_col + len(lhs) + 1, coords, params)
            region.append(Expression(a.root - b.root if op == ">" else b.root - a.root, coords, rest))
        elif keyword == "box":
            if coords is None:
                fail("'box' before 'coordinates'")
            parts = rest.split()
            if len(parts) != 3 or parts[0] not in coords:
                fail("expected 'box COORD LOW HIGH'", rest_col + 1)
            try:
                lo, hi = float(parts[1]), float(parts[2])
            except ValueError:
                fail("box bounds must be numbers", rest_col + 1)
            if not lo < hi:
                fail("box requires LOW < HIGH", rest_col + 1)
            box_rows[coords.index(parts[0])] = (lo, hi)
        elif keyword == "note":
            note.append(rest)
        else:
            fail(f"unknown statement {keyword!r}")

    if coords is None:
        raise ParseError("chart declares no coordinates", line=1, column=1)
    box = np.tile([-1.0, 1.0], (n, 1))
    for i, row in box_rows.items():
        box[i] = row
    return Chart(
        name=chart_name or "chart",
        coords=coords,
        metric=metric,
        region=tuple(region),
        box=box,
        parameters=params,
        note=" ".join(note),
        source=text,
    )


def load_chart(path):
    with open(path, encoding="utf-8") as fh:
        return loads_chart(fh.read())


def dumps_chart(chart):
    """Serialize a chart back into the text format."""
    if chart.source is not None:
        return chart.source
    lines = [f"name {chart.name}", f"dimension {chart.n}", "coordinates " + " ".join(chart.coords)]
    for pname, value in chart.parameters.items():
        lines.append(f"parameter {pname} = {float(value)!r}")
    for (i, j), e in sorted(chart.metric.items()):
        lines.append(f"g[{i}][{j}] = {e.root}")
    for e in chart.region:
        lines.append(f"region {e.root} > 0")
    for c, (lo, hi) in zip(chart.coords, chart.box):
        if (lo, hi) != (-1.0, 1.0):
            lines.append(f"box {c} {float(lo)!r} {float(hi)!r}")
    if chart.note:
        lines.append(f"note {chart.note}")
    return "\n".join(lines) + "\n"
