"""Chart catalog and Monte Carlo harness.

Degenerate metrics (flat, constant curvature, plane waves) carry nongeneric
vectors; small random polynomial perturbations remove them.  All randomness
goes through ``numpy.random.Generator(PCG64(seed))`` so reports are
bit-reproducible for a given seed.
"""
import csv
import io
import json
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from .chart import Chart, loads_chart
from .errors import RegionError, SignatureError
from .expr import Const, Expression, Var, make_add, make_mul, make_sub
from .genericity import DEFAULT_TOL, magnitudes, scan_geodesics
from .geometry import MetricJet, curvature_derivatives
from .taylor import multi_indices
from .tensor import is_lorentzian

__all__ = [
    "CATALOG_NAMES",
    "catalog",
    "catalog_chart",
    "make_rng",
    "PerturbationSpec",
    "perturb_metric",
    "sample_points",
    "lorentz_frame",
    "random_metric",
    "sample_vectors",
    "CensusReport",
    "genericity_census",
    "random_geodesic_scans",
]

CATALOG_NAMES = (
    "minkowski3",
    "minkowski4",
    "minkowski5",
    "desitter4",
    "schwarzschild4",
    "flrw4",
    "ppwave4",
)
CLASSES = ("timelike", "null", "spacelike")
SCHEMA_VERSION = "1.0"


@lru_cache(maxsize=None)
def catalog_chart(name):
    """Built-in chart by id (see :data:`CATALOG_NAMES`)."""
    if name not in CATALOG_NAMES:
        raise KeyError(f"unknown catalog chart {name!r}; choose from {', '.join(CATALOG_NAMES)}")
    text = resources.files("genericlab").joinpath("charts").joinpath(f"{name}.chart").read_text(encoding="utf-8")
    return loads_chart(text)


def catalog():
    """All built-in charts in a fixed order."""
    return [catalog_chart(name) for name in CATALOG_NAMES]


def make_rng(seed):
    """The generator used everywhere: PCG64 with an explicit 64-bit seed."""
    return np.random.Generator(np.random.PCG64(int(seed)))


# ---------------------------------------------------------------------------
# perturbations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PerturbationSpec:
    """Random polynomial perturbation ``g + eps * h`` with ``deg h <= degree``."""

    seed: int
    amplitude: float
    degree: int = 3
    box: tuple = None
    grid_per_axis: int = 5

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if not self.amplitude >= 0:
            raise ValueError("amplitude must be non-negative")
        if self.degree < 0:
            raise ValueError("degree must be non-negative")

    @classmethod
    def parse(cls, text):
        """Parse ``EPS:DEG:SEED``."""
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"expected EPS:DEG:SEED, got {text!r}")
        return cls(seed=int(parts[2]), amplitude=float(parts[0]), degree=int(parts[1]))

    def to_dict(self):
        out = asdict(self)
        out["box"] = None if self.box is None else [list(map(float, row)) for row in self.box]
        return out


def _monomials(variables, degree):
    # shared DAG: every monomial is a lower one times a single variable
    alphas = [tuple(a) for a in multi_indices(len(variables), degree)]
    nodes = {alphas[0]: Const(1.0)}
    for alpha in alphas[1:]:
        i = next(j for j, a in enumerate(alpha) if a)
        lower = alpha[:i] + (alpha[i] - 1,) + alpha[i + 1 :]
        nodes[alpha] = make_mul(nodes[lower], variables[i])
    return [nodes[a] for a in alphas]


def perturb_metric(chart, spec):
    """Add ``eps * h_ab`` with polynomial ``h`` to every metric component.

    Coefficients are uniform in ``[-1, 1]``, drawn per component (lower
    triangle, row-major) and per monomial (graded order).  The sampling box
    becomes part of the region, and the signature is re-checked on a grid of
    the box; a failure raises :class:`SignatureError`.
    """
    if spec.amplitude == 0:
        return chart
    box = chart.box if spec.box is None else np.asarray(spec.box, dtype=float)
    rng = make_rng(spec.seed)
    variables = [Var(i, c) for i, c in enumerate(chart.coords)]
    monos = _monomials(variables, spec.degree)
    metric = {}
    for (i, j), base in chart.components().items():
        coeffs = rng.uniform(-1.0, 1.0, size=len(monos))
        h = Const(0.0)
        for c, m in zip(coeffs, monos):
            h = make_add(h, make_mul(Const(float(c)), m))
        root = make_add(base.root, make_mul(Const(float(spec.amplitude)), h))
        metric[(i, j)] = Expression(root, chart.coords)
    region = list(chart.region)
    for i, (lo, hi) in enumerate(box):
        region.append(Expression(make_sub(variables[i], Const(float(lo))), chart.coords))
        region.append(Expression(make_sub(Const(float(hi)), variables[i]), chart.coords))
    out = Chart(
        name=f"{chart.name}+eps{spec.amplitude:g}:deg{spec.degree}:seed{spec.seed}",
        coords=chart.coords,
        metric=metric,
        region=tuple(region),
        box=box,
        parameters=chart.parameters,
        note=f"{chart.name} perturbed by a random degree-{spec.degree} polynomial, amplitude {spec.amplitude:g}",
    )
    pts = out.grid(spec.grid_per_axis)
    pts = pts[chart.in_region(pts)] if chart.region else pts
    if len(pts) == 0 or not np.all(is_lorentzian(out.metric_at(pts))):
        raise SignatureError(
            f"perturbation of amplitude {spec.amplitude:g} destroys the Lorentzian signature "
            f"on the box of '{chart.name}'; use a smaller amplitude"
        )
    return out


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def sample_points(chart, count, rng, box=None, max_rounds=1000):
    """``count`` points uniform in ``box`` (default: the chart box) within the region."""
    box = chart.box if box is None else np.asarray(box, dtype=float)
    lo, hi = box[:, 0], box[:, 1]
    found = []
    total = 0
    for _ in range(max_rounds):
        x = rng.uniform(lo, hi, size=(count, chart.n))
        x = x[np.atleast_1d(chart.in_region(x))]
        found.append(x)
        total += len(x)
        if total >= count:
            return np.concatenate(found)[:count]
    raise RegionError(f"could not sample {count} points of chart '{chart.name}' inside its region")


def lorentz_frame(g):
    """``(e0, E)``: unit timelike vector and orthonormal spacelike columns, batched."""
    lam, V = np.linalg.eigh(g)
    e0 = V[..., :, 0] / np.sqrt(-lam[..., None, 0])
    E = V[..., :, 1:] / np.sqrt(lam[..., None, 1:])
    return e0, E


def random_metric(n, rng, size=(), max_cond=1e3):
    """Random Lorentzian matrices ``A^T diag(-1, 1, ..) A`` with ``A = I + N(0, 1/4)``.

    Draws whose condition number exceeds ``max_cond`` are redrawn: near-singular
    metrics make every relative threshold meaningless.
    """
    size = tuple(np.atleast_1d(size)) if size != () else ()
    eta = np.diag([-1.0] + [1.0] * (n - 1))
    g = np.empty(size + (n, n))
    flat = g.reshape(-1, n, n)
    for i in range(len(flat)):
        while True:
            A = np.eye(n) + 0.5 * rng.standard_normal((n, n))
            cand = A.T @ eta @ A
            if np.linalg.cond(cand) <= max_cond:
                break
        flat[i] = cand
    return g


def _q(g, a, b):
    return np.einsum("...ab,...a,...b->...", g, a, b)


def sample_vectors(g, rng):
    """One timelike, one exactly-null and one spacelike vector per metric.

    Returns shape ``(..., 3, n)`` in the order of :data:`CLASSES`; vectors are
    scaled to unit max-norm.  The null vector solves ``g(e0 + s w, e0 + s w) = 0``
    for the spatial direction ``w``.
    """
    g = np.asarray(g, dtype=float)
    batch, n = g.shape[:-2], g.shape[-1]
    e0, E = lorentz_frame(g)
    u = rng.standard_normal(batch + (3, n - 1))
    u /= np.linalg.norm(u, axis=-1, keepdims=True)
    b = rng.uniform(0.0, 0.9, size=batch + (2,))
    w = np.einsum("...ai,...ki->...ka", E, u)
    timelike = e0 + b[..., 0, None] * w[..., 0, :]
    spacelike = b[..., 1, None] * e0 + w[..., 2, :]
    wn = w[..., 1, :]
    qa, qb, qc = _q(g, wn, wn), _q(g, e0, wn), _q(g, e0, e0)
    disc = np.sqrt(np.maximum(qb * qb - qa * qc, 0.0))
    # root near 1 of qa s^2 + 2 qb s + qc = 0, in the cancellation-free form
    s = np.where(qb <= 0, (disc - qb) / qa, -qc / (qb + disc))
    null = e0 + s[..., None] * wn
    X = np.stack([timelike, null, spacelike], axis=-2)
    return X / np.max(np.abs(X), axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# census
# ---------------------------------------------------------------------------


@dataclass
class CensusReport:
    """Counts of generic and r-nongeneric samples per causal class."""

    chart: str
    n: int
    n_samples: int
    r: int
    tol: float
    seed: int
    counts: dict
    generic: dict
    r_nongeneric: dict
    max_null_residual: float
    perturbation: dict = None
    samples: list = field(default=None, repr=False)

    @property
    def total(self):
        return sum(self.counts.values())

    @property
    def generic_fraction(self):
        return sum(self.generic.values()) / self.total if self.total else 0.0

    @property
    def r_nongeneric_count(self):
        return sum(self.r_nongeneric.values())

    def fraction(self, kind, cls):
        table = getattr(self, kind)
        return table[cls] / self.counts[cls] if self.counts[cls] else 0.0

    def to_dict(self, include_samples=False):
        out = {
            "schema_version": SCHEMA_VERSION,
            "chart": self.chart,
            "n": self.n,
            "n_samples": self.n_samples,
            "r": self.r,
            "tol": float(self.tol),
            "seed": int(self.seed),
            "rng": "PCG64",
            "counts": dict(self.counts),
            "generic": dict(self.generic),
            "r_nongeneric": dict(self.r_nongeneric),
            "generic_fraction": float(self.generic_fraction),
            "r_nongeneric_count": int(self.r_nongeneric_count),
            "max_null_residual": float(self.max_null_residual),
            "perturbation": self.perturbation,
        }
        if include_samples and self.samples is not None:
            out["samples"] = self.samples
        return out

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(**kwargs), indent=2, sort_keys=True)

    def write_csv(self, target=None):
        """Per-sample rows; returns the text when ``target`` is None."""
        if self.samples is None:
            raise ValueError("census was run without keep_samples=True")
        buf = io.StringIO() if target is None else target
        fields = ["index", "causal_class"]
        fields += [f"x{i}" for i in range(self.n)] + [f"X{i}" for i in range(self.n)]
        fields += [f"m{k}" for k in range(self.r + 1)] + ["generic", "r_nongeneric"]
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(fields)
        for row in self.samples:
            writer.writerow(
                [row["index"], row["causal_class"]]
                + [repr(v) for v in row["point"]]
                + [repr(v) for v in row["vector"]]
                + [repr(v) for v in row["magnitudes"]]
                + [int(row["generic"]), int(row["r_nongeneric"])]
            )
        return buf.getvalue() if target is None else None


def genericity_census(
    chart,
    n_samples,
    r=1,
    seed=0,
    tol=DEFAULT_TOL,
    box=None,
    keep_samples=False,
    perturbation=None,
    chunk=128,
):
    """Sample points and one vector per causal class; test each for r-nongenericity.

    Points are drawn first (all of them), then vectors, so the report depends
    only on ``(chart, n_samples, r, seed, box)``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if r < 0:
        raise ValueError("r must be non-negative")
    rng = make_rng(seed)
    points = sample_points(chart, n_samples, rng, box)
    g_all = chart.metric_at(points)
    vectors = sample_vectors(g_all, rng)
    mags = np.zeros((n_samples, 3, r + 1))
    for s in range(0, n_samples, chunk):
        x = points[s : s + chunk]
        mj = MetricJet(x, r + 2, chart.metric_coefficients(x, r + 2))
        derivs = curvature_derivatives(mj, r + 1)
        mags[s : s + chunk] = magnitudes(vectors[s : s + chunk], mj.value, derivs)
    gen = mags[..., 0] > tol
    nongen = np.all(mags <= tol, axis=-1)
    null = vectors[:, 1]
    resid = np.abs(_q(g_all, null, null)) / (
        np.max(np.abs(g_all), axis=(-2, -1)) * np.max(np.abs(null), axis=-1) ** 2
    )
    report = CensusReport(
        chart=chart.name,
        n=chart.n,
        n_samples=int(n_samples),
        r=int(r),
        tol=float(tol),
        seed=int(seed),
        counts={c: int(n_samples) for c in CLASSES},
        generic={c: int(np.sum(gen[:, k])) for k, c in enumerate(CLASSES)},
        r_nongeneric={c: int(np.sum(nongen[:, k])) for k, c in enumerate(CLASSES)},
        max_null_residual=float(np.max(resid)),
        perturbation=None if perturbation is None else perturbation.to_dict(),
    )
    if keep_samples:
        rows = []
        for i in range(n_samples):
            for k, c in enumerate(CLASSES):
                rows.append(
                    {
                        "index": i,
                        "causal_class": c,
                        "point": points[i].tolist(),
                        "vector": vectors[i, k].tolist(),
                        "magnitudes": mags[i, k].tolist(),
                        "generic": bool(gen[i, k]),
                        "r_nongeneric": bool(nongen[i, k]),
                    }
                )
        report.samples = rows
    return report


def random_geodesic_scans(chart, count, seed, t_span=(0.0, 0.5), step=1e-3, r=1, tol=DEFAULT_TOL, shrink=0.3):
    """Scan ``count`` timelike geodesics started in the central part of the box.

    Start points are uniform in the box shrunk about its centre by ``shrink``.
    """
    rng = make_rng(seed)
    centre = chart.box.mean(axis=1)
    half = 0.5 * (chart.box[:, 1] - chart.box[:, 0]) * shrink
    box = np.stack([centre - half, centre + half], axis=1)
    points = sample_points(chart, count, rng, box)
    X = sample_vectors(chart.metric_at(points), rng)[:, 0]
    return scan_geodesics(chart, points, X, t_span, step, r=r, tol=tol)

