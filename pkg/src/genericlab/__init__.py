"""Numerical lab for the generic condition of Lorentzian metrics."""
from .chart import Chart, dumps_chart, load_chart, loads_chart
from .errors import (
    DomainError,
    GenericLabError,
    JetOrderError,
    ParseError,
    RegionError,
    SignatureError,
    SymmetryError,
    UnknownIdentifierError,
)
from .expr import Expression, evaluate, evaluate_jet, parse
from .geometry import (
    MetricJet,
    TangentVector,
    alpha_r,
    christoffel_jet,
    geodesic_flow,
    metric_jet,
    riemann_from_jet,
)
from .genericity import (
    GenericityVerdict,
    ScanReport,
    beem_harris_test,
    generic_quantity,
    is_generic,
    is_r_nongeneric,
    scan_geodesic,
)
from .taylor import TaylorJet

__version__ = "0.1.0"

__all__ = [
    "Chart",
    "DomainError",
    "Expression",
    "GenericLabError",
    "GenericityVerdict",
    "JetOrderError",
    "MetricJet",
    "ParseError",
    "RegionError",
    "ScanReport",
    "SignatureError",
    "SymmetryError",
    "TangentVector",
    "TaylorJet",
    "UnknownIdentifierError",
    "alpha_r",
    "beem_harris_test",
    "christoffel_jet",
    "dumps_chart",
    "evaluate",
    "evaluate_jet",
    "generic_quantity",
    "geodesic_flow",
    "is_generic",
    "is_r_nongeneric",
    "load_chart",
    "loads_chart",
    "metric_jet",
    "parse",
    "riemann_from_jet",
    "scan_geodesic",
]
