"""Exact and numeric computations for degenerate Poisson structures on coordinate charts."""
__version__ = "0.1.0"

from .symexpr import Expr, ParseError, parse
from .exterior import KForm, KVector, parse_kform, parse_kvector, schouten
from .poisson import PoissonStructure

__all__ = [
    "Expr",
    "ParseError",
    "parse",
    "KForm",
    "KVector",
    "parse_kform",
    "parse_kvector",
    "schouten",
    "PoissonStructure",
    "__version__",
]
