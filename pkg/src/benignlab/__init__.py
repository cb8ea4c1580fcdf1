"""Numerical laboratory for benign overfitting in minimum-norm linear regression."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BenignLabError,
    BracketTooWide,
    ConfigError,
    GramSingular,
    NumericalError,
    SizeCapExceeded,
)
from .ranks import INF, effective_rank_R, effective_rank_r, k_star, rank_profile  # noqa: E402
from .spectrum import (  # noqa: E402
    Constant,
    ExpPlusIso,
    Exponent,
    FamilySpec,
    Geometric,
    PolyLog,
    TruncatedPoly,
    make_explicit,
    spectrum_from_ranks,
    tail_sum,
    truncate,
)

__all__ = [
    "BenignLabError", "BracketTooWide", "ConfigError", "GramSingular", "NumericalError",
    "SizeCapExceeded", "INF", "effective_rank_R", "effective_rank_r", "k_star",
    "rank_profile", "Constant", "ExpPlusIso", "Exponent", "FamilySpec", "Geometric",
    "PolyLog", "TruncatedPoly", "make_explicit", "spectrum_from_ranks", "tail_sum",
    "truncate",
]
