from .gfield import Basis, FieldCtx, LinearizedPoly, make_field_ctx
from .goodpair import (
    GoodPair,
    InfeasibleParams,
    NotWeaklyGood,
    SchemeParams,
    feasible,
    is_good,
    is_weakly_good,
    search_good_pair,
)
from .repair import RepairScheme, SchemeError, execute_repair, scheme_from_pair, verify_gw
from .rscode import RsCode, encode
from .subspace import GuardExceeded, Subspace, span

__all__ = [
    "Basis",
    "FieldCtx",
    "GoodPair",
    "GuardExceeded",
    "InfeasibleParams",
    "LinearizedPoly",
    "NotWeaklyGood",
    "RepairScheme",
    "RsCode",
    "SchemeError",
    "SchemeParams",
    "Subspace",
    "encode",
    "execute_repair",
    "feasible",
    "is_good",
    "is_weakly_good",
    "make_field_ctx",
    "scheme_from_pair",
    "search_good_pair",
    "span",
    "verify_gw",
]
