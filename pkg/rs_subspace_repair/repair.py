"""Linear repair schemes: construction, verification and execution."""

import math
import threading
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Dict, Optional, Sequence, Union

import galois
import numpy as np

from .debug import DEBUG
from .gfield import Basis, FieldCtx, LinearizedPoly, inv, relative_dual_basis, relative_trace, rref, solve
from .goodpair import GoodPair, NotWeaklyGood, annihilator_poly, build_M, is_weakly_good, powers_of_alpha
from .rscode import Codeword, RsCode, dual_check, erasure_decode, dual_scaling
from .subspace import Subspace, span, subfield
from .util import bits_for, log

SCHEME_SCHEMA = 1


class SchemeError(ValueError):
    """A scheme does not fit its code or node."""


class NodeScheme:
    """Repair of one failed node: m dual codewords, helper query bases and coefficients.

    Row j of `x` is the dual codeword x_j. Helper u sends tr(gamma[u][t] c_u) for
    each t, and x[j, u] = sum_t lam[u][j, t] gamma[u][t].
    """

    def __init__(
        self,
        ctx: FieldCtx,
        failed: int,
        x: galois.FieldArray,
        gammas: Dict[int, galois.FieldArray],
        lams: Dict[int, galois.FieldArray],
    ):
        self.ctx = ctx
        self.failed = failed
        self.x = x
        self.gammas = gammas
        self.lams = lams

    @classmethod
    def from_dual_codewords(cls, ctx: FieldCtx, x: galois.FieldArray, failed: int) -> "NodeScheme":
        x = ctx.elements(x)
        if x.ndim != 2 or x.shape[0] != ctx.m:
            raise SchemeError(f"a node scheme needs {ctx.m} dual codewords")
        n = x.shape[1]
        if not 0 <= failed < n:
            raise SchemeError(f"failed node {failed} out of range")
        coords = ctx.coords(x)
        gammas, lams = {}, {}
        for u in range(n):
            if u == failed:
                continue
            block = coords[:, u, :]
            reduced, pivots = rref(block)
            gammas[u] = ctx.from_coords(reduced[: len(pivots)])
            lams[u] = block[:, pivots]
        return cls(ctx, failed, x, gammas, lams)

    @property
    def n(self) -> int:
        return int(self.x.shape[1])

    @property
    def helpers(self) -> list[int]:
        return [u for u in range(self.n) if u != self.failed]

    def helper_rank(self, u: int) -> int:
        return int(self.gammas[u].size)

    @property
    def max_helper_rank(self) -> int:
        return max((self.helper_rank(u) for u in self.helpers), default=0)

    @cached_property
    def recon(self) -> galois.FieldArray:
        """Trace-dual of {x_{j,i}}: c_i = sum_j tr(x_{j,i} c_i) recon_j."""
        try:
            return Basis(self.ctx, self.x[:, self.failed]).dual.elems
        except ValueError as exc:
            raise SchemeError(f"node {self.failed}: failed-node column is not a basis") from exc

    def padded(self, r: int) -> tuple[galois.FieldArray, galois.FieldArray]:
        """Query elements (n, r) and coefficients (n, m, r), zero on the failed row and in padding."""
        ctx = self.ctx
        gamma = ctx.ext.Zeros((self.n, r))
        lam = ctx.base.Zeros((self.n, ctx.m, r))
        for u in self.helpers:
            width = self.helper_rank(u)
            if width > r:
                raise SchemeError(f"node {self.failed}: helper {u} needs {width} symbols, budget is {r}")
            gamma[u, :width] = self.gammas[u]
            lam[u, :, :width] = self.lams[u]
        return gamma, lam

    def to_dict(self) -> dict:
        ctx = self.ctx
        return {
            "node": self.failed,
            "x": ctx.to_json(self.x),
            "helpers": [
                {"node": u, "gamma": ctx.to_json(self.gammas[u]), "lam": ctx.base_to_json(self.lams[u])}
                for u in self.helpers
            ],
        }

    @classmethod
    def from_dict(cls, ctx: FieldCtx, data: dict) -> "NodeScheme":
        try:
            failed = int(data["node"])
            x = ctx.from_json(data["x"])
            gammas, lams = {}, {}
            for entry in data["helpers"]:
                u = int(entry["node"])
                gammas[u] = ctx.from_json(entry["gamma"]).reshape(-1)
                if gammas[u].size == 0:
                    lams[u] = ctx.base.Zeros((ctx.m, 0))
                else:
                    lams[u] = ctx.base_from_json(entry["lam"]).reshape(ctx.m, gammas[u].size)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemeError(f"malformed node scheme: {exc}") from exc
        if x.ndim != 2 or x.shape[0] != ctx.m:
            raise SchemeError(f"node {failed}: expected {ctx.m} dual codewords")
        if sorted(gammas) != [u for u in range(x.shape[1]) if u != failed]:
            raise SchemeError(f"node {failed}: helper list does not match the code length")
        return cls(ctx, failed, x, gammas, lams)


class RepairScheme:
    """Per-node repair schemes of one code with a common helper budget r.

    Node schemes come either from `builder` (node index -> m x n dual codewords),
    built on first use, or from an explicit `nodes` mapping.
    """

    def __init__(
        self,
        code: RsCode,
        r: int,
        construction: str,
        builder: Optional[Callable[[int], galois.FieldArray]] = None,
        nodes: Optional[Dict[int, NodeScheme]] = None,
        polys: Optional[list[LinearizedPoly]] = None,
    ):
        if builder is None and nodes is None:
            raise SchemeError("a scheme needs a builder or explicit node schemes")
        if not 0 <= r <= code.ctx.m:
            raise SchemeError(f"budget r must lie in [0, {code.ctx.m}], got {r}")
        self.code = code
        self.r = r
        self.construction = construction
        self.polys = polys
        self._builder = builder
        self._nodes: Dict[int, NodeScheme] = dict(nodes or {})
        self._lock = threading.Lock()

    def __repr__(self) -> str:
        return f"RepairScheme({self.construction}, n={self.code.n}, k={self.code.k}, r={self.r})"

    @property
    def ctx(self) -> FieldCtx:
        return self.code.ctx

    @property
    def nodes(self) -> list[int]:
        if self._builder is not None:
            return list(range(self.code.n))
        return sorted(self._nodes)

    def dual_codewords(self, i: int) -> galois.FieldArray:
        return self.node(i).x

    def node(self, i: int) -> NodeScheme:
        # check cache first
        ns = self._nodes.get(i)
        if ns is not None:
            return ns
        if self._builder is None or not 0 <= i < self.code.n:
            raise SchemeError(f"scheme has no entry for node {i}")
        with self._lock:
            # double-check cache
            ns = self._nodes.get(i)
            if ns is None:
                ns = NodeScheme.from_dual_codewords(self.ctx, self._builder(i), i)
                self._nodes[i] = ns
                if DEBUG:
                    log(f"{self.construction}: built node {i}, max helper rank {ns.max_helper_rank}")
        return ns

    @property
    def bandwidth(self) -> Union[int, float]:
        return bits_for(self.ctx.q, (self.code.n - 1) * self.r)

    def restricted(self, code: RsCode, keep: Sequence[int]) -> "RepairScheme":
        """Scheme for a shortened code: drop the removed columns, keep nodes in `keep`."""
        keep = [int(i) for i in keep]
        if len(keep) != code.n:
            raise SchemeError("kept positions do not match the shortened code")
        parent = self

        def build(i: int) -> galois.FieldArray:
            return parent.dual_codewords(keep[i])[:, keep]

        return RepairScheme(code, self.r, f"{self.construction}+shortened", builder=build)

    def rescaled(self, code: RsCode, factors: galois.FieldArray) -> "RepairScheme":
        parent = self

        def build(i: int) -> galois.FieldArray:
            return parent.dual_codewords(i) * factors

        return RepairScheme(code, self.r, f"{self.construction}+rescaled", builder=build)

    def to_dict(self, nodes: Optional[Sequence[int]] = None) -> dict:
        chosen = self.nodes if nodes is None else [int(i) for i in nodes]
        return {
            "schema": SCHEME_SCHEMA,
            "construction": self.construction,
            "r": self.r,
            "code": self.code.to_dict(),
            "nodes": [self.node(i).to_dict() for i in chosen],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RepairScheme":
        if data.get("schema") != SCHEME_SCHEMA:
            raise SchemeError(f"unsupported scheme schema {data.get('schema')!r}")
        try:
            code = RsCode.from_dict(data["code"])
            r = int(data["r"])
            entries = data["nodes"]
            construction = str(data.get("construction", "loaded"))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemeError(f"malformed scheme: {exc}") from exc
        nodes = {}
        for entry in entries:
            ns = NodeScheme.from_dict(code.ctx, entry)
            if not 0 <= ns.failed < code.n or ns.failed in nodes:
                raise SchemeError(f"node {ns.failed}: out of range or listed twice")
            if ns.n != code.n:
                raise SchemeError(f"node {ns.failed}: dual codewords have length {ns.n}, code has {code.n}")
            nodes[ns.failed] = ns
        return cls(code, r, construction, nodes=nodes)


def _translated_rows(code: RsCode, coeffs: galois.FieldArray, b: galois.FieldArray, i: int) -> galois.FieldArray:
    """x_{j,u} = f_j(u - a_i) / (u - a_i), x_{j,i} = b_j, with f_j = sum coeffs[j, l] X^(q^l)."""
    ctx = code.ctx
    points = code.eval_set
    powers = ctx.ext.Zeros((coeffs.shape[1], code.n))
    for ell in range(coeffs.shape[1]):
        powers[ell] = ctx.frobenius(points, ell)
    values = coeffs @ powers
    diff = points - points[i]
    diff[i] = 1
    x = (values - values[:, i : i + 1]) * inv(diff)
    x[:, i] = b
    return x


def scheme_from_pair(pair: GoodPair, code: Optional[RsCode] = None) -> RepairScheme:
    """Repair scheme for C(U, s) with helper budget r = dim V.

    Each f_j = b_j X + a_{j,1} X^q + ... + a_{j,s} X^(q^s) maps U into V, where
    the a_{j,l} come from expressing M1's columns through M2's.
    """
    U, V, s = pair.U, pair.V, pair.params.s
    ctx = U.ctx
    pair.params.require_code()
    if code is None:
        code = RsCode.on_subspace(U, s)
    elif code.subspace != U or code.s != s:
        raise SchemeError("code is not C(U, s) for this pair")
    weak = is_weakly_good(U, V, s)
    if not weak:
        raise NotWeaklyGood(f"column space of M1 escapes M2 (ranks {weak.rank_m2} and {weak.rank_m})")
    gm = build_M(U, V, s)
    m = ctx.m
    if gm.M.shape[0] == 0:
        y = ctx.base.Zeros((m * s, m))
    else:
        y = solve(gm.M2, -gm.M1)
        if y is None:
            raise NotWeaklyGood("no solution for the repair polynomial coefficients")
    b = gm.S.elems
    coeffs = ctx.ext.Zeros((m, s + 1))
    coeffs[:, 0] = b
    for ell in range(1, s + 1):
        block = y[(ell - 1) * m : ell * m, :]
        coeffs[:, ell] = ctx.embed(block).T @ b
    polys = [LinearizedPoly(ctx, coeffs[j]) for j in range(m)]
    if DEBUG:
        log(f"pair scheme: q={ctx.q} m={m} d={U.dim} s={s} r={V.dim}")
    return RepairScheme(
        code,
        V.dim,
        "pair",
        builder=lambda i: _translated_rows(code, coeffs, b, i),
        polys=polys,
    )


def translate_scheme(scheme: RepairScheme, u_star: Any) -> NodeScheme:
    """Node scheme at u_star from the node-0 repair polynomials f_j(u - u_star)."""
    if scheme.polys is None:
        raise SchemeError(f"{scheme.construction} scheme carries no repair polynomials")
    code = scheme.code
    if code.is_grs:
        raise SchemeError("translation needs an unscaled subspace code")
    if code.subspace is None or not code.subspace.contains(u_star):
        raise ValueError("u_star must lie in U")
    i = code.index_of(u_star)
    ctx = code.ctx
    coeffs = ctx.ext.Zeros((ctx.m, max(p.coeffs.size for p in scheme.polys)))
    for j, p in enumerate(scheme.polys):
        coeffs[j, : p.coeffs.size] = p.coeffs
    x = _translated_rows(code, coeffs, coeffs[:, 0], i)
    return NodeScheme.from_dual_codewords(ctx, x, i)


def _subspace_poly_rows(
    code: RsCode,
    i: int,
    betas: galois.FieldArray,
    L: LinearizedPoly,
    v_dual: galois.FieldArray,
) -> galois.FieldArray:
    """x_{l,a} = v'_a L(beta_l (a - a_i)) / (a - a_i), x_{l,a_i} = v'_i beta_l c0."""
    points = code.eval_set
    diff = points - points[i]
    values = L(betas[:, None] * diff[None, :])
    diff[i] = 1
    x = values * inv(diff)
    x[:, i] = betas * L.linear_coeff
    return x * v_dual


def _codimension_degree(q: int, redundancy: int) -> int:
    s = round(math.log(redundancy, q))
    if q**s != redundancy:
        raise ValueError(f"n - k = {redundancy} is not a power of q = {q}")
    return s


def dm_scheme(code: RsCode, failed: Optional[int] = None, W: Optional[Subspace] = None) -> RepairScheme:
    """Uniform subspace-polynomial scheme for GRS(A, n - q^s): every helper sends m - s symbols."""
    ctx = code.ctx
    s = _codimension_degree(ctx.q, code.n - code.k)
    if not 1 <= s < ctx.m:
        raise ValueError(f"need 1 <= s < m, got s={s}")
    if W is None:
        W = span(ctx, ctx.basis.elems[:s])
    if W.dim != s:
        raise ValueError(f"W must have dimension {s}, got {W.dim}")
    L = annihilator_poly(W)
    betas = ctx.basis.elems
    if DEBUG:
        log(f"dm scheme: n={code.n} k={code.k} s={s} r={ctx.m - s}")
    v_dual = dual_scaling(code)
    scheme = RepairScheme(code, ctx.m - s, "dm", builder=lambda i: _subspace_poly_rows(code, i, betas, L, v_dual))
    if failed is not None:
        scheme.node(failed)
    return scheme


def composite_scheme_subfield(ctx: FieldCtx, d: int, s: int) -> RepairScheme:
    """Scheme for C(F_{q^d}, s) with r = (d - s) m / d.

    A codeword splits as f = sum_j b_j f_j with f_j over F_{q^d}; each f_j is
    repaired by the subspace-polynomial scheme inside F_{q^d} and the m/d copies
    are tensored through the relative dual basis b'. `subfield_components` and
    `recombine_components` give the split f -> (f_j) and its inverse.
    """
    m = ctx.m
    if d < 1 or m % d or d >= m:
        raise ValueError(f"d must be a proper divisor of m={m}, got {d}")
    if not 1 <= s < d:
        raise ValueError(f"need 1 <= s < d, got s={s} d={d}")
    E = subfield(ctx, d)
    code = RsCode.on_subspace(E, s)
    b = powers_of_alpha(ctx, m // d)
    b_dual = relative_dual_basis(ctx, b, d)
    betas = E.basis
    L = annihilator_poly(span(ctx, betas[:s]))
    r = (d - s) * m // d
    v_dual = dual_scaling(code)

    def build(i: int) -> galois.FieldArray:
        inner = _subspace_poly_rows(code, i, betas, L, v_dual)
        return (b_dual[:, None, None] * inner[None, :, :]).reshape(m, code.n)

    if DEBUG:
        log(f"composite scheme: m={m} d={d} s={s} r={r}")
    return RepairScheme(code, r, "composite", builder=build)


def subfield_components(ctx: FieldCtx, d: int, values: Any, dual: Any) -> galois.FieldArray:
    """c -> (tr_{q^m/q^d}(c b'_j))_j; row j holds component j of every value."""
    values = ctx.elements(values)
    dual = ctx.elements(dual).reshape(-1)
    return relative_trace(ctx, dual.reshape((-1,) + (1,) * values.ndim) * values, d)


def recombine_components(ctx: FieldCtx, basis: Any, components: galois.FieldArray) -> galois.FieldArray:
    basis = ctx.elements(basis).reshape(-1)
    return (basis.reshape((-1,) + (1,) * (components.ndim - 1)) * components).sum(axis=0)


@dataclass(frozen=True)
class GwVerdict:
    ok: bool
    nodes_checked: int
    max_helper_rank: int
    node: Optional[int] = None
    helper: Optional[int] = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "nodes_checked": self.nodes_checked,
            "max_helper_rank": self.max_helper_rank,
            "node": self.node,
            "helper": self.helper,
            "reason": self.reason,
        }


def verify_gw(scheme: RepairScheme, nodes: Optional[Sequence[int]] = None) -> GwVerdict:
    """Dual codewords, helper rank at most r and failed-node rank m, for every node.

    Helper ranks are bounded by checking x_{j,u} = sum_t lam_{j,t} gamma_t with at
    most r query elements, so a tampered lam or gamma is caught as well. Without
    `nodes` every position of the code is checked, so a scheme missing a node fails.
    """
    code, ctx, r = scheme.code, scheme.ctx, scheme.r
    chosen = list(range(code.n)) if nodes is None else [int(i) for i in nodes]
    worst = 0
    for i in chosen:
        try:
            ns = scheme.node(i)
        except SchemeError as exc:
            return GwVerdict(False, 0, worst, i, None, str(exc))
        if ns.n != code.n:
            return GwVerdict(False, 0, worst, i, None, "dual codeword length does not match the code")
        bad = np.flatnonzero(~dual_check(code, ns.x))
        if bad.size:
            return GwVerdict(False, 0, worst, i, None, f"x_{int(bad[0])} is not a dual codeword")
        for u in ns.helpers:
            gamma, lam = ns.gammas[u], ns.lams[u]
            if gamma.size > r:
                return GwVerdict(False, 0, worst, i, u, f"helper rank {gamma.size} exceeds r={r}")
            if gamma.size == 0:
                expanded = ctx.ext.Zeros(ctx.m)
            else:
                expanded = ctx.embed(lam) @ gamma
            if not np.array_equal(expanded, ns.x[:, u]):
                return GwVerdict(False, 0, worst, i, u, "query basis does not generate the helper's dual symbols")
            worst = max(worst, int(gamma.size))
        if ctx.rank_q(ns.x[:, i]) != ctx.m:
            return GwVerdict(False, 0, worst, i, None, "failed-node column has rank below m")
    return GwVerdict(True, len(chosen), worst)


@dataclass(frozen=True, eq=False)
class RepairTranscript:
    failed: int
    helpers: list[int]
    symbols: galois.FieldArray
    ranks: list[int]
    value: galois.FieldArray
    bits: Union[int, float]

    def to_dict(self, ctx: FieldCtx) -> dict:
        return {
            "schema": SCHEME_SCHEMA,
            "failed": self.failed,
            "helpers": [
                {"node": u, "rank": rk, "symbols": ctx.base_to_json(row)}
                for u, rk, row in zip(self.helpers, self.ranks, self.symbols)
            ],
            "value": ctx.to_json(self.value),
            "bits": self.bits,
        }


def execute_repair(scheme: RepairScheme, codeword: Codeword, i: int) -> RepairTranscript:
    """Rebuild c_i from r trace symbols per helper.

    sum_u tr(x_{j,u} c_u) = 0 gives tr(x_{j,i} c_i) as minus the helpers'
    combined symbols; the trace-dual of {x_{j,i}} turns these back into c_i.
    """
    ctx = scheme.ctx
    codeword = ctx.elements(codeword).reshape(-1)
    if codeword.size != scheme.code.n:
        raise SchemeError(f"codeword length {codeword.size} does not match n={scheme.code.n}")
    ns = scheme.node(i)
    r = scheme.r
    gamma, lam = ns.padded(r)
    # the failed entry is never read
    known = codeword.copy()
    known[i] = 0
    symbols = ctx.trace(gamma * known[:, None])
    combined = lam.transpose(1, 0, 2).reshape(ctx.m, ns.n * r) @ symbols.reshape(ns.n * r)
    value = ctx.embed(-combined) @ ns.recon
    helpers = ns.helpers
    if DEBUG:
        log(f"repaired node {i} from {len(helpers)} helpers, {r} symbols each")
    return RepairTranscript(
        failed=i,
        helpers=helpers,
        symbols=symbols[helpers],
        ranks=[ns.helper_rank(u) for u in helpers],
        value=value,
        bits=bits_for(ctx.q, len(helpers) * r),
    )


@dataclass(frozen=True, eq=False)
class NaiveTranscript:
    failed: int
    helpers: list[int]
    value: galois.FieldArray
    bits: Union[int, float]


def naive_bandwidth(code: RsCode) -> Union[int, float]:
    return bits_for(code.ctx.q, code.k * code.ctx.m)


def naive_repair(code: RsCode, codeword: Codeword, i: int) -> NaiveTranscript:
    """Download k full nodes and reinterpolate."""
    codeword = code.ctx.elements(codeword).reshape(-1)
    if not 0 <= i < code.n:
        raise SchemeError(f"node {i} out of range")
    if code.k == code.n:
        raise SchemeError("a k = n code cannot lose a node")
    helpers = [u for u in range(code.n) if u != i][: code.k]
    full = erasure_decode(code, codeword[helpers], helpers)
    return NaiveTranscript(i, helpers, full[i], naive_bandwidth(code))


def cut_set_bound(n: int, k: int, m: int, q: int) -> float:
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k} n={n}")
    return math.log2(q) * (n - 1) * m / (n - k)


@dataclass
class SimulationReport:
    rows: list[dict] = field(default_factory=list)

    @property
    def failures(self) -> int:
        return sum(1 for row in self.rows if not row["success"])

    @property
    def bits(self) -> set:
        return {row["bits"] for row in self.rows}

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "repairs": len(self.rows),
            "failures": self.failures,
            "bits": sorted(self.bits),
        }


def simulate(
    scheme: RepairScheme,
    codewords: Sequence[Codeword],
    nodes: Optional[Sequence[int]] = None,
) -> SimulationReport:
    """Erase each node in turn on every codeword; rows are ordered by codeword then node."""
    chosen = scheme.nodes if nodes is None else [int(i) for i in nodes]
    report = SimulationReport()
    for t, c in enumerate(codewords):
        for i in chosen:
            transcript = execute_repair(scheme, c, i)
            report.rows.append(
                {"codeword": t, "node": i, "success": bool(transcript.value == c[i]), "bits": transcript.bits}
            )
    return report
