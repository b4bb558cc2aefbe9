"""Good pairs (U, V): the goodness matrix, search, duality and Bad(U) counting."""

import enum
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional, Union

import galois
import numpy as np

from .debug import DEBUG
from .gfield import Basis, FieldCtx, LinearizedPoly, kernel, rank
from .subspace import (
    Subspace,
    check_guard,
    frobenius_image,
    omega_size,
    orthogonal_complement,
    sample_omega,
    span,
    subfield,
)
from .util import log, trial_rng

BAD_SCAN_GUARD = 2**22
DEFAULT_TRIALS = 64


class InfeasibleParams(ValueError):
    """Parameters outside every feasibility route."""


class NotWeaklyGood(ValueError):
    """M1's column space is not inside M2's, so no repair polynomials exist."""


@dataclass(frozen=True)
class SchemeParams:
    q: int
    m: int
    d: int
    s: int
    r: int

    def __post_init__(self):
        if self.q < 2 or self.m < 1:
            raise ValueError(f"bad field parameters q={self.q} m={self.m}")
        if self.s < 1:
            raise ValueError(f"s must be at least 1, got {self.s}")
        if not 1 <= self.d <= self.m:
            raise ValueError(f"d must lie in [1, {self.m}], got {self.d}")
        if not 0 <= self.r <= self.m:
            raise ValueError(f"r must lie in [0, {self.m}], got {self.r}")

    @property
    def rows(self) -> int:
        return self.d * (self.m - self.r)

    @property
    def slack(self) -> int:
        return self.m * self.s - self.rows

    @property
    def rate_ok(self) -> bool:
        return self.slack >= 0

    @property
    def code_ok(self) -> bool:
        return self.s < self.d

    def require_code(self) -> None:
        if not self.code_ok:
            raise ValueError(f"C(U, s) needs s < d, got s={self.s} d={self.d}")

    def to_dict(self) -> dict:
        return {"q": self.q, "m": self.m, "d": self.d, "s": self.s, "r": self.r}

    @classmethod
    def from_dict(cls, data: dict) -> "SchemeParams":
        try:
            return cls(**{k: int(data[k]) for k in ("q", "m", "d", "s", "r")})
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed scheme params: {exc}") from exc


def t_matrix(ctx: FieldCtx, xs: Any, s: int) -> galois.FieldArray:
    """s x len(xs) matrix with entry (t, i) = xs[i]^(q^(t+1))."""
    if s < 1:
        raise ValueError(f"s must be at least 1, got {s}")
    xs = ctx.elements(xs).reshape(-1)
    mat = ctx.ext.Zeros((s, xs.size))
    for t in range(1, s + 1):
        mat[t - 1] = ctx.frobenius(xs, t)
    return mat


def complete_basis(ctx: FieldCtx, b1: Any, candidates: Any = None) -> Basis:
    """Extend independent b1 to a basis, greedily, from `candidates` (default polynomial basis)."""
    elems = ctx.elements(b1).reshape(-1)
    if ctx.rank_q(elems) != elems.size:
        raise ValueError("b1 must be F_q-independent")
    pool = ctx.basis.elems if candidates is None else ctx.elements(candidates).reshape(-1)
    for c in pool:
        if elems.size == ctx.m:
            break
        trial = np.concatenate((elems, c.reshape(1)))
        if ctx.rank_q(trial) == trial.size:
            elems = trial
    if elems.size != ctx.m:
        raise ValueError("candidates do not complete b1 to a basis")
    return Basis(ctx, elems)


@dataclass(frozen=True, eq=False)
class GoodnessMatrix:
    """M = (M1 | M2): block row i, column block l is [u_i^(q^l)]_{B2,S}."""

    M: galois.FieldArray
    m: int
    s: int
    S: Basis
    r: int
    u_basis: galois.FieldArray

    @property
    def d(self) -> int:
        return int(self.u_basis.size)

    @property
    def M1(self) -> galois.FieldArray:
        return self.M[:, : self.m]

    @property
    def M2(self) -> galois.FieldArray:
        return self.M[:, self.m :]

    @property
    def B1(self) -> galois.FieldArray:
        return self.S.elems[: self.r]

    @property
    def B2(self) -> galois.FieldArray:
        return self.S.elems[self.r :]

    def decode_left(self, x: galois.FieldArray) -> galois.FieldArray:
        """Read a left vector of M as (v'_1..v'_d) in V^perp, chunk i in B2' coordinates."""
        ctx = self.S.ctx
        chunks = ctx.embed(x.reshape(self.d, self.m - self.r))
        return chunks @ self.S.dual.elems[self.r :]


def build_M(
    U: Subspace,
    V: Subspace,
    s: int,
    u_basis: Any = None,
    candidates: Any = None,
) -> GoodnessMatrix:
    ctx = U.ctx
    m, r = ctx.m, V.dim
    if s < 1:
        raise ValueError(f"s must be at least 1, got {s}")
    u = U.basis if u_basis is None else ctx.elements(u_basis).reshape(-1)
    if u.size == 0:
        raise ValueError("U must be nonzero")
    if u_basis is not None and (u.size != U.dim or span(ctx, u) != U):
        raise ValueError("u_basis is not a basis of U")
    S = complete_basis(ctx, V.basis, candidates)
    d = u.size
    if r == m:
        return GoodnessMatrix(ctx.base.Zeros((0, (s + 1) * m)), m, s, S, r, u)

    powers = ctx.ext.Zeros((d, s + 1))
    for ell in range(s + 1):
        powers[:, ell] = ctx.frobenius(u, ell)
    dual_b2 = S.dual.elems[r:]
    products = powers[:, :, None, None] * dual_b2[None, None, :, None] * S.elems[None, None, None, :]
    blocks = ctx.trace(products)
    M = blocks.transpose(0, 2, 1, 3).reshape(d * (m - r), (s + 1) * m)
    return GoodnessMatrix(M, m, s, S, r, u)


@dataclass(frozen=True, eq=False)
class GoodnessVerdict:
    good: bool
    rank_m2: int
    rows: int
    rate_ok: bool
    witness: Optional[galois.FieldArray] = None
    witness_v: Optional[galois.FieldArray] = None

    def __bool__(self) -> bool:
        return self.good


def is_good(U: Subspace, V: Subspace, s: int, u_basis: Any = None, candidates: Any = None) -> GoodnessVerdict:
    """rank(M2) = d(m - r) and ms >= d(m - r); the empty M (r = m) counts as good."""
    gm = build_M(U, V, s, u_basis=u_basis, candidates=candidates)
    rows = gm.M.shape[0]
    rate_ok = gm.m * s >= rows
    rank_m2 = rank(gm.M2)
    if rate_ok and rank_m2 == rows:
        return GoodnessVerdict(True, rank_m2, rows, rate_ok)
    witness = kernel(gm.M2.T)[0]
    return GoodnessVerdict(False, rank_m2, rows, rate_ok, witness, gm.decode_left(witness))


@dataclass(frozen=True, eq=False)
class WeakVerdict:
    weak_ok: bool
    rank_m2: int
    rank_m: int
    witness: Optional[galois.FieldArray] = None
    witness_v: Optional[galois.FieldArray] = None

    def __bool__(self) -> bool:
        return self.weak_ok


def is_weakly_good(U: Subspace, V: Subspace, s: int, u_basis: Any = None, candidates: Any = None) -> WeakVerdict:
    """Column space of M1 inside column space of M2."""
    gm = build_M(U, V, s, u_basis=u_basis, candidates=candidates)
    rank_m2 = rank(gm.M2)
    rank_m = rank(gm.M)
    if rank_m2 == rank_m:
        return WeakVerdict(True, rank_m2, rank_m)
    for y in kernel(gm.M2.T):
        if np.any(y @ gm.M1):
            return WeakVerdict(False, rank_m2, rank_m, y, gm.decode_left(y))
    raise RuntimeError("rank gap without a separating left-kernel vector")


class Feasibility(str, enum.Enum):
    OK_Q3 = "ok_q3"
    OK_Q2_SLACK = "ok_q2_slack"
    OK_Q2_SUBFIELD = "ok_q2_subfield"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class FeasibilityReport:
    verdict: Feasibility
    bound: Fraction
    a: int
    reason: str

    @property
    def ok(self) -> bool:
        return self.verdict is not Feasibility.INFEASIBLE

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "bound": str(self.bound),
            "bound_float": float(self.bound),
            "a": self.a,
            "reason": self.reason,
        }


def prob_bound(params: SchemeParams, a: int = 1) -> Fraction:
    """Lower bound on P[(U, V) good] for V^perp spanned by a uniform vector of Omega.

    1 - q^(d(m-r) - ms) / (q^a - 1) * (q - 1) / (q - 1 - q^-r), clamped at 0.
    """
    q, r = params.q, params.r
    denominator = Fraction(q - 1) - Fraction(1, q**r)
    if denominator <= 0:
        return Fraction(0)
    term = Fraction(q) ** (-params.slack) / (q**a - 1) * Fraction(q - 1) / denominator
    return max(Fraction(0), 1 - term)


def lemma6_bound(params: SchemeParams, a: int = 1) -> Fraction:
    """Upper bound on |Bad(U)| for an F_{q^a}-linear U."""
    q, m, r = params.q, params.m, params.r
    return Fraction(q) ** (-params.slack) * q ** (m * (m - r)) / (q**a - 1)


def corollary_bound(verdict: Feasibility) -> Optional[Fraction]:
    return {
        Feasibility.OK_Q3: Fraction(2, 5),
        Feasibility.OK_Q2_SLACK: Fraction(1, 3),
        Feasibility.OK_Q2_SUBFIELD: Fraction(1, 3),
    }.get(verdict)


def feasible(params: SchemeParams, a: int = 1) -> FeasibilityReport:
    """Which sufficient condition for a good pair applies, with its probability bound."""
    if a < 1 or params.m % a or params.d % a:
        raise ValueError(f"a must be a common factor of m={params.m} and d={params.d}, got {a}")
    bound = prob_bound(params, a)
    if not params.rate_ok:
        return FeasibilityReport(Feasibility.INFEASIBLE, Fraction(0), a, "rate condition ms >= d(m-r) fails")
    if params.q >= 3:
        return FeasibilityReport(Feasibility.OK_Q3, bound, a, "q >= 3 and ms >= d(m-r)")
    if params.r >= 2 and params.slack >= 1:
        return FeasibilityReport(Feasibility.OK_Q2_SLACK, bound, a, "q = 2, r >= 2 and ms >= d(m-r) + 1")
    if a >= 2 and bound > 0:
        return FeasibilityReport(
            Feasibility.OK_Q2_SUBFIELD, bound, a, f"q = 2 and U is F_(q^{a})-linear with {a} | gcd(m, d)"
        )
    if math.gcd(params.m, params.d) == 1 and params.slack == 0:
        reason = "degenerate: gcd(m, d) = 1 with ms = d(m-r) forces r = m and s = 0"
    else:
        reason = "q = 2 without slack, r >= 2 or a subfield structure"
    return FeasibilityReport(Feasibility.INFEASIBLE, bound, a, reason)


@dataclass(frozen=True, eq=False)
class GoodPair:
    U: Subspace
    V: Subspace
    params: SchemeParams
    rank_m2: int
    weak_ok: bool = True
    trials: int = 0

    @property
    def ctx(self) -> FieldCtx:
        return self.U.ctx

    def recheck(self) -> bool:
        return is_good(self.U, self.V, self.params.s).good

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "params": self.params.to_dict(),
            "field": self.ctx.to_dict(),
            "U": self.U.to_dict(),
            "V": self.V.to_dict(),
            "certificate": {"rank_M2": self.rank_m2, "weak_ok": self.weak_ok},
            "trials": self.trials,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GoodPair":
        try:
            ctx = FieldCtx.from_dict(data["field"])
            params = SchemeParams.from_dict(data["params"])
            U = Subspace.from_dict(ctx, data["U"])
            V = Subspace.from_dict(ctx, data["V"])
            cert = data["certificate"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed pair: {exc}") from exc
        if (U.dim, V.dim, ctx.q, ctx.m) != (params.d, params.r, params.q, params.m):
            raise ValueError("pair dimensions disagree with its params")
        return cls(U, V, params, int(cert["rank_M2"]), bool(cert["weak_ok"]), int(data.get("trials", 0)))


def make_pair(U: Subspace, V: Subspace, s: int, trials: int = 0) -> GoodPair:
    """Check (U, V) and wrap it; raises ValueError when the pair is not good."""
    verdict = is_good(U, V, s)
    if not verdict.good:
        raise ValueError(f"pair is not good: rank(M2) = {verdict.rank_m2} of {verdict.rows}")
    params = SchemeParams(U.ctx.q, U.ctx.m, U.dim, s, V.dim)
    return GoodPair(U, V, params, verdict.rank_m2, True, trials)


@dataclass(frozen=True)
class SearchFailure:
    params: SchemeParams
    trials: int
    bound: Fraction

    def to_dict(self) -> dict:
        return {"params": self.params.to_dict(), "trials": self.trials, "bound": str(self.bound)}


def search_good_pair(
    U: Subspace,
    params: SchemeParams,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    force: bool = False,
) -> Union[GoodPair, SearchFailure]:
    """Sample v' from Omega, set V = span(v')^perp, keep the first good pair.

    Trial t draws from trial_rng(seed, t) so the lowest successful index is the
    same however the trials are scheduled.
    """
    ctx = U.ctx
    if (ctx.q, ctx.m, U.dim) != (params.q, params.m, params.d):
        raise ValueError("params do not match U")
    params.require_code()
    report = feasible(params, U.subfield_degree or 1)
    if not report.ok and not force:
        raise InfeasibleParams(f"no feasibility route for {params.to_dict()}: {report.reason}")
    n = params.m - params.r
    if n == 0:
        return make_pair(U, span(ctx, ctx.basis.elems), params.s)
    for t in range(trials):
        omega = sample_omega(ctx, n, trial_rng(seed, t))
        V = orthogonal_complement(span(ctx, omega.entries))
        verdict = is_good(U, V, params.s)
        if DEBUG:
            log(f"search trial {t}: rank(M2) = {verdict.rank_m2}/{verdict.rows}")
        if verdict.good:
            return GoodPair(U, V, params, verdict.rank_m2, True, trials=t + 1)
    return SearchFailure(params, trials, report.bound)


def duality_transform(pair: GoodPair) -> GoodPair:
    """(U, V) -> (V^perp, (U^(q^(s+1)))^perp)."""
    U, V, s = pair.U, pair.V, pair.params.s
    ctx = U.ctx
    if V.dim == ctx.m:
        raise ValueError("duality transform needs r < m")
    if not is_good(U, V, s).good:
        raise ValueError("duality transform needs a good pair")
    U2 = orthogonal_complement(V)
    V2 = orthogonal_complement(frobenius_image(U, s + 1))
    verdict = is_good(U2, V2, s)
    if not verdict.good:
        raise RuntimeError("dual pair is not good")
    params = SchemeParams(ctx.q, ctx.m, U2.dim, s, V2.dim)
    return GoodPair(U2, V2, params, verdict.rank_m2, True, pair.trials)


def powers_of_alpha(ctx: FieldCtx, d: int) -> galois.FieldArray:
    powers = ctx.ext.Ones(d)
    for i in range(1, d):
        powers[i] = powers[i - 1] * ctx.alpha
    return powers


def explicit_pair_mrm22(ctx: FieldCtx, d: int, r: int, s: int) -> GoodPair:
    """U = span(1, alpha, ..., alpha^(d-1)), V = F_(q^(m-r))^perp."""
    m = ctx.m
    if not 1 <= r < m or m % (m - r):
        raise ValueError(f"m - r must divide m, got m={m} r={r}")
    if not 1 <= d < m:
        raise ValueError(f"d must lie in [1, {m - 1}], got {d}")
    if m * s < d * (m - r):
        raise ValueError("rate condition ms >= d(m-r) fails")
    U = span(ctx, powers_of_alpha(ctx, d))
    V = orthogonal_complement(subfield(ctx, m - r))
    return make_pair(U, V, s)


def is_bad_vector(U: Subspace, x: Any, s: int) -> bool:
    """Some nonzero u in U^n has T(u; s) x = 0 (n = len(x))."""
    ctx = U.ctx
    x = ctx.elements(x).reshape(-1)
    d, n = U.dim, x.size
    powers = t_matrix(ctx, U.basis, s).T
    images = powers[:, None, :] * x[None, :, None]
    rows = ctx.coords(images).reshape(d * n, s * ctx.m)
    return rank(rows) < d * n


@dataclass(frozen=True, eq=False)
class UKernel:
    rho: int
    kernel_dim: int
    kernel: galois.FieldArray


def bad_u_kernel(ctx: FieldCtx, u_vec: Any, s: int) -> UKernel:
    """Right kernel of T(u; s) over F_{q^m} with rho = rank_q(u)."""
    u = ctx.elements(u_vec).reshape(-1)
    if not np.any(u):
        raise ValueError("u must be nonzero")
    null = kernel(t_matrix(ctx, u, s))
    return UKernel(ctx.rank_q(u), int(null.shape[0]), null)


def kernel_vectors(ctx: FieldCtx, uk: UKernel, guard: int = BAD_SCAN_GUARD) -> galois.FieldArray:
    """Every F_{q^m}-combination of the kernel rows."""
    count = ctx.order**uk.kernel_dim
    check_guard(count, guard, "kernel enumeration")
    if uk.kernel_dim == 0:
        return ctx.ext.Zeros((1, uk.kernel.shape[1]))
    weights = ctx.order ** np.arange(uk.kernel_dim - 1, -1, -1, dtype=np.int64)
    combos = (np.arange(count, dtype=np.int64)[:, None] // weights) % ctx.order
    return ctx.ext(combos) @ uk.kernel


def bad_of_u(ctx: FieldCtx, u_vec: Any, s: int, guard: int = BAD_SCAN_GUARD) -> list[galois.FieldArray]:
    """Bad(u): the kernel vectors of T(u; s) lying in Omega."""
    uk = bad_u_kernel(ctx, u_vec, s)
    n = uk.kernel.shape[1]
    return [x for x in kernel_vectors(ctx, uk, guard) if ctx.rank_q(x) == n]


@dataclass(frozen=True, eq=False)
class BadSetReport:
    count: int
    omega_size: int
    classes: int
    bound: Fraction
    witnesses: list = field(default_factory=list)

    @property
    def within_bound(self) -> bool:
        return self.count <= self.bound


def bad_set(
    U: Subspace,
    s: int,
    r: int,
    guard: int = BAD_SCAN_GUARD,
    witnesses: bool = False,
) -> BadSetReport:
    """Exact |Bad(U)|, scanning one u per class {beta u : beta in F_(q^a)^*}."""
    ctx = U.ctx
    m, n = ctx.m, ctx.m - r
    a = U.subfield_degree or 1
    params = SchemeParams(ctx.q, m, U.dim, s, r)
    bound = lemma6_bound(params, a)
    if n == 0:
        return BadSetReport(0, 1, 0, bound)
    elems = U.elements()
    check_guard(elems.size**n, guard, "Bad(U) scan over U^(m-r)")
    scalars = subfield(ctx, a).elements()[1:]

    found: dict[tuple[int, ...], Any] = {}
    in_omega: dict[tuple[int, ...], bool] = {}
    classes = 0
    tests = 0
    for idx in itertools.product(range(elems.size), repeat=n):
        if not any(idx):
            continue
        u = elems[list(idx)]
        lead = u[int(np.flatnonzero(u.view(np.ndarray))[0])]
        if int(lead) != int((scalars * lead).view(np.ndarray).min()):
            continue
        classes += 1
        uk = bad_u_kernel(ctx, u, s)
        if uk.rho <= s:
            continue
        tests += ctx.order**uk.kernel_dim
        check_guard(tests, guard, "Bad(U) kernel tests")
        for x in kernel_vectors(ctx, uk, guard):
            key = tuple(int(v) for v in x)
            if key in found:
                continue
            if key not in in_omega:
                in_omega[key] = ctx.rank_q(x) == n
            if in_omega[key]:
                found[key] = (u, x)
    if DEBUG:
        log(f"Bad(U) scan: {classes} classes, {len(found)} bad vectors")
    listed = list(found.values()) if witnesses else []
    return BadSetReport(len(found), omega_size(ctx.q, m, n), classes, bound, listed)


def annihilator_poly(W: Subspace) -> LinearizedPoly:
    """Monic L_W(X) = prod over w in W of (X - w), built one basis vector at a time."""
    ctx = W.ctx
    coeffs = ctx.ext.Ones(1)
    for w in W.basis:
        lam = LinearizedPoly(ctx, coeffs)(w) ** (ctx.q - 1)
        grown = ctx.ext.Zeros(coeffs.size + 1)
        grown[1:] = coeffs**ctx.q
        grown[:-1] = grown[:-1] - lam * coeffs
        coeffs = grown
    return LinearizedPoly(ctx, coeffs)


def image_poly(V: Subspace) -> LinearizedPoly:
    """Linearized polynomial of q-degree s = m - dim V mapping F_{q^m} onto V, with b_0 = 1.

    With K = (sigma^-s(V))^perp and L_K = sum c_i X^(q^i), the map
    sigma^s composed with the trace-adjoint of L_K has image V and expands to
    sum c_i^(q^(s-i)) X^(q^(s-i)).
    """
    ctx = V.ctx
    s = ctx.m - V.dim
    if s == 0:
        return LinearizedPoly(ctx, ctx.ext.Ones(1))
    K = orthogonal_complement(frobenius_image(V, ctx.m - s))
    c = annihilator_poly(K).coeffs
    b = ctx.ext.Zeros(s + 1)
    for i in range(s + 1):
        b[s - i] = c[i] ** (ctx.q ** (s - i))
    if b[0] == 0:
        raise RuntimeError("image polynomial lost its linear term")
    return LinearizedPoly(ctx, b)


@dataclass(frozen=True, eq=False)
class CounterexamplePair:
    V: Subspace
    w: galois.FieldArray
    b: galois.FieldArray

    @property
    def pairing(self) -> galois.FieldArray:
        return (self.w * self.b).sum()


def counterexample_pair(U: Subspace, r: int, s: int) -> CounterexamplePair:
    """V with T(w; s) b' = 0 but sum w_j b'_j != 0, so (U, V) is not weakly good."""
    ctx = U.ctx
    m, d = ctx.m, U.dim
    if not (1 <= s < d < m) or not r < m - s:
        raise ValueError(f"need 1 <= s < d < m and r < m - s, got s={s} d={d} m={m} r={r}")
    n = m - r
    tau = min(d, n)
    w = U.basis[:tau]
    b = kernel(t_matrix(ctx, w, tau - 1))[0]
    if ctx.rank_q(b) != tau:
        raise RuntimeError("kernel vector entries are F_q-dependent")
    for c in ctx.basis.elems:
        if b.size == n:
            break
        trial = np.concatenate((b, c.reshape(1)))
        if ctx.rank_q(trial) == trial.size:
            b = trial
    w = np.concatenate((w, ctx.ext.Zeros(n - tau)))
    V = orthogonal_complement(span(ctx, b))
    pair = CounterexamplePair(V, w, b)
    if pair.pairing == 0:
        raise RuntimeError("counterexample pairing vanished")
    return pair
