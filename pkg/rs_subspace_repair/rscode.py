"""Reed-Solomon and generalized Reed-Solomon codes over F_{q^m}."""

from dataclasses import dataclass
from typing import Any, Optional, Sequence

import galois
import numpy as np

from .gfield import FieldCtx, inv
from .subspace import Subspace, enumerate_subspace
from .util import RngLike, as_rng

# codewords are plain element arrays aligned with eval_set
Codeword = galois.FieldArray


@dataclass(frozen=True, eq=False)
class RsCode:
    """GRS(A, k, v): codewords (v_1 f(a_1), ..., v_n f(a_n)) with deg f < k."""

    ctx: FieldCtx
    eval_set: galois.FieldArray
    k: int
    scaling: Optional[galois.FieldArray] = None
    subspace: Optional[Subspace] = None
    s: Optional[int] = None

    def __post_init__(self):
        ctx = self.ctx
        points = ctx.elements(self.eval_set).reshape(-1)
        object.__setattr__(self, "eval_set", points)
        if np.unique(points.view(np.ndarray)).size != points.size:
            raise ValueError("evaluation points must be distinct")
        if not 1 <= self.k <= points.size:
            raise ValueError(f"k must lie in [1, {points.size}], got {self.k}")
        if self.scaling is not None:
            v = ctx.elements(self.scaling).reshape(-1)
            if v.size != points.size:
                raise ValueError("scaling vector length must equal n")
            if np.any(v == 0):
                raise ValueError("scaling entries must be nonzero")
            object.__setattr__(self, "scaling", v)

    @classmethod
    def on_subspace(cls, U: Subspace, s: int) -> "RsCode":
        """C(U, s) = RS(U, q^d - q^s), evaluated in enumeration order."""
        if not 0 <= s < U.dim:
            raise ValueError(f"C(U, s) needs 0 <= s < d, got s={s} d={U.dim}")
        q = U.ctx.q
        return cls(U.ctx, enumerate_subspace(U), q**U.dim - q**s, subspace=U, s=s)

    @property
    def n(self) -> int:
        return int(self.eval_set.size)

    @property
    def v(self) -> galois.FieldArray:
        return self.ctx.ext.Ones(self.n) if self.scaling is None else self.scaling

    @property
    def is_grs(self) -> bool:
        return self.scaling is not None and bool(np.any(self.scaling != 1))

    def index_of(self, point: Any) -> int:
        point = self.ctx.elements(point)
        hits = np.flatnonzero(self.eval_set == point)
        if hits.size == 0:
            raise ValueError(f"{int(point)} is not an evaluation point")
        return int(hits[0])

    def generator_matrix(self) -> galois.FieldArray:
        """k x n rows v * a^t, t < k."""
        rows = self.ctx.ext.Ones((self.k, self.n))
        for t in range(1, self.k):
            rows[t] = rows[t - 1] * self.eval_set
        return rows * self.v

    def to_dict(self) -> dict:
        data: dict[str, Any] = {
            "schema": 1,
            "field": self.ctx.to_dict(),
            "eval_set": self.ctx.to_json(self.eval_set),
            "k": self.k,
        }
        if self.scaling is not None:
            data["scaling"] = self.ctx.to_json(self.scaling)
        if self.subspace is not None:
            data["subspace"] = self.subspace.to_dict()
            data["s"] = self.s
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RsCode":
        try:
            ctx = FieldCtx.from_dict(data["field"])
            points = ctx.from_json(data["eval_set"])
            k = int(data["k"])
            scaling = ctx.from_json(data["scaling"]) if "scaling" in data else None
            subspace = Subspace.from_dict(ctx, data["subspace"]) if "subspace" in data else None
            s = int(data["s"]) if "s" in data else None
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed code: {exc}") from exc
        return cls(ctx, points, k, scaling, subspace, s)


def encode(code: RsCode, coeffs: Any) -> Codeword:
    """Evaluate f = sum coeffs[i] X^i at every point, times the GRS scaling."""
    coeffs = code.ctx.elements(coeffs).reshape(-1)
    nonzero = np.flatnonzero(coeffs.view(np.ndarray))
    if nonzero.size and nonzero[-1] >= code.k:
        raise ValueError(f"message degree {int(nonzero[-1])} must be below k={code.k}")
    if nonzero.size == 0:
        return code.ctx.ext.Zeros(code.n)
    poly = galois.Poly(coeffs, field=code.ctx.ext, order="asc")
    return poly(code.eval_set) * code.v


def random_codeword(code: RsCode, rng: RngLike = None) -> Codeword:
    return encode(code, code.ctx.random(code.k, as_rng(rng)))


def locator_products(code: RsCode) -> galois.FieldArray:
    """prod over j != i of (a_i - a_j), for every i."""
    points = code.eval_set
    prods = code.ctx.ext.Ones(code.n)
    for j in range(code.n):
        diff = points - points[j]
        diff[j] = 1
        prods = prods * diff
    return prods


def dual_scaling(code: RsCode) -> galois.FieldArray:
    """v' with GRS(A, k, v)^dual = GRS(A, n - k, v'): v'_i = 1 / (v_i prod_{j != i}(a_i - a_j))."""
    if code.n < 2:
        raise ValueError("dual scaling needs n >= 2")
    return inv(code.v * locator_products(code))


def dual_code(code: RsCode) -> RsCode:
    if code.k == code.n:
        raise ValueError("the dual of a k = n code is trivial")
    return RsCode(code.ctx, code.eval_set, code.n - code.k, dual_scaling(code))


def dual_check(code: RsCode, rows: Any) -> np.ndarray:
    """Per-row verdict for a stack of candidate dual codewords."""
    rows = code.ctx.elements(rows)
    rows = rows.reshape(-1, rows.shape[-1]) if rows.ndim else rows.reshape(1, -1)
    if rows.shape[1] != code.n:
        raise ValueError(f"dual codewords must have length {code.n}, got {rows.shape[1]}")
    syndromes = code.generator_matrix() @ rows.T
    return ~np.any(syndromes.view(np.ndarray), axis=0)


def is_dual_codeword(code: RsCode, x: Any) -> bool:
    return bool(dual_check(code, code.ctx.elements(x).reshape(1, -1))[0])


def is_codeword(code: RsCode, c: Any) -> bool:
    c = code.ctx.elements(c).reshape(-1)
    if code.k == code.n:
        if c.size != code.n:
            raise ValueError(f"codewords must have length {code.n}")
        return True
    return is_dual_codeword(dual_code(code), c)


def erasure_decode(code: RsCode, values: Any, known_positions: Sequence[int]) -> Codeword:
    """Interpolate the full codeword from at least k known positions.

    Only the first k positions are interpolated; the rest must agree.
    """
    ctx = code.ctx
    positions = [int(p) for p in known_positions]
    if len(set(positions)) != len(positions) or any(not 0 <= p < code.n for p in positions):
        raise ValueError("known positions must be distinct node indices")
    if len(positions) < code.k:
        raise ValueError(f"need at least k={code.k} known positions, got {len(positions)}")
    values = ctx.elements(values).reshape(-1)
    if values.size != len(positions):
        raise ValueError("one value per known position")
    v = code.v
    head = positions[: code.k]
    poly = galois.lagrange_poly(code.eval_set[head], values[: code.k] * inv(v[head]))
    full = poly(code.eval_set) * v
    if not np.array_equal(full[positions], values):
        raise ValueError("values are not consistent with a codeword")
    return full


def default_shorten_positions(code: RsCode, t: int) -> list[int]:
    """The last t positions; for subspace codes these are the lexicographically largest points."""
    if not 0 <= t < code.k:
        raise ValueError(f"shortening needs 0 <= t < k={code.k}, got {t}")
    return list(range(code.n - t, code.n))


def shorten(code: RsCode, positions: Optional[Sequence[int]] = None, scheme: Any = None, t: int = 2):
    """Keep codewords vanishing on `positions` and delete those positions.

    Returns (shortened code, restricted scheme or None). The shortened code is
    GRS(A \\ P, k - |P|, v * Z) with Z(X) = prod over p in P of (X - a_p).
    """
    if positions is None:
        positions = default_shorten_positions(code, t)
    removed = sorted({int(p) for p in positions})
    if any(not 0 <= p < code.n for p in removed):
        raise ValueError("shortening positions out of range")
    if len(removed) >= code.k:
        raise ValueError(f"cannot shorten {len(removed)} positions of a k={code.k} code")
    if not removed:
        return code, scheme
    keep = [i for i in range(code.n) if i not in removed]
    points = code.eval_set[keep]
    z = code.ctx.ext.Ones(len(keep))
    for p in removed:
        z = z * (points - code.eval_set[p])
    short = RsCode(code.ctx, points, code.k - len(removed), code.v[keep] * z)
    if scheme is None:
        return short, None
    return short, scheme.restricted(short, keep)


def grs_rescale_scheme(scheme: Any, v_old: Any, v_new: Any):
    """Carry a repair scheme from GRS(A, k, v_old) to GRS(A, k, v_new).

    Dual codewords are multiplied entrywise by v_old / v_new, which is the same
    as helpers pre-multiplying their content by v_new / v_old.
    """
    code = scheme.code
    ctx = code.ctx
    v_old = ctx.elements(v_old).reshape(-1)
    v_new = ctx.elements(v_new).reshape(-1)
    if v_old.size != code.n or v_new.size != code.n:
        raise ValueError(f"scaling vectors must have length {code.n}")
    if np.any(v_old == 0) or np.any(v_new == 0):
        raise ValueError("scaling entries must be nonzero")
    if not np.array_equal(v_old, code.v):
        raise ValueError("v_old does not match the scheme's code")
    rescaled = RsCode(ctx, code.eval_set, code.k, v_new, code.subspace, code.s)
    return scheme.rescaled(rescaled, v_old * inv(v_new))
