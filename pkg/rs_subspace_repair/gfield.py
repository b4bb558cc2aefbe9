"""Two-level field tower F_p < F_q < F_{q^m}.

Elements live in a single galois field of order p^(e*m). The tower structure
(g over F_p, h over F_q) is only used to fix coordinates: every element has a
length-m vector of F_q coordinates with respect to {1, x, ..., x^(m-1)}, where
x is a root of h, and every F_q coordinate is a length-e vector of F_p residues
with respect to {1, y, ..., y^(e-1)}, where y is a root of g.
"""

import threading
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, Optional, Sequence, Tuple

import galois
import numpy as np

from .debug import DEBUG
from .util import log

MAX_FIELD_ORDER = 2**20

_ctx_cache: Dict[Tuple[Any, ...], "FieldCtx"] = {}
_ctx_cache_lock = threading.Lock()


def _asc_ints(poly: galois.Poly) -> list[int]:
    return [int(c) for c in poly.coeffs[::-1]]


def _first_irreducible(field: type[galois.FieldArray], degree: int) -> galois.Poly:
    """Smallest monic irreducible polynomial of `degree` over `field`.

    Polynomials are ordered by the integer sum c_i * |field|^i of their
    coefficients, which is the order galois uses for method="min".
    """
    order = field.order
    for low in range(order**degree):
        coeffs = [(low // order**i) % order for i in range(degree)] + [1]
        if coeffs[0] == 0:
            continue
        poly = galois.Poly(coeffs, field=field, order="asc")
        if poly.is_irreducible():
            return poly
    raise RuntimeError(f"no irreducible polynomial of degree {degree} over GF({order})")


def _smallest_root(poly: galois.Poly) -> galois.FieldArray:
    roots = poly.roots()
    if roots.size == 0:
        raise RuntimeError(f"polynomial {poly} has no root in {poly.field.name}")
    return roots[int(np.argmin(roots.view(np.ndarray)))]


class FieldCtx:
    """The tower F_p < F_q < F_{q^m} with fixed g, h, primitive element and working basis."""

    def __init__(
        self,
        p: int,
        e: int,
        m: int,
        g: Optional[galois.Poly] = None,
        h: Optional[galois.Poly] = None,
    ):
        if not galois.is_prime(p):
            raise ValueError(f"p must be prime, got {p}")
        if e < 1:
            raise ValueError(f"e must be at least 1, got {e}")
        if m < 2:
            raise ValueError(f"m must be at least 2, got {m}")
        if p ** (e * m) > MAX_FIELD_ORDER:
            raise ValueError(
                f"field order {p}^{e * m} exceeds the supported maximum {MAX_FIELD_ORDER}"
            )

        self.p = p
        self.e = e
        self.m = m
        self.q = p**e
        self.prime = galois.GF(p)
        self.ext = galois.GF(p ** (e * m))

        if e == 1:
            identity = galois.Poly([1, 0], field=self.prime)
            if g is not None and g != identity:
                raise ValueError("g must be x when e = 1")
            self.g = identity
            self.base = self.prime
            self._embed = self.ext(np.arange(p))
            y_powers = self.ext.Ones(1)
        else:
            self.g = g if g is not None else galois.irreducible_poly(p, e, method="min")
            if self.g.degree != e or not self.g.is_irreducible():
                raise ValueError(f"g = {self.g} is not an irreducible polynomial of degree {e}")
            self.base = galois.GF(self.q, irreducible_poly=self.g)
            y = _smallest_root(galois.Poly(self.ext(self.g.coeffs.view(np.ndarray))))
            y_powers = self.ext.Ones(e)
            for j in range(1, e):
                y_powers[j] = y_powers[j - 1] * y
            digits = (np.arange(self.q)[:, None] // p ** np.arange(e)) % p
            self._embed = (self.ext(digits) * y_powers).sum(axis=-1)

        self.h = h if h is not None else _first_irreducible(self.base, m)
        if self.h.field is not self.base:
            self.h = galois.Poly(self.base(self.h.coeffs.view(np.ndarray)))
        if self.h.degree != m or int(self.h.coeffs[0]) != 1 or not self.h.is_irreducible():
            raise ValueError(f"h = {self.h} is not a monic irreducible polynomial of degree {m}")
        x = _smallest_root(galois.Poly(self._embed[self.h.coeffs.view(np.ndarray)]))

        x_powers = self.ext.Ones(m)
        for i in range(1, m):
            x_powers[i] = x_powers[i - 1] * x
        # tower basis element x^i y^j sits at index i*e + j
        tower = (x_powers[:, None] * y_powers[None, :]).reshape(-1)
        self._to_prime = tower.vector()
        self._fp = type(self._to_prime)
        self._from_prime = np.linalg.inv(self._to_prime)
        self._pp = p ** np.arange(e, dtype=np.int64)
        self._qq = self.q ** np.arange(m, dtype=np.int64)

        embed_ints = self._embed.view(np.ndarray).astype(np.int64)
        self._embed_order = np.argsort(embed_ints)
        self._embed_sorted = embed_ints[self._embed_order]

        self.x = x
        self.alpha = self._first_primitive()
        self.basis = Basis(self, x_powers)

        if DEBUG:
            log(f"built field tower p={p} e={e} m={m} g={self.g} h={self.h}")

    def __repr__(self) -> str:
        return f"FieldCtx(p={self.p}, e={self.e}, m={self.m})"

    @property
    def order(self) -> int:
        return self.ext.order

    @property
    def zero(self) -> galois.FieldArray:
        return self.ext(0)

    @property
    def one(self) -> galois.FieldArray:
        return self.ext(1)

    def _first_primitive(self) -> galois.FieldArray:
        full = self.ext.order - 1
        for n in range(1, self.ext.order):
            candidate = self.from_int(n)
            if int(candidate.multiplicative_order()) == full:
                return candidate
        raise RuntimeError("no primitive element found")

    # coordinates

    def elements(self, values: Any) -> galois.FieldArray:
        """Coerce a FieldArray, an element or a sequence of elements to an array over the big field."""
        if isinstance(values, galois.FieldArray):
            if type(values) is not self.ext:
                raise TypeError(f"expected elements of {self.ext.name}, got {type(values).name}")
            return values
        if isinstance(values, (list, tuple)):
            return self.ext(np.array([int(v) for v in values], dtype=np.int64))
        return self.ext(values)

    def coords(self, x: galois.FieldArray) -> galois.FieldArray:
        """F_q coordinates of x with respect to {1, x, ..., x^(m-1)}; shape x.shape + (m,)."""
        x = self.elements(x)
        shape = x.shape
        if x.size == 0:
            return self.base.Zeros(shape + (self.m,))
        vectors = x.vector().reshape(-1, self.e * self.m)
        residues = (vectors @ self._from_prime).view(np.ndarray).astype(np.int64)
        residues = residues.reshape(shape + (self.m, self.e))
        return self.base((residues * self._pp).sum(axis=-1))

    def from_coords(self, coords: Any) -> galois.FieldArray:
        ints = np.asarray(
            coords.view(np.ndarray) if isinstance(coords, galois.FieldArray) else coords,
            dtype=np.int64,
        )
        if ints.shape[-1:] != (self.m,):
            raise ValueError(f"coordinate vectors must have length {self.m}")
        shape = ints.shape[:-1]
        if ints.size == 0:
            return self.ext.Zeros(shape)
        residues = (ints[..., None] // self._pp) % self.p
        vectors = self._fp(residues.reshape(-1, self.e * self.m)) @ self._to_prime
        return self.ext.Vector(vectors).reshape(shape)

    def embed(self, c: Any) -> galois.FieldArray:
        """Embed F_q values into the big field."""
        ints = c.view(np.ndarray) if isinstance(c, galois.FieldArray) else np.asarray(c)
        return self._embed[ints]

    def to_base(self, x: galois.FieldArray) -> galois.FieldArray:
        """Inverse of embed; x must lie in F_q."""
        vals = np.asarray(self.elements(x).view(np.ndarray), dtype=np.int64)
        idx = np.clip(np.searchsorted(self._embed_sorted, vals), 0, self.q - 1)
        if not np.array_equal(self._embed_sorted[idx], vals):
            raise ValueError("element does not lie in the base field")
        return self.base(self._embed_order[idx])

    def to_int(self, x: galois.FieldArray) -> Any:
        """Integer sum coord_i * q^i; the order behind every deterministic choice."""
        ints = (self.coords(x).view(np.ndarray).astype(np.int64) * self._qq).sum(axis=-1)
        return int(ints) if np.ndim(ints) == 0 else ints

    def from_int(self, n: Any) -> galois.FieldArray:
        ints = np.asarray(n, dtype=np.int64)
        if np.any(ints < 0) or np.any(ints >= self.ext.order):
            raise ValueError("integer out of range for this field")
        return self.from_coords((ints[..., None] // self._qq) % self.q)

    def random(self, shape: Any, rng: np.random.Generator) -> galois.FieldArray:
        return self.ext.Random(shape, seed=rng)

    # maps

    def frobenius(self, a: galois.FieldArray, i: int = 1) -> galois.FieldArray:
        if i < 0:
            raise ValueError("frobenius power must be non-negative")
        return self.elements(a) ** (self.q ** (i % self.m))

    def trace_ext(self, a: galois.FieldArray) -> galois.FieldArray:
        """tr(a) as an element of the big field."""
        a = self.elements(a)
        acc = a.copy()
        power = a
        for _ in range(1, self.m):
            power = power**self.q
            acc = acc + power
        return acc

    def trace(self, a: galois.FieldArray) -> galois.FieldArray:
        return self.to_base(self.trace_ext(a))

    def rank_q(self, elems: Any) -> int:
        elems = self.elements(elems).reshape(-1)
        if elems.size == 0:
            return 0
        return rank(self.coords(elems))

    # serialization

    def to_dict(self) -> dict:
        h = self.base_to_json(self.h.coeffs[::-1])
        return {"p": self.p, "e": self.e, "m": self.m, "g": _asc_ints(self.g), "h": h}

    @classmethod
    def from_dict(cls, data: dict) -> "FieldCtx":
        try:
            p, e, m = int(data["p"]), int(data["e"]), int(data["m"])
            g_asc = [int(c) for c in data["g"]]
            h_asc = data["h"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed field spec: {exc}") from exc
        ctx = make_field_ctx(p, e, m)
        if ctx.to_dict() == {"p": p, "e": e, "m": m, "g": g_asc, "h": h_asc}:
            return ctx
        g = galois.Poly(g_asc, field=galois.GF(p), order="asc")
        base = ctx.base if e == 1 else galois.GF(p**e, irreducible_poly=g)
        h_ints = [int(np.dot(np.asarray(c, dtype=np.int64), p ** np.arange(e))) for c in h_asc]
        h = galois.Poly(h_ints, field=base, order="asc")
        return make_field_ctx(p, e, m, g=g, h=h)

    def base_to_json(self, c: Any) -> Any:
        ints = np.asarray(c.view(np.ndarray) if isinstance(c, galois.FieldArray) else c, dtype=np.int64)
        return ((ints[..., None] // self._pp) % self.p).tolist()

    def base_from_json(self, data: Any) -> galois.FieldArray:
        residues = np.asarray(data, dtype=np.int64)
        if residues.size == 0:
            return self.base.Zeros(residues.shape[:-1] if residues.ndim > 1 else (0,))
        self._check_residues(residues)
        return self.base((residues * self._pp).sum(axis=-1))

    def to_json(self, x: galois.FieldArray) -> Any:
        """Elements as nested [[residue ...] ...] arrays, constant term first."""
        return self.base_to_json(self.coords(x))

    def from_json(self, data: Any) -> galois.FieldArray:
        residues = np.asarray(data, dtype=np.int64)
        if residues.size == 0:
            return self.ext.Zeros(residues.shape[:-2] if residues.ndim > 2 else (0,))
        if residues.shape[-2:] != (self.m, self.e):
            raise ValueError(f"elements must be {self.m} x {self.e} residue arrays")
        self._check_residues(residues)
        return self.from_coords((residues * self._pp).sum(axis=-1))

    def _check_residues(self, residues: np.ndarray) -> None:
        if residues.shape[-1] != self.e:
            raise ValueError(f"base field values need {self.e} residues")
        if np.any(residues < 0) or np.any(residues >= self.p):
            raise ValueError(f"residues must lie in [0, {self.p})")


def make_field_ctx(
    p: int,
    e: int = 1,
    m: int = 2,
    g: Optional[galois.Poly] = None,
    h: Optional[galois.Poly] = None,
) -> FieldCtx:
    """Cached FieldCtx for (p, e, m); g and h default to the smallest irreducibles."""
    key = (
        p,
        e,
        m,
        None if g is None else tuple(_asc_ints(g)),
        None if h is None else tuple(int(c) for c in h.coeffs[::-1].view(np.ndarray)),
    )
    ctx = _ctx_cache.get(key)
    if ctx is not None:
        return ctx
    with _ctx_cache_lock:
        # double-check cache
        ctx = _ctx_cache.get(key)
        if ctx is None:
            ctx = FieldCtx(p, e, m, g=g, h=h)
            _ctx_cache[key] = ctx
    return ctx


def inv(a: galois.FieldArray) -> galois.FieldArray:
    if np.any(a == 0):
        raise ZeroDivisionError("cannot invert zero")
    return a**-1


def power(a: galois.FieldArray, n: int) -> galois.FieldArray:
    if n < 0:
        return inv(a) ** (-n)
    return a**n


@dataclass(frozen=True, eq=False)
class Basis:
    """Ordered F_q-basis of F_{q^m}; `dual_of` is set on trace-dual bases."""

    ctx: FieldCtx
    elems: galois.FieldArray
    dual_of: Optional["Basis"] = None

    def __post_init__(self):
        elems = self.ctx.elements(self.elems).reshape(-1)
        object.__setattr__(self, "elems", elems)
        if elems.size != self.ctx.m or self.ctx.rank_q(elems) != self.ctx.m:
            raise ValueError(f"a basis needs {self.ctx.m} F_q-independent elements")

    def __len__(self) -> int:
        return self.ctx.m

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Basis):
            return NotImplemented
        return self.ctx is other.ctx and np.array_equal(self.elems, other.elems)

    __hash__ = None  # type: ignore[assignment]

    @cached_property
    def dual(self) -> "Basis":
        if self.dual_of is not None:
            return self.dual_of
        ctx = self.ctx
        gram = ctx.trace(self.elems[:, None] * self.elems[None, :])
        elems = ctx.embed(np.linalg.inv(gram)) @ self.elems
        return Basis(ctx, elems, dual_of=self)

    def coords(self, x: galois.FieldArray) -> galois.FieldArray:
        """Coordinates with respect to this basis: x_i = tr(x b'_i)."""
        x = self.ctx.elements(x)
        return self.ctx.trace(x[..., None] * self.dual.elems)


def dual_basis(S: Basis) -> Basis:
    return S.dual


def mult_matrix(u: galois.FieldArray, S: Basis) -> galois.FieldArray:
    """[u]_S with entries tr(b'_i b_j u): [u]_S @ coords(x) = coords(u x)."""
    u = S.ctx.elements(u)
    return S.ctx.trace(S.dual.elems[:, None] * S.elems[None, :] * u)


def _check_subset(B: Sequence[int], m: int) -> list[int]:
    idx = [int(b) for b in B]
    if len(set(idx)) != len(idx) or any(b < 0 or b >= m for b in idx):
        raise ValueError("B must be a subset of the basis positions")
    return idx


def row_block(u: galois.FieldArray, B: Sequence[int], S: Basis) -> galois.FieldArray:
    """[u]_{B,S}: the rows of [u]_S at the positions B."""
    return mult_matrix(u, S)[_check_subset(B, S.ctx.m), :]


def col_block(u: galois.FieldArray, B: Sequence[int], S: Basis) -> galois.FieldArray:
    return mult_matrix(u, S)[:, _check_subset(B, S.ctx.m)]


def relative_trace(ctx: FieldCtx, x: galois.FieldArray, d: int) -> galois.FieldArray:
    """Trace from F_{q^m} down to F_{q^d}."""
    if d < 1 or ctx.m % d:
        raise ValueError("d must divide m")
    x = ctx.elements(x)
    acc = x.copy()
    power_ = x
    for _ in range(1, ctx.m // d):
        power_ = power_ ** (ctx.q**d)
        acc = acc + power_
    return acc


def relative_dual_basis(ctx: FieldCtx, elems: galois.FieldArray, d: int) -> galois.FieldArray:
    """Dual of an F_{q^d}-basis of F_{q^m} under the relative trace."""
    elems = ctx.elements(elems).reshape(-1)
    if elems.size != ctx.m // d:
        raise ValueError(f"an F_q^{d}-basis needs {ctx.m // d} elements")
    gram = relative_trace(ctx, elems[:, None] * elems[None, :], d)
    return np.linalg.inv(gram) @ elems


class LinearizedPoly:
    """Linearized polynomial a_0 X + a_1 X^q + ... + a_k X^(q^k) over F_{q^m}."""

    def __init__(self, ctx: FieldCtx, coeffs: Any):
        self.ctx = ctx
        self.coeffs = ctx.elements(coeffs).reshape(-1)
        if self.coeffs.size == 0:
            self.coeffs = ctx.ext.Zeros(1)

    def __repr__(self) -> str:
        return f"LinearizedPoly({self.coeffs.tolist()})"

    @property
    def q_degree(self) -> int:
        nonzero = np.flatnonzero(self.coeffs.view(np.ndarray))
        return int(nonzero[-1]) if nonzero.size else -1

    @property
    def linear_coeff(self) -> galois.FieldArray:
        return self.coeffs[0]

    def __call__(self, x: Any) -> galois.FieldArray:
        x = self.ctx.elements(x)
        acc = self.coeffs[0] * x
        power_ = x
        for a in self.coeffs[1:]:
            power_ = power_**self.ctx.q
            acc = acc + a * power_
        return acc

    def to_poly(self) -> galois.Poly:
        degrees = [self.ctx.q**i for i in range(self.coeffs.size)]
        return galois.Poly.Degrees(degrees, coeffs=self.coeffs, field=self.ctx.ext)


# exact linear algebra over any galois field


def rref(mat: galois.FieldArray) -> Tuple[galois.FieldArray, list[int]]:
    """Reduced row echelon form and its pivot columns."""
    if mat.shape[0] == 0 or mat.shape[1] == 0:
        return mat.copy(), []
    reduced = mat.row_reduce()
    pivots = [int(np.argmax(row != 0)) for row in reduced if np.any(row)]
    return reduced, pivots


def rank(mat: galois.FieldArray) -> int:
    return len(rref(mat)[1])


def kernel(mat: galois.FieldArray) -> galois.FieldArray:
    """Rows spanning {v : mat @ v = 0}."""
    field = type(mat)
    cols = mat.shape[1]
    reduced, pivots = rref(mat)
    free = [c for c in range(cols) if c not in pivots]
    basis = field.Zeros((len(free), cols))
    for t, f in enumerate(free):
        basis[t, f] = 1
        for k, p in enumerate(pivots):
            basis[t, p] = -reduced[k, f]
    return basis


def solve(a: galois.FieldArray, b: galois.FieldArray) -> Optional[galois.FieldArray]:
    """Some X with a @ X = b, or None when the system is inconsistent."""
    field = type(a)
    n = a.shape[1]
    reduced, pivots = rref(np.hstack((a, b)))
    if any(p >= n for p in pivots):
        return None
    x = field.Zeros((n, b.shape[1]))
    for k, p in enumerate(pivots):
        x[p, :] = reduced[k, n:]
    return x
