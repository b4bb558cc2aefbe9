"""F_q-linear subspaces of F_{q^m} and the full-rank vectors Omega."""

import itertools
from dataclasses import dataclass
from typing import Any, Iterator, Optional

import galois
import numpy as np

from .debug import DEBUG
from .gfield import FieldCtx, kernel, rank, rref
from .util import RngLike, as_rng, log

ENUMERATION_GUARD = 2**20


class GuardExceeded(ValueError):
    """An enumeration would exceed its size guard."""


def check_guard(count: int, guard: int, what: str) -> None:
    if count > guard:
        raise GuardExceeded(f"{what} needs {count} items, guard is {guard}")


@dataclass(frozen=True, eq=False)
class Subspace:
    """F_q-subspace held by its reduced row-echelon basis.

    The basis is reduced on coordinates with respect to the polynomial basis,
    so two Subspace objects are equal exactly when their bases are.
    """

    ctx: FieldCtx
    basis: galois.FieldArray
    subfield_degree: Optional[int] = None

    def __post_init__(self):
        a = self.subfield_degree
        if a is not None and (a < 1 or self.ctx.m % a or self.dim % a):
            raise ValueError(f"subfield degree {a} must divide m={self.ctx.m} and dim={self.dim}")
        if a is not None and a > 1 and not is_subfield_linear(self, a):
            raise ValueError(f"subspace is not closed under multiplication by F_q^{a}")

    @property
    def dim(self) -> int:
        return int(self.basis.size)

    @property
    def key(self) -> tuple[int, ...]:
        return tuple(int(v) for v in np.atleast_1d(self.ctx.to_int(self.basis)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Subspace):
            return NotImplemented
        return self.ctx is other.ctx and self.key == other.key

    def __hash__(self) -> int:
        return hash((self.ctx.p, self.ctx.e, self.ctx.m, self.key))

    def __repr__(self) -> str:
        return f"Subspace(dim={self.dim}, basis={self.basis.tolist()})"

    def contains(self, x: Any) -> bool:
        return contains(self, x)

    def elements(self, guard: int = ENUMERATION_GUARD) -> galois.FieldArray:
        return enumerate_subspace(self, guard=guard)

    def to_dict(self) -> dict:
        data: dict[str, Any] = {"dim": self.dim}
        if self.subfield_degree is not None:
            data["subfield_degree"] = self.subfield_degree
        data["basis"] = self.ctx.to_json(self.basis)
        return data

    @classmethod
    def from_dict(cls, ctx: FieldCtx, data: dict) -> "Subspace":
        try:
            gens = ctx.from_json(data["basis"])
            dim = int(data["dim"])
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed subspace: {exc}") from exc
        space = span(ctx, gens, subfield_degree=data.get("subfield_degree"))
        if space.dim != dim:
            raise ValueError(f"subspace basis spans dim {space.dim}, expected {dim}")
        return space


def span(ctx: FieldCtx, gens: Any, subfield_degree: Optional[int] = None) -> Subspace:
    gens = ctx.elements(gens).reshape(-1)
    if gens.size == 0:
        return Subspace(ctx, ctx.ext.Zeros(0), subfield_degree)
    reduced, pivots = rref(ctx.coords(gens))
    return Subspace(ctx, ctx.from_coords(reduced[: len(pivots)]), subfield_degree)


def contains(U: Subspace, x: Any) -> bool:
    x = U.ctx.elements(x).reshape(-1)
    if not np.any(x):
        return True
    stacked = np.concatenate((U.basis, x))
    return rank(U.ctx.coords(stacked)) == U.dim


def enumerate_subspace(U: Subspace, guard: int = ENUMERATION_GUARD) -> galois.FieldArray:
    """All q^dim elements, lexicographic in basis coordinates (first coordinate most significant)."""
    ctx = U.ctx
    count = ctx.q**U.dim
    check_guard(count, guard, "subspace enumeration")
    if U.dim == 0:
        return ctx.ext.Zeros(1)
    weights = ctx.q ** np.arange(U.dim - 1, -1, -1, dtype=np.int64)
    combos = (np.arange(count, dtype=np.int64)[:, None] // weights) % ctx.q
    return ctx.embed(combos) @ U.basis


def orthogonal_complement(V: Subspace) -> Subspace:
    """V^perp under the trace form tr(v x)."""
    ctx = V.ctx
    if V.dim == 0:
        return span(ctx, ctx.basis.elems, V.subfield_degree)
    forms = ctx.trace(V.basis[:, None] * ctx.basis.elems[None, :])
    return span(ctx, ctx.from_coords(kernel(forms)), V.subfield_degree)


def frobenius_image(U: Subspace, i: int) -> Subspace:
    return span(U.ctx, U.ctx.frobenius(U.basis, i), U.subfield_degree)


def subfield_basis(ctx: FieldCtx, a: int) -> galois.FieldArray:
    """F_q-basis of F_{q^a}, the fixed field of x -> x^(q^a)."""
    if a < 1 or ctx.m % a:
        raise ValueError(f"a must divide m, got a={a} m={ctx.m}")
    powers = ctx.basis.elems
    images = ctx.coords(ctx.frobenius(powers, a) - powers)
    fixed = span(ctx, ctx.from_coords(kernel(images.T)))
    if fixed.dim != a:
        raise RuntimeError(f"fixed field of sigma^{a} has dim {fixed.dim}")
    return fixed.basis


def subfield(ctx: FieldCtx, a: int) -> Subspace:
    return Subspace(ctx, subfield_basis(ctx, a), subfield_degree=a)


def is_subfield_linear(U: Subspace, a: int) -> bool:
    if U.ctx.m % a or U.dim % a:
        return False
    beta = subfield_basis(U.ctx, a)
    products = (beta[:, None] * U.basis[None, :]).reshape(-1)
    stacked = np.concatenate((U.basis, products))
    return rank(U.ctx.coords(stacked)) == U.dim


def random_subspace(ctx: FieldCtx, dim: int, rng: RngLike = None) -> Subspace:
    if not 0 <= dim <= ctx.m:
        raise ValueError(f"dim must lie in [0, {ctx.m}], got {dim}")
    rng = as_rng(rng)
    while ctx.rank_q(gens := ctx.random(dim, rng)) != dim:
        pass
    return span(ctx, gens)


def subfield_subspace(ctx: FieldCtx, a: int, dim_over_subfield: int, rng: RngLike = None) -> Subspace:
    """F_{q^a}-span of random elements, of F_{q^a}-dimension `dim_over_subfield`."""
    if a < 1 or ctx.m % a:
        raise ValueError(f"a must divide m, got a={a} m={ctx.m}")
    target = a * dim_over_subfield
    if not 0 <= target <= ctx.m:
        raise ValueError(f"F_q-dimension {target} does not fit in m={ctx.m}")
    rng = as_rng(rng)
    beta = subfield_basis(ctx, a)
    attempts = 0
    while True:
        attempts += 1
        gens = ctx.random(dim_over_subfield, rng)
        products = (beta[:, None] * gens[None, :]).reshape(-1)
        if ctx.rank_q(products) == target:
            break
    if DEBUG:
        log(f"sampled F_q^{a}-subspace of dim {target} after {attempts} attempts")
    return span(ctx, products, subfield_degree=a)


@dataclass(frozen=True, eq=False)
class OmegaVector:
    """Vector of F_q-independent elements of F_{q^m}."""

    entries: galois.FieldArray
    attempts: int = 1


def sample_omega(ctx: FieldCtx, n: int, rng: RngLike = None) -> OmegaVector:
    """Uniform draw from Omega (length n) by rejection."""
    if not 1 <= n <= ctx.m:
        raise ValueError(f"vector length must lie in [1, {ctx.m}], got {n}")
    rng = as_rng(rng)
    attempts = 1
    while ctx.rank_q(entries := ctx.random(n, rng)) != n:
        attempts += 1
    if DEBUG and attempts > 1:
        log(f"omega sample accepted after {attempts} attempts")
    return OmegaVector(entries, attempts)


def omega_size(q: int, m: int, n: int) -> int:
    size = 1
    for j in range(n):
        size *= q**m - q**j
    return size


def gaussian_binomial(m: int, k: int, q: int) -> int:
    num, den = 1, 1
    for i in range(k):
        num *= q ** (m - i) - 1
        den *= q ** (i + 1) - 1
    return num // den


def iter_subspaces(ctx: FieldCtx, dim: int, guard: int = ENUMERATION_GUARD) -> Iterator[Subspace]:
    """Every subspace of dimension `dim`, one per reduced row-echelon pattern."""
    if not 0 <= dim <= ctx.m:
        raise ValueError(f"dim must lie in [0, {ctx.m}], got {dim}")
    q, m = ctx.q, ctx.m
    check_guard(gaussian_binomial(m, dim, q), guard, "subspace census")
    for pivots in itertools.combinations(range(m), dim):
        free = [
            (row, col)
            for row, p in enumerate(pivots)
            for col in range(p + 1, m)
            if col not in pivots
        ]
        for values in itertools.product(range(q), repeat=len(free)):
            mat = np.zeros((dim, m), dtype=np.int64)
            for row, p in enumerate(pivots):
                mat[row, p] = 1
            for (row, col), v in zip(free, values):
                mat[row, col] = v
            yield span(ctx, ctx.from_coords(mat))
