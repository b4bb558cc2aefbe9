import itertools

import numpy as np
import pytest

from rs_subspace_repair.gfield import (
    Basis,
    FieldCtx,
    LinearizedPoly,
    inv,
    kernel,
    make_field_ctx,
    mult_matrix,
    power,
    rank,
    relative_dual_basis,
    relative_trace,
    row_block,
    solve,
)
from rs_subspace_repair.goodpair import powers_of_alpha


# tower construction


def test_gf256_uses_smallest_irreducible(gf256):
    # x^8 + x^4 + x^3 + x + 1
    assert [int(c) for c in gf256.h.coeffs] == [1, 0, 0, 0, 1, 1, 0, 1, 1]


def test_ctx_cache_returns_same_instance():
    a = make_field_ctx(2, 1, 4)
    b = make_field_ctx(2, 1, 4)
    assert a is b, "Expected cached FieldCtx"


def test_rejects_bad_parameters():
    with pytest.raises(ValueError):
        FieldCtx(4, 1, 2)
    with pytest.raises(ValueError):
        FieldCtx(2, 1, 1)
    with pytest.raises(ValueError):
        FieldCtx(2, 1, 21)


def test_gf4_root_and_primitive(gf4):
    x = gf4.x
    assert x**2 == x + 1, "x must satisfy x^2 = x + 1"
    assert int(gf4.alpha.multiplicative_order()) == 3


def test_extension_over_gf4(gf16_over_gf4):
    ctx = gf16_over_gf4
    assert ctx.q == 4 and ctx.order == 16
    assert ctx.g.degree == 2 and ctx.h.degree == 2
    # the embedded F_q is closed under x -> x^q
    emb = ctx.embed(np.arange(4))
    assert np.array_equal(emb**4, emb)


def test_tower_over_gf8():
    ctx = make_field_ctx(2, 3, 5)
    assert (ctx.q, ctx.order) == (8, 2**15)
    assert ctx.h.degree == 5 and ctx.g.degree == 3


# coordinates


@pytest.mark.parametrize("args", [(2, 1, 4), (3, 1, 4), (2, 2, 2), (2, 1, 8)])
def test_coords_round_trip(args, rng):
    ctx = make_field_ctx(*args)
    xs = ctx.random(50, rng)
    assert np.array_equal(ctx.from_coords(ctx.coords(xs)), xs)


def test_coords_are_linear(gf81, rng):
    ctx = gf81
    a, b = ctx.random(20, rng), ctx.random(20, rng)
    assert np.array_equal(ctx.coords(a + b), ctx.coords(a) + ctx.coords(b))


def test_basis_coordinates(gf16):
    ctx = gf16
    c = ctx.coords(ctx.basis.elems)
    assert np.array_equal(c, ctx.base.Identity(4))


def test_int_order_round_trip(gf16_over_gf4):
    ctx = gf16_over_gf4
    values = np.arange(ctx.order)
    assert np.array_equal(ctx.to_int(ctx.from_int(values)), values)


def test_json_round_trip(gf16_over_gf4, rng):
    ctx = gf16_over_gf4
    xs = ctx.random(7, rng)
    data = ctx.to_json(xs)
    assert np.asarray(data).shape == (7, 2, 2)
    assert np.array_equal(ctx.from_json(data), xs)


def test_field_dict_round_trip(gf256):
    assert FieldCtx.from_dict(gf256.to_dict()) is gf256


def test_from_json_rejects_bad_residues(gf16):
    with pytest.raises(ValueError):
        gf16.from_json([[[2], [0], [0], [0]]])


# trace and dual bases


@pytest.mark.parametrize("args", [(2, 1, 2), (2, 1, 4), (3, 1, 4), (2, 2, 2)])
def test_trace_lands_in_base_field(args, rng):
    ctx = make_field_ctx(*args)
    xs = ctx.random(30, rng)
    t = ctx.trace_ext(xs)
    assert np.array_equal(t**ctx.q, t)
    assert type(ctx.trace(xs)) is ctx.base


def test_gf4_trace_values(gf4):
    assert int(gf4.trace(gf4.one)) == 0
    assert int(gf4.trace(gf4.x)) == 1


@pytest.mark.parametrize("args", [(2, 1, 4), (3, 1, 4), (2, 2, 2), (2, 1, 8)])
def test_dual_basis_gram_identity(args):
    ctx = make_field_ctx(*args)
    S = ctx.basis
    gram = ctx.trace(S.dual.elems[:, None] * S.elems[None, :])
    assert np.array_equal(gram, ctx.base.Identity(ctx.m))
    assert S.dual.dual is S


def test_basis_coords_expand(gf64, rng):
    ctx = gf64
    S = Basis(ctx, powers_of_alpha(ctx, 6))
    xs = ctx.random(10, rng)
    back = ctx.embed(S.coords(xs)) @ S.elems
    assert np.array_equal(back, xs)


def test_basis_rejects_dependent_elements(gf16):
    with pytest.raises(ValueError):
        Basis(gf16, gf16.ext([1, 1, 2, 4]))


def test_mult_matrix_composes(gf16, rng):
    ctx = gf16
    S = Basis(ctx, powers_of_alpha(ctx, 4))
    for _ in range(100):
        u, w = ctx.random(2, rng)
        assert np.array_equal(mult_matrix(u, S) @ mult_matrix(w, S), mult_matrix(u * w, S))


def test_mult_matrix_acts_on_coordinates(gf81, rng):
    ctx = gf81
    S = ctx.basis
    u, x = ctx.random(2, rng)
    assert np.array_equal(mult_matrix(u, S) @ S.coords(x), S.coords(u * x))


def test_row_block_selects_rows(gf16):
    ctx = gf16
    block = row_block(ctx.one, [2, 3], ctx.basis)
    assert np.array_equal(block, ctx.base.Identity(4)[2:])
    with pytest.raises(ValueError):
        row_block(ctx.one, [1, 1], ctx.basis)


def test_relative_dual_basis(gf256):
    ctx = gf256
    b = ctx.ext.Ones(2)
    b[1] = ctx.alpha
    dual = relative_dual_basis(ctx, b, 4)
    gram = relative_trace(ctx, b[:, None] * dual[None, :], 4)
    assert np.array_equal(gram, ctx.ext.Identity(2))


# arithmetic helpers


def test_inverse_of_zero_raises(gf16):
    with pytest.raises(ZeroDivisionError):
        inv(gf16.ext([1, 0]))


def test_negative_power(gf16):
    a = gf16.alpha
    assert power(a, -1) * a == 1


def test_linearized_poly_is_linear(gf16, rng):
    ctx = gf16
    L = LinearizedPoly(ctx, ctx.random(3, rng))
    a, b = ctx.random(2, rng)
    assert L(a + b) == L(a) + L(b)
    poly = L.to_poly()
    assert poly(a) == L(a)


def test_kernel_and_solve(gf16, rng):
    ctx = gf16
    mat = ctx.ext.Random((3, 5), seed=rng)
    null = kernel(mat)
    assert null.shape[0] == 5 - rank(mat)
    assert not np.any(mat @ null.T)
    x = ctx.ext.Random((5, 2), seed=rng)
    sol = solve(mat, mat @ x)
    assert sol is not None and np.array_equal(mat @ sol, mat @ x)


def test_solve_inconsistent(gf4):
    F = gf4.base
    a = F([[1, 0], [1, 0]])
    b = F([[0], [1]])
    assert solve(a, b) is None


# matrix representations


def test_mult_matrix_transpose_is_dual(gf16, rng):
    ctx = gf16
    S = Basis(ctx, powers_of_alpha(ctx, 4))
    for u in ctx.random(20, rng):
        assert np.array_equal(mult_matrix(u, S).T, mult_matrix(u, S.dual))


def test_row_block_lemma(gf16, rng):
    ctx = gf16
    S = ctx.basis
    B = [2, 3]
    for _ in range(100):
        u = ctx.random((), rng)
        w_vec = ctx.base.Random(2, seed=rng)
        w = ctx.embed(w_vec) @ S.dual.elems[B]
        assert np.array_equal(w_vec @ row_block(u, B, S), S.dual.coords(u * w))


def test_rank_q_examples(gf4, gf16):
    x = gf4.x
    assert gf4.rank_q([]) == 0
    assert gf4.rank_q([gf4.one, x, x + 1]) == 2
    assert gf16.rank_q(gf16.basis.elems) == 4


def test_rank_q_matches_span_size(gf16):
    ctx = gf16
    elems = ctx.ext.elements
    for size in (1, 2, 3):
        for idx in itertools.combinations(range(16), size):
            chosen = elems[list(idx)]
            combos = itertools.product(range(2), repeat=size)
            spanned = {int((ctx.ext(list(c)) * chosen).sum()) for c in combos}
            assert 2 ** ctx.rank_q(chosen) == len(spanned)
