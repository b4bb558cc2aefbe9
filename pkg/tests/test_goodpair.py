import itertools
import json
import math
from fractions import Fraction

import numpy as np
import pytest

from rs_subspace_repair.gfield import make_field_ctx, rank
from rs_subspace_repair.goodpair import (
    Feasibility,
    GoodPair,
    InfeasibleParams,
    SchemeParams,
    SearchFailure,
    annihilator_poly,
    bad_of_u,
    bad_set,
    bad_u_kernel,
    build_M,
    complete_basis,
    corollary_bound,
    counterexample_pair,
    duality_transform,
    explicit_pair_mrm22,
    feasible,
    image_poly,
    is_bad_vector,
    is_good,
    is_weakly_good,
    lemma6_bound,
    prob_bound,
    search_good_pair,
    t_matrix,
)
from rs_subspace_repair.subspace import (
    frobenius_image,
    iter_subspaces,
    orthogonal_complement,
    random_subspace,
    sample_omega,
    span,
    subfield,
    subfield_subspace,
)
from rs_subspace_repair.util import trial_rng


def _random_invertible(F, n, rng):
    while True:
        mat = F.Random((n, n), seed=rng)
        if rank(mat) == n:
            return mat


def _good_frequency(U, r, s, samples, seed):
    ctx = U.ctx
    hits = 0
    for t in range(samples):
        omega = sample_omega(ctx, ctx.m - r, trial_rng(seed, t))
        V = orthogonal_complement(span(ctx, omega.entries))
        hits += is_good(U, V, s).good
    return hits / samples


# params


def test_params_validation():
    assert SchemeParams(2, 4, 2, 2, 2).rate_ok
    assert not SchemeParams(2, 4, 2, 2, 2).code_ok
    with pytest.raises(ValueError):
        SchemeParams(2, 4, 5, 1, 2)
    with pytest.raises(ValueError):
        SchemeParams(2, 4, 2, 0, 2)
    with pytest.raises(ValueError):
        SchemeParams(2, 4, 2, 1, 5)


# T matrices


def test_t_matrix_of_zeros(gf16):
    T = t_matrix(gf16, gf16.ext.Zeros(3), 2)
    assert T.shape == (2, 3) and not np.any(T)


def test_t_matrix_gf4(gf4):
    x = gf4.x
    T = t_matrix(gf4, [gf4.one, x], 1)
    assert np.array_equal(T, gf4.ext([[1, int(x + 1)]]))


def test_t_matrix_rank_of_basis(gf16):
    T = t_matrix(gf16, gf16.basis.elems, 2)
    assert rank(T) == 2, f"Expected 2, got {rank(T)}"


@pytest.mark.parametrize("field", ["gf64", "gf81"])
def test_t_matrix_rank_formula(field, request):
    ctx = request.getfixturevalue(field)
    rng = np.random.default_rng(11)
    for _ in range(100):
        ell = int(rng.integers(1, 5))
        s = int(rng.integers(1, 5))
        xs = ctx.random(ell, rng)
        if ell > 1 and rng.random() < 0.5:
            # repeat an entry to force an F_q-dependency
            xs[-1] = xs[0]
        rho = ctx.rank_q(xs)
        got = rank(t_matrix(ctx, xs, s))
        assert got == min(s, rho), f"Expected {min(s, rho)}, got {got}"


# goodness matrix


def test_build_M_dimensions(gf256, rng):
    ctx = gf256
    U = random_subspace(ctx, 4, rng)
    V = random_subspace(ctx, 4, rng)
    gm = build_M(U, V, 2)
    assert gm.M.shape == (16, 24)
    assert gm.M1.shape == (16, 8) and gm.M2.shape == (16, 16)


def test_build_M_identity_block(gf16):
    ctx = gf16
    U = span(ctx, [ctx.one])
    V = span(ctx, ctx.basis.elems[:2])
    gm = build_M(U, V, 1)
    assert np.array_equal(gm.M1, ctx.base.Identity(4)[2:])


def test_full_V_is_good(gf16, rng):
    ctx = gf16
    U = random_subspace(ctx, 2, rng)
    V = span(ctx, ctx.basis.elems)
    verdict = is_good(U, V, 1)
    assert verdict.good and verdict.rows == 0
    assert is_weakly_good(U, V, 1).weak_ok


def test_complete_basis_keeps_prefix(gf16, rng):
    ctx = gf16
    V = random_subspace(ctx, 2, rng)
    S = complete_basis(ctx, V.basis)
    assert np.array_equal(S.elems[:2], V.basis)


@pytest.mark.parametrize("m, r, d, s", [(6, 3, 4, 2), (4, 2, 3, 2)])
def test_explicit_pairs_are_good(m, r, d, s):
    ctx = make_field_ctx(2, 1, m)
    pair = explicit_pair_mrm22(ctx, d, r, s)
    assert pair.V.dim == r and pair.U.dim == d
    assert pair.recheck()


def test_explicit_pair_needs_divisibility(gf32):
    with pytest.raises(ValueError):
        explicit_pair_mrm22(gf32, 2, 2, 2)


def test_goodness_ignores_u_basis(gf32):
    ctx = gf32
    rng = np.random.default_rng(3)
    U = random_subspace(ctx, 2, rng)
    V = random_subspace(ctx, 3, rng)
    base = is_good(U, V, 1)
    for _ in range(10):
        A = _random_invertible(ctx.base, 2, rng)
        other = ctx.embed(A) @ U.basis
        verdict = is_good(U, V, 1, u_basis=other)
        assert verdict.rank_m2 == base.rank_m2 and verdict.good == base.good


def test_goodness_ignores_completion(gf32):
    ctx = gf32
    rng = np.random.default_rng(4)
    U = random_subspace(ctx, 2, rng)
    V = random_subspace(ctx, 3, rng)
    base = is_good(U, V, 1)
    for _ in range(5):
        candidates = np.concatenate((ctx.random(6, rng), ctx.basis.elems))
        verdict = is_good(U, V, 1, candidates=candidates)
        assert verdict.rank_m2 == base.rank_m2


def test_goodness_conditions_agree(gf32):
    ctx = gf32
    s = 1
    rng = np.random.default_rng(5)
    for _ in range(50):
        U = random_subspace(ctx, 2, rng)
        V = random_subspace(ctx, 3, rng)
        Vp = orthogonal_complement(V)
        good = is_good(U, V, s).good

        T = t_matrix(ctx, U.basis, s)
        vp = Vp.elements()
        v_kernel = any(
            not np.any(T @ vp[list(idx)])
            for idx in itertools.product(range(vp.size), repeat=U.dim)
            if any(idx)
        )
        u = U.elements()
        w_kernel = any(
            not np.any(t_matrix(ctx, u[list(idx)], s) @ Vp.basis)
            for idx in itertools.product(range(u.size), repeat=Vp.dim)
            if any(idx)
        )
        assert good == (not v_kernel) == (not w_kernel)


def test_weak_goodness_by_enumeration(gf16):
    ctx = gf16
    s = 1
    rng = np.random.default_rng(6)
    for _ in range(30):
        U = random_subspace(ctx, 2, rng)
        V = random_subspace(ctx, 2, rng)
        vp = orthogonal_complement(V).elements()
        T = t_matrix(ctx, U.basis, s)
        weak = True
        for idx in itertools.product(range(vp.size), repeat=2):
            v = vp[list(idx)]
            if not np.any(T @ v) and (U.basis * v).sum() != 0:
                weak = False
        assert is_weakly_good(U, V, s).weak_ok == weak


def test_good_implies_weakly_good(gf32):
    ctx = gf32
    rng = np.random.default_rng(8)
    for _ in range(100):
        U = random_subspace(ctx, 2, rng)
        V = random_subspace(ctx, 3, rng)
        if is_good(U, V, 1).good:
            assert is_weakly_good(U, V, 1).weak_ok


def test_large_r_is_always_weakly_good(gf16):
    ctx = gf16
    rng = np.random.default_rng(9)
    for _ in range(20):
        U = random_subspace(ctx, 3, rng)
        V = random_subspace(ctx, 2, rng)
        assert is_weakly_good(U, V, 2).weak_ok


def test_failure_witness_satisfies_equations(gf16):
    ctx = gf16
    U = span(ctx, ctx.basis.elems[1:3])
    ce = counterexample_pair(U, 2, 1)
    verdict = is_good(U, ce.V, 1)
    assert not verdict.good
    v = verdict.witness_v
    assert np.any(v)
    assert not np.any(t_matrix(ctx, U.basis, 1) @ v)
    Vp = orthogonal_complement(ce.V)
    assert all(Vp.contains(x) for x in v)

    weak = is_weakly_good(U, ce.V, 1)
    assert not weak.weak_ok
    assert (U.basis * weak.witness_v).sum() != 0


# counterexample


def test_counterexample_for_every_plane(gf16):
    ctx = gf16
    for U in iter_subspaces(ctx, 2):
        ce = counterexample_pair(U, 2, 1)
        assert ce.V.dim == 2
        assert ce.pairing != 0
        assert ctx.rank_q(ce.b[:2]) == 2
        assert not np.any(t_matrix(ctx, ce.w, 1) @ ce.b)
        assert not is_weakly_good(U, ce.V, 1).weak_ok


def test_counterexample_hypotheses(gf16):
    U = span(gf16, gf16.basis.elems[:2])
    with pytest.raises(ValueError):
        counterexample_pair(U, 3, 1)


# feasibility and bounds


def test_feasible_classes():
    assert feasible(SchemeParams(3, 4, 2, 1, 2)).verdict is Feasibility.OK_Q3
    assert feasible(SchemeParams(2, 5, 2, 1, 3)).verdict is Feasibility.OK_Q2_SLACK
    assert feasible(SchemeParams(2, 8, 4, 2, 4), a=4).verdict is Feasibility.OK_Q2_SUBFIELD
    assert feasible(SchemeParams(2, 8, 4, 2, 4)).verdict is Feasibility.INFEASIBLE
    assert feasible(SchemeParams(2, 4, 4, 3, 1)).verdict is Feasibility.INFEASIBLE
    assert feasible(SchemeParams(2, 4, 2, 3, 1)).verdict is Feasibility.INFEASIBLE
    with pytest.raises(ValueError):
        feasible(SchemeParams(2, 8, 4, 2, 4), a=3)


def test_probability_bounds():
    assert prob_bound(SchemeParams(3, 4, 4, 3, 1)) == Fraction(2, 5)
    assert prob_bound(SchemeParams(3, 4, 2, 1, 2)) == Fraction(8, 17)
    assert prob_bound(SchemeParams(2, 5, 2, 1, 3)) == Fraction(3, 7)
    assert prob_bound(SchemeParams(2, 4, 2, 1, 2), a=2) == Fraction(5, 9)
    assert prob_bound(SchemeParams(2, 8, 4, 2, 4), a=4) == Fraction(209, 225)
    assert corollary_bound(Feasibility.OK_Q3) == Fraction(2, 5)
    assert corollary_bound(Feasibility.OK_Q2_SLACK) == Fraction(1, 3)
    assert corollary_bound(Feasibility.INFEASIBLE) is None


def test_bounds_dominate_corollary():
    for params, a in [
        (SchemeParams(3, 4, 2, 1, 2), 1),
        (SchemeParams(3, 6, 4, 2, 3), 1),
        (SchemeParams(2, 5, 2, 1, 3), 1),
        (SchemeParams(2, 6, 3, 2, 3), 1),
        (SchemeParams(2, 15, 6, 4, 5), 3),
        (SchemeParams(2, 8, 4, 2, 4), 4),
    ]:
        report = feasible(params, a)
        assert report.ok
        assert report.bound >= corollary_bound(report.verdict)


def _threshold(p, n):
    return p - 3 * math.sqrt(p * (1 - p) / n)


def test_monte_carlo_q3(gf81):
    U = random_subspace(gf81, 2, np.random.default_rng(20))
    freq = _good_frequency(U, 2, 1, 300, seed=21)
    assert freq >= _threshold(0.4, 300), f"frequency {freq} below bound"


def test_monte_carlo_q2_slack(gf32):
    U = random_subspace(gf32, 2, np.random.default_rng(22))
    freq = _good_frequency(U, 3, 1, 300, seed=23)
    assert freq >= _threshold(1 / 3, 300), f"frequency {freq} below bound"


def test_monte_carlo_q2_subfield(gf16):
    U = subfield_subspace(gf16, 2, 1, np.random.default_rng(24))
    freq = _good_frequency(U, 2, 1, 300, seed=25)
    assert freq >= _threshold(1 / 3, 300), f"frequency {freq} below bound"


# search


def test_search_finds_pair(gf81):
    U = random_subspace(gf81, 2, np.random.default_rng(30))
    params = SchemeParams(3, 4, 2, 1, 2)
    pair = search_good_pair(U, params, seed=31)
    assert isinstance(pair, GoodPair)
    assert pair.recheck() and pair.trials >= 1
    again = search_good_pair(U, params, seed=31)
    assert again.V == pair.V and again.trials == pair.trials


def test_search_rejects_infeasible(gf16):
    U = span(gf16, gf16.basis.elems)
    with pytest.raises(InfeasibleParams):
        search_good_pair(U, SchemeParams(2, 4, 4, 3, 1))


def test_search_reports_failure(gf81):
    U = random_subspace(gf81, 2, np.random.default_rng(32))
    result = search_good_pair(U, SchemeParams(3, 4, 2, 1, 2), trials=0)
    assert isinstance(result, SearchFailure)
    assert result.bound == Fraction(8, 17)


def test_search_checks_params(gf16):
    U = span(gf16, gf16.basis.elems[:2])
    with pytest.raises(ValueError):
        search_good_pair(U, SchemeParams(2, 4, 3, 1, 2))


def test_pair_round_trip(gf81):
    U = random_subspace(gf81, 2, np.random.default_rng(33))
    pair = search_good_pair(U, SchemeParams(3, 4, 2, 1, 2), seed=34)
    data = json.loads(json.dumps(pair.to_dict()))
    loaded = GoodPair.from_dict(data)
    assert loaded.U == pair.U and loaded.V == pair.V
    assert loaded.params == pair.params and loaded.rank_m2 == pair.rank_m2


# duality


def test_duality_on_good_pairs(gf64):
    ctx = gf64
    params = SchemeParams(2, 6, 3, 2, 3)
    for t in range(20):
        U = random_subspace(ctx, 3, trial_rng(40, t))
        pair = search_good_pair(U, params, seed=t)
        dual = duality_transform(pair)
        assert (dual.U.dim, dual.V.dim) == (6 - 3, 6 - 3)
        assert dual.recheck()
        back = duality_transform(dual)
        assert (back.U.dim, back.V.dim) == (3, 3)


def test_duality_preserves_goodness_both_ways(gf16):
    ctx = gf16
    rng = np.random.default_rng(41)
    s = 1
    for _ in range(30):
        U = random_subspace(ctx, 2, rng)
        V = random_subspace(ctx, 2, rng)
        U2 = orthogonal_complement(V)
        V2 = orthogonal_complement(frobenius_image(U, s + 1))
        assert is_good(U, V, s).good == is_good(U2, V2, s).good


def test_duality_of_explicit_pair(gf64):
    pair = explicit_pair_mrm22(gf64, 4, 3, 2)
    dual = duality_transform(pair)
    assert dual.U == subfield(gf64, 3)


def test_duality_needs_good_pair(gf16):
    ctx = gf16
    U = span(ctx, ctx.basis.elems[:2])
    ce = counterexample_pair(U, 2, 1)
    params = SchemeParams(2, 4, 2, 1, 2)
    with pytest.raises(ValueError):
        duality_transform(GoodPair(U, ce.V, params, 0))


# Bad(U)


def test_bad_set_empty_when_r_large(gf16):
    for U in iter_subspaces(gf16, 3):
        report = bad_set(U, 2, 2)
        assert report.count == 0, f"Expected 0, got {report.count}"


def test_bad_set_nonempty_when_r_small(gf16):
    for U in iter_subspaces(gf16, 2):
        report = bad_set(U, 1, 2)
        assert report.count > 0
        assert report.within_bound
        assert report.omega_size == 210


def test_bad_set_matches_oracle(gf16):
    ctx = gf16
    rng = np.random.default_rng(50)
    for _ in range(3):
        U = random_subspace(ctx, 2, rng)
        expected = 0
        for a, b in itertools.product(range(16), repeat=2):
            x = ctx.ext([a, b])
            if ctx.rank_q(x) == 2 and is_bad_vector(U, x, 1):
                expected += 1
        report = bad_set(U, 1, 2, witnesses=True)
        assert report.count == expected, f"Expected {expected}, got {report.count}"
        assert len(report.witnesses) == expected


def test_bad_set_subfield_classes(gf16):
    U = subfield_subspace(gf16, 2, 1, np.random.default_rng(51))
    plain = span(gf16, U.basis)
    fast = bad_set(U, 1, 2)
    slow = bad_set(plain, 1, 2)
    assert fast.count == slow.count
    assert fast.classes * 3 == slow.classes


def test_lemma6_bound_value():
    assert lemma6_bound(SchemeParams(2, 4, 2, 1, 2)) == 256
    assert lemma6_bound(SchemeParams(2, 4, 2, 1, 2), a=2) == Fraction(256, 3)


def test_bad_u_kernel_small_rank(gf16):
    ctx = gf16
    w = ctx.basis.elems[1]
    u = ctx.ext.Zeros(3)
    u[0], u[1] = w, w
    uk = bad_u_kernel(ctx, u, 1)
    assert uk.rho == 1 and uk.kernel_dim == 2
    assert bad_of_u(ctx, u, 1) == []


def test_bad_u_kernel_full_rank(gf16):
    ctx = gf16
    rng = np.random.default_rng(52)
    U = random_subspace(ctx, 3, rng)
    uk = bad_u_kernel(ctx, U.basis, 1)
    assert uk.rho == 3 and uk.kernel_dim == 2
    beta = ctx.ext(int(rng.integers(1, 16)))
    first = {tuple(int(v) for v in x) for x in bad_of_u(ctx, U.basis, 1)}
    scaled = {tuple(int(v) for v in x) for x in bad_of_u(ctx, beta * U.basis, 1)}
    assert first == scaled


def test_bad_u_kernel_rejects_zero(gf16):
    with pytest.raises(ValueError):
        bad_u_kernel(gf16, gf16.ext.Zeros(2), 1)


# linearized polynomials


def test_annihilator_of_zero_space(gf16):
    L = annihilator_poly(span(gf16, []))
    assert [int(c) for c in L.coeffs] == [1]


def test_annihilator_gf4(gf4):
    L = annihilator_poly(span(gf4, [gf4.one]))
    assert [int(c) for c in L.coeffs] == [1, 1]


def test_annihilator_kernel_is_W(gf64):
    ctx = gf64
    W = random_subspace(ctx, 3, np.random.default_rng(60))
    L = annihilator_poly(W)
    assert L.q_degree == 3 and L.coeffs[-1] == 1
    assert L.linear_coeff != 0
    values = L(ctx.ext.elements)
    zeros = ctx.ext.elements[values == 0]
    assert zeros.size == 8
    assert all(W.contains(z) for z in zeros)


@pytest.mark.parametrize("s", [1, 2])
def test_image_poly(gf16, s):
    ctx = gf16
    rng = np.random.default_rng(61 + s)
    for _ in range(5):
        V = random_subspace(ctx, 4 - s, rng)
        F = image_poly(V)
        assert F.q_degree == s
        assert F.linear_coeff == 1
        values = F(ctx.ext.elements)
        image = {int(v) for v in values}
        assert image == {int(v) for v in V.elements()}
        assert int(np.count_nonzero(values == 0)) == 2**s


def test_image_poly_of_whole_field(gf16):
    F = image_poly(span(gf16, gf16.basis.elems))
    assert [int(c) for c in F.coeffs] == [1]
