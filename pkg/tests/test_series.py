import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nearinv.series import (InnerFunction, TruncatedSeries, blaschke_tail_bound, blaschke_taylor,
                            compose_with_inner, evaluate, phi_powers, series_multiply,
                            stack_components)

D = 32


def poly(*c, degree=D):
    return TruncatedSeries.scalar(c, degree)


coef = st.floats(-3, 3, allow_nan=False)
cplx = st.builds(complex, coef, coef)
disc_point = st.builds(lambda r, t: r * np.exp(1j * t), st.floats(0, 0.5), st.floats(0, 2 * np.pi))
zero_in_disc = st.builds(lambda r, t: r * np.exp(1j * t), st.floats(0, 0.9), st.floats(0, 2 * np.pi))


def series_strategy(max_len=10, degree=12):
    return st.lists(cplx, min_size=1, max_size=max_len).map(lambda c: poly(*c, degree=degree))


class TestTruncatedSeries:
    def test_shape_and_valid_default(self):
        f = poly(1, 2)
        assert f.degree == D and f.n == 1 and f.valid_degree == D

    def test_rejects_bad_valid_degree(self):
        with pytest.raises(ValueError):
            TruncatedSeries(np.zeros((4, 1)), 7)

    def test_coeffs_read_only(self):
        f = poly(1, 2)
        with pytest.raises(ValueError):
            f.coeffs[0, 0] = 5

    def test_addition_keeps_min_valid(self):
        f = poly(1, 2).with_valid(10)
        g = poly(0, 1).with_valid(20)
        assert (f + g).valid_degree == 10
        assert (2 * f).valid_degree == 10

    def test_stack_components(self):
        s = stack_components([poly(1), poly(0, 1)])
        assert s.n == 2
        np.testing.assert_array_equal(s.coeffs[:2], [[1, 0], [0, 1]])


class TestMultiply:
    def test_shift_by_z(self):
        assert series_multiply(poly(0, 1), poly(1, 1)).allclose(poly(0, 1, 1))

    def test_identity(self):
        h = poly(3, -1j, 2)
        assert series_multiply(poly(1), h).allclose(h)

    def test_geometric_collapse(self):
        s = TruncatedSeries.scalar(np.sqrt(2) * 2.0 ** -np.arange(D + 1))
        out = series_multiply(poly(2, -1), s)
        expected = np.zeros(D + 1)
        expected[0] = 2 * np.sqrt(2)
        np.testing.assert_allclose(out.coeffs[:, 0], expected, atol=1e-15)

    def test_valid_is_min(self):
        assert series_multiply(poly(1).with_valid(5), poly(1)).valid_degree == 5

    @given(series_strategy(), series_strategy(), series_strategy(), cplx)
    def test_bilinear_commutative(self, f, g, h, a):
        assert series_multiply(f, g).allclose(series_multiply(g, f), atol=1e-11)
        lhs = series_multiply(f, a * g + h)
        rhs = a * series_multiply(f, g) + series_multiply(f, h)
        assert lhs.allclose(rhs, atol=1e-10)


class TestBlaschke:
    def test_z(self):
        assert blaschke_taylor(InnerFunction((0,)), 5).allclose(poly(0, 1, degree=5))

    def test_z_squared(self):
        assert InnerFunction.z_power(2).taylor(5).allclose(poly(0, 0, 1, degree=5))

    def test_half_factor_coefficients(self):
        c = blaschke_taylor(InnerFunction((0.5,)), 3).coeffs[:, 0]
        np.testing.assert_allclose(c, [0.5, -0.75, -0.375, -0.1875], atol=1e-15)

    def test_rejects_zero_on_circle(self):
        with pytest.raises(ValueError):
            InnerFunction((1.0,))

    def test_rejects_non_unimodular_phase(self):
        with pytest.raises(ValueError):
            InnerFunction((0,), 1.1)

    def test_vanishes_at_zero(self):
        assert InnerFunction((0, 0.5)).vanishes_at_zero()
        assert not InnerFunction((0.5,)).vanishes_at_zero()

    def test_multiplicities(self):
        assert InnerFunction((0, 0, 0.5)).zero_multiplicities() == [(0j, 2), (0.5 + 0j, 1)]

    @given(st.lists(zero_in_disc, min_size=1, max_size=3), st.floats(0, 2 * np.pi),
           st.lists(disc_point, min_size=5, max_size=5))
    @settings(max_examples=40)
    def test_series_matches_exact_value(self, zeros, t, pts):
        phi = InnerFunction(tuple(zeros), np.exp(1j * t))
        s = phi.taylor(D)
        for w in pts:
            assert abs(phi(w) - s.evaluate(w)[0]) <= blaschke_tail_bound(w, D) + 1e-13
            assert abs(phi(w)) < 1

    @given(st.lists(zero_in_disc, min_size=1, max_size=3), st.floats(0, 2 * np.pi))
    @settings(max_examples=30)
    def test_unimodular_on_circle(self, zeros, t):
        phi = InnerFunction(tuple(zeros))
        assert abs(abs(phi(np.exp(1j * t))) - 1) <= 1e-12


class TestCompose:
    def test_z2_into_z2(self):
        assert compose_with_inner(poly(0, 0, 1), InnerFunction.z_power(2)).allclose(
            poly(0, 0, 0, 0, 1))

    def test_constant(self):
        assert compose_with_inner(poly(1), InnerFunction((0, 0.5))).allclose(poly(1))

    def test_geometric_norm(self):
        q = TruncatedSeries.scalar(np.sqrt(2) * 2.0 ** -np.arange(D + 1))
        out = compose_with_inner(q, InnerFunction.z_power(1))
        assert out.allclose(q, atol=0)
        # the finite tail sum_{k > 32} 2 * 4^-k is far below 1e-15
        assert abs(np.sum(np.abs(out.window()) ** 2) - 8 / 3) < 1e-15

    def test_rejects_phi_nonzero_at_origin(self):
        with pytest.raises(ValueError):
            compose_with_inner(poly(1, 1), InnerFunction((0.5,)))

    def test_valid_degree_bookkeeping(self):
        out = compose_with_inner(poly(1, 2, degree=D).with_valid(3), InnerFunction.z_power(2))
        assert out.valid_degree == 7

    @given(st.lists(cplx, min_size=1, max_size=6), st.sampled_from([(0,), (0, 0), (0, 0.5)]))
    @settings(max_examples=40)
    def test_parseval_for_short_polynomials(self, c, zeros):
        phi = InnerFunction(zeros)
        q = poly(*c, degree=200)
        out = compose_with_inner(q, phi)
        assert abs(np.linalg.norm(out.window()) - np.linalg.norm(q.window())) <= 1e-10 * (
            1 + np.linalg.norm(c))

    def test_phi_powers_count(self):
        p = phi_powers(InnerFunction.z_power(1), 8, 4)
        assert len(p) == 4 and p[3].allclose(TruncatedSeries.monomial(3, 8))


class TestEvaluate:
    def test_origin(self):
        assert evaluate(poly(1, 1), 0)[0] == 1

    def test_reference_g_at_origin(self):
        g = poly(-2, -1, 1) / (2 * np.sqrt(2))
        assert abs(g.evaluate(0)[0] + 1 / np.sqrt(2)) < 1e-15

    def test_half(self):
        assert abs(poly(0, 1, 1).evaluate(0.5)[0] - 0.75) < 1e-15

    def test_rejects_outside(self):
        with pytest.raises(ValueError):
            poly(1).evaluate(1.0)

    @given(series_strategy(), series_strategy(), cplx, disc_point)
    def test_linear(self, f, g, a, w):
        lhs = (a * f + g).evaluate(w)
        rhs = a * f.evaluate(w) + g.evaluate(w)
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)
