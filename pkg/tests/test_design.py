import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from trendfilter.design import (
    InvalidDimensionError,
    InvalidIndexError,
    build_design_X,
    build_design_Z,
    irrepresentable_holds,
    irrepresentable_vectors,
    second_diff,
    spectral_check,
)

finite_floats = st.floats(-1e6, 1e6, allow_nan=False)


class TestDesignX:
    def test_prefix_sum_of_ones(self):
        X = build_design_X(3)
        assert np.array_equal(X.matvec([1.0, 1.0, 1.0]), [1.0, 2.0, 3.0])

    def test_degenerate_size(self):
        assert np.array_equal(build_design_X(1).dense(), [[1.0]])

    def test_constant_extension(self):
        X = build_design_X(4)
        assert np.array_equal(X.matvec([2.0, 0.0, 0.0, 0.0]), [2.0, 2.0, 2.0, 2.0])

    def test_zero_size_rejected(self):
        with pytest.raises(InvalidDimensionError):
            build_design_X(0)

    def test_matvec_matches_dense(self, rng):
        X = build_design_X(17)
        v = rng.normal(size=17)
        D = X.dense()
        assert np.allclose(X.matvec(v), D @ v)
        assert np.allclose(X.rmatvec(v), D.T @ v)

    def test_row_structure(self):
        D = build_design_X(6).dense()
        for t in range(6):
            assert D[t].sum() == t + 1  # row t has exactly t+1 ones
        assert np.array_equal(D, np.tril(D))


class TestDesignZ:
    def test_n3_rows(self):
        Z = build_design_Z(3).dense()
        assert np.array_equal(Z, [[1, 0, 0], [1, 1, 0], [1, 2, 1]])

    def test_affine_reconstruction(self):
        Z = build_design_Z(4)
        mu = np.array([1.0, 2.0, 3.0, 4.0])
        assert np.allclose(Z.matvec([1.0, 1.0, 0.0, 0.0]), mu)

    def test_last_row_n10(self):
        Z = build_design_Z(10).dense()
        assert np.array_equal(Z[9], [1, 9, 8, 7, 6, 5, 4, 3, 2, 1])

    def test_zero_size_rejected(self):
        with pytest.raises(InvalidDimensionError):
            build_design_Z(0)

    def test_products_match_dense(self, rng):
        Z = build_design_Z(23)
        v = rng.normal(size=23)
        D = Z.dense()
        assert np.allclose(Z.matvec(v), D @ v)
        assert np.allclose(Z.rmatvec(v), D.T @ v)

    def test_column_norms_closed_form(self):
        Z = build_design_Z(15)
        D = Z.dense()
        assert np.allclose(Z.column_norms_sq(), (D * D).sum(axis=0))

    @given(st.lists(finite_floats, min_size=3, max_size=40))
    def test_encode_decode_roundtrip(self, mu):
        mu = np.array(mu)
        Z = build_design_Z(mu.size)
        back = Z.matvec(Z.encode(mu))
        assert np.allclose(back, mu, rtol=0, atol=1e-8 * (1 + np.max(np.abs(mu))))


class TestSecondDiff:
    def test_affine_annihilation(self):
        assert np.array_equal(second_diff([0.0, 1.0, 2.0, 3.0]), [0.0, 0.0])

    def test_single_unit_kink(self):
        assert np.array_equal(second_diff([0.0, 0.0, 1.0, 2.0]), [1.0, 0.0])

    def test_squares(self):
        # direct evaluation of mu_t + mu_{t-2} - 2 mu_{t-1} on squares
        assert np.array_equal(second_diff([1.0, 4.0, 9.0, 16.0, 25.0]), [2.0, 2.0, 2.0])

    def test_too_short_rejected(self):
        with pytest.raises(InvalidDimensionError):
            second_diff([1.0, 2.0])

    @given(st.lists(finite_floats, min_size=3, max_size=30))
    def test_links_slope_diffs(self, nu):
        # second differences of prefix sums are the adjacent slope differences
        nu = np.array(nu)
        X = build_design_X(nu.size)
        assert np.allclose(second_diff(X.matvec(nu)), np.diff(nu)[1:],
                           rtol=0, atol=1e-7 * (1 + np.max(np.abs(nu))))


class TestSpectral:
    @pytest.mark.parametrize("n", [5, 10, 25, 50])
    def test_smallest_eigenvalue_bound(self, n):
        rho1, _ = spectral_check(n)
        assert rho1 < 1.0 / (4 * n)

    @pytest.mark.parametrize("n", [10, 25, 50, 100])
    def test_row_energy_bound(self, n):
        _, mre = spectral_check(n)
        assert mre >= n * n / 4.0

    def test_row_energy_n2(self):
        _, mre = spectral_check(2)
        assert mre == pytest.approx(1.0)  # row (1, 1)

    def test_row_energy_small_n_edge(self):
        # the n^2/4 bound does not yet hold at n = 5: max row energy is 31/5
        _, mre = spectral_check(5)
        assert mre == pytest.approx(31.0 / 5.0)
        assert mre < 25.0 / 4.0


# reference 3-vectors for n=10 with the retained kink column 5 (4 decimals)
REFERENCE_ROWS = {
    3: (-0.3255, 0.7383, 0.2872),
    4: (-0.2383, 0.3574, 0.6809),
    6: (0.1277, -0.1915, 1.0638),
    7: (0.1702, -0.2553, 0.9422),
    8: (0.1532, -0.2298, 0.7052),
    9: (0.1021, -0.1532, 0.4225),
    10: (0.0426, -0.0638, 0.1641),
}


class TestIrrepresentable:
    def test_reference_vectors(self):
        system = irrepresentable_vectors(10, [5])
        assert system.z1_columns == (1, 2, 5)
        assert system.z2_columns == tuple(sorted(REFERENCE_ROWS))
        for row, col in zip(system.M, system.z2_columns):
            assert np.allclose(np.round(row, 4), REFERENCE_ROWS[col])

    def test_normal_equation_residual(self):
        from trendfilter.design import build_design_Z
        system = irrepresentable_vectors(10, [5])
        Z = build_design_Z(10).dense()
        Z1 = Z[:, [c - 1 for c in system.z1_columns]]
        Z2 = Z[:, [c - 1 for c in system.z2_columns]]
        resid = system.M @ (Z1.T @ Z1) - Z2.T @ Z1
        assert np.max(np.abs(resid)) < 1e-8

    @pytest.mark.parametrize("s1,violating_cols", [
        ((1, 1, 1), [6]),            # |a_3' s| = 1 exactly: strictness makes it fail
        ((1, -1, 1), [6, 7, 8]),     # a_3, a_4, a_5
        ((1, 1, -1), [6, 7]),
        ((-1, 1, 1), [3, 4]),        # a_1, a_2
    ])
    def test_sign_cases(self, s1, violating_cols):
        system = irrepresentable_vectors(10, [5])
        holds, violations = irrepresentable_holds(system.M, s1)
        assert not holds
        assert [system.z2_columns[i] for i, _ in violations] == violating_cols

    def test_zero_matrix_holds(self):
        holds, violations = irrepresentable_holds(np.zeros((4, 3)), (1, -1, 1))
        assert holds and violations == []

    def test_length_mismatch(self):
        with pytest.raises(InvalidDimensionError):
            irrepresentable_holds(np.zeros((4, 3)), (1, 1))

    def test_kink_column_out_of_range(self):
        with pytest.raises(InvalidIndexError):
            irrepresentable_vectors(10, [2])
        with pytest.raises(InvalidIndexError):
            irrepresentable_vectors(10, [11])

    def test_no_kink_baseline(self):
        system = irrepresentable_vectors(10, [])
        assert system.z1_columns == (1, 2)
        assert system.M.shape == (8, 2)
