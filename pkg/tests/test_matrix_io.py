import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from evr_lab.matrix_io import (
    APPENDIX_C_INTERVALS,
    APPENDIX_C_TAGS,
    AsymmetricMatrixError,
    CorrelationMatrix,
    DiagonalError,
    EntryRangeError,
    IndefiniteMatrixError,
    MatrixParseError,
    MatrixShapeError,
    MatrixValidationError,
    dump_matrix,
    dump_matrix_json,
    factorize,
    interval_membership,
    load_appendix_c,
    load_matrix,
    load_matrix_json,
)

# Published summaries of the shipped fixtures: (mean |rho|, lambda_min) for X then Y.
PUBLISHED = {
    "full": ((0.063, 0.535), (0.065, 0.581)),
    "pm33_100": ((0.578, 0.042), (0.600, 0.035)),
    "pm67_100": ((0.832, 0.012), (0.839, 0.010)),
    "pm33_67": ((0.434, 0.355), (0.455, 0.347)),
    "pos33_67": ((0.449, 0.350), (0.456, 0.352)),
    "pos67_100": ((0.836, 0.011), (0.839, 0.010)),
}
# Largest eigenvalue shift that rounding 90 off-diagonal entries to two
# decimals can cause (Weyl: |dlambda| <= ||E||_2 <= ||E||_F), plus the
# three-decimal rounding of the published value.
ROUNDING_EIG_SHIFT = 0.005 * math.sqrt(90) + 5e-4


def _csv(rows):
    return io.StringIO("\n".join(",".join(str(v) for v in r) for r in rows) + "\n")


@pytest.fixture(params=[(t, w) for t in APPENDIX_C_TAGS for w in (0, 1)],
                ids=lambda p: f"{p[0]}-{'xy'[p[1]]}")
def fixture_matrix(request):
    tag, which = request.param
    return tag, which, load_appendix_c(tag)[which]


class TestLoading:
    def test_identity(self):
        m = load_matrix(_csv(np.eye(10).tolist()))
        assert m.mean_abs_offdiag == 0.0
        assert m.min_eigenvalue == pytest.approx(1.0, abs=1e-12)
        assert m.dim == 10

    def test_blank_lines_ignored(self):
        m = load_matrix(io.StringIO("1,0.5\n\n0.5,1\n\n"))
        assert m.dim == 2

    def test_path_source(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("1,0.2\n0.2,1\n")
        assert load_matrix(p).entries[0, 1] == 0.2
        assert load_matrix(str(p)).entries[1, 0] == 0.2

    @pytest.mark.parametrize("text, err", [
        ("1,0.5\n0.5\n", MatrixShapeError),
        ("1,0.5,0\n0.5,1,0\n", MatrixShapeError),
        ("", MatrixShapeError),
        ("1,x\nx,1\n", MatrixParseError),
        ("1,0.5\n0.4,1\n", AsymmetricMatrixError),
        ("1.1,0.5\n0.5,1\n", DiagonalError),
        ("1,1.2\n1.2,1\n", EntryRangeError),
        ("1,nan\nnan,1\n", MatrixParseError),
    ])
    def test_distinct_validation_errors(self, text, err):
        with pytest.raises(err):
            load_matrix(io.StringIO(text))

    def test_errors_share_base_class(self):
        assert issubclass(IndefiniteMatrixError, MatrixValidationError)
        assert issubclass(MatrixValidationError, ValueError)

    def test_rejects_indefinite(self):
        # equicorrelation -1/3 in dimension 4 is singular; nudge it to lambda_min = -1e-3
        a = np.full((4, 4), -(1.0 + 1e-3) / 3.0)
        np.fill_diagonal(a, 1.0)
        assert np.linalg.eigvalsh(a)[0] == pytest.approx(-1e-3)
        with pytest.raises(IndefiniteMatrixError):
            CorrelationMatrix.from_array(a)

    def test_accepts_tiny_negative_eigenvalue(self):
        a = np.full((3, 3), 1.0)
        a[0, 1] = a[1, 0] = 1.0 - 1e-12
        m = CorrelationMatrix.from_array(a)
        assert m.min_eigenvalue >= -1e-8

    def test_entries_are_read_only(self):
        m = CorrelationMatrix.identity(3)
        with pytest.raises(ValueError):
            m.entries[0, 1] = 0.5


class TestFixtures:
    def test_all_tags_present(self):
        assert len(APPENDIX_C_TAGS) == 6
        for tag in APPENDIX_C_TAGS:
            x, y = load_appendix_c(tag)
            assert x.dim == y.dim == 10

    def test_unknown_tag(self):
        with pytest.raises(KeyError):
            load_appendix_c("nope")

    def test_mean_abs_matches_published(self, fixture_matrix):
        tag, which, m = fixture_matrix
        assert m.mean_abs_offdiag == pytest.approx(PUBLISHED[tag][which][0], abs=1e-3)

    def test_min_eigenvalue_within_rounding_shift(self, fixture_matrix):
        tag, which, m = fixture_matrix
        assert abs(m.min_eigenvalue - PUBLISHED[tag][which][1]) <= ROUNDING_EIG_SHIFT

    def test_full_regime_min_eigenvalue(self):
        x, y = load_appendix_c("full")
        assert x.mean_abs_offdiag == pytest.approx(0.063, abs=1e-3)
        assert x.min_eigenvalue == pytest.approx(0.535, abs=1e-3)
        assert y.min_eigenvalue == pytest.approx(0.581, abs=1e-3)

    def test_high_regime_sigma_x_summary(self):
        x, _ = load_appendix_c("pm67_100")
        assert x.mean_abs_offdiag == pytest.approx(0.832, abs=1e-3)
        assert 0.0 < x.min_eigenvalue < 0.05

    @pytest.mark.xfail(strict=True, reason="two-decimal fixtures shift lambda_min beyond 1e-3")
    def test_high_regime_sigma_y_published_eigenvalue(self):
        _, y = load_appendix_c("pm67_100")
        assert y.mean_abs_offdiag == pytest.approx(0.839, abs=1e-3)
        assert y.min_eigenvalue == pytest.approx(0.010, abs=1e-3)

    def test_round_trip_csv_bitwise(self, fixture_matrix):
        _, _, m = fixture_matrix
        again = load_matrix(io.StringIO(dump_matrix(m)))
        assert np.array_equal(again.entries, m.entries)

    def test_round_trip_json_bitwise(self, fixture_matrix):
        _, _, m = fixture_matrix
        again = load_matrix_json(io.StringIO(dump_matrix_json(m)))
        assert np.array_equal(again.entries, m.entries)

    def test_factorization_reconstructs(self, fixture_matrix):
        _, _, m = fixture_matrix
        L = factorize(m)
        assert np.allclose(L, np.tril(L))
        assert np.linalg.norm(L @ L.T - m.entries) <= 1e-8


class TestIntervals:
    def test_identity_in_full_interval(self):
        ok, bad = interval_membership(CorrelationMatrix.identity(10), [(-1, 1)])
        assert ok and bad == []

    def test_positive_moderate_fixture(self):
        x, y = load_appendix_c("pos33_67")
        for m in (x, y):
            ok, bad = interval_membership(m, APPENDIX_C_INTERVALS["pos33_67"])
            assert ok, bad

    def test_high_fixture_fails_moderate_interval(self):
        x, _ = load_appendix_c("pos67_100")
        ok, bad = interval_membership(x, [(1 / 3, 2 / 3)])
        assert not ok
        assert all(i < j for i, j, _ in bad)
        assert all(v > 2 / 3 for _, _, v in bad)

    def test_reversed_endpoints_accepted(self):
        ok, _ = interval_membership(CorrelationMatrix.equicorrelated(3, 0.5), [(1.0, 1 / 3)])
        assert ok

    def test_empty_spec(self):
        with pytest.raises(ValueError):
            interval_membership(CorrelationMatrix.identity(2), [])

    def test_fixture_regimes(self):
        # One published entry, (0, 6) of the mixed moderate Sigma_X, is -0.32
        # and sits outside its own regime even after the 5e-3 widening.
        for tag in APPENDIX_C_TAGS:
            for which, m in enumerate(load_appendix_c(tag)):
                ok, bad = interval_membership(m, APPENDIX_C_INTERVALS[tag])
                if (tag, which) == ("pm33_67", 0):
                    assert [(i, j) for i, j, _ in bad] == [(0, 6)]
                    assert bad[0][2] == pytest.approx(-0.32)
                else:
                    assert ok, (tag, which, bad)


class TestFactorize:
    def test_identity(self):
        assert np.array_equal(factorize(np.eye(4)), np.eye(4))

    def test_two_by_two(self):
        L = factorize([[1.0, 0.6], [0.6, 1.0]])
        assert np.allclose(L, [[1.0, 0.0], [0.6, 0.8]], atol=1e-15)

    def test_singular_gets_clipped(self):
        L = factorize(np.ones((3, 3)))
        assert np.linalg.norm(L @ L.T - np.ones((3, 3))) <= 1e-8

    def test_cached_on_matrix(self):
        m = CorrelationMatrix.equicorrelated(5, 0.3)
        assert m.cholesky is m.cholesky

    @given(st.integers(2, 8), st.floats(0.0, 0.99))
    def test_equicorrelated_reconstruction(self, dim, rho):
        m = CorrelationMatrix.equicorrelated(dim, rho)
        L = factorize(m)
        assert np.linalg.norm(L @ L.T - m.entries) <= 1e-8

    def test_json_format(self):
        rec = json.loads(dump_matrix_json(np.eye(2)))
        assert rec == {"dim": 2, "entries_row_major": [1.0, 0.0, 0.0, 1.0]}

    def test_json_size_mismatch(self):
        with pytest.raises(MatrixShapeError):
            load_matrix_json(io.StringIO('{"dim": 2, "entries_row_major": [1, 0, 1]}'))
