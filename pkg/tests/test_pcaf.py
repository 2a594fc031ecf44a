import numpy as np
import pytest
from hypothesis import given, strategies as st

from slowcode.core import Code, DesignConfig, InvalidDimensionError, ValidationError, random_unimodular_code
from slowcode.pcaf import (
    QuadFormMatrix,
    build_B_fast,
    build_B_naive,
    dirichlet_gram,
    objective_siso,
    pcaf_grid,
    periodic_autocorr,
    shift_matrix_apply,
    steering,
)

from conftest import direct_energy, direct_pcaf


def rel_fro(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


class TestShift:
    def test_zero_lag(self):
        z = np.array([1, 2j, -1, -2j])
        assert np.array_equal(shift_matrix_apply(z, 0), z)

    def test_lag_one(self):
        assert list(shift_matrix_apply(np.array([1, 2, 3, 4]), 1)) == [2, 3, 4, 1]

    @pytest.mark.parametrize("n", range(2, 9))
    def test_negative_lag_wraps(self, n):
        z = np.arange(n) + 0j
        for l in range(-(n - 1), n):
            expect = np.array([z[(i + l) % n] for i in range(n)])
            assert np.array_equal(shift_matrix_apply(z, l), expect)
        assert np.array_equal(shift_matrix_apply(z, -1), shift_matrix_apply(z, n - 1))

    def test_bad_lag(self):
        with pytest.raises(InvalidDimensionError):
            shift_matrix_apply(np.ones(4), 4)


class TestPcafGrid:
    def test_all_ones_mainlobe(self):
        g = pcaf_grid(np.ones(4), np.ones(4), 1, 8)
        assert g.at(0, 0) == pytest.approx(4)

    def test_alternating_half_band(self):
        g = pcaf_grid(np.ones(4), np.array([1, -1, 1, -1]), 4, 8)
        assert abs(g.at(0, 4)) == pytest.approx(4)

    def test_matches_direct_oracle(self, rng):
        x = random_unimodular_code(8, rng).entries
        y = random_unimodular_code(8, rng).entries
        g = pcaf_grid(x, y, 3, 16)
        for l in g.lags:
            for p in g.bins:
                assert abs(g.at(l, p) - direct_pcaf(x, y, l, p, 16)) < 1e-10

    def test_auto_conjugate_slots_match_oracle(self, rng):
        x = random_unimodular_code(6, rng).entries
        g = pcaf_grid(x, x, 3, 16)
        for l in g.lags:
            for p in g.bins:
                lm = (-l) % 6
                assert abs(g.at(l, p) - direct_pcaf(x, x, l, p, 16)) < 1e-10
                assert abs(direct_pcaf(x, x, lm, -p, 16) - g.at(lm, -p)) < 1e-10

    def test_auto_mainlobe_exact(self, rng):
        x = random_unimodular_code(32, rng)
        g = pcaf_grid(x, x, 5, 64)
        assert g.at(0, 0).real == pytest.approx(32, abs=1e-12)

    def test_shape(self):
        g = pcaf_grid(np.ones(5), np.ones(5), 3, 16)
        assert g.values.shape == (9, 7)

    def test_length_mismatch(self):
        with pytest.raises(InvalidDimensionError):
            pcaf_grid(np.ones(4), np.ones(5), 1, 8)

    @given(st.integers(0, 2**31), st.integers(2, 12))
    def test_magnitude_bound(self, seed, n):
        rng = np.random.default_rng(seed)
        x, y = random_unimodular_code(n, rng), random_unimodular_code(n, rng)
        g = pcaf_grid(x, y, 3, 2 * n + 3)
        assert np.max(np.abs(g.values)) <= n + 1e-9

    def test_csv_export(self, tmp_path):
        g = pcaf_grid(np.ones(3), np.ones(3), 1, 8)
        g.to_csv(tmp_path / "g.csv", tmp_path / "g_db.csv")
        rows = (tmp_path / "g.csv").read_text().splitlines()
        assert rows[0] == "l,p,re,im"
        assert len(rows) == 1 + 5 * 3
        db = (tmp_path / "g_db.csv").read_text().splitlines()
        assert db[0] == "l,p,db"
        l, p, v = db[1 + 2 * 3 + 1].split(",")
        assert (l, p) == ("0", "0") and float(v) == pytest.approx(0.0, abs=1e-12)


class TestObjective:
    def test_all_ones_tiny(self):
        cfg = DesignConfig(2, 1, 4)
        # P = 0 is not a valid config, so evaluate the p = 0 column directly.
        g = pcaf_grid(np.ones(2), np.ones(2), 1, 4)
        assert np.sum(np.abs(g.values[:, 1]) ** 2) == pytest.approx(12)
        assert objective_siso(np.ones(2), np.ones(2), cfg) >= 12

    def test_matches_oracle(self, rng):
        cfg = DesignConfig(8, 3, 16)
        x = random_unimodular_code(8, rng).entries
        y = random_unimodular_code(8, rng).entries
        assert objective_siso(x, y, cfg) == pytest.approx(direct_energy(x, y, 3, 16), rel=1e-12)


class TestQuadForms:
    @pytest.mark.parametrize("side", ["for_x", "for_y"])
    def test_quadratic_form_is_energy(self, rng, side):
        cfg = DesignConfig(8, 3, 16)
        x = random_unimodular_code(8, rng).entries
        y = random_unimodular_code(8, rng).entries
        J = objective_siso(x, y, cfg)
        for build in (build_B_naive, build_B_fast):
            B = build(y if side == "for_y" else x, side, cfg)
            val = B.quad(x if side == "for_y" else y)
            assert val == pytest.approx(J, rel=1e-9)

    @pytest.mark.parametrize("build", [build_B_naive, build_B_fast])
    def test_all_ones_p0_closed_form(self, build):
        # P = 0 is outside the config range, so emulate it with the gram of P = 0.
        n = 4
        cfg = DesignConfig(n, 1, 8)
        if build is build_B_fast:
            G0 = np.ones((n, n))
            B = build_B_fast(np.ones(n), "for_y", cfg, gram=G0).matrix
        else:
            F0 = steering(n, 0, 8)
            assert np.allclose(F0, 1)
            B = np.zeros((n, n), complex)
            for l in cfg.lags:
                v = np.roll(np.ones(n), -l)
                B += np.outer(v, v.conj())
        assert np.allclose(B, (2 * n - 1) * np.ones((n, n)))

    @pytest.mark.parametrize("side", ["for_x", "for_y"])
    def test_fast_equals_naive(self, side):
        cfg = DesignConfig(16, 5, 32)
        for seed in range(5):
            z = random_unimodular_code(16, seed)
            a = build_B_fast(z, side, cfg).matrix
            b = build_B_naive(z, side, cfg).matrix
            assert rel_fro(a, b) < 1e-9

    @given(st.integers(0, 2**31), st.integers(2, 16), st.sampled_from(["for_x", "for_y"]))
    def test_fast_equals_naive_property(self, seed, n, side):
        rng = np.random.default_rng(seed)
        n_f = n + 1 + int(rng.integers(0, 16))
        p_max = int(rng.integers(1, n_f))
        cfg = DesignConfig(n, p_max, n_f)
        z = random_unimodular_code(n, rng)
        assert rel_fro(build_B_fast(z, side, cfg).matrix, build_B_naive(z, side, cfg).matrix) < 1e-9

    def test_hermitian_psd(self, rng):
        cfg = DesignConfig(12, 4, 32)
        z = random_unimodular_code(12, rng)
        for side in ("for_x", "for_y"):
            B = build_B_fast(z, side, cfg)
            assert np.max(np.abs(B.matrix - B.matrix.conj().T)) <= 1e-10
            B.check_psd()
            assert np.linalg.eigvalsh(B.matrix)[0] >= -1e-8 * np.linalg.norm(B.matrix)

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValidationError):
            QuadFormMatrix(np.array([[1, 1], [0, 1]], complex), "for_x")

    def test_check_psd_fails(self):
        with pytest.raises(ValidationError):
            QuadFormMatrix(np.diag([1.0, -1.0]).astype(complex), "for_x").check_psd()

    def test_unknown_side(self):
        with pytest.raises(ValueError):
            build_B_fast(np.ones(4), "for_z", DesignConfig(4, 1, 8))


class TestKernels:
    def test_gram_closed_form(self):
        n, P, n_f = 10, 3, 32
        G = dirichlet_gram(n, P, n_f)
        d = np.subtract.outer(np.arange(n), np.arange(n))
        with np.errstate(invalid="ignore", divide="ignore"):
            ref = np.sin((2 * P + 1) * np.pi * d / n_f) / np.sin(np.pi * d / n_f)
        ref[d == 0] = 2 * P + 1
        assert np.allclose(G, ref, atol=1e-12)

    def test_gram_is_steering_gram(self):
        F = steering(6, np.arange(-2, 3), 16).T
        assert np.allclose(dirichlet_gram(6, 2, 16), F @ F.conj().T)

    def test_autocorr_direct(self, rng):
        y = random_unimodular_code(9, rng).entries
        c = periodic_autocorr(y)
        for l in range(9):
            assert abs(c[l] - sum(y[n] * np.conj(y[(n + l) % 9]) for n in range(9))) < 1e-12
