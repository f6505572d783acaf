import math

import numpy as np
import pytest
from mpmath import mp, mpf
from mpmath import log10 as mlog10
from skimage.metrics import structural_similarity

from sparsity_cs.errors import DomainError, InvalidInputError
from sparsity_cs.metrics import (
    coefficient_sparsity_index,
    energy_shift_check,
    mse,
    mssim,
    psnr,
    psnr_bound_closed_form,
    psnr_lower_bound,
    quality_scores,
    sparsity_index,
    ssim_map,
    truncate_smallest,
    truncation_experiment,
)
from sparsity_cs.sparsity import sparsity_s
from sparsity_cs.transform import dct1, dct2, idct1, idct2, vec


def bound_mp(s, p, i_star, i0, n, MAX):
    mp.dps = 60
    e = mpf(2) / mpf(p)
    num = mpf(n) * mpf(n - i_star + 1) ** e * mpf(MAX) ** 2
    den = mpf(i0) * mpf(s) ** e
    return float(10 * mlog10(num / den))


class TestMsePsnr:
    def test_examples(self):
        v = np.arange(5.0)
        assert mse(v, v) == 0.0
        assert mse([0, 0], [2, 0]) == 2.0
        assert psnr(v, v) == math.inf
        assert psnr([0.0], [255.0]) == pytest.approx(0.0, abs=1e-12)
        u = np.zeros(10)
        w = np.zeros(10)
        w[0] = 255.0  # mse = 255^2 / 10
        assert psnr(u, w, 255) == pytest.approx(10.0, abs=1e-12)

    def test_against_direct_sum(self):
        rng = np.random.default_rng(0)
        u, v = rng.standard_normal((2, 7, 9))
        ref = sum((a - b) ** 2 for a, b in zip(u.ravel(), v.ravel())) / u.size
        assert mse(u, v) == pytest.approx(ref, rel=1e-12)

    def test_psnr_mse_consistency(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            u, v = rng.uniform(0, 255, (2, 16))
            m = mse(u, v)
            assert psnr(u, v, 255) == pytest.approx(10 * math.log10(255**2) - 10 * math.log10(m), abs=1e-12)

    def test_errors(self):
        with pytest.raises(InvalidInputError):
            mse(np.zeros(3), np.zeros(4))
        with pytest.raises(InvalidInputError):
            psnr(np.zeros(3), np.ones(3), 0)

    def test_unitary_mse_equality(self):
        rng = np.random.default_rng(2)
        V, Vt = rng.standard_normal((2, 8, 8))
        assert mse(vec(dct2(V)), vec(dct2(Vt))) == pytest.approx(mse(V, Vt), rel=1e-10)

    def test_quality_scores(self):
        rng = np.random.default_rng(3)
        u = rng.uniform(0, 255, (20, 20))
        q = quality_scores(u, u)
        assert q.mse == 0 and q.psnr_db == math.inf
        assert q.mssim == pytest.approx(1.0)
        assert q.ssim_map.shape == (10, 10)


class TestSparsityIndex:
    def test_zero_block(self):
        assert sparsity_index(np.zeros((8, 8))) == 0.0

    def test_constant_block(self):
        assert sparsity_index(np.full((8, 8), 2.0)) == pytest.approx(1 / 64)

    def test_range(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            E = sparsity_index(rng.uniform(0, 255, (8, 8)))
            assert 0.0 <= E <= 1.0

    def test_coefficients(self):
        V = np.random.default_rng(5).standard_normal((4, 4))
        assert sparsity_index(V) == coefficient_sparsity_index(vec(dct2(V)))

    def test_bad_input(self):
        with pytest.raises(InvalidInputError):
            sparsity_index(np.zeros((3, 4)))
        with pytest.raises(InvalidInputError):
            sparsity_index(np.full((2, 2), np.nan))


class TestTruncate:
    def test_examples(self):
        x = np.array([3.0, 1.0, 2.0])
        np.testing.assert_array_equal(truncate_smallest(x, 0), x)
        np.testing.assert_array_equal(truncate_smallest(x, 3), 0)
        np.testing.assert_array_equal(truncate_smallest(x, 1), [3, 0, 2])

    def test_ties_earliest_first(self):
        np.testing.assert_array_equal(truncate_smallest([1.0, -1.0, 1.0], 2), [0, 0, 1])

    @pytest.mark.parametrize("i0", [-1, 4])
    def test_range(self, i0):
        with pytest.raises(InvalidInputError):
            truncate_smallest([1.0, 2.0, 3.0], i0)


class TestPsnrBound:
    def test_sigma1_vanishes_at_s_equals_n(self):
        b = psnr_lower_bound(64, 0.4, 10, 3, 64, 255)
        assert b.sigma1 == 0.0

    def test_sigma5_vanishes_at_i0_one(self):
        b = psnr_lower_bound(20, 0.4, 10, 1, 64, 255)
        assert b.sigma5 == 0.0

    def test_reference_case_extended_precision(self):
        b = psnr_lower_bound(700, 0.5, 1000, 10, 1024, 255)
        assert b.total == pytest.approx(bound_mp(700, 0.5, 1000, 10, 1024, 255), abs=1e-10)
        assert b.total == pytest.approx(sum(b.terms()), abs=1e-10)

    def test_random_cases_against_closed_form(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            n = int(rng.integers(2, 5000))
            i_star = int(rng.integers(2, n + 1))
            i0 = int(rng.integers(1, i_star))
            p = float(rng.uniform(0.01, 1))
            s = float(rng.uniform(0.01, n))
            b = psnr_lower_bound(s, p, i_star, i0, n, 255)
            ref = bound_mp(s, p, i_star, i0, n, 255)
            assert b.total == pytest.approx(ref, abs=1e-8 * max(1, abs(ref)))
            assert psnr_bound_closed_form(s, p, i_star, i0, n, 255) == pytest.approx(ref, abs=1e-8 * max(1, abs(ref)))
            assert b.sigma1 >= 0 and b.sigma2 <= 0
            assert -10 * math.log10(n) <= b.sigma5 <= 0

    @pytest.mark.parametrize(
        "args",
        [
            (10, 0.0, 5, 2, 16),  # p_star = 0
            (10, 0.5, 5, 0, 16),  # i0 = 0
            (10, 0.5, 5, 5, 16),  # i0 = i_star
            (10, 0.5, 5, 7, 16),  # i0 > i_star
        ],
    )
    def test_domain(self, args):
        with pytest.raises(DomainError):
            psnr_lower_bound(*args)


class TestTruncationExperiment:
    def test_random_vectors(self):
        rng = np.random.default_rng(7)
        done = 0
        while done < 200:
            v = np.cumsum(rng.standard_normal(64))
            prof = sparsity_s(dct1(v))
            if prof.p_star == 0 or prof.i_star < 3:
                continue
            res = truncation_experiment(v, 2)
            assert res.psnr_actual > res.bound.total
            done += 1

    def test_block_input(self):
        rng = np.random.default_rng(8)
        V = rng.uniform(0, 255, (8, 8))
        prof = sparsity_s(vec(dct2(V)))
        i0 = max(1, prof.i_star - 1)
        res = truncation_experiment(V, i0, max_value=255)
        assert res.psnr_actual > res.bound.total
        np.testing.assert_allclose(res.reconstruction, idct2(res.truncated.reshape(8, 8, order="F")))

    def test_i0_at_i_star_rejected(self):
        v = np.cumsum(np.random.default_rng(9).standard_normal(16))
        prof = sparsity_s(dct1(v))
        with pytest.raises(DomainError):
            truncation_experiment(v, prof.i_star)

    def test_equal_coefficients(self):
        # all coefficients of equal magnitude below 1: s = c n at p_star = 1, i_star = 1,
        # so no admissible i0 exists
        v = idct1(np.full(16, 0.5))
        with pytest.raises(DomainError):
            truncation_experiment(v, 1)


class TestSsim:
    def test_identical(self):
        u = np.random.default_rng(10).uniform(0, 255, (16, 16))
        assert mssim(u, u) == pytest.approx(1.0)

    def test_shift_penalized(self):
        u = np.random.default_rng(11).uniform(0, 200, (16, 16))
        assert mssim(u, u + 40) < 1.0

    def test_matches_reference_implementation(self):
        rng = np.random.default_rng(12)
        u = rng.uniform(0, 255, (40, 33))
        v = np.clip(u + rng.normal(0, 15, u.shape), 0, 255)
        ref = structural_similarity(
            u, v, data_range=255, gaussian_weights=True, sigma=1.5, use_sample_covariance=False
        )
        assert mssim(u, v) == pytest.approx(ref, abs=1e-12)

    def test_frozen_value(self):
        x = np.arange(24 * 24, dtype=float).reshape(24, 24) % 37 * 6
        y = x.T.copy()
        assert mssim(x, y) == pytest.approx(FROZEN_MSSIM, abs=1e-9)

    def test_too_small(self):
        with pytest.raises(InvalidInputError):
            ssim_map(np.zeros((10, 12)), np.zeros((10, 12)))


# scikit-image structural_similarity (gaussian_weights, sigma 1.5, population covariance)
FROZEN_MSSIM = 0.024521835648919563


class TestEnergyShift:
    def test_sparsifying_pair(self):
        # smooth ramp: its DCT concentrates the energy in a few coefficients
        v = np.linspace(1, 2, 32)
        x = dct1(v)
        res = energy_shift_check(v, x)
        assert res.sparsifying
        assert res.holds
        assert 1 <= res.i_natural <= 32
        assert res.head_energy_x <= res.head_energy_v

    def test_identity_pair(self):
        v = np.random.default_rng(13).standard_normal(16)
        res = energy_shift_check(v, v)
        assert not res.sparsifying and res.i_natural is None and not res.holds

    def test_permuted_pair(self):
        v = np.random.default_rng(14).standard_normal(16)
        res = energy_shift_check(v, v[::-1])
        assert not res.sparsifying

    def test_energy_mismatch(self):
        with pytest.raises(InvalidInputError):
            energy_shift_check(np.ones(4), 2 * np.ones(4))

    def test_sparsity_shift(self):
        rng = np.random.default_rng(15)
        for _ in range(50):
            v = np.cumsum(rng.standard_normal(32)) + 5
            x = dct1(v)
            if energy_shift_check(v, x).sparsifying:
                sv = sparsity_s(v)
                assert sparsity_s(x).s <= sv.s * (1 + 1e-9)
