import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracrk.certificate import (
    CROUZEIX,
    LogSignedValue,
    certify,
    certify_bruteforce,
    error_bound,
    interior_extrema,
    r_abs,
    r_derivatives,
    r_eval,
)
from fracrk.discretize import REFERENCE_INTERVAL, SpectralInterval
from fracrk.functions import ML, PowNeg, PowPos, gamma_k
from fracrk.poles import eds, zolotarev, zolotarev_rate


def random_poles(rng, k, iv):
    return -np.exp(rng.uniform(math.log(iv.lo), math.log(iv.hi), k))


class TestREval:
    def test_empty(self):
        assert r_eval([], 3.0).value == 1.0

    def test_single(self):
        assert r_eval([-1.0], 2.0).value == pytest.approx(1 / 3)

    def test_zero(self):
        v = r_eval([-1.0, -5.0], 5.0)
        assert v.sign == 0 and v.logabs == -math.inf and v.value == 0.0

    def test_sign(self):
        assert r_eval([-1.0], 0.5).sign == -1
        assert r_eval([-1.0, -2.0], 1.5).sign == -1
        assert r_eval([-1.0, -2.0], 3.0).sign == 1

    def test_no_overflow(self):
        xi = -np.geomspace(1, 1e6, 200)
        v = r_eval(xi, 1e-8)
        assert math.isfinite(v.logabs)

    def test_matches_abs(self):
        rng = np.random.default_rng(3)
        xi = random_poles(rng, 12, REFERENCE_INTERVAL)
        lam = np.geomspace(19, 348475, 50)
        np.testing.assert_allclose([abs(r_eval(xi, x).value) for x in lam], r_abs(xi, lam), rtol=1e-11)

    def test_invariant(self):
        with pytest.raises(ValueError):
            LogSignedValue(0.0, 0)
        with pytest.raises(ValueError):
            LogSignedValue(-math.inf, 1)


class TestDerivatives:
    def test_one_pole(self):
        xi, lam = -3.0, 1.7
        _, d1, _ = r_derivatives([xi], lam)
        assert d1 == pytest.approx(-2 * xi / (lam - xi) ** 2, rel=1e-14)

    def test_finite_differences(self):
        rng = np.random.default_rng(11)
        iv = SpectralInterval(1.0, 1e3)
        for _ in range(50):
            xi = random_poles(rng, int(rng.integers(1, 8)), iv)
            lam = float(np.exp(rng.uniform(0, math.log(1e3))))
            h = 1e-6 * lam
            r0, d1, d2 = r_derivatives(xi, lam)
            rp, d1p, _ = r_derivatives(xi, lam + h)
            rm, d1m, _ = r_derivatives(xi, lam - h)
            fd1 = (rp - rm) / (2 * h)
            fd2 = (d1p - d1m) / (2 * h)
            assert abs(fd1 - d1) <= 1e-6 * max(abs(d1), abs(r0) / lam)
            assert abs(fd2 - d2) <= 1e-5 * max(abs(d2), abs(d1) / lam)


class TestInteriorExtrema:
    def test_two_poles(self):
        np.testing.assert_allclose(interior_extrema([-1.0, -4.0]), [2.0], rtol=1e-13)

    def test_needs_two(self):
        with pytest.raises(ValueError):
            interior_extrema([-1.0])

    @settings(max_examples=60, deadline=None)
    @given(k=st.integers(2, 30), seed=st.integers(0, 2**32 - 1))
    def test_count_and_interlacing(self, k, seed):
        rng = np.random.default_rng(seed)
        xi = np.sort(random_poles(rng, k, REFERENCE_INTERVAL))[::-1]
        ext = interior_extrema(xi)
        assert len(ext) == k - 1
        for j, x in enumerate(ext):
            assert -xi[j] < x < -xi[j + 1]

    def test_stationary(self):
        rng = np.random.default_rng(5)
        xi = np.sort(random_poles(rng, 8, SpectralInterval(1, 1e4)))[::-1]
        for j, x in enumerate(interior_extrema(xi)):
            _, d1, d2 = r_derivatives(xi, x)
            width = xi[j] - xi[j + 1]
            assert abs(d1) <= 1e-10 * abs(d2) * width


class TestCertify:
    def test_empty(self):
        assert certify([], REFERENCE_INTERVAL).delta == 1.0

    def test_one_pole_symmetric(self):
        iv = SpectralInterval(1.0, 4.0)
        cert = certify([-2.0], iv)
        assert cert.delta == pytest.approx(1 / 3, rel=1e-15)
        np.testing.assert_allclose(cert.endpoints, [1 / 3, 1 / 3], rtol=1e-15)
        assert certify_bruteforce([-2.0], iv) == pytest.approx(1 / 3, rel=1e-12)

    def test_delta_is_max(self):
        iv = REFERENCE_INTERVAL
        cert = certify(eds(iv, 10), iv)
        vals = [v for _, v in cert.extrema] + list(cert.endpoints)
        assert cert.delta == max(vals)
        assert 0 < cert.delta < 1

    @pytest.mark.parametrize("k", [5, 10, 15])
    def test_zolotarev(self, k):
        c = zolotarev_rate(REFERENCE_INTERVAL)
        assert certify(zolotarev(REFERENCE_INTERVAL, k), REFERENCE_INTERVAL).delta <= 2 * math.exp(-c * k)

    def test_bruteforce(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            lo = float(np.exp(rng.uniform(-2, 3)))
            iv = SpectralInterval(lo, lo * float(np.exp(rng.uniform(1, 12))))
            xi = random_poles(rng, int(rng.integers(1, 15)), iv)
            d = certify(xi, iv).delta
            assert abs(d - certify_bruteforce(xi, iv)) <= 1e-8 * d

    def test_permutation(self):
        rng = np.random.default_rng(9)
        xi = random_poles(rng, 9, REFERENCE_INTERVAL)
        base = certify(xi, REFERENCE_INTERVAL).delta
        for _ in range(5):
            assert certify(rng.permutation(xi), REFERENCE_INTERVAL).delta == pytest.approx(base, rel=1e-13)

    @pytest.mark.parametrize("c", [10.0, 0.1])
    def test_scaling(self, c):
        iv = SpectralInterval(3.0, 3e4)
        xi = eds(iv, 8).array()
        np.testing.assert_allclose(certify(c * xi, iv.scaled(c)).delta, certify(xi, iv).delta, rtol=1e-12)

    def test_pole_outside(self):
        with pytest.raises(ValueError):
            certify([-0.5], SpectralInterval(1, 4))

    def test_inside_unit(self):
        rng = np.random.default_rng(10)
        iv = SpectralInterval(1, 1e5)
        xi = random_poles(rng, 7, iv)
        lam = iv.logspace(2000)
        assert np.all(r_abs(xi, lam) < 1)
        zeta = rng.uniform(0, 1e6, 500)
        assert np.all(r_abs(xi, -zeta[zeta > 0]) >= 1)


class TestErrorBound:
    def test_pow_neg_uniform(self):
        iv = SpectralInterval(1.0, 1e3)
        ps = zolotarev(iv, 5)
        d = certify(ps, iv).delta
        for s in (0.0, 0.3, 1.0):
            assert error_bound(PowNeg(s), ps, iv, 5, 2.5) == pytest.approx(2 * d * 2.5)

    def test_degenerate(self):
        iv = SpectralInterval(3.0, 3.0)
        assert error_bound(PowPos(0.5), zolotarev(iv, 1), iv, 1, 1.0) == 0.0

    def test_ml_ls_branch(self):
        iv = SpectralInterval(1.0, 1e3)
        ps = zolotarev(iv, 6)
        d = certify(ps, iv).delta
        f = ML(1.0, 1.0, 1.5, 0.75)
        assert error_bound(f, ps, iv, 6, 1.0) == pytest.approx(8 * gamma_k(6, iv) * d)

    def test_crouzeix(self):
        iv = SpectralInterval(1.0, 1e3)
        ps = zolotarev(iv, 4)
        sym = error_bound(PowPos(0.5), ps, iv, 4, 1.0)
        assert error_bound(PowPos(0.5), ps, iv, 4, 1.0, symmetric=False) == pytest.approx(CROUZEIX * sym)
