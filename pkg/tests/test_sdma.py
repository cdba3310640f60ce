import numpy as np
import pytest
from hypothesis import given, strategies as st

from bacnoma import specfun
from bacnoma.errors import UnsupportedOverloadError
from bacnoma.geometry import WhitenedChannels, complex_normal
from bacnoma.mac import LOG2E, LogDetObjective, sic_rates, sum_capacity
from bacnoma.sdma import (AvgQrObjective, ExcitationRealization, avg_qr_gains, avg_qr_sum_rate,
                          draw_excitation, effective_channels, grad_avg_qr_sum_rate,
                          grad_sum_capacity, qr_diagonal_sq, qr_rates_approach2,
                          sic_rates_approach1, sum_capacity_sdma)

from conftest import random_mac


def full_logdet(b, eta):
    """Oracle: log2 det(I_D + sum_m eta_m b_m b_m^H) on the full D x D matrix."""
    s = np.eye(b.shape[0]) + (b * eta) @ b.conj().T
    return np.linalg.slogdet(s)[1] * LOG2E


def stagewise_full(b, eta, order):
    """Oracle: per-stage rates with explicit D x D inverses and log-dets."""
    d, m = b.shape
    rates = np.zeros(m)
    for pos, idx in enumerate(order):
        later = list(order[pos + 1:])
        a = np.eye(d) + (b[:, later] * eta[later]) @ b[:, later].conj().T
        mat = np.eye(d) + np.linalg.solve(a, eta[idx] * np.outer(b[:, idx], b[:, idx].conj()))
        rates[idx] = np.linalg.slogdet(mat)[1] * LOG2E
    return rates


def whitened(rng, n, m, scale=1e3):
    h = complex_normal(rng, (m, n))
    return WhitenedChannels(h * np.sqrt(scale), np.eye(n) * np.sqrt(scale), h)


class TestLogDet:
    @given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 8))
    def test_gram_and_full_agree(self, seed, d, m):
        rng = np.random.default_rng(seed)
        b = random_mac(rng, d, m)
        eta = rng.uniform(size=m)
        assert LogDetObjective(b).value(eta) == pytest.approx(full_logdet(b, eta), rel=1e-10, abs=1e-10)

    def test_zero_eta(self, rng):
        assert sum_capacity(random_mac(rng, 4, 3), np.zeros(3)) == 0.0

    def test_rank_one(self, rng):
        b = random_mac(rng, 4, 1)
        assert sum_capacity(b, [0.4]) == pytest.approx(np.log2(1 + 0.4 * np.linalg.norm(b) ** 2))

    @given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 8))
    def test_gradient_finite_difference(self, seed, d, m):
        rng = np.random.default_rng(seed)
        b = random_mac(rng, d, m, scale=3.0)
        eta = rng.uniform(0.1, 0.9, size=m)
        obj = LogDetObjective(b)
        g = obj.grad(eta)
        for i in range(m):
            h = 1e-6
            e = np.zeros(m)
            e[i] = h
            fd = (obj.value(eta + e) - obj.value(eta - e)) / (2 * h)
            assert g[i] == pytest.approx(fd, rel=1e-5, abs=1e-8)
        assert np.all(g > 0)

    def test_curvature_is_minus_hessian_diagonal(self, rng):
        b = random_mac(rng, 4, 3, scale=2.0)
        eta = rng.uniform(0.2, 0.8, size=3)
        obj = LogDetObjective(b)
        h = 1e-4
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            fd = (obj.value(eta + e) - 2 * obj.value(eta) + obj.value(eta - e)) / h**2
            assert -obj.curvature(eta)[i] == pytest.approx(fd, rel=1e-4)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.integers(1, 7))
    def test_concave_midpoint(self, seed, d, m):
        rng = np.random.default_rng(seed)
        obj = LogDetObjective(random_mac(rng, d, m))
        a, b = rng.uniform(size=m), rng.uniform(size=m)
        assert obj.value((a + b) / 2) >= (obj.value(a) + obj.value(b)) / 2 - 1e-9


class TestSic:
    @given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 6))
    def test_chain_rule_any_order(self, seed, d, m):
        rng = np.random.default_rng(seed)
        b = random_mac(rng, d, m)
        eta = rng.uniform(size=m)
        order = rng.permutation(m)
        total = sum_capacity(b, eta)
        assert sic_rates(b, eta, order).sum == pytest.approx(total, rel=1e-9, abs=1e-12)

    def test_matches_full_matrix_stagewise(self, rng):
        b = random_mac(rng, 4, 5)
        eta = rng.uniform(size=5)
        order = [3, 0, 4, 1, 2]
        np.testing.assert_allclose(sic_rates(b, eta, order).per_device,
                                   stagewise_full(b, eta, order), rtol=1e-10)

    def test_reversed_order_same_sum_different_split(self, rng):
        b = random_mac(rng, 4, 3)
        eta = rng.uniform(0.3, 1.0, size=3)
        fwd = sic_rates(b, eta, [0, 1, 2])
        rev = sic_rates(b, eta, [2, 1, 0])
        assert fwd.sum == pytest.approx(rev.sum, rel=1e-9)
        assert not np.allclose(fwd.per_device, rev.per_device)

    def test_last_decoded_sees_no_interference(self, rng):
        b = random_mac(rng, 4, 3)
        eta = rng.uniform(size=3)
        rep = sic_rates(b, eta, [1, 2, 0])
        assert rep.per_device[0] == pytest.approx(np.log2(1 + eta[0] * np.linalg.norm(b[:, 0]) ** 2))

    def test_bad_order(self, rng):
        with pytest.raises(ValueError):
            sic_rates(random_mac(rng, 2, 3), np.ones(3), [0, 0, 1])


class TestApproachI:
    def test_effective_channel_columns(self, rng):
        wh = whitened(rng, 4, 3)
        w = np.linalg.qr(complex_normal(rng, (4, 4)))[0]
        exc = draw_excitation(wh.h, w, 0.1, rng)
        b = effective_channels(wh, exc)
        for m in range(3):
            np.testing.assert_allclose(b[:, m], abs(exc.s0_gain[m]) * wh.h_tilde[m])

    def test_excitation_from_symbols(self, rng):
        h = complex_normal(rng, (3, 4))
        w = complex_normal(rng, (4, 2))
        x = complex_normal(rng, 2)
        exc = ExcitationRealization.from_symbols(h, w, x, 0.1)
        np.testing.assert_allclose(exc.s0_gain, h @ (np.sqrt(0.1) * (w @ x)))

    def test_single_device(self, rng):
        wh = whitened(rng, 4, 1)
        w = np.eye(4)
        exc = draw_excitation(wh.h, w, 0.1, rng)
        expect = np.log2(1 + 0.7 * abs(exc.s0_gain[0]) ** 2 * np.linalg.norm(wh.h_tilde[0]) ** 2)
        assert sum_capacity_sdma(wh, exc, [0.7]) == pytest.approx(expect)
        assert sic_rates_approach1(wh, exc, [0.7]).sum == pytest.approx(expect)

    def test_gradient_at_zero(self, rng):
        wh = whitened(rng, 4, 3)
        exc = draw_excitation(wh.h, np.eye(4), 0.1, rng)
        expect = LOG2E * np.abs(exc.s0_gain) ** 2 * np.sum(np.abs(wh.h_tilde) ** 2, axis=1)
        np.testing.assert_allclose(grad_sum_capacity(wh, exc, np.zeros(3)), expect, rtol=1e-12)

    def test_gradient_homogeneity(self, rng):
        wh = whitened(rng, 4, 3)
        exc = draw_excitation(wh.h, np.eye(4), 0.1, rng)
        g0 = grad_sum_capacity(wh, exc, np.zeros(3))
        scaled = WhitenedChannels(wh.h_tilde * np.array([[1.0], [3.0], [1.0]]), wh.whitener, wh.h)
        g1 = grad_sum_capacity(scaled, exc, np.zeros(3))
        assert g1[1] == pytest.approx(9 * g0[1]) and g1[0] == pytest.approx(g0[0])


class TestApproachII:
    def test_single_column(self, rng):
        wh = whitened(rng, 4, 1)
        assert qr_diagonal_sq(wh)[0] == pytest.approx(np.linalg.norm(wh.h_tilde[0]) ** 2)

    def test_r_diagonal_against_gram_schmidt(self, rng):
        wh = whitened(rng, 5, 4)
        cols = wh.h_tilde.T
        expect = []
        basis = []
        for m in range(4):
            v = cols[:, m].copy()
            for q in basis:
                v = v - np.vdot(q, v) * q
            expect.append(np.linalg.norm(v) ** 2)
            basis.append(v / np.linalg.norm(v))
        np.testing.assert_allclose(qr_diagonal_sq(wh), expect, rtol=1e-10)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 6))
    def test_dominated_by_capacity(self, seed, m):
        rng = np.random.default_rng(seed)
        wh = whitened(rng, 6, m)
        exc = draw_excitation(wh.h, np.eye(6), 0.1, rng)
        eta = rng.uniform(size=m)
        cap = sum_capacity_sdma(wh, exc, eta)
        assert qr_rates_approach2(wh, exc, eta).sum <= cap + 1e-9 * max(1.0, cap)

    def test_orthogonal_columns_reach_capacity(self, rng):
        q, _ = np.linalg.qr(complex_normal(rng, (4, 4)))
        ht = (q[:, :3] * np.array([30.0, 5.0, 100.0])).T
        wh = WhitenedChannels(ht, np.eye(4), ht)
        exc = draw_excitation(ht, np.eye(4), 0.1, rng)
        eta = rng.uniform(size=3)
        assert qr_rates_approach2(wh, exc, eta).sum == pytest.approx(
            sum_capacity_sdma(wh, exc, eta), rel=1e-9)

    def test_overload_rejected(self, rng):
        with pytest.raises(UnsupportedOverloadError):
            qr_rates_approach2(whitened(rng, 3, 4), draw_excitation(
                complex_normal(rng, (4, 3)), np.eye(3), 0.1, rng), np.ones(4))

    def test_rank_deficient_rejected(self, rng):
        wh = whitened(rng, 4, 3)
        wh.h_tilde[2] = 2 * wh.h_tilde[0]
        with pytest.raises(UnsupportedOverloadError):
            qr_diagonal_sq(wh)

    def test_average_zero_eta(self, rng):
        wh = whitened(rng, 4, 3)
        assert avg_qr_sum_rate(wh, np.eye(4), np.zeros(3), 0.1) == 0.0

    def test_average_depends_on_product(self, rng):
        wh = whitened(rng, 4, 1)
        w = np.eye(4)
        base = avg_qr_sum_rate(wh, w, [0.6], 0.1)
        # ||h^T W||^2 scaled by 4 (W -> 2W), eta scaled by 1/4
        assert avg_qr_sum_rate(wh, 2 * w, [0.15], 0.1) == pytest.approx(base, rel=1e-12)

    def test_average_matches_monte_carlo(self, rng):
        wh = whitened(rng, 4, 3, scale=1e2)
        w = np.linalg.qr(complex_normal(rng, (4, 4)))[0]
        eta = rng.uniform(size=3)
        n = 100000
        s0 = np.sqrt(0.1) * complex_normal(rng, (n, 4)) @ w.T
        gains = np.abs(s0 @ wh.h.T) ** 2
        samples = np.log2(1 + qr_diagonal_sq(wh) * eta * gains).sum(axis=1)
        closed = avg_qr_sum_rate(wh, w, eta, 0.1)
        assert abs(samples.mean() - closed) < 3 * samples.std() / np.sqrt(n)

    def test_gradient_finite_difference(self, rng):
        wh = whitened(rng, 4, 3)
        w = np.eye(4)
        eta = rng.uniform(0.1, 0.9, size=3)
        g = grad_avg_qr_sum_rate(wh, w, eta, 0.1)
        for i in range(3):
            e = np.zeros(3)
            e[i] = 1e-6
            fd = (avg_qr_sum_rate(wh, w, eta + e, 0.1) - avg_qr_sum_rate(wh, w, eta - e, 0.1)) / 2e-6
            assert g[i] == pytest.approx(fd, rel=1e-5)

    def test_gradient_at_zero(self, rng):
        wh = whitened(rng, 4, 3)
        c = avg_qr_gains(wh, np.eye(4), 0.1)
        np.testing.assert_allclose(grad_avg_qr_sum_rate(wh, np.eye(4), np.zeros(3), 0.1), LOG2E * c)

    def test_symmetric_gradient(self):
        obj = AvgQrObjective(np.full(3, 50.0))
        g = obj.grad(np.full(3, 0.4))
        assert g[0] == g[1] == g[2]

    def test_curvature_matches_f_second(self):
        c = np.array([2.0, 40.0])
        eta = np.array([0.3, 0.7])
        expect = -LOG2E * c**2 * specfun.f_second(c * eta)
        np.testing.assert_allclose(AvgQrObjective(c).curvature(eta), expect)

    @given(st.integers(0, 2**32 - 1))
    def test_average_objective_concave(self, seed):
        rng = np.random.default_rng(seed)
        obj = AvgQrObjective(10 ** rng.uniform(-2, 6, size=4))
        a, b = rng.uniform(size=4), rng.uniform(size=4)
        assert obj.value((a + b) / 2) >= (obj.value(a) + obj.value(b)) / 2 - 1e-9
