import math

import numpy as np
import pytest

from ewlsp.po2 import PO2_MEAN_CONSTANT, po2_expectation_check, po2_round


class TestRounding:
    def test_identity_group(self):
        out = po2_round({7: 1.0}, 0.0)
        assert out.rounded_T[7] == pytest.approx(1.0)
        assert out.alpha_beta[7] == (0, 0.0)

    def test_power_pair(self):
        out = po2_round({1: 1.0, 2: 2.0}, -0.4)
        assert out.rounded_T[1] == pytest.approx(2.0**-0.4)
        assert out.rounded_T[2] == pytest.approx(2.0**0.6)
        assert out.rounded_T[2] / out.rounded_T[1] == pytest.approx(2.0, rel=1e-12)

    def test_non_dyadic_pair(self):
        # beta = log2(3) - 1 ~= 0.585; theta=0.3 >= beta-1/2 picks the low branch
        out = po2_round({1: 1.0, 2: 3.0}, 0.3)
        assert out.rounded_T[2] == pytest.approx(2.0**1.3)
        assert out.rounded_T[2] / out.rounded_T[1] == pytest.approx(2.0, rel=1e-12)

    def test_theta_domain(self):
        with pytest.raises(ValueError):
            po2_round({1: 1.0}, 0.6)
        with pytest.raises(ValueError):
            po2_round({}, 0.0)

    def test_determinism(self):
        group = {1: 0.9, 2: 2.7, 3: 0.31}
        a = po2_round(group, 0.17)
        b = po2_round(group, 0.17)
        assert a == b

    def test_invariants_random(self, rng):
        sqrt2 = math.sqrt(2.0)
        for _ in range(2000):
            size = int(rng.integers(1, 6))
            group = {i: float(rng.uniform(0.05, 50.0)) for i in range(size)}
            theta = float(rng.uniform(-0.5, 0.5))
            out = po2_round(group, theta)
            for i, T in group.items():
                r = out.rounded_T[i]
                assert T / sqrt2 * (1 - 1e-12) <= r <= sqrt2 * T * (1 + 1e-12)
            items = list(group)
            for a in items:
                for b in items:
                    k = out.exponents[a] - out.exponents[b]
                    assert out.rounded_T[a] / out.rounded_T[b] == pytest.approx(
                        2.0**k, rel=1e-12
                    )


class TestExpectation:
    def test_unit_mean(self):
        mean_t, mean_inv = po2_expectation_check(1.0)
        assert mean_t == pytest.approx(PO2_MEAN_CONSTANT, rel=1e-6)
        assert mean_inv == pytest.approx(PO2_MEAN_CONSTANT, rel=1e-6)
        assert mean_t == pytest.approx(1.020139, rel=1e-5)

    def test_linearity(self):
        mean_t, _ = po2_expectation_check(5.0)
        assert mean_t == pytest.approx(5.0 * PO2_MEAN_CONSTANT, rel=1e-6)

    def test_nonzero_beta(self, rng):
        for _ in range(10):
            base = float(rng.uniform(0.1, 2.0))
            T = base * float(rng.uniform(1.0, 7.0))
            mean_t, mean_inv = po2_expectation_check(T, base_T_min=base)
            assert mean_t == pytest.approx(PO2_MEAN_CONSTANT * T, rel=1e-6)
            assert mean_inv == pytest.approx(PO2_MEAN_CONSTANT / T, rel=1e-6)
            assert mean_t * mean_inv >= 1.0  # Cauchy-Schwarz

    def test_monte_carlo_agrees(self, rng):
        thetas = rng.uniform(-0.5, 0.5, size=200_000)
        vals = np.exp2(np.where(thetas >= -0.5, thetas, thetas + 1))
        assert float(vals.mean()) == pytest.approx(PO2_MEAN_CONSTANT, rel=2e-3)
