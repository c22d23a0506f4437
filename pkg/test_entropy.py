"""Tests for the entropy and success-probability calculators.

Reference values come from an independent 60-digit Decimal evaluation.
"""
import math
from decimal import Decimal, getcontext
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from src.models.entropy import EATParams, FrequencyRegion, MinTradeoff
from src.models.errors import DomainError, EmptyAcceptanceSet, EmptyString
from src.service.entropy_service import (
    bound_report, certified_min_entropy, eat_bound, freq, g_correction, h_rate,
    minentropy_from_smooth, success_bounds, xhog_entropy,
)

getcontext().prec = 60
GRID = 1000
REL_TOL = 1e-12


def _log2(x: Decimal) -> Decimal:
    return x.ln() / Decimal(2).ln()


def _close(value: float, reference: Decimal) -> bool:
    return abs(Decimal(value) - reference) <= Decimal(REL_TOL) * abs(reference)


class TestFreq:
    def test_balanced(self):
        assert freq([0, 1, 1, 0]) == {0: Fraction(1, 2), 1: Fraction(1, 2)}

    def test_point_mass(self):
        assert freq([1, 1, 1]) == {1: Fraction(1)}

    def test_explicit_alphabet(self):
        q = freq(["a", "b", "a", "c"], alphabet=["a", "b", "c"])
        assert q == {"a": Fraction(1, 2), "b": Fraction(1, 4), "c": Fraction(1, 4)}
        assert sum(q.values()) == 1

    def test_unseen_symbols_get_zero(self):
        assert freq([0, 0], alphabet=[0, 1]) == {0: Fraction(1), 1: Fraction(0)}

    def test_empty(self):
        with pytest.raises(EmptyString):
            freq([])

    def test_symbol_outside_alphabet(self):
        with pytest.raises(DomainError):
            freq([2], alphabet=[0, 1])


class TestHRate:
    def test_half_ones(self):
        f = MinTradeoff(coeffs={1: 2.0})
        assert h_rate(f, lambda s: sum(s) * 2 >= len(s), 4) == pytest.approx(1.0)

    def test_constant_tradeoff(self):
        assert h_rate(MinTradeoff(constant=0.3), lambda s: True, 5) == pytest.approx(0.3)

    def test_singleton(self):
        f = MinTradeoff(constant=0.1, coeffs={0: -1.0, 1: 0.7})
        assert h_rate(f, lambda s: all(x == 1 for x in s), 6) == pytest.approx(0.8)

    def test_nothing_accepted(self):
        with pytest.raises(EmptyAcceptanceSet):
            h_rate(MinTradeoff(), lambda s: False, 3)

    def test_empty_region(self):
        with pytest.raises(EmptyAcceptanceSet):
            h_rate(MinTradeoff(), FrequencyRegion(vertices=()), 3)

    def test_enumeration_limit(self):
        with pytest.raises(DomainError):
            h_rate(MinTradeoff(), lambda s: True, 21)

    def test_region_vertices_must_be_distributions(self):
        with pytest.raises(ValueError):
            FrequencyRegion(vertices=({0: Fraction(1, 2), 1: Fraction(1, 3)},))

    def test_stray_coefficient(self):
        with pytest.raises(ValueError):
            MinTradeoff(alphabet=(0, 1), coeffs={2: 1.0})

    @pytest.mark.parametrize("n", range(1, 13))
    def test_enumeration_matches_vertex_minimisation(self, n):
        rng = np.random.default_rng(n)
        for _ in range(3):
            f = MinTradeoff(constant=float(rng.normal()), coeffs={0: float(rng.normal()), 1: float(rng.normal())})
            low, high = sorted(int(v) for v in rng.integers(0, n + 1, size=2))
            accepted = lambda s: low <= sum(s) <= high
            region = FrequencyRegion(vertices=tuple(
                {0: Fraction(n - k, n), 1: Fraction(k, n)} for k in range(low, high + 1)
            ))
            assert h_rate(f, accepted, n) == h_rate(f, region, n)


class TestEAT:
    def test_spot_value(self):
        assert eat_bound(EATParams(n=100, h=0.5, c1=1, c0=5)) == pytest.approx(35.0)

    def test_no_corrections(self):
        assert eat_bound(EATParams(n=37, h=0.25)) == 37 * 0.25

    @pytest.mark.parametrize("n", [1, 10, 1000])
    def test_zero_rate_never_certifies(self, n):
        assert eat_bound(EATParams(n=n, h=0.0, c1=0.5, c0=1.0)) <= 0.0

    def test_certified_min_entropy(self):
        p = EATParams(n=100, h=0.5, c1=1, c0=5, eps=0.5)
        assert certified_min_entropy(p) == pytest.approx(-math.log2(0.5 + 2 ** -35))

    def test_negative_bound_is_clamped_before_desmoothing(self):
        assert certified_min_entropy(EATParams(n=4, h=0.0, c0=3.0, eps=0.5)) == pytest.approx(-math.log2(1.5))

    def test_grid_against_decimal(self):
        rng = np.random.default_rng(0)
        for _ in range(GRID):
            n = int(rng.integers(100, 10 ** 6))
            h, c1, c0 = float(rng.uniform(1.0, 2.0)), float(rng.uniform(0.0, 1.0)), float(rng.uniform(0.0, 5.0))
            ref = n * Decimal(h) - Decimal(c1) * Decimal(n).sqrt() - Decimal(c0)
            assert _close(eat_bound(EATParams(n=n, h=h, c1=c1, c0=c0)), ref)


class TestGCorrection:
    def test_one_over_root_two(self):
        assert g_correction(1 / math.sqrt(2)) == pytest.approx(1.7716, abs=1e-4)

    def test_blows_up_as_eps_vanishes(self):
        assert g_correction(1e-6) > 20

    def test_decreasing(self):
        assert g_correction(0.3) > g_correction(0.6) > g_correction(0.999999) > 0

    @pytest.mark.parametrize("eps", [0.0, 1.0, -0.2, 1.5])
    def test_domain(self, eps):
        with pytest.raises(DomainError):
            g_correction(eps)

    def test_grid_against_decimal(self):
        rng = np.random.default_rng(1)
        for eps in rng.uniform(0.01, 0.99, size=GRID):
            e = Decimal(float(eps))
            ref = -_log2(1 - (1 - e * e).sqrt())
            assert _close(g_correction(float(eps)), ref)


class TestMinEntropyFromSmooth:
    def test_no_smoothing(self):
        assert minentropy_from_smooth(10.0, 0.0) == 10.0

    def test_equal_terms(self):
        assert minentropy_from_smooth(10.0, 2 ** -10) == pytest.approx(9.0)

    def test_infinite_entropy_is_capped(self):
        assert minentropy_from_smooth(float("inf"), 0.5) == pytest.approx(1.0)

    @pytest.mark.parametrize("h, eps", [(10.0, 1.0), (10.0, -0.1), (-1.0, 0.1), (float("nan"), 0.1)])
    def test_domain(self, h, eps):
        with pytest.raises(DomainError):
            minentropy_from_smooth(h, eps)

    @given(h=st.floats(0.0, 200.0), eps=st.floats(1e-12, 0.99))
    def test_smoothing_only_loses_entropy(self, h, eps):
        assert minentropy_from_smooth(h, eps) < h

    def test_grid_against_decimal(self):
        rng = np.random.default_rng(2)
        for _ in range(GRID):
            h = float(rng.uniform(2.0, 50.0))
            eps = float(10 ** rng.uniform(-9, math.log10(0.25)))
            ref = -_log2(Decimal(eps) + Decimal(2) ** -Decimal(h))
            assert _close(minentropy_from_smooth(h, eps), ref)


class TestSuccessBounds:
    def test_single_round(self):
        bounds = success_bounds(p_test=1.0, hmin=20.0)
        assert bounds.single == 2.0 ** -20
        assert bounds.repeated is None

    def test_repeated(self):
        bounds = success_bounds(p_block=0.1, alpha=1.0, m=4)
        assert bounds.repeated_raw == pytest.approx(5.46e-3, rel=1e-2)
        assert bounds.repeated == bounds.repeated_raw
        assert bounds.exponent == 4
        assert not bounds.vacuous

    def test_large_block_probability_is_vacuous(self):
        bounds = success_bounds(p_block=0.5, alpha=1.0, m=4)
        assert bounds.repeated_raw == pytest.approx(3.41, abs=0.01)
        assert bounds.repeated == 1.0
        assert bounds.vacuous

    def test_floor_to_zero(self):
        bounds = success_bounds(p_block=0.01, alpha=0.25, m=3)
        assert bounds.exponent == 0
        assert bounds.repeated_raw == 1.0
        assert bounds.vacuous

    def test_exact_floor(self):
        assert success_bounds(p_block=0.1, alpha=0.7, m=10).exponent == 7

    @pytest.mark.parametrize("kwargs", [
        {"p_test": 0.5},
        {"p_test": 1.5, "hmin": 1.0},
        {"p_block": 0.1, "alpha": 1.0},
        {"p_block": 0.1, "alpha": 0.0, "m": 3},
        {"p_block": 0.1, "alpha": 1.0, "m": 0},
    ])
    def test_domain(self, kwargs):
        with pytest.raises(DomainError):
            success_bounds(**kwargs)

    @given(p=st.floats(0.0, 1.0), hmin=st.floats(0.0, 100.0))
    def test_single_is_a_minimum(self, p, hmin):
        single = success_bounds(p_test=p, hmin=hmin).single
        assert single <= p and single <= 2.0 ** -hmin

    def test_grid_against_decimal(self):
        rng = np.random.default_rng(3)
        e = Decimal(1).exp()
        for _ in range(GRID):
            p = float(rng.uniform(0.001, 0.3))
            alpha = float(rng.choice([0.25, 0.5, 0.75, 1.0]))
            m = int(rng.integers(4, 21))
            k = math.floor(Fraction(repr(alpha)) * m)
            ref = (e * Decimal(p) / Decimal(alpha)) ** k
            assert _close(success_bounds(p_block=p, alpha=alpha, m=m).repeated_raw, ref)


class TestXHOGEntropy:
    def test_spot_value(self):
        assert xhog_entropy(64, 1.0, 0.5, 0.0) == 32.0

    def test_full_slack(self):
        assert xhog_entropy(16, 1.0, 1.0, 2.0) == pytest.approx(-8.0)

    def test_monotone_once_n_reaches_eight(self):
        values = [xhog_entropy(n, 1.0, 0.5, 1.0) for n in range(8, 200)]
        assert all(b > a for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("args", [(0, 1.0, 0.5, 0.0), (8, 0.0, 0.5, 0.0), (8, 1.0, 0.0, 0.0), (8, 1.0, 0.5, -1.0)])
    def test_domain(self, args):
        with pytest.raises(DomainError):
            xhog_entropy(*args)

    def test_grid_against_decimal(self):
        rng = np.random.default_rng(4)
        for _ in range(GRID):
            n = int(rng.integers(100, 10 ** 5))
            delta, eta = float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.01, 0.5))
            ref = (1 - Decimal(eta)) * Decimal(delta) * n - Decimal(0.1) * _log2(Decimal(n))
            assert _close(xhog_entropy(n, delta, eta, 0.1), ref)


class TestBoundReport:
    def test_collects_requested_calculators(self):
        report = bound_report(
            eat=EATParams(n=100, h=0.5, c1=1, c0=5),
            g_eps=0.5,
            success={"p_block": 0.1, "alpha": 1.0, "m": 4},
        )
        assert set(report) == {"eat", "g_correction", "success_bounds"}
        assert report["eat"]["eat_bound"] == pytest.approx(35.0)
        assert report["success_bounds"]["vacuous"] is False

    def test_empty_request(self):
        assert bound_report() == {}
