import math

import numpy as np
import pytest
from scipy.special import gammaln

from steiner.errors import InvalidInputError, WindowError
from steiner.growth import (
    Classification,
    GrowthReport,
    analyze,
    classify_gc,
    default_window,
    estimate_order_from_coeffs,
    estimate_order_from_mk,
    estimate_type,
    gao_vitale_test,
    mk_decay_exponent,
    naive_order_ratios,
    oscillation_bounds,
)
from steiner.volseq import (
    BoxSpec,
    VolumeSequence,
    box_volume_sequence,
    bridge_volume_sequence,
    spiral_volume_sequence,
    user_volume_sequence,
)

SPIRAL_TYPE = 1.5 * (2 * math.pi) ** (1 / 3)


@pytest.fixture(scope="module")
def spiral():
    return spiral_volume_sequence(2000)


@pytest.fixture(scope="module")
def power125():
    return box_volume_sequence(BoxSpec.power_law(1.25), 2000)


def geometric_user(L, n):
    """V_k = L^k / k!, so that m_k = L exactly."""
    k = np.arange(n + 1)
    return VolumeSequence(k * math.log(L) - gammaln(k + 1), "user")


class TestOrder:
    def test_spiral(self, spiral):
        est = estimate_order_from_coeffs(spiral, (200, 1000))
        assert 0.647 <= est.rho_hat <= 0.687
        assert est.rho_hat == pytest.approx(2 / 3, abs=1e-4)

    def test_naive_ratio_is_far_off(self, spiral):
        n, r = naive_order_ratios(spiral)
        assert r[n == 1000][0] > 0.8

    def test_terminating(self):
        est = estimate_order_from_coeffs(box_volume_sequence(BoxSpec.explicit([1, 2, 3]), 3))
        assert est.rho_hat == 0.0 and est.window is None

    def test_power_law(self, power125):
        est = estimate_order_from_coeffs(power125, (200, 2000))
        assert 0.77 <= est.rho_hat <= 0.83

    def test_short_window(self, spiral):
        with pytest.raises(WindowError):
            estimate_order_from_coeffs(spiral, (100, 105))
        with pytest.raises(WindowError):
            estimate_order_from_coeffs(spiral, (1, 50))

    def test_growing_sequence_warns_and_clamps(self, caplog):
        k = np.arange(101)
        v = VolumeSequence(0.5 * k * np.log(k + 1.0), "user")
        est = estimate_order_from_coeffs(v)
        assert est.rho_raw == math.inf and est.rho_hat == 1.0
        assert "coefficient" in caplog.text

    def test_from_mk(self, spiral):
        est = estimate_order_from_mk(spiral, (200, 2000))
        assert est.rho_hat == pytest.approx(2 / 3, abs=0.03)
        assert est.diagnostics["disagreement"] <= 0.02

    def test_from_mk_power_law_two(self):
        v = box_volume_sequence(BoxSpec.power_law(2.0), 2000)
        assert estimate_order_from_mk(v, (400, 1999)).rho_hat == pytest.approx(0.5, abs=0.03)

    def test_from_mk_finite_dimensional(self):
        v = box_volume_sequence(BoxSpec.explicit(np.ones(5)), 30)
        with pytest.raises(WindowError):
            estimate_order_from_mk(v, (2, 20))

    def test_default_window(self):
        assert default_window(2000) == (400, 2000)


class TestType:
    def test_spiral(self, spiral):
        assert estimate_type(spiral, 2 / 3, 2000).sigma_hat == pytest.approx(SPIRAL_TYPE, rel=0.02)

    def test_bridge(self):
        v = bridge_volume_sequence(2000)
        assert estimate_type(v, 2 / 3, 2000).sigma_hat == pytest.approx(SPIRAL_TYPE, rel=0.02)

    def test_dilation(self):
        v = geometric_user(0.3, 400)
        c = 2.5
        w = VolumeSequence(v.logV + np.arange(401) * math.log(c), "user")
        a = estimate_type(v, 1.0).sigma_hat
        assert estimate_type(w, 1.0).sigma_hat == pytest.approx(c * a, rel=1e-12)

    def test_rho_zero(self, spiral):
        with pytest.raises(InvalidInputError):
            estimate_type(spiral, 0.0)

    def test_geometric_limit(self):
        assert estimate_type(geometric_user(0.5, 2000), 1.0).sigma_hat == pytest.approx(0.5, abs=0.01)


class TestDecay:
    def test_spiral(self, spiral):
        assert mk_decay_exponent(spiral, (200, 1999)).exponent == pytest.approx(-0.5, abs=0.05)

    def test_power_law(self, power125):
        assert mk_decay_exponent(power125, (200, 1999)).exponent == pytest.approx(-0.25, abs=0.05)

    def test_exponential(self):
        v = box_volume_sequence(BoxSpec.exponential(1.0), 600)
        assert mk_decay_exponent(v, (50, 500)).slope < -2

    def test_flat(self):
        d = mk_decay_exponent(geometric_user(0.5, 200), (10, 199))
        assert d.exponent is None and abs(d.slope) < 1e-6


class TestOscillation:
    def test_spiral_upper(self):
        # m_k = kappa_{k+1}/kappa_k ~ sqrt(2 pi / k) by Gamma-function asymptotics
        osc = oscillation_bounds(spiral_volume_sequence(10_000))
        assert osc.upper <= math.sqrt(2 * math.pi) * 1e-2 * 1.1
        assert osc.upper == pytest.approx(math.sqrt(2 * math.pi / 9999), rel=1e-3)
        assert osc.lower == 0.0 and osc.monotone

    def test_finite_box(self):
        osc = oscillation_bounds(box_volume_sequence(BoxSpec.explicit([1, 2]), 6))
        assert osc.upper == 0.0

    def test_log_squared_monotone(self):
        osc = oscillation_bounds(box_volume_sequence(BoxSpec.log_squared(), 2000))
        assert osc.monotone and osc.trend > 0
        assert 0 < osc.upper < mk_first_ratio(box_volume_sequence(BoxSpec.log_squared(), 200))

    def test_non_monotone_flagged(self):
        osc = oscillation_bounds(user_volume_sequence([1, 0.1, 0.1]))
        assert not osc.monotone


def mk_first_ratio(v):
    return oscillation_bounds(v).upper


class TestGaoVitale:
    def test_power_law_violated(self, power125):
        gv = gao_vitale_test(power125, (100, 1999))
        assert gv.verdict == "violated"

    def test_spiral_consistent(self, spiral):
        assert gao_vitale_test(spiral).verdict == "consistent"

    def test_power_law_two_consistent(self):
        v = box_volume_sequence(BoxSpec.power_law(2.0), 2000)
        gv = gao_vitale_test(v)
        assert gv.verdict == "consistent" and gv.exponent == pytest.approx(-1.0, abs=0.05)


class TestClassification:
    def test_spiral(self, spiral):
        rep = analyze(spiral)
        assert rep.classification is Classification.GC
        assert rep.sigma_hat is None
        assert rep.to_json_dict()["sigma_hat"] == "undefined"

    def test_exponential(self):
        rep = analyze(box_volume_sequence(BoxSpec.exponential(1.0), 2000))
        assert rep.classification is Classification.GC
        assert rep.rho_hat <= 0.05

    def test_flat_sequence_not_gc(self):
        rep = analyze(geometric_user(0.5, 2000))
        assert rep.classification is Classification.NOT_GC
        assert rep.osc_upper == pytest.approx(0.5, rel=1e-10)
        assert rep.sigma_hat == pytest.approx(0.5, abs=0.01)

    def test_short_sequence_inconclusive(self):
        rep = analyze(user_volume_sequence([1, 1, 0.4, 0.1, 0.02]))
        assert rep.classification is Classification.INCONCLUSIVE
        assert "window" in rep.diagnostics["error"]

    def test_osc_upper_is_last_mk(self, power125):
        rep = analyze(power125)
        assert rep.osc_upper == math.exp(power125.logV[-1] - power125.logV[-2]) * 2000

    def test_deterministic(self, spiral):
        rep = analyze(spiral)
        assert classify_gc(rep) == classify_gc(rep) == rep.classification

    def test_rule_table(self):
        base = dict(rho_raw=0.5, sigma_hat=None, mk_decay_exponent_hat=None,
                    window=(2, 10), residual=0.0)
        gc = GrowthReport(rho_hat=0.5, rho_stderr=0.01, osc_upper=0.3,
                          classification=Classification.INCONCLUSIVE, **base)
        assert classify_gc(gc) is Classification.GC
        tiny = GrowthReport(rho_hat=1.0, rho_stderr=0.0, osc_upper=1e-4,
                            classification=Classification.INCONCLUSIVE, **base)
        assert classify_gc(tiny) is Classification.GC
        assert classify_gc(tiny, gc_threshold=1e-5) is Classification.INCONCLUSIVE
        flat = GrowthReport(rho_hat=1.0, rho_stderr=0.0, osc_upper=0.2, trailing_flat=True,
                            classification=Classification.INCONCLUSIVE, **base)
        assert classify_gc(flat) is Classification.NOT_GC

    def test_gc_implies_documented_condition(self, spiral, power125):
        for v in (spiral, power125, box_volume_sequence(BoxSpec.log_squared(), 2000)):
            rep = analyze(v)
            if rep.classification is Classification.GC:
                assert rep.rho_hat + 2 * rep.rho_stderr < 1 or rep.osc_upper < rep.gc_threshold

    def test_rho_plug_in(self, spiral):
        rep = analyze(spiral, rho_for_type=2 / 3)
        assert rep.sigma_hat == pytest.approx(SPIRAL_TYPE, rel=0.02)


class TestInvariants:
    @pytest.mark.parametrize("make", [
        lambda: spiral_volume_sequence(2000),
        lambda: bridge_volume_sequence(2000),
        lambda: box_volume_sequence(BoxSpec.power_law(1.25), 2000),
        lambda: box_volume_sequence(BoxSpec.power_law(2.0), 2000),
    ])
    def test_coeffs_vs_mk(self, make):
        v = make()
        a = estimate_order_from_coeffs(v).rho_hat
        b = estimate_order_from_mk(v, (400, 1999)).rho_hat
        assert abs(a - b) <= 0.02

    @pytest.mark.parametrize("make", [
        lambda: spiral_volume_sequence(2000),
        lambda: box_volume_sequence(BoxSpec.power_law(1.25), 2000),
        lambda: box_volume_sequence(BoxSpec.power_law(2.0), 2000),
        lambda: box_volume_sequence(BoxSpec.power_law(4.0), 2000),
    ])
    def test_mk_asymptotics(self, make):
        v = make()
        rho = estimate_order_from_coeffs(v).rho_hat
        slope = mk_decay_exponent(v, (400, 1999)).slope
        assert slope == pytest.approx(1 - 1 / rho, abs=0.07)

    def test_dilation_leaves_order(self):
        v = box_volume_sequence(BoxSpec.power_law(1.5), 2000)
        k = np.arange(2001)
        w = VolumeSequence(v.logV + k * math.log(3.0), "box")
        assert estimate_order_from_coeffs(w).rho_hat == pytest.approx(
            estimate_order_from_coeffs(v).rho_hat, abs=1e-3)
