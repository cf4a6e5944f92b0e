import math

import numpy as np
import pytest

from tte_stability.context import StudyContext
from tte_stability.exceptions import ValidationError
from tte_stability.models import RunConfig, SmibParams
from tte_stability.smib import SmibAPI, claim1_aux, claim2_aux, claim2_bound


@pytest.fixture
def api(ctx):
    return SmibAPI(ctx)


class TestClosedForm:

    def test_order_two_at_thirty_degrees(self, api):
        assert math.isclose(api.uep_closed_form(math.pi / 6, 2).value, 3.98770, abs_tol=1e-4)

    def test_order_three_at_thirty_degrees(self, api):
        assert math.isclose(api.uep_closed_form(math.pi / 6, 3).value, 2.25565, abs_tol=1e-4)

    def test_accepts_params(self, api):
        est = api.uep_closed_form(SmibParams(delta_s=0.4), 2)
        assert est.present and est.error > 0

    def test_rejects_other_orders(self, api):
        with pytest.raises(ValidationError):
            api.uep_closed_form(0.5, 4)

    @pytest.mark.parametrize("delta_s", [0.0, -0.1, math.pi / 2, 2.0])
    def test_rejects_delta_s_out_of_range(self, api, delta_s):
        with pytest.raises(ValidationError):
            api.uep_closed_form(delta_s, 2)


class TestNumeric:

    @pytest.mark.parametrize("delta_s", [0.05, 0.1, 0.3, math.pi / 6, 1.0, 1.5])
    @pytest.mark.parametrize("order", [2, 3])
    def test_matches_closed_form(self, api, delta_s, order):
        numeric = api.uep_numeric(delta_s, order).value
        closed = api.uep_closed_form(delta_s, order).value
        assert math.isclose(numeric, closed, rel_tol=1e-8)

    def test_order_five_absent_below_threshold(self, api):
        est = api.uep_numeric(0.3, 5)
        assert not est.present
        assert est.value is None and est.error is None

    @pytest.mark.parametrize("delta_s", [0.1, 0.2])
    def test_order_six_far_root_is_not_a_uep(self, api, delta_s):
        est = api.uep_numeric(delta_s, 6)
        assert not est.present
        assert est.value is None

    def test_order_two_root_outside_scan_window(self, api):
        est = api.uep_numeric(0.05, 2)
        assert est.present
        assert math.isclose(est.value, 0.05 + 2 / math.tan(0.05), rel_tol=1e-12)

    def test_order_fifteen_close_to_true_uep(self, api):
        est = api.uep_numeric(math.pi / 6, 15)
        assert math.isclose(est.value, 5 * math.pi / 6, abs_tol=1e-6)

    @pytest.mark.parametrize("order", [1, 16])
    def test_rejects_order_out_of_range(self, api, order):
        with pytest.raises(ValidationError):
            api.uep_numeric(0.5, order)

    @pytest.mark.parametrize("order, expected", [(5, 0.401), (6, 0.233)])
    def test_existence_thresholds(self, api, order, expected):
        assert abs(api.existence_threshold(order) - expected) <= 0.002

    def test_threshold_only_for_five_and_six(self, api):
        with pytest.raises(ValidationError):
            api.existence_threshold(4)


class TestSweep:

    def test_grid_stays_inside_open_interval(self, api):
        grid = api.delta_grid(0.01)
        assert grid[0] == pytest.approx(0.01)
        assert grid[-1] < math.pi / 2
        assert len(grid) == 157

    def test_sweep_columns_and_size(self, api):
        table = api.sweep_ueps([3, 4], 0.1)
        assert list(table.columns) == ["delta_s", "order", "estimate", "error"]
        assert len(table) == 2 * len(api.delta_grid(0.1))

    def test_sweep_is_schedule_independent(self):
        serial = SmibAPI(StudyContext(RunConfig(threads=1))).sweep_ueps([2, 5, 8], 0.05)
        parallel = SmibAPI(StudyContext(RunConfig(threads=3))).sweep_ueps([2, 5, 8], 0.05)
        assert serial.equals(parallel)

    def test_accuracy_improves_within_parity_family(self, api):
        table = api.sweep_ueps(range(2, 10), 0.05)
        summary = api.accuracy_summary(table[table["delta_s"] >= 0.45])
        assert len(summary) == 4
        assert (summary["max_err_high"] <= summary["max_err_low"]).all()


class TestOrdering:

    def test_chains_hold_on_coarse_grid(self, api):
        report = api.check_ordering(0.01)
        assert report.ok, report.violations[:3]
        assert report.points == 157
        assert report.absent.get(5, 0) > 0
        assert report.absent.get(6, 0) > 0

    def test_claims_hold_on_coarse_grid(self, api):
        assert api.verify_claims(0.01) == {"claim1": 0, "claim2": 0}

    def test_conjecture_agrees_with_chains(self, api):
        assert api.check_conjecture(range(2, 10), 0.02).ok

    @pytest.mark.slow
    def test_conjecture_extends_to_order_thirteen(self, api):
        assert api.check_conjecture(range(10, 14), 0.005).ok

    @pytest.mark.slow
    def test_chains_hold_on_fine_grid(self, api):
        report = api.check_ordering(0.001)
        assert report.ok
        assert api.verify_claims(0.001) == {"claim1": 0, "claim2": 0}


class TestClaimConstants:

    def test_claim2_value_at_one(self):
        assert math.isclose(float(claim2_aux(1.0)), math.sqrt(6) - math.pi, abs_tol=1e-12)
        assert math.isclose(float(claim2_aux(1.0)), -0.6921, abs_tol=1e-4)

    def test_claim2_bound(self):
        assert math.isclose(claim2_bound(), 1.3744, abs_tol=1e-4)

    def test_claim_functions_have_fixed_sign(self):
        x = np.linspace(0.01, 0.99, 99)
        assert (claim1_aux(x) > 0).all()
        assert (claim2_aux(x) < 0).all()


class TestPowerAngle:

    def test_curve_columns(self, api):
        curve = api.pdelta_curve(math.pi / 6, 1.0, [2, 3])
        assert list(curve.columns) == ["delta", "P_e", "P_e2", "P_e3"]
        np.testing.assert_allclose(curve["P_e"], np.sin(curve["delta"]))

    def test_series_agree_at_delta_s(self, api):
        ds = 0.6
        curve = api.pdelta_curve(ds, 2.0, [4], delta_range=(ds, ds + 1.0), samples=11)
        assert math.isclose(curve["P_e4"].iloc[0], 2.0 * math.sin(ds), abs_tol=1e-15)

    def test_right_intersection_matches_closed_form(self, api):
        cross = api.right_intersection(math.pi / 6, 1.0, 2)
        assert math.isclose(cross, api.uep_closed_form(math.pi / 6, 2).value, abs_tol=1e-3)

    def test_right_intersection_absent(self, api):
        assert api.right_intersection(0.3, 1.0, 5, delta_range=(0.0, 3.0)) is None

    def test_range_must_contain_delta_s(self, api):
        with pytest.raises(ValidationError):
            api.pdelta_curve(0.5, 1.0, [2], delta_range=(1.0, 2.0))
