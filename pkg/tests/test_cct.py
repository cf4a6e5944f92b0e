import math

import numpy as np
import pandas as pd
import pytest

from tte_stability.context import StudyContext
from tte_stability.exceptions import NotAnEquilibriumError, ValidationError
from tte_stability.models import ORIGINAL, CctResult, RunConfig
from tte_stability.multimachine.cct import CctAPI

STRESSED_DISPATCH_MW = {2: 200.0, 3: 100.0}


@pytest.fixture
def cct(study):
    return study.mm.cct


@pytest.fixture
def coarse():
    return CctAPI(StudyContext(RunConfig(dt=0.01, horizon=3.0, cct_tol=0.01)))


class TestFaultOnPath:

    def test_cleared_at_once_is_stable(self, cct, cont1):
        assert cct.simulate_contingency(cont1, ORIGINAL, 0.0)

    @pytest.mark.parametrize("t_clear", [0.2, 0.2345])
    def test_cached_state_matches_direct_integration(self, cct, cont1, t_clear):
        path = cct.fault_on_path(cont1, ORIGINAL, 0.3)
        np.testing.assert_allclose(
            path.state_at(t_clear), cct.contingency_start(cont1, ORIGINAL, t_clear), rtol=1e-10, atol=1e-12
        )

    def test_outside_cached_interval(self, cct, cont1):
        path = cct.fault_on_path(cont1, ORIGINAL, 0.1)
        with pytest.raises(ValidationError):
            path.state_at(0.2)

    def test_start_at_zero_is_prefault_sep(self, cct, cont1):
        start = cct.contingency_start(cont1, ORIGINAL, 0.0)
        np.testing.assert_array_equal(start[0::2], cont1.prefault_sep)
        assert not start[1::2].any()

    def test_negative_clearing_time(self, cct, cont1):
        with pytest.raises(ValidationError):
            cct.simulate_contingency(cont1, ORIGINAL, -0.1)

    def test_stitched_trajectory(self, cont1):
        api = CctAPI(StudyContext(RunConfig(dt=0.01, horizon=1.0)))
        traj = api.contingency_trajectory(cont1, 3, 0.15)
        times = np.asarray(traj.times)
        assert times[0] == 0.0
        assert (np.diff(times) > 0).all()
        assert np.isclose(times, 0.15).any()
        assert times[-1] == pytest.approx(1.15)
        assert traj.states.shape == (len(times), 6)


class TestFindCct:

    def test_short_fault_at_bus_seven(self, coarse, cont7):
        result = coarse.find_cct(cont7, ORIGINAL)
        assert result.status == "ok"
        assert 0.12 < result.cct < 0.25
        assert result.evaluations > 21

    def test_cap_not_reached(self, coarse, cont1):
        result = coarse.find_cct(cont1, ORIGINAL, cap=0.05)
        assert result.status == "exceeds_cap"
        assert result.cct is None
        assert math.isinf(result.normalized)

    def test_failure_is_reported_not_raised(self, coarse, cont1, monkeypatch):
        def broken(cont, order):
            raise NotAnEquilibriumError("expansion point is not an equilibrium")

        monkeypatch.setattr(coarse, "postfault_system", broken)
        result = coarse.find_cct(cont1, 4)
        assert result.status == "failed"
        assert "equilibrium" in result.message

    @pytest.mark.parametrize("tol, cap", [(0.0, 1.0), (0.01, -1.0)])
    def test_rejects_bad_limits(self, coarse, cont1, tol, cap):
        with pytest.raises(ValidationError):
            coarse.find_cct(cont1, ORIGINAL, tol=tol, cap=cap)


class TestNormalize:

    def test_ratio(self):
        base = CctResult(contingency_id=1, order=ORIGINAL, cct=0.32)
        tte = CctResult(contingency_id=1, order=3, cct=0.288)
        assert CctAPI.normalize(tte, base).normalized == pytest.approx(0.9)

    def test_exceeds_cap_is_infinite(self):
        base = CctResult(contingency_id=3, order=ORIGINAL, cct=0.44)
        tte = CctResult(contingency_id=3, order=5, status="exceeds_cap")
        assert math.isinf(CctAPI.normalize(tte, base).normalized)

    def test_failed_is_nan(self):
        base = CctResult(contingency_id=1, order=ORIGINAL, status="failed", message="boom")
        tte = CctResult(contingency_id=1, order=2, cct=0.5)
        assert math.isnan(CctAPI.normalize(tte, base).normalized)

    def test_compare_tables(self):
        base = pd.DataFrame({"id": [1, 2], "original": [0.33, 0.34], "TTE2": [1.8, 1.6], "TTE5": [2.4, math.inf]})
        stressed = pd.DataFrame({"id": [1, 2], "original": [0.2, 0.25], "TTE2": [1.4, 1.2], "TTE5": [1.02, 1.03]})
        merged, trend = CctAPI.compare_tables(base, stressed)
        assert len(merged) == 2
        assert "TTE2_base" in merged.columns and "TTE2_stressed" in merged.columns
        assert trend["order"].tolist() == ["TTE2", "TTE5"]
        row = trend.set_index("order").loc["TTE2"]
        assert row["base"] == pytest.approx(0.7)
        assert row["stressed"] == pytest.approx(0.3)
        assert trend.set_index("order").loc["TTE5", "base"] == pytest.approx(1.4)


@pytest.fixture(scope="module")
def nine_bus_table(study, case, specs):
    return study.mm.cct.cct_table(case, specs, range(2, 10))


@pytest.fixture(scope="module")
def stressed_table(study, case, specs):
    stressed_case = study.mm.network.redispatch(case, STRESSED_DISPATCH_MW)
    return study.mm.cct.cct_table(stressed_case, specs, [2])


@pytest.mark.slow
class TestNineBusCct:

    def test_first_contingency_brackets(self, cct, cont1):
        assert cct.simulate_contingency(cont1, ORIGINAL, 0.32)
        assert not cct.simulate_contingency(cont1, ORIGINAL, 0.34)

    def test_reference_ccts(self, nine_bus_table):
        for _, row in nine_bus_table.iterrows():
            tolerance = max(0.02, 0.05 * row["reference_cct"])
            assert abs(row[ORIGINAL] - row["reference_cct"]) <= tolerance, row["id"]

    def test_optimistic_orders_overestimate(self, nine_bus_table):
        assert (nine_bus_table["TTE2"] > 1).all()
        assert (nine_bus_table["TTE5"] >= 1).all()
        assert (nine_bus_table["TTE6"] >= 1).all()

    def test_conservative_orders_underestimate(self, nine_bus_table):
        assert (nine_bus_table["TTE3"] < 1).all()
        assert (nine_bus_table["TTE4"] < 1).all()
        # 7、8阶与原系统只差一个二分容差
        assert (nine_bus_table["TTE7"] <= 1).all()
        assert (nine_bus_table["TTE8"] <= 1).all()

    def test_ninth_order_close_to_original(self, nine_bus_table):
        assert nine_bus_table["TTE9"].between(0.995, 1.005).all()

    def test_first_contingency_second_order(self, nine_bus_table):
        assert nine_bus_table.loc[0, "TTE2"] == pytest.approx(1.817, rel=0.05)

    @pytest.mark.parametrize("contingency_id", [3, 5])
    def test_fifth_order_exceeds_cap(self, nine_bus_table, contingency_id):
        row = nine_bus_table.set_index("id").loc[contingency_id]
        assert math.isinf(row["TTE5"])

    def test_redispatch_reduces_every_cct(self, nine_bus_table, stressed_table):
        base = nine_bus_table.set_index("id")[ORIGINAL]
        stressed = stressed_table.set_index("id")[ORIGINAL]
        assert len(stressed) == 12
        assert (stressed < base).all(), (stressed - base).to_dict()

    def test_redispatch_sharpens_second_order(self, nine_bus_table, stressed_table):
        assert stressed_table.loc[0, "TTE2"] == pytest.approx(1.409, rel=0.05)
        _, trend = CctAPI.compare_tables(nine_bus_table, stressed_table)
        assert trend["order"].tolist() == ["TTE2"]
        assert trend.loc[0, "stressed"] < trend.loc[0, "base"]
