"""Discharge regression tests with a closed-form least-squares oracle."""

import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sfnet.ballast import DischargeModel, fit_discharge_models, predict_discharge
from sfnet.errors import DegenerateDWT, InsufficientData
from sfnet.ingest import DischargeEvent


def ols_oracle(xs, ys):
    """Textbook normal-equations solution, independent of the implementation."""
    n = len(xs)
    sx, sy = sum(xs), sum(ys)
    sxx = sum(x * x for x in xs)
    sxy = sum(x * y for x, y in zip(xs, ys))
    slope = (n * sxy - sx * sy) / (n * sxx - sx * sx)
    intercept = (sy - slope * sx) / n
    return intercept, slope


def events_on_line(vessel_type, intercept, slope, dwts, noise=None):
    out = []
    for i, dwt in enumerate(dwts):
        eps = noise[i] if noise else 0.0
        out.append(DischargeEvent(vessel_type, dwt, intercept + slope * dwt + eps))
    return out


class TestFit:
    def test_exact_line_recovered(self):
        events = events_on_line("Container", 100.0, 0.05, [10_000, 20_000, 50_000, 80_000])
        model = fit_discharge_models(events)
        fit = model.by_type["Container"]
        assert math.isclose(fit.intercept, 100.0, rel_tol=1e-9)
        assert math.isclose(fit.slope, 0.05, rel_tol=1e-9)
        assert fit.rse == pytest.approx(0.0, abs=1e-9)

    def test_two_types_disjoint_lines(self):
        events = (events_on_line("Container", 100.0, 0.05, [10_000, 30_000, 60_000])
                  + events_on_line("OilTanker", 400.0, 0.01, [50_000, 150_000, 250_000]))
        model = fit_discharge_models(events)
        assert math.isclose(model.by_type["Container"].slope, 0.05, rel_tol=1e-9)
        assert math.isclose(model.by_type["OilTanker"].slope, 0.01, rel_tol=1e-9)
        assert math.isclose(model.by_type["OilTanker"].intercept, 400.0, rel_tol=1e-9)

    def test_noisy_fit_matches_normal_equations(self):
        rng = random.Random(9)
        dwts = [rng.uniform(5_000, 150_000) for _ in range(40)]
        noise = [rng.uniform(-50, 50) for _ in dwts]
        events = events_on_line("BulkDry", 250.0, 0.02, dwts, noise)
        model = fit_discharge_models(events)
        a, b = ols_oracle([e.dwt for e in events], [e.discharge for e in events])
        assert math.isclose(model.by_type["BulkDry"].intercept, a, rel_tol=1e-9)
        assert math.isclose(model.by_type["BulkDry"].slope, b, rel_tol=1e-9)

    def test_single_event_type_uses_pooled(self):
        events = (events_on_line("Container", 100.0, 0.05, [10_000, 30_000, 60_000])
                  + [DischargeEvent("Chemical", 20_000, 5_000.0)])
        model = fit_discharge_models(events)
        assert model.by_type["Chemical"] == model.pooled
        assert model.by_type["Container"] != model.pooled

    def test_repeated_single_dwt_type_uses_pooled(self):
        events = (events_on_line("Container", 100.0, 0.05, [10_000, 30_000])
                  + [DischargeEvent("Chemical", 20_000, 5_000.0),
                     DischargeEvent("Chemical", 20_000, 5_100.0)])
        model = fit_discharge_models(events)
        assert model.by_type["Chemical"] == model.pooled

    def test_insufficient_and_degenerate(self):
        with pytest.raises(InsufficientData):
            fit_discharge_models([DischargeEvent("Container", 10_000, 600.0)])
        with pytest.raises(DegenerateDWT):
            fit_discharge_models([DischargeEvent("Container", 10_000, 600.0),
                                  DischargeEvent("OilTanker", 10_000, 700.0)])

    def test_residuals_sum_to_zero(self):
        rng = random.Random(4)
        dwts = [rng.uniform(5_000, 150_000) for _ in range(25)]
        noise = [rng.uniform(-100, 100) for _ in dwts]
        events = events_on_line("Passenger", 80.0, 0.03, dwts, noise)
        model = fit_discharge_models(events)
        fit = model.by_type["Passenger"]
        residuals = [e.discharge - (fit.intercept + fit.slope * e.dwt) for e in events]
        assert abs(sum(residuals)) <= 1e-6 * sum(abs(e.discharge) for e in events)

    def test_permutation_invariant(self):
        rng = random.Random(13)
        dwts = [rng.uniform(5_000, 150_000) for _ in range(20)]
        events = events_on_line("RoRoCargo", 10.0, 0.04, dwts)
        shuffled = list(events)
        rng.shuffle(shuffled)
        assert fit_discharge_models(events) == fit_discharge_models(shuffled)


class TestPredict:
    def model(self):
        return fit_discharge_models(
            events_on_line("Container", 100.0, 0.05, [10_000, 30_000, 60_000]))

    def test_arithmetic(self):
        assert predict_discharge(self.model(), "Container", 10_000) == pytest.approx(600.0)

    def test_clamped_at_zero(self):
        from sfnet.ballast import LinearFit
        pooled = LinearFit(100.0, 0.01, 5, 0.0)
        neg = DischargeModel(by_type={"X": LinearFit(-500.0, 0.01, 3, 0.0)}, pooled=pooled)
        assert predict_discharge(neg, "X", 1_000) == 0.0
        assert predict_discharge(neg, "X", 100_000) == pytest.approx(500.0)

    def test_unseen_type_falls_back(self):
        model = self.model()
        assert predict_discharge(model, "Other", 40_000) == pytest.approx(
            model.pooled.predict(40_000))

    @given(st.floats(min_value=1.0, max_value=1e6, allow_nan=False))
    def test_monotone_in_dwt(self, dwt):
        model = self.model()
        lo = predict_discharge(model, "Container", dwt)
        hi = predict_discharge(model, "Container", dwt * 1.5)
        assert hi >= lo


class TestJsonRoundTrip:
    def test_round_trip(self, tmp_path):
        events = (events_on_line("Container", 100.0, 0.05, [10_000, 30_000, 60_000])
                  + [DischargeEvent("Chemical", 20_000, 5_000.0)])
        model = fit_discharge_models(events)
        path = tmp_path / "models.json"
        model.save(path)
        again = DischargeModel.load(path)
        assert again == model

    def test_schema(self):
        import json
        model = fit_discharge_models(
            events_on_line("Container", 100.0, 0.05, [10_000, 30_000]))
        payload = json.loads(model.to_json())
        assert set(payload["Container"]) == {"intercept", "slope", "n", "rse"}
        assert "pooled" in payload
