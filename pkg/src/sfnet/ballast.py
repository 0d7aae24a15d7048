"""Per-vessel-type linear regression of ballast discharge volume on DWT."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DegenerateDWT, InsufficientData
from .ingest import DischargeEvent

#: reserved key for the all-types fallback fit in JSON exports
POOLED_KEY = "pooled"


@dataclass(frozen=True)
class LinearFit:
    """Affine OLS fit discharge = intercept + slope * dwt."""

    intercept: float
    slope: float
    n: int
    rse: float  # residual standard error, 0 when the fit is exact or n <= 2

    def predict(self, dwt: float) -> float:
        return max(0.0, self.intercept + self.slope * dwt)


@dataclass(frozen=True)
class DischargeModel:
    """Fitted per-type discharge models with a pooled fallback.

    ``by_type`` maps each vessel type seen in the fitting data to its
    effective fit (type-specific when the type had at least two distinct DWT
    values, the pooled fit otherwise). Types absent from the mapping predict
    with the pooled fit.
    """

    by_type: Mapping[str, LinearFit]
    pooled: LinearFit

    def fit_for(self, vessel_type: str) -> LinearFit:
        return self.by_type.get(vessel_type, self.pooled)

    def to_json(self) -> str:
        payload = {
            vessel_type: {"intercept": fit.intercept, "slope": fit.slope,
                          "n": fit.n, "rse": fit.rse}
            for vessel_type, fit in self.by_type.items()
        }
        payload[POOLED_KEY] = {"intercept": self.pooled.intercept, "slope": self.pooled.slope,
                               "n": self.pooled.n, "rse": self.pooled.rse}
        return json.dumps(payload, sort_keys=True, indent=2)

    @staticmethod
    def from_json(text: str) -> "DischargeModel":
        payload = json.loads(text)
        # pipeline artifacts wrap the fits under "models" next to provenance keys
        payload = payload.get("models", payload)
        fits = {name: LinearFit(entry["intercept"], entry["slope"],
                                int(entry["n"]), entry["rse"])
                for name, entry in payload.items()}
        pooled = fits.pop(POOLED_KEY)
        return DischargeModel(by_type=fits, pooled=pooled)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @staticmethod
    def load(path) -> "DischargeModel":
        return DischargeModel.from_json(Path(path).read_text(encoding="utf-8"))


def _ols(dwt: np.ndarray, discharge: np.ndarray) -> LinearFit:
    """Closed-form affine least squares; caller guarantees ≥2 distinct x."""
    x = np.asarray(dwt, dtype=float)
    y = np.asarray(discharge, dtype=float)
    xm = x.mean()
    ym = y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    residuals = y - (intercept + slope * x)
    n = x.size
    rse = float(np.sqrt(np.sum(residuals ** 2) / (n - 2))) if n > 2 else 0.0
    return LinearFit(intercept=intercept, slope=slope, n=int(n), rse=rse)


def fit_discharge_models(events: Sequence[DischargeEvent]) -> DischargeModel:
    """Fit OLS per vessel type, pooling types with fewer than 2 distinct DWTs.

    Raises InsufficientData with fewer than two events overall and
    DegenerateDWT when every event shares one DWT (no slope identifiable).
    """
    if len(events) < 2:
        raise InsufficientData(f"need at least 2 discharge events, got {len(events)}")
    # canonical order makes the fit exactly permutation-invariant
    events = sorted(events, key=lambda e: (e.vessel_type, e.dwt, e.discharge))
    all_dwt = np.array([e.dwt for e in events], dtype=float)
    all_vol = np.array([e.discharge for e in events], dtype=float)
    if np.unique(all_dwt).size < 2:
        raise DegenerateDWT("all discharge events share a single DWT value")
    pooled = _ols(all_dwt, all_vol)

    groups: dict = {}
    for event in events:
        groups.setdefault(event.vessel_type, []).append(event)
    by_type = {}
    for vessel_type in sorted(groups):
        members = groups[vessel_type]
        dwt = np.array([e.dwt for e in members], dtype=float)
        if np.unique(dwt).size >= 2:
            vol = np.array([e.discharge for e in members], dtype=float)
            by_type[vessel_type] = _ols(dwt, vol)
        else:
            by_type[vessel_type] = pooled
    return DischargeModel(by_type=by_type, pooled=pooled)


def predict_discharge(model: DischargeModel, vessel_type: str, dwt: float) -> float:
    """Predicted discharge volume (m³), clamped to ≥ 0; pooled for unseen types."""
    return model.fit_for(vessel_type).predict(dwt)
