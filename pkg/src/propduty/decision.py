"""Scenario evaluation, ACT/VERIFY/DEFER policy, humility sweeps and audit log."""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Optional

from .duty import (
    NO_BASELINE,
    BaselineHumility,
    DutyBreakdown,
    DutyInputs,
    Linear,
    SignalFunction,
    _check_unit,
    eval_signal,
    evaluate,
    signal_from_dict,
    signal_to_dict,
)


class Recommendation(str, Enum):
    ACT = "ACT"
    VERIFY = "VERIFY"
    DEFER = "DEFER"


@dataclass(frozen=True)
class PolicyThresholds:
    defer_below: float = 0.2

    def __post_init__(self) -> None:
        object.__setattr__(self, "defer_below", _check_unit("defer_below", self.defer_below))


def recommend(b: DutyBreakdown, t: PolicyThresholds = PolicyThresholds()) -> Recommendation:
    """Defer on low total duty, act when action outweighs repair, verify otherwise (ties included)."""
    if b.total < t.defer_below:
        return Recommendation.DEFER
    if b.action > b.repair:
        return Recommendation.ACT
    return Recommendation.VERIFY


# --- scenarios --------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    id: str
    label: str
    inputs: DutyInputs
    signal_function: SignalFunction = field(default_factory=Linear)
    baseline: BaselineHumility = field(default_factory=BaselineHumility)

    def __post_init__(self) -> None:
        if not isinstance(self.id, str) or not self.id:
            raise ValueError("scenario id must be a non-empty string")

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        missing = [key for key in ("id", "k", "hi", "c_signal") if key not in d]
        if missing:
            raise ValueError(f"scenario {d.get('id', '?')!r} missing fields: {', '.join(missing)}")
        return cls(
            id=d["id"],
            label=d.get("label", ""),
            inputs=DutyInputs(d["k"], d["hi"], d["c_signal"]),
            signal_function=signal_from_dict(d.get("g", {"form": "linear"})),
            baseline=BaselineHumility(d.get("lambda", BaselineHumility().lam)),
        )

    def to_dict(self) -> dict:
        return {
            "id": self.id, "label": self.label,
            "k": self.inputs.k, "hi": self.inputs.hi, "c_signal": self.inputs.c_signal,
            "g": signal_to_dict(self.signal_function), "lambda": self.baseline.lam,
        }


def load_scenarios(path) -> list:
    """Parse a scenario batch file; ``json.JSONDecodeError`` propagates with its position."""
    text = Path(path).read_text(encoding="utf-8")
    data = json.loads(text)
    if not isinstance(data, list):
        raise ValueError(f"{path}: expected a JSON array of scenarios")
    return parse_batch(data)


def parse_batch(items: Iterable[dict]) -> list:
    scenarios = []
    seen = set()
    for item in items:
        if not isinstance(item, dict):
            raise ValueError(f"scenario entries must be objects, got {type(item).__name__}")
        s = Scenario.from_dict(item)
        if s.id in seen:
            raise ValueError(f"duplicate scenario id {s.id!r}")
        seen.add(s.id)
        scenarios.append(s)
    return scenarios


def _case(id, label, k, hi, c):
    return Scenario(id, label, DutyInputs(k, hi, c), Linear(), NO_BASELINE)


CASE_STUDIES = (
    _case("clinical-home-pass", "Clinical ethics: weekend home pass approval", 0.75, 0.40, 0.60),
    _case("guardianship-medication", "Recipient rights: temporary guardianship for medication",
          0.80, 0.50, 0.70),
    _case("financial-late-2006", "Economic governance: institutional risk posture, late 2006",
          0.90, 0.10, 0.40),
    _case("av-crosswalk", "AI systems: autonomous vehicle approaching a crosswalk at dusk",
          0.70, 0.30, 0.80),
)

# Published duty tables for the built-in cases: (action, repair, total).
CASE_STUDY_DUTIES = {
    "clinical-home-pass": (0.45, 0.18, 0.63),
    "guardianship-medication": (0.40, 0.28, 0.68),
    "financial-late-2006": (0.81, 0.036, 0.846),
    "av-crosswalk": (0.49, 0.168, 0.658),
}


# --- audit ------------------------------------------------------------------


def config_digest(sf: SignalFunction, baseline: BaselineHumility, t: PolicyThresholds) -> str:
    """sha256 over the canonical JSON of everything besides inputs that shapes a decision."""
    return hashlib.sha256(_canonical(_config(sf, baseline, t)).encode("utf-8")).hexdigest()


def _config(sf, baseline, t) -> dict:
    return {"g": signal_to_dict(sf), "lambda": baseline.lam, "defer_below": t.defer_below}


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class AuditRecord:
    timestamp: datetime
    scenario_id: str
    inputs: DutyInputs
    breakdown: DutyBreakdown
    recommendation: Recommendation
    signal_function: SignalFunction
    baseline: BaselineHumility
    thresholds: PolicyThresholds
    config_digest: str

    @classmethod
    def create(cls, scenario_id, inputs, breakdown, recommendation, sf, baseline, thresholds,
               timestamp: Optional[datetime] = None) -> "AuditRecord":
        return cls(
            timestamp or datetime.now(timezone.utc), scenario_id, inputs, breakdown,
            recommendation, sf, baseline, thresholds, config_digest(sf, baseline, thresholds),
        )

    def to_dict(self) -> dict:
        return {
            "timestamp": self.timestamp.astimezone(timezone.utc).isoformat(),
            "scenario_id": self.scenario_id,
            "inputs": {"k": self.inputs.k, "hi": self.inputs.hi, "c_signal": self.inputs.c_signal},
            "breakdown": {"action": self.breakdown.action, "repair": self.breakdown.repair,
                          "total": self.breakdown.total},
            "recommendation": self.recommendation.value,
            "config": _config(self.signal_function, self.baseline, self.thresholds),
            "config_digest": self.config_digest,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "AuditRecord":
        cfg = d["config"]
        sf = signal_from_dict(cfg["g"])
        baseline = BaselineHumility(cfg["lambda"])
        thresholds = PolicyThresholds(cfg["defer_below"])
        digest = config_digest(sf, baseline, thresholds)
        if digest != d["config_digest"]:
            raise ValueError(f"audit record {d['scenario_id']!r}: config does not match its digest")
        b = d["breakdown"]
        i = d["inputs"]
        return cls(
            timestamp=datetime.fromisoformat(d["timestamp"]),
            scenario_id=d["scenario_id"],
            inputs=DutyInputs(i["k"], i["hi"], i["c_signal"]),
            breakdown=DutyBreakdown(b["action"], b["repair"], b["total"]),
            recommendation=Recommendation(d["recommendation"]),
            signal_function=sf, baseline=baseline, thresholds=thresholds,
            config_digest=digest,
        )

    @classmethod
    def from_json(cls, line: str) -> "AuditRecord":
        return cls.from_dict(json.loads(line))

    def reevaluate(self) -> DutyBreakdown:
        return evaluate(self.inputs, self.signal_function, self.baseline)


class AuditWriteError(OSError):
    """An audit record could not be persisted; the record is kept on the exception."""

    def __init__(self, message: str, record: AuditRecord):
        super().__init__(message)
        self.record = record


class AuditLog:
    """Append-only JSON Lines sink. Appends from several threads are serialised."""

    def __init__(self, path, fsync: bool = False):
        self.path = Path(path)
        self.fsync = fsync
        self._lock = threading.Lock()

    def append(self, record: AuditRecord) -> int:
        """Write one record and flush it; returns the byte count written."""
        line = (record.to_json() + "\n").encode("utf-8")
        with self._lock:
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("ab") as fh:
                    fh.write(line)
                    fh.flush()
                    if self.fsync:
                        os.fsync(fh.fileno())
            except OSError as exc:
                raise AuditWriteError(f"audit append to {self.path} failed: {exc}", record) from exc
        return len(line)

    def read(self) -> list:
        if not self.path.exists():
            return []
        with self.path.open(encoding="utf-8") as fh:
            return [AuditRecord.from_json(line) for line in fh if line.strip()]


def append_audit(record: AuditRecord, sink: AuditLog) -> int:
    return sink.append(record)


# --- evaluation -------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioResult:
    breakdown: DutyBreakdown
    recommendation: Recommendation
    record: AuditRecord
    audit_error: Optional[str] = None


def evaluate_scenario(s: Scenario, t: PolicyThresholds = PolicyThresholds(),
                      sink: Optional[AuditLog] = None,
                      clock: Callable[[], datetime] = lambda: datetime.now(timezone.utc),
                      ) -> ScenarioResult:
    """Evaluate, recommend and log one scenario.

    A failed audit write does not raise; the result carries the error text and
    the unwritten record.
    """
    b = evaluate(s.inputs, s.signal_function, s.baseline)
    rec = recommend(b, t)
    record = AuditRecord.create(s.id, s.inputs, b, rec, s.signal_function, s.baseline, t,
                                timestamp=clock())
    error = None
    if sink is not None:
        try:
            sink.append(record)
        except AuditWriteError as exc:
            error = str(exc)
    return ScenarioResult(b, rec, record, error)


# --- humility sweep ---------------------------------------------------------


@dataclass(frozen=True)
class SweepPoint:
    hi: float
    breakdown: DutyBreakdown
    recommendation: Recommendation


def humility_sweep(k: float, c_signal: float, sf: SignalFunction = Linear(), steps: int = 11,
                   t: PolicyThresholds = PolicyThresholds()) -> list:
    """Evaluate at evenly spaced humility from 0 to 1 with no baseline floor."""
    if steps < 2:
        raise ValueError("a sweep needs at least 2 steps")
    out = []
    for i in range(steps):
        hi = i / (steps - 1)
        b = evaluate(DutyInputs(k, hi, c_signal), sf, NO_BASELINE)
        out.append(SweepPoint(hi, b, recommend(b, t)))
    return out


def crossover_humility(c_signal: float, sf: SignalFunction = Linear()) -> float:
    """Humility at which action and repair duty are equal: 1 / (1 + g(c))."""
    return 1.0 / (1.0 + eval_signal(sf, c_signal))


def crossover_index(points: list) -> Optional[int]:
    """First sweep index where repair duty has caught up with action duty."""
    for i, p in enumerate(points):
        if p.breakdown.total > 0 and p.breakdown.repair >= p.breakdown.action:
            return i
    return None
