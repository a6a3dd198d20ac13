"""Ranking preservation checks and the (HI, C) zone classifier."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import rng
from ._io import write_csv
from .duty import (
    NO_BASELINE,
    DutyInputs,
    Linear,
    SignalFunction,
    _check_unit,
    evaluate,
    signal_from_dict,
    signal_to_dict,
)

MIN_GAP = 1e-6
HI_CAP = 0.95


# --- zones ------------------------------------------------------------------


class Zone(str, Enum):
    HIGH_DUTY = "high_duty"
    LOW_DUTY = "low_duty"
    EQUILIBRIUM = "equilibrium"
    UNZONED = "unzoned"


def classify_zone(hi: float, c_signal: float) -> Zone:
    """Map a (humility, signal) pair to its zone.

    The printed regions overlap and leave gaps, so precedence is fixed:
    high duty, then low duty, then equilibrium, else unzoned.
    """
    hi = _check_unit("hi", hi)
    c_signal = _check_unit("c_signal", c_signal)
    if hi < 0.2 or c_signal > 0.8:
        return Zone.HIGH_DUTY
    if hi > 0.8 and c_signal < 0.2:
        return Zone.LOW_DUTY
    if 0.3 < hi < 0.7:
        return Zone.EQUILIBRIUM
    return Zone.UNZONED


def zone_counts(hi: np.ndarray, c_signal: np.ndarray) -> dict:
    """Vectorised ``classify_zone`` tallies, keyed by zone value."""
    high = (hi < 0.2) | (c_signal > 0.8)
    low = ~high & (hi > 0.8) & (c_signal < 0.2)
    eq = ~high & ~low & (hi > 0.3) & (hi < 0.7)
    n_high, n_low, n_eq = int(high.sum()), int(low.sum()), int(eq.sum())
    return {
        Zone.HIGH_DUTY.value: n_high,
        Zone.LOW_DUTY.value: n_low,
        Zone.EQUILIBRIUM.value: n_eq,
        Zone.UNZONED.value: len(hi) - n_high - n_low - n_eq,
    }


# --- ranking scenarios -----------------------------------------------------


@dataclass(frozen=True)
class RankingScenario:
    k1: float
    k2: float
    k3: float
    c_signal: float
    signal_function: SignalFunction = field(default_factory=Linear)

    def __post_init__(self) -> None:
        for name in ("k1", "k2", "k3", "c_signal"):
            object.__setattr__(self, name, _check_unit(name, getattr(self, name)))
        if self.k1 - self.k2 < MIN_GAP or self.k2 - self.k3 < MIN_GAP:
            raise ValueError(
                f"knowledge values must be strictly ordered with gap >= {MIN_GAP}: "
                f"({self.k1}, {self.k2}, {self.k3})"
            )

    @classmethod
    def unchecked(cls, k1, k2, k3, c_signal, signal_function=None) -> "RankingScenario":
        """Build without the ordering check; for verifying externally supplied fixtures."""
        obj = object.__new__(cls)
        for name, value in zip(("k1", "k2", "k3", "c_signal"), (k1, k2, k3, c_signal)):
            object.__setattr__(obj, name, float(value))
        object.__setattr__(obj, "signal_function", signal_function or Linear())
        return obj

    @property
    def ks(self) -> tuple:
        return (self.k1, self.k2, self.k3)

    def to_dict(self) -> dict:
        return {"k1": self.k1, "k2": self.k2, "k3": self.k3, "c_signal": self.c_signal,
                "g": signal_to_dict(self.signal_function)}

    @classmethod
    def from_dict(cls, d: dict, validate: bool = True) -> "RankingScenario":
        sf = signal_from_dict(d["g"]) if "g" in d else Linear()
        args = (d["k1"], d["k2"], d["k3"], d["c_signal"], sf)
        return cls(*args) if validate else cls.unchecked(*args)


def default_hi_grid(step: float = 0.05, cap: float = HI_CAP) -> list:
    """Evenly spaced humility values from 0 to ``cap`` inclusive."""
    if step <= 0:
        raise ValueError("grid step must be positive")
    count = int(math.floor(cap / step + 1e-9))
    grid = [round(i * step, 12) for i in range(count + 1)]
    if cap - grid[-1] > 1e-9:
        grid.append(cap)
    return grid


def generate_scenarios(n: int, seed: int,
                       signal_function: Optional[SignalFunction] = None) -> list:
    """Draw ``n`` scenarios of three strictly ordered knowledge values.

    Each attempt uses one random block: three sorted uniforms for K and one
    for the signal. Attempts whose gaps fall below ``MIN_GAP`` are rejected.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    sf = signal_function or Linear()
    out = []
    start = 0
    while len(out) < n:
        batch = rng.blocks(seed, rng.RANKING, start, start + (n - len(out)) + 16)
        start += len(batch)
        ks = -np.sort(-batch[:, :3], axis=1)
        ok = (ks[:, 0] - ks[:, 1] >= MIN_GAP) & (ks[:, 1] - ks[:, 2] >= MIN_GAP)
        for (k1, k2, k3), c in zip(ks[ok], batch[ok, 3]):
            out.append(RankingScenario(float(k1), float(k2), float(k3), float(c), sf))
            if len(out) == n:
                break
    return out


@dataclass(frozen=True)
class GridPoint:
    hi: float
    duties: tuple  # one DutyBreakdown per option, best first
    action_ok: bool
    repair_ok: bool

    @property
    def ok(self) -> bool:
        return self.action_ok and self.repair_ok


@dataclass(frozen=True)
class RankingCheck:
    scenario: RankingScenario
    preserved: bool
    points: tuple

    @property
    def first_failure(self) -> Optional[GridPoint]:
        return next((p for p in self.points if not p.ok), None)


def _check_grid(hi_grid: Sequence[float]) -> list:
    grid = [float(h) for h in hi_grid]
    if not grid:
        raise ValueError("humility grid must not be empty")
    for h in grid:
        if not 0.0 <= h <= HI_CAP:
            raise ValueError(f"grid humility {h} outside [0, {HI_CAP}]")
    return grid


def check_ranking(s: RankingScenario, hi_grid: Sequence[float]) -> RankingCheck:
    """Evaluate all three options at each grid humility with no baseline floor.

    Action duties must be strictly ordered like K. Repair duties only need to be
    weakly ordered since g(C) = 0 ties every option at zero.
    """
    points = []
    for hi in _check_grid(hi_grid):
        duties = tuple(
            evaluate(DutyInputs(k, hi, s.c_signal), s.signal_function, NO_BASELINE)
            for k in s.ks
        )
        a = [d.action for d in duties]
        r = [d.repair for d in duties]
        points.append(GridPoint(hi, duties, a[0] > a[1] > a[2], r[0] >= r[1] >= r[2]))
    return RankingCheck(s, all(p.ok for p in points), tuple(points))


@dataclass
class RankingReport:
    n_scenarios: int
    preserved_count: int
    hi_grid: list
    first_violation: Optional[dict] = None

    @property
    def all_preserved(self) -> bool:
        return self.preserved_count == self.n_scenarios

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def verify_scenarios(scenarios: Iterable[RankingScenario],
                     hi_grid: Sequence[float]) -> RankingReport:
    grid = _check_grid(hi_grid)
    n = preserved = 0
    first = None
    for index, s in enumerate(scenarios):
        n += 1
        result = check_ranking(s, grid)
        if result.preserved:
            preserved += 1
        elif first is None:
            bad = result.first_failure
            first = {
                "scenario_index": index,
                "scenario": s.to_dict(),
                "hi": bad.hi,
                "d_action": [d.action for d in bad.duties],
                "d_repair": [d.repair for d in bad.duties],
            }
    return RankingReport(n, preserved, grid, first)


def run_ranking_suite(n: int = 1000, seed: int = 0, hi_grid: Optional[Sequence[float]] = None,
                      signal_function: Optional[SignalFunction] = None) -> RankingReport:
    grid = default_hi_grid() if hi_grid is None else hi_grid
    return verify_scenarios(generate_scenarios(n, seed, signal_function), grid)


def inequality_violations(k_hi: np.ndarray, k_lo: np.ndarray, hi: np.ndarray,
                          g: np.ndarray) -> int:
    """Count tuples where the ordering of either duty share inverts."""
    action_bad = ~(k_hi * (1.0 - hi) > k_lo * (1.0 - hi))
    repair_bad = ~(k_hi * hi * g >= k_lo * hi * g)
    return int((action_bad | repair_bad).sum())


# --- trajectory export -----------------------------------------------------

TRAJECTORY_HEADER = ("hi", "option", "k", "d_action", "d_repair", "ratio")


def trajectory_rows(check: RankingCheck) -> list:
    """Per-grid-point, per-option rows; ratio is action/repair (inf when repair is 0)."""
    rows = []
    for p in check.points:
        for option, (k, d) in enumerate(zip(check.scenario.ks, p.duties), start=1):
            ratio = d.action / d.repair if d.repair > 0 else math.inf
            rows.append((p.hi, option, k, d.action, d.repair, ratio))
    return rows


def write_trajectories(path, check: RankingCheck) -> Path:
    return write_csv(path, TRAJECTORY_HEADER, trajectory_rows(check))


def load_scenarios(path, validate: bool = False) -> list:
    """Read a JSON array of scenario objects (see ``RankingScenario.to_dict``)."""
    with Path(path).open() as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise ValueError(f"{path}: expected a JSON array of scenarios")
    return [RankingScenario.from_dict(d, validate=validate) for d in data]
