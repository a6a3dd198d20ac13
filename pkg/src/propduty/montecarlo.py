"""Seeded Monte Carlo protocol over uniformly sampled epistemic states.

Trial ``i`` of a run draws (K, HI, C) from block ``i`` of the counter-based
stream keyed by the run seed, so trials can be produced in any order, in any
number of chunks, and still match a sequential run bit for bit.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence, Union

import numpy as np

from . import rng, stats
from ._io import write_csv, write_json
from .duty import (
    BaselineHumility,
    DutyBreakdown,
    DutyInputs,
    Exponential,
    Linear,
    Logistic,
    SignalFunction,
    duty_components,
)
from .verification import zone_counts

log = logging.getLogger(__name__)

DEFAULT_TRIALS = 100_000
TRIAL_HEADER = ("trial", "k", "hi", "c_signal", "d_action", "d_repair", "d_total")


@dataclass(frozen=True)
class SimulationConfig:
    n_trials: int = DEFAULT_TRIALS
    seed: int = 0
    signal_function: SignalFunction = field(default_factory=Linear)
    baseline: BaselineHumility = field(default_factory=BaselineHumility)

    def __post_init__(self) -> None:
        if int(self.n_trials) < 1:
            raise ValueError(f"n_trials must be >= 1, got {self.n_trials}")
        object.__setattr__(self, "n_trials", int(self.n_trials))
        object.__setattr__(self, "seed", rng.check_seed(self.seed))


@dataclass(frozen=True)
class TrialRecord:
    index: int
    inputs: DutyInputs
    breakdown: DutyBreakdown


@dataclass
class TrialArrays:
    """Column-wise trials; row ``j`` is trial ``index[j]``."""

    index: np.ndarray
    k: np.ndarray
    hi: np.ndarray
    c_signal: np.ndarray
    action: np.ndarray
    repair: np.ndarray
    total: np.ndarray

    def __len__(self) -> int:
        return len(self.index)

    @classmethod
    def concat(cls, parts: Sequence["TrialArrays"]) -> "TrialArrays":
        names = ("index", "k", "hi", "c_signal", "action", "repair", "total")
        return cls(*(np.concatenate([getattr(p, n) for p in parts]) for n in names))

    @classmethod
    def from_records(cls, records: Iterable[TrialRecord]) -> "TrialArrays":
        rows = [(r.index, r.inputs.k, r.inputs.hi, r.inputs.c_signal,
                 r.breakdown.action, r.breakdown.repair, r.breakdown.total) for r in records]
        if not rows:
            raise ValueError("cannot summarize an empty trial stream")
        cols = list(zip(*rows))
        return cls(np.asarray(cols[0], dtype=np.int64),
                   *(np.asarray(c, dtype=np.float64) for c in cols[1:]))

    def records(self) -> Iterator[TrialRecord]:
        for j in range(len(self)):
            yield TrialRecord(
                int(self.index[j]),
                DutyInputs(float(self.k[j]), float(self.hi[j]), float(self.c_signal[j])),
                DutyBreakdown(float(self.action[j]), float(self.repair[j]), float(self.total[j])),
            )


def trial_chunk(config: SimulationConfig, start: int, stop: int) -> TrialArrays:
    """Generate and evaluate trials ``start..stop-1``."""
    u = rng.blocks(config.seed, rng.TRIALS, start, stop)
    k, hi, c = u[:, 0].copy(), u[:, 1].copy(), u[:, 2].copy()
    action, repair, total = duty_components(k, hi, c, config.signal_function, config.baseline)
    return TrialArrays(np.arange(start, stop, dtype=np.int64), k, hi, c, action, repair, total)


def _chunks(n: int, parts: int) -> list:
    size = max(1, math.ceil(n / max(1, parts)))
    return [(a, min(n, a + size)) for a in range(0, n, size)]


def simulate(config: SimulationConfig, workers: int = 1) -> TrialArrays:
    """All trials of a run as arrays. Results do not depend on ``workers``."""
    spans = _chunks(config.n_trials, workers)
    if workers <= 1 or len(spans) == 1:
        parts = [trial_chunk(config, a, b) for a, b in spans]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda ab: trial_chunk(config, *ab), spans))
    return TrialArrays.concat(parts)


def sample_trials(config: SimulationConfig, chunk_size: int = 8192) -> Iterator[TrialRecord]:
    """Stream every trial of the run in index order."""
    for a in range(0, config.n_trials, chunk_size):
        yield from trial_chunk(config, a, min(config.n_trials, a + chunk_size)).records()


def trial(config: SimulationConfig, index: int) -> TrialRecord:
    """Regenerate a single trial without touching any other."""
    if not 0 <= index < config.n_trials:
        raise IndexError(f"trial {index} outside run of {config.n_trials}")
    return next(trial_chunk(config, index, index + 1).records())


# --- summaries --------------------------------------------------------------


@dataclass(frozen=True)
class SimulationSummary:
    n: int
    mean_total: float
    var_total: float
    mean_action: float
    mean_repair: float
    pearson_k_total: Optional[float]  # None when undefined (n == 1 or constant input)
    max_conservation_residual: float
    zone_counts: dict

    def to_dict(self, config: Optional[SimulationConfig] = None) -> dict:
        out = {}
        if config is not None:
            out.update(seed=config.seed, g_form=config.signal_function.form,
                       g_params=config.signal_function.params(), **{"lambda": config.baseline.lam})
        out.update(
            n=self.n,
            mean_total=self.mean_total,
            var_total=self.var_total,
            mean_action=self.mean_action,
            mean_repair=self.mean_repair,
            pearson_k_total=self.pearson_k_total,
            max_conservation_residual=self.max_conservation_residual,
            zone_counts=dict(self.zone_counts),
        )
        return out


def summarize(trials: Union[TrialArrays, Iterable[TrialRecord]]) -> SimulationSummary:
    t = trials if isinstance(trials, TrialArrays) else TrialArrays.from_records(trials)
    n = len(t)
    if n == 0:
        raise ValueError("cannot summarize an empty trial stream")
    residual = np.abs(t.action + t.repair - t.total)
    return SimulationSummary(
        n=n,
        mean_total=stats.mean(t.total),
        var_total=stats.variance(t.total),
        mean_action=stats.mean(t.action),
        mean_repair=stats.mean(t.repair),
        pearson_k_total=stats.pearson(t.k, t.total) if n >= 2 else None,
        max_conservation_residual=float(residual.max()),
        zone_counts=zone_counts(t.hi, t.c_signal),
    )


def run(config: SimulationConfig, workers: int = 1) -> tuple:
    """Simulate and summarize; returns ``(TrialArrays, SimulationSummary)``."""
    trials = simulate(config, workers)
    return trials, summarize(trials)


# --- exports ----------------------------------------------------------------


def write_trials_csv(path, trials: TrialArrays) -> Path:
    rows = zip(trials.index.tolist(), trials.k.tolist(), trials.hi.tolist(),
               trials.c_signal.tolist(), trials.action.tolist(), trials.repair.tolist(),
               trials.total.tolist())
    return write_csv(path, TRIAL_HEADER, rows)


def read_trials_csv(path) -> TrialArrays:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != TRIAL_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no trials")
    cols = list(zip(*rows))
    return TrialArrays(np.asarray(cols[0], dtype=np.int64),
                       *(np.asarray(c, dtype=np.float64) for c in cols[1:]))


# --- stability --------------------------------------------------------------

VARIANCE_DEFINITION = "unbiased (n-1) sample variance of d_total over all trials"
DIFF_VARIANCE_DEFINITION = (
    "unbiased (n-1) sample variance of first differences d_total[i+1] - d_total[i] "
    "in trial-index order"
)


@dataclass(frozen=True)
class StabilityReport:
    lam_on: float
    lam_off: float
    var_on: float
    var_off: float
    ratio: float
    diff_var_on: float
    diff_var_off: float
    diff_ratio: float
    variance_definition: str = VARIANCE_DEFINITION
    diff_variance_definition: str = DIFF_VARIANCE_DEFINITION

    @property
    def reduction(self) -> float:
        """Fractional variance reduction 1 - on/off."""
        return 1.0 - self.ratio

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["reduction"] = self.reduction
        d["diff_reduction"] = 1.0 - self.diff_ratio
        return d


def _ratio(a: float, b: float) -> float:
    if b == 0.0:
        return 1.0 if a == 0.0 else math.inf
    return a / b


def stability_comparison(config_on: SimulationConfig, config_off: SimulationConfig,
                         workers: int = 1) -> StabilityReport:
    """Compare D_total variance with and without the baseline floor on common draws."""
    if replace(config_on, baseline=config_off.baseline) != config_off:
        raise ValueError("stability comparison needs configs that differ only in baseline")
    t_on = simulate(config_on, workers)
    t_off = simulate(config_off, workers)
    var_on, var_off = stats.variance(t_on.total), stats.variance(t_off.total)
    dvar_on = stats.variance(np.diff(t_on.total)) if len(t_on) > 2 else 0.0
    dvar_off = stats.variance(np.diff(t_off.total)) if len(t_off) > 2 else 0.0
    return StabilityReport(
        lam_on=config_on.baseline.lam, lam_off=config_off.baseline.lam,
        var_on=var_on, var_off=var_off, ratio=_ratio(var_on, var_off),
        diff_var_on=dvar_on, diff_var_off=dvar_off, diff_ratio=_ratio(dvar_on, dvar_off),
    )


# --- full protocol ----------------------------------------------------------

# Published figures the protocol is checked against.
PUBLISHED = {
    "conservation_bound": 1e-6,
    "variance_bound": 0.05,
    "variance_reduction": 0.72,
    "mean_total_linear": 0.37,
    "mean_total_exponential": 0.58,
    "pearson_k_total": 0.998,
}
EXPONENTIAL_GAINS = (1.0, 2.0, 5.0)


def protocol_configs(seed: int = 0, n_trials: int = DEFAULT_TRIALS, lam: float = 0.05,
                     gain: float = 1.0, steepness: float = 10.0,
                     midpoint: float = 0.5) -> list:
    """One config per signal form, sharing seed and baseline."""
    base = BaselineHumility(lam)
    return [
        SimulationConfig(n_trials, seed, Linear(), base),
        SimulationConfig(n_trials, seed, Exponential(gain), base),
        SimulationConfig(n_trials, seed, Logistic(steepness, midpoint), base),
    ]


@dataclass
class DivergenceRow:
    claim: str
    published: float
    measured: Optional[float]
    reproduced: bool
    criterion: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ProtocolReport:
    configs: list
    summaries: list
    stability: StabilityReport
    exponential_means: dict
    divergences: list
    files: list = field(default_factory=list)

    @property
    def max_conservation_residual(self) -> float:
        return max(s.max_conservation_residual for s in self.summaries)

    @property
    def mean_total_order(self) -> list:
        pairs = [(s.mean_total, c.signal_function.form) for c, s in zip(self.configs, self.summaries)]
        return [form for _, form in sorted(pairs)]

    def to_dict(self) -> dict:
        return {
            "summaries": [s.to_dict(c) for c, s in zip(self.configs, self.summaries)],
            "max_conservation_residual": self.max_conservation_residual,
            "mean_total_order": self.mean_total_order,
            "stability": self.stability.to_dict(),
            "exponential_means": {str(g): m for g, m in self.exponential_means.items()},
            "divergences": [d.to_dict() for d in self.divergences],
        }


def _check_protocol_configs(configs: Sequence[SimulationConfig]) -> dict:
    by_form = {c.signal_function.form: c for c in configs}
    if len(configs) != 3 or set(by_form) != {"linear", "exponential", "logistic"}:
        raise ValueError("protocol needs exactly one linear, one exponential and one logistic config")
    return by_form


def run_protocol(configs: Sequence[SimulationConfig], out_dir=None,
                 workers: int = 1) -> ProtocolReport:
    """Run every form, the baseline-stability comparison and the gain sweep.

    With ``out_dir`` set, writes ``trials_<form>.csv``, ``summary_<form>.json``
    and ``protocol_report.json`` there.
    """
    by_form = _check_protocol_configs(configs)
    configs = list(configs)
    summaries = []
    files = []
    for cfg in configs:
        trials, summary = run(cfg, workers)
        summaries.append(summary)
        if out_dir is not None:
            form = cfg.signal_function.form
            try:
                files.append(write_trials_csv(Path(out_dir) / f"trials_{form}.csv", trials))
                files.append(write_json(Path(out_dir) / f"summary_{form}.json", summary.to_dict(cfg)))
            except OSError as exc:
                raise OSError(f"could not write protocol output under {out_dir}: {exc}") from exc
        log.info("%s: mean_total=%.6f var_total=%.6f", cfg.signal_function.form,
                 summary.mean_total, summary.var_total)

    linear = by_form["linear"]
    off = replace(linear, baseline=BaselineHumility(0.0))
    stability = stability_comparison(linear, off, workers)

    exp_means = {}
    for gain in EXPONENTIAL_GAINS:
        cfg = replace(by_form["exponential"], signal_function=Exponential(gain))
        exp_means[gain] = stats.mean(simulate(cfg, workers).total)

    s = dict(zip((c.signal_function.form for c in configs), summaries))
    report = ProtocolReport(configs, summaries, stability, exp_means,
                            _divergences(s, stability, exp_means, by_form))
    if out_dir is not None:
        files.append(write_json(Path(out_dir) / "protocol_report.json", report.to_dict()))
    report.files = [str(f) for f in files]
    return report


def _divergences(s: dict, stability: StabilityReport, exp_means: dict, by_form: dict) -> list:
    P = PUBLISHED
    max_res = max(x.max_conservation_residual for x in s.values())
    lam = by_form["linear"].baseline.lam
    gain = by_form["exponential"].signal_function.gain
    r = s["linear"].pearson_k_total
    rows = [
        DivergenceRow("max conservation residual (all forms)", P["conservation_bound"], max_res,
                      max_res < P["conservation_bound"], "measured < published"),
        DivergenceRow(f"var d_total, linear, lambda={lam:g}", P["variance_bound"],
                      s["linear"].var_total, s["linear"].var_total < P["variance_bound"],
                      "measured < published"),
        DivergenceRow("variance reduction lambda=0.05 vs 0", P["variance_reduction"],
                      stability.reduction, abs(stability.reduction - P["variance_reduction"]) <= 0.05,
                      "|measured - published| <= 0.05"),
        DivergenceRow("first-difference variance reduction", P["variance_reduction"],
                      1.0 - stability.diff_ratio,
                      abs(1.0 - stability.diff_ratio - P["variance_reduction"]) <= 0.05,
                      "|measured - published| <= 0.05"),
        DivergenceRow("mean d_total, linear", P["mean_total_linear"], s["linear"].mean_total,
                      abs(s["linear"].mean_total - P["mean_total_linear"]) <= 0.01,
                      "|measured - published| <= 0.01"),
        DivergenceRow(f"mean d_total, exponential gain={gain:g}", P["mean_total_exponential"],
                      s["exponential"].mean_total,
                      abs(s["exponential"].mean_total - P["mean_total_exponential"]) <= 0.01,
                      "|measured - published| <= 0.01"),
    ]
    for g, m in exp_means.items():
        if g == gain:
            continue
        rows.append(DivergenceRow(f"mean d_total, exponential gain={g:g} (sweep)",
                                  P["mean_total_exponential"], m,
                                  abs(m - P["mean_total_exponential"]) <= 0.01,
                                  "|measured - published| <= 0.01"))
    rows.append(DivergenceRow("pearson r(K, d_total), linear", P["pearson_k_total"], r,
                              r is not None and abs(r - P["pearson_k_total"]) <= 0.002,
                              "|measured - published| <= 0.002"))
    return rows


def format_protocol_report(report: ProtocolReport) -> str:
    lines = ["form         mean_total  var_total   mean_action mean_repair pearson   max_residual"]
    for cfg, s in zip(report.configs, report.summaries):
        r = "n/a" if s.pearson_k_total is None else f"{s.pearson_k_total:.4f}"
        lines.append(f"{cfg.signal_function.form:<12} {s.mean_total:<11.4f} {s.var_total:<11.5f} "
                     f"{s.mean_action:<11.4f} {s.mean_repair:<11.4f} {r:<9} "
                     f"{s.max_conservation_residual:.3g}")
    lines.append("")
    lines.append(f"conservation: max residual over all forms = {report.max_conservation_residual:.3g}")
    st = report.stability
    lines.append(f"stability: var(lambda={st.lam_on:g}) = {st.var_on:.6f}, "
                 f"var(lambda={st.lam_off:g}) = {st.var_off:.6f}, ratio = {st.ratio:.4f}")
    lines.append(f"mean_total order: {' < '.join(report.mean_total_order)}")
    lines.append("")
    lines.append(f"{'claim':<48} {'published':>10} {'measured':>10}  status")
    for d in report.divergences:
        measured = "n/a" if d.measured is None else f"{d.measured:.4g}"
        status = "reproduced" if d.reproduced else "DIVERGES"
        lines.append(f"{d.claim:<48} {d.published:>10.4g} {measured:>10}  {status}")
    return "\n".join(lines)
