"""Proportional duty: domain types and pure evaluation.

Total duty splits into an action share ``K * (1 - HI)`` and a repair share
``K * HI * g(C)``. The total is always formed as the sum of the two shares, so
conservation holds exactly rather than up to rounding.

Every scalar function here also accepts numpy arrays; the Monte Carlo engine
relies on the scalar and vector paths producing bit-identical values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

ArrayLike = Union[float, np.ndarray]


class DomainError(ValueError):
    """A value fell outside its admissible range."""


def _check_unit(name: str, value: float) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0):  # also rejects NaN
        raise DomainError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def _check_positive(name: str, value: float) -> float:
    value = float(value)
    if not (value > 0.0 and math.isfinite(value)):
        raise DomainError(f"{name} must be a positive finite number, got {value!r}")
    return value


@dataclass(frozen=True)
class DutyInputs:
    """Epistemic state of one decision: knowledge, humility, contextual signal."""

    k: float
    hi: float
    c_signal: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "k", _check_unit("k", self.k))
        object.__setattr__(self, "hi", _check_unit("hi", self.hi))
        object.__setattr__(self, "c_signal", _check_unit("c_signal", self.c_signal))


# --- signal functions -------------------------------------------------------


@dataclass(frozen=True)
class Linear:
    """g(x) = x"""

    form = "linear"

    def apply(self, x: ArrayLike) -> ArrayLike:
        return x

    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class Exponential:
    """g(x) = exp(gain * (x - 1)); equals 1 at x = 1 and stays below it elsewhere."""

    gain: float = 1.0
    form = "exponential"

    def __post_init__(self) -> None:
        object.__setattr__(self, "gain", _check_positive("gain", self.gain))

    def apply(self, x: ArrayLike) -> ArrayLike:
        return np.exp(self.gain * (np.asarray(x, dtype=np.float64) - 1.0))

    def params(self) -> dict:
        return {"gain": self.gain}


@dataclass(frozen=True)
class Logistic:
    """g(x) = 1 / (1 + exp(-steepness * (x - midpoint)))"""

    steepness: float = 10.0
    midpoint: float = 0.5
    form = "logistic"

    def __post_init__(self) -> None:
        object.__setattr__(self, "steepness", _check_positive("steepness", self.steepness))
        object.__setattr__(self, "midpoint", _check_unit("midpoint", self.midpoint))

    def apply(self, x: ArrayLike) -> ArrayLike:
        z = -self.steepness * (np.asarray(x, dtype=np.float64) - self.midpoint)
        return 1.0 / (1.0 + np.exp(z))

    def params(self) -> dict:
        return {"steepness": self.steepness, "midpoint": self.midpoint}


SignalFunction = Union[Linear, Exponential, Logistic]

SIGNAL_FORMS = {"linear": Linear, "exponential": Exponential, "logistic": Logistic}


def signal_from_dict(params: dict) -> SignalFunction:
    """Build a signal function from ``{"form": ..., **params}``."""
    params = dict(params)
    form = params.pop("form", None)
    try:
        cls = SIGNAL_FORMS[form]
    except KeyError:
        raise DomainError(
            f"unknown signal form {form!r}; expected one of {sorted(SIGNAL_FORMS)}"
        ) from None
    try:
        return cls(**params)
    except TypeError as exc:
        raise DomainError(f"bad parameters for {form} signal: {exc}") from None


def signal_to_dict(sf: SignalFunction) -> dict:
    return {"form": sf.form, **sf.params()}


def eval_signal(sf: SignalFunction, x: float) -> float:
    """Evaluate ``g(x)`` for a scalar ``x`` in [0, 1]."""
    x = _check_unit("x", x)
    return float(sf.apply(x))


# --- baseline humility ------------------------------------------------------


@dataclass(frozen=True)
class BaselineHumility:
    """Floor applied to HI before evaluation. ``lam=0`` disables it."""

    lam: float = 0.05

    def __post_init__(self) -> None:
        lam = float(self.lam)
        if not (0.0 <= lam < 1.0):
            raise DomainError(f"lambda must lie in [0, 1), got {lam!r}")
        object.__setattr__(self, "lam", lam)


NO_BASELINE = BaselineHumility(0.0)


def effective_humility(hi: ArrayLike, baseline: BaselineHumility) -> ArrayLike:
    if isinstance(hi, np.ndarray):
        return np.maximum(hi, baseline.lam)
    return max(_check_unit("hi", hi), baseline.lam)


# --- evaluation -------------------------------------------------------------


@dataclass(frozen=True)
class DutyBreakdown:
    action: float
    repair: float
    total: float

    def __iter__(self):
        return iter((self.action, self.repair, self.total))


def duty_components(k: ArrayLike, hi: ArrayLike, c_signal: ArrayLike,
                    sf: SignalFunction, baseline: BaselineHumility):
    """Return ``(action, repair, total)``; works on scalars or arrays.

    No range checking; callers validate (``evaluate`` does so via ``DutyInputs``).
    """
    h = np.maximum(hi, baseline.lam)
    action = k * (1.0 - h)
    repair = k * h * sf.apply(c_signal)
    return action, repair, action + repair


def evaluate(inputs: DutyInputs, sf: SignalFunction,
             baseline: BaselineHumility = BaselineHumility()) -> DutyBreakdown:
    action, repair, total = duty_components(
        np.float64(inputs.k), np.float64(inputs.hi), np.float64(inputs.c_signal), sf, baseline
    )
    return DutyBreakdown(float(action), float(repair), float(total))


def conservation_residual(b: DutyBreakdown) -> float:
    return abs(b.action + b.repair - b.total)
