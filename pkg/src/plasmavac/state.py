"""Piecewise-constant background state, its derived constants and the admissibility checks."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

DEFAULT_TOL = 1e-9

STATE_KEYS = ("rho", "sound_speed", "v", "H", "Hc", "eps")


class HypothesisError(ValueError):
    """Raised when an operation needs a state that passes every admissibility condition."""


@dataclass(frozen=True)
class BasicState:
    rho: float
    sound_speed: float
    v: float
    H: float
    Hc: float
    eps: float

    def __post_init__(self):
        for name in STATE_KEYS:
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.rho <= 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if self.sound_speed <= 0:
            raise ValueError(f"sound_speed must be positive, got {self.sound_speed}")
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")

    @property
    def alpha(self) -> float:
        return 1.0 / (self.rho * self.sound_speed**2)

    def replace(self, **changes) -> "BasicState":
        values = asdict(self)
        values.update(changes)
        return BasicState(**values)

    def to_dict(self) -> dict:
        return asdict(self)


def state_from_mapping(data: dict) -> BasicState:
    missing = [k for k in STATE_KEYS if k not in data]
    if missing:
        raise ValueError(f"missing state keys: {', '.join(missing)}")
    extra = sorted(set(data) - set(STATE_KEYS))
    if extra:
        raise ValueError(f"unknown state keys: {', '.join(extra)}")
    return BasicState(**{k: float(data[k]) for k in STATE_KEYS})


def load_state(path: str | Path) -> BasicState:
    with open(path, encoding="utf-8") as fh:
        return state_from_mapping(json.load(fh))


@dataclass(frozen=True)
class DerivedConstants:
    alpha: float
    alfven_speed: float
    fast_interface_speed: float
    z_plus: float
    z_minus: float
    discriminant_D: float


def derive_constants(state: BasicState) -> DerivedConstants:
    a = state.alpha
    h2 = state.H**2
    hc4 = state.Hc**4
    D = a**2 * (h2**2 - hc4) ** 2 + 4.0 * hc4
    base = a * (h2**2 - hc4) + 2.0 * h2
    denom = 2.0 * (1.0 + a * h2)
    root = math.sqrt(D)
    return DerivedConstants(
        alpha=a,
        alfven_speed=abs(state.H) / math.sqrt(state.rho),
        fast_interface_speed=abs(state.H) / math.sqrt(state.rho * (1.0 + a * h2)),
        z_plus=(base + root) / denom,
        z_minus=(base - root) / denom,
        discriminant_D=D,
    )


@dataclass(frozen=True)
class ConditionResult:
    name: str
    passed: bool
    margin: float | None

    def to_json(self) -> dict:
        margin = self.margin
        if margin is not None and not math.isfinite(margin):
            margin = None
        return {"name": self.name, "pass": self.passed, "margin": margin}


@dataclass(frozen=True)
class HypothesisReport:
    conditions: tuple[ConditionResult, ...]
    tol: float
    # Not one of the six conditions: flags v = c, where the tau = 0 pole meets an omega_1 = 0 point.
    advisories: tuple[ConditionResult, ...] = field(default=())

    @property
    def all_pass(self) -> bool:
        return all(c.passed for c in self.conditions)

    def __getitem__(self, name: str) -> ConditionResult:
        for c in self.conditions + self.advisories:
            if c.name == name:
                return c
        raise KeyError(name)

    def failed(self) -> list[str]:
        return [c.name for c in self.conditions if not c.passed]

    def to_json(self) -> dict:
        return {
            "all_pass": self.all_pass,
            "tol": self.tol,
            "conditions": [c.to_json() for c in self.conditions],
            "advisories": [c.to_json() for c in self.advisories],
        }


def _rel_gap(x: float, y: float) -> float:
    scale = max(abs(x), abs(y))
    return 0.0 if scale == 0 else (x - y) / scale


def _condition(name: str, margin: float, tol: float) -> ConditionResult:
    return ConditionResult(name, abs(margin) > tol, margin)


def resonance_applicable(state: BasicState) -> bool:
    return state.H**2 < min(1.0 / state.alpha, state.rho * state.v**2)


def check_hypotheses(state: BasicState, tol: float = DEFAULT_TOL) -> HypothesisReport:
    """Evaluate the six admissibility conditions with signed relative margins.

    A margin within ``tol`` of zero counts as a violation.
    """
    dc = derive_constants(state)
    h2 = state.H**2
    rv2 = state.rho * state.v**2
    conditions = [
        _condition("Hvbase", min(abs(state.v), abs(state.Hc)), tol),
        _condition("Hrbase", min(state.rho, abs(state.H)), tol),
        _condition("notnull", 1.0 - dc.alpha * h2, tol),
        _condition("notalfven", _rel_gap(abs(state.v), dc.alfven_speed), tol),
        _condition("notvH", _rel_gap(abs(state.v), dc.fast_interface_speed), tol),
    ]
    if resonance_applicable(state):
        gaps = [_rel_gap(rv2, dc.z_plus), _rel_gap(rv2, dc.z_minus)]
        # sign of the product keeps the margin continuous between z- and z+
        sign = math.copysign(1.0, gaps[0] * gaps[1]) if gaps[0] * gaps[1] != 0 else 0.0
        conditions.append(_condition("notres", sign * min(abs(g) for g in gaps), tol))
    else:
        conditions.append(ConditionResult("notres", True, None))
    advisories = (
        _condition("pole_tau_off_null2", _rel_gap(abs(state.v), state.sound_speed), tol),
    )
    return HypothesisReport(tuple(conditions), tol, advisories)


class StabilityClass(str, Enum):
    TWO_BOUNDARY_ROOTS = "TwoBoundaryRoots"
    NO_ROOTS = "NoRoots"


def stability_class(state: BasicState, tol: float = DEFAULT_TOL) -> StabilityClass:
    """Predicted boundary-root count from the min-rule on H^2.

    The rule compares H^2 against min(1/alpha, rho v^2). Direct scans show roots
    whenever alpha H^2 < 1, see ``root_existence_class`` for that criterion.
    """
    report = check_hypotheses(state, tol)
    if not report.all_pass:
        raise HypothesisError(f"state fails {', '.join(report.failed())}")
    h2 = state.H**2
    threshold = min(1.0 / state.alpha, state.rho * state.v**2)
    if abs(h2 - threshold) <= tol * max(h2, threshold):
        raise HypothesisError("H^2 sits on the classification threshold")
    return StabilityClass.TWO_BOUNDARY_ROOTS if h2 < threshold else StabilityClass.NO_ROOTS


def root_existence_class(state: BasicState) -> StabilityClass:
    """Boundary-root count as observed numerically: two roots iff alpha H^2 < 1."""
    if state.alpha * state.H**2 < 1.0:
        return StabilityClass.TWO_BOUNDARY_ROOTS
    return StabilityClass.NO_ROOTS
