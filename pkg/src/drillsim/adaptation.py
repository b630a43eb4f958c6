"""Subtask-driven adaptation of the admittance parameters.

The processed subtask label selects target values for the damping b (and,
in the fractional mode, the order alpha).  On every label change the
parameters ramp linearly from their instantaneous value to the new target
over a fixed transition window, so the commanded admittance is continuous
and piecewise linear even when labels change mid-ramp.
"""

from dataclasses import dataclass
from enum import Enum

from .controller import ControllerParams
from .subtasks import Subtask


class ControllerMode(Enum):
    """C1 fixed integer-order, C2 adaptive integer-order, C3 adaptive fractional."""

    C1 = "c1"
    C2 = "c2"
    C3 = "c3"

    @classmethod
    def parse(cls, text) -> "ControllerMode":
        if isinstance(text, cls):
            return text
        try:
            return cls(str(text).strip().lower())
        except ValueError:
            raise ValueError(f"unknown controller mode {text!r}; expected c1, c2 or c3")


@dataclass
class AdaptationConfig:
    b_low: float = 200.0      # Driving
    b_nom: float = 300.0      # Idle
    b_high: float = 400.0     # Contact
    alpha_nom: float = 1.0
    alpha_low: float = 0.85   # Contact, fractional mode only
    t_w: float = 0.2          # transition window, s
    mass: float = 50.0

    def __post_init__(self):
        if not self.b_low < self.b_nom < self.b_high:
            raise ValueError("damping targets must satisfy b_low < b_nom < b_high")
        if not 0.0 < self.alpha_low <= self.alpha_nom <= 1.0:
            raise ValueError("alpha targets must satisfy 0 < alpha_low <= alpha_nom <= 1")
        if self.t_w <= 0.0:
            raise ValueError("transition window must be > 0")


def target_params(subtask: Subtask, mode: ControllerMode,
                  cfg: AdaptationConfig) -> tuple[float, float]:
    """Target (b, alpha) for a processed subtask label under a given mode."""
    if mode is ControllerMode.C1:
        return cfg.b_high, cfg.alpha_nom
    b = {Subtask.IDLE: cfg.b_nom,
         Subtask.DRIVING: cfg.b_low,
         Subtask.CONTACT: cfg.b_high}[Subtask(subtask)]
    alpha = cfg.alpha_nom
    if mode is ControllerMode.C3 and Subtask(subtask) == Subtask.CONTACT:
        alpha = cfg.alpha_low
    return b, alpha


@dataclass
class RampState:
    """Linear ramp of one parameter: value(t) = start + (end-start)*clip((t-t0)/t_w)."""

    start: float
    end: float
    t0: float
    t_w: float

    def value(self, t: float) -> float:
        if self.t_w <= 0.0:
            return self.end
        frac = (t - self.t0) / self.t_w
        frac = min(max(frac, 0.0), 1.0)
        return self.start + (self.end - self.start) * frac


class AdaptationPolicy:
    """Stateful label-to-parameter mapper used by the control loop.

    A label change starts a fresh ramp from the current (possibly mid-ramp)
    value, which keeps b(t) and alpha(t) continuous for every label
    sequence.
    """

    def __init__(self, mode: ControllerMode, cfg: AdaptationConfig | None = None,
                 t0: float = 0.0):
        self.mode = ControllerMode.parse(mode)
        self.cfg = cfg if cfg is not None else AdaptationConfig()
        b0, a0 = target_params(Subtask.IDLE, self.mode, self.cfg)
        self._label = Subtask.IDLE
        self._b = RampState(b0, b0, t0, self.cfg.t_w)
        self._alpha = RampState(a0, a0, t0, self.cfg.t_w)

    def update(self, processed_label: Subtask, t: float) -> ControllerParams:
        """Advance the ramps and return the commanded parameters at time t."""
        label = Subtask(processed_label)
        if label != self._label:
            b_tgt, a_tgt = target_params(label, self.mode, self.cfg)
            self._b = RampState(self._b.value(t), b_tgt, t, self.cfg.t_w)
            self._alpha = RampState(self._alpha.value(t), a_tgt, t, self.cfg.t_w)
            self._label = label
        return ControllerParams(self.cfg.mass, self._b.value(t), self._alpha.value(t))
