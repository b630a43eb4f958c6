"""Discrete-time integer- and fractional-order admittance controllers.

Both controllers map an interaction force to a reference velocity:

    integer order      v_ref = F_int / (m s + b)
    fractional order   v_ref = F_int / (m s^alpha + b),  0 < alpha <= 1

The fractional derivative is realized with a truncated Grunwald-Letnikov
(GL) weighted sum over the reference-velocity history, stepped implicitly
(backward Euler).  At alpha = 1 the GL weights collapse to a first
difference and the fractional step reduces exactly to the integer-order
backward-Euler step.
"""

from dataclasses import dataclass

import numpy as np

SAMPLE_PERIOD = 0.002  # 500 Hz control loop
GL_MEMORY_STEPS = 2000  # 4 s of history at 500 Hz


def gl_coefficients(alpha: float, length: int) -> np.ndarray:
    """Grunwald-Letnikov fractional-difference weights w_0..w_length.

    w_0 = 1 and w_k = w_{k-1} * (1 - (alpha + 1) / k), which equals
    (-1)^k * binom(alpha, k).

    Parameters
    ----------
    alpha : fractional order, in (0, 1]
    length : memory horizon L (number of past samples), >= 1
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"fractional order must be in (0, 1], got {alpha}")
    if length < 1:
        raise ValueError(f"memory length must be >= 1, got {length}")
    k = np.arange(1, length + 1, dtype=np.float64)
    w = np.empty(length + 1, dtype=np.float64)
    w[0] = 1.0
    # cumprod evaluates the recursion sequentially, matching a scalar loop
    w[1:] = np.cumprod(1.0 - (alpha + 1.0) / k)
    return w


@dataclass
class ControllerParams:
    """Admittance triplet: mass m, damping b, fractional order alpha.

    m is in Kg (Kg*s^(alpha-1) when alpha < 1), b in N*s/m.
    """

    m: float
    b: float
    alpha: float = 1.0

    def __post_init__(self):
        if self.m <= 0.0:
            raise ValueError(f"admittance mass must be > 0, got {self.m}")
        if self.b <= 0.0:
            raise ValueError(f"admittance damping must be > 0, got {self.b}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"fractional order must be in (0, 1], got {self.alpha}")


class AdmittanceState:
    """Controller state: parameters, GL weights and signal histories.

    Histories are zero-initialized (the loop starts at rest) and are kept
    across parameter changes so adaptation is bumpless.  They are stored
    chronologically (most recent sample last), matching the layout of the
    fused simulation kernels.  One instance is owned by exactly one
    control loop; there is no internal locking.
    """

    def __init__(self, params: ControllerParams,
                 sample_period: float = SAMPLE_PERIOD,
                 memory: int = GL_MEMORY_STEPS):
        self.params = params
        self.sample_period = float(sample_period)
        self.memory = int(memory)
        self.gl_weights = gl_coefficients(params.alpha, self.memory)
        self._wrev = self.gl_weights[:0:-1].copy()
        self.vref_history = np.zeros(self.memory, dtype=np.float64)
        self.force_history = np.zeros(self.memory, dtype=np.float64)

    def reset(self):
        self.vref_history[:] = 0.0
        self.force_history[:] = 0.0


def _push(history: np.ndarray, value: float):
    history[:-1] = history[1:]
    history[-1] = value


def ioac_step(state: AdmittanceState, f_int: float) -> float:
    """One integer-order step (backward Euler of 1/(ms + b)).

    Requires alpha = 1.  Returns the new reference velocity and advances
    the histories.
    """
    p = state.params
    if p.alpha != 1.0:
        raise ValueError("integer-order step requires alpha = 1")
    ts = state.sample_period
    v_prev = state.vref_history[-1]
    v = (p.m * v_prev + ts * f_int) / (p.m + p.b * ts)
    _push(state.vref_history, v)
    _push(state.force_history, f_int)
    return v


def foac_step(state: AdmittanceState, f_int: float) -> float:
    """One fractional-order step.

    Solves the implicit update of m*D^alpha(v_ref) + b*v_ref = f_int with
    D^alpha approximated by the truncated GL sum
    Ts^(-alpha) * sum_j w_j * v_ref[k-j].
    """
    p = state.params
    ts = state.sample_period
    c = p.m * ts ** (-p.alpha)
    hist_sum = np.dot(state._wrev, state.vref_history)
    v = (f_int - c * hist_sum) / (c + p.b)
    _push(state.vref_history, v)
    _push(state.force_history, f_int)
    return v


def set_params(state: AdmittanceState, new: ControllerParams) -> AdmittanceState:
    """Swap controller parameters in place, keeping the signal histories.

    GL weights are regenerated only when alpha changes.
    """
    if new.alpha != state.params.alpha:
        state.gl_weights = gl_coefficients(new.alpha, state.memory)
        state._wrev = state.gl_weights[:0:-1].copy()
    state.params = new
    return state
