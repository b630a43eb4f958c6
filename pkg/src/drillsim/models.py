"""Physical blocks of the closed loop: operator, workpiece and robot.

These are the reference (object-oriented) implementations used by the
step-by-step simulation path and the unit tests.  The fused trial kernel
in :mod:`drillsim.kernels` inlines the same arithmetic expressions so both
paths produce the same trajectories.
"""

import math
from dataclasses import dataclass

import numpy as np


def min_jerk(x0: float, x1: float, duration: float, t):
    """Minimum-jerk point-to-point profile.

    Returns (position, velocity) at time t for the quintic
    x(t) = x0 + (x1 - x0) * (10 tau^3 - 15 tau^4 + 6 tau^5), tau = t/T,
    which starts and ends at rest.  Accepts scalar or array t.
    """
    if duration <= 0.0:
        raise ValueError("duration must be > 0")
    tau = np.clip(np.asarray(t, dtype=np.float64) / duration, 0.0, 1.0)
    span = x1 - x0
    s = tau * tau * tau * (10.0 + tau * (-15.0 + 6.0 * tau))
    sd = 30.0 * tau * tau * (1.0 + tau * (-2.0 + tau)) / duration
    pos = x0 + span * s
    vel = span * sd
    if np.isscalar(t):
        return float(pos), float(vel)
    return pos, vel


@dataclass
class HumanModel:
    """Operator impedance and intent parameters.

    The operator tracks an intent trajectory with a grip spring-damper:
    F_h = K_h (x_des - x) + B_h (v_des - v) + noise.  The intent is a
    minimum-jerk reach that deliberately aims slightly beyond the workpiece
    surface (so contact actually happens); close to the surface the
    operator slows to a visually guided creep and braces (grip gains ramp
    up), then advances at a constant feed intent while drilling, then
    pulls back out.  The creep zone makes the arrival speed controller
    independent, as a watching human would.
    """

    grip_stiffness: float = 150.0      # K_h, N/m
    grip_damping: float = 60.0         # B_h, N*s/m
    t_grab: float = 1.5                # s, handle grab time
    grab_ramp: float = 0.2             # s, gradual force buildup after grab
    reach_time: float = 3.0            # s, duration of the reach plan
    reach_overshoot: float = 0.015     # m, intent target beyond the surface
    approach_distance: float = 0.025   # m, visually guided slow-down zone
    approach_speed: float = 0.008      # m/s, creep speed ceiling in the zone
    approach_gain: float = 0.5         # 1/s, gap-proportional slow-down
    touch_speed: float = 0.001         # m/s, intended speed at first touch
    feed_intent: float = 0.012         # m/s, intent advance while drilling
    brace_stiffness: float = 3000.0    # N/m, grip stiffness once braced
    brace_damping: float = 300.0       # N*s/m, grip damping once braced
    brace_time: float = 0.3            # s, gain ramp entering the creep zone
    react_contact: float = 0.15        # s, reaction delay to contact
    react_depth: float = 0.2           # s, reaction delay to target depth
    retract_speed: float = 0.08        # m/s
    force_noise: float = 0.25          # N, white force noise (1 sigma)
    contact_noise_scale: float = 20.0  # drilling-vibration noise multiplier
    engage_depth: float = 0.0015       # m, penetration for full bit engagement

    def __post_init__(self):
        if self.grip_stiffness <= 0.0 or self.grip_damping <= 0.0:
            raise ValueError("grip stiffness and damping must be > 0")


class HumanOperator:
    """Stateful operator advancing the HumanModel intent once per step."""

    def __init__(self, model: HumanModel, x_wall: float,
                 sample_period: float = 0.002):
        self.model = model
        self.x_wall = x_wall
        self._dt = sample_period
        self.x_des = 0.0
        self.creeping = False
        self.feeding = False
        self.retracting = False
        self.brace_t0 = 0.0
        # contact/depth events as sensed by the operator
        self.has_contacted = False
        self.t_contact = 0.0
        self.depth_reached = False
        self.t_depth = 0.0

    def observe(self, t: float, pen: float, depth_target: float):
        """Register environment events the operator reacts to."""
        if pen > 0.0 and not self.has_contacted:
            self.has_contacted = True
            self.t_contact = t
        if pen >= depth_target and not self.depth_reached:
            self.depth_reached = True
            self.t_depth = t

    def _braced_gains(self, t: float):
        # bracing ramps toward a task-determined grip, not a multiple of
        # the relaxed grip, so all subjects stabilize the drill alike
        h = self.model
        bf = (t - self.brace_t0) / h.brace_time
        if bf > 1.0:
            bf = 1.0
        k_eff = h.grip_stiffness + (h.brace_stiffness - h.grip_stiffness) * bf
        b_eff = h.grip_damping + (h.brace_damping - h.grip_damping) * bf
        return k_eff, b_eff

    def force(self, t: float, x: float, v: float, noise: float = 0.0) -> float:
        """Operator force at time t given the robot state (x, v)."""
        h = self.model
        if not self.creeping and not self.feeding and not self.retracting \
                and t >= h.t_grab and self.x_wall - x <= h.approach_distance:
            self.creeping = True
            self.brace_t0 = t
            self.x_des = x  # re-anchor: the slow final approach starts here
        if not self.feeding and not self.retracting and self.has_contacted \
                and t >= self.t_contact + h.react_contact:
            self.feeding = True
            if not self.creeping:
                self.brace_t0 = t
            self.creeping = False

        if not self.retracting and self.depth_reached \
                and t >= self.t_depth + h.react_depth:
            self.retracting = True
            self.feeding = False
            self.creeping = False
            self.x_des = x

        if t < h.t_grab:
            return 0.0

        if self.retracting:
            v_des = -h.retract_speed
            self.x_des = self.x_des - h.retract_speed * self._dt
            k_eff = h.grip_stiffness
            b_eff = h.grip_damping
        elif self.feeding:
            v_des = h.feed_intent
            self.x_des = self.x_des + h.feed_intent * self._dt
            k_eff, b_eff = self._braced_gains(t)
        elif self.creeping:
            # slow down in proportion to the remaining gap, touching at
            # touch_speed no matter how compliant the controller is
            gap = self.x_wall - x
            v_des = h.touch_speed + h.approach_gain * gap
            if v_des > h.approach_speed:
                v_des = h.approach_speed
            elif v_des < 0.0:
                v_des = 0.0
            self.x_des = self.x_des + v_des * self._dt
            k_eff, b_eff = self._braced_gains(t)
        else:
            tau = (t - h.t_grab) / h.reach_time
            if tau > 1.0:
                tau = 1.0
            plan_end = self.x_wall + h.reach_overshoot
            s = tau * tau * tau * (10.0 + tau * (-15.0 + 6.0 * tau))
            sd = 30.0 * tau * tau * (1.0 + tau * (-2.0 + tau)) / h.reach_time
            self.x_des = plan_end * s
            v_des = plan_end * sd
            k_eff = h.grip_stiffness
            b_eff = h.grip_damping

        g = (t - h.t_grab) / h.grab_ramp
        if g > 1.0:
            g = 1.0
        if self.has_contacted and not self.retracting:
            # drilling vibration builds as the bit engages the material
            pen_prev = x - self.x_wall
            if pen_prev < 0.0:
                pen_prev = 0.0
            eng = pen_prev / h.engage_depth
            if eng > 1.0:
                eng = 1.0
            noise = noise * (1.0 + (h.contact_noise_scale - 1.0) * eng)
        return g * (k_eff * (self.x_des - x) + b_eff * (v_des - v) + noise)


def human_force(operator: HumanOperator, t: float, x: float, v: float,
                noise: float = 0.0) -> float:
    """Operator force model (zero before the grab, grip tracking after)."""
    return operator.force(t, x, v, noise)


@dataclass
class EnvironmentModel:
    """Workpiece and drill disturbance parameters."""

    x_wall: float = 0.30          # m, workpiece surface position
    stiffness: float = 12000.0    # K_e, N/m
    damping: float = 50.0         # B_e, N*s/m
    drill_amp: float = 1.5        # N, drill force line amplitude
    drill_freq: float = 75.0      # Hz
    target_depth: float = 0.005   # m

    def __post_init__(self):
        if self.stiffness <= 0.0:
            raise ValueError("environment stiffness must be > 0")


def env_force(env: EnvironmentModel, x: float, v: float, drill_on: bool,
              t: float) -> tuple[float, float]:
    """Environment reaction force and penetration at robot state (x, v).

    The force is a unilateral spring-damper plus the drill force line while
    penetrating, clamped at zero so the workpiece only ever opposes the
    feed direction.
    """
    pen = x - env.x_wall
    if pen <= 0.0:
        return 0.0, 0.0
    f = env.stiffness * pen + env.damping * v
    if drill_on:
        f += env.drill_amp * math.sin(2.0 * math.pi * env.drill_freq * t)
    return max(f, 0.0), pen


@dataclass
class RobotSurrogate:
    """Second-order unity-DC-gain lag standing in for the inner motion loop."""

    natural_freq: float = 40.0    # rad/s
    damping_ratio: float = 0.7

    def __post_init__(self):
        if self.natural_freq <= 0.0 or self.damping_ratio <= 0.0:
            raise ValueError("robot surrogate must be stable (wn, zeta > 0)")

    def magnitude(self, omega: float) -> float:
        """|G(j omega)| of the continuous-time surrogate."""
        wn = self.natural_freq
        num = wn * wn
        re = wn * wn - omega * omega
        im = 2.0 * self.damping_ratio * wn * omega
        return num / math.hypot(re, im)


class RobotState:
    """Backward-Euler integrator state for the robot surrogate."""

    def __init__(self, surrogate: RobotSurrogate, sample_period: float = 0.002):
        self.g = surrogate
        self.ts = sample_period
        self.v = 0.0
        self.a = 0.0
        wn = surrogate.natural_freq
        self._den = 1.0 + 2.0 * surrogate.damping_ratio * wn * self.ts \
            + (wn * self.ts) * (wn * self.ts)

    def step(self, v_ref: float) -> float:
        wn = self.g.natural_freq
        self.a = (self.a + self.ts * wn * wn * (v_ref - self.v)) / self._den
        self.v = self.v + self.ts * self.a
        return self.v


def robot_step(state: RobotState, v_ref: float) -> float:
    """Advance the robot surrogate one sample and return its velocity."""
    return state.step(v_ref)
