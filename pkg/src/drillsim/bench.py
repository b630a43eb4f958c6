"""Benchmark of the compiled kernels against the interpreted fallback.

Times the hot paths (fractional-order trajectory filtering, the fused
closed-loop trial, the stability probe and the label pipeline) through
the numba-compiled entry points and through their interpreted twins, and
prints the speedups.  Run via ``drillsim bench`` or
``benchmarks/bench_kernels.py``.
"""

import time

import numpy as np

from . import kernels
from .simulate import Scenario, mode_setup


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _trial_args(scenario: Scenario, setup, seed=0):
    rng = np.random.default_rng(seed)
    n_max = scenario.max_steps
    noise = rng.standard_normal(n_max) * scenario.human.force_noise
    t = np.arange(n_max) * scenario.sample_period
    wave = scenario.env.drill_amp * np.sin(
        2.0 * np.pi * scenario.env.drill_freq * t)
    h, e = scenario.human, scenario.env
    floats = np.zeros((n_max, kernels.N_FLOAT_CHANNELS))
    labels = np.zeros((n_max, kernels.N_LABEL_CHANNELS), dtype=np.int64)
    return (scenario.sample_period, n_max,
            scenario.gl_memory, setup.m_idle, setup.b_idle, setup.alpha_idle,
            setup.scheme, setup.b_targets, setup.a_targets, setup.t_w,
            setup.pos_start, setup.pos_end,
            scenario.n_vote, scenario.min_dwell, scenario.raw_label_delay,
            h.t_grab, h.grab_ramp, h.grip_stiffness, h.grip_damping,
            h.brace_stiffness, h.brace_damping,
            h.brace_time, h.reach_time, h.reach_overshoot,
            h.approach_distance, h.approach_speed,
            h.approach_gain, h.touch_speed, h.feed_intent,
            h.react_contact, h.react_depth, h.retract_speed,
            e.x_wall, e.stiffness, e.damping, e.target_depth, wave,
            scenario.robot.natural_freq, scenario.robot.damping_ratio,
            noise, h.contact_noise_scale, h.engage_depth,
            scenario.v_limit, scenario.pullback,
            floats, labels)


def run_benchmark(trials: int = 5):
    if not kernels.NUMBA_ENABLED:
        print("numba path disabled (DRILLSIM_DISABLE_NUMBA set or numba "
              "missing); timing the numpy fallback only")

    rng = np.random.default_rng(0)
    cases = []

    f_seq = rng.standard_normal(2000) * 50.0
    cases.append(("gl trajectory (2000 steps, L=2000)",
                  lambda: kernels.admittance_response(f_seq, 50.0, 400.0, 0.85,
                                                      0.002, 2000),
                  lambda: kernels.admittance_response_py(f_seq, 50.0, 400.0,
                                                         0.85, 0.002, 2000)))

    scenario = Scenario()
    setup = mode_setup("c3")
    cases.append((
        "closed-loop trial (c3, ground truth)",
        lambda: kernels.closed_loop_trial(*_trial_args(scenario, setup)),
        lambda: kernels.closed_loop_trial_py(*_trial_args(scenario, setup))))

    n = 3000
    noise = rng.standard_normal(n) * 0.25
    wave = 1.5 * np.sin(2 * np.pi * 75.0 * np.arange(n) * 0.002)
    probe_args = (0.002, n, 2000, 50.0, 400.0, 1.0, 3000.0, 150.0, 0.012,
                  0.30, 12000.0, 50.0, wave, noise, 5.0, 500, 5e-4,
                  40.0, 0.7, 1.0)
    cases.append(("stability probe (6 s)",
                  lambda: kernels.contact_probe(*probe_args),
                  lambda: kernels.contact_probe_py(*probe_args)))

    raw = rng.integers(1, 4, size=100_000)
    cases.append(("label pipeline (1e5 steps)",
                  lambda: kernels.label_pipeline(raw, 30, 500, 1),
                  lambda: kernels.label_pipeline_py(raw, 30, 500, 1)))

    print(f"{'kernel':40s} {'numba':>10s} {'numpy':>10s} {'speedup':>8s}")
    for name, fast, slow in cases:
        fast()  # trigger JIT before timing
        t_fast = _time(fast, trials)
        t_slow = _time(slow, max(1, trials // 2))
        ratio = t_slow / t_fast if t_fast > 0 else float("inf")
        print(f"{name:40s} {t_fast * 1e3:9.2f}ms {t_slow * 1e3:9.2f}ms "
              f"{ratio:7.1f}x")
