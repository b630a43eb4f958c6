"""Hot numeric kernels with optional numba acceleration.

Every kernel is written once as a plain Python/numpy function whose inner
loops are numba-friendly.  When numba is importable and the environment
variable ``DRILLSIM_DISABLE_NUMBA`` is unset, the public names are the
``@njit``-compiled versions; otherwise the interpreted functions run as a
pure-numpy fallback (the heavy inner sums go through ``np.dot`` either
way).  ``benchmarks/bench_kernels.py`` compares the two paths.

The closed-loop trial kernel keeps all state in scalars and flat arrays so
that the compiled and interpreted paths execute identical floating-point
operations.  Random excitation (human force noise, drill line) is
pregenerated by the caller, which keeps the kernels deterministic and
RNG-free.
"""

import os

import numpy as np

NUMBA_DISABLED = os.environ.get("DRILLSIM_DISABLE_NUMBA", "").lower() in (
    "1", "true", "yes")

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

NUMBA_ENABLED = HAVE_NUMBA and not NUMBA_DISABLED

# label codes reused by the kernels (must match subtasks.Subtask)
IDLE = 1
DRIVING = 2
CONTACT = 3

# adaptation schemes
SCHEME_FIXED = 0
SCHEME_SUBTASK = 1
SCHEME_POSITION = 2

# indices into the float channel block written by closed_loop_trial
CH_T = 0
CH_V = 1
CH_VREF = 2
CH_FH = 3
CH_FENV = 4
CH_FINT = 5
CH_PEN = 6
CH_B = 7
CH_ALPHA = 8
N_FLOAT_CHANNELS = 9

# indices into the label block
LB_TRUE = 0
LB_RAW = 1
LB_VOTED = 2
LB_PROC = 3
N_LABEL_CHANNELS = 4


def _gl_fill(alpha, w, wrev):
    """Fill GL weights w[0..L] and the reversed tail wrev[i] = w[L-i]."""
    length = w.shape[0] - 1
    w[0] = 1.0
    acc = 1.0
    for j in range(1, length + 1):
        acc = acc * (1.0 - (alpha + 1.0) / j)
        w[j] = acc
        wrev[length - j] = acc


if NUMBA_ENABLED:
    # the fused kernels call this helper, so it must be compiled with them
    _gl_fill = njit(cache=True)(_gl_fill)


def _admittance_response_impl(f_seq, m, b, alpha, ts, memory):
    """Reference-velocity trajectory of the admittance from rest.

    Implicit GL step of m*D^alpha(v) + b*v = f with truncated memory.
    """
    n = f_seq.shape[0]
    w = np.empty(memory + 1, dtype=np.float64)
    wrev = np.empty(memory, dtype=np.float64)
    _gl_fill(alpha, w, wrev)
    c = m * ts ** (-alpha)
    vpad = np.zeros(memory + n, dtype=np.float64)
    for k in range(n):
        hist = np.dot(wrev, vpad[k:k + memory])
        vpad[memory + k] = (f_seq[k] - c * hist) / (c + b)
    return vpad[memory:]


def _label_pipeline_impl(raw, n_vote, dwell_steps, init_label):
    """Offline voting + dwell pass over a raw label stream.

    The dwell is counted in whole steps, which at the 2 ms grid matches the
    in-loop seconds-based latch.
    """
    n = raw.shape[0]
    voted = np.empty(n, dtype=np.int64)
    processed = np.empty(n, dtype=np.int64)
    window = np.full(n_vote, init_label, dtype=np.int64)
    counts = np.zeros(4, dtype=np.int64)
    counts[init_label] = n_vote
    pos = 0
    verdict = init_label
    current = init_label
    since = 0
    for k in range(n):
        lab = raw[k]
        counts[window[pos]] -= 1
        counts[lab] += 1
        window[pos] = lab
        pos += 1
        if pos == n_vote:
            pos = 0
        best = counts[1]
        if counts[2] > best:
            best = counts[2]
        if counts[3] > best:
            best = counts[3]
        if counts[verdict] < best:
            for cand in range(1, 4):
                if counts[cand] == best:
                    verdict = cand
                    break
        voted[k] = verdict
        if verdict != current and (k - since) >= dwell_steps:
            current = verdict
            since = k
        processed[k] = current
    return voted, processed


def _closed_loop_trial_impl(
        ts, n_max,
        # controller
        gl_len, m_idle, b_idle, alpha_idle,
        # adaptation
        scheme, b_targets, a_targets, t_w,
        pos_start, pos_end,
        # subtask processor
        n_vote, min_dwell, raw_delay,
        # human operator
        t_grab, grab_ramp, k_h, b_h, brace_k, brace_b,
        brace_time, reach_time, overshoot, approach_distance, approach_speed,
        approach_gain, touch_speed,
        feed_intent, react_contact, react_depth, retract_speed,
        # environment
        x_wall, k_e, b_e, depth_target, drill_wave,
        # robot inner dynamics
        wn, zeta,
        # excitation / limits
        fh_noise, contact_noise_scale, engage_depth, v_limit, pullback,
        # outputs
        floats, labels):
    """Fused 500 Hz closed-loop simulation with ground-truth-driven labels.

    Steps the admittance controller (GL memory), the second-order robot
    surrogate, the human force model, the unilateral environment and the
    label pipeline (truth -> optional delay -> voting -> dwell -> ramps).
    Returns (steps_written, timeout_flag, instability_flag).
    """
    # controller state: GL weights for the current alpha, chronological
    # v_ref history embedded in a zero-padded trajectory array
    w = np.empty(gl_len + 1, dtype=np.float64)
    wrev = np.empty(gl_len, dtype=np.float64)
    _gl_fill(alpha_idle, w, wrev)
    alpha_applied = alpha_idle
    vpad = np.zeros(gl_len + n_max, dtype=np.float64)

    # robot surrogate state
    v = 0.0
    a = 0.0
    x = 0.0
    rob_den = 1.0 + 2.0 * zeta * wn * ts + (wn * ts) * (wn * ts)

    # adaptation ramp state (subtask scheme)
    cur_label = IDLE
    rb_start = b_idle
    rb_end = b_idle
    ra_start = alpha_idle
    ra_end = alpha_idle
    ramp_t0 = 0.0

    # voting buffer + dwell latch
    window = np.full(n_vote, IDLE, dtype=np.int64)
    counts = np.zeros(4, dtype=np.int64)
    counts[IDLE] = n_vote
    pos = 0
    verdict = IDLE
    processed = IDLE
    since_t = 0.0

    # human state
    x_des = 0.0
    x_plan_end = x_wall + overshoot
    creeping = False
    feeding = False
    retracting = False
    brace_t0 = 0.0

    # environment events
    has_contacted = False
    t_contact = 0.0
    depth_reached = False
    t_depth = 0.0

    unstable = 0
    timeout = 1
    n_steps = n_max

    for k in range(n_max):
        t = k * ts

        # ---- raw label from the (optionally delayed) ground truth
        back = k - 1 - raw_delay
        if back < 0:
            raw = IDLE
        else:
            raw = labels[back, LB_TRUE]

        # ---- voting buffer (ties resolve toward the previous verdict)
        counts[window[pos]] -= 1
        counts[raw] += 1
        window[pos] = raw
        pos += 1
        if pos == n_vote:
            pos = 0
        best = counts[1]
        if counts[2] > best:
            best = counts[2]
        if counts[3] > best:
            best = counts[3]
        if counts[verdict] < best:
            for cand in range(1, 4):
                if counts[cand] == best:
                    verdict = cand
                    break

        # ---- dwell latch
        if verdict != processed and (t - since_t) >= min_dwell:
            processed = verdict
            since_t = t

        # ---- adaptation to commanded (m, b, alpha)
        if scheme == SCHEME_SUBTASK:
            if processed != cur_label:
                frac = (t - ramp_t0) / t_w
                if frac < 0.0:
                    frac = 0.0
                elif frac > 1.0:
                    frac = 1.0
                rb_start = rb_start + (rb_end - rb_start) * frac
                ra_start = ra_start + (ra_end - ra_start) * frac
                rb_end = b_targets[processed]
                ra_end = a_targets[processed]
                ramp_t0 = t
                cur_label = processed
            frac = (t - ramp_t0) / t_w
            if frac < 0.0:
                frac = 0.0
            elif frac > 1.0:
                frac = 1.0
            m_cmd = m_idle
            b_cmd = rb_start + (rb_end - rb_start) * frac
            alpha_cmd = ra_start + (ra_end - ra_start) * frac
        elif scheme == SCHEME_POSITION:
            r = x / x_wall
            if r < 0.0:
                r = 0.0
            elif r > 1.0:
                r = 1.0
            m_cmd = pos_start[0] + (pos_end[0] - pos_start[0]) * r
            b_cmd = pos_start[1] + (pos_end[1] - pos_start[1]) * r
            alpha_cmd = pos_start[2] + (pos_end[2] - pos_start[2]) * r
        else:
            m_cmd = m_idle
            b_cmd = b_idle
            alpha_cmd = alpha_idle
        if alpha_cmd != alpha_applied:
            _gl_fill(alpha_cmd, w, wrev)
            alpha_applied = alpha_cmd

        # ---- human force (uses previous-step robot state)
        pen_prev = x - x_wall
        if pen_prev < 0.0:
            pen_prev = 0.0
        if not creeping and not feeding and not retracting \
                and t >= t_grab and x_wall - x <= approach_distance:
            creeping = True
            brace_t0 = t
            x_des = x  # re-anchor: the slow final approach starts here
        if not feeding and not retracting and has_contacted \
                and t >= t_contact + react_contact:
            feeding = True
            if not creeping:
                brace_t0 = t
            creeping = False
        if not retracting and depth_reached and t >= t_depth + react_depth:
            retracting = True
            feeding = False
            creeping = False
            x_des = x

        if t < t_grab:
            f_h = 0.0
        else:
            if retracting:
                v_des = -retract_speed
                x_des = x_des - retract_speed * ts
                k_eff = k_h
                b_eff = b_h
            elif feeding:
                v_des = feed_intent
                x_des = x_des + feed_intent * ts
                bf = (t - brace_t0) / brace_time
                if bf > 1.0:
                    bf = 1.0
                k_eff = k_h + (brace_k - k_h) * bf
                b_eff = b_h + (brace_b - b_h) * bf
            elif creeping:
                gap = x_wall - x
                v_des = touch_speed + approach_gain * gap
                if v_des > approach_speed:
                    v_des = approach_speed
                elif v_des < 0.0:
                    v_des = 0.0
                x_des = x_des + v_des * ts
                bf = (t - brace_t0) / brace_time
                if bf > 1.0:
                    bf = 1.0
                k_eff = k_h + (brace_k - k_h) * bf
                b_eff = b_h + (brace_b - b_h) * bf
            else:
                tau = (t - t_grab) / reach_time
                if tau > 1.0:
                    tau = 1.0
                s = tau * tau * tau * (10.0 + tau * (-15.0 + 6.0 * tau))
                sd = 30.0 * tau * tau * (1.0 + tau * (-2.0 + tau)) / reach_time
                x_des = x_plan_end * s
                v_des = x_plan_end * sd
                k_eff = k_h
                b_eff = b_h
            g = (t - t_grab) / grab_ramp
            if g > 1.0:
                g = 1.0
            noise = fh_noise[k]
            if has_contacted and not retracting:
                # drilling vibration builds as the bit engages the material
                eng = pen_prev / engage_depth
                if eng > 1.0:
                    eng = 1.0
                noise = noise * (1.0 + (contact_noise_scale - 1.0) * eng)
            f_h = g * (k_eff * (x_des - x) + b_eff * (v_des - v) + noise)

        # ---- environment force (unilateral spring-damper + drill line)
        if pen_prev > 0.0:
            f_env = k_e * pen_prev + b_e * v + drill_wave[k]
            if f_env < 0.0:
                f_env = 0.0
        else:
            f_env = 0.0

        f_int = f_h - f_env

        # ---- admittance controller (implicit truncated-GL step)
        c = m_cmd * ts ** (-alpha_cmd)
        hist = np.dot(wrev, vpad[k:k + gl_len])
        v_ref = (f_int - c * hist) / (c + b_cmd)
        vpad[gl_len + k] = v_ref

        # ---- robot surrogate (backward-Euler second-order lag)
        a = (a + ts * wn * wn * (v_ref - v)) / rob_den
        v = v + ts * a
        x = x + ts * v

        # ---- post-step events and ground-truth label
        pen = x - x_wall
        if pen < 0.0:
            pen = 0.0
        if pen > 0.0 and not has_contacted:
            has_contacted = True
            t_contact = t
        if pen >= depth_target and not depth_reached:
            depth_reached = True
            t_depth = t
        if t < t_grab:
            s_true = IDLE
        elif not has_contacted:
            s_true = DRIVING
        elif depth_reached and pen <= 0.0:
            s_true = DRIVING
        else:
            s_true = CONTACT

        floats[k, CH_T] = t
        floats[k, CH_V] = v
        floats[k, CH_VREF] = v_ref
        floats[k, CH_FH] = f_h
        floats[k, CH_FENV] = f_env
        floats[k, CH_FINT] = f_int
        floats[k, CH_PEN] = pen
        floats[k, CH_B] = b_cmd
        floats[k, CH_ALPHA] = alpha_cmd
        labels[k, LB_TRUE] = s_true
        labels[k, LB_RAW] = raw
        labels[k, LB_VOTED] = verdict
        labels[k, LB_PROC] = processed

        if v > v_limit or v < -v_limit:
            unstable = 1
            timeout = 0
            n_steps = k + 1
            break
        if depth_reached and pen <= 0.0 and x <= x_wall - pullback:
            timeout = 0
            n_steps = k + 1
            break

    return n_steps, timeout, unstable


def _contact_probe_impl(ts, n_steps, gl_len, m, b, alpha,
                        k_h, b_h, feed_intent,
                        x_wall, k_e, b_e, drill_wave,
                        fh_noise, impulse, impulse_step,
                        pen0, wn, zeta, v_limit):
    """Contact-phase probe for the stability map.

    Fixed controller parameters, braced human pressing with a constant
    feed intent, drill engaged, plus a force impulse; returns the velocity
    trajectory (the caller classifies envelope growth).  Stops early when
    the velocity limit is exceeded.
    """
    w = np.empty(gl_len + 1, dtype=np.float64)
    wrev = np.empty(gl_len, dtype=np.float64)
    _gl_fill(alpha, w, wrev)
    c = m * ts ** (-alpha)
    vpad = np.zeros(gl_len + n_steps, dtype=np.float64)
    v_out = np.zeros(n_steps, dtype=np.float64)

    v = 0.0
    a = 0.0
    x = x_wall + pen0
    x_des = x
    rob_den = 1.0 + 2.0 * zeta * wn * ts + (wn * ts) * (wn * ts)

    for k in range(n_steps):
        x_des = x_des + feed_intent * ts
        f_h = k_h * (x_des - x) + b_h * (feed_intent - v) + fh_noise[k]
        if k == impulse_step:
            f_h = f_h + impulse
        pen = x - x_wall
        if pen > 0.0:
            f_env = k_e * pen + b_e * v + drill_wave[k]
            if f_env < 0.0:
                f_env = 0.0
        else:
            f_env = 0.0
        f_int = f_h - f_env

        hist = np.dot(wrev, vpad[k:k + gl_len])
        v_ref = (f_int - c * hist) / (c + b)
        vpad[gl_len + k] = v_ref

        a = (a + ts * wn * wn * (v_ref - v)) / rob_den
        v = v + ts * a
        x = x + ts * v
        v_out[k] = v
        if v > v_limit or v < -v_limit:
            return v_out[:k + 1]
    return v_out


def _compile(fn):
    if NUMBA_ENABLED:
        return njit(cache=True)(fn)
    return fn


# public kernels: compiled when numba is active, interpreted otherwise
admittance_response = _compile(_admittance_response_impl)
label_pipeline = _compile(_label_pipeline_impl)
closed_loop_trial = _compile(_closed_loop_trial_impl)
contact_probe = _compile(_contact_probe_impl)

# interpreted twins kept importable for fallback benchmarking and testing
admittance_response_py = _admittance_response_impl
label_pipeline_py = _label_pipeline_impl
closed_loop_trial_py = _closed_loop_trial_impl
contact_probe_py = _contact_probe_impl
