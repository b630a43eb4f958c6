"""Closed-loop trial simulation and corpus generation.

A trial steps the loop of interaction-force -> admittance controller ->
robot surrogate -> human/environment forces at 500 Hz, with the subtask
label pipeline and parameter adaptation in the loop, and returns a fully
populated TrialRecord.

Two execution paths produce identical trajectories:

* the fused kernel (``kernels.closed_loop_trial``), used whenever the
  adaptation labels come from ground truth (corpus generation, sweeps);
* a step-by-step Python loop mirroring the kernel operation for operation,
  used when a live classifier supplies the labels.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .adaptation import AdaptationConfig, AdaptationPolicy, ControllerMode, target_params
from .controller import AdmittanceState, ControllerParams, foac_step, set_params
from .models import EnvironmentModel, HumanModel, HumanOperator, RobotState, RobotSurrogate
from .processor import SubtaskPipeline
from .records import TrialRecord
from .subtasks import Subtask

# admittance controllers of the earlier position-based experiments used to
# produce the training corpus: fixed, or interpolated linearly with the
# position between a transparent start and a stiff at-contact setting
TRAINING_CONTROLLERS = {
    "t_fixed": {"start": (30.0, 2250.0, 1.0), "end": (30.0, 2250.0, 1.0)},
    "t_adaptive_ioac": {"start": (69.0, 711.0, 1.0), "end": (30.0, 2250.0, 1.0)},
    "t_adaptive_foac": {"start": (69.0, 711.0, 1.0), "end": (69.0, 711.0, 0.85)},
}


@dataclass
class ControllerSetup:
    """Resolved adaptation scheme and parameter targets for one trial."""

    scheme: int
    tag: str
    m_idle: float
    b_idle: float
    alpha_idle: float
    t_w: float = 0.2
    b_targets: np.ndarray = field(default_factory=lambda: np.zeros(4))
    a_targets: np.ndarray = field(default_factory=lambda: np.ones(4))
    pos_start: np.ndarray = field(default_factory=lambda: np.zeros(3))
    pos_end: np.ndarray = field(default_factory=lambda: np.zeros(3))
    mode: ControllerMode | None = None
    adapt_cfg: AdaptationConfig | None = None


def mode_setup(mode, cfg: AdaptationConfig | None = None) -> ControllerSetup:
    """Controller setup for the fixed/adaptive testing modes c1..c3."""
    mode = ControllerMode.parse(mode)
    cfg = cfg if cfg is not None else AdaptationConfig()
    if mode is ControllerMode.C1:
        return ControllerSetup(kernels.SCHEME_FIXED, mode.value, cfg.mass,
                               cfg.b_high, cfg.alpha_nom, cfg.t_w,
                               mode=mode, adapt_cfg=cfg)
    b_t = np.zeros(4)
    a_t = np.ones(4)
    for label in Subtask:
        b_t[label], a_t[label] = target_params(label, mode, cfg)
    return ControllerSetup(kernels.SCHEME_SUBTASK, mode.value, cfg.mass,
                           b_t[Subtask.IDLE], a_t[Subtask.IDLE], cfg.t_w,
                           b_targets=b_t, a_targets=a_t,
                           mode=mode, adapt_cfg=cfg)


def training_setup(name: str) -> ControllerSetup:
    """Controller setup for one of the training-corpus controllers."""
    try:
        spec = TRAINING_CONTROLLERS[name]
    except KeyError:
        raise ValueError(f"unknown training controller {name!r}") from None
    start = np.asarray(spec["start"], dtype=np.float64)
    end = np.asarray(spec["end"], dtype=np.float64)
    if np.array_equal(start, end):
        return ControllerSetup(kernels.SCHEME_FIXED, name,
                               start[0], start[1], start[2])
    return ControllerSetup(kernels.SCHEME_POSITION, name,
                           start[0], start[1], start[2],
                           pos_start=start, pos_end=end)


@dataclass
class Scenario:
    """Everything needed to run one trial except the controller setup."""

    human: HumanModel = field(default_factory=HumanModel)
    env: EnvironmentModel = field(default_factory=EnvironmentModel)
    robot: RobotSurrogate = field(default_factory=RobotSurrogate)
    sample_period: float = 0.002
    gl_memory: int = 2000
    n_vote: int = 30
    min_dwell: float = 1.0
    raw_label_delay: int = 0
    timeout: float = 30.0
    v_limit: float = 1.0
    pullback: float = 0.004
    drill_on: bool = True
    classifier_decim: int = 2
    classifier_delay: int = 2

    @property
    def max_steps(self) -> int:
        return int(round(self.timeout / self.sample_period))


def _excitation(scenario: Scenario, rng: np.random.Generator):
    """Pregenerated per-step force noise and drill force line."""
    n = scenario.max_steps
    ts = scenario.sample_period
    noise = rng.standard_normal(n) * scenario.human.force_noise
    if scenario.drill_on and scenario.env.drill_amp > 0.0:
        t = np.arange(n, dtype=np.float64) * ts
        wave = scenario.env.drill_amp * np.sin(2.0 * np.pi * scenario.env.drill_freq * t)
    else:
        wave = np.zeros(n, dtype=np.float64)
    return noise, wave


def _make_record(scenario, setup, floats, labels, n, timeout, unstable,
                 source, meta_extra=None) -> TrialRecord:
    K = kernels
    meta = {
        "mode": setup.tag,
        "adaptation_source": source,
        "sample_period": scenario.sample_period,
        "target_depth": scenario.env.target_depth,
        "env_stiffness": scenario.env.stiffness,
        "t_grab": scenario.human.t_grab,
        "timeout": int(timeout),
        "unstable": int(unstable),
    }
    if meta_extra:
        meta.update(meta_extra)
    return TrialRecord(
        t=floats[:n, K.CH_T].copy(),
        v=floats[:n, K.CH_V].copy(),
        v_ref=floats[:n, K.CH_VREF].copy(),
        F_h=floats[:n, K.CH_FH].copy(),
        F_env=floats[:n, K.CH_FENV].copy(),
        F_int=floats[:n, K.CH_FINT].copy(),
        penetration=floats[:n, K.CH_PEN].copy(),
        subtask_true=labels[:n, K.LB_TRUE].copy(),
        subtask_raw=labels[:n, K.LB_RAW].copy(),
        subtask_voted=labels[:n, K.LB_VOTED].copy(),
        subtask_processed=labels[:n, K.LB_PROC].copy(),
        b=floats[:n, K.CH_B].copy(),
        alpha=floats[:n, K.CH_ALPHA].copy(),
        meta=meta,
    )


def run_trial(scenario: Scenario, setup: ControllerSetup, seed=0,
              classifier=None, adaptation_source: str = "ground_truth",
              use_kernel: bool | None = None,
              meta: dict | None = None) -> TrialRecord:
    """Simulate one drilling trial and return its record.

    ``adaptation_source`` selects what feeds the subtask processor:
    ``"ground_truth"`` (labels derived from the simulated state) or
    ``"classifier"`` (a trained model running in the loop at its own
    decimated rate).  The classifier path always uses the step-by-step
    loop; the ground-truth path uses the fused kernel unless
    ``use_kernel=False``.
    """
    if adaptation_source not in ("ground_truth", "classifier"):
        raise ValueError(f"unknown adaptation source {adaptation_source!r}")
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    noise, wave = _excitation(scenario, rng)

    if adaptation_source == "classifier":
        if classifier is None:
            raise ValueError("classifier adaptation source requires a model")
        return _run_python(scenario, setup, noise, wave, classifier, meta)
    if use_kernel is False:
        return _run_python(scenario, setup, noise, wave, None, meta)

    n_max = scenario.max_steps
    floats = np.zeros((n_max, kernels.N_FLOAT_CHANNELS), dtype=np.float64)
    labels = np.zeros((n_max, kernels.N_LABEL_CHANNELS), dtype=np.int64)
    h = scenario.human
    e = scenario.env
    n, timeout, unstable = kernels.closed_loop_trial(
        scenario.sample_period, n_max,
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
    return _make_record(scenario, setup, floats, labels, n, timeout,
                        unstable, "ground_truth", meta)


class _PositionPolicy:
    """Position-interpolated controller parameters (training corpus)."""

    def __init__(self, setup: ControllerSetup, x_wall: float):
        self.start = setup.pos_start
        self.end = setup.pos_end
        self.x_wall = x_wall

    def params(self, x: float) -> tuple[float, float, float]:
        r = x / self.x_wall
        if r < 0.0:
            r = 0.0
        elif r > 1.0:
            r = 1.0
        m = self.start[0] + (self.end[0] - self.start[0]) * r
        b = self.start[1] + (self.end[1] - self.start[1]) * r
        alpha = self.start[2] + (self.end[2] - self.start[2]) * r
        return m, b, alpha


def _run_python(scenario: Scenario, setup: ControllerSetup, noise, wave,
                classifier, meta: dict | None) -> TrialRecord:
    """Step-by-step twin of the fused kernel (supports a live classifier).

    The per-step operation order mirrors kernels.closed_loop_trial exactly,
    so ground-truth runs produce bitwise-identical records on both paths.
    """
    K = kernels
    ts = scenario.sample_period
    n_max = scenario.max_steps
    floats = np.zeros((n_max, K.N_FLOAT_CHANNELS), dtype=np.float64)
    labels = np.zeros((n_max, K.N_LABEL_CHANNELS), dtype=np.int64)

    admit = AdmittanceState(
        ControllerParams(setup.m_idle, setup.b_idle, setup.alpha_idle),
        sample_period=ts, memory=scenario.gl_memory)
    robot = RobotState(scenario.robot, ts)
    operator = HumanOperator(scenario.human, scenario.env.x_wall, ts)
    pipeline = SubtaskPipeline(scenario.n_vote, scenario.min_dwell)
    if setup.scheme == K.SCHEME_SUBTASK:
        if setup.mode is None or setup.adapt_cfg is None:
            raise ValueError("subtask-adaptive setup needs mode and config")
        policy = AdaptationPolicy(setup.mode, setup.adapt_cfg)
    elif setup.scheme == K.SCHEME_POSITION:
        policy = _PositionPolicy(setup, scenario.env.x_wall)
    else:
        policy = None

    e = scenario.env
    x = 0.0
    current_raw = int(Subtask.IDLE)
    pending = []  # (publish_step, label) queue from the classifier thread
    seq_len = getattr(classifier, "seq_len", 0)

    unstable = 0
    timeout = 1
    n_steps = n_max

    for k in range(n_max):
        t = k * ts

        if classifier is not None:
            while pending and pending[0][0] <= k:
                current_raw = pending.pop(0)[1]
            raw = current_raw
        else:
            back = k - 1 - scenario.raw_label_delay
            raw = int(Subtask.IDLE) if back < 0 else int(labels[back, K.LB_TRUE])

        voted, processed = pipeline.step(Subtask(raw), t)

        if setup.scheme == K.SCHEME_SUBTASK:
            params = policy.update(processed, t)
            m_cmd, b_cmd, alpha_cmd = params.m, params.b, params.alpha
        elif setup.scheme == K.SCHEME_POSITION:
            m_cmd, b_cmd, alpha_cmd = policy.params(x)
        else:
            m_cmd, b_cmd, alpha_cmd = setup.m_idle, setup.b_idle, setup.alpha_idle
        set_params(admit, ControllerParams(m_cmd, b_cmd, alpha_cmd))

        pen_prev = max(x - e.x_wall, 0.0)
        f_h = operator.force(t, x, robot.v, noise[k])
        if pen_prev > 0.0:
            f_env = e.stiffness * pen_prev + e.damping * robot.v + wave[k]
            if f_env < 0.0:
                f_env = 0.0
        else:
            f_env = 0.0
        f_int = f_h - f_env

        v_ref = foac_step(admit, f_int)
        v = robot.step(v_ref)
        x = x + ts * v

        pen = max(x - e.x_wall, 0.0)
        operator.observe(t, pen, e.target_depth)
        if t < scenario.human.t_grab:
            s_true = int(Subtask.IDLE)
        elif not operator.has_contacted:
            s_true = int(Subtask.DRIVING)
        elif operator.depth_reached and pen <= 0.0:
            s_true = int(Subtask.DRIVING)
        else:
            s_true = int(Subtask.CONTACT)

        floats[k, K.CH_T] = t
        floats[k, K.CH_V] = v
        floats[k, K.CH_VREF] = v_ref
        floats[k, K.CH_FH] = f_h
        floats[k, K.CH_FENV] = f_env
        floats[k, K.CH_FINT] = f_int
        floats[k, K.CH_PEN] = pen
        floats[k, K.CH_B] = b_cmd
        floats[k, K.CH_ALPHA] = alpha_cmd
        labels[k, K.LB_TRUE] = s_true
        labels[k, K.LB_RAW] = raw
        labels[k, K.LB_VOTED] = int(voted)
        labels[k, K.LB_PROC] = int(processed)

        if classifier is not None and k % scenario.classifier_decim == 0:
            lo = max(0, k + 1 - seq_len)
            feats = np.zeros((seq_len, 3), dtype=np.float64)
            feats[seq_len - (k + 1 - lo):, 0] = floats[lo:k + 1, K.CH_V]
            feats[seq_len - (k + 1 - lo):, 1] = floats[lo:k + 1, K.CH_FINT]
            feats[seq_len - (k + 1 - lo):, 2] = floats[lo:k + 1, K.CH_FH]
            label = classifier.predict_window(feats)
            pending.append((k + max(scenario.classifier_delay, 1), int(label)))

        if v > scenario.v_limit or v < -scenario.v_limit:
            unstable = 1
            timeout = 0
            n_steps = k + 1
            break
        if operator.depth_reached and pen <= 0.0 and x <= e.x_wall - scenario.pullback:
            timeout = 0
            n_steps = k + 1
            break

    source = "classifier" if classifier is not None else "ground_truth"
    return _make_record(scenario, setup, floats, labels, n_steps, timeout,
                        unstable, source, meta)


# ---------------------------------------------------------------------------
# corpus generation


@dataclass
class CorpusPreset:
    """Base scenario plus per-subject/per-trial randomization ranges."""

    name: str
    scenario: Scenario
    setups: list
    n_subjects: int
    n_reps: int
    impedance_jitter: float = 0.2    # +-20% on grip stiffness/damping
    grab_window: tuple = (1.2, 2.5)  # s
    grab_ramp_window: tuple = (0.1, 0.3)
    reach_jitter: float = 0.15
    env_stiffness_jitter: float = 0.0
    drill_amp_jitter: float = 0.0


def testing_preset(n_subjects: int = 12, n_reps: int = 4,
                   scenario: Scenario | None = None,
                   adaptation: AdaptationConfig | None = None) -> CorpusPreset:
    """Cardboard workpiece, fixed/adaptive controllers c1..c3."""
    scenario = scenario if scenario is not None else Scenario()
    setups = [mode_setup(m, adaptation) for m in ("c1", "c2", "c3")]
    return CorpusPreset("testing", scenario, setups, n_subjects, n_reps)


def training_preset(n_subjects: int = 7, n_reps: int = 4,
                    scenario: Scenario | None = None) -> CorpusPreset:
    """Plywood workpiece, position-based controllers, varied stiffness."""
    if scenario is None:
        human = HumanModel(grip_stiffness=400.0, grip_damping=150.0,
                           feed_intent=0.03, brace_stiffness=12000.0,
                           brace_damping=600.0)
        env = EnvironmentModel(stiffness=24000.0, drill_amp=2.5,
                               drill_freq=33.3)
        scenario = Scenario(human=human, env=env)
    setups = [training_setup(n) for n in TRAINING_CONTROLLERS]
    return CorpusPreset("training", scenario, setups, n_subjects, n_reps,
                        env_stiffness_jitter=0.2, drill_amp_jitter=0.3)


def generate_corpus(preset: CorpusPreset, seed: int = 0,
                    adaptation_source: str = "ground_truth",
                    classifier=None) -> list[TrialRecord]:
    """Simulate the full subjects x controllers x repetitions grid.

    Subject-level impedance jitter and per-trial grab/reach variation are
    drawn from independent seed-sequence streams, so disjoint seeds give
    disjoint draws and reruns are bit-identical.
    """
    root = np.random.SeedSequence(seed)
    records = []
    for subj, subj_seq in enumerate(root.spawn(preset.n_subjects)):
        streams = subj_seq.spawn(1 + len(preset.setups) * preset.n_reps)
        subj_rng = np.random.default_rng(streams[0])
        jit = preset.impedance_jitter
        k_scale = subj_rng.uniform(1.0 - jit, 1.0 + jit)
        b_scale = subj_rng.uniform(1.0 - jit, 1.0 + jit)
        stream = 1
        for setup in preset.setups:
            for rep in range(preset.n_reps):
                trial_rng = np.random.default_rng(streams[stream])
                stream += 1
                human = replace(
                    preset.scenario.human,
                    grip_stiffness=preset.scenario.human.grip_stiffness * k_scale,
                    grip_damping=preset.scenario.human.grip_damping * b_scale,
                    t_grab=trial_rng.uniform(*preset.grab_window),
                    grab_ramp=trial_rng.uniform(*preset.grab_ramp_window),
                    reach_time=preset.scenario.human.reach_time
                    * trial_rng.uniform(1.0 - preset.reach_jitter,
                                        1.0 + preset.reach_jitter),
                )
                env = preset.scenario.env
                if preset.env_stiffness_jitter > 0.0:
                    env = replace(env, stiffness=env.stiffness * trial_rng.uniform(
                        1.0 - preset.env_stiffness_jitter,
                        1.0 + preset.env_stiffness_jitter))
                if preset.drill_amp_jitter > 0.0:
                    env = replace(env, drill_amp=env.drill_amp * trial_rng.uniform(
                        1.0 - preset.drill_amp_jitter,
                        1.0 + preset.drill_amp_jitter))
                scenario = replace(preset.scenario, human=human, env=env)
                meta = {"subject": subj, "rep": rep, "corpus": preset.name,
                        "corpus_seed": seed}
                records.append(run_trial(
                    scenario, setup, seed=trial_rng,
                    classifier=classifier, adaptation_source=adaptation_source,
                    meta=meta))
    return records
