"""Flat key-value scenario configuration.

One document configures every subsystem (adaptation targets, subtask
processor, operator and workpiece models, training recipe, sweep axes).
Unknown keys are rejected, and every CLI run writes its fully resolved
configuration next to its outputs so results stay reproducible.

Format: one ``key = value`` pair per line, ``#`` comments allowed.
"""

from dataclasses import asdict, dataclass, fields

from .adaptation import AdaptationConfig
from .classifier import TrainConfig
from .models import EnvironmentModel, HumanModel, RobotSurrogate
from .simulate import CorpusPreset, Scenario, mode_setup, training_setup, TRAINING_CONTROLLERS


class ConfigError(ValueError):
    """Bad key, bad value or unusable combination in a config document."""


@dataclass
class ScenarioConfig:
    """All tunables with their defaults (testing scenario: cardboard)."""

    seed: int = 0
    corpus: str = "testing"            # testing | training
    mode: str = "c1"                   # c1 | c2 | c3 (run command)
    labels: str = "truth"              # truth | classifier

    # admittance adaptation (testing modes)
    mass: float = 50.0
    b_low: float = 200.0
    b_nom: float = 300.0
    b_high: float = 400.0
    alpha_low: float = 0.85
    alpha_nom: float = 1.0
    t_w_ms: float = 200.0

    # controller discretization
    gl_memory_steps: int = 2000

    # subtask processor
    voting_buffer_steps: int = 30
    min_dwell_ms: float = 1000.0
    raw_label_delay_steps: int = 0
    classifier_decim_steps: int = 2
    classifier_delay_steps: int = 2

    # human operator
    human_stiffness: float = 150.0
    human_damping: float = 60.0
    grab_time_min: float = 1.2
    grab_time_max: float = 2.5
    grab_ramp_min: float = 0.1
    grab_ramp_max: float = 0.3
    reach_time: float = 3.0
    reach_overshoot: float = 0.015
    approach_distance: float = 0.025
    approach_speed: float = 0.008
    approach_gain: float = 0.5
    touch_speed: float = 0.001
    feed_intent: float = 0.012
    brace_stiffness: float = 3000.0
    brace_damping: float = 300.0
    brace_time: float = 0.3
    react_contact: float = 0.15
    react_depth: float = 0.2
    retract_speed: float = 0.08
    force_noise: float = 0.25
    contact_noise_scale: float = 20.0
    engage_depth: float = 0.0015
    impedance_jitter: float = 0.2
    reach_jitter: float = 0.15

    # environment / drill
    workpiece_distance: float = 0.30
    env_stiffness: float = 12000.0
    env_damping: float = 50.0
    drill_amp: float = 1.5
    drill_freq: float = 75.0
    target_depth: float = 0.005
    env_stiffness_jitter: float = 0.0
    drill_amp_jitter: float = 0.0

    # robot surrogate
    robot_natural_freq: float = 40.0
    robot_damping_ratio: float = 0.7

    # trial limits
    timeout: float = 30.0
    velocity_limit: float = 1.0
    pullback: float = 0.004

    # corpus size
    n_subjects: int = 12
    n_trials: int = 4

    # classifier training recipe
    train_learn_rate: float = 0.001
    train_l2: float = 0.001
    train_dropout: float = 0.1
    train_epochs: int = 80
    train_batch: int = 128
    train_val_fraction: float = 0.25
    train_stride: int = 5
    train_seq_len: int = 60
    train_hidden_layers: int = 5
    train_hidden_units: int = 75
    train_force_threshold: float = 3.0

    # stability sweep axes
    sweep_b_min: float = 50.0
    sweep_b_max: float = 800.0
    sweep_b_step: float = 25.0
    sweep_alphas: str = "0.85,1.0"
    sweep_stiffness: str = "4000,8000,12000,24000"

    # ------------------------------------------------------------------
    def adaptation(self) -> AdaptationConfig:
        return AdaptationConfig(b_low=self.b_low, b_nom=self.b_nom,
                                b_high=self.b_high, alpha_nom=self.alpha_nom,
                                alpha_low=self.alpha_low,
                                t_w=self.t_w_ms / 1000.0, mass=self.mass)

    def human(self) -> HumanModel:
        return HumanModel(
            grip_stiffness=self.human_stiffness,
            grip_damping=self.human_damping,
            grab_ramp=0.5 * (self.grab_ramp_min + self.grab_ramp_max),
            reach_time=self.reach_time,
            reach_overshoot=self.reach_overshoot,
            approach_distance=self.approach_distance,
            approach_speed=self.approach_speed,
            approach_gain=self.approach_gain,
            touch_speed=self.touch_speed,
            feed_intent=self.feed_intent,
            brace_stiffness=self.brace_stiffness,
            brace_damping=self.brace_damping,
            brace_time=self.brace_time,
            react_contact=self.react_contact,
            react_depth=self.react_depth,
            retract_speed=self.retract_speed,
            force_noise=self.force_noise,
            contact_noise_scale=self.contact_noise_scale,
            engage_depth=self.engage_depth)

    def environment(self) -> EnvironmentModel:
        return EnvironmentModel(x_wall=self.workpiece_distance,
                                stiffness=self.env_stiffness,
                                damping=self.env_damping,
                                drill_amp=self.drill_amp,
                                drill_freq=self.drill_freq,
                                target_depth=self.target_depth)

    def robot(self) -> RobotSurrogate:
        return RobotSurrogate(natural_freq=self.robot_natural_freq,
                              damping_ratio=self.robot_damping_ratio)

    def scenario(self) -> Scenario:
        return Scenario(human=self.human(), env=self.environment(),
                        robot=self.robot(),
                        gl_memory=self.gl_memory_steps,
                        n_vote=self.voting_buffer_steps,
                        min_dwell=self.min_dwell_ms / 1000.0,
                        raw_label_delay=self.raw_label_delay_steps,
                        timeout=self.timeout,
                        v_limit=self.velocity_limit,
                        pullback=self.pullback,
                        classifier_decim=self.classifier_decim_steps,
                        classifier_delay=self.classifier_delay_steps)

    def preset(self) -> CorpusPreset:
        scenario = self.scenario()
        if self.corpus == "training":
            setups = [training_setup(n) for n in TRAINING_CONTROLLERS]
        elif self.corpus == "testing":
            setups = [mode_setup(m, self.adaptation()) for m in ("c1", "c2", "c3")]
        else:
            raise ConfigError(f"unknown corpus {self.corpus!r}")
        return CorpusPreset(
            self.corpus, scenario, setups, self.n_subjects, self.n_trials,
            impedance_jitter=self.impedance_jitter,
            grab_window=(self.grab_time_min, self.grab_time_max),
            grab_ramp_window=(self.grab_ramp_min, self.grab_ramp_max),
            reach_jitter=self.reach_jitter,
            env_stiffness_jitter=self.env_stiffness_jitter,
            drill_amp_jitter=self.drill_amp_jitter)

    def train_config(self) -> TrainConfig:
        return TrainConfig(learn_rate=self.train_learn_rate, l2=self.train_l2,
                           dropout=self.train_dropout, epochs=self.train_epochs,
                           batch_size=self.train_batch,
                           val_fraction=self.train_val_fraction,
                           window_stride=self.train_stride,
                           seq_len=self.train_seq_len,
                           hidden_layers=self.train_hidden_layers,
                           hidden_units=self.train_hidden_units,
                           f_threshold=self.train_force_threshold,
                           seed=self.seed)

    def sweep_axes(self):
        import numpy as np

        n = int(round((self.sweep_b_max - self.sweep_b_min) / self.sweep_b_step)) + 1
        b = self.sweep_b_min + self.sweep_b_step * np.arange(n)
        alphas = np.array([float(v) for v in self.sweep_alphas.split(",") if v])
        kes = np.array([float(v) for v in self.sweep_stiffness.split(",") if v])
        return b, alphas, kes

    def to_text(self) -> str:
        lines = ["# resolved drillsim configuration"]
        for f in fields(self):
            lines.append(f"{f.name} = {getattr(self, f.name)}")
        return "\n".join(lines) + "\n"


# keys switched automatically when corpus = training and not set explicitly
TRAINING_DEFAULTS = {
    "human_stiffness": 400.0,
    "human_damping": 150.0,
    "feed_intent": 0.03,
    "brace_stiffness": 12000.0,
    "brace_damping": 600.0,
    "env_stiffness": 24000.0,
    "drill_amp": 2.5,
    "drill_freq": 33.3,
    "env_stiffness_jitter": 0.2,
    "drill_amp_jitter": 0.3,
    "n_subjects": 7,
}

_FIELD_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}


def parse_config_text(text: str) -> dict:
    """Parse key = value lines into a raw string dict."""
    raw = {}
    for ln, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        raw[key.strip()] = value.strip()
    return raw


def _cast(key: str, value):
    target = _FIELD_TYPES[key]
    try:
        if target in ("int", int):
            return int(value)
        if target in ("float", float):
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {key}: {value!r}") from None


def build_config(raw: dict | None = None, **overrides) -> ScenarioConfig:
    """Resolve raw/explicit settings into a validated ScenarioConfig.

    Unknown keys are rejected.  When the corpus is 'training', the
    training-experiment defaults apply to any key the user did not set.
    """
    explicit = dict(raw or {})
    explicit.update({k: v for k, v in overrides.items() if v is not None})
    unknown = set(explicit) - set(_FIELD_TYPES)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    values = {k: _cast(k, v) for k, v in explicit.items()}
    if values.get("corpus", "testing") == "training":
        for key, val in TRAINING_DEFAULTS.items():
            values.setdefault(key, val)
    try:
        cfg = ScenarioConfig(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if cfg.corpus not in ("testing", "training"):
        raise ConfigError(f"corpus must be testing or training, got {cfg.corpus!r}")
    if cfg.labels not in ("truth", "classifier"):
        raise ConfigError(f"labels must be truth or classifier, got {cfg.labels!r}")
    return cfg


def load_config(path=None, **overrides) -> ScenarioConfig:
    """Load a config file (optional) and apply command-line overrides."""
    raw = {}
    if path is not None:
        from pathlib import Path

        text = Path(path).read_text()
        raw = parse_config_text(text)
    return build_config(raw, **overrides)
