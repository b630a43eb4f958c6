"""Subtask-adaptive admittance control simulator for collaborative drilling.

Simulates the closed loop of a human guiding a drill-carrying robot
through an admittance controller (integer- or fractional-order), with an
ANN subtask classifier adapting the controller parameters online, plus
the analysis tooling: performance metrics, passivity monitoring and
stability maps.
"""

from .adaptation import AdaptationConfig, AdaptationPolicy, ControllerMode, target_params
from .classifier import (DRIVING_FORCE_THRESHOLD, EvalReport, MlpModel,
                         TrainConfig, evaluate, extract_windows, label_trial, train)
from .controller import (AdmittanceState, ControllerParams, foac_step,
                         gl_coefficients, ioac_step, set_params)
from .metrics import (TrialMetrics, compare_conditions, contact_oscillation,
                      driving_metrics, exchanged_energy, trial_metrics)
from .models import (EnvironmentModel, HumanModel, HumanOperator, RobotState,
                     RobotSurrogate, env_force, human_force, min_jerk, robot_step)
from .processor import DwellLatch, SubtaskPipeline, VotingBuffer, process_stream
from .records import TrialRecord, read_corpus, read_trial, write_trial
from .simulate import (CorpusPreset, Scenario, generate_corpus, mode_setup,
                       run_trial, testing_preset, training_preset, training_setup)
from .stability import StabilityGrid, probe_stability, sweep_map
from .subtasks import Subtask

__version__ = "0.1.0"
