"""Per-trial performance metrics and cross-condition aggregation.

Driving-phase metrics (average human force, average velocity, total human
effort) integrate over [t_d, t_c], the interval between the Driving and
Contact onsets.  Contact oscillation severity is the peak of the
single-sided velocity amplitude spectrum in the 1-20 Hz band, computed on
the detrended, zero-phase band-pass-filtered Contact segment (drilling
only, retraction excluded).  The exchanged-energy check integrates
F_h * v from the trial start and flags any trace that extracts more than
a tolerance of energy from the operator.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import signal, stats

from .subtasks import Subtask

BAND_LOW = 1.0     # Hz
BAND_HIGH = 20.0   # Hz
BAND_ORDER = 4
PASSIVITY_TOL = 1e-3  # J


@dataclass
class TrialMetrics:
    fh_ave: float   # N, mean human force while Driving
    v_ave: float    # m/s, mean velocity while Driving
    eh_tot: float   # J, integral of |F_h * v| while Driving
    af_max: float   # m/s, peak in-band velocity spectrum amplitude in Contact
    t_d: float      # s, Driving onset
    t_c: float      # s, Contact onset

    def __post_init__(self):
        if not self.t_d < self.t_c:
            raise ValueError("Driving onset must precede Contact onset")


def _phase_bounds(record, labels: str):
    channel = {"truth": record.subtask_true,
               "processed": record.subtask_processed}[labels]
    d_idx = np.nonzero(channel == int(Subtask.DRIVING))[0]
    c_idx = np.nonzero(channel == int(Subtask.CONTACT))[0]
    if d_idx.size == 0 or c_idx.size == 0:
        raise ValueError("trial is missing a Driving or Contact phase")
    return int(d_idx[0]), int(c_idx[0])


def driving_metrics(record, labels: str = "truth"):
    """(Fh_ave, v_ave, Eh_tot) over the Driving phase by trapezoid rule."""
    d, c = _phase_bounds(record, labels)
    t = record.t[d:c + 1]
    span = t[-1] - t[0]
    fh_ave = float(np.trapezoid(record.F_h[d:c + 1], t) / span)
    v_ave = float(np.trapezoid(record.v[d:c + 1], t) / span)
    eh_tot = float(np.trapezoid(np.abs(record.F_h[d:c + 1] * record.v[d:c + 1]), t))
    return fh_ave, v_ave, eh_tot


def contact_segment(record, labels: str = "truth") -> np.ndarray:
    """Velocity over the drilling portion of Contact (retraction excluded).

    The segment runs from the Contact onset to the sample where the target
    depth is first reached (or to the end of the Contact phase if the
    depth was never reached), so appending post-retraction samples cannot
    change the metric.
    """
    _, c = _phase_bounds(record, labels)
    depth = record.meta.get("target_depth")
    end = None
    if depth is not None:
        reached = np.nonzero(record.penetration >= float(depth))[0]
        if reached.size:
            end = int(reached[0])
    if end is None:
        channel = {"truth": record.subtask_true,
                   "processed": record.subtask_processed}[labels]
        end = int(np.nonzero(channel == int(Subtask.CONTACT))[0][-1])
    return record.v[c:end + 1]


def bandpass_filter(x: np.ndarray, sample_period: float,
                    lo: float = BAND_LOW, hi: float = BAND_HIGH,
                    order: int = BAND_ORDER) -> np.ndarray:
    """Zero-phase Butterworth band-pass (biquad cascade, forward-backward)."""
    sos = signal.butter(order, [lo, hi], btype="bandpass",
                        fs=1.0 / sample_period, output="sos")
    return signal.sosfiltfilt(sos, x)


def amplitude_spectrum(x: np.ndarray, sample_period: float,
                       n_fft: int | None = None):
    """Single-sided amplitude spectrum A_f = 2|X_f|/N (DC, Nyquist unscaled).

    N is the true sample count even when the FFT is zero-padded to n_fft
    (default: next power of two >= len(x)).
    """
    n = len(x)
    if n_fft is None:
        n_fft = 1 << (n - 1).bit_length()
    spec = np.fft.rfft(x, n=n_fft)
    amp = np.abs(spec) * 2.0 / n
    amp[0] /= 2.0
    if n_fft % 2 == 0:
        amp[-1] /= 2.0
    freqs = np.fft.rfftfreq(n_fft, d=sample_period)
    return freqs, amp


def contact_oscillation(record, labels: str = "truth") -> float:
    """Peak single-sided velocity amplitude in the 1-20 Hz band at Contact."""
    v = contact_segment(record, labels)
    ts = record.sample_period
    if len(v) * ts < 1.0:
        raise ValueError(f"Contact segment too short for spectral analysis "
                         f"({len(v) * ts:.3f} s < 1 s)")
    v = v - np.mean(v)
    filtered = bandpass_filter(v, ts)
    freqs, amp = amplitude_spectrum(filtered, ts)
    band = (freqs >= BAND_LOW) & (freqs <= BAND_HIGH)
    return float(np.max(amp[band]))


def exchanged_energy(record):
    """Cumulative operator-to-robot energy E(t) = integral of F_h * v.

    Returns (energy series, minimum, passivity verdict).  The verdict
    fails when the trace dips below -1e-3 J, i.e. when the coupled system
    would have handed net energy back to the operator.
    """
    power = record.F_h * record.v
    energy = np.concatenate(([0.0], np.cumsum(
        (power[1:] + power[:-1]) * 0.5 * np.diff(record.t))))
    e_min = float(np.min(energy))
    return energy, e_min, e_min >= -PASSIVITY_TOL


def trial_metrics(record, labels: str = "truth") -> TrialMetrics:
    """All scalar metrics of one trial."""
    d, c = _phase_bounds(record, labels)
    fh_ave, v_ave, eh_tot = driving_metrics(record, labels)
    af_max = contact_oscillation(record, labels)
    return TrialMetrics(fh_ave, v_ave, eh_tot, af_max,
                        float(record.t[d]), float(record.t[c]))


METRIC_NAMES = ("fh_ave", "v_ave", "eh_tot", "af_max")


def _metric_value(record, name: str, labels: str) -> float:
    if name in ("fh_ave", "v_ave", "eh_tot"):
        return driving_metrics(record, labels)[("fh_ave", "v_ave", "eh_tot").index(name)]
    if name == "af_max":
        return contact_oscillation(record, labels)
    raise ValueError(f"unknown metric {name!r}; expected one of {METRIC_NAMES}")


@dataclass
class ConditionReport:
    """Per-condition population mean with 95% CI over subject means."""

    metric: str
    conditions: list
    mean: dict
    ci_low: dict
    ci_high: dict
    delta_vs_baseline: dict
    baseline: str
    subject_means: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        lines = ["condition,metric,mean,ci_low,ci_high,delta_vs_C1"]
        for cond in self.conditions:
            delta = self.delta_vs_baseline[cond]
            delta_s = "" if delta is None else f"{delta:.6f}"
            lines.append(f"{cond},{self.metric},{self.mean[cond]:.9g},"
                         f"{self.ci_low[cond]:.9g},{self.ci_high[cond]:.9g},"
                         f"{delta_s}")
        return "\n".join(lines) + "\n"


def t_interval(values: np.ndarray, confidence: float = 0.95):
    """Mean and t-distribution confidence interval of a small sample."""
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    mean = float(np.mean(values))
    if n < 2:
        return mean, mean, mean
    sem = float(np.std(values, ddof=1) / np.sqrt(n))
    tcrit = float(stats.t.ppf(0.5 + confidence / 2.0, n - 1))
    return mean, mean - tcrit * sem, mean + tcrit * sem


def compare_conditions(records, metric: str, labels: str = "truth",
                       baseline: str = "c1") -> ConditionReport:
    """Aggregate one metric across conditions with subject-level means.

    The confidence interval is computed over subject means (one value per
    subject per condition), not over pooled trials.  Relative deltas are
    reported against the baseline condition.
    """
    by_cond: dict = {}
    for rec in records:
        cond = str(rec.meta.get("mode", "?"))
        subj = rec.meta.get("subject", 0)
        by_cond.setdefault(cond, {}).setdefault(subj, []).append(
            _metric_value(rec, metric, labels))
    conditions = sorted(by_cond)
    if baseline not in by_cond:
        baseline = conditions[0]
    report = ConditionReport(metric, conditions, {}, {}, {}, {}, baseline)
    for cond, by_subj in by_cond.items():
        if len(by_subj) < 2:
            raise ValueError(f"condition {cond} has fewer than 2 subjects")
        means = np.array([np.mean(vals) for _, vals in sorted(by_subj.items())])
        report.subject_means[cond] = means
        mean, lo, hi = t_interval(means)
        report.mean[cond] = mean
        report.ci_low[cond] = lo
        report.ci_high[cond] = hi
    base = report.mean[baseline]
    for cond in conditions:
        report.delta_vs_baseline[cond] = None if cond == baseline or base == 0 \
            else (report.mean[cond] - base) / base
    return report
