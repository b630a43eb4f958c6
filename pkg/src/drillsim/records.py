"""Trial records and their on-disk CSV representation.

One record holds the full multichannel time series of a single drilling
trial at the fixed 2 ms sample period, plus metadata (subject, controller
mode, seed, outcome flags).  CSV values are written with 17 significant
digits so 64-bit floats round-trip exactly; the metadata goes to a
key-value sidecar with the same basename.
"""

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SAMPLE_PERIOD = 0.002

CHANNELS = ("t", "v", "v_ref", "F_h", "F_env", "F_int", "penetration",
            "subtask_true", "subtask_raw", "subtask_voted",
            "subtask_processed", "b", "alpha")
LABEL_CHANNELS = ("subtask_true", "subtask_raw", "subtask_voted",
                  "subtask_processed")


@dataclass
class TrialRecord:
    """Time series and metadata of one simulated drilling trial."""

    t: np.ndarray
    v: np.ndarray
    v_ref: np.ndarray
    F_h: np.ndarray
    F_env: np.ndarray
    F_int: np.ndarray
    penetration: np.ndarray
    subtask_true: np.ndarray
    subtask_raw: np.ndarray
    subtask_voted: np.ndarray
    subtask_processed: np.ndarray
    b: np.ndarray
    alpha: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.t)
        for name in CHANNELS:
            if len(getattr(self, name)) != n:
                raise ValueError(f"channel {name} length mismatch")
        self.validate_signals()

    def __len__(self):
        return len(self.t)

    @property
    def sample_period(self) -> float:
        return float(self.meta.get("sample_period", SAMPLE_PERIOD))

    def validate_signals(self):
        """Re-assert the defining signal identity F_int = F_h - F_env."""
        if not np.allclose(self.F_int, self.F_h - self.F_env,
                           rtol=1e-12, atol=1e-12):
            raise ValueError("record violates F_int = F_h - F_env")

    def features(self) -> np.ndarray:
        """Classifier feature channels as an (n, 3) array: v, F_int, F_h."""
        return np.column_stack((self.v, self.F_int, self.F_h))

    def label_onset(self, label: int, channel: str = "subtask_true"):
        """First sample index carrying the given label, or None."""
        idx = np.nonzero(getattr(self, channel) == int(label))[0]
        return int(idx[0]) if idx.size else None


def write_trial(record: TrialRecord, path) -> Path:
    """Write a record to CSV (+ .meta sidecar); returns the CSV path."""
    path = Path(path)
    cols = [np.asarray(getattr(record, name), dtype=np.float64)
            for name in CHANNELS]
    table = np.column_stack(cols)
    buf = io.StringIO()
    buf.write(",".join(CHANNELS) + "\n")
    np.savetxt(buf, table, fmt="%.17g", delimiter=",")
    path.write_text(buf.getvalue())
    meta_lines = [f"{k} = {_fmt_meta(v)}" for k, v in sorted(record.meta.items())]
    path.with_suffix(".meta").write_text("\n".join(meta_lines) + "\n")
    return path


def _fmt_meta(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_meta_value(text: str):
    text = text.strip()
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def read_trial(path) -> TrialRecord:
    """Load a record written by write_trial."""
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != CHANNELS:
            raise ValueError(f"{path}: unexpected channel header {header}")
        table = np.loadtxt(fh, delimiter=",", ndmin=2)
    if table.shape[1] != len(CHANNELS):
        raise ValueError(f"{path}: expected {len(CHANNELS)} columns")
    meta = {}
    meta_path = path.with_suffix(".meta")
    if meta_path.exists():
        for line in meta_path.read_text().splitlines():
            if not line.strip():
                continue
            key, _, val = line.partition("=")
            meta[key.strip()] = _parse_meta_value(val)
    kwargs = {}
    for i, name in enumerate(CHANNELS):
        col = table[:, i]
        if name in LABEL_CHANNELS:
            col = col.astype(np.int64)
        kwargs[name] = col
    return TrialRecord(meta=meta, **kwargs)


def read_corpus(directory) -> list[TrialRecord]:
    """Load every trial CSV in a directory, sorted by filename."""
    directory = Path(directory)
    paths = sorted(directory.glob("trial_*.csv"))
    if not paths:
        raise FileNotFoundError(f"no trial CSV files in {directory}")
    return [read_trial(p) for p in paths]
