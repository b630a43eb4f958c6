"""Stabilization of raw classifier predictions.

Two stages turn the noisy per-step predictions into the processed label
that is allowed to drive adaptation:

* a majority-vote buffer over the last N raw labels, which suppresses
  momentary misclassifications, and
* a minimum-dwell latch, which forbids the processed label from changing
  again within a fixed hold time and thereby rides out longer confusion
  around subtask transitions.

The control loop reads only the latest processed label (single writer,
single reader), so the classifier side may run at its own rate.
"""

import numpy as np

from .subtasks import N_SUBTASKS, Subtask

VOTING_STEPS = 30      # 60 ms at 500 Hz
MIN_DWELL = 1.0        # s


class VotingBuffer:
    """Moving majority vote over the raw label stream.

    Ties are broken toward the previous verdict; a tie between labels that
    does not include the previous verdict resolves to the smallest label.
    The window is pre-filled with Idle, matching a trial that starts at
    rest.
    """

    def __init__(self, n_steps: int = VOTING_STEPS, fill: Subtask = Subtask.IDLE):
        if n_steps < 1:
            raise ValueError("voting buffer needs at least one slot")
        self.n_steps = int(n_steps)
        self._window = np.full(self.n_steps, int(fill), dtype=np.int64)
        self._counts = np.zeros(N_SUBTASKS + 1, dtype=np.int64)
        self._counts[int(fill)] = self.n_steps
        self._pos = 0
        self.verdict = Subtask(fill)

    def push(self, raw: Subtask) -> Subtask:
        raw = int(raw)
        old = self._window[self._pos]
        self._window[self._pos] = raw
        self._pos = (self._pos + 1) % self.n_steps
        self._counts[old] -= 1
        self._counts[raw] += 1
        best = int(np.max(self._counts[1:]))
        if self._counts[int(self.verdict)] < best:
            for label in range(1, N_SUBTASKS + 1):
                if self._counts[label] == best:
                    self.verdict = Subtask(label)
                    break
        return self.verdict


class DwellLatch:
    """Minimum-dwell filter over voting verdicts.

    The held label may only change once at least `min_dwell` seconds have
    passed since its adoption.  The dwell clock restarts only on an actual
    change, not when the same label is re-confirmed.
    """

    def __init__(self, min_dwell: float = MIN_DWELL,
                 initial: Subtask = Subtask.IDLE, t0: float = 0.0):
        if min_dwell <= 0.0:
            raise ValueError("minimum dwell must be > 0")
        self.min_dwell = float(min_dwell)
        self.current = Subtask(initial)
        self.label_since = float(t0)
        self._t_last = float(t0)

    def update(self, verdict: Subtask, t: float) -> Subtask:
        if t < self._t_last:
            raise ValueError(f"time went backwards: {t} < {self._t_last}")
        self._t_last = t
        verdict = Subtask(verdict)
        if verdict != self.current and (t - self.label_since) >= self.min_dwell:
            self.current = verdict
            self.label_since = t
        return self.current


class SubtaskPipeline:
    """Voting buffer followed by the dwell latch."""

    def __init__(self, n_vote: int = VOTING_STEPS, min_dwell: float = MIN_DWELL,
                 t0: float = 0.0):
        self.voter = VotingBuffer(n_vote)
        self.latch = DwellLatch(min_dwell, t0=t0)

    def step(self, raw: Subtask, t: float) -> tuple[Subtask, Subtask]:
        voted = self.voter.push(raw)
        processed = self.latch.update(voted, t)
        return voted, processed


def process_stream(raw: np.ndarray, sample_period: float,
                   n_vote: int = VOTING_STEPS,
                   min_dwell: float = MIN_DWELL) -> tuple[np.ndarray, np.ndarray]:
    """Run a whole raw label stream through both buffers (offline helper)."""
    from . import kernels

    raw = np.asarray(raw, dtype=np.int64)
    dwell_steps = int(round(min_dwell / sample_period))
    return kernels.label_pipeline(raw, int(n_vote), dwell_steps, int(Subtask.IDLE))
