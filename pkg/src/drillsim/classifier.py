"""Subtask classifier: a from-scratch fully-connected network.

The model consumes a sliding window of the last 60 samples of
(velocity, interaction force, human force), flattened to a 180-vector
after per-feature z-score normalization, and outputs softmax
probabilities over the three subtasks.  Architecture: five hidden layers
of 75 ReLU units with dropout, softmax output, trained with ADAM on
cross-entropy plus L2 weight penalty.

Training data comes from simulated trials labeled automatically:
Driving starts where the human force first exceeds a small threshold,
Contact at the first penetrating sample.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .subtasks import N_SUBTASKS, Subtask

N_FEATURES = 3
MODEL_FORMAT_VERSION = 1
DRIVING_FORCE_THRESHOLD = 3.0  # N, above sensor noise, below guiding forces


@dataclass
class TrainConfig:
    learn_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    l2: float = 0.001
    dropout: float = 0.1
    epochs: int = 80
    batch_size: int = 128
    val_fraction: float = 0.25
    window_stride: int = 5      # training-set extraction stride (inference uses 1)
    seq_len: int = 60
    hidden_layers: int = 5
    hidden_units: int = 75
    f_threshold: float = DRIVING_FORCE_THRESHOLD
    seed: int = 0

    def config_hash(self) -> str:
        text = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def label_trial(record, f_threshold: float = DRIVING_FORCE_THRESHOLD) -> np.ndarray:
    """Automatic per-sample subtask labels for a simulated trial.

    Idle until the human force first exceeds the threshold, Driving until
    the first penetrating sample, Contact afterwards (monotone 1->2->3).
    """
    fh = np.asarray(record.F_h)
    pen = np.asarray(record.penetration)
    driving = np.nonzero(fh > f_threshold)[0]
    if driving.size == 0:
        raise ValueError("no Driving onset: human force never exceeds threshold")
    contact = np.nonzero(pen > 0.0)[0]
    if contact.size == 0:
        raise ValueError("trial has no Contact phase")
    d_on, c_on = int(driving[0]), int(contact[0])
    if d_on >= c_on:
        raise ValueError("Driving onset not before Contact onset")
    labels = np.full(len(fh), int(Subtask.IDLE), dtype=np.int64)
    labels[d_on:c_on] = int(Subtask.DRIVING)
    labels[c_on:] = int(Subtask.CONTACT)
    return labels


def extract_windows(record, seq_len: int, stride: int = 1) -> np.ndarray:
    """All feature windows of a trial as an (n, seq_len, 3) array.

    Window k holds the seq_len most recent samples ending at sample k,
    earliest first; the region before the trial start is zero-padded.
    """
    feats = record.features()
    padded = np.vstack([np.zeros((seq_len - 1, N_FEATURES)), feats])
    wins = sliding_window_view(padded, seq_len, axis=0)  # (n, 3, seq_len)
    return np.ascontiguousarray(wins[::stride].transpose(0, 2, 1))


class MlpModel:
    """Feed-forward subtask classifier with stored normalization stats."""

    def __init__(self, weights, biases, feature_mean, feature_std,
                 seq_len: int, config_hash: str = ""):
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self.feature_mean = np.asarray(feature_mean, dtype=np.float64)
        self.feature_std = np.asarray(feature_std, dtype=np.float64)
        self.seq_len = int(seq_len)
        self.config_hash = config_hash
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape[1] != b.shape[0]:
                raise ValueError(f"layer {i}: weight/bias shape mismatch")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ValueError(f"layer {i}: input dim mismatch")
        if self.weights[0].shape[0] != self.seq_len * N_FEATURES:
            raise ValueError("input layer does not match seq_len * n_features")
        if self.weights[-1].shape[1] != N_SUBTASKS:
            raise ValueError("output layer must have one unit per subtask")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    def normalize(self, windows: np.ndarray) -> np.ndarray:
        """Z-score (n, seq_len, 3) windows and flatten to (n, dim)."""
        z = (windows - self.feature_mean) / self.feature_std
        return z.reshape(z.shape[0], -1)

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Class probabilities for normalized inputs (dropout disabled)."""
        x = np.atleast_2d(x)
        if x.shape[1] != self.input_dim:
            raise ValueError(f"expected input dim {self.input_dim}, got {x.shape[1]}")
        a = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.maximum(a @ w + b, 0.0)
        logits = a @ self.weights[-1] + self.biases[-1]
        return _softmax(logits)

    def predict_windows(self, windows: np.ndarray) -> np.ndarray:
        """Raw subtask labels (1..3) for (n, seq_len, 3) feature windows."""
        probs = self.forward(self.normalize(windows))
        return np.argmax(probs, axis=1) + 1

    def predict_window(self, window: np.ndarray) -> int:
        """Raw subtask label for a single (seq_len, 3) window."""
        return int(self.predict_windows(window[None, :, :])[0])

    def save(self, path):
        arrays = {f"W{i}": w for i, w in enumerate(self.weights)}
        arrays.update({f"b{i}": b for i, b in enumerate(self.biases)})
        np.savez(path,
                 format_version=np.int64(MODEL_FORMAT_VERSION),
                 n_layers=np.int64(len(self.weights)),
                 feature_mean=self.feature_mean,
                 feature_std=self.feature_std,
                 seq_len=np.int64(self.seq_len),
                 config_hash=np.bytes_(self.config_hash.encode()),
                 **arrays)

    @classmethod
    def load(cls, path) -> "MlpModel":
        with np.load(path) as data:
            version = int(data["format_version"])
            if version != MODEL_FORMAT_VERSION:
                raise ValueError(f"unsupported model format version {version}")
            n = int(data["n_layers"])
            weights = [data[f"W{i}"] for i in range(n)]
            biases = [data[f"b{i}"] for i in range(n)]
            return cls(weights, biases, data["feature_mean"], data["feature_std"],
                       int(data["seq_len"]), bytes(data["config_hash"]).decode())


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_layers(rng: np.random.Generator, dims: list[int]):
    weights = [glorot_uniform(rng, dims[i], dims[i + 1]) for i in range(len(dims) - 1)]
    biases = [np.zeros(dims[i + 1]) for i in range(len(dims) - 1)]
    return weights, biases


def cross_entropy_loss(weights, biases, x, y_idx, l2: float = 0.0,
                       dropout_masks=None) -> float:
    """Mean cross-entropy (+ L2 weight penalty) without gradients."""
    a = x
    for i, (w, b) in enumerate(zip(weights[:-1], biases[:-1])):
        a = np.maximum(a @ w + b, 0.0)
        if dropout_masks is not None:
            a = a * dropout_masks[i]
    probs = _softmax(a @ weights[-1] + biases[-1])
    n = x.shape[0]
    nll = -np.mean(np.log(probs[np.arange(n), y_idx] + 1e-300))
    if l2:
        nll += l2 * sum(float(np.sum(w * w)) for w in weights)
    return float(nll)


def loss_and_gradients(weights, biases, x, y_idx, l2: float = 0.0,
                       dropout_masks=None):
    """Backpropagation through the ReLU stack and softmax cross-entropy.

    y_idx are 0-based class indices.  Returns (loss, dW list, db list).
    The L2 penalty l2 * sum(w^2) contributes 2*l2*w to each weight
    gradient (biases are not penalized).
    """
    n = x.shape[0]
    activations = [x]
    a = x
    for i, (w, b) in enumerate(zip(weights[:-1], biases[:-1])):
        a = np.maximum(a @ w + b, 0.0)
        if dropout_masks is not None:
            a = a * dropout_masks[i]
        activations.append(a)
    logits = a @ weights[-1] + biases[-1]
    probs = _softmax(logits)
    loss = -np.mean(np.log(probs[np.arange(n), y_idx] + 1e-300))
    if l2:
        loss += l2 * sum(float(np.sum(w * w)) for w in weights)

    delta = probs
    delta[np.arange(n), y_idx] -= 1.0
    delta /= n
    d_weights = [None] * len(weights)
    d_biases = [None] * len(biases)
    for i in range(len(weights) - 1, -1, -1):
        d_weights[i] = activations[i].T @ delta
        d_biases[i] = delta.sum(axis=0)
        if l2:
            d_weights[i] += 2.0 * l2 * weights[i]
        if i > 0:
            delta = delta @ weights[i].T
            if dropout_masks is not None:
                delta = delta * dropout_masks[i - 1]
            delta = delta * (activations[i] > 0.0)
    return float(loss), d_weights, d_biases


class _Adam:
    """ADAM updates over a flat list of parameter arrays."""

    def __init__(self, params, lr, beta1, beta2, eps):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        b1t = 1.0 - self.b1 ** self.t
        b2t = 1.0 - self.b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


@dataclass
class TrainReport:
    """Per-epoch history plus the selected operating point."""

    epochs: list = field(default_factory=list)  # (epoch, train_loss, val_loss, val_acc)
    best_epoch: int = -1
    best_val_accuracy: float = 0.0
    confusion: np.ndarray | None = None  # row-normalized %, on the validation split

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,val_loss,val_acc"]
        for row in self.epochs:
            lines.append(f"{row[0]},{row[1]:.6f},{row[2]:.6f},{row[3]:.4f}")
        return "\n".join(lines) + "\n"


def _dataset_from_trials(trials, cfg: TrainConfig):
    xs, ys = [], []
    for rec in trials:
        labels = label_trial(rec, cfg.f_threshold)
        wins = extract_windows(rec, cfg.seq_len, cfg.window_stride)
        xs.append(wins)
        ys.append(labels[::cfg.window_stride])
    return xs, ys


def train(trials, cfg: TrainConfig | None = None):
    """Train the subtask classifier on labeled trials.

    The train/validation split is by whole trials (75/25 by default),
    never by windows, so no trial leaks across the split.  Returns the
    model with the best validation accuracy and the training report.
    Fully reproducible for a fixed cfg.seed.
    """
    cfg = cfg if cfg is not None else TrainConfig()
    if not trials:
        raise ValueError("empty training corpus")
    rng = np.random.default_rng(cfg.seed)
    xs, ys = _dataset_from_trials(trials, cfg)

    order = rng.permutation(len(trials))
    n_val = max(1, int(round(cfg.val_fraction * len(trials))))
    if n_val >= len(trials):
        raise ValueError("validation split leaves no training trials")
    val_idx, train_idx = order[:n_val], order[n_val:]
    for name, idx in (("training", train_idx), ("validation", val_idx)):
        present = np.unique(np.concatenate([ys[i] for i in idx]))
        if len(present) < N_SUBTASKS:
            raise ValueError(f"{name} split is missing subtask classes "
                             f"(has {present.tolist()})")

    x_train3 = np.concatenate([xs[i] for i in train_idx])
    y_train = np.concatenate([ys[i] for i in train_idx]) - 1
    x_val3 = np.concatenate([xs[i] for i in val_idx])
    y_val = np.concatenate([ys[i] for i in val_idx]) - 1

    mean = x_train3.reshape(-1, N_FEATURES).mean(axis=0)
    std = x_train3.reshape(-1, N_FEATURES).std(axis=0)
    std = np.maximum(std, 1e-9)
    x_train = ((x_train3 - mean) / std).reshape(len(x_train3), -1)
    x_val = ((x_val3 - mean) / std).reshape(len(x_val3), -1)
    del x_train3, x_val3

    dims = [cfg.seq_len * N_FEATURES] + [cfg.hidden_units] * cfg.hidden_layers \
        + [N_SUBTASKS]
    weights, biases = init_layers(rng, dims)
    params = [p for pair in zip(weights, biases) for p in pair]
    adam = _Adam(params, cfg.learn_rate, cfg.beta1, cfg.beta2, cfg.eps)

    n = len(x_train)
    keep = 1.0 - cfg.dropout
    report = TrainReport()
    best = None
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n)
        losses = []
        for lo in range(0, n, cfg.batch_size):
            sel = perm[lo:lo + cfg.batch_size]
            xb, yb = x_train[sel], y_train[sel]
            if cfg.dropout > 0.0:
                masks = [(rng.random((len(sel), d)) < keep) / keep
                         for d in dims[1:-1]]
            else:
                masks = None
            loss, dw, db = loss_and_gradients(weights, biases, xb, yb,
                                              cfg.l2, masks)
            grads = [g for pair in zip(dw, db) for g in pair]
            adam.step(params, grads)
            losses.append(loss)
        val_probs = _forward_batched(weights, biases, x_val)
        val_loss = float(-np.mean(np.log(
            val_probs[np.arange(len(y_val)), y_val] + 1e-300)))
        val_acc = float(np.mean(np.argmax(val_probs, axis=1) == y_val)) * 100.0
        report.epochs.append((epoch, float(np.mean(losses)), val_loss, val_acc))
        if best is None or val_acc > report.best_val_accuracy:
            report.best_val_accuracy = val_acc
            report.best_epoch = epoch
            best = ([w.copy() for w in weights], [b.copy() for b in biases])

    model = MlpModel(best[0], best[1], mean, std, cfg.seq_len, cfg.config_hash())
    val_pred = np.argmax(_forward_batched(best[0], best[1], x_val), axis=1)
    report.confusion = _confusion_percent(y_val + 1, val_pred + 1)
    return model, report


def _forward_batched(weights, biases, x, batch: int = 8192) -> np.ndarray:
    out = np.empty((len(x), N_SUBTASKS))
    for lo in range(0, len(x), batch):
        a = x[lo:lo + batch]
        for w, b in zip(weights[:-1], biases[:-1]):
            a = np.maximum(a @ w + b, 0.0)
        out[lo:lo + batch] = _softmax(a @ weights[-1] + biases[-1])
    return out


def _confusion_percent(y_true, y_pred) -> np.ndarray:
    counts = np.zeros((N_SUBTASKS, N_SUBTASKS))
    for c_true in range(1, N_SUBTASKS + 1):
        mask = y_true == c_true
        for c_pred in range(1, N_SUBTASKS + 1):
            counts[c_true - 1, c_pred - 1] = np.sum(y_pred[mask] == c_pred)
    rows = counts.sum(axis=1, keepdims=True)
    rows[rows == 0] = 1.0
    return counts / rows * 100.0


@dataclass
class EvalReport:
    accuracy: float            # percent
    weighted_f1: float         # percent
    confusion: np.ndarray      # (3,3), rows normalized to 100%
    support: np.ndarray        # true samples per class
    n_windows: int

    def __str__(self):
        lines = [f"accuracy {self.accuracy:.2f}%  weighted F1 {self.weighted_f1:.2f}%",
                 "confusion (row %, actual x predicted):"]
        for i, row in enumerate(self.confusion):
            lines.append(f"  {Subtask(i + 1).name:8s} "
                         + " ".join(f"{v:6.2f}" for v in row))
        return "\n".join(lines)


def evaluate(model: MlpModel, trials, stride: int = 1,
             f_threshold: float = DRIVING_FORCE_THRESHOLD) -> EvalReport:
    """Per-sample classification metrics over a set of labeled trials."""
    counts = np.zeros((N_SUBTASKS, N_SUBTASKS))
    for rec in trials:
        labels = label_trial(rec, f_threshold)[::stride]
        pred = model.predict_windows(extract_windows(rec, model.seq_len, stride))
        for c_true in range(1, N_SUBTASKS + 1):
            mask = labels == c_true
            for c_pred in range(1, N_SUBTASKS + 1):
                counts[c_true - 1, c_pred - 1] += np.sum(pred[mask] == c_pred)
    support = counts.sum(axis=1)
    total = counts.sum()
    accuracy = float(np.trace(counts) / total) * 100.0
    f1s = np.zeros(N_SUBTASKS)
    for c in range(N_SUBTASKS):
        tp = counts[c, c]
        prec_den = counts[:, c].sum()
        rec_den = support[c]
        prec = tp / prec_den if prec_den else 0.0
        rec = tp / rec_den if rec_den else 0.0
        f1s[c] = 2 * prec * rec / (prec + rec) if (prec + rec) else 0.0
    weighted_f1 = float(np.sum(f1s * support) / total) * 100.0
    rows = support.copy()
    rows[rows == 0] = 1.0
    confusion = counts / rows[:, None] * 100.0
    return EvalReport(accuracy, weighted_f1, confusion, support, int(total))
