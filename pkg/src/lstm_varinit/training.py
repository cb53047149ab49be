"""Loss, backpropagation through time, gradient checking and momentum descent."""

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .cells import BIAS_NAMES, PEEPHOLE, _as_real, _check_finite, _step, activation
from .data import split_indices
from .errors import InvalidArgumentError, NumericOverflowError


def loss_l2(pred, target):
    """Mean squared error over every time step and dimension."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise InvalidArgumentError(f"shape mismatch: {pred.shape} vs {target.shape}")
    if pred.size == 0:
        raise InvalidArgumentError("empty prediction")
    return float(np.mean((pred - target) ** 2))


@dataclass
class BpttWorkspace:
    states: list
    grads: dict
    loss: float


def _as_batch(xs, targets, w):
    xs = _as_real(xs)
    targets = _as_real(targets)
    single = xs.ndim == 2
    if single:
        xs = xs[None]
        targets = targets[None]
    if xs.ndim != 3 or xs.shape[1] < 1:
        raise InvalidArgumentError("xs must be (T, N) or (B, T, N) with T >= 1")
    if xs.shape[-1] != w.n:
        raise InvalidArgumentError(f"xs has {xs.shape[-1]} features, weights expect {w.n}")
    if targets.shape != xs.shape[:2] + (w.m,):
        raise InvalidArgumentError(
            f"targets must have shape {xs.shape[:2] + (w.m,)}, got {targets.shape}"
        )
    return xs, targets, single


def _sum_loss_and_grad(w, xs, targets, act, peephole, need_grad=True):
    """Sum of squared errors over a (B, T, N) group and its gradient."""
    B, T, _ = xs.shape
    m = w.m
    h = np.zeros((B, m))
    c = np.zeros((B, m))
    states = []
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(T):
            s = _step(w, xs[:, t, :], h, c, act, peephole)
            _check_finite(s, timestep=t)
            states.append(s)
            h, c = s.h, s.c
        err = np.stack([s.h for s in states], axis=1) - targets
        sse = np.sum(err * err)
    if not math.isfinite(sse):
        raise NumericOverflowError("loss")
    if not need_grad:
        return sse, None, states

    g = {name: np.zeros_like(p) for name, p in w.params().items()}
    dh_next = np.zeros((B, m))
    dc_next = np.zeros((B, m))
    zeros = np.zeros((B, m))
    for t in range(T - 1, -1, -1):
        s = states[t]
        x = xs[:, t, :]
        h_prev = states[t - 1].h if t else zeros
        c_prev = states[t - 1].c if t else zeros
        dh = 2.0 * err[:, t, :] + dh_next
        sc = act.output_fn(s.c)
        da_o = dh * sc * act.gate_grad(s.o)
        dc = dc_next + dh * s.o * act.output_grad(sc)
        if peephole:
            dc = dc + da_o * w.vo
        da_f = dc * c_prev * act.gate_grad(s.f)
        da_i = dc * s.z * act.gate_grad(s.i)
        da_z = dc * s.i * act.modulation_grad(s.z)
        dc_next = dc * s.f
        if peephole:
            dc_next = dc_next + da_f * w.vf + da_i * w.vi
            g["vf"] += np.sum(da_f * c_prev, axis=0)
            g["vi"] += np.sum(da_i * c_prev, axis=0)
            g["vo"] += np.sum(da_o * s.c, axis=0)
        for gate, da in (("f", da_f), ("i", da_i), ("c", da_z), ("o", da_o)):
            g["w" + gate] += da.T @ x
            g["u" + gate] += da.T @ h_prev
            g["b" + gate] += np.sum(da, axis=0)
        dh_next = da_f @ w.uf + da_i @ w.ui + da_z @ w.uc + da_o @ w.uo
    return sse, g, states


def _resolve(w, act, kind):
    act = activation(act)
    kind = kind or w.kind
    if kind == PEEPHOLE and w.kind != PEEPHOLE:
        raise InvalidArgumentError("peephole cell needs vf, vi and vo")
    return act, kind == PEEPHOLE


def backward(w, xs, targets, act="regression", kind=None):
    """Exact gradients of :func:`loss_l2` (predictions ``h`` vs ``targets``).

    ``xs`` and ``targets`` are (T, N) and (T, M), or batched (B, T, N) and
    (B, T, M). ``states`` keeps the forward pass; for batched input each state
    array has a leading batch axis.
    """
    act, peephole = _resolve(w, act, kind)
    xs, targets, single = _as_batch(xs, targets, w)
    sse, g, states = _sum_loss_and_grad(w, xs, targets, act, peephole)
    count = targets.size
    grads = {k: v / count for k, v in g.items()}
    if single:
        for s in states:
            for name in ("f", "i", "z", "o", "c", "h"):
                setattr(s, name, getattr(s, name)[0])
    return BpttWorkspace(states=states, grads=grads, loss=float(sse / count))


def sequence_loss(w, xs, targets, act="regression", kind=None):
    act, peephole = _resolve(w, act, kind)
    xs, targets, _ = _as_batch(xs, targets, w)
    sse, _, _ = _sum_loss_and_grad(w, xs, targets, act, peephole, need_grad=False)
    return sse / targets.size


@dataclass
class GradcheckResult:
    max_rel_err: float
    worst_param: str
    worst_index: tuple
    analytic: float
    numeric: float


def gradcheck(w, xs, targets, act="regression", kind=None, eps=1e-6, analytic=None,
              abs_floor=1e-10, extended=True):
    """Compare analytic gradients with central differences, entry by entry.

    The error for an entry is ``|a - n| / max(|a|, |n|)``, falling back to the
    absolute error ``|a - n|`` when both magnitudes are below ``abs_floor``.
    With ``extended`` the perturbed losses are evaluated in long double so that
    float64 rounding of the loss (~1e-16 / eps) does not swamp small entries.
    ``analytic`` lets a caller supply (possibly tampered) gradients.
    """
    if not eps > 0:
        raise InvalidArgumentError("eps must be > 0")
    if analytic is None:
        analytic = backward(w, xs, targets, act, kind).grads
    probe = w.copy()
    if extended:
        probe = type(w)(**{k: v.astype(np.longdouble) for k, v in w.params().items()})
        xs = np.asarray(xs, dtype=np.longdouble)
        targets = np.asarray(targets, dtype=np.longdouble)
    worst = GradcheckResult(0.0, "", (), 0.0, 0.0)
    for name, p in probe.params().items():
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + eps
            up = sequence_loss(probe, xs, targets, act, kind)
            p[idx] = orig - eps
            down = sequence_loss(probe, xs, targets, act, kind)
            p[idx] = orig
            num = float((up - down) / (2 * p.dtype.type(eps)))
            a = float(analytic[name][idx])
            scale = max(abs(a), abs(num))
            err = abs(a - num) if scale < abs_floor else abs(a - num) / scale
            if err > worst.max_rel_err or not worst.worst_param:
                worst = GradcheckResult(err, name, idx, a, num)
    return worst


# --- batches of sequences ---------------------------------------------------

def _pairs(batch):
    for _, arr in batch.groups():
        if arr.shape[1] < 2:
            raise InvalidArgumentError("sequences need at least 2 time points for next-step pairs")
        yield arr[:, :-1, :], arr[:, 1:, :]


def batch_loss_and_grad(w, batch, act="regression", kind=None, need_grad=True):
    """MSE of next-step predictions over a (possibly ragged) batch and its gradient.

    Inputs are time points 1..T-1 of each sequence and targets 2..T.
    """
    act, peephole = _resolve(w, act, kind)
    if not len(batch):
        raise InvalidArgumentError("empty batch")
    total = 0.0
    count = 0
    grads = {k: np.zeros_like(v) for k, v in w.params().items()} if need_grad else None
    for xs, ys in _pairs(batch):
        if w.n != w.m or xs.shape[-1] != w.n:
            raise InvalidArgumentError("next-step regression needs M = N = number of features")
        sse, g, _ = _sum_loss_and_grad(w, xs, ys, act, peephole, need_grad)
        total += sse
        count += ys.size
        if need_grad:
            for k in grads:
                grads[k] += g[k]
    if need_grad:
        grads = {k: v / count for k, v in grads.items()}
    return total / count, grads


def evaluate_mse(w, test, act="regression", kind=None):
    """Next-step MSE on ``test`` (standardize it with training statistics first)."""
    if test is None or not len(test):
        raise InvalidArgumentError("empty test set")
    loss, _ = batch_loss_and_grad(w, test, act, kind, need_grad=False)
    return loss


# --- momentum gradient descent ---------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    epochs: int = 100
    batch_fraction: float = 0.85
    seed: int = 0
    freeze_biases: bool = False
    divergence_threshold: float = 1e6

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InvalidArgumentError("learning_rate must be > 0")
        if not 0 <= self.momentum < 1:
            raise InvalidArgumentError("momentum must be in [0, 1)")
        if not self.weight_decay >= 0:
            raise InvalidArgumentError("weight_decay must be >= 0")
        if not 0 < self.batch_fraction <= 1:
            raise InvalidArgumentError("batch_fraction must be in (0, 1]")
        if self.epochs < 0:
            raise InvalidArgumentError("epochs must be >= 0")


@dataclass
class TrainTrace:
    initializer: str = ""
    dataset: str = ""
    seed: int = 0
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    final_train_loss: float = math.nan
    final_test_mse: float = math.nan
    aborted: bool = False
    abort_reason: str = ""

    def to_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["epoch", "train_loss", "val_loss"])
            for e, (tl, vl) in enumerate(zip(self.train_loss, self.val_loss), start=1):
                out.writerow([e, repr(float(tl)), repr(float(vl))])

    def sidecar(self):
        d = asdict(self)
        d.pop("train_loss")
        d.pop("val_loss")
        d["epochs_completed"] = len(self.train_loss)
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in d.items()}

    def write(self, csv_path):
        csv_path = Path(csv_path)
        self.to_csv(csv_path)
        csv_path.with_suffix(".json").write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True) + "\n")


def _check_standardized(batch, tol=0.1):
    allx = np.concatenate(batch.sequences, axis=0)
    mean = allx.mean(axis=0)
    var = allx.var(axis=0)
    if np.any(np.abs(mean) > tol) or np.any(np.abs(var - 1.0) > tol):
        raise InvalidArgumentError(
            "training data must be standardized per feature (mean 0, variance 1 within 0.1)"
        )


def train(w0, train_data, val_data, tc, act="regression", kind=None, test_data=None,
          initializer="", dataset=""):
    """Full-batch momentum gradient descent with L2 weight decay.

    The gradient batch is a fixed ``tc.batch_fraction`` share of ``train_data``
    drawn with ``tc.seed``. When ``val_data`` is None the remaining sequences
    are the validation set. Each epoch records the losses at the current
    weights, then applies ``v <- mu v - lr (grad + wd w)``, ``w <- w + v``
    (no decay on biases). A non-finite or too large loss stops the run and
    marks the trace as aborted; the last finite weights are returned.
    """
    act, _ = _resolve(w0, act, kind)
    kind = kind or w0.kind
    if not len(train_data):
        raise InvalidArgumentError("empty training set")
    _check_standardized(train_data)
    if tc.batch_fraction < 1:
        b_idx, v_idx = split_indices(len(train_data), 1.0 - tc.batch_fraction, tc.seed)
    else:
        b_idx, v_idx = np.arange(len(train_data)), np.arange(0)
    batch = train_data.subset(b_idx)
    if val_data is None:
        val_data = train_data.subset(v_idx)

    w = w0.copy()
    last_good = w0
    velocity = {k: np.zeros_like(v) for k, v in w.params().items()}
    trace = TrainTrace(initializer=initializer, dataset=dataset or train_data.name, seed=tc.seed)

    def abort(reason, epoch):
        trace.aborted = True
        trace.abort_reason = f"epoch {epoch}: {reason}"

    for epoch in range(1, tc.epochs + 1):
        try:
            loss, grads = batch_loss_and_grad(w, batch, act, kind)
        except NumericOverflowError as exc:
            abort(str(exc), epoch)
            break
        if not math.isfinite(loss) or loss > tc.divergence_threshold:
            abort(f"training loss {loss!r} exceeds {tc.divergence_threshold}", epoch)
            break
        trace.train_loss.append(loss)
        trace.val_loss.append(_safe_mse(w, val_data, act, kind))
        last_good = w.copy()
        params = w.params()
        for k, p in params.items():
            step = grads[k]
            if k in BIAS_NAMES:
                if tc.freeze_biases:
                    continue
            else:
                step = step + tc.weight_decay * p
            velocity[k] = tc.momentum * velocity[k] - tc.learning_rate * step
            p += velocity[k]
    if not trace.aborted:
        final = _safe_mse(w, batch, act, kind)
        if math.isfinite(final) and final <= tc.divergence_threshold:
            trace.final_train_loss = final
        else:
            abort(f"training loss {final!r} exceeds {tc.divergence_threshold}", tc.epochs + 1)
    if trace.aborted:
        w = last_good
        trace.final_train_loss = math.inf
    if test_data is not None:
        trace.final_test_mse = _safe_mse(w, test_data, act, kind) if not trace.aborted else math.inf
    return w, trace


def _safe_mse(w, data, act, kind):
    if data is None or not len(data):
        return math.nan
    try:
        return evaluate_mse(w, data, act, kind)
    except NumericOverflowError:
        return math.inf
