"""Monte-Carlo probes of the hidden-output and cell-state variance at initialization.

The single-step probe follows the assumptions behind the variance conditions:
fresh weights for every trial, a standard normal input ``x``, an exact
recurrent estimate ``h_prev = x`` and a cell state drawn at the predicted
stationary variance. Trials run in fixed-size chunks, each with its own child
stream spawned from the master seed, so results do not depend on the order in
which chunks are evaluated.
"""

import json
import math
from dataclasses import asdict, dataclass
from types import SimpleNamespace

import numpy as np

from .cells import PEEPHOLE, ActivationSpec, _step
from .errors import InvalidArgumentError
from .variance import IDENTITY, stationary_cell_variance, validate

CHUNK = 4096
MIN_TRIALS = 1000
PROTOCOL = (
    "constructed probe: fresh weights per trial, x ~ N(0, I), h_prev = x, "
    "c_prev ~ N(0, predicted Var(c))"
)


@dataclass
class ProbeReport:
    mode: str
    trials: int
    n: int
    est_var_h: float
    est_var_c: float
    predicted_var_c: float
    rel_err_h: float
    rel_err_c: float
    se_var_h: float
    linearized: bool
    coupling: str
    condition: str
    condition_satisfied: bool
    trajectory: list = None
    max_drift: float = None
    diverged: bool = False
    protocol: str = PROTOCOL

    def to_dict(self):
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return None
            if isinstance(v, list):
                return [clean(x) for x in v]
            return v

        return {k: clean(v) for k, v in asdict(self).items()}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def probe_activation(cfg, linearized=True):
    """Activation used when probing ``cfg``.

    Linearized mode replaces the logistic gates by ``0.5 + 0.25 x`` and tanh by
    the identity, the regime in which the variance algebra is exact.
    """
    if cfg.gate_mode == IDENTITY:
        gate = "identity"
    else:
        gate = "linearized-sigmoid" if linearized else "logistic-sigmoid"
    return ActivationSpec(gate, "identity" if linearized else "tanh", "identity")


def _check(cfg, n, trials):
    if n is None:
        n = cfg.n
    if n != cfg.n:
        raise InvalidArgumentError(f"config was built for N={cfg.n}, probe asked for N={n}")
    if trials < MIN_TRIALS:
        raise InvalidArgumentError(f"trials must be >= {MIN_TRIALS}, got {trials}")
    try:
        report = validate(cfg)
    except ZeroDivisionError:
        report = None
    predicted = stationary_cell_variance(cfg)
    if not (math.isfinite(predicted) and predicted > 0):
        raise InvalidArgumentError("config has no positive stationary cell variance to start from")
    return n, report, predicted


def _batched_weights(cfg, k, n, rng):
    """Per-trial weight stacks: W (k, n, n), peepholes and biases (k, n)."""
    w = {}
    for gate in "fico":
        w[f"w{gate}"] = rng.normal(0.0, getattr(cfg, f"var_w{gate}"), (k, n, n))
        w[f"u{gate}"] = rng.normal(0.0, getattr(cfg, f"var_u{gate}"), (k, n, n))
        w[f"b{gate}"] = np.zeros((k, n))
    if cfg.kind == PEEPHOLE:
        for gate in "fio":
            w[f"v{gate}"] = rng.normal(0.0, getattr(cfg, f"var_v{gate}"), (k, n))
    return SimpleNamespace(**w)


def _lin(w, x):
    return np.einsum("kmj,kj->km", w, x)


def _decoupled_step(w, n, c_prev, act, peephole, rng):
    """One step where every gate reads its own independent input draw.

    Realizes the derivation's independence between gates; only used for the
    ``coupling="independent"`` diagnostic.
    """
    k = c_prev.shape[0]

    def pre(gate):
        x = rng.standard_normal((k, n))
        return _lin(getattr(w, f"w{gate}"), x) + _lin(getattr(w, f"u{gate}"), x)

    a_f, a_i, a_z, a_o = pre("f"), pre("i"), pre("c"), pre("o")
    if peephole:
        a_f = a_f + w.vf * c_prev
        a_i = a_i + w.vi * c_prev
    f = act.gate_fn(a_f)
    i = act.gate_fn(a_i)
    z = act.modulation_fn(a_z)
    c = f * c_prev + i * z
    if peephole:
        a_o = a_o + w.vo * c
    o = act.gate_fn(a_o)
    return c, o * act.output_fn(c)


def _chunks(trials):
    sizes = [CHUNK] * (trials // CHUNK)
    if trials % CHUNK:
        sizes.append(trials % CHUNK)
    return sizes


def _one_step(cfg, n, w, c_prev, act, coupling, rng):
    peephole = cfg.kind == PEEPHOLE
    if coupling == "shared":
        x = rng.standard_normal(c_prev.shape)
        state = _step(w, x, x, c_prev, act, peephole)
        return state.c, state.h
    return _decoupled_step(w, n, c_prev, act, peephole, rng)


def probe_single_step(cfg, n, trials, rng, linearized=True, coupling="shared"):
    """Pooled Var(h) and Var(c) after one cell step; see the module docstring."""
    if coupling not in ("shared", "independent"):
        raise InvalidArgumentError("coupling must be 'shared' or 'independent'")
    n, report, predicted = _check(cfg, n, trials)
    act = probe_activation(cfg, linearized)
    sizes = _chunks(trials)
    hs, cs = [], []
    with np.errstate(over="ignore", invalid="ignore"):
        for k, child in zip(sizes, rng.spawn(len(sizes))):
            w = _batched_weights(cfg, k, n, child)
            c_prev = child.normal(0.0, predicted, (k, n))
            c, h = _one_step(cfg, n, w, c_prev, act, coupling, child)
            hs.append(h)
            cs.append(c)
    h = np.concatenate(hs)
    c = np.concatenate(cs)
    var_h = float(np.var(h))
    var_c = float(np.var(c))
    # per-trial contributions give a standard error that respects within-trial correlation
    per_trial = np.mean((h - np.mean(h)) ** 2, axis=1)
    se = float(np.std(per_trial) / math.sqrt(trials))
    return ProbeReport(
        mode="single-step",
        trials=trials,
        n=n,
        est_var_h=var_h,
        est_var_c=var_c,
        predicted_var_c=predicted,
        rel_err_h=abs(var_h - 1.0),
        rel_err_c=abs(var_c - predicted) / predicted,
        se_var_h=se,
        linearized=linearized,
        coupling=coupling,
        condition=report.condition if report else "undefined",
        condition_satisfied=bool(report and report.satisfied),
    )


def probe_stationarity(cfg, n, steps, trials, rng, linearized=True, start="stationary"):
    """Track pooled Var(c) over ``steps`` cell updates with weights fixed per trial.

    Every step reads a fresh input ``x`` with ``h_prev = x``. The cell starts at
    the predicted stationary variance (``start="stationary"``) or at zero
    (``start="zero"``, exposing the transient). Trajectory entries are ``inf``
    once any trial has overflowed, and ``diverged`` is set.
    """
    if steps < 2:
        raise InvalidArgumentError("steps must be >= 2")
    if start not in ("stationary", "zero"):
        raise InvalidArgumentError("start must be 'stationary' or 'zero'")
    n, report, predicted = _check(cfg, n, trials)
    act = probe_activation(cfg, linearized)
    peephole = cfg.kind == PEEPHOLE
    sizes = _chunks(trials)
    s1 = np.zeros(steps)
    s2 = np.zeros(steps)
    h1 = h2 = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for k, child in zip(sizes, rng.spawn(len(sizes))):
            w = _batched_weights(cfg, k, n, child)
            if start == "stationary":
                c = child.normal(0.0, predicted, (k, n))
            else:
                c = np.zeros((k, n))
            for t in range(steps):
                x = child.standard_normal((k, n))
                state = _step(w, x, x, c, act, peephole)
                c = state.c
                s1[t] += np.sum(c)
                s2[t] += np.sum(c * c)
            h1 += np.sum(state.h)
            h2 += np.sum(state.h * state.h)
        count = trials * n
        traj = s2 / count - (s1 / count) ** 2
        var_h = h2 / count - (h1 / count) ** 2
    traj = np.where(np.isfinite(traj), traj, math.inf)
    diverged = not np.isfinite(traj).all()
    drift = np.abs(traj - predicted) / predicted
    max_drift = float(np.max(drift))
    var_h = float(var_h) if np.isfinite(var_h) else math.inf
    return ProbeReport(
        mode="stationarity",
        trials=trials,
        n=n,
        est_var_h=var_h,
        est_var_c=float(traj[-1]),
        predicted_var_c=predicted,
        rel_err_h=abs(var_h - 1.0),
        rel_err_c=float(drift[-1]),
        se_var_h=math.nan,
        linearized=linearized,
        coupling="shared",
        condition=report.condition if report else "undefined",
        condition_satisfied=bool(report and report.satisfied),
        trajectory=[float(v) for v in traj],
        max_drift=max_drift,
        diverged=diverged,
    )


def probe_fixed_weights(cfg, n, draws, inputs_per_draw, rng, linearized=True):
    """Var(h) across inputs for each of ``draws`` fixed weight samples.

    Secondary statistic: the main probes pool over weights as well as inputs.
    """
    n, _, predicted = _check(cfg, n, MIN_TRIALS)
    act = probe_activation(cfg, linearized)
    peephole = cfg.kind == PEEPHOLE
    out = []
    with np.errstate(over="ignore", invalid="ignore"):
        for child in rng.spawn(draws):
            w1 = _batched_weights(cfg, 1, n, child)
            w = SimpleNamespace(**{k: np.repeat(v, inputs_per_draw, axis=0) for k, v in vars(w1).items()})
            x = child.standard_normal((inputs_per_draw, n))
            c_prev = child.normal(0.0, predicted, (inputs_per_draw, n))
            state = _step(w, x, x, c_prev, act, peephole)
            out.append(float(np.var(state.h)))
    return out
