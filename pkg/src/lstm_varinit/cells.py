"""Forward dynamics of traditional and peephole LSTM cells.

All step functions accept a single vector ``x`` of shape (N,) or a batch of
shape (B, N); hidden and cell states follow the same leading shape.
"""

from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import InvalidArgumentError, NumericOverflowError

TRADITIONAL = "traditional"
PEEPHOLE = "peephole"
KINDS = (TRADITIONAL, PEEPHOLE)

GATE_FUNCS = ("logistic-sigmoid", "linearized-sigmoid", "identity")
SQUASH_FUNCS = ("tanh", "identity")


def logistic(x):
    # exp of a non-positive argument only, so no overflow warnings
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def linearized_sigmoid(x):
    return 0.5 + 0.25 * x


def _apply(name, x):
    if name == "identity":
        return x
    if name == "tanh":
        return np.tanh(x)
    if name == "logistic-sigmoid":
        return logistic(x)
    if name == "linearized-sigmoid":
        return linearized_sigmoid(x)
    raise InvalidArgumentError(f"unknown activation {name!r}")


def _grad_from_output(name, y):
    """Derivative of the activation expressed through its output ``y``."""
    if name == "identity":
        return np.ones_like(y)
    if name == "tanh":
        return 1.0 - y * y
    if name == "logistic-sigmoid":
        return y * (1.0 - y)
    if name == "linearized-sigmoid":
        return np.full_like(y, 0.25)
    raise InvalidArgumentError(f"unknown activation {name!r}")


@dataclass(frozen=True)
class ActivationSpec:
    gate: str = "logistic-sigmoid"
    modulation: str = "tanh"
    output: str = "identity"

    def __post_init__(self):
        if self.gate not in GATE_FUNCS:
            raise InvalidArgumentError(f"gate activation must be one of {GATE_FUNCS}")
        if self.modulation not in SQUASH_FUNCS:
            raise InvalidArgumentError(f"modulation must be one of {SQUASH_FUNCS}")
        if self.output not in SQUASH_FUNCS:
            raise InvalidArgumentError(f"output activation must be one of {SQUASH_FUNCS}")

    def gate_fn(self, x):
        return _apply(self.gate, x)

    def modulation_fn(self, x):
        return _apply(self.modulation, x)

    def output_fn(self, x):
        return _apply(self.output, x)

    def gate_grad(self, y):
        return _grad_from_output(self.gate, y)

    def modulation_grad(self, y):
        return _grad_from_output(self.modulation, y)

    def output_grad(self, y):
        return _grad_from_output(self.output, y)


# Named presets used by the CLI and the benchmark files.
ACTIVATIONS = {
    "identity": ActivationSpec("identity", "identity", "identity"),
    "linearized": ActivationSpec("linearized-sigmoid", "identity", "identity"),
    # logistic gates, tanh modulation, identity cell output: the regression setup
    "regression": ActivationSpec("logistic-sigmoid", "tanh", "identity"),
    "classic": ActivationSpec("logistic-sigmoid", "tanh", "tanh"),
}


def activation(name_or_spec):
    if isinstance(name_or_spec, ActivationSpec):
        return name_or_spec
    try:
        return ACTIVATIONS[name_or_spec]
    except KeyError:
        raise InvalidArgumentError(
            f"unknown activation preset {name_or_spec!r}; choose from {sorted(ACTIVATIONS)}"
        ) from None


def _as_real(v):
    """float64 array, except that extended-precision input is kept as is."""
    a = np.asarray(v)
    return a if a.dtype == np.longdouble else a.astype(np.float64)


MATRIX_NAMES = ("wf", "wi", "wc", "wo", "uf", "ui", "uc", "uo")
BIAS_NAMES = ("bf", "bi", "bc", "bo")
PEEPHOLE_NAMES = ("vf", "vi", "vo")


@dataclass
class LstmWeights:
    wf: np.ndarray
    wi: np.ndarray
    wc: np.ndarray
    wo: np.ndarray
    uf: np.ndarray
    ui: np.ndarray
    uc: np.ndarray
    uo: np.ndarray
    bf: np.ndarray
    bi: np.ndarray
    bc: np.ndarray
    bo: np.ndarray
    vf: np.ndarray = None
    vi: np.ndarray = None
    vo: np.ndarray = None

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None:
                setattr(self, f.name, _as_real(v))
        m, n = self.wf.shape
        for name in ("wf", "wi", "wc", "wo"):
            if getattr(self, name).shape != (m, n):
                raise InvalidArgumentError(f"{name} must be {m}x{n}")
        for name in ("uf", "ui", "uc", "uo"):
            if getattr(self, name).shape != (m, m):
                raise InvalidArgumentError(f"{name} must be {m}x{m}")
        for name in BIAS_NAMES:
            if getattr(self, name).shape != (m,):
                raise InvalidArgumentError(f"{name} must have length {m}")
        present = [getattr(self, name) is not None for name in PEEPHOLE_NAMES]
        if any(present) and not all(present):
            raise InvalidArgumentError("peephole vectors vf, vi, vo must be given together")
        if all(present):
            for name in PEEPHOLE_NAMES:
                if getattr(self, name).shape != (m,):
                    raise InvalidArgumentError(f"{name} must have length {m}")

    @property
    def m(self):
        return self.wf.shape[0]

    @property
    def n(self):
        return self.wf.shape[1]

    @property
    def kind(self):
        return PEEPHOLE if self.vf is not None else TRADITIONAL

    @classmethod
    def zeros(cls, m, n, kind=TRADITIONAL):
        if kind not in KINDS:
            raise InvalidArgumentError(f"kind must be one of {KINDS}")
        arrays = {k: np.zeros((m, n)) for k in ("wf", "wi", "wc", "wo")}
        arrays.update({k: np.zeros((m, m)) for k in ("uf", "ui", "uc", "uo")})
        arrays.update({k: np.zeros(m) for k in BIAS_NAMES})
        if kind == PEEPHOLE:
            arrays.update({k: np.zeros(m) for k in PEEPHOLE_NAMES})
        return cls(**arrays)

    def param_names(self):
        names = MATRIX_NAMES + BIAS_NAMES
        if self.kind == PEEPHOLE:
            names += PEEPHOLE_NAMES
        return names

    def params(self):
        return {name: getattr(self, name) for name in self.param_names()}

    def copy(self):
        return replace(self, **{k: v.copy() for k, v in self.params().items()})

    def without_peepholes(self):
        return replace(self, vf=None, vi=None, vo=None)


@dataclass
class StepState:
    f: np.ndarray
    i: np.ndarray
    z: np.ndarray
    o: np.ndarray
    c: np.ndarray
    h: np.ndarray


_GATE_ORDER = ("f", "i", "z", "c", "o", "h")


def _check_finite(state, timestep=None):
    if np.isfinite(state.c).all() and np.isfinite(state.h).all():
        return
    for name in _GATE_ORDER:
        if not np.isfinite(getattr(state, name)).all():
            raise NumericOverflowError(name, timestep=timestep)


def _lin(x, a):
    if a.ndim == 2:
        return x @ a.T
    # a stack of per-sample matrices, (B, M, K) applied to (B, K)
    return np.einsum("...mk,...k->...m", a, x)


def _step(w, x, h_prev, c_prev, act, peephole):
    a_f = _lin(x, w.wf) + _lin(h_prev, w.uf)
    a_i = _lin(x, w.wi) + _lin(h_prev, w.ui)
    if peephole:
        a_f = a_f + w.vf * c_prev
        a_i = a_i + w.vi * c_prev
    f = act.gate_fn(a_f + w.bf)
    i = act.gate_fn(a_i + w.bi)
    z = act.modulation_fn(_lin(x, w.wc) + _lin(h_prev, w.uc) + w.bc)
    c = f * c_prev + i * z
    a_o = _lin(x, w.wo) + _lin(h_prev, w.uo)
    if peephole:
        # output gate peeks at the updated cell state
        a_o = a_o + w.vo * c
    o = act.gate_fn(a_o + w.bo)
    h = o * act.output_fn(c)
    return StepState(f, i, z, o, c, h)


def _check_step_shapes(w, x, h_prev, c_prev):
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    if x.shape[-1] != w.n:
        raise InvalidArgumentError(f"x has {x.shape[-1]} features, weights expect {w.n}")
    lead = x.shape[:-1]
    if h_prev.shape != lead + (w.m,) or c_prev.shape != lead + (w.m,):
        raise InvalidArgumentError(
            f"h_prev/c_prev must have shape {lead + (w.m,)}, got {h_prev.shape} and {c_prev.shape}"
        )
    return x, h_prev, c_prev


def step_traditional(w, x, h_prev, c_prev, act=ACTIVATIONS["regression"]):
    act = activation(act)
    x, h_prev, c_prev = _check_step_shapes(w, x, h_prev, c_prev)
    with np.errstate(over="ignore", invalid="ignore"):
        state = _step(w, x, h_prev, c_prev, act, peephole=False)
    _check_finite(state)
    return state


def step_peephole(w, x, h_prev, c_prev, act=ACTIVATIONS["regression"]):
    act = activation(act)
    if w.kind != PEEPHOLE:
        raise InvalidArgumentError("peephole step needs vf, vi and vo")
    x, h_prev, c_prev = _check_step_shapes(w, x, h_prev, c_prev)
    with np.errstate(over="ignore", invalid="ignore"):
        state = _step(w, x, h_prev, c_prev, act, peephole=True)
    _check_finite(state)
    return state


def unroll(w, xs, act=ACTIVATIONS["regression"], kind=None):
    """Run the cell over a sequence starting from zero hidden and cell state.

    ``xs`` is (T, N) for one sequence or (B, T, N) for a batch of equal-length
    sequences. Returns one StepState per time step; ``states[t].h`` is the
    prediction of ``xs[..., t + 1, :]``.
    """
    act = activation(act)
    kind = kind or w.kind
    if kind not in KINDS:
        raise InvalidArgumentError(f"kind must be one of {KINDS}")
    peephole = kind == PEEPHOLE
    if peephole and w.kind != PEEPHOLE:
        raise InvalidArgumentError("peephole unroll needs vf, vi and vo")
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim not in (2, 3):
        raise InvalidArgumentError("xs must be (T, N) or (B, T, N)")
    time_axis = xs.ndim - 2
    T = xs.shape[time_axis]
    if T < 1:
        raise InvalidArgumentError("empty sequence")
    if xs.shape[-1] != w.n:
        raise InvalidArgumentError(f"xs has {xs.shape[-1]} features, weights expect {w.n}")
    lead = xs.shape[:-2]
    h = np.zeros(lead + (w.m,))
    c = np.zeros(lead + (w.m,))
    states = []
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(T):
            x = xs[:, t, :] if xs.ndim == 3 else xs[t]
            state = _step(w, x, h, c, act, peephole)
            _check_finite(state, timestep=t)
            states.append(state)
            h, c = state.h, state.c
    return states
