"""Variance-preserving initialization for LSTM weights.

A :class:`VarianceConfig` holds one variance per weight matrix. The four
validators check the closed-form conditions under which, at initialization,
the cell output keeps the variance of a standardized input (``Var(h) = 1``):

======================  ==========================  =====================
cell kind               gate activation              range clause
======================  ==========================  =====================
traditional             identity / tanh              0 < s_f < 1/N
peephole                identity / tanh              0 < v_i s_c + s_f < 1/N
traditional             logistic (linearized)        0 < s_f < 12/N
peephole                logistic (linearized)        0 < v_i s_c + s_f < 12/N
======================  ==========================  =====================

where ``s_k = Var(w_k) + Var(u_k)``. Each condition also has an equality
clause, checked to an absolute tolerance.
"""

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction

import numpy as np

from .cells import PEEPHOLE, TRADITIONAL, LstmWeights
from .core import orthogonalize
from .errors import ConditionViolationError, InvalidArgumentError

IDENTITY = "identity"
SIGMOID = "sigmoid-linearized"
GATE_MODES = (IDENTITY, SIGMOID)
DEFAULT_TOL = 1e-9

_WU_FIELDS = ("var_wf", "var_uf", "var_wi", "var_ui", "var_wc", "var_uc", "var_wo", "var_uo")
_V_FIELDS = ("var_vf", "var_vi", "var_vo")


@dataclass(frozen=True)
class VarianceConfig:
    var_wf: float
    var_uf: float
    var_wi: float
    var_ui: float
    var_wc: float
    var_uc: float
    var_wo: float
    var_uo: float
    n: int
    kind: str = PEEPHOLE
    gate_mode: str = SIGMOID
    var_vf: float = None
    var_vi: float = None
    var_vo: float = None

    def __post_init__(self):
        if self.kind not in (TRADITIONAL, PEEPHOLE):
            raise InvalidArgumentError(f"kind must be 'traditional' or 'peephole', got {self.kind!r}")
        if self.gate_mode not in GATE_MODES:
            raise InvalidArgumentError(f"gate_mode must be one of {GATE_MODES}, got {self.gate_mode!r}")
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise InvalidArgumentError(f"n must be an integer >= 1, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        names = _WU_FIELDS + (_V_FIELDS if self.kind == PEEPHOLE else ())
        for name in names:
            value = getattr(self, name)
            if value is None:
                raise InvalidArgumentError(f"{name} is required for a {self.kind} config")
            value = float(value)
            if not math.isfinite(value) or value < 0:
                raise InvalidArgumentError(f"{name} must be a finite variance >= 0, got {value}")
            object.__setattr__(self, name, value)
        if self.kind == TRADITIONAL:
            for name in _V_FIELDS:
                if getattr(self, name) is not None:
                    raise InvalidArgumentError(f"{name} is only allowed for peephole configs")

    # per-gate variance sums s_k = Var(w_k) + Var(u_k)
    @property
    def s_f(self):
        return self.var_wf + self.var_uf

    @property
    def s_i(self):
        return self.var_wi + self.var_ui

    @property
    def s_c(self):
        return self.var_wc + self.var_uc

    @property
    def s_o(self):
        return self.var_wo + self.var_uo

    def with_n(self, n):
        """Same config re-targeted at input size ``n`` (all W/U variances scale as 1/n)."""
        scale = self.n / n
        return replace(self, n=n, **{k: getattr(self, k) * scale for k in _WU_FIELDS})

    def to_dict(self):
        d = asdict(self)
        if self.kind == TRADITIONAL:
            for name in _V_FIELDS:
                d.pop(name)
        return d

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise InvalidArgumentError("variance config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise InvalidArgumentError(f"unknown keys in variance config: {unknown}")
        missing = [k for k in _WU_FIELDS + ("n",) if k not in d]
        if missing:
            raise InvalidArgumentError(f"missing keys in variance config: {missing}")
        return cls(**d)

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidArgumentError(f"malformed JSON: {exc}") from None
        return cls.from_dict(d)


@dataclass(frozen=True)
class QuadCoeffs:
    """Coefficients of ``b0 + b1 v + b2 v**2 = 0`` in the cell variance ``v``."""

    b0: float
    b1: float
    b2: float

    @property
    def delta(self):
        return self.b1 * self.b1 - 4.0 * self.b2 * self.b0


@dataclass(frozen=True)
class ConditionReport:
    condition: str
    satisfied: bool
    range_ok: bool
    equality_residual: float
    tolerance: float
    delta2: float = None
    violations: tuple = ()
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _require(cfg, kind, mode):
    if cfg.kind != kind or cfg.gate_mode != mode:
        raise InvalidArgumentError(
            f"config is {cfg.kind}/{cfg.gate_mode}, this check needs {kind}/{mode}"
        )


def _report(condition, range_value, bound, lhs, rhs, tol, delta2=None, extra=None):
    if tol < 0:
        raise InvalidArgumentError("tolerance must be >= 0")
    range_ok = 0.0 < range_value < bound
    residual = abs(lhs - rhs)
    violations = []
    if not range_ok:
        violations.append("range")
    if not residual <= tol:
        violations.append("equality")
    details = {"range_value": range_value, "range_bound": bound, "lhs": lhs, "rhs": rhs}
    details.update(extra or {})
    return ConditionReport(
        condition=condition,
        satisfied=not violations,
        range_ok=range_ok,
        equality_residual=residual,
        tolerance=tol,
        delta2=delta2,
        violations=tuple(violations),
        details=details,
    )


def validate_traditional_identity(cfg, tol=DEFAULT_TOL):
    _require(cfg, TRADITIONAL, IDENTITY)
    N = cfg.n
    lhs = 1.0 - N * cfg.s_f
    rhs = (N * cfg.s_i) * (N * cfg.s_c) * (N * cfg.s_o)
    return _report("traditional-identity", cfg.s_f, 1.0 / N, lhs, rhs, tol)


def validate_traditional_sigmoid(cfg, tol=DEFAULT_TOL):
    _require(cfg, TRADITIONAL, SIGMOID)
    N = cfg.n
    lhs = (12.0 - N * cfg.s_f) / (N * cfg.s_i + 4.0)
    rhs = N * N * cfg.s_o * cfg.s_c / 16.0
    return _report("traditional-sigmoid", cfg.s_f, 12.0 / N, lhs, rhs, tol)


def _peephole_report(cfg, tol, condition, bound, gain):
    if cfg.var_vf == 0:
        raise ZeroDivisionError("var_vf = 0: the peephole condition divides by Var(v_f)")
    N = cfg.n
    out = output_quadratic(cfg)
    cell = cell_quadratic(cfg)
    range_value = cfg.var_vi * cfg.s_c + cfg.s_f
    # 4 * b22 * b02 is the radicand on the left in both gate modes
    lhs = (cfg.var_vo / cfg.var_vf) * math.sqrt(4.0 * cell.b2 * cell.b0)
    Ns_o = N * cfg.s_o
    rhs = math.sqrt(Ns_o * Ns_o + gain * cfg.var_vo) - Ns_o
    extra = {
        "beta01": out.b0, "beta11": out.b1, "beta21": out.b2, "delta1": out.delta,
        "beta02": cell.b0, "beta12": cell.b1, "beta22": cell.b2, "delta2": cell.delta,
    }
    return _report(condition, range_value, bound, lhs, rhs, tol, delta2=cell.delta, extra=extra)


def validate_peephole_identity(cfg, tol=DEFAULT_TOL):
    _require(cfg, PEEPHOLE, IDENTITY)
    return _peephole_report(cfg, tol, "peephole-identity", 1.0 / cfg.n, 4.0)


def validate_peephole_sigmoid(cfg, tol=DEFAULT_TOL):
    _require(cfg, PEEPHOLE, SIGMOID)
    return _peephole_report(cfg, tol, "peephole-sigmoid", 12.0 / cfg.n, 64.0)


_VALIDATORS = {
    (TRADITIONAL, IDENTITY): validate_traditional_identity,
    (TRADITIONAL, SIGMOID): validate_traditional_sigmoid,
    (PEEPHOLE, IDENTITY): validate_peephole_identity,
    (PEEPHOLE, SIGMOID): validate_peephole_sigmoid,
}


def validate(cfg, tol=DEFAULT_TOL):
    """Dispatch to the validator matching the config's cell kind and gate mode."""
    return _VALIDATORS[(cfg.kind, cfg.gate_mode)](cfg, tol)


def output_quadratic(cfg):
    """Quadratic from ``Var(h) = Var(o) Var(c) = 1`` (output gate and hidden output)."""
    if cfg.kind != PEEPHOLE:
        raise InvalidArgumentError("the output-gate quadratic is defined for peephole cells")
    b0 = -1.0 if cfg.gate_mode == IDENTITY else -16.0
    return QuadCoeffs(b0=b0, b1=cfg.n * cfg.s_o, b2=cfg.var_vo)


def cell_quadratic(cfg):
    """Quadratic from the stationarity ``Var(c_t) = Var(c_{t-1})`` of the cell update."""
    if cfg.kind != PEEPHOLE:
        raise InvalidArgumentError("the cell-state quadratic is defined for peephole cells")
    N = cfg.n
    if cfg.gate_mode == IDENTITY:
        b0 = N * N * cfg.s_i * cfg.s_c
        b1 = N * cfg.var_vi * cfg.s_c + N * cfg.s_f - 1.0
    else:
        b0 = N * cfg.s_c * (N * cfg.s_i + 4.0)
        b1 = N * cfg.var_vi * cfg.s_c + N * cfg.s_f - 12.0
    return QuadCoeffs(b0=b0, b1=b1, b2=cfg.var_vf)


def cell_variance_root1(cfg):
    """Positive root of the output-gate quadratic.

    Written as ``-2 b0 / (b1 + sqrt(delta))``, algebraically equal to
    ``(-b1 + sqrt(delta)) / (2 b2)`` but free of cancellation when b1 is large.
    """
    if cfg.kind != PEEPHOLE:
        raise InvalidArgumentError("cell_variance_root1 needs a peephole config")
    if cfg.var_vo <= 0:
        raise InvalidArgumentError("var_vo = 0 degenerates the quadratic")
    q = output_quadratic(cfg)
    return -2.0 * q.b0 / (q.b1 + math.sqrt(q.delta))


def cell_variance_root2(cfg):
    """Repeated root ``-b1 / (2 b2)`` of the cell-state quadratic.

    Returns ``(root, delta2)``; the root is only a true double root when
    ``delta2 == 0``, which callers can check.
    """
    if cfg.kind != PEEPHOLE:
        raise InvalidArgumentError("cell_variance_root2 needs a peephole config")
    if cfg.var_vf <= 0:
        raise InvalidArgumentError("var_vf = 0 degenerates the quadratic")
    q = cell_quadratic(cfg)
    if q.b1 >= 0:
        raise ConditionViolationError(
            f"beta12 = {q.b1} >= 0: no positive repeated root for the cell variance"
        )
    return -q.b1 / (2.0 * q.b2), q.delta


def stationary_cell_variance(cfg):
    """Predicted stationary Var(c) for a config, or ``inf`` if none exists.

    Peephole configs use the output-gate root; traditional configs solve the
    linear stationarity relation of the cell update directly.
    """
    if cfg.kind == PEEPHOLE:
        return cell_variance_root1(cfg)
    N = cfg.n
    if cfg.gate_mode == IDENTITY:
        num = (N * cfg.s_i) * (N * cfg.s_c)
        den = 1.0 - N * cfg.s_f
    else:
        num = (N * cfg.s_i / 16.0 + 0.25) * (N * cfg.s_c)
        den = 0.75 - N * cfg.s_f / 16.0
    return num / den if den > 0 else math.inf


def solve_var_vo(cfg):
    """Return ``cfg`` with ``var_vo`` chosen so the peephole equality holds exactly.

    The equality is equivalent to the output-gate root being ``sqrt(b02/b22)``;
    substituting that root into the output-gate quadratic fixes ``var_vo``.
    """
    if cfg.kind != PEEPHOLE:
        raise InvalidArgumentError("solve_var_vo needs a peephole config")
    if cfg.var_vf <= 0:
        raise InvalidArgumentError("var_vf must be > 0")
    cell = cell_quadratic(cfg)
    r = math.sqrt(cell.b0 / cell.b2)
    b0 = -1.0 if cfg.gate_mode == IDENTITY else -16.0
    var_vo = (-b0 - cfg.n * cfg.s_o * r) / (r * r)
    if not var_vo > 0:
        raise ConditionViolationError("no positive var_vo satisfies the equality for this config")
    return replace(cfg, var_vo=var_vo)


# Catalog rows as multiples of 1/N for the W/U entries (peephole entries unscaled).
_CATALOG = {
    1: dict(var_vf=1, var_vi=1, var_vo=1, var_wf=1, var_uf=1, var_wi=2, var_ui=2,
            var_wo=3, var_uo=3, var_wc=Fraction(1, 4), var_uc=Fraction(1, 4)),
    2: dict(var_vf=Fraction(1, 2), var_vi=Fraction(1, 2), var_vo=Fraction(1, 2), var_wf=1,
            var_uf=1, var_wi=2, var_ui=2, var_wo=1, var_uo=1,
            var_wc=Fraction(1, 2), var_uc=Fraction(1, 2)),
    3: dict(var_vf=1, var_vi=1, var_vo=1, var_wf=Fraction(3, 4), var_uf=Fraction(1, 4),
            var_wi=3, var_ui=1, var_wo=4, var_uo=2, var_wc=Fraction(1, 4), var_uc=Fraction(1, 4)),
    4: dict(var_vf=1, var_vi=1, var_vo=1, var_wf=Fraction(1, 4), var_uf=Fraction(3, 4),
            var_wi=1, var_ui=3, var_wo=2, var_uo=4, var_wc=Fraction(1, 4), var_uc=Fraction(1, 4)),
}

PROPOSED = tuple(f"proposed-{k}" for k in sorted(_CATALOG))


def table1_config(index, n):
    """Catalogued peephole/logistic-gate configuration ``index`` (1-4) at input size ``n``."""
    if index not in _CATALOG:
        raise InvalidArgumentError(f"catalog index must be 1..4, got {index!r}")
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    row = _CATALOG[index]
    values = {}
    for name, coef in row.items():
        scaled = Fraction(coef) / n if name in _WU_FIELDS else Fraction(coef)
        values[name] = float(scaled)
    return VarianceConfig(n=n, kind=PEEPHOLE, gate_mode=SIGMOID, **values)


def baseline_profile(n, kind=PEEPHOLE, gate_mode=SIGMOID):
    """Variance profile shared by both baselines: every entry 1/N.

    An orthogonal N x N matrix has entries of variance exactly 1/N as well, so
    the orthogonal baseline has the same per-entry profile.
    """
    v = 1.0 / n
    extra = {k: v for k in _V_FIELDS} if kind == PEEPHOLE else {}
    return VarianceConfig(n=n, kind=kind, gate_mode=gate_mode, **{k: v for k in _WU_FIELDS}, **extra)


def _draw(rng, variance, shape, distribution):
    if distribution == "gaussian":
        return rng.normal(0.0, variance, shape)
    if distribution == "uniform":
        a = math.sqrt(3.0 * variance)
        return a * (2.0 * rng.uniform(shape) - 1.0)
    raise InvalidArgumentError(f"distribution must be 'gaussian' or 'uniform', got {distribution!r}")


def _check_square(m, n):
    if m < 1 or n < 1:
        raise InvalidArgumentError("m and n must be >= 1")
    if m != n:
        raise InvalidArgumentError(
            f"the initialization conditions assume M = N (regression); got M={m}, N={n}"
        )


def sample_weights(cfg, m, n, rng, tol=DEFAULT_TOL, distribution="gaussian"):
    """Draw LSTM weights whose entries have the variances in ``cfg``; biases are zero.

    Raises ConditionViolationError (with the validator report attached) if the
    config does not satisfy its condition.
    """
    _check_square(m, n)
    if n != cfg.n:
        raise InvalidArgumentError(f"config was built for N={cfg.n}, asked to sample N={n}")
    report = validate(cfg, tol)
    if not report.satisfied:
        raise ConditionViolationError(
            f"{report.condition} condition violated ({', '.join(report.violations)})", report
        )
    return _sample_unchecked(cfg, m, n, rng, distribution)


def _sample_unchecked(cfg, m, n, rng, distribution="gaussian"):
    w = {}
    for gate in "fico":
        w[f"w{gate}"] = _draw(rng, getattr(cfg, f"var_w{gate}"), (m, n), distribution)
        w[f"u{gate}"] = _draw(rng, getattr(cfg, f"var_u{gate}"), (m, m), distribution)
    if cfg.kind == PEEPHOLE:
        for gate in "fio":
            w[f"v{gate}"] = _draw(rng, getattr(cfg, f"var_v{gate}"), m, distribution)
    for gate in "fico":
        w[f"b{gate}"] = np.zeros(m)
    return LstmWeights(**w)


def baseline_normalized(m, n, kind, rng):
    """Every W, U (and peephole) entry ~ N(0, 1/N); zero biases."""
    _check_square(m, n)
    return _sample_unchecked(baseline_profile(n, kind), m, n, rng)


def baseline_orthogonal(m, n, kind, rng):
    """Like :func:`baseline_normalized` but each recurrent U is a random orthogonal matrix."""
    _check_square(m, n)
    w = baseline_normalized(m, n, kind, rng)
    for gate in "fico":
        setattr(w, f"u{gate}", orthogonalize(rng, m))
    return w


def build_initializer(name, m, n, kind, rng, config=None):
    """Weights for a named initializer: ``proposed-1..4``, ``normalized``,
    ``orthogonal``, or ``custom`` (``config`` given)."""
    if name == "normalized":
        return baseline_normalized(m, n, kind, rng)
    if name == "orthogonal":
        return baseline_orthogonal(m, n, kind, rng)
    if name in PROPOSED:
        cfg = table1_config(int(name.rsplit("-", 1)[1]), n)
    elif config is not None:
        cfg = config
    else:
        raise InvalidArgumentError(f"unknown initializer {name!r}")
    if cfg.kind != kind:
        raise InvalidArgumentError(f"initializer {name!r} is a {cfg.kind} config, cell is {kind}")
    return sample_weights(cfg, m, n, rng)
