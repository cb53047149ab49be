"""Property-based checks of the invariants each module promises."""

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from lstm_varinit.cells import PEEPHOLE, TRADITIONAL, LstmWeights, step_peephole, step_traditional
from lstm_varinit.core import Rng, gaussian, matmul, orthogonalize
from lstm_varinit.data import SeriesBatch, split_indices, standardize, unstandardize
from lstm_varinit.errors import ConditionViolationError
from lstm_varinit.variance import (
    GATE_MODES,
    VarianceConfig,
    cell_quadratic,
    cell_variance_root1,
    output_quadratic,
    sample_weights,
    solve_var_vo,
    table1_config,
    validate,
)

seeds = st.integers(0, 2**32 - 1)
pos = st.floats(1e-3, 5.0, allow_nan=False)
frac = st.floats(0.0, 1.0)


@st.composite
def configs(draw, kind=None):
    kind = kind or draw(st.sampled_from([TRADITIONAL, PEEPHOLE]))
    n = draw(st.integers(1, 8))
    d = {f"var_{p}{g}": draw(pos) / n for g in "fico" for p in "wu"}
    if kind == PEEPHOLE:
        d.update(var_vf=draw(pos), var_vi=draw(pos), var_vo=draw(pos))
    return VarianceConfig(n=n, kind=kind, gate_mode=draw(st.sampled_from(GATE_MODES)), **d)


def redistribute(cfg, alphas):
    d = {}
    for gate, a in zip("fico", alphas):
        s = getattr(cfg, f"var_w{gate}") + getattr(cfg, f"var_u{gate}")
        d[f"var_w{gate}"] = a * s
        d[f"var_u{gate}"] = s - a * s
    return replace(cfg, **d)


class TestCoreProperties:
    @given(seeds, st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(1, 5))
    def test_matmul_associative(self, seed, a, b, c, d):
        rng = Rng(seed)
        x, y, z = rng.standard_normal((a, b)), rng.standard_normal((b, c)), rng.standard_normal((c, d))
        left = matmul(matmul(x, y), z)
        right = matmul(x, matmul(y, z))
        assert np.allclose(left, right, rtol=1e-9, atol=1e-12)

    @given(seeds, st.integers(0, 50))
    def test_gaussian_deterministic(self, seed, n):
        assert gaussian(Rng(seed), 0, 1, n).tobytes() == gaussian(Rng(seed), 0, 1, n).tobytes()

    @given(seeds, st.integers(1, 64))
    def test_orthogonal(self, seed, m):
        q = orthogonalize(Rng(seed), m)
        assert np.max(np.abs(q.T @ q - np.eye(m))) < 1e-10


class TestCellProperties:
    @given(seeds, st.integers(1, 4), st.floats(-30, 30))
    def test_logistic_gate_range(self, seed, m, shift):
        rng = Rng(seed)
        w = LstmWeights.zeros(m, m, PEEPHOLE)
        for p in w.params().values():
            p[...] = rng.standard_normal(p.shape)
        x = rng.standard_normal(m) + shift / 10
        s = step_peephole(w, x, rng.standard_normal(m), rng.standard_normal(m), "regression")
        for g in (s.f, s.i, s.o):
            assert np.all((g > 0) & (g < 1))

    @given(seeds, st.integers(1, 5), st.sampled_from(["identity", "linearized", "regression", "classic"]))
    def test_zero_peephole_degeneracy(self, seed, m, act):
        rng = Rng(seed)
        w = LstmWeights.zeros(m, m, PEEPHOLE)
        for name, p in w.params().items():
            if not name.startswith("v"):
                p[...] = 0.5 * rng.standard_normal(p.shape)
        x, h, c = rng.standard_normal(m), rng.standard_normal(m), rng.standard_normal(m)
        a = step_peephole(w, x, h, c, act)
        b = step_traditional(w.without_peepholes(), x, h, c, act)
        assert a.h.tobytes() == b.h.tobytes() and a.c.tobytes() == b.c.tobytes()

    @given(seeds, st.integers(1, 4), st.floats(-4, 4))
    def test_identity_gates_scale_with_input(self, seed, m, alpha):
        rng = Rng(seed)
        w = LstmWeights.zeros(m, m, TRADITIONAL)
        for name in ("wf", "wi", "wc", "wo"):
            getattr(w, name)[...] = rng.standard_normal((m, m))
        x = rng.standard_normal(m)
        zero = np.zeros(m)
        a = step_traditional(w, x, zero, zero, "identity")
        b = step_traditional(w, alpha * x, zero, zero, "identity")
        for g in ("f", "i", "z", "o"):
            assert np.allclose(getattr(b, g), alpha * getattr(a, g), rtol=1e-12, atol=1e-12)


class TestConditionProperties:
    @given(configs(), st.tuples(frac, frac, frac, frac))
    def test_depends_only_on_sums(self, cfg, alphas):
        assume(cfg.kind == TRADITIONAL or cfg.var_vf > 0)
        a = validate(cfg)
        b = validate(redistribute(cfg, alphas))
        assert a.range_ok == b.range_ok
        assert b.equality_residual == pytest.approx(a.equality_residual, rel=1e-9, abs=1e-12)

    @given(configs(), st.floats(0, 1e3), st.floats(0, 1e3))
    def test_tolerance_monotone(self, cfg, t1, t2):
        lo, hi = sorted((t1, t2))
        if validate(cfg, lo).satisfied:
            assert validate(cfg, hi).satisfied

    @given(configs(), st.floats(0, 10))
    def test_satisfied_iff_clauses(self, cfg, tol):
        r = validate(cfg, tol)
        assert r.satisfied == (r.range_ok and r.equality_residual <= tol)

    @given(configs(), seeds)
    def test_sampler_rejects_what_validator_rejects(self, cfg, seed):
        if validate(cfg).satisfied:
            w = sample_weights(cfg, cfg.n, cfg.n, Rng(seed))
            assert w.kind == cfg.kind
        else:
            with pytest.raises(ConditionViolationError):
                sample_weights(cfg, cfg.n, cfg.n, Rng(seed))

    @given(st.integers(1, 4), st.integers(1, 64))
    def test_catalog_n_invariant(self, k, n):
        r = validate(table1_config(k, n))
        assert r.satisfied and r.equality_residual < 1e-12

    @given(configs(kind=PEEPHOLE))
    def test_root1_positive(self, cfg):
        v = cell_variance_root1(cfg)
        q = output_quadratic(cfg)
        assert v > 0
        assert abs(q.b0 + q.b1 * v + q.b2 * v * v) < 1e-9 * max(1.0, abs(q.b0))

    @given(configs(kind=PEEPHOLE))
    def test_delta_consistent(self, cfg):
        q = cell_quadratic(cfg)
        assert q.delta == q.b1 * q.b1 - 4 * q.b2 * q.b0

    @given(configs(kind=PEEPHOLE))
    def test_solved_vo_satisfies_equality(self, cfg):
        try:
            fixed = solve_var_vo(cfg)
        except ConditionViolationError:
            return
        r = validate(fixed, tol=1e-9 * max(1.0, fixed.var_vo))
        assert "equality" not in r.violations

    @given(configs(kind=PEEPHOLE), st.integers(1, 16))
    def test_retarget_preserves_report(self, cfg, n):
        a = validate(cfg)
        b = validate(cfg.with_n(n))
        assert a.range_ok == b.range_ok
        assert b.equality_residual == pytest.approx(a.equality_residual, rel=1e-9, abs=1e-12)


class TestDataProperties:
    @given(st.integers(2, 200), st.floats(0, 0.9), seeds)
    def test_split_partition(self, size, vf, seed):
        assume(round(vf * size) < size)
        tr, va = split_indices(size, vf, seed)
        assert len(np.intersect1d(tr, va)) == 0
        assert sorted(np.concatenate([tr, va]).tolist()) == list(range(size))

    @given(seeds, st.integers(1, 5), st.integers(2, 10), st.integers(1, 3))
    def test_standardize_round_trip(self, seed, count, T, n):
        rng = Rng(seed)
        b = SeriesBatch([rng.normal(3.0, 4.0, (T, n)) for _ in range(count)])
        back = unstandardize(standardize(b))
        for x, y in zip(b.sequences, back.sequences):
            assert np.allclose(x, y, rtol=0, atol=1e-9)
