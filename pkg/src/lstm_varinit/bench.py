"""Benchmark grid: initializers x seeds on one dataset, with CSV outputs.

An experiment file is JSON::

    {
      "name": "sine",
      "dataset": {"synth": {"kind": "sine", "count": 200, "T": 50,
                            "n_features": 1, "noise_var": 0.01, "seed": 1,
                            "test_count": 100}},
      "initializers": ["proposed-1", "normalized", {"name": "mine", "config": "mine.json"}],
      "cell": "peephole",
      "activation": "regression",
      "train": {"epochs": 100},
      "seeds": [0, 1, 2, 3, 4],
      "output_dir": "runs/sine"
    }

``dataset`` may instead be ``{"ucr": {"train": ..., "test": ..., "delimiter": "tab"}}``
or ``{"panel": {"train": ..., "test": ...}}``. Relative paths are resolved
against the experiment file's directory.
"""

import csv
import json
import logging
import math
import os
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cells import KINDS, PEEPHOLE, activation
from .core import Rng
from .data import apply_stats, fit_stats, load_panel, load_ucr, synth
from .errors import InvalidArgumentError
from .training import TrainConfig, train
from .variance import PROPOSED, VarianceConfig, build_initializer

log = logging.getLogger(__name__)

# summary rows follow this order, custom initializers after
TABLE_ORDER = PROPOSED + ("normalized", "orthogonal")
SEED_ENV = "VARINIT_SEED"


@dataclass
class Initializer:
    name: str
    config: VarianceConfig = None


@dataclass
class ExperimentSpec:
    name: str
    dataset: dict
    initializers: list
    cell: str = PEEPHOLE
    activation: str = "regression"
    train: TrainConfig = field(default_factory=TrainConfig)
    seeds: list = field(default_factory=lambda: [0])
    output_dir: Path = Path("runs")
    base_dir: Path = Path(".")

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise InvalidArgumentError(f"{path}: malformed JSON: {exc}") from None
        return cls.from_dict(raw, base_dir=path.parent)

    @classmethod
    def from_dict(cls, raw, base_dir=Path(".")):
        known = {"name", "dataset", "initializers", "cell", "activation", "train", "seeds", "output_dir"}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise InvalidArgumentError(f"unknown experiment keys: {unknown}")
        base_dir = Path(base_dir)
        inits = []
        for item in raw.get("initializers", []):
            if isinstance(item, str):
                if item not in TABLE_ORDER:
                    raise InvalidArgumentError(f"unknown initializer {item!r}")
                inits.append(Initializer(item))
            else:
                cfg_path = base_dir / item["config"]
                if not cfg_path.exists():
                    raise InvalidArgumentError(f"config file {cfg_path} does not exist")
                inits.append(Initializer(item["name"], VarianceConfig.from_json(cfg_path.read_text())))
        if not inits:
            raise InvalidArgumentError("at least one initializer is required")
        seeds = [int(s) for s in raw.get("seeds", [0])]
        if not seeds:
            raise InvalidArgumentError("at least one seed is required")
        cell = raw.get("cell", PEEPHOLE)
        if cell not in KINDS:
            raise InvalidArgumentError(f"cell must be one of {KINDS}")
        activation(raw.get("activation", "regression"))
        dataset = raw.get("dataset")
        if not isinstance(dataset, dict) or len(dataset) != 1:
            raise InvalidArgumentError("dataset must have exactly one of 'synth', 'ucr', 'panel'")
        for key in ("ucr", "panel"):
            if key in dataset:
                for part in ("train", "test"):
                    p = base_dir / dataset[key][part]
                    if not p.exists():
                        raise InvalidArgumentError(f"dataset file {p} does not exist")
        return cls(
            name=raw.get("name", "experiment"),
            dataset=dataset,
            initializers=inits,
            cell=cell,
            activation=raw.get("activation", "regression"),
            train=TrainConfig(**raw.get("train", {})),
            seeds=seeds,
            output_dir=base_dir / raw.get("output_dir", "runs"),
            base_dir=base_dir,
        )


def load_dataset(spec):
    """Training pool and test set, both raw (not standardized)."""
    kind, params = next(iter(spec.dataset.items()))
    if kind == "synth":
        p = dict(params)
        test_count = int(p.pop("test_count", 0))
        if test_count < 1:
            raise InvalidArgumentError("synthetic datasets need test_count >= 1")
        count = int(p.pop("count"))
        full = synth(count=count + test_count, **p)
        pool = full.subset(np.arange(count))
        test = full.subset(np.arange(count, count + test_count))
    elif kind == "ucr":
        delim = params.get("delimiter", "comma")
        pool = load_ucr(spec.base_dir / params["train"], delim)
        test = load_ucr(spec.base_dir / params["test"], delim)
    elif kind == "panel":
        drop = bool(params.get("drop_short", False))
        pool = load_panel(spec.base_dir / params["train"], drop_short=drop)
        test = load_panel(spec.base_dir / params["test"], drop_short=drop)
    else:
        raise InvalidArgumentError(f"unknown dataset kind {kind!r}")
    return pool, test


def _weight_rng(seed, name):
    return Rng(np.random.SeedSequence([seed, zlib.crc32(name.encode())]))


def run_one(spec, init, seed, pool, test):
    n = pool.n_features
    tc = TrainConfig(**{**spec.train.__dict__, "seed": seed})
    w0 = build_initializer(init.name, n, n, spec.cell, _weight_rng(seed, init.name), init.config)
    _, trace = train(w0, pool, None, tc, spec.activation, spec.cell, test_data=test,
                     initializer=init.name, dataset=spec.name)
    return trace


def _fmt(v):
    return repr(float(v))


def summarize(spec, traces):
    names = [i.name for i in spec.initializers]
    ordered = [n for n in TABLE_ORDER if n in names] + [n for n in names if n not in TABLE_ORDER]
    rows = []
    for name in ordered:
        ts = [t for t in traces if t.initializer == name]
        train_l = np.array([t.final_train_loss for t in ts])
        test_l = np.array([t.final_test_mse for t in ts])
        rows.append({
            "initializer": name,
            "runs": len(ts),
            "diverged": sum(t.aborted for t in ts),
            "median_final_train_loss": float(np.median(train_l)),
            "mean_final_train_loss": float(np.mean(train_l)),
            "median_test_mse": float(np.median(test_l)),
            "mean_test_mse": float(np.mean(test_l)),
        })
    return rows


SUMMARY_COLUMNS = ("initializer", "runs", "diverged", "median_final_train_loss",
                   "mean_final_train_loss", "median_test_mse", "mean_test_mse")


def write_summary(rows, path):
    with Path(path).open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(SUMMARY_COLUMNS)
        for r in rows:
            out.writerow([r[c] if isinstance(r[c], (str, int)) else _fmt(r[c]) for c in SUMMARY_COLUMNS])


def run_experiment(spec, output_dir=None):
    """Run every (initializer, seed) pair, write per-run traces and ``summary.csv``.

    Returns ``(summary_rows, traces)``. Diverged runs are kept in the summary
    (their losses are ``inf``) and never stop the grid.
    """
    seeds = spec.seeds
    if os.environ.get(SEED_ENV):
        seeds = [int(os.environ[SEED_ENV])]
    out = Path(output_dir) if output_dir is not None else spec.output_dir
    out.mkdir(parents=True, exist_ok=True)
    pool, test = load_dataset(spec)
    stats = fit_stats(pool)
    pool = apply_stats(pool, stats)
    test = apply_stats(test, stats)
    traces = []
    for init in spec.initializers:
        for seed in seeds:
            trace = run_one(spec, init, seed, pool, test)
            if trace.aborted:
                log.warning("%s seed %d diverged: %s", init.name, seed, trace.abort_reason)
            trace.write(out / f"{spec.name}__{init.name}__seed{seed}.csv")
            traces.append(trace)
    rows = summarize(spec, traces)
    write_summary(rows, out / "summary.csv")
    return rows, traces


def format_summary(rows):
    lines = [f"{'initializer':<14} {'runs':>4} {'div':>3} {'train(med)':>12} {'test(med)':>12}"]
    for r in rows:
        lines.append(
            f"{r['initializer']:<14} {r['runs']:>4d} {r['diverged']:>3d} "
            f"{r['median_final_train_loss']:>12.6g} {r['median_test_mse']:>12.6g}"
        )
    return "\n".join(lines)


def any_diverged(rows):
    return any(r["diverged"] for r in rows) or any(not math.isfinite(r["median_test_mse"]) for r in rows)
