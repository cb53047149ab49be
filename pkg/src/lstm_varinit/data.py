"""Series loading, synthetic generators, standardization and splitting.

Two on-disk formats are read:

* UCR style: one sequence per line, ``label<d>v1<d>v2...`` with ``<d>`` a comma
  or a tab. Labels are parsed and dropped; every row must have the same length.
* Panel CSV: header ``subject_id,t,f1,...,fN`` and one row per (subject, time),
  rows of a subject contiguous and ``t`` running 1, 2, ... without gaps.
"""

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import Rng
from .errors import (
    ConstantFeatureError,
    InvalidArgumentError,
    ParseError,
    UnsupportedMissingValueError,
)

log = logging.getLogger(__name__)

_DELIMITERS = {"comma": ",", "tab": "\t", ",": ",", "\t": "\t"}
_MISSING = {"", "na", "nan", "null", "none", "?"}


@dataclass
class SeriesBatch:
    """A batch of (T_i, N) float arrays, possibly of different lengths."""

    sequences: list
    name: str = ""
    stats: tuple = None
    ids: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        seqs = [np.asarray(s, dtype=np.float64) for s in self.sequences]
        if seqs:
            n = seqs[0].shape[-1] if seqs[0].ndim == 2 else None
            for s in seqs:
                if s.ndim != 2 or s.shape[1] != n:
                    raise InvalidArgumentError("every sequence must be a (T, N) array with the same N")
                if not np.isfinite(s).all():
                    raise InvalidArgumentError("sequences must be finite")
        self.sequences = seqs
        if self.ids is None:
            self.ids = np.arange(len(seqs))
        self.ids = np.asarray(self.ids, dtype=np.int64)

    def __len__(self):
        return len(self.sequences)

    @property
    def n_features(self):
        return self.sequences[0].shape[1] if self.sequences else 0

    @property
    def lengths(self):
        return [s.shape[0] for s in self.sequences]

    @property
    def seq_len(self):
        """Common length, or None for a ragged batch."""
        lengths = set(self.lengths)
        return lengths.pop() if len(lengths) == 1 else None

    def subset(self, index):
        index = np.asarray(index, dtype=np.int64)
        meta = {k: np.asarray(v)[index] for k, v in self.meta.items()}
        return replace(self, sequences=[self.sequences[i] for i in index], ids=self.ids[index], meta=meta)

    def groups(self):
        """Equal-length groups as ``[(positions, array(k, T, N)), ...]`` sorted by T."""
        by_len = {}
        for pos, s in enumerate(self.sequences):
            by_len.setdefault(s.shape[0], []).append(pos)
        return [(np.array(p), np.stack([self.sequences[i] for i in p])) for t, p in sorted(by_len.items())]


# --- loaders ---------------------------------------------------------------

def _parse_float(text, line):
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"non-numeric value {text!r}", line) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite value {text!r}", line)
    return v


def load_ucr(path, delimiter="comma"):
    try:
        delim = _DELIMITERS[delimiter]
    except KeyError:
        raise InvalidArgumentError("delimiter must be 'comma' or 'tab'") from None
    path = Path(path)
    rows = []
    width = None
    with path.open(newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            cells = [c.strip() for c in line.split(delim)]
            if len(cells) < 2:
                raise ParseError("row needs a label and at least one value", lineno)
            _parse_float(cells[0], lineno)
            values = [_parse_float(c, lineno) for c in cells[1:]]
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise ParseError(f"expected {width} values, found {len(values)}", lineno)
            rows.append(values)
    if not rows:
        raise InvalidArgumentError(f"{path} contains no series")
    seqs = [np.array(r)[:, None] for r in rows]
    return SeriesBatch(seqs, name=path.stem)


def load_panel(path, drop_short=False):
    """Read a panel CSV into a ragged batch (one sequence per subject).

    Subjects with fewer than two time points cannot form a next-step pair;
    they raise ParseError unless ``drop_short`` is set, in which case they are
    skipped with a warning.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InvalidArgumentError(f"{path} is empty") from None
        if len(header) < 3 or header[0] != "subject_id" or header[1] != "t":
            raise ParseError("header must be 'subject_id,t,f1,...,fN'", 1)
        n = len(header) - 2
        order, rows = [], {}
        last = None
        for lineno, cells in enumerate(reader, start=2):
            if not cells or all(not c.strip() for c in cells):
                continue
            if len(cells) != n + 2:
                raise ParseError(f"expected {n + 2} cells, found {len(cells)}", lineno)
            subject = cells[0].strip()
            if subject != last:
                if subject in rows:
                    raise ParseError(f"rows of subject {subject!r} are not contiguous", lineno)
                rows[subject] = []
                order.append(subject)
                last = subject
            t_text = cells[1].strip()
            try:
                t = int(t_text)
            except ValueError:
                raise ParseError(f"time index {t_text!r} is not an integer", lineno) from None
            if t != len(rows[subject]) + 1:
                raise ParseError(
                    f"subject {subject!r}: expected t={len(rows[subject]) + 1}, found t={t}", lineno
                )
            values = []
            for j, c in enumerate(cells[2:]):
                if c.strip().lower() in _MISSING:
                    raise UnsupportedMissingValueError(
                        f"missing value for {header[j + 2]} (missing-value-robust cells are not supported)",
                        lineno,
                    )
                values.append(_parse_float(c.strip(), lineno))
            rows[subject].append(values)
    if not order:
        raise InvalidArgumentError(f"{path} contains no rows")
    seqs, kept = [], []
    for subject in order:
        if len(rows[subject]) < 2:
            if drop_short:
                log.warning("dropping subject %s: a single time point gives no next-step pair", subject)
                continue
            raise ParseError(f"subject {subject!r} has a single time point; need at least 2")
        seqs.append(np.array(rows[subject]))
        kept.append(subject)
    return SeriesBatch(seqs, name=path.stem, meta={"subject_id": np.array(kept)})


def write_ucr(batch, path, delimiter="comma", label=0):
    delim = _DELIMITERS[delimiter]
    if batch.n_features != 1:
        raise InvalidArgumentError("UCR files hold univariate series")
    with Path(path).open("w") as fh:
        for s in batch.sequences:
            fh.write(delim.join([str(label)] + [repr(float(v)) for v in s[:, 0]]) + "\n")


def write_panel(batch, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject_id", "t"] + [f"f{j + 1}" for j in range(batch.n_features)])
        for sid, s in zip(batch.ids, batch.sequences):
            for t, row in enumerate(s, start=1):
                w.writerow([int(sid), t] + [repr(float(v)) for v in row])


# --- synthetic series ------------------------------------------------------

SYNTH_KINDS = ("sine", "ar1", "memory")


def synth(kind, count, T, n_features=1, noise_var=0.0, seed=0):
    """Synthetic next-step regression data.

    ``sine``: random frequency (0.02-0.2 cycles/step) and phase per sequence and
    feature, plus Gaussian observation noise of variance ``noise_var``.
    ``ar1``: ``x[t+1] = rho x[t] + e`` with one ``rho ~ U(0.5, 0.95)`` per
    sequence and innovations ``e ~ N(0, noise_var)``, started from the
    stationary law (from N(0, 1) when ``noise_var == 0``); ``meta['rho']``
    keeps the coefficients.
    ``memory``: a constant sequence ``x[t+1] = x[t]`` with ``x[1] ~ N(0, 1)``
    plus observation noise.
    """
    if kind not in SYNTH_KINDS:
        raise InvalidArgumentError(f"kind must be one of {SYNTH_KINDS}, got {kind!r}")
    if count < 2 or T < 2:
        raise InvalidArgumentError("count and T must be >= 2")
    if n_features < 1 or noise_var < 0:
        raise InvalidArgumentError("n_features must be >= 1 and noise_var >= 0")
    rng = Rng(seed)
    meta = {}
    if kind == "sine":
        freq = 0.02 + 0.18 * rng.uniform((count, 1, n_features))
        phase = 2 * math.pi * rng.uniform((count, 1, n_features))
        t = np.arange(T, dtype=np.float64)[None, :, None]
        x = np.sin(2 * math.pi * freq * t + phase)
        x = x + rng.normal(0.0, noise_var, x.shape)
    elif kind == "ar1":
        rho = 0.5 + 0.45 * rng.uniform(count)
        x = np.empty((count, T, n_features))
        start_var = noise_var / (1 - rho**2) if noise_var > 0 else np.ones(count)
        x[:, 0, :] = rng.standard_normal((count, n_features)) * np.sqrt(start_var)[:, None]
        eps = rng.normal(0.0, noise_var, (count, T - 1, n_features))
        for t in range(1, T):
            x[:, t, :] = rho[:, None] * x[:, t - 1, :] + eps[:, t - 1, :]
        meta["rho"] = rho
    else:
        x0 = rng.standard_normal((count, 1, n_features))
        x = np.repeat(x0, T, axis=1)
        x = x + rng.normal(0.0, noise_var, x.shape)
    return SeriesBatch(list(x), name=f"synth-{kind}", meta=meta)


# --- standardization -------------------------------------------------------

def _stack(batch):
    if not len(batch):
        raise InvalidArgumentError("empty batch")
    return np.concatenate(batch.sequences, axis=0)


def fit_stats(batch):
    """Per-feature mean and population standard deviation over all time points."""
    allx = _stack(batch)
    mean = allx.mean(axis=0)
    std = allx.std(axis=0)
    for j, s in enumerate(std):
        if not s > 1e-12:
            raise ConstantFeatureError(j)
    return mean, std


def apply_stats(batch, stats):
    mean, std = stats
    seqs = [(s - mean) / std for s in batch.sequences]
    return replace(batch, sequences=seqs, stats=(np.array(mean), np.array(std)))


def standardize(batch):
    return apply_stats(batch, fit_stats(batch))


def unstandardize(batch):
    if batch.stats is None:
        raise InvalidArgumentError("batch carries no standardization statistics")
    mean, std = batch.stats
    return replace(batch, sequences=[s * std + mean for s in batch.sequences], stats=None)


# --- splitting -------------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    val_fraction: float = 0.15
    seed: int = 0
    strategy: str = "random-by-sequence"

    def __post_init__(self):
        if not 0 <= self.val_fraction < 1:
            raise InvalidArgumentError("val_fraction must be in [0, 1)")
        if self.strategy != "random-by-sequence":
            raise InvalidArgumentError("only 'random-by-sequence' splitting is supported")


def split_indices(size, val_fraction, seed):
    """Deterministic (train, val) position arrays, each sorted."""
    n_val = int(round(val_fraction * size))
    if n_val >= size:
        raise InvalidArgumentError("validation fraction leaves no training sequences")
    perm = Rng(seed).permutation(size)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def split(batch, spec=SplitSpec(), standardize_train=True):
    """Sequence-level train/validation split.

    With ``standardize_train`` the train part is standardized on its own
    statistics and the validation part reuses them.
    """
    if len(batch) < 2:
        raise InvalidArgumentError("need at least 2 sequences to split")
    tr, va = split_indices(len(batch), spec.val_fraction, spec.seed)
    train, val = batch.subset(tr), batch.subset(va)
    if standardize_train:
        stats = fit_stats(train)
        train = apply_stats(train, stats)
        val = apply_stats(val, stats)
    return train, val
