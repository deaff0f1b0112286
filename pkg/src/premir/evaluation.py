"""Classification metrics, k-fold cross-validation and ablation runs.

Prevalence-dependent metrics (PPV, accuracy, F-score, MCC) are reported
twice: from the raw confusion counts, and "balanced", i.e. evaluated as if
the test set held equally many positives and negatives. The balanced values
depend only on sensitivity and specificity.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np

from . import network
from .errors import ValidationError
from .seqdata import FoldAssignment

METRICS = ("se", "sp", "ppv", "acc", "f_score", "mcc", "g_mean")
TABLE_COLUMNS = ("se", "sp", "f_score", "g_mean")
NAN = float("nan")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def positives(self):
        return self.tp + self.fn

    @property
    def negatives(self):
        return self.tn + self.fp


def confusion(predictions, labels) -> ConfusionCounts:
    p = np.asarray(predictions, dtype=np.int64)
    y = np.asarray(labels, dtype=np.int64)
    if p.shape != y.shape:
        raise ValidationError(f"{len(p)} predictions for {len(y)} labels")
    if p.size == 0:
        raise ValidationError("confusion counts need at least one prediction")
    return ConfusionCounts(
        tp=int(np.sum((p == 1) & (y == 1))),
        fp=int(np.sum((p == 1) & (y == 0))),
        tn=int(np.sum((p == 0) & (y == 0))),
        fn=int(np.sum((p == 0) & (y == 1))),
    )


def _div(a, b):
    return a / b if b != 0 else NAN


def _mcc(num, denom):
    # a zero margin forces a zero numerator; a one-class predictor has no correlation
    if denom <= 0:
        return 0.0
    return num / math.sqrt(denom)


@dataclass(frozen=True)
class MetricsReport:
    se: float
    sp: float
    ppv: float
    acc: float
    f_score: float
    mcc: float
    g_mean: float
    counts: ConfusionCounts
    balanced: bool

    def as_dict(self):
        return {m: getattr(self, m) for m in METRICS}


def _from_rates(se, sp, ppv, acc, mcc, counts, balanced):
    f = _div(2 * ppv * se, ppv + se) if not math.isnan(ppv) else NAN
    return MetricsReport(se, sp, ppv, acc, f, mcc, math.sqrt(se * sp), counts, balanced)


def balanced_metrics(c: ConfusionCounts) -> MetricsReport:
    """Metrics at an equal class prior, computed from SE and SP alone.

    Undefined ratios (PPV and F-score of a model that never predicts
    positive) come back as NaN; MCC of a one-class predictor is 0.
    """
    if c.positives == 0 or c.negatives == 0:
        raise ValidationError("balanced metrics need both classes present")
    se = c.tp / c.positives
    sp = c.tn / c.negatives
    fpr, fnr = 1.0 - sp, 1.0 - se
    ppv = _div(se, se + fpr)
    acc = (se + sp) / 2.0
    mcc = _mcc(se + sp - 1.0, (se + fpr) * (sp + fnr))
    return _from_rates(se, sp, ppv, acc, mcc, c, True)


def raw_metrics(c: ConfusionCounts) -> MetricsReport:
    """Metrics from the raw counts, at the test set's own class ratio."""
    tp, fp, tn, fn = c.tp, c.fp, c.tn, c.fn
    se = _div(tp, tp + fn)
    sp = _div(tn, tn + fp)
    ppv = _div(tp, tp + fp)
    acc = (tp + tn) / (tp + fp + tn + fn)
    mcc = _mcc(tp * tn - fp * fn, (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    g = math.sqrt(se * sp) if not (math.isnan(se) or math.isnan(sp)) else NAN
    f = _div(2 * ppv * se, ppv + se) if not (math.isnan(ppv) or math.isnan(se)) else NAN
    return MetricsReport(se, sp, ppv, acc, f, mcc, g, c, False)


def evaluate(model: network.Model, samples) -> tuple[MetricsReport, MetricsReport]:
    """``(balanced, raw)`` metrics of ``model`` on ``samples``."""
    pred, _ = model.predict(samples)
    c = confusion(pred, [s.label for s in samples])
    return balanced_metrics(c), raw_metrics(c)


def snapshot_epochs(epochs: int, every: int, window: tuple[int, int] | None) -> list[int]:
    """Epochs at which held-out metrics are recorded.

    Every ``every``-th epoch, the final epoch, and every epoch inside the
    closed convergence window.
    """
    picks = set(range(every, epochs + 1, every)) if every > 0 else set()
    picks.add(epochs)
    if window is not None:
        lo, hi = window
        picks.update(range(max(lo, 1), min(hi, epochs) + 1))
    return sorted(e for e in picks if 1 <= e <= epochs)


def window_average(grid: dict, window: tuple[int, int]):
    """Mean of every metric over all ``(fold, epoch)`` cells inside ``window``.

    ``grid`` maps fold -> epoch -> metric dict. NaN cells are dropped and
    counted. Returns ``(mean, std_across_folds, nan_counts)``.
    """
    lo, hi = window
    mean, std, nan_counts = {}, {}, {}
    for m in METRICS:
        cells, per_fold, nans = [], [], 0
        for fold, by_epoch in grid.items():
            vals = [v[m] for e, v in by_epoch.items() if lo <= int(e) <= hi]
            good = [x for x in vals if not math.isnan(x)]
            nans += len(vals) - len(good)
            cells.extend(good)
            if good:
                per_fold.append(float(np.mean(good)))
        mean[m] = float(np.mean(cells)) if cells else NAN
        std[m] = float(np.std(per_fold)) if per_fold else NAN
        nan_counts[m] = nans
    return mean, std, nan_counts


@dataclass
class CrossValReport:
    num_folds: int
    window: tuple[int, int]
    epochs: list
    grid: dict  # fold -> epoch -> balanced metric dict
    raw_grid: dict  # fold -> epoch -> raw-count metric dict
    losses: dict  # fold -> per-epoch training loss
    summary: dict = field(default_factory=dict)
    summary_std: dict = field(default_factory=dict)
    nan_excluded: dict = field(default_factory=dict)
    raw_summary: dict = field(default_factory=dict)
    held_out: dict = field(default_factory=dict)  # sample id -> fold
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0

    def to_dict(self):
        d = asdict(self)
        d["window"] = list(self.window)
        return d

    def to_json(self):
        return json.dumps(_jsonable(self.to_dict()), indent=1, sort_keys=True, allow_nan=False)


def _jsonable(x):
    """Replace NaN with None and stringify keys so JSON stays strict."""
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, float) and math.isnan(x):
        return None
    if isinstance(x, np.generic):
        return _jsonable(x.item())
    return x


def cross_validate(
    samples: Sequence[network.PreparedSample],
    hp: network.Hyperparameters,
    folds: FoldAssignment,
    window: tuple[int, int],
    every: int = 10,
    progress=None,
) -> CrossValReport:
    """Train one model per fold and record held-out metrics over epochs.

    Fold ``f``'s model never sees the samples assigned to ``f``; its metrics
    are computed on exactly those samples at every snapshot epoch.
    """
    samples = list(samples)
    if len(folds.assignment) != len(samples):
        raise ValidationError("fold assignment does not match the number of samples")
    epochs = snapshot_epochs(hp.epochs, every, window)
    wanted = set(epochs)
    grid, raw_grid, losses, held_out = {}, {}, {}, {}
    for fold in range(folds.num_folds):
        train_set = [samples[i] for i in folds.train_indices(fold)]
        test_set = [samples[i] for i in folds.test_indices(fold)]
        for s in test_set:
            held_out[s.id] = fold
        grid[fold], raw_grid[fold] = {}, {}

        def record(epoch, model, fold=fold, test_set=test_set):
            if epoch in wanted:
                bal, raw = evaluate(model, test_set)
                grid[fold][epoch] = bal.as_dict()
                raw_grid[fold][epoch] = raw.as_dict()
            if progress is not None:
                progress(fold, epoch)

        result = network.train(train_set, hp, key=(fold,), on_epoch=record)
        losses[fold] = result.losses
    report = CrossValReport(
        num_folds=folds.num_folds,
        window=tuple(window),
        epochs=epochs,
        grid=grid,
        raw_grid=raw_grid,
        losses=losses,
        held_out=held_out,
        hyperparameters=hp.to_dict(),
        seed=hp.seed,
    )
    report.summary, report.summary_std, report.nan_excluded = window_average(grid, window)
    report.raw_summary, _, _ = window_average(raw_grid, window)
    return report


ABLATIONS = {
    "multimodal": dict(mode="multimodal", palindrome=True),
    "seq_only": dict(mode="seq_only", palindrome=True),
    "str_only": dict(mode="str_only", palindrome=True),
    "raw_structure": dict(mode="multimodal", palindrome=False),
}


def ablation_suite(samples, hp, folds, window, every=10, variants=None, progress=None) -> dict:
    """Cross-validate each model variant on the same folds.

    ``split_flip`` in the palindrome comparison is the ``multimodal`` run.
    """
    variants = variants or list(ABLATIONS)
    reports = {}
    for name in variants:
        vhp = hp.replace(**ABLATIONS[name])
        cb = (lambda f, e, name=name: progress(name, f, e)) if progress else None
        reports[name] = cross_validate(samples, vhp, folds, window, every, cb)
    return reports


def ablation_summary(reports: dict) -> dict:
    out = {
        name: {"mean": r.summary, "std": r.summary_std, "nan_excluded": r.nan_excluded}
        for name, r in reports.items()
    }
    if "multimodal" in reports and "raw_structure" in reports:
        out["palindrome_sp_gap"] = reports["multimodal"].summary["sp"] - reports["raw_structure"].summary["sp"]
    return out


def format_table(rows: dict, columns=TABLE_COLUMNS) -> str:
    """Plain-text table, one row per named metric dict, columns SE SP F g-mean."""
    names = {"se": "SE", "sp": "SP", "f_score": "F-score", "g_mean": "g-mean",
             "ppv": "PPV", "acc": "ACC", "mcc": "MCC"}
    width = max([len("model")] + [len(r) for r in rows])
    head = "model".ljust(width) + "".join(f"  {names[c]:>8}" for c in columns)
    lines = [head]
    for label, vals in rows.items():
        cells = "".join(f"  {vals[c]:8.3f}" if not math.isnan(vals[c]) else f"  {'nan':>8}" for c in columns)
        lines.append(label.ljust(width) + cells)
    return "\n".join(lines)
