"""Binary CART tree, stratified repeated k-fold and lowering-class metrics.

Labels are small non-negative integers; 1 is lowering, 0 is not_lowering.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .features import ResampledClimb, WindowConfig, build_feature_table

log = logging.getLogger(__name__)

_TIE_EPS = 1e-12


class StratificationError(ValueError):
    pass


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int = 8
    min_samples_split: int = 4
    min_impurity_decrease: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")


@dataclass(frozen=True)
class CrossValConfig:
    folds: int = 10
    repetitions: int = 3
    seed: int = 0
    group_by_climb: bool = False

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")


def gini(counts) -> float:
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        raise ValueError("gini of an empty node")
    p = counts / total
    return float(1.0 - np.sum(p * p))


@dataclass
class Node:
    prediction: int
    counts: np.ndarray
    feature: int = -1
    threshold: float = 0.0
    left: Optional["Node"] = None
    right: Optional["Node"] = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass
class Tree:
    root: Node
    n_features: int
    n_classes: int

    def depth(self) -> int:
        def d(n):
            return 0 if n.is_leaf else 1 + max(d(n.left), d(n.right))
        return d(self.root)

    def n_leaves(self) -> int:
        def c(n):
            return 1 if n.is_leaf else c(n.left) + c(n.right)
        return c(self.root)

    def split_counts(self) -> np.ndarray:
        """How many internal nodes split on each feature."""
        out = np.zeros(self.n_features, dtype=int)
        stack = [self.root]
        while stack:
            n = stack.pop()
            if not n.is_leaf:
                out[n.feature] += 1
                stack += [n.left, n.right]
        return out


def _majority(counts: np.ndarray) -> int:
    # argmax returns the lowest index on ties, i.e. not_lowering
    return int(np.argmax(counts))


def best_split(X: np.ndarray, y: np.ndarray, n_classes: int):
    """Lowest weighted-Gini split over all features and midpoint thresholds.

    Ties go to the lowest feature index, then the lowest threshold.
    Returns ``(impurity, feature, threshold)`` or ``None`` if no split exists.
    """
    n, d = X.shape
    onehot = np.eye(n_classes)[y]
    best = None
    for f in range(d):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        distinct = np.flatnonzero(xs[1:] > xs[:-1])
        if len(distinct) == 0:
            continue
        cum = np.cumsum(onehot[order], axis=0)
        left = cum[distinct]
        right = cum[-1] - left
        n_l = (distinct + 1).astype(float)
        n_r = n - n_l
        g_l = 1.0 - np.sum(left * left, axis=1) / (n_l * n_l)
        g_r = 1.0 - np.sum(right * right, axis=1) / (n_r * n_r)
        imp = (n_l * g_l + n_r * g_r) / n
        k = int(np.argmin(imp))
        # first index within the tie band has the lowest threshold
        k = int(np.flatnonzero(imp <= imp[k] + _TIE_EPS)[0])
        if best is None or imp[k] < best[0] - _TIE_EPS:
            thr = (xs[distinct[k]] + xs[distinct[k] + 1]) / 2.0
            best = (float(imp[k]), f, float(thr))
    return best


def fit(X, y, cfg: TreeConfig = TreeConfig()) -> Tree:
    """Grow a tree greedily; samples with value <= threshold go left."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError(f"feature matrix {X.shape} does not match {len(y)} labels")
    if len(y) == 0:
        raise ValueError("cannot fit on zero samples")
    if y.min() < 0:
        raise ValueError("labels must be non-negative integers")
    n_classes = max(2, int(y.max()) + 1)

    def grow(idx, depth):
        counts = np.bincount(y[idx], minlength=n_classes)
        node = Node(_majority(counts), counts)
        if depth >= cfg.max_depth or len(idx) < cfg.min_samples_split or np.count_nonzero(counts) < 2:
            return node
        split = best_split(X[idx], y[idx], n_classes)
        if split is None:
            return node
        imp, f, thr = split
        if gini(counts) - imp < cfg.min_impurity_decrease:
            return node
        go_left = X[idx, f] <= thr
        node.feature, node.threshold = f, thr
        node.left = grow(idx[go_left], depth + 1)
        node.right = grow(idx[~go_left], depth + 1)
        return node

    return Tree(grow(np.arange(len(y)), 0), X.shape[1], n_classes)


def predict_one(tree: Tree, row) -> int:
    row = np.asarray(row, dtype=float)
    if row.shape != (tree.n_features,):
        raise ValueError(f"expected {tree.n_features} features, got shape {row.shape}")
    n = tree.root
    while not n.is_leaf:
        n = n.left if row[n.feature] <= n.threshold else n.right
    return n.prediction


def predict(tree: Tree, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        return np.array([predict_one(tree, X)])
    if X.shape[1] != tree.n_features:
        raise ValueError(f"expected {tree.n_features} features, got {X.shape[1]}")
    out = np.empty(len(X), dtype=int)

    def route(node, idx):
        if node.is_leaf:
            out[idx] = node.prediction
            return
        m = X[idx, node.feature] <= node.threshold
        route(node.left, idx[m])
        route(node.right, idx[~m])

    route(tree.root, np.arange(len(X)))
    return out


def stratified_folds(labels, cfg: CrossValConfig = CrossValConfig(), groups=None) -> np.ndarray:
    """Fold index of every sample, one row per repetition.

    Within each class the indices are shuffled with a per-repetition seed and
    dealt round-robin, continuing the deal across classes so fold sizes stay
    balanced too. With ``groups`` (climb mode) whole groups are dealt instead.
    """
    y = np.asarray(labels)
    classes, counts = np.unique(y, return_counts=True)
    if groups is None:
        small = [(c, n) for c, n in zip(classes, counts) if n < cfg.folds]
        if small:
            raise StratificationError(
                f"class {small[0][0]!r} has {small[0][1]} members, fewer than {cfg.folds} folds"
            )
    else:
        groups = np.asarray(groups)
        if len(np.unique(groups)) < cfg.folds:
            raise StratificationError(f"fewer groups than {cfg.folds} folds")
    out = np.empty((cfg.repetitions, len(y)), dtype=int)
    for r in range(cfg.repetitions):
        rng = np.random.default_rng([cfg.seed, r])
        if groups is None:
            start = 0
            for c in classes:
                idx = rng.permutation(np.flatnonzero(y == c))
                out[r, idx] = (start + np.arange(len(idx))) % cfg.folds
                start = (start + len(idx)) % cfg.folds
        else:
            ug = rng.permutation(np.unique(groups))
            fold_of = {g: i % cfg.folds for i, g in enumerate(ug)}
            out[r] = [fold_of[g] for g in groups]
    return out


@dataclass
class Confusion:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @classmethod
    def from_predictions(cls, y_true, y_pred, positive: int = 1) -> "Confusion":
        t = np.asarray(y_true) == positive
        p = np.asarray(y_pred) == positive
        return cls(int(np.sum(t & p)), int(np.sum(~t & p)), int(np.sum(~t & ~p)), int(np.sum(t & ~p)))

    def __add__(self, other: "Confusion") -> "Confusion":
        return Confusion(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)

    @property
    def precision_undefined(self) -> bool:
        return self.tp + self.fp == 0

    @property
    def precision(self) -> float:
        # reported as 0 when nothing was predicted positive; see precision_undefined
        return 0.0 if self.precision_undefined else self.tp / (self.tp + self.fp)

    @property
    def recall(self) -> float:
        return 0.0 if self.tp + self.fn == 0 else self.tp / (self.tp + self.fn)

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 0.0 if p + r == 0 else 2 * p * r / (p + r)


@dataclass
class MetricsReport:
    """Lowering-class metrics per repetition, their mean, and the pooled totals."""

    per_repetition: list[Confusion]
    window_len: Optional[int] = None
    n_windows: int = 0
    n_lowering: int = 0
    seconds: float = 0.0

    @property
    def pooled(self) -> Confusion:
        total = Confusion()
        for c in self.per_repetition:
            total = total + c
        return total

    def mean(self, metric: str) -> float:
        return float(np.mean([getattr(c, metric) for c in self.per_repetition]))

    @property
    def precision(self) -> float:
        return self.pooled.precision

    @property
    def recall(self) -> float:
        return self.pooled.recall

    @property
    def f1(self) -> float:
        return self.pooled.f1


def evaluate(X, y, tree_cfg: TreeConfig = TreeConfig(), cv_cfg: CrossValConfig = CrossValConfig(), groups=None) -> MetricsReport:
    """Repeated stratified k-fold; confusion counts pooled over the folds of each repetition."""
    t0 = time.perf_counter()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    folds = stratified_folds(y, cv_cfg, groups if cv_cfg.group_by_climb else None)
    reps = []
    for r in range(cv_cfg.repetitions):
        conf = Confusion()
        for k in range(cv_cfg.folds):
            test = folds[r] == k
            if not test.any():
                continue
            tree = fit(X[~test], y[~test], tree_cfg)
            conf = conf + Confusion.from_predictions(y[test], predict(tree, X[test]))
        reps.append(conf)
    return MetricsReport(reps, n_windows=len(y), n_lowering=int(np.sum(y == 1)), seconds=time.perf_counter() - t0)


def window_sweep(
    climbs: Sequence[ResampledClimb],
    lengths: Sequence[int],
    tree_cfg: TreeConfig = TreeConfig(),
    cv_cfg: CrossValConfig = CrossValConfig(),
    overlap: int = 2,
    lowering_fraction: float = 0.9,
) -> list[MetricsReport]:
    """Cross-validated metrics for each window length."""
    if not climbs:
        raise ValueError("no climbs to sweep over")
    shortest = min(len(c) for c in climbs)
    for w in lengths:
        if w > shortest:
            raise ValueError(f"window length {w} exceeds the shortest climb ({shortest} samples)")
    reports = []
    for w in lengths:
        table = build_feature_table(climbs, WindowConfig(w, overlap, lowering_fraction))
        rep = evaluate(table.X, table.y, tree_cfg, cv_cfg, groups=table.groups())
        rep.window_len = w
        log.info("window %d: P=%.3f R=%.3f F1=%.3f (%d windows)", w, rep.precision, rep.recall, rep.f1, len(table))
        reports.append(rep)
    return reports


SWEEP_COLUMNS = ("window_len", "repetition", "tp", "fp", "tn", "fn", "precision", "recall", "f1", "precision_undefined")


def sweep_rows(reports: Sequence[MetricsReport]) -> list[dict]:
    """One row per (window length, repetition) plus a pooled row with repetition 'pooled'."""
    rows = []
    for rep in reports:
        for i, c in enumerate([*rep.per_repetition, rep.pooled]):
            label = i if i < len(rep.per_repetition) else "pooled"
            rows.append(dict(
                window_len=rep.window_len, repetition=label, tp=c.tp, fp=c.fp, tn=c.tn, fn=c.fn,
                precision=c.precision, recall=c.recall, f1=c.f1, precision_undefined=int(c.precision_undefined),
            ))
    return rows


def write_sweep_csv(reports: Sequence[MetricsReport], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        wr.writeheader()
        for row in sweep_rows(reports):
            wr.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in row.items()})


def format_table(reports: Sequence[MetricsReport]) -> str:
    lines = [f"{'window':>6}  {'windows':>7}  {'lowering':>8}  {'P':>6}  {'R':>6}  {'F1':>6}  {'meanF1':>6}"]
    for r in reports:
        lines.append(
            f"{r.window_len if r.window_len is not None else '-':>6}  {r.n_windows:>7}  {r.n_lowering:>8}  "
            f"{r.precision:6.3f}  {r.recall:6.3f}  {r.f1:6.3f}  {r.mean('f1'):6.3f}"
        )
    return "\n".join(lines)
