"""Slow, independent reference computations used by the tests."""

from fractions import Fraction
from itertools import product


def round_half_away_exact(q: Fraction) -> int:
    n = abs(q)
    r = int(n + Fraction(1, 2)) if n.denominator != 1 else int(n)
    return r if q >= 0 else -r


def window_count_enumerated(length, window_len, overlap):
    stride = window_len - overlap
    return sum(1 for o in range(length) if o % stride == 0 and o + window_len <= length)


def gini_exact(labels):
    n = len(labels)
    return 1 - sum(Fraction(labels.count(c), n) ** 2 for c in set(labels))


def greedy_tree(rows, labels, depth):
    """Exhaustive split search applied greedily, in exact arithmetic.

    Returns a nested tuple ('leaf', cls) or ('split', f, thr, left, right).
    Ties: lowest feature, then lowest threshold; majority ties to the lower class.
    """
    counts = {c: labels.count(c) for c in set(labels)}
    top = max(counts.values())
    leaf = ("leaf", min(c for c, k in counts.items() if k == top))
    if depth == 0 or len(counts) < 2 or len(labels) < 2:
        return leaf
    parent = gini_exact(labels)
    best = None
    for f in range(len(rows[0])):
        values = sorted(set(r[f] for r in rows))
        for a, b in zip(values, values[1:]):
            thr = Fraction(a + b, 2) if isinstance(a, int) else (a + b) / 2
            left = [lab for r, lab in zip(rows, labels) if r[f] <= thr]
            right = [lab for r, lab in zip(rows, labels) if r[f] > thr]
            imp = (len(left) * gini_exact(left) + len(right) * gini_exact(right)) / len(labels)
            if best is None or imp < best[0]:
                best = (imp, f, thr)
    if best is None or parent - best[0] <= 0:
        return leaf
    _, f, thr = best
    li = [i for i, r in enumerate(rows) if r[f] <= thr]
    ri = [i for i, r in enumerate(rows) if r[f] > thr]
    return ("split", f, thr,
            greedy_tree([rows[i] for i in li], [labels[i] for i in li], depth - 1),
            greedy_tree([rows[i] for i in ri], [labels[i] for i in ri], depth - 1))


def tree_predict(node, row):
    while node[0] == "split":
        node = node[3] if row[node[1]] <= node[2] else node[4]
    return node[1]


def best_depth2_accuracy(rows, labels):
    """Training accuracy of the best tree of depth <= 2 over all midpoint splits."""
    n_feat = len(rows[0])
    splits = [None]
    for f in range(n_feat):
        values = sorted(set(r[f] for r in rows))
        splits += [(f, Fraction(a + b, 2)) for a, b in zip(values, values[1:])]

    def best_leaf_hits(idx):
        if not idx:
            return 0
        labs = [labels[i] for i in idx]
        return max(labs.count(c) for c in set(labs))

    def best_stump_hits(idx):
        out = best_leaf_hits(idx)
        for s in splits[1:]:
            f, thr = s
            left = [i for i in idx if rows[i][f] <= thr]
            right = [i for i in idx if rows[i][f] > thr]
            out = max(out, best_leaf_hits(left) + best_leaf_hits(right))
        return out

    everyone = list(range(len(rows)))
    best = best_stump_hits(everyone)
    for f, thr in splits[1:]:
        left = [i for i in everyone if rows[i][f] <= thr]
        right = [i for i in everyone if rows[i][f] > thr]
        best = max(best, best_stump_hits(left) + best_stump_hits(right))
    return Fraction(best, len(rows))


def angle_box_bound(num, den, half_width, angle_fn):
    """Largest change of a plane angle over the corners of a +-half_width box.

    The angle range of a box not containing the origin is attained at its corners.
    """
    base = angle_fn(num, den)
    worst = 0.0
    for dn, dd in product((-half_width, half_width), repeat=2):
        d = abs(angle_fn(num + dn, den + dd) - base) % 360.0
        worst = max(worst, min(d, 360.0 - d))
    return worst
