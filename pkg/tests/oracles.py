"""Direct-loop reference implementations used to check the vectorised code.

Nothing here imports the package's numeric helpers; every formula is
spelled out element by element.
"""
import itertools
import math
import random


def rmse(pred, gt, norm="per_coordinate", scope_missing=None):
    T, M = len(gt), len(gt[0])
    total, count = 0.0, 0
    for t in range(T):
        for m in range(M):
            if scope_missing is not None and not scope_missing[t][m]:
                continue
            for k in range(3):
                total += (pred[t][m][k] - gt[t][m][k]) ** 2
            count += 3 if norm == "per_coordinate" else 1
    return math.sqrt(total / count)


def _vel(y, t, m, k):
    return y[t][m][k] - y[t - 1][m][k]


def vd_gt(pred, gt, norm="per_coordinate"):
    T, M = len(gt), len(gt[0])
    total = 0.0
    for t in range(1, T):
        for m in range(M):
            for k in range(3):
                total += (_vel(gt, t, m, k) - _vel(pred, t, m, k)) ** 2
    count = (T - 1) * M * (3 if norm == "per_coordinate" else 1)
    return math.sqrt(total / count)


def vd(pred, norm="per_coordinate"):
    T, M = len(pred), len(pred[0])
    total = 0.0
    for t in range(1, T - 1):
        for m in range(M):
            for k in range(3):
                total += (_vel(pred, t + 1, m, k) - _vel(pred, t, m, k)) ** 2
    count = (T - 2) * M * (3 if norm == "per_coordinate" else 1)
    return math.sqrt(total / count)


def bone_length(frame, end_a, end_b):
    ca = [sum(frame[i][k] for i in end_a) / len(end_a) for k in range(3)]
    cb = [sum(frame[i][k] for i in end_b) / len(end_b) for k in range(3)]
    return math.sqrt(sum((ca[k] - cb[k]) ** 2 for k in range(3)))


def bdp_gt(pred, gt, bones):
    total = 0.0
    for t in range(len(gt)):
        for a, b in bones:
            total += (bone_length(gt[t], a, b) - bone_length(pred[t], a, b)) ** 2
    return math.sqrt(total / (len(gt) * len(bones)))


def bdp(pred, bones):
    total = 0.0
    for t in range(len(pred) - 1):
        for a, b in bones:
            total += (bone_length(pred[t + 1], a, b) - bone_length(pred[t], a, b)) ** 2
    return math.sqrt(total / ((len(pred) - 1) * len(bones)))


def training_loss(pred, gt, missing, lam):
    T, M = len(gt), len(gt[0])
    pos = 0.0
    for t in range(T):
        for m in range(M):
            if missing[t][m]:
                pos += sum((gt[t][m][k] - pred[t][m][k]) ** 2 for k in range(3))
    vel = 0.0
    for t in range(1, T):
        for m in range(M):
            if missing[t][m]:
                vel += sum((_vel(gt, t, m, k) - _vel(pred, t, m, k)) ** 2 for k in range(3))
    return pos / T + lam * vel / (T - 1)


def kendall_counts(x, y):
    """(concordant, discordant, ties only in x, ties only in y) over all pairs."""
    c = d = tx = ty = 0
    for i, j in itertools.combinations(range(len(x)), 2):
        dx, dy = x[i] - x[j], y[i] - y[j]
        if dx == 0 and dy == 0:
            continue
        if dx == 0:
            tx += 1
        elif dy == 0:
            ty += 1
        elif (dx > 0) == (dy > 0):
            c += 1
        else:
            d += 1
    return c, d, tx, ty


def tau_b(x, y):
    c, d, tx, ty = kendall_counts(x, y)
    return (c - d) / math.sqrt((c + d + tx) * (c + d + ty))


def bootstrap_mean_ci(values, resamples, seed):
    """Plain-python percentile bootstrap of the mean."""
    rng = random.Random(seed)
    n = len(values)
    means = sorted(sum(values[rng.randrange(n)] for _ in range(n)) / n for _ in range(resamples))

    def pct(q):
        pos = q / 100 * (len(means) - 1)
        lo = int(math.floor(pos))
        hi = min(lo + 1, len(means) - 1)
        return means[lo] + (means[hi] - means[lo]) * (pos - lo)

    return pct(2.5), pct(97.5)


def krippendorff_ordinal(units, categories):
    """Alpha by enumerating ordered pairable value pairs within every unit."""
    pairs = []
    for vals in units:
        m = len(vals)
        if m < 2:
            continue
        for i in range(m):
            for j in range(m):
                if i != j:
                    pairs.append((vals[i], vals[j], 1.0 / (m - 1)))
    n_c = {c: 0.0 for c in categories}
    for a, _, w in pairs:
        n_c[a] += w
    n = sum(n_c.values())
    cats = list(categories)

    def delta2(a, b):
        i, j = sorted((cats.index(a), cats.index(b)))
        s = sum(n_c[cats[g]] for g in range(i, j + 1))
        return (s - (n_c[cats[i]] + n_c[cats[j]]) / 2) ** 2

    d_o = sum(w * delta2(a, b) for a, b, w in pairs) / n
    d_e = sum(n_c[a] * n_c[b] * delta2(a, b) for a in cats for b in cats) / (n * (n - 1))
    return 1.0 - d_o / d_e


def hermite_fill(y, gap_start, gap_end):
    """Scalar cubic Hermite fill of y[gap_start:gap_end] with one-sided slopes."""
    a, b = gap_start - 1, gap_end
    m0 = y[a] - y[a - 1] if a >= 1 and y[a - 1] is not None else 0.0
    m1 = y[b + 1] - y[b] if b + 1 < len(y) and y[b + 1] is not None else 0.0
    h = b - a
    out = []
    for t in range(gap_start, gap_end):
        s = (t - a) / h
        out.append((2 * s**3 - 3 * s**2 + 1) * y[a] + (s**3 - 2 * s**2 + s) * h * m0
                   + (-2 * s**3 + 3 * s**2) * y[b] + (s**3 - s**2) * h * m1)
    return out
