"""Rating aggregation, Kendall rank correlation, bootstrap intervals, Krippendorff's alpha."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.special import ndtr

from .core import DataError, NumericError, RatingsTable


@dataclass(frozen=True)
class StimulusScore:
    mean: float
    count: int
    fractions: dict


def aggregate(ratings: RatingsTable) -> dict:
    """Mean rating, count and per-category fractions for every stimulus."""
    groups = ratings.by_stimulus()
    if not groups:
        raise DataError("empty ratings table")
    out = {}
    for s, vals in groups.items():
        n = len(vals)
        fr = {c: sum(v == c for v in vals) / n for c in ratings.categories}
        out[s] = StimulusScore(sum(vals) / n, n, fr)
    return out


# ---------------------------------------------------------------- Kendall


class TauResult(NamedTuple):
    tau: float
    p_value: float


def _pair_signs(x):
    x = np.asarray(x, dtype=float)
    i, j = np.triu_indices(len(x), k=1)
    return np.sign(x[j] - x[i])


def _tie_sums(x):
    _, counts = np.unique(np.asarray(x, dtype=float), return_counts=True)
    t = counts[counts > 1].astype(float)
    return t


def tau_b(x, y) -> float:
    """Kendall tau-b of two paired samples."""
    sx, sy = _pair_signs(x), _pair_signs(y)
    s = float(np.dot(sx, sy))
    nx, ny = float(np.count_nonzero(sx)), float(np.count_nonzero(sy))
    if nx == 0 or ny == 0:
        raise NumericError("Kendall tau undefined: all values tied on one side")
    return s / math.sqrt(nx * ny)


def tau_a(x, y) -> float:
    """Kendall tau-a: (concordant - discordant) / total pairs."""
    n = len(x)
    return float(np.dot(_pair_signs(x), _pair_signs(y))) / (n * (n - 1) / 2)


def _inversion_distribution(n):
    """Counts of permutations of n items by number of inversions."""
    dist = np.array([1], dtype=object)
    for k in range(2, n + 1):
        new = np.zeros(len(dist) + k - 1, dtype=object)
        for j in range(k):
            new[j:j + len(dist)] += dist
        dist = new
    return dist


def _poly_div_exact(num, den):
    """Quotient of integer polynomials (lowest degree first) known to divide exactly."""
    num = [int(v) for v in num]
    den = [int(v) for v in den]
    out = [0] * (len(num) - len(den) + 1)
    for k in range(len(out)):
        q = num[k] // den[0]
        out[k] = q
        for j, d in enumerate(den):
            num[k + j] -= q * d
    return out


def _multiset_inversions(counts):
    """Arrangements of a multiset by inversion count (q-multinomial coefficients)."""
    dist = list(_inversion_distribution(int(sum(counts))))
    for t in counts:
        if t > 1:
            dist = _poly_div_exact(dist, _inversion_distribution(int(t)))
    return dist


def _exact_p(x, y, s_obs) -> float:
    n = len(x)
    tx, ty = _tie_sums(x), _tie_sums(y)
    if len(tx) and len(ty):
        return _tied_exact_p(x, y, s_obs)
    # at most one side tied: S = (untied pairs) - 2 * inversions of a random
    # arrangement of the tied side against the sorted other side
    t = tx if len(tx) else ty
    dist = _multiset_inversions(list(t) + [1] * int(n - sum(t)))
    untied = n * (n - 1) // 2 - int(sum(v * (v - 1) // 2 for v in t))
    total = sum(dist)
    hit = sum(c for k, c in enumerate(dist) if abs(untied - 2 * k) >= abs(s_obs) - 1e-9)
    return float(hit / total)


def _tied_exact_p(x, y, s_obs) -> float:
    """Exact permutation p of S when both samples contain ties.

    Items are processed in groups of equal x. Pairs inside a group contribute
    nothing, so only the multiset of y values a group receives matters; the
    state is the multiset of y values used so far.
    """
    yvals, ycounts = np.unique(np.asarray(y, dtype=float), return_counts=True)
    _, gsizes = np.unique(np.asarray(x, dtype=float), return_counts=True)
    K = len(yvals)
    states = {(0,) * K: {0: 1}}
    for g in gsizes:
        nxt = {}
        for used, sdist in states.items():
            rem = [int(c - u) for c, u in zip(ycounts, used)]
            below = np.concatenate([[0], np.cumsum(used)])[:-1]
            above = sum(used) - below - np.asarray(used)
            for pick in _compositions(int(g), rem):
                ways = math.prod(math.comb(r, b) for r, b in zip(rem, pick))
                ds = int(sum(b * (lo - hi) for b, lo, hi in zip(pick, below, above)))
                key = tuple(u + b for u, b in zip(used, pick))
                out = nxt.setdefault(key, {})
                for sv, c in sdist.items():
                    out[sv + ds] = out.get(sv + ds, 0) + c * ways
        states = nxt
    (final,) = states.values()
    total = sum(final.values())
    hit = sum(c for sv, c in final.items() if abs(sv) >= abs(s_obs) - 1e-9)
    return float(hit / total)


def _compositions(total, caps):
    """Vectors b with 0 <= b[k] <= caps[k] summing to ``total``."""
    if not caps:
        if total == 0:
            yield ()
        return
    for b in range(min(total, caps[0]) + 1):
        for rest in _compositions(total - b, caps[1:]):
            yield (b,) + rest


def _normal_p(x, y, s_obs) -> float:
    n = len(x)
    tx, ty = _tie_sums(x), _tie_sums(y)
    v0 = n * (n - 1) * (2 * n + 5)
    vt = float(np.sum(tx * (tx - 1) * (2 * tx + 5)))
    vu = float(np.sum(ty * (ty - 1) * (2 * ty + 5)))
    v1 = float(np.sum(tx * (tx - 1))) * float(np.sum(ty * (ty - 1))) / (2 * n * (n - 1))
    v2 = (float(np.sum(tx * (tx - 1) * (tx - 2))) * float(np.sum(ty * (ty - 1) * (ty - 2)))
          / (9 * n * (n - 1) * (n - 2)))
    var = (v0 - vt - vu) / 18 + v1 + v2
    if var <= 0:
        raise NumericError("Kendall variance is zero")
    z = s_obs / math.sqrt(var)
    return float(2 * ndtr(-abs(z)))


EXACT_MAX_N = 10


def kendall_tau(metric_values: Sequence[float], ratings_mean: Sequence[float],
                variant: str = "b") -> TauResult:
    """Agreement between a lower-is-better metric and a higher-is-better rating.

    Returns +1 when the stimulus with the smallest metric value always has the
    highest mean rating. The two-sided p-value is exact (all permutations) for
    n <= 10 and uses the tie-corrected normal approximation above that.
    """
    m = np.asarray(metric_values, dtype=float)
    r = np.asarray(ratings_mean, dtype=float)
    if m.shape != r.shape or m.ndim != 1:
        raise DataError("metric values and ratings must be paired 1-d sequences")
    n = len(m)
    if n < 2:
        raise DataError("need at least 2 paired observations")
    x = -m
    s_obs = float(np.dot(_pair_signs(x), _pair_signs(r)))
    if variant == "b":
        tau = tau_b(x, r)
    elif variant == "a":
        tau_b(x, r)  # raises on all-tied input
        tau = tau_a(x, r)
    else:
        raise DataError(f"unknown tau variant {variant!r}")
    if n <= EXACT_MAX_N:
        p = _exact_p(x, r, s_obs)
    else:
        p = _normal_p(x, r, s_obs)
    return TauResult(tau, min(1.0, p))


def batch_tau_b(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """tau-b for each row of (B, n) arrays; NaN where undefined."""
    i, j = np.triu_indices(x.shape[1], k=1)
    sx = np.sign(x[:, j] - x[:, i])
    sy = np.sign(y[:, j] - y[:, i])
    s = np.einsum("bp,bp->b", sx, sy)
    den = np.sqrt(np.count_nonzero(sx, axis=1).astype(float)
                  * np.count_nonzero(sy, axis=1))
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, s / np.where(den > 0, den, 1.0), np.nan)


# ---------------------------------------------------------------- bootstrap


class BootstrapCI(NamedTuple):
    lo: float
    hi: float
    n_valid: int
    n_skipped: int


def bootstrap_indices(n_items: int, resamples: int, seed) -> np.ndarray:
    """(resamples, n_items) index matrix, drawn in one pass from ``seed``."""
    rng = np.random.default_rng(seed)
    return rng.integers(0, n_items, size=(resamples, n_items))


def bootstrap_ci(statistic: Callable, items, resamples: int = 50_000, seed=0,
                 percentiles=(2.5, 97.5), batch: Callable = None) -> BootstrapCI:
    """Percentile bootstrap interval, resampling ``items`` with replacement.

    ``statistic(sample)`` receives a list of resampled items and may raise
    :class:`NumericError` (or return NaN) when undefined; such resamples are
    skipped. ``batch(index_matrix)`` can be given as a vectorised equivalent
    returning one value per row.
    """
    items = list(items)
    n = len(items)
    if n < 2:
        raise DataError("bootstrap needs at least 2 items")
    idx = bootstrap_indices(n, resamples, seed)
    if batch is not None:
        vals = np.asarray(batch(idx), dtype=float)
    else:
        vals = np.empty(resamples)
        for b in range(resamples):
            try:
                vals[b] = statistic([items[k] for k in idx[b]])
            except NumericError:
                vals[b] = np.nan
    ok = np.isfinite(vals)
    skipped = int(resamples - ok.sum())
    if skipped * 2 > resamples:
        raise NumericError(f"{skipped} of {resamples} bootstrap resamples undefined")
    lo, hi = np.percentile(vals[ok], percentiles)
    return BootstrapCI(float(lo), float(hi), int(ok.sum()), skipped)


def tau_bootstrap_ci(metric_values, ratings_mean, resamples=50_000, seed=0) -> BootstrapCI:
    """Stimulus-level bootstrap interval for the signed tau-b of :func:`kendall_tau`."""
    x = -np.asarray(metric_values, dtype=float)
    y = np.asarray(ratings_mean, dtype=float)

    def batch(idx):
        out = np.empty(len(idx))
        for start in range(0, len(idx), 5000):
            sl = idx[start:start + 5000]
            out[start:start + 5000] = batch_tau_b(x[sl], y[sl])
        return out

    return bootstrap_ci(None, range(len(x)), resamples, seed, batch=batch)


# ---------------------------------------------------------------- Krippendorff


def coincidence_matrix(ratings: RatingsTable) -> np.ndarray:
    """Category x category coincidences; units with a single rating add nothing."""
    cats = list(ratings.categories)
    pos = {c: i for i, c in enumerate(cats)}
    o = np.zeros((len(cats), len(cats)))
    for vals in ratings.by_stimulus().values():
        m = len(vals)
        if m < 2:
            continue
        counts = np.zeros(len(cats))
        for v in vals:
            counts[pos[v]] += 1
        o += (np.outer(counts, counts) - np.diag(counts)) / (m - 1)
    return o


def ordinal_delta2(marginals: np.ndarray) -> np.ndarray:
    """Squared ordinal distances from category marginals."""
    cum = np.concatenate([[0.0], np.cumsum(marginals)])
    k = len(marginals)
    d = np.zeros((k, k))
    for c in range(k):
        for e in range(c, k):
            val = cum[e + 1] - cum[c] - (marginals[c] + marginals[e]) / 2
            d[c, e] = d[e, c] = val * val
    return d


def krippendorff_alpha(ratings: RatingsTable, distance: str = "ordinal") -> float:
    """Krippendorff's alpha from the coincidence matrix (ordinal or interval distance).

    Returns 1.0 when no disagreement is possible (every pairable rating in one
    category).
    """
    o = coincidence_matrix(ratings)
    n_c = o.sum(axis=1)
    n = n_c.sum()
    if n == 0:
        raise DataError("no stimulus has two or more ratings")
    if distance == "ordinal":
        d2 = ordinal_delta2(n_c)
    elif distance == "interval":
        v = np.asarray(ratings.categories, dtype=float)
        d2 = (v[:, None] - v[None, :]) ** 2
    else:
        raise DataError(f"unknown distance {distance!r}")
    observed = float(np.sum(o * d2))
    expected = float(np.sum(np.outer(n_c, n_c) * d2)) / (n - 1)
    if expected == 0:
        return 1.0
    return 1.0 - observed / expected


def alpha_bootstrap_ci(ratings: RatingsTable, resamples=50_000, seed=0,
                       distance="ordinal") -> BootstrapCI:
    """Bootstrap interval for alpha, resampling whole stimuli."""
    groups = list(ratings.by_stimulus().values())
    cats = ratings.categories
    pos = {c: i for i, c in enumerate(cats)}
    K = len(cats)
    # per-stimulus coincidence contributions; alpha of a resample is a sum of these
    contrib = np.zeros((len(groups), K, K))
    for u, vals in enumerate(groups):
        if len(vals) < 2:
            continue
        counts = np.zeros(K)
        for v in vals:
            counts[pos[v]] += 1
        contrib[u] = (np.outer(counts, counts) - np.diag(counts)) / (len(vals) - 1)
    vcat = np.asarray(cats, dtype=float)

    def one(o):
        n_c = o.sum(axis=1)
        n = n_c.sum()
        if n < 2:
            return np.nan
        d2 = ordinal_delta2(n_c) if distance == "ordinal" else (vcat[:, None] - vcat[None, :]) ** 2
        exp = float(np.sum(np.outer(n_c, n_c) * d2)) / (n - 1)
        if exp == 0:
            return 1.0
        return 1.0 - float(np.sum(o * d2)) / exp

    def batch(idx):
        counts = np.stack([np.bincount(row, minlength=len(groups)) for row in idx])
        os_ = np.einsum("bu,ukl->bkl", counts.astype(float), contrib)
        return np.array([one(o) for o in os_])

    return bootstrap_ci(None, range(len(groups)), resamples, seed, batch=batch)
