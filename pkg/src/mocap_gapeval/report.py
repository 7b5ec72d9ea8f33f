"""Markdown + static SVG reports for metric tables and ratings.

SVG is written by hand with fixed number formatting so the files are
byte-stable across runs.
"""
from __future__ import annotations

from html import escape

import numpy as np

from .core import METRIC_NAMES, MetricReport, RatingsTable
from .stats import aggregate

W, H = 640, 400
PAD_L, PAD_R, PAD_T, PAD_B = 70, 20, 40, 60
PALETTE = ("#b2182b", "#ef8a62", "#fddbc7", "#67a9cf", "#2166ac")


def condition_of(stimulus_id: str) -> str:
    """Condition label: text before the first underscore of the stimulus id."""
    return stimulus_id.split("_", 1)[0]


def _n(x) -> str:
    s = f"{float(x):.2f}"
    return "0.00" if s == "-0.00" else s


def _svg(body, title):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
            f'viewBox="0 0 {W} {H}">\n'
            f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>\n'
            f'<text x="{W / 2:.0f}" y="22" text-anchor="middle" font-family="sans-serif" '
            f'font-size="15">{escape(title)}</text>\n' + "".join(body) + "</svg>\n")


def _nice_range(lo, hi):
    if hi <= lo:
        pad = abs(lo) * 0.1 or 1.0
        return lo - pad, hi + pad
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


def _axes(xlo, xhi, ylo, yhi, xlabel, ylabel, xticks=True):
    x0, x1, y0, y1 = PAD_L, W - PAD_R, H - PAD_B, PAD_T
    out = [f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>\n',
           f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>\n']
    for k in range(5):
        v = ylo + (yhi - ylo) * k / 4
        y = y0 + (y1 - y0) * k / 4
        out.append(f'<text x="{x0 - 6}" y="{_n(y + 4)}" text-anchor="end" font-family="sans-serif" '
                   f'font-size="11">{v:.3g}</text>\n')
        if xticks:
            u = xlo + (xhi - xlo) * k / 4
            x = x0 + (x1 - x0) * k / 4
            out.append(f'<text x="{_n(x)}" y="{y0 + 16}" text-anchor="middle" '
                       f'font-family="sans-serif" font-size="11">{u:.3g}</text>\n')
    out.append(f'<text x="{(x0 + x1) / 2:.0f}" y="{H - 15}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="12">{escape(xlabel)}</text>\n')
    out.append(f'<text x="16" y="{(y0 + y1) / 2:.0f}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="12" transform="rotate(-90 16 {(y0 + y1) / 2:.0f})">{escape(ylabel)}</text>\n')
    return out


def _map(v, lo, hi, a, b):
    return a + (b - a) * (v - lo) / (hi - lo)


def scatter_svg(metric: str, xs, ys, labels, ylabel="mean rating") -> str:
    """Metric value vs score, one circle per stimulus, with a least-squares trend line."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    xlo, xhi = _nice_range(xs.min(), xs.max())
    ylo, yhi = _nice_range(ys.min(), ys.max())
    body = _axes(xlo, xhi, ylo, yhi, f"{metric} (cm)", ylabel)
    px = lambda v: _map(v, xlo, xhi, PAD_L, W - PAD_R)  # noqa: E731
    py = lambda v: _map(v, ylo, yhi, H - PAD_B, PAD_T)  # noqa: E731
    if len(xs) >= 2 and np.ptp(xs) > 0:
        slope, icpt = np.polyfit(xs, ys, 1)
        body.append(f'<line class="trend" x1="{_n(px(xlo))}" y1="{_n(py(slope * xlo + icpt))}" '
                    f'x2="{_n(px(xhi))}" y2="{_n(py(slope * xhi + icpt))}" stroke="#555" '
                    f'stroke-dasharray="4 3"/>\n')
    for x, y, lab in zip(xs, ys, labels):
        body.append(f'<circle class="point" cx="{_n(px(x))}" cy="{_n(py(y))}" r="4" '
                    f'fill="{PALETTE[4]}"><title>{escape(lab)}</title></circle>\n')
    return _svg(body, f"{metric} vs {ylabel}")


def conditions_svg(report: MetricReport, ratings: RatingsTable = None) -> str:
    """Per-condition bars: rating fractions with mean score, or mean metric values."""
    if ratings is not None:
        by_cond = {}
        for s, _, v in ratings.rows:
            by_cond.setdefault(condition_of(s), []).append(v)
        conds = sorted(by_cond)
        cats = ratings.categories
        body = _axes(0, 1, 0, 1, "condition", "fraction of ratings", xticks=False)
        slot = (W - PAD_L - PAD_R) / len(conds)
        for i, c in enumerate(conds):
            vals = by_cond[c]
            x = PAD_L + slot * (i + 0.2)
            bw = slot * 0.6
            base = H - PAD_B
            for k, cat in enumerate(cats):
                frac = sum(v == cat for v in vals) / len(vals)
                h = frac * (H - PAD_B - PAD_T)
                base -= h
                body.append(f'<rect x="{_n(x)}" y="{_n(base)}" width="{_n(bw)}" height="{_n(h)}" '
                            f'fill="{PALETTE[k % len(PALETTE)]}"/>\n')
            mean = sum(vals) / len(vals)
            my = _map(mean, cats[0], cats[-1], H - PAD_B, PAD_T)
            body.append(f'<circle class="mean" cx="{_n(x + bw / 2)}" cy="{_n(my)}" r="5" fill="black"/>\n')
            body.append(f'<text x="{_n(x + bw / 2)}" y="{H - PAD_B + 16}" text-anchor="middle" '
                        f'font-family="sans-serif" font-size="11">{escape(c)} ({mean:.2f})</text>\n')
        return _svg(body, "Ratings per condition")

    metrics = report.metrics()
    conds = sorted({condition_of(r.stimulus_id) for r in report.rows})
    means = {}
    for m in metrics:
        for c in conds:
            v = [r.value for r in report.rows if r.metric == m and condition_of(r.stimulus_id) == c]
            means[m, c] = float(np.mean(v)) if v else 0.0
    top = max(means.values()) or 1.0
    body = _axes(0, 1, 0, top * 1.05, "condition", "mean metric (cm)", xticks=False)
    slot = (W - PAD_L - PAD_R) / len(conds)
    bw = slot * 0.8 / len(metrics)
    for i, c in enumerate(conds):
        for k, m in enumerate(metrics):
            h = means[m, c] / (top * 1.05) * (H - PAD_B - PAD_T)
            x = PAD_L + slot * (i + 0.1) + k * bw
            body.append(f'<rect x="{_n(x)}" y="{_n(H - PAD_B - h)}" width="{_n(bw)}" '
                        f'height="{_n(h)}" fill="{PALETTE[k % len(PALETTE)]}"><title>{m}</title></rect>\n')
        body.append(f'<text x="{_n(PAD_L + slot * (i + 0.5))}" y="{H - PAD_B + 16}" '
                    f'text-anchor="middle" font-family="sans-serif" font-size="11">{escape(c)}</text>\n')
    return _svg(body, "Metrics per condition")


def render(report: MetricReport, ratings: RatingsTable = None, alpha=None) -> dict:
    """Return {filename: text} for the markdown summary and every SVG."""
    files = {"conditions.svg": conditions_svg(report, ratings)}
    scores = aggregate(ratings) if ratings is not None else None
    metrics = [m for m in METRIC_NAMES if m in report.metrics()]
    lines = ["# Metric report", ""]
    stimuli = list(dict.fromkeys(r.stimulus_id for r in report.rows))
    header = "| stimulus | condition | " + " | ".join(metrics) + (" | mean rating |" if scores else " |")
    lines += [header, "|" + "---|" * (len(metrics) + 2 + (1 if scores else 0))]
    for s in stimuli:
        vals = []
        for m in metrics:
            v = report.values(m).get(s)
            vals.append("" if v is None else f"{v:.4f}")
        row = f"| {s} | {condition_of(s)} | " + " | ".join(vals)
        if scores:
            row += f" | {scores[s].mean:.3f}" if s in scores else " | "
        lines.append(row + " |")
    lines.append("")
    lines.append("![conditions](conditions.svg)")
    for m in metrics:
        vals = report.values(m)
        ids = [s for s in stimuli if s in vals and (scores is None or s in scores)]
        if not ids:
            continue
        xs = [vals[s] for s in ids]
        if scores is not None:
            ys = [scores[s].mean for s in ids]
            files[f"scatter_{m}.svg"] = scatter_svg(m, xs, ys, ids)
        else:
            files[f"scatter_{m}.svg"] = scatter_svg(m, xs, list(range(len(ids))), ids,
                                                    ylabel="stimulus index")
        lines.append(f"![{m}](scatter_{m}.svg)")
    if alpha is not None:
        a, ci = alpha
        lines += ["", f"Krippendorff's alpha (ordinal): {a:.3f} "
                      f"(95% CI {ci.lo:.3f}, {ci.hi:.3f})"]
    files["report.md"] = "\n".join(lines) + "\n"
    return files
