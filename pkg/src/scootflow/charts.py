"""Standalone SVG bar charts (no plotting dependency, byte-stable output)."""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

POSITIVE = "#2f6fb0"
NEGATIVE = "#c0392b"
NEUTRAL = "#8c8c8c"
PALETTE = ("#2f6fb0", "#e08a1e", "#3a9d5d", "#8e5bb5", "#c0392b", "#6b6b6b")


def _header(width: int, height: int, comment: str) -> list[str]:
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">']
    if comment:
        out.append(f"<!-- {escape(comment.replace('--', '- -'))} -->")
    out.append(f'<rect width="{width}" height="{height}" fill="white"/>')
    return out


def importance_svg(entries, title: str = "", comment: str = "", neutral: Sequence[str] = ()) -> str:
    """Horizontal bars, blue for positive and red for negative correlation.

    Features named in ``neutral`` (e.g. dummy variables) are drawn grey.
    """
    entries = list(entries)
    label_w, bar_w, row_h, top = 180, 360, 18, 30
    height = top + row_h * len(entries) + 20
    width = label_w + bar_w + 70
    peak = max((e.score for e in entries), default=0.0) or 1.0
    out = _header(width, height, comment)
    if title:
        out.append(f'<text x="8" y="18" font-size="13">{escape(title)}</text>')
    for i, e in enumerate(entries):
        y = top + i * row_h
        colour = NEUTRAL if e.feature in neutral else (NEGATIVE if e.pearson_r < 0 else POSITIVE)
        w = bar_w * e.score / peak
        out.append(f'<text x="{label_w - 6}" y="{y + 12}" text-anchor="end">{escape(e.feature)}</text>')
        out.append(f'<rect x="{label_w}" y="{y + 2}" width="{w:.2f}" height="{row_h - 5}" fill="{colour}"/>')
        out.append(f'<text x="{label_w + w + 4:.2f}" y="{y + 12}">{e.score:.3f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def grouped_bar_svg(
    groups: Sequence[str],
    series: Sequence[str],
    values: Sequence[Sequence[float]],
    title: str = "",
    comment: str = "",
    y_label: str = "%",
) -> str:
    """Vertical grouped bars; ``values[g][s]`` is series ``s`` in group ``g``.

    NaN values leave a gap.
    """
    n_g, n_s = len(groups), len(series)
    bar, gap, left, top, plot_h = 14, 16, 50, 30, 220
    width = left + n_g * (n_s * bar + gap) + 20 + 120
    height = top + plot_h + 80
    finite = [v for row in values for v in row if v == v]
    peak = max(finite, default=0.0) or 1.0
    out = _header(width, height, comment)
    if title:
        out.append(f'<text x="8" y="18" font-size="13">{escape(title)}</text>')
    base = top + plot_h
    out.append(f'<line x1="{left}" y1="{base}" x2="{width - 130}" y2="{base}" stroke="black"/>')
    out.append(f'<text x="8" y="{top + 10}">{escape(y_label)}</text>')
    for g, name in enumerate(groups):
        x0 = left + 8 + g * (n_s * bar + gap)
        for s in range(n_s):
            v = values[g][s]
            if v != v:
                continue
            h = plot_h * v / peak
            out.append(f'<rect x="{x0 + s * bar}" y="{base - h:.2f}" width="{bar - 2}" '
                       f'height="{h:.2f}" fill="{PALETTE[s % len(PALETTE)]}"/>')
        cx = x0 + n_s * bar / 2
        out.append(f'<text x="{cx:.1f}" y="{base + 14}" text-anchor="end" '
                   f'transform="rotate(-40 {cx:.1f} {base + 14})">{escape(name)}</text>')
    for s, name in enumerate(series):
        y = top + s * 16
        out.append(f'<rect x="{width - 120}" y="{y}" width="10" height="10" '
                   f'fill="{PALETTE[s % len(PALETTE)]}"/>')
        out.append(f'<text x="{width - 105}" y="{y + 9}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
