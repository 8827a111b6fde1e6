"""Tiny dependency-free SVG bar charts for the stats reports."""

from __future__ import annotations


def bar_chart_svg(
    pairs: list[tuple[str, float]],
    title: str,
    width: int = 640,
    bar_height: int = 18,
    gap: int = 4,
) -> str:
    """Horizontal bar chart; one bar per (label, value), longest bar filling
    the available width."""
    peak = max((v for _, v in pairs), default=1.0) or 1.0
    label_w = 220
    chart_w = width - label_w - 60
    rows = []
    y = 30
    for label, value in pairs:
        w = max(1, int(chart_w * value / peak))
        rows.append(
            f'<text x="{label_w - 8}" y="{y + bar_height - 5}" text-anchor="end" '
            f'font-size="11">{_esc(str(label))}</text>'
            f'<rect x="{label_w}" y="{y}" width="{w}" height="{bar_height}" fill="#4878a8"/>'
            f'<text x="{label_w + w + 4}" y="{y + bar_height - 5}" font-size="11">{value:g}</text>'
        )
        y += bar_height + gap
    height = y + 10
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif">'
        f'<text x="10" y="18" font-size="14" font-weight="bold">{_esc(title)}</text>'
        + "".join(rows)
        + "</svg>\n"
    )


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
