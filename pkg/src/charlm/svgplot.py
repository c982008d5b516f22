"""Minimal static SVG scatter and bar plots for report figures.

No styling knobs beyond what the figures need: axes, tick labels, points,
error bars. Output is a self-contained .svg file.
"""

from __future__ import annotations

from typing import Sequence

WIDTH, HEIGHT = 420, 320
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 60, 15, 30, 50
PLOT_W = WIDTH - MARGIN_L - MARGIN_R
PLOT_H = HEIGHT - MARGIN_T - MARGIN_B


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi == lo:
        hi = lo + 1.0
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


def _panel(
    points: Sequence[tuple[float, float]],
    xlabel: str,
    ylabel: str,
    title: str = "",
    x_off: int = 0,
    errors: Sequence[float] | None = None,
) -> str:
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    if errors:
        ylo = min(y - e for y, e in zip(ys, errors))
        yhi = max(y + e for y, e in zip(ys, errors))
    else:
        ylo, yhi = min(ys), max(ys)
    xlo, xhi = min(xs), max(xs)
    xpad = (xhi - xlo) * 0.08 or 1.0
    ypad = (yhi - ylo) * 0.08 or max(abs(yhi), 1.0) * 0.08
    xlo, xhi = xlo - xpad, xhi + xpad
    ylo, yhi = ylo - ypad, yhi + ypad

    def sx(x: float) -> float:
        return x_off + MARGIN_L + (x - xlo) / (xhi - xlo) * PLOT_W

    def sy(y: float) -> float:
        return MARGIN_T + (1.0 - (y - ylo) / (yhi - ylo)) * PLOT_H

    parts = []
    parts.append(
        f'<rect x="{x_off + MARGIN_L}" y="{MARGIN_T}" width="{PLOT_W}" '
        f'height="{PLOT_H}" fill="none" stroke="black"/>'
    )
    for xt in _ticks(xlo + xpad, xhi - xpad):
        parts.append(
            f'<text x="{sx(xt):.1f}" y="{MARGIN_T + PLOT_H + 18}" '
            f'font-size="10" text-anchor="middle">{xt:.3g}</text>'
        )
    for yt in _ticks(ylo + ypad, yhi - ypad):
        parts.append(
            f'<text x="{x_off + MARGIN_L - 6}" y="{sy(yt):.1f}" '
            f'font-size="10" text-anchor="end" dominant-baseline="middle">{yt:.3g}</text>'
        )
    parts.append(
        f'<text x="{x_off + MARGIN_L + PLOT_W / 2:.1f}" y="{HEIGHT - 12}" '
        f'font-size="12" text-anchor="middle">{xlabel}</text>'
    )
    parts.append(
        f'<text x="{x_off + 14}" y="{MARGIN_T + PLOT_H / 2:.1f}" font-size="12" '
        f'text-anchor="middle" transform="rotate(-90 {x_off + 14} {MARGIN_T + PLOT_H / 2:.1f})">'
        f"{ylabel}</text>"
    )
    if title:
        parts.append(
            f'<text x="{x_off + MARGIN_L + PLOT_W / 2:.1f}" y="{MARGIN_T - 10}" '
            f'font-size="12" text-anchor="middle">{title}</text>'
        )
    for k, (x, y) in enumerate(points):
        if errors:
            e = errors[k]
            parts.append(
                f'<line x1="{sx(x):.1f}" y1="{sy(y - e):.1f}" '
                f'x2="{sx(x):.1f}" y2="{sy(y + e):.1f}" stroke="black"/>'
            )
        parts.append(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="3" fill="#1f77b4"/>')
    return "".join(parts)


def _document(body: str, width: int) -> str:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{HEIGHT}" viewBox="0 0 {width} {HEIGHT}">{body}</svg>\n'
    )


def scatter_svg(
    points: Sequence[tuple[float, float]],
    xlabel: str,
    ylabel: str,
    path,
    title: str = "",
    errors: Sequence[float] | None = None,
) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(_document(_panel(points, xlabel, ylabel, title, errors=errors), WIDTH))


def multi_panel_svg(
    panels: Sequence[tuple[Sequence[tuple[float, float]], str, str, str]],
    path,
) -> None:
    """Side-by-side scatter panels: (points, xlabel, ylabel, title) each."""
    body = "".join(
        _panel(points, xl, yl, title, x_off=i * WIDTH)
        for i, (points, xl, yl, title) in enumerate(panels)
    )
    with open(path, "w", encoding="utf-8") as f:
        f.write(_document(body, WIDTH * len(panels)))


def bars_svg(
    labels: Sequence[str],
    values: Sequence[float],
    errors: Sequence[float] | None,
    xlabel: str,
    ylabel: str,
    path,
    title: str = "",
) -> None:
    n = len(labels)
    ymax = max(
        v + (errors[i] if errors else 0.0) for i, v in enumerate(values)
    )
    ymax = ymax * 1.1 or 1.0

    def sy(y: float) -> float:
        return MARGIN_T + (1.0 - y / ymax) * PLOT_H

    bar_w = PLOT_W / n * 0.6
    parts = [
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{PLOT_W}" '
        f'height="{PLOT_H}" fill="none" stroke="black"/>'
    ]
    for i, (label, v) in enumerate(zip(labels, values)):
        cx = MARGIN_L + PLOT_W * (i + 0.5) / n
        parts.append(
            f'<rect x="{cx - bar_w / 2:.1f}" y="{sy(v):.1f}" width="{bar_w:.1f}" '
            f'height="{MARGIN_T + PLOT_H - sy(v):.1f}" fill="#1f77b4"/>'
        )
        if errors:
            e = errors[i]
            parts.append(
                f'<line x1="{cx:.1f}" y1="{sy(max(v - e, 0)):.1f}" '
                f'x2="{cx:.1f}" y2="{sy(v + e):.1f}" stroke="black"/>'
            )
        parts.append(
            f'<text x="{cx:.1f}" y="{MARGIN_T + PLOT_H + 18}" font-size="10" '
            f'text-anchor="middle">{label}</text>'
        )
    for yt in _ticks(0.0, ymax / 1.1):
        parts.append(
            f'<text x="{MARGIN_L - 6}" y="{sy(yt):.1f}" font-size="10" '
            f'text-anchor="end" dominant-baseline="middle">{yt:.3g}</text>'
        )
    parts.append(
        f'<text x="{MARGIN_L + PLOT_W / 2:.1f}" y="{HEIGHT - 12}" '
        f'font-size="12" text-anchor="middle">{xlabel}</text>'
    )
    parts.append(
        f'<text x="14" y="{MARGIN_T + PLOT_H / 2:.1f}" font-size="12" '
        f'text-anchor="middle" transform="rotate(-90 14 {MARGIN_T + PLOT_H / 2:.1f})">'
        f"{ylabel}</text>"
    )
    if title:
        parts.append(
            f'<text x="{MARGIN_L + PLOT_W / 2:.1f}" y="{MARGIN_T - 10}" '
            f'font-size="12" text-anchor="middle">{title}</text>'
        )
    with open(path, "w", encoding="utf-8") as f:
        f.write(_document("".join(parts), WIDTH))
