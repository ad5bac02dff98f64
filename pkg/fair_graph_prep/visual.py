"""
Visualization of fairness results.

Renders per-method group values as grouped bars with standard-deviation
whiskers and the group delta written above each pair, one panel per metric.
"""

from html import escape
from pathlib import Path
from typing import Any, List, Mapping, Optional, Sequence

import pandas as pd

from .const import (
    METRIC_ACCURACY,
    METRIC_FPR,
    METRIC_OPPORTUNITY,
    METRIC_PARITY,
    METRICS,
    VISUAL_BACKGROUND,
    VISUAL_DELTA_COLOR,
    VISUAL_GROUP_A_COLOR,
    VISUAL_GROUP_B_COLOR,
    VISUAL_HEIGHT,
    VISUAL_PADDING,
    VISUAL_WIDTH,
)
from .utils.files import atomic_write_text

METRIC_TITLES = {
    METRIC_PARITY: "Statistical parity",
    METRIC_OPPORTUNITY: "Equal opportunity",
    METRIC_FPR: "False positive rate",
    METRIC_ACCURACY: "Accuracy",
}
TEXT_COLOR = "#2c3e50"


def _bar(
    x: float,
    width: float,
    value: Optional[float],
    std: float,
    base: float,
    scale: float,
    color: str,
) -> List[str]:
    if value is None or pd.isna(value):
        return []
    top = base - value * scale
    middle = x + width / 2
    parts = [
        f'<rect x="{x:.1f}" y="{top:.1f}" width="{width:.1f}" '
        f'height="{value * scale:.1f}" fill="{color}" />'
    ]
    if std > 0:
        low = base - max(value - std, 0.0) * scale
        high = base - min(value + std, 1.0) * scale
        parts.append(
            f'<line x1="{middle:.1f}" y1="{low:.1f}" x2="{middle:.1f}" y2="{high:.1f}" '
            'stroke="#000" stroke-width="1" />'
        )
    return parts


def render_fairness_figure(
    plot_data: pd.DataFrame,
    group_names: Sequence[str] = ("A", "B"),
    provenance: Optional[Mapping[str, Any]] = None,
) -> str:
    """
    Generate the SVG figure from plot data.

    Args:
        plot_data: Rows of (method, metric, group_a, group_b, delta, *_std)
        group_names: Legend names of group A and group B
        provenance: Written into an XML comment at the top

    Returns:
        SVG string
    """
    width = VISUAL_WIDTH
    height = VISUAL_HEIGHT
    padding = VISUAL_PADDING
    methods = list(dict.fromkeys(plot_data["method"]))
    panel_width = (width - padding) / len(METRICS)
    plot_height = height - 3 * padding
    base = height - 2 * padding
    slot = (panel_width - padding) / max(len(methods), 1)
    bar = slot * 0.35

    parts = []
    if provenance:
        details = " ".join(f"{key}={value}" for key, value in provenance.items())
        parts.append(f"<!-- {escape(details)} -->")
    parts.append(
        f'<svg width="{width}" height="{height}" viewBox="0 0 {width} {height}" '
        'xmlns="http://www.w3.org/2000/svg">'
    )
    parts.append(f'<rect width="100%" height="100%" fill="{VISUAL_BACKGROUND}" />')

    for index, metric in enumerate(METRICS):
        left = padding + index * panel_width
        right = left + panel_width - padding
        parts.append(
            f'<text x="{(left + right) / 2:.1f}" y="{padding / 2 + 5:.1f}" '
            f'text-anchor="middle" font-size="13" fill="{TEXT_COLOR}">'
            f"{METRIC_TITLES[metric]}</text>"
        )
        parts.append(
            f'<line x1="{left:.1f}" y1="{base:.1f}" x2="{right:.1f}" y2="{base:.1f}" '
            'stroke="#7f8c8d" stroke-width="1" />'
        )
        rows = plot_data[plot_data["metric"] == metric].set_index("method")
        for position, method in enumerate(methods):
            x = left + position * slot + (slot - 2 * bar) / 2
            if method in rows.index:
                row = rows.loc[method]
                parts.extend(
                    _bar(
                        x,
                        bar,
                        row["group_a"],
                        row["group_a_std"],
                        base,
                        plot_height,
                        VISUAL_GROUP_A_COLOR,
                    )
                )
                parts.extend(
                    _bar(
                        x + bar,
                        bar,
                        row["group_b"],
                        row["group_b_std"],
                        base,
                        plot_height,
                        VISUAL_GROUP_B_COLOR,
                    )
                )
                if metric != METRIC_ACCURACY and not pd.isna(row["delta"]):
                    values = (row["group_a"], row["group_b"])
                    peak = max(value for value in values if not pd.isna(value))
                    parts.append(
                        f'<text x="{x + bar:.1f}" '
                        f'y="{base - peak * plot_height - 6:.1f}" '
                        'text-anchor="middle" font-size="9" '
                        f'fill="{VISUAL_DELTA_COLOR}">'
                        f'&#916;{row["delta"] * 100:.0f}%</text>'
                    )
            label_x, label_y = x + bar, base + 12
            parts.append(
                f'<text x="{label_x:.1f}" y="{label_y:.1f}" text-anchor="end" '
                f'font-size="9" fill="{TEXT_COLOR}" '
                f'transform="rotate(-40 {label_x:.1f} {label_y:.1f})">'
                f"{escape(method)}</text>"
            )

    legend_y = height - padding / 2
    for offset, (name, color) in enumerate(
        zip(group_names, (VISUAL_GROUP_A_COLOR, VISUAL_GROUP_B_COLOR))
    ):
        x = padding + offset * 140
        parts.append(
            f'<rect x="{x}" y="{legend_y - 10:.1f}" width="12" height="12" '
            f'fill="{color}" />'
        )
        parts.append(
            f'<text x="{x + 18}" y="{legend_y:.1f}" font-size="12" '
            f'fill="{TEXT_COLOR}">{escape(str(name))}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(path, svg: str) -> Path:
    """Atomically write a rendered figure to ``path``."""
    return atomic_write_text(Path(path), svg)
