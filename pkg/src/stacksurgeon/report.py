"""Stacked-bar SVG, CSV and text renderings of a BreakdownTable."""

import csv
import io
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence
from xml.sax.saxutils import escape, quoteattr

from .analyzer import BreakdownTable
from .errors import DuplicateLabel, EmptyInput
from .runlayout import natural_key

PALETTE = (
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
    "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac", "#86bcb6", "#d37295",
)
OTHER = "other/self"


@dataclass(frozen=True)
class ChartSpec:
    title: str = "Execution time breakdown"
    category_order: Optional[Sequence[str]] = None
    palette: Sequence[str] = PALETTE
    bar_order: Optional[Sequence[str]] = None
    format: str = "svg"

    def color(self, index: int) -> str:
        return self.palette[index % len(self.palette)]


def ordered_labels(table: BreakdownTable, order=None):
    labels = list(table.rows)
    if order is None:
        return sorted(labels, key=natural_key)
    if sorted(order) != sorted(labels):
        raise ValueError("bar order must list every run label exactly once")
    return list(order)


def percent_text(count: int, denominator: int) -> str:
    """``100*count/denominator`` to two decimals, ties to even."""
    if not denominator:
        return "0.00"
    hundredths = round(Fraction(100 * 100 * count, denominator))
    whole, frac = divmod(hundredths, 100)
    return f"{whole}.{frac:02d}"


def _rows(table: BreakdownTable):
    for lbl in ordered_labels(table):
        counts = table.rows[lbl].as_dict()
        denominator = table.rows[lbl].denominator
        for category in table.categories:
            n = counts.get(category, (0, 0.0))[0]
            yield lbl, category, str(n), percent_text(n, denominator)


def emit_csv(table: BreakdownTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["label", "category", "count", "percent"])
    writer.writerows(_rows(table))
    return buf.getvalue()


BOLD = "\x1b[1m"
RESET = "\x1b[0m"


def color_enabled(stream) -> bool:
    if os.environ.get("STACKSURGEON_NO_COLOR"):
        return False
    return hasattr(stream, "isatty") and stream.isatty()


def emit_text_table(table: BreakdownTable, color: bool = False) -> str:
    header = ("label", "category", "count", "percent")
    rows = list(_rows(table))
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(4)]

    def fmt(row):
        # text columns left-aligned, numbers right-aligned
        cells = [row[0].ljust(widths[0]), row[1].ljust(widths[1]),
                 row[2].rjust(widths[2]), row[3].rjust(widths[3])]
        return "  ".join(cells).rstrip()

    head = fmt(header)
    if color:
        head = BOLD + head + RESET
    rule = "  ".join("-" * w for w in widths)
    return "\n".join([head, rule, *(fmt(r) for r in rows)]) + "\n"


# -- SVG -----------------------------------------------------------------------

PLOT_HEIGHT = 300  # pixels for 100 %
BAR_WIDTH = 48
BAR_GAP = 24
MARGIN_LEFT = 56
MARGIN_TOP = 40
MARGIN_BOTTOM = 48
LEGEND_WIDTH = 180


def _num(x) -> str:
    """Fixed two-decimal coordinate, trimmed (``12.50`` -> ``12.5``)."""
    text = f"{float(x):.2f}".rstrip("0").rstrip(".")
    return "0" if text == "-0" else text


def emit_stacked_bars(table: BreakdownTable, spec: ChartSpec = ChartSpec()) -> bytes:
    """One stacked bar per run; the unaccounted remainder is hatched grey."""
    if not table.rows:
        raise EmptyInput("nothing to chart")
    labels = ordered_labels(table, spec.bar_order)
    if len(set(labels)) != len(labels):
        raise DuplicateLabel(next(lb for lb in labels if labels.count(lb) > 1))
    categories = list(spec.category_order or table.categories)
    missing = [c for c in table.categories if c not in categories]
    if missing:
        raise ValueError(f"category order lacks {missing}")

    plot_w = len(labels) * (BAR_WIDTH + BAR_GAP) + BAR_GAP
    width = MARGIN_LEFT + plot_w + LEGEND_WIDTH
    height = MARGIN_TOP + PLOT_HEIGHT + MARGIN_BOTTOM
    base = MARGIN_TOP + PLOT_HEIGHT
    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        '<svg version="1.1" xmlns="http://www.w3.org/2000/svg" '
        f'width="{width}" height="{height}" viewBox="0 0 {width} {height}" '
        'font-family="sans-serif" font-size="11">',
        "<defs>",
        '<pattern id="hatch" patternUnits="userSpaceOnUse" width="6" height="6">',
        '<rect width="6" height="6" fill="#eeeeee"/>',
        '<path d="M0,6 L6,0" stroke="#888888" stroke-width="1"/>',
        "</pattern>",
        "</defs>",
        f'<text x="{width // 2}" y="20" text-anchor="middle" font-size="14">'
        f"{escape(spec.title)}</text>",
    ]
    # y axis
    for pct in range(0, 101, 20):
        y = base - PLOT_HEIGHT * pct / 100
        out.append(f'<line x1="{MARGIN_LEFT}" y1="{_num(y)}" x2="{MARGIN_LEFT + plot_w}" '
                   f'y2="{_num(y)}" stroke="#dddddd"/>')
        out.append(f'<text x="{MARGIN_LEFT - 6}" y="{_num(y + 4)}" text-anchor="end">'
                   f"{pct}%</text>")

    remainder = False
    for k, lbl in enumerate(labels):
        row = table.rows[lbl]
        counts = row.as_dict()
        x = MARGIN_LEFT + BAR_GAP + k * (BAR_WIDTH + BAR_GAP)
        out.append(f"<g id={quoteattr('bar-' + lbl)}>")
        # exact cumulative fractions so segments tile without gaps
        done = Fraction(0)
        for ci, category in enumerate(categories):
            n = counts.get(category, (0, 0.0))[0]
            if not n or not row.denominator:
                continue
            top = done + Fraction(n, row.denominator)
            y0 = base - PLOT_HEIGHT * done
            y1 = base - PLOT_HEIGHT * top
            out.append(
                f'<rect x="{x}" y="{_num(y1)}" width="{BAR_WIDTH}" '
                f'height="{_num(round(y0, 2) - round(y1, 2))}" fill="{spec.color(ci)}">'
                f"<title>{escape(f'{lbl} {category}: {percent_text(n, row.denominator)}%')}"
                "</title></rect>")
            done = top
        if done < 1:
            remainder = True
            y0 = base - PLOT_HEIGHT * done
            out.append(
                f'<rect x="{x}" y="{MARGIN_TOP}" width="{BAR_WIDTH}" '
                f'height="{_num(round(y0, 2) - MARGIN_TOP)}" fill="url(#hatch)">'
                f"<title>{escape(f'{lbl} {OTHER}')}</title></rect>")
        out.append(f'<text x="{_num(x + BAR_WIDTH / 2)}" y="{base + 16}" '
                   f'text-anchor="middle">{escape(lbl)}</text>')
        out.append("</g>")

    lx = MARGIN_LEFT + plot_w + 16
    for ci, category in enumerate(categories):
        y = MARGIN_TOP + ci * 18
        out.append(f'<rect x="{lx}" y="{y}" width="12" height="12" fill="{spec.color(ci)}"/>')
        out.append(f'<text x="{lx + 18}" y="{y + 10}">{escape(category)}</text>')
    if remainder:
        y = MARGIN_TOP + len(categories) * 18
        out.append(f'<rect x="{lx}" y="{y}" width="12" height="12" fill="url(#hatch)"/>')
        out.append(f'<text x="{lx + 18}" y="{y + 10}">{escape(OTHER)}</text>')
    out.append("</svg>")
    return ("\n".join(out) + "\n").encode("utf-8")


def render(table: BreakdownTable, spec: ChartSpec = ChartSpec(), color: bool = False) -> bytes:
    """Dispatch on ``spec.format``: ``svg``, ``csv`` or ``txt``."""
    if spec.format == "svg":
        return emit_stacked_bars(table, spec)
    if spec.format == "csv":
        return emit_csv(table).encode("utf-8")
    if spec.format == "txt":
        return emit_text_table(table, color).encode("utf-8")
    raise ValueError(f"unknown format {spec.format!r}")
