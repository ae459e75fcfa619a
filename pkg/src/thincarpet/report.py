"""Report assembly: exact values with fixed decimals, CSV series and SVG figures."""

from __future__ import annotations

import csv
import io
import json
from decimal import ROUND_HALF_EVEN, Context, Decimal
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .errors import EnumerationBudget
from .geometry import Box

DIGITS = 12
_CTX = Context(prec=DIGITS, rounding=ROUND_HALF_EVEN)
MAX_FIGURE_BOXES = 100_000


def decimal_str(x) -> str:
    """x rounded to 12 significant digits, half-even."""
    if isinstance(x, Fraction):
        d = _CTX.divide(Decimal(x.numerator), Decimal(x.denominator))
    else:
        d = _CTX.plus(Decimal(x))
    return format(d, "")


def exact(x) -> dict | float | int | str | None:
    """JSON form of a number: {"exact": "p/q", "decimal": "..."} for rationals."""
    if x is None or isinstance(x, (bool, str)):
        return x
    if isinstance(x, int):
        return x
    if isinstance(x, Fraction):
        return {"exact": str(x), "decimal": decimal_str(x)}
    if isinstance(x, float):
        return {"decimal": decimal_str(x)}
    return str(x)


def parse_exact(entry: dict) -> Fraction:
    return Fraction(entry["exact"])


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (Fraction, float)):
        return exact(obj)
    return obj


def dumps(report: dict) -> str:
    return json.dumps(to_jsonable(report), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(v) -> str:
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float):
        return decimal_str(v)
    return str(v)


def write_outputs(out: Path, report: dict, timings: dict, series: tuple | None,
                  figure: str | None) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    written = []
    p = out / "report.json"
    p.write_text(dumps(report), encoding="utf-8")
    written.append(p)
    p = out / "timings.json"
    p.write_text(json.dumps({k: round(v, 6) for k, v in timings.items()}, indent=2, sort_keys=True) + "\n",
                 encoding="utf-8")
    written.append(p)
    if series is not None:
        p = out / "series.csv"
        p.write_text(csv_text(*series), encoding="utf-8")
        written.append(p)
    if figure is not None:
        p = out / "figure.svg"
        p.write_text(figure, encoding="utf-8")
        written.append(p)
    return written


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------

PANEL = 400
MARGIN = 10


def _num(x: Fraction) -> str:
    return f"{float(x) * PANEL:.4f}".rstrip("0").rstrip(".")


def _rects(boxes: Sequence[tuple[Fraction, Fraction, Fraction, Fraction]], ox: int, style: str) -> list[str]:
    out = []
    for x0, y0, x1, y1 in boxes:
        # SVG y grows downward; flip so the unit square sits with 0 at the bottom
        out.append(f'<rect x="{_num(x0)}" y="{_num(1 - y1)}" width="{_num(x1 - x0)}" '
                   f'height="{_num(y1 - y0)}" transform="translate({ox},{MARGIN})" {style}/>')
    return out


def _project(box: Box, axes: tuple[int, int]):
    a, b = axes
    return (box.lo[a], box.lo[b], box.hi[a], box.hi[b])


def render_levelset(levelset, holes: Sequence[Box] = (), title: str = "") -> str:
    """Unit-square figure: level boxes filled, hole boxes outlined.

    Takes a LevelSet or a plain box sequence.  One panel for d <= 2; three
    coordinate projections (xy, yz, zx) for d = 3.
    """
    boxes = list(getattr(levelset, "boxes", levelset))
    holes = list(holes)
    if len(boxes) + len(holes) > MAX_FIGURE_BOXES:
        raise EnumerationBudget("too many boxes for a figure", count=len(boxes) + len(holes))
    dim = boxes[0].dim if boxes else (holes[0].dim if holes else 2)
    if dim == 1:
        panels = [None]
    elif dim == 2:
        panels = [(0, 1)]
    else:
        panels = [(0, 1), (1, 2), (2, 0)]
    width = len(panels) * (PANEL + 2 * MARGIN)
    height = PANEL + 2 * MARGIN + (20 if title else 0)
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">']
    if title:
        lines.append(f'<text x="{MARGIN}" y="{height - 5}" font-family="monospace" font-size="12">'
                     f'{_escape(title)}</text>')
    names = {(0, 1): "xy", (1, 2): "yz", (2, 0): "zx"}
    for p, axes in enumerate(panels):
        ox = MARGIN + p * (PANEL + 2 * MARGIN)
        lines.append(f'<g id="panel-{names.get(axes, "x")}">')
        lines += _rects([(Fraction(0), Fraction(0), Fraction(1), Fraction(1))], ox,
                        'fill="none" stroke="black" stroke-width="1"')
        if axes is None:
            filled = [(b.lo[0], Fraction(0), b.hi[0], Fraction(1)) for b in boxes]
            outlined = [(h.lo[0], Fraction(0), h.hi[0], Fraction(1)) for h in holes]
        else:
            filled = sorted(set(_project(b, axes) for b in boxes))
            outlined = sorted(set(_project(h, axes) for h in holes))
        lines += _rects(filled, ox, 'fill="#4a4a4a" stroke="none"')
        lines += _rects(outlined, ox, 'fill="none" stroke="#c0392b" stroke-width="1"')
        lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
