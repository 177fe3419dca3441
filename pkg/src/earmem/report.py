"""Method comparison tables and spectral-difference outputs."""
from __future__ import annotations

import csv
import io as _io
import json
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .data import BandDef
from .evaluation import CvReport, STD_NOTE
from .stats import kruskal_wallis, wilcoxon_ranksum

REFERENCE_METHOD = "cnn"
KW_ROW = "Kruskal-Wallis p"


def format_cell(report: CvReport) -> str:
    return f"{100 * report.mean:.2f} ± {100 * report.std:.2f}"


@dataclass
class ComparisonTable:
    """Methods by (segment, dataset) columns, plus rank-test p-values.

    ``p_vs_reference[row][col]`` is the Wilcoxon rank-sum p comparing fold
    accuracies of that method with the reference (CNN) row; ``kruskal[col]``
    tests all methods of a column together.
    """

    columns: List[Tuple[str, str]]
    rows: List[str]
    cells: Dict[str, Dict[Tuple[str, str], CvReport]]
    p_vs_reference: Dict[str, Dict[Tuple[str, str], Optional[float]]]
    kruskal: Dict[Tuple[str, str], Optional[Tuple[float, float]]]
    reference: str = REFERENCE_METHOD

    @staticmethod
    def column_name(col: Tuple[str, str]) -> str:
        return f"{col[0]}/{col[1]}"

    def to_rows(self) -> List[List[str]]:
        header = ["method"]
        for col in self.columns:
            name = self.column_name(col)
            header += [f"{name} accuracy % (mean ± std)", f"{name} p vs {self.reference}"]
        out = [header]
        for row in self.rows:
            line = [row]
            for col in self.columns:
                rep = self.cells[row].get(col)
                p = self.p_vs_reference[row].get(col)
                line += [format_cell(rep) if rep else "", "" if p is None else f"{p:.4g}"]
            out.append(line)
        line = [KW_ROW]
        for col in self.columns:
            kw = self.kruskal.get(col)
            line += ["" if kw is None else f"{kw[1]:.4g}", ""]
        out.append(line)
        return out

    def to_csv(self) -> str:
        buf = _io.StringIO()
        buf.write(f"# accuracies in percent; {STD_NOTE}; two-sided rank tests over fold accuracies\n")
        csv.writer(buf, lineterminator="\n").writerows(self.to_rows())
        return buf.getvalue()

    def to_dict(self) -> Dict[str, Any]:
        cols = [self.column_name(c) for c in self.columns]
        return {
            "tool_version": __version__,
            "reference": self.reference,
            "note": STD_NOTE,
            "columns": cols,
            "rows": [{
                "method": r,
                "cells": {self.column_name(c): ({"mean": rep.mean, "std": rep.std,
                                                 "text": format_cell(rep)} if rep else None)
                          for c in self.columns for rep in [self.cells[r].get(c)]},
                "p_vs_reference": {self.column_name(c): self.p_vs_reference[r].get(c)
                                   for c in self.columns},
            } for r in self.rows],
            "kruskal_wallis": {self.column_name(c): (None if self.kruskal.get(c) is None else
                                                     {"H": self.kruskal[c][0], "p": self.kruskal[c][1]})
                               for c in self.columns},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def compare(reports: Sequence[CvReport], reference: str = REFERENCE_METHOD) -> ComparisonTable:
    """Arrange reports into a table and run the rank tests per column.

    A method appearing twice in the same column gets a ``#2`` suffix so
    no report is dropped.
    """
    if not reports:
        raise ValueError("no reports to compare")
    columns: List[Tuple[str, str]] = []
    rows: List[str] = []
    cells: Dict[str, Dict[Tuple[str, str], CvReport]] = {}
    for rep in reports:
        col = (rep.segment or "-", rep.dataset or "-")
        if col not in columns:
            columns.append(col)
        row, i = rep.method_name, 1
        while col in cells.get(row, {}):
            i += 1
            row = f"{rep.method_name}#{i}"
        if row not in cells:
            rows.append(row)
            cells[row] = {}
        cells[row][col] = rep

    p_ref: Dict[str, Dict[Tuple[str, str], Optional[float]]] = {r: {} for r in rows}
    kw: Dict[Tuple[str, str], Optional[Tuple[float, float]]] = {}
    for col in columns:
        present = [r for r in rows if col in cells[r]]
        groups = [cells[r][col].fold_accuracies for r in present]
        kw[col] = None
        if len(groups) >= 2:
            res = kruskal_wallis(groups)
            kw[col] = (res.statistic, res.p_value)
        ref = cells.get(reference, {}).get(col)
        for r in present:
            if ref is not None and r != reference:
                p_ref[r][col] = wilcoxon_ranksum(cells[r][col].fold_accuracies,
                                                 ref.fold_accuracies).p_value
    return ComparisonTable(columns, rows, cells, p_ref, kw, reference)


# ---------------------------------------------------------------- spectra

def spectra_csv(diff: np.ndarray, bands: Sequence[BandDef], channel_names: Sequence[str]) -> str:
    """Rows are bands, columns channels; values are remembered minus forgotten power."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["band", "lo_hz", "hi_hz", *channel_names])
    for band, row in zip(bands, diff):
        w.writerow([band.name, band.lo, band.hi, *(repr(float(v)) for v in row)])
    return buf.getvalue()


def _diverging(v: float) -> str:
    """Map v in [-1, 1] to blue (negative) through white to red (positive)."""
    v = float(np.clip(v, -1.0, 1.0))
    fade = int(round(255 * (1 - abs(v))))
    return f"#ff{fade:02x}{fade:02x}" if v >= 0 else f"#{fade:02x}{fade:02x}ff"


def spectra_svg(diff: np.ndarray, bands: Sequence[BandDef], channel_names: Sequence[str],
                cell: int = 28) -> str:
    """One heat strip per band; each band is scaled by its own largest magnitude."""
    left, top = 70, 30
    n_ch = len(channel_names)
    width = left + n_ch * cell + 10
    height = top + len(bands) * (cell + 8) + 10
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'font-family="sans-serif" font-size="10">',
             f'<text x="{left}" y="14">power difference, remembered minus forgotten</text>']
    for j, name in enumerate(channel_names):
        x = left + j * cell + cell / 2
        parts.append(f'<text x="{x:.1f}" y="{top - 4}" text-anchor="middle">{name}</text>')
    for i, (band, row) in enumerate(zip(bands, diff)):
        y = top + i * (cell + 8)
        scale = float(np.max(np.abs(row))) or 1.0
        parts.append(f'<text x="{left - 6}" y="{y + cell / 2 + 3:.1f}" text-anchor="end">'
                     f'{band.name}</text>')
        for j, v in enumerate(row):
            parts.append(f'<rect x="{left + j * cell}" y="{y}" width="{cell}" height="{cell}" '
                         f'fill="{_diverging(v / scale)}" stroke="#888" stroke-width="0.5">'
                         f'<title>{band.name} {channel_names[j]}: {float(v):.6g}</title></rect>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
