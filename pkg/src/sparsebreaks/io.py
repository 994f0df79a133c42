"""CSV ingestion and JSON/CSV report output.

Two CSV layouts are read, both with a header row and the period label in the
first column (an integer or an ISO-8601 date, ``YYYY-MM-DD`` or ``YYYY-MM``):

series
    ``label,<name_1>,...,<name_m>``: one row per observation of an
    ``m``-variate time series.
panel
    ``label,y1,...,ym,x1_1,...,xm_n``: one row per period of a regression
    panel, ``x{i}_{j}`` being entry ``(i, j)`` of ``X_t``.

Floats are written with ``repr``, the shortest string that parses back to the
same double, so a write/read cycle is lossless.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING, Any, Literal

import numpy as np

from sparsebreaks.errors import IoError, NonFiniteEntry, NonMonotonicDates, ParseError
from sparsebreaks.panel import RegressionPanel, validate_panel

if TYPE_CHECKING:
    from collections.abc import Mapping, Sequence

    from numpy.typing import ArrayLike, NDArray

    from sparsebreaks.pipeline import BreakReport
    from sparsebreaks.vecm import ComovementSeries, VecmFit

__all__ = [
    "SCHEMA_VERSION",
    "SeriesData",
    "ingest_csv",
    "write_series_csv",
    "write_panel_csv",
    "emit_report",
    "report_dict",
    "load_schema",
]

SCHEMA_VERSION = "1.0"
REPORT_FILE = "report.json"
PLOT_FILE = "plot.csv"

_PANEL_Y = re.compile(r"^y(\d+)$")
_YEAR_MONTH = re.compile(r"^(\d{4})-(\d{2})$")


@dataclass(frozen=True, eq=False)
class SeriesData:
    """A labelled multivariate series; ``values`` has shape ``(N, m)``."""

    labels: tuple
    values: NDArray
    names: tuple[str, ...]

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def _parse_label(text: str, row: int) -> tuple[Any, Any]:
    """Return ``(label, sort_key)``; integers stay ints, dates stay strings."""
    text = text.strip()
    try:
        value = int(text)
        return value, ("int", value)
    except ValueError:
        pass
    match = _YEAR_MONTH.match(text)
    try:
        if match:
            key = _dt.date(int(match.group(1)), int(match.group(2)), 1)
        else:
            key = _dt.date.fromisoformat(text)
    except ValueError:
        raise ParseError(f"label {text!r} is neither an integer nor an ISO-8601 date", row, 1) from None
    return text, ("date", key)


def _parse_float(text: str, row: int, column: int, name: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"non-numeric value {text!r} in column {name!r}", row, column) from None
    if not math.isfinite(value):
        raise NonFiniteEntry(f"non-finite value {text!r} at row {row}, column {column} ({name!r})")
    return value


def _read_rows(path: str | Path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError:
        raise IoError(f"input file not found: {path}") from None
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    numbered = [(i, r) for i, r in enumerate(rows, start=1) if any(cell.strip() for cell in r)]
    if not numbered:
        raise ParseError("file is empty; a header row is required", 1, 1)
    (_, header), body = numbered[0], numbered[1:]
    header = [h.strip() for h in header]
    if len(header) < 2:
        raise ParseError("header needs a label column and at least one data column", 1, len(header))
    if not body:
        raise ParseError("file has a header but no data rows", 2, 1)
    return header, body


def _parse_body(header: list[str], body) -> tuple[tuple, NDArray]:
    width = len(header)
    labels, keys, data = [], [], []
    for row, cells in body:
        if len(cells) != width:
            raise ParseError(f"expected {width} fields, found {len(cells)}", row, min(len(cells), width) + 1)
        label, key = _parse_label(cells[0], row)
        if keys and key[0] != keys[-1][0]:
            raise ParseError("labels mix integers and dates", row, 1)
        if keys and not keys[-1] < key:
            raise NonMonotonicDates(
                f"label {cells[0].strip()!r} at row {row} does not follow {labels[-1]!r}"
            )
        labels.append(label)
        keys.append(key)
        data.append([_parse_float(c, row, j, header[j - 1]) for j, c in enumerate(cells[1:], start=2)])
    return tuple(labels), np.array(data, dtype=float)


def _panel_layout(columns: list[str]) -> tuple[int, int] | None:
    """``(m, n)`` when the data columns follow the panel layout, else None."""
    ys = [c for c in columns if _PANEL_Y.match(c)]
    m = len(ys)
    if m == 0 or ys != [f"y{i}" for i in range(1, m + 1)] or columns[:m] != ys:
        return None
    rest = columns[m:]
    if not rest or len(rest) % m:
        return None
    n = len(rest) // m
    expected = [f"x{i}_{j}" for i in range(1, m + 1) for j in range(1, n + 1)]
    return (m, n) if rest == expected else None


def ingest_csv(
    path: str | Path, kind: Literal["auto", "series", "panel"] = "auto"
) -> SeriesData | RegressionPanel:
    """Read a series or panel CSV.

    With ``kind="auto"`` a header that matches the panel layout gives a
    :class:`RegressionPanel`; anything else is read as a series.

    Raises
    ------
    IoError
        If the file cannot be read.
    ParseError
        On a missing header, a malformed row, a bad label or a non-numeric
        cell; the message names the row (1-based file line) and column.
    NonMonotonicDates
        If labels are not strictly increasing.
    NonFiniteEntry
        On NaN or infinite values.
    """
    header, body = _read_rows(path)
    layout = _panel_layout(header[1:])
    if kind == "panel" and layout is None:
        raise ParseError("header does not follow the panel layout label,y1..ym,x1_1..xm_n", 1, 2)
    labels, data = _parse_body(header, body)
    if kind == "series" or layout is None:
        return SeriesData(labels=labels, values=data, names=tuple(header[1:]))
    m, n = layout
    T = data.shape[0]
    panel = RegressionPanel(data[:, m:].reshape(T, m, n), data[:, :m], labels)
    return validate_panel(panel)


def _fmt(value: float) -> str:
    return repr(float(value))


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def write_series_csv(path: str | Path, labels: Sequence, values: ArrayLike, names: Sequence[str] | None = None) -> None:
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if names is None:
        names = [f"s{j}" for j in range(1, values.shape[1] + 1)]
    rows = ([lab, *map(_fmt, v)] for lab, v in zip(labels, values))
    _write_csv(Path(path), ["label", *names], rows)


def write_panel_csv(path: str | Path, panel: RegressionPanel) -> None:
    T, m, n = panel.shape
    header = ["label", *(f"y{i}" for i in range(1, m + 1))]
    header += [f"x{i}_{j}" for i in range(1, m + 1) for j in range(1, n + 1)]
    rows = (
        [panel.label(t), *map(_fmt, panel.responses[t - 1]), *map(_fmt, panel.design_blocks[t - 1].ravel())]
        for t in range(1, T + 1)
    )
    _write_csv(Path(path), header, rows)


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, (_dt.date, _dt.datetime)):
        return obj.isoformat()
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def report_dict(
    report: BreakReport,
    *,
    kind: Literal["fit", "vecm", "lambda-path"] = "fit",
    config: Mapping[str, Any] | None = None,
    fit: VecmFit | None = None,
) -> dict[str, Any]:
    """The JSON document written by :func:`emit_report`."""
    doc: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "config": dict(config or {}),
        "lambda": report.lambda_used,
        "criterion": report.criterion,
        "breaks": [
            {"period_index": b.period, "label": b.label, "magnitude": b.magnitude, "jump": b.jump}
            for b in report.breaks
        ],
        "diagnostics": report.diagnostics,
    }
    if kind == "lambda-path" or report.path_table:
        doc["path_table"] = [
            {"lambda": lam, "n_active": k, "objective": obj, "converged": ok}
            for lam, k, obj, ok in report.path_table
        ]
    if fit is not None:
        doc["vecm"] = {
            "lag_order": fit.spec.lag_order,
            "coint_rank": fit.spec.coint_rank,
            "degree_norm": fit.spec.degree_norm,
            "effective_T": fit.effective_T,
            "pi": fit.pi,
            "alpha": fit.alpha,
            "beta_star": fit.beta_star,
        }
    return _jsonable(doc)


def emit_report(
    report: BreakReport,
    path: str | Path,
    *,
    kind: Literal["fit", "vecm", "lambda-path"] = "fit",
    config: Mapping[str, Any] | None = None,
    comovement: ComovementSeries | None = None,
    fit: VecmFit | None = None,
    labels: Sequence | None = None,
) -> tuple[Path, Path]:
    """Write ``report.json`` and ``plot.csv`` into directory ``path``.

    The plot CSV has columns ``period,label,degree`` when ``comovement`` is
    given and ``period,label,beta_1,...,beta_n`` otherwise, one row per
    period. ``labels`` supplies the period labels of a fit run; the period
    index is used when it is omitted.

    Returns
    -------
    (Path, Path)
        The report and plot file paths.

    Raises
    ------
    IoError
        If the directory cannot be created or a file cannot be written.
    """
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create output directory {out}: {exc}") from exc
    doc = report_dict(report, kind=kind, config=config, fit=fit)
    report_path = out / REPORT_FILE
    try:
        report_path.write_text(json.dumps(doc, indent=2, allow_nan=False) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {report_path}: {exc}") from exc

    plot_path = out / PLOT_FILE
    if comovement is not None:
        rows = (
            [t, lab, _fmt(d)]
            for t, (lab, d) in enumerate(zip(comovement.periods, comovement.degrees), start=1)
        )
        _write_csv(plot_path, ["period", "label", "degree"], rows)
    else:
        betas = report.path.betas
        if labels is None:
            labels = range(1, betas.shape[0] + 1)
        header = ["period", "label", *(f"beta_{j}" for j in range(1, betas.shape[1] + 1))]
        rows = ([t, lab, *map(_fmt, b)] for t, (lab, b) in enumerate(zip(labels, betas), start=1))
        _write_csv(plot_path, header, rows)
    return report_path, plot_path


def load_schema() -> dict[str, Any]:
    """The JSON schema every emitted report validates against."""
    text = resources.files("sparsebreaks").joinpath("report.schema.json").read_text(encoding="utf-8")
    return json.loads(text)
