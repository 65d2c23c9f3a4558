"""Point pools, CSV ingestion, feature scaling and the synthetic 2-d mixture."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ParseError(ValueError):
    """Raised when a delimited text file cannot be turned into a point pool."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class PointSet:
    """An immutable pool of feature vectors with optional labels.

    ``points`` is an ``(n, d)`` float64 array; ``labels`` is either ``None`` or
    a length-``n`` float64 array.
    """

    points: np.ndarray
    labels: np.ndarray | None = None
    source_id: str = ""

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"points must be a non-empty 2-d array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points contain NaN or infinite entries")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            lab = np.array(self.labels, dtype=np.float64, copy=True).reshape(-1)
            if lab.shape[0] != pts.shape[0]:
                raise ValueError(f"got {lab.shape[0]} labels for {pts.shape[0]} points")
            if not np.all(np.isfinite(lab)):
                raise ValueError("labels contain NaN or infinite entries")
            lab.flags.writeable = False
            object.__setattr__(self, "labels", lab)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def has_labels(self) -> bool:
        return self.labels is not None

    def subset(self, indices) -> "PointSet":
        idx = np.asarray(indices, dtype=np.intp)
        labels = None if self.labels is None else self.labels[idx]
        return PointSet(self.points[idx], labels, self.source_id)


@dataclass(frozen=True)
class MixtureSpec:
    central_count: int = 650
    corner_count: int = 200
    uniform_count: int = 150
    seed: int = 0
    # cosmetic widths; only the counts are fixed by the reference figure
    central_sigma: float = field(default=0.08, compare=False)
    corner_sigma: float = field(default=0.05, compare=False)

    def __post_init__(self):
        counts = (self.central_count, self.corner_count, self.uniform_count)
        if any(c < 0 for c in counts):
            raise ValueError("mixture counts must be nonnegative")
        if sum(counts) < 1:
            raise ValueError("mixture must contain at least one point")

    @property
    def total(self) -> int:
        return self.central_count + self.corner_count + self.uniform_count


FIG1_MIXTURE = MixtureSpec(650, 200, 150)
CENTRAL_CENTER = (0.5, 0.5)
CORNER_CENTER = (0.15, 0.15)


def _parse_label_column(label_column, ncols):
    if label_column is None:
        return None
    if isinstance(label_column, str):
        if label_column.strip().lower() == "last":
            return ncols - 1
        label_column = int(label_column)
    col = int(label_column)
    if col < 0:
        col += ncols
    if not 0 <= col < ncols:
        raise ValueError(f"label column {label_column} out of range for {ncols} columns")
    return col


def parse_points(text, has_header=False, label_column=None, source_id=""):
    """Parse comma-delimited numeric text into a :class:`PointSet`."""
    rows = []
    ncols = None
    first_line = None
    reader = csv.reader(io.StringIO(text))
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if has_header and first_line is None:
            first_line = line
            continue
        first_line = first_line or line
        if ncols is None:
            ncols = len(row)
        elif len(row) != ncols:
            raise ParseError(f"expected {ncols} columns, found {len(row)}", line)
        values = []
        for cell in row:
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric cell {cell.strip()!r}", line) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite cell {cell.strip()!r}", line)
            values.append(v)
        rows.append(values)
    if not rows:
        raise ParseError("no data rows", 1)
    data = np.array(rows, dtype=np.float64)
    col = _parse_label_column(label_column, ncols)
    if col is None:
        return PointSet(data, None, source_id)
    if ncols < 2:
        raise ValueError("label column requested but the file has a single column")
    features = np.delete(data, col, axis=1)
    return PointSet(features, data[:, col], source_id)


def load_points(path, has_header=False, label_column=None) -> PointSet:
    """Read a CSV file with one point per row.

    ``label_column`` is a column index (negative counts from the end) or the
    token ``"last"``. Ragged rows, non-numeric cells and empty files raise
    :class:`ParseError` naming the offending line.
    """
    path = Path(path)
    text = path.read_text()
    return parse_points(text, has_header=has_header, label_column=label_column, source_id=str(path))


def format_points(ps: PointSet, header=None) -> str:
    """Serialize a pool to CSV text (labels, if any, go in the last column).

    Values are written with ``repr`` so that reloading reproduces them exactly.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header is not None:
        writer.writerow(header)
    for i in range(ps.n):
        row = [repr(float(v)) for v in ps.points[i]]
        if ps.labels is not None:
            row.append(repr(float(ps.labels[i])))
        writer.writerow(row)
    return buf.getvalue()


def save_points(ps: PointSet, path, header=None):
    Path(path).write_text(format_points(ps, header=header))


def normalize_unit_interval(ps: PointSet) -> PointSet:
    """Rescale every feature column affinely onto [0, 1].

    Constant columns map to 0. Labels are left untouched.
    """
    x = ps.points
    lo = x.min(axis=0)
    span = x.max(axis=0) - lo
    safe = np.where(span > 0, span, 1.0)
    out = (x - lo) / safe
    out[:, span == 0] = 0.0
    # guard against rounding pushing the max a hair above 1
    np.clip(out, 0.0, 1.0, out=out)
    return PointSet(out, ps.labels, ps.source_id)


def drop_duplicate_points(ps: PointSet) -> PointSet:
    """Remove rows whose feature vector repeats an earlier row (first kept)."""
    _, first = np.unique(ps.points, axis=0, return_index=True)
    keep = np.sort(first)
    return ps.subset(keep)


def _truncated_gaussian(rng, center, sigma, count):
    out = np.empty((count, 2))
    filled = 0
    while filled < count:
        need = count - filled
        draw = rng.normal(loc=center, scale=sigma, size=(2 * need + 8, 2))
        ok = draw[np.all((draw >= 0.0) & (draw <= 1.0), axis=1)][:need]
        out[filled:filled + len(ok)] = ok
        filled += len(ok)
    return out


def synth_mixture(spec: MixtureSpec) -> PointSet:
    """Sample the three-component mixture in the unit square.

    Rows come in component order: central cluster, corner cluster, uniform
    background. Gaussian draws falling outside the square are redrawn.
    """
    rng = np.random.default_rng(spec.seed)
    parts = [
        _truncated_gaussian(rng, CENTRAL_CENTER, spec.central_sigma, spec.central_count),
        _truncated_gaussian(rng, CORNER_CENTER, spec.corner_sigma, spec.corner_count),
        rng.uniform(0.0, 1.0, size=(spec.uniform_count, 2)),
    ]
    pts = np.vstack(parts)
    return PointSet(pts, None, f"mixture({spec.central_count},{spec.corner_count},{spec.uniform_count},seed={spec.seed})")
