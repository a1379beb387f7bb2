"""Readers for task-data, similarity and point files."""

import csv
import math
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .estimators import TaskSamples
from .mtkde import DensityTask


class InputFileError(InvalidInputError):
    """Malformed input file; the message names the file, line and field."""

    def __init__(self, path, line, fieldname, message):
        super().__init__(f"{path}:{line}: field {fieldname!r}: {message}")
        self.path, self.line, self.field = str(path), line, fieldname


def _float(text, path, line, fieldname):
    try:
        x = float(text)
    except ValueError:
        raise InputFileError(path, line, fieldname, f"cannot parse {text!r} as a number") from None
    if not math.isfinite(x):
        raise InputFileError(path, line, fieldname, f"value {text!r} is not finite")
    return x


def _rows(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return list(csv.reader(fh))
    except OSError as exc:
        raise InputFileError(path, 0, "-", f"cannot read file: {exc.strerror}") from None
    except UnicodeDecodeError:
        raise InputFileError(path, 0, "-", "file is not valid UTF-8") from None


def read_task_data(path):
    """Parse a ``task_id,value`` CSV into tasks, ordered by first appearance."""
    rows = _rows(path)
    if not rows or [c.strip() for c in rows[0]] != ["task_id", "value"]:
        raise InputFileError(path, 1, "header", "expected header 'task_id,value'")
    groups = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise InputFileError(path, lineno, "row", f"expected 2 fields, got {len(row)}")
        tid = row[0].strip()
        if not tid:
            raise InputFileError(path, lineno, "task_id", "empty task id")
        groups.setdefault(tid, []).append(_float(row[1], path, lineno, "value"))
    if not groups:
        raise InputFileError(path, 2, "row", "no data rows")
    return [TaskSamples(k, np.array(v)) for k, v in groups.items()]


def read_similarity(path):
    """Parse a labelled square similarity matrix; returns ``(labels, A)``."""
    rows = [r for r in _rows(path) if r]
    if not rows:
        raise InputFileError(path, 1, "header", "empty similarity file")
    labels = [c.strip() for c in rows[0][1:]]
    T = len(labels)
    if T == 0:
        raise InputFileError(path, 1, "header", "no task labels")
    if len(set(labels)) != T:
        raise InputFileError(path, 1, "header", "task labels are not unique")
    if len(rows) - 1 != T:
        raise InputFileError(path, len(rows), "row", f"expected {T} matrix rows, got {len(rows) - 1}")
    A = np.empty((T, T))
    for i, row in enumerate(rows[1:]):
        lineno = i + 2
        if len(row) != T + 1:
            raise InputFileError(path, lineno, "row", f"expected {T + 1} fields, got {len(row)}")
        if row[0].strip() != labels[i]:
            raise InputFileError(
                path, lineno, "label", f"row label {row[0].strip()!r} != column label {labels[i]!r}"
            )
        for j, cell in enumerate(row[1:]):
            x = _float(cell, path, lineno, labels[j])
            if x < 0:
                raise InputFileError(path, lineno, labels[j], f"similarity {x!r} is negative")
            A[i, j] = x
    return labels, A


def align_similarity(labels, A, task_ids):
    """Reorder ``A`` to ``task_ids``; any label mismatch is an error."""
    task_ids = [str(t) for t in task_ids]
    missing = [t for t in task_ids if t not in labels]
    extra = [l for l in labels if l not in task_ids]
    if missing or extra:
        raise InvalidInputError(
            f"similarity labels do not match tasks (missing: {missing}, unknown: {extra})"
        )
    order = [labels.index(t) for t in task_ids]
    return A[np.ix_(order, order)]


def read_points(path):
    """Parse a CSV of points, one per row; a non-numeric first row is a header."""
    rows = [r for r in _rows(path) if r]
    if not rows:
        raise InputFileError(path, 1, "row", "no points")
    start = 0
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        start = 1
    d = len(rows[start]) if start < len(rows) else 0
    pts = []
    for lineno, row in enumerate(rows[start:], start=start + 1):
        if len(row) != d:
            raise InputFileError(path, lineno, "row", f"expected {d} coordinates, got {len(row)}")
        pts.append([_float(c, path, lineno, f"x{j}") for j, c in enumerate(row)])
    if not pts:
        raise InputFileError(path, start + 1, "row", "no points")
    return np.array(pts)


def read_density_tasks(directory):
    """One task per ``*.csv`` file in ``directory``, named by file stem, sorted."""
    directory = Path(directory)
    if not directory.is_dir():
        raise InputFileError(directory, 0, "-", "not a directory")
    files = sorted(directory.glob("*.csv"))
    if not files:
        raise InputFileError(directory, 0, "-", "no .csv task files")
    return [DensityTask(f.stem, read_points(f)) for f in files]
