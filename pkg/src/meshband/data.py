"""Region signal ingestion, session bookkeeping and on-disk formats.

Two on-disk layouts are supported:

``csv``
    A directory holding one ``subject_<id>.csv`` per subject (R rows by T
    columns, no header) and a ``sessions.csv`` table with columns
    ``subject_id,task_label,n_scans`` listed in timeline order. A subject may
    instead be given as a directory ``subject_<id>/`` of ``region_<r>.csv``
    voxel matrices, in which case each region is averaged over its voxels.
    An optional ``regions.txt`` carries one region name per line.

``bin``
    A single little-endian container (see :func:`write_container`).
"""

from __future__ import annotations

import csv
import json
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

MAGIC = b"MSHB"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHHI")


class ParseError(ValueError):
    """Raised when an input file is malformed or inconsistent."""


@dataclass(frozen=True)
class SessionSpec:
    """One task session inside a subject's concatenated timeline.

    ``task_label`` is 1-based, as in the files.
    """

    task_label: int
    n_scans: int
    offset: int

    def __post_init__(self):
        if self.n_scans <= 0:
            raise ValueError(f"n_scans must be positive, got {self.n_scans}")
        if self.offset < 0:
            raise ValueError(f"offset must be non-negative, got {self.offset}")

    @property
    def stop(self) -> int:
        return self.offset + self.n_scans


def sessions_from_scans(labels: Sequence[int], scans: Sequence[int]) -> tuple[SessionSpec, ...]:
    """Lay sessions end to end starting at offset 0."""
    out = []
    offset = 0
    for label, n in zip(labels, scans):
        out.append(SessionSpec(int(label), int(n), offset))
        offset += int(n)
    return tuple(out)


@dataclass(frozen=True, eq=False)
class SubjectRecord:
    subject_id: str
    series: np.ndarray
    sessions: tuple[SessionSpec, ...]

    def __post_init__(self):
        series = np.array(self.series, dtype=np.float64)
        if series.ndim != 2:
            raise ValueError(f"subject {self.subject_id}: series must be 2-D (R x T)")
        if not np.all(np.isfinite(series)):
            r, t = np.argwhere(~np.isfinite(series))[0]
            raise ValueError(f"subject {self.subject_id}: non-finite value at region {r}, scan {t}")
        series.setflags(write=False)
        object.__setattr__(self, "series", series)
        object.__setattr__(self, "sessions", tuple(self.sessions))
        _check_sessions(self.subject_id, self.sessions, series.shape[1])

    @property
    def n_regions(self) -> int:
        return self.series.shape[0]

    @property
    def n_scans(self) -> int:
        return self.series.shape[1]


def _check_sessions(subject_id, sessions, total):
    if not sessions:
        raise ValueError(f"subject {subject_id}: no sessions")
    expected = 0
    for s in sessions:
        if s.offset != expected:
            raise ValueError(
                f"subject {subject_id}: session offsets must tile the timeline "
                f"(expected offset {expected}, got {s.offset})"
            )
        expected = s.stop
    if expected != total:
        raise ValueError(
            f"subject {subject_id}: sessions cover {expected} scans but series has {total}"
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    subjects: tuple[SubjectRecord, ...]
    n_classes: int
    region_names: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "subjects", tuple(self.subjects))
        if self.region_names is not None:
            object.__setattr__(self, "region_names", tuple(self.region_names))
        if not self.subjects:
            raise ValueError("dataset has no subjects")
        n_regions = {s.n_regions for s in self.subjects}
        if len(n_regions) != 1:
            raise ValueError(f"inconsistent region counts across subjects: {sorted(n_regions)}")
        ids = [s.subject_id for s in self.subjects]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate subject ids")
        seen = set()
        for subj in self.subjects:
            for sess in subj.sessions:
                if not 1 <= sess.task_label <= self.n_classes:
                    raise ValueError(
                        f"subject {subj.subject_id}: task label {sess.task_label} "
                        f"outside [1, {self.n_classes}]"
                    )
                seen.add(sess.task_label)
        missing = set(range(1, self.n_classes + 1)) - seen
        if missing:
            raise ValueError(f"no sessions for classes {sorted(missing)}")
        if self.region_names is not None and len(self.region_names) != self.n_regions:
            raise ValueError("region_names length does not match R")

    @property
    def n_regions(self) -> int:
        return self.subjects[0].n_regions

    @property
    def subject_ids(self) -> list[str]:
        return [s.subject_id for s in self.subjects]

    def session_index(self) -> list[tuple[str, int, SessionSpec]]:
        """Flat ``(subject_id, q, session)`` list in subject then timeline order."""
        return [
            (subj.subject_id, q, sess)
            for subj in self.subjects
            for q, sess in enumerate(subj.sessions)
        ]

    def equals(self, other: "Dataset") -> bool:
        if self.n_classes != other.n_classes or self.region_names != other.region_names:
            return False
        if len(self.subjects) != len(other.subjects):
            return False
        for a, b in zip(self.subjects, other.subjects):
            if a.subject_id != b.subject_id or a.sessions != b.sessions:
                return False
            if a.series.shape != b.series.shape or not np.array_equal(a.series, b.series):
                return False
        return True


def region_average(voxel_matrix) -> np.ndarray:
    """Mean over the voxels (rows) of a region, one value per scan."""
    voxels = np.asarray(voxel_matrix, dtype=np.float64)
    if voxels.ndim == 1:
        voxels = voxels[None, :]
    if voxels.ndim != 2 or voxels.shape[0] == 0 or voxels.shape[1] == 0:
        raise ValueError("no voxels in region")
    if not np.all(np.isfinite(voxels)):
        raise ValueError("non-finite voxel value")
    return voxels.sum(axis=0) / voxels.shape[0]


def subject_from_voxels(subject_id: str, regions: Sequence, sessions) -> SubjectRecord:
    """Build a subject from per-region voxel matrices (each V_r x T)."""
    series = np.vstack([region_average(v) for v in regions])
    return SubjectRecord(subject_id, series, tuple(sessions))


def slice_session(signal, spec: SessionSpec) -> np.ndarray:
    """Window ``[offset, offset + n_scans)`` along the last axis."""
    signal = np.asarray(signal)
    total = signal.shape[-1]
    if spec.stop > total:
        raise ValueError(
            f"session window [{spec.offset}, {spec.stop}) exceeds signal length {total}"
        )
    return signal[..., spec.offset:spec.stop]


# --------------------------------------------------------------------------
# binary container


def write_container(path, arrays: Mapping[str, np.ndarray], meta: Mapping | None = None) -> None:
    """Write named float64 arrays behind a JSON header.

    Layout: ``b"MSHB"``, uint16 version, uint16 reserved, uint32 header
    length, UTF-8 JSON header, then each array as little-endian float64 in
    row-major order, in header order.
    """
    entries = []
    blobs = []
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr, dtype="<f8")
        entries.append({"name": name, "shape": list(a.shape)})
        blobs.append(a.tobytes(order="C"))
    header = json.dumps({"arrays": entries, "meta": dict(meta or {})}, sort_keys=True,
                        separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, 0, len(header)))
        fh.write(header)
        for b in blobs:
            fh.write(b)


def read_container(path) -> tuple[dict[str, np.ndarray], dict]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ParseError(f"{path}: truncated header")
    magic, version, _, hlen = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ParseError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ParseError(f"{path}: unsupported container version {version}")
    start = _HEADER.size
    try:
        header = json.loads(raw[start:start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: corrupt header ({exc})") from exc
    pos = start + hlen
    arrays = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        nbytes = 8 * count
        if pos + nbytes > len(raw):
            raise ParseError(f"{path}: array {entry['name']!r} truncated")
        arrays[entry["name"]] = np.frombuffer(raw, dtype="<f8", count=count, offset=pos).reshape(shape).copy()
        pos += nbytes
    if pos != len(raw):
        raise ParseError(f"{path}: {len(raw) - pos} trailing bytes")
    return arrays, header["meta"]


# --------------------------------------------------------------------------
# dataset IO

_SUBJECT_FILE = re.compile(r"^subject_(.+)\.csv$")
_SUBJECT_DIR = re.compile(r"^subject_(.+)$")
_REGION_FILE = re.compile(r"^region_(\d+)\.csv$")


def save_dataset(dataset: Dataset, path, format: str = "csv") -> None:
    path = Path(path)
    if format == "bin":
        arrays = {f"subject/{s.subject_id}": s.series for s in dataset.subjects}
        meta = {
            "kind": "dataset",
            "n_classes": dataset.n_classes,
            "region_names": list(dataset.region_names) if dataset.region_names else None,
            "subjects": [
                {
                    "id": s.subject_id,
                    "R": s.n_regions,
                    "T": s.n_scans,
                    "sessions": [[x.task_label, x.n_scans, x.offset] for x in s.sessions],
                }
                for s in dataset.subjects
            ],
        }
        write_container(path, arrays, meta)
        return
    if format not in ("csv", "csv-dir"):
        raise ValueError(f"unknown dataset format {format!r}")
    path.mkdir(parents=True, exist_ok=True)
    with open(path / "sessions.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject_id", "task_label", "n_scans"])
        for s in dataset.subjects:
            for sess in s.sessions:
                w.writerow([s.subject_id, sess.task_label, sess.n_scans])
    for s in dataset.subjects:
        np.savetxt(path / f"subject_{s.subject_id}.csv", s.series, delimiter=",", fmt="%.17g")
    if dataset.region_names:
        (path / "regions.txt").write_text("\n".join(dataset.region_names) + "\n")


def load_dataset(path, format: str | None = None) -> Dataset:
    """Load a dataset in ``csv`` (directory) or ``bin`` (single file) format.

    ``format=None`` picks ``csv`` for directories and ``bin`` otherwise.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    if format is None:
        format = "csv" if path.is_dir() else "bin"
    if format == "bin":
        return _load_bin(path)
    if format in ("csv", "csv-dir"):
        return _load_csv_dir(path)
    raise ValueError(f"unknown dataset format {format!r}")


def _load_bin(path: Path) -> Dataset:
    arrays, meta = read_container(path)
    if meta.get("kind") != "dataset":
        raise ParseError(f"{path}: container does not hold a dataset")
    subjects = []
    for entry in meta["subjects"]:
        series = arrays[f"subject/{entry['id']}"]
        sessions = tuple(SessionSpec(int(a), int(b), int(c)) for a, b, c in entry["sessions"])
        try:
            subjects.append(SubjectRecord(entry["id"], series, sessions))
        except ValueError as exc:
            raise ParseError(f"{path}: {exc}") from exc
    names = meta.get("region_names")
    try:
        return Dataset(tuple(subjects), int(meta["n_classes"]), tuple(names) if names else None)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def _read_matrix_csv(path: Path) -> np.ndarray:
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(f"{path}:{lineno}: expected {width} columns, found {len(row)}")
            vals = []
            for col, cell in enumerate(row, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: column {col}: not a number: {cell!r}") from None
                if not np.isfinite(v):
                    raise ParseError(f"{path}:{lineno}: column {col}: non-finite value {cell!r}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise ParseError(f"{path}: empty matrix")
    return np.array(rows, dtype=np.float64)


def _read_sessions_csv(path: Path) -> dict[str, list[tuple[int, int]]]:
    table: dict[str, list[tuple[int, int]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row:
                continue
            if lineno == 1 and row[0].strip() == "subject_id":
                continue
            if len(row) != 3:
                raise ParseError(f"{path}:{lineno}: expected 3 columns, found {len(row)}")
            sid = row[0].strip()
            try:
                label, n = int(row[1]), int(row[2])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: task_label and n_scans must be integers") from None
            if label < 1:
                raise ParseError(f"{path}:{lineno}: unknown task label {label}")
            if n < 1:
                raise ParseError(f"{path}:{lineno}: n_scans must be positive")
            table.setdefault(sid, []).append((label, n))
    return table


def _load_csv_dir(path: Path) -> Dataset:
    sessions_path = path / "sessions.csv"
    if not sessions_path.exists():
        raise ParseError(f"{path}: missing sessions.csv")
    table = _read_sessions_csv(sessions_path)
    series_by_id: dict[str, np.ndarray] = {}
    for entry in sorted(path.iterdir()):
        m = _SUBJECT_FILE.match(entry.name)
        if m and entry.is_file():
            series_by_id[m.group(1)] = _read_matrix_csv(entry)
            continue
        m = _SUBJECT_DIR.match(entry.name)
        if m and entry.is_dir():
            regions = sorted(
                (int(_REGION_FILE.match(f.name).group(1)), f)
                for f in entry.iterdir() if _REGION_FILE.match(f.name)
            )
            if not regions:
                raise ParseError(f"{entry}: no region_<r>.csv files")
            try:
                series_by_id[m.group(1)] = np.vstack([region_average(_read_matrix_csv(f)) for _, f in regions])
            except ValueError as exc:
                if isinstance(exc, ParseError):
                    raise
                raise ParseError(f"{entry}: {exc}") from exc
    unknown = set(table) - set(series_by_id)
    if unknown:
        raise ParseError(f"{sessions_path}: sessions for unknown subjects {sorted(unknown)}")
    subjects = []
    n_regions = None
    for sid in table:
        series = series_by_id[sid]
        if n_regions is None:
            n_regions = series.shape[0]
        elif series.shape[0] != n_regions:
            raise ParseError(
                f"{path / f'subject_{sid}.csv'}: shape mismatch, {series.shape[0]} regions "
                f"where previous subjects have {n_regions}"
            )
        labels, scans = zip(*table[sid])
        try:
            subjects.append(SubjectRecord(sid, series, sessions_from_scans(labels, scans)))
        except ValueError as exc:
            raise ParseError(f"{path}: {exc}") from exc
    names = None
    if (path / "regions.txt").exists():
        names = tuple(line for line in (path / "regions.txt").read_text().splitlines() if line)
    n_classes = max(label for rows in table.values() for label, _ in rows)
    try:
        return Dataset(tuple(subjects), n_classes, names)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc
