"""Dataset manifests, the prediction interchange format, and reports.

Predictions travel as JSON lines so any model, in any framework or process,
can feed the analysis pipeline.  One line per record, fixed key order, with
optional logits and an optional penultimate-layer feature vector encoded as
base64 over little-endian float32 bytes.  Serialization is deterministic:
writing the same records twice yields byte-identical files.

Accuracy tables group records by (model_id, view); reports are JSON objects
with the fixed top-level keys ``schema_version, config, scores, correlations,
fisher, notes``.
"""

from __future__ import annotations

import base64
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .errors import (DataError, DimensionMismatch, DuplicateRecord,
                     EmptyDataset, ParseError)

VIEWS = ("train_orig", "train_contre", "test_orig", "test_contre")

SCHEMA_VERSION = 1

REPORT_KEYS = ("schema_version", "config", "scores", "correlations",
               "fisher", "notes")

_ID_CHARS = frozenset(
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789._-")


# --- dataset manifests -------------------------------------------------------

class ManifestRow(NamedTuple):
    sample_id: str
    path: str
    label: int


def _check_sample_id(sample_id: str, where: str) -> None:
    if not sample_id or not set(sample_id) <= _ID_CHARS:
        raise ParseError(f"sample_id {sample_id!r} must be non-empty and use "
                         f"only [A-Za-z0-9._-]", path=where)


def read_manifest(path: str | os.PathLike) -> list[ManifestRow]:
    """Read a dataset manifest (columns sample_id, path, label).

    Relative image paths are resolved against the manifest's directory, so a
    manifest can travel with its images.
    """
    p = Path(path)
    text = p.read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0] != "sample_id,path,label":
        raise ParseError("expected header 'sample_id,path,label'",
                         path=str(p), line_no=1)
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ParseError(f"expected 3 columns, got {len(parts)}",
                             path=str(p), line_no=i)
        sid, img_path, label_text = parts
        _check_sample_id(sid, f"{p}:{i}")
        try:
            label = int(label_text)
        except ValueError:
            raise ParseError(f"label {label_text!r} is not an integer",
                             path=str(p), line_no=i) from None
        if label < 0:
            raise ParseError(f"label must be >= 0, got {label}",
                             path=str(p), line_no=i)
        if not os.path.isabs(img_path):
            img_path = str(p.parent / img_path)
        rows.append(ManifestRow(sample_id=sid, path=img_path, label=label))
    if not rows:
        raise EmptyDataset(f"{p}: manifest has no rows")
    return rows


def write_manifest(rows: Iterable[ManifestRow], path: str | os.PathLike) -> None:
    """Write a dataset manifest; image paths are written as given."""
    lines = ["sample_id,path,label"]
    for row in rows:
        lines.append(f"{row.sample_id},{row.path},{row.label}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# --- prediction records ------------------------------------------------------

@dataclass
class PredictionRecord:
    """One model's output on one view of one sample.

    ``view_index`` is 0 for original images and >= 1 for contrastive views.
    ``feature`` is the penultimate-layer activation (float32); when present,
    ``feature_dim`` must state its length.
    """

    model_id: str
    view: str
    sample_id: str
    view_index: int
    label: int
    pred: int
    logits: tuple[float, ...] | None = None
    feature: np.ndarray | None = None
    feature_dim: int | None = None

    def __eq__(self, other):
        if not isinstance(other, PredictionRecord):
            return NotImplemented
        if (self.model_id, self.view, self.sample_id, self.view_index,
                self.label, self.pred, self.logits, self.feature_dim) != \
           (other.model_id, other.view, other.sample_id, other.view_index,
                other.label, other.pred, other.logits, other.feature_dim):
            return False
        if (self.feature is None) != (other.feature is None):
            return False
        return self.feature is None or np.array_equal(self.feature,
                                                      other.feature)


def encode_feature(feature: np.ndarray) -> str:
    """Base64 of the vector's little-endian float32 bytes."""
    arr = np.asarray(feature, dtype="<f4").ravel()
    return base64.b64encode(arr.tobytes()).decode("ascii")


def decode_feature(text: str) -> np.ndarray:
    raw = base64.b64decode(text.encode("ascii"), validate=True)
    if len(raw) % 4 != 0:
        raise ValueError(f"feature payload is {len(raw)} bytes, "
                         f"not a multiple of 4")
    return np.frombuffer(raw, dtype="<f4").astype(np.float32)


def validate_record(rec: PredictionRecord, path: str | None = None,
                    line_no: int | None = None) -> None:
    """Check every invariant a record must satisfy."""
    def fail(reason: str, cls=ParseError):
        raise cls(reason, path=path, line_no=line_no)

    if not rec.model_id:
        fail("model_id must be non-empty")
    if rec.view not in VIEWS:
        fail(f"view {rec.view!r} not one of {VIEWS}")
    if not rec.sample_id or not set(rec.sample_id) <= _ID_CHARS:
        fail(f"sample_id {rec.sample_id!r} must be non-empty and use only "
             f"[A-Za-z0-9._-]")
    if rec.view_index < 0:
        fail(f"view_index must be >= 0, got {rec.view_index}")
    if rec.view.endswith("_orig") and rec.view_index != 0:
        fail(f"view {rec.view} requires view_index 0, got {rec.view_index}")
    if rec.view.endswith("_contre") and rec.view_index < 1:
        fail(f"view {rec.view} requires view_index >= 1, "
             f"got {rec.view_index}")
    if rec.label < 0:
        fail(f"label must be >= 0, got {rec.label}")
    if rec.pred < 0:
        fail(f"pred must be >= 0, got {rec.pred}")
    if rec.logits is not None:
        if len(rec.logits) == 0:
            fail("logits must be non-empty when present")
        if rec.pred >= len(rec.logits) or rec.label >= len(rec.logits):
            fail(f"pred {rec.pred} / label {rec.label} out of range for "
                 f"{len(rec.logits)} logits")
        for v in rec.logits:
            if not np.isfinite(v):
                fail(f"logits contain non-finite value {v!r}")
    if rec.feature is not None:
        if rec.feature_dim is None:
            fail("feature requires feature_dim")
        if rec.feature.shape != (rec.feature_dim,):
            fail(f"feature has {rec.feature.shape[0]} values but "
                 f"feature_dim is {rec.feature_dim}", DimensionMismatch)
    elif rec.feature_dim is not None:
        fail("feature_dim without feature")


def _record_to_json(rec: PredictionRecord) -> str:
    obj: dict = {
        "model_id": rec.model_id,
        "view": rec.view,
        "sample_id": rec.sample_id,
        "view_index": rec.view_index,
        "label": rec.label,
        "pred": rec.pred,
    }
    if rec.logits is not None:
        obj["logits"] = list(rec.logits)
    if rec.feature is not None:
        obj["feature"] = encode_feature(rec.feature)
        obj["feature_dim"] = rec.feature_dim
    return json.dumps(obj, separators=(",", ":"))


def write_predictions(records: Iterable[PredictionRecord],
                      path: str | os.PathLike) -> None:
    """Write records as JSON lines; key order and float text are fixed, so
    the same records always produce byte-identical files."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            validate_record(rec)
            fh.write(_record_to_json(rec))
            fh.write("\n")


def read_predictions(path: str | os.PathLike) -> Iterator[PredictionRecord]:
    """Stream records from a JSON-lines file, validating each one.

    Malformed lines raise ParseError (or DimensionMismatch for feature
    payloads that disagree with feature_dim) carrying the path and 1-based
    line number.
    """
    spath = os.fspath(path)
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", path=spath,
                                 line_no=line_no) from None
            if not isinstance(obj, dict):
                raise ParseError("record is not a JSON object", path=spath,
                                 line_no=line_no)
            yield _record_from_obj(obj, spath, line_no)


def _record_from_obj(obj: dict, path: str, line_no: int) -> PredictionRecord:
    def field(name, kind, required=True, default=None):
        if name not in obj:
            if required:
                raise ParseError(f"missing field {name!r}", path=path,
                                 line_no=line_no)
            return default
        value = obj[name]
        if kind is int and isinstance(value, bool):
            raise ParseError(f"field {name!r} must be an integer", path=path,
                             line_no=line_no)
        if not isinstance(value, kind):
            raise ParseError(f"field {name!r} has type "
                             f"{type(value).__name__}, expected "
                             f"{kind.__name__}", path=path, line_no=line_no)
        return value

    logits = None
    if "logits" in obj:
        raw = field("logits", list)
        logits = []
        for v in raw:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ParseError("logits must be numbers", path=path,
                                 line_no=line_no)
            logits.append(float(v))
        logits = tuple(logits)
    feature = None
    if "feature" in obj:
        try:
            feature = decode_feature(field("feature", str))
        except ValueError as exc:
            raise ParseError(f"bad feature payload: {exc}", path=path,
                             line_no=line_no) from None
    rec = PredictionRecord(
        model_id=field("model_id", str),
        view=field("view", str),
        sample_id=field("sample_id", str),
        view_index=field("view_index", int),
        label=field("label", int),
        pred=field("pred", int),
        logits=logits,
        feature=feature,
        feature_dim=field("feature_dim", int, required=False),
    )
    validate_record(rec, path=path, line_no=line_no)
    return rec


# --- accuracy tables ---------------------------------------------------------

class ScoreRow(NamedTuple):
    model_id: str
    accuracy: float
    sample_count: int


@dataclass(frozen=True)
class ScoreTable:
    view: str
    rows: tuple[ScoreRow, ...]


def score(records: Iterable[PredictionRecord]) -> list[ScoreTable]:
    """Accuracy per (model, view): exact fraction of records with pred ==
    label.  Record order never matters; duplicate (model_id, view,
    sample_id, view_index) keys raise DuplicateRecord."""
    seen: set[tuple[str, str, str, int]] = set()
    counts: dict[tuple[str, str], list[int]] = {}
    for rec in records:
        key = (rec.model_id, rec.view, rec.sample_id, rec.view_index)
        if key in seen:
            raise DuplicateRecord(f"duplicate record for {key}")
        seen.add(key)
        correct_total = counts.setdefault((rec.model_id, rec.view), [0, 0])
        correct_total[0] += int(rec.pred == rec.label)
        correct_total[1] += 1
    if not counts:
        raise EmptyDataset("no prediction records to score")
    tables = []
    present = sorted({view for _, view in counts},
                     key=lambda v: VIEWS.index(v))
    for view in present:
        rows = tuple(ScoreRow(model_id=m, accuracy=c[0] / c[1],
                              sample_count=c[1])
                     for (m, v), c in sorted(counts.items()) if v == view)
        tables.append(ScoreTable(view=view, rows=rows))
    return tables


def score_files(paths: Iterable[str | os.PathLike]) -> list[ScoreTable]:
    """Score every record across one or more prediction files."""
    def stream():
        for path in paths:
            yield from read_predictions(path)
    return score(stream())


# --- reports -----------------------------------------------------------------

def write_report(report: dict, path: str | os.PathLike) -> None:
    """Persist a report dict as indented JSON (stable key order as built).

    The top-level keys must be exactly ``REPORT_KEYS``.  No timestamps or
    absolute paths belong in a report; given equal content the bytes written
    are always identical.
    """
    if tuple(report.keys()) != REPORT_KEYS:
        raise DataError(f"report keys must be exactly {REPORT_KEYS}, "
                        f"got {tuple(report.keys())}")
    text = json.dumps(report, indent=2, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def read_report(path: str | os.PathLike) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        report = json.load(fh)
    if not isinstance(report, dict) or \
            tuple(report.keys()) != REPORT_KEYS:
        raise ParseError(f"not a report: top-level keys must be "
                         f"{REPORT_KEYS}", path=os.fspath(path))
    return report
