"""Persistence: event files, bit-exact tensor files, splits, and the label log.

Event files are newline-delimited JSON with a header line carrying the
schema version and class names; one self-describing event per line.
Float values survive a save/load round trip bit-exactly (shortest-repr
JSON floats).

Tensor files ("ATPC" format) are: magic b"ATPC", version byte 0x01, dtype
byte (0x01 = IEEE-754 binary32), rank byte, rank little-endian uint32 dims,
then the row-major little-endian payload.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .simkit import CLASS_NAMES, PointCloudEvent

SCHEMA_VERSION = 1
TENSOR_MAGIC = b"ATPC"
TENSOR_VERSION = 0x01
DTYPE_F32 = 0x01


class FormatError(ValueError):
    """A file does not conform to the expected on-disk format."""


# ---------------------------------------------------------------------------
# Event NDJSON
# ---------------------------------------------------------------------------

def save_events(path: str, events: Sequence[PointCloudEvent],
                class_names: Sequence[str] = CLASS_NAMES) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {"schema_version": SCHEMA_VERSION, "class_names": list(class_names)}
        fh.write(json.dumps(header, separators=(",", ":")) + "\n")
        for ev in events:
            fh.write(_event_to_json(ev) + "\n")


def _event_to_json(ev: PointCloudEvent) -> str:
    record = {
        "id": ev.id,
        "source": ev.source,
        "label": ev.label,
        "points": [[p[0], p[1], p[2], p[3]] for p in ev.points.tolist()],
        "meta": ev.meta,
    }
    return json.dumps(record, separators=(",", ":"))


def load_events(path: str) -> Tuple[List[PointCloudEvent], List[str]]:
    """Events plus the file's class names. Raises FormatError with the
    offending line number on malformed input."""
    events: List[PointCloudEvent] = []
    with open(path, "r", encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise FormatError(f"{path}: missing header line")
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: line 1: invalid header: {exc}") from exc
        version = header.get("schema_version")
        if version != SCHEMA_VERSION:
            raise FormatError(f"{path}: unknown schema version {version!r}")
        class_names = list(header.get("class_names", CLASS_NAMES))
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                pts = np.asarray(rec["points"], dtype=np.float64).reshape(-1, 4)
                events.append(
                    PointCloudEvent(
                        id=rec["id"],
                        points=pts,
                        label=rec.get("label"),
                        source=rec.get("source", "sim"),
                        meta=rec.get("meta", {}),
                    )
                )
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from exc
    return events, class_names


# ---------------------------------------------------------------------------
# ATPC tensor files
# ---------------------------------------------------------------------------

def save_tensor(path: str, array: np.ndarray) -> None:
    arr = np.ascontiguousarray(np.asarray(array), dtype="<f4")
    if arr.ndim > 255:
        raise FormatError("tensor rank exceeds format limit")
    with open(path, "wb") as fh:
        fh.write(TENSOR_MAGIC)
        fh.write(bytes([TENSOR_VERSION, DTYPE_F32, arr.ndim]))
        fh.write(np.asarray(arr.shape, dtype="<u4").tobytes())
        fh.write(arr.tobytes())


def load_tensor(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != TENSOR_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        head = fh.read(3)
        if len(head) != 3:
            raise FormatError(f"{path}: truncated header")
        version, dtype, rank = head
        if version != TENSOR_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        if dtype != DTYPE_F32:
            raise FormatError(f"{path}: unsupported dtype byte {dtype}")
        dim_bytes = fh.read(4 * rank)
        if len(dim_bytes) != 4 * rank:
            raise FormatError(f"{path}: truncated dims")
        dims = np.frombuffer(dim_bytes, dtype="<u4").astype(np.int64)
        payload = fh.read()
        expected = int(np.prod(dims)) * 4 if rank else 4
        if rank == 0:
            expected = 4
        if len(payload) != expected:
            raise FormatError(f"{path}: truncated payload")
        return np.frombuffer(payload, dtype="<f4").reshape(dims).copy()


# ---------------------------------------------------------------------------
# Datasets and splits
# ---------------------------------------------------------------------------

@dataclass
class Dataset:
    """Fixed-length features with integer class labels."""

    features: np.ndarray       # (m, ...) float
    labels: np.ndarray         # (m,) int64
    class_names: List[str]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features and labels disagree on example count")
        if self.m and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise ValueError("labels out of class range")

    @property
    def m(self) -> int:
        return int(self.labels.shape[0])

    def subset(self, indices: np.ndarray, note: Optional[str] = None) -> "Dataset":
        prov = dict(self.provenance)
        if note:
            prov["subset"] = note
        return Dataset(self.features[indices], self.labels[indices],
                       list(self.class_names), prov)


def save_dataset(path_base: str, dataset: Dataset) -> None:
    save_tensor(path_base + ".atpc", dataset.features)
    save_tensor(path_base + ".labels.atpc", dataset.labels.astype(np.float32))
    manifest = {
        "class_names": dataset.class_names,
        "m": dataset.m,
        "feature_dims": list(dataset.features.shape[1:]),
        "provenance": dataset.provenance,
    }
    with open(path_base + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(path_base: str) -> Dataset:
    features = load_tensor(path_base + ".atpc").astype(np.float64)
    labels = load_tensor(path_base + ".labels.atpc").astype(np.int64)
    with open(path_base + ".manifest.json", "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    return Dataset(features, labels, manifest["class_names"],
                   manifest.get("provenance", {}))


@dataclass(frozen=True)
class SplitSpec:
    fractions: Tuple[float, float, float] = (0.7, 0.15, 0.15)
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if any(f < 0 for f in self.fractions):
            raise ValueError("split fractions must be non-negative")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")


def split_indices(m: int, spec: SplitSpec,
                  labels: Optional[np.ndarray] = None) -> Tuple[np.ndarray, ...]:
    """Deterministic disjoint exhaustive index sets (train, val, test)."""
    rng = np.random.default_rng(spec.seed)
    f_train, f_val, _ = spec.fractions

    def slice_perm(perm: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = len(perm)
        b1 = int(round(n * f_train))
        b2 = int(round(n * (f_train + f_val)))
        return perm[:b1], perm[b1:b2], perm[b2:]

    if spec.stratified and labels is not None:
        parts: List[List[np.ndarray]] = [[], [], []]
        for cls in np.unique(labels):
            cls_idx = np.flatnonzero(labels == cls)
            perm = cls_idx[rng.permutation(len(cls_idx))]
            for bucket, sl in zip(parts, slice_perm(perm)):
                bucket.append(sl)
        return tuple(np.sort(np.concatenate(p)) if p else np.array([], dtype=np.int64)
                     for p in parts)
    perm = rng.permutation(m)
    return slice_perm(perm)


def split(dataset: Dataset, spec: SplitSpec) -> Tuple[Dataset, Dataset, Dataset]:
    labels = dataset.labels if spec.stratified else None
    idx_train, idx_val, idx_test = split_indices(dataset.m, spec, labels)
    names = ("train", "validation", "test")
    out = []
    for name, idx, frac in zip(names, (idx_train, idx_val, idx_test), spec.fractions):
        part = dataset.subset(idx, note=name)
        part.provenance["split"] = {
            "part": name, "fraction": frac, "seed": spec.seed,
            "stratified": spec.stratified, "m": int(len(idx)),
        }
        if len(idx) == 0 and frac > 0 and dataset.m > 0:
            part.provenance["split"]["warning"] = (
                f"{name} received 0 examples despite fraction {frac}"
            )
        out.append(part)
    return tuple(out)


# ---------------------------------------------------------------------------
# Label store
# ---------------------------------------------------------------------------

@dataclass
class LabelRecord:
    record_id: str
    event_id: str
    label: Optional[str]
    annotator: str
    timestamp: float
    supersedes: Optional[str] = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "record_id": self.record_id,
                "event_id": self.event_id,
                "label": self.label,
                "annotator": self.annotator,
                "timestamp": self.timestamp,
                "supersedes": self.supersedes,
            },
            separators=(",", ":"),
        )


class LabelStore:
    """Append-only annotation log over an event file.

    The effective label of an event is its latest labeled record that has
    not been superseded by an undo. Writes are serialized; the event file
    itself is never mutated.
    """

    def __init__(self, events: Sequence[PointCloudEvent], log_path: str,
                 class_names: Sequence[str] = CLASS_NAMES):
        self.events = list(events)
        self.class_names = list(class_names)
        self.log_path = log_path
        self._by_id = {ev.id: i for i, ev in enumerate(self.events)}
        self._records: List[LabelRecord] = []
        self._lock = threading.Lock()
        if os.path.exists(log_path):
            self._replay(log_path)

    @classmethod
    def open(cls, events_path: str, log_path: str) -> "LabelStore":
        events, class_names = load_events(events_path)
        return cls(events, log_path, class_names)

    def _replay(self, path: str) -> None:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    self._records.append(LabelRecord(**rec))
                except (json.JSONDecodeError, TypeError) as exc:
                    raise FormatError(f"{path}: line {lineno}: {exc}") from exc

    def _append(self, record: LabelRecord) -> None:
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(record.to_json() + "\n")
        self._records.append(record)

    def _active_record(self, event_id: str) -> Optional[LabelRecord]:
        superseded = {r.supersedes for r in self._records if r.supersedes}
        for rec in reversed(self._records):
            if rec.event_id == event_id and rec.label is not None \
                    and rec.record_id not in superseded:
                return rec
        return None

    def effective_labels(self) -> Dict[str, str]:
        """Replay the log: latest labeled, non-superseded record per event."""
        superseded = {r.supersedes for r in self._records if r.supersedes}
        labels: Dict[str, str] = {}
        for rec in self._records:
            if rec.label is not None and rec.record_id not in superseded:
                labels[rec.event_id] = rec.label
        return labels

    def set_label(self, event_id: str, label: str, annotator: str) -> LabelRecord:
        if event_id not in self._by_id:
            raise KeyError(f"unknown event id {event_id!r}")
        if label not in self.class_names:
            raise ValueError(f"invalid label {label!r}; expected one of {self.class_names}")
        with self._lock:
            record = LabelRecord(
                record_id=f"r{len(self._records):08d}",
                event_id=event_id,
                label=label,
                annotator=annotator,
                timestamp=time.time(),
            )
            self._append(record)
            return record

    def undo(self, event_id: str) -> LabelRecord:
        """Supersede the event's active label record; returns the tombstone."""
        if event_id not in self._by_id:
            raise KeyError(f"unknown event id {event_id!r}")
        with self._lock:
            active = self._active_record(event_id)
            if active is None:
                raise LookupError(f"no label history for event {event_id!r}")
            record = LabelRecord(
                record_id=f"r{len(self._records):08d}",
                event_id=event_id,
                label=None,
                annotator=active.annotator,
                timestamp=time.time(),
                supersedes=active.record_id,
            )
            self._append(record)
            return record

    def next_unlabeled(self) -> Optional[Tuple[int, PointCloudEvent]]:
        labels = self.effective_labels()
        for i, ev in enumerate(self.events):
            if ev.id not in labels:
                return i, ev
        return None

    def progress(self) -> dict:
        labels = self.effective_labels()
        per_class = {name: 0 for name in self.class_names}
        for lab in labels.values():
            per_class[lab] += 1
        return {
            "total": len(self.events),
            "unlabeled": len(self.events) - len(labels),
            "per_class": per_class,
        }

    def export_labeled(self, path: str) -> int:
        """Write labeled events (effective labels filled in) as NDJSON."""
        labels = self.effective_labels()
        out = []
        for ev in self.events:
            if ev.id in labels:
                out.append(replace_label(ev, labels[ev.id]))
        save_events(path, out, self.class_names)
        return len(out)


def replace_label(event: PointCloudEvent, label: str) -> PointCloudEvent:
    return PointCloudEvent(
        id=event.id, points=event.points.copy(), label=label,
        source=event.source, meta=dict(event.meta),
    )
