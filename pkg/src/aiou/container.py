"""Binary map archives ("AIOU v1") and label/prediction CSV ingestion.

Container layout, all little-endian:

    bytes 0-3   magic "AIOU"
    byte  4     version (0x01)
    bytes 5-12  record count, uint64
    per record: uint16 name length, UTF-8 name, 1 kind byte
                (0 attention / 1 mask), uint32 height, uint32 width,
                height*width float32 values, row-major

Payloads are stored in single precision to keep archives small; maps are
promoted to double precision when decoded.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from enum import IntEnum
from typing import BinaryIO, Iterable, Iterator, Optional, TextIO

import numpy as np

from .errors import (
    BadMagicError,
    DuplicateImageIdError,
    DuplicateNameError,
    MissingColumnError,
    NonBinaryLabelError,
    TruncatedRecordError,
    UnknownAttributeError,
    UnsupportedVersionError,
)
from .maps import Map

MAGIC = b"AIOU"
VERSION = 1
_HEADER = struct.Struct("<4sBQ")
_REC_HEAD = struct.Struct("<H")
_REC_DIMS = struct.Struct("<BII")


class MapKind(IntEnum):
    ATTENTION = 0
    MASK = 1


@dataclass(frozen=True)
class MapRecord:
    """A named map inside a container; name is "<image_id>/<attr_or_feature>"."""

    name: str
    kind: MapKind
    map: Map

    def __post_init__(self):
        encoded = self.name.encode("utf-8")
        if not encoded or len(encoded) > 65535:
            raise ValueError("record name must be 1..65535 UTF-8 bytes")
        if self.name.count("/") != 1:
            raise ValueError(f"record name must contain exactly one '/': {self.name!r}")

    @property
    def image_id(self) -> str:
        return self.name.split("/", 1)[0]

    @property
    def feature(self) -> str:
        return self.name.split("/", 1)[1]


@dataclass
class MapContainer:
    version: int
    records: list[MapRecord]

    def by_feature(self, feature: str) -> dict[str, Map]:
        """Maps keyed by image id for one attribute/feature name."""
        return {r.image_id: r.map for r in self.records if r.feature == feature}

    def features(self) -> list[str]:
        seen = dict.fromkeys(r.feature for r in self.records)
        return list(seen)


def write_container(records: Iterable[MapRecord], destination: BinaryIO) -> int:
    """Serialize records; returns the number of bytes written."""
    records = list(records)
    names = set()
    for rec in records:
        if rec.name in names:
            raise DuplicateNameError(f"duplicate record name {rec.name!r}")
        names.add(rec.name)

    written = destination.write(_HEADER.pack(MAGIC, VERSION, len(records)))
    for rec in records:
        name = rec.name.encode("utf-8")
        written += destination.write(_REC_HEAD.pack(len(name)))
        written += destination.write(name)
        written += destination.write(
            _REC_DIMS.pack(int(rec.kind), rec.map.height, rec.map.width)
        )
        payload = np.ascontiguousarray(rec.map.data, dtype="<f4")
        written += destination.write(payload.tobytes())
    return written


def _read_exact(source: BinaryIO, n: int, what: str) -> bytes:
    buf = source.read(n)
    if len(buf) != n:
        raise TruncatedRecordError(f"stream ended while reading {what}")
    return buf


def iter_records(source: BinaryIO) -> Iterator[MapRecord]:
    """Stream records one at a time; holds at most one payload in memory."""
    head = source.read(_HEADER.size)
    if len(head) < 4 or head[:4] != MAGIC:
        raise BadMagicError("stream does not start with AIOU magic")
    if len(head) != _HEADER.size:
        raise TruncatedRecordError("stream ended inside the header")
    _, version, count = _HEADER.unpack(head)
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported container version {version}")

    for _ in range(count):
        (name_len,) = _REC_HEAD.unpack(_read_exact(source, _REC_HEAD.size, "name length"))
        name = _read_exact(source, name_len, "record name").decode("utf-8")
        kind_byte, height, width = _REC_DIMS.unpack(
            _read_exact(source, _REC_DIMS.size, "record dimensions")
        )
        payload = _read_exact(source, 4 * height * width, f"payload of {name!r}")
        data = np.frombuffer(payload, dtype="<f4").reshape(height, width)
        yield MapRecord(name=name, kind=MapKind(kind_byte), map=Map(data))


def read_container(source: BinaryIO) -> MapContainer:
    """Read a whole container, enforcing record-name uniqueness."""
    records = []
    names = set()
    for rec in iter_records(source):
        if rec.name in names:
            raise DuplicateNameError(f"duplicate record name {rec.name!r}")
        names.add(rec.name)
        records.append(rec)
    return MapContainer(version=VERSION, records=records)


# -- label / prediction CSVs -------------------------------------------------


@dataclass
class LabelTable:
    """Per-image binary ground truth with optional prediction scores."""

    image_ids: list[str]
    attributes: list[str]
    ground_truth: np.ndarray  # int8, shape (n_images, n_attributes)
    predictions: Optional[np.ndarray] = None  # float64, same shape
    predicted_labels: Optional[np.ndarray] = None  # int8, same shape
    _id_index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._id_index:
            self._id_index = {img: i for i, img in enumerate(self.image_ids)}

    def attribute_index(self, name: str) -> int:
        try:
            return self.attributes.index(name)
        except ValueError:
            raise UnknownAttributeError(f"attribute {name!r} not in label table") from None

    def row_index(self, image_id: str) -> int:
        return self._id_index[image_id]

    def labels_for(self, attribute: str) -> dict[str, int]:
        col = self.attribute_index(attribute)
        return {img: int(self.ground_truth[i, col]) for i, img in enumerate(self.image_ids)}

    def effective_predicted_labels(self) -> np.ndarray:
        """Predicted labels, thresholding scores at 0.5 when not explicit."""
        if self.predicted_labels is not None:
            return self.predicted_labels
        if self.predictions is None:
            raise MissingColumnError("no predictions available")
        return (self.predictions >= 0.5).astype(np.int8)

    def with_predictions(self, ids: list[str], attrs: list[str], scores: np.ndarray) -> "LabelTable":
        """Attach a prediction table, aligned by image id and attribute name."""
        pred_rows = {img: i for i, img in enumerate(ids)}
        missing = [img for img in self.image_ids if img not in pred_rows]
        if missing:
            raise MissingColumnError(
                f"predictions missing for {len(missing)} image(s), e.g. {missing[0]!r}"
            )
        aligned = np.full((len(self.image_ids), len(self.attributes)), np.nan)
        for j, attr in enumerate(self.attributes):
            if attr not in attrs:
                continue
            src_col = attrs.index(attr)
            for i, img in enumerate(self.image_ids):
                aligned[i, j] = scores[pred_rows[img], src_col]
        return LabelTable(
            image_ids=self.image_ids,
            attributes=self.attributes,
            ground_truth=self.ground_truth,
            predictions=aligned,
        )


def _parse_table(source: TextIO, *, binary: bool):
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise MissingColumnError("empty CSV: no header row") from None
    if not header or header[0] != "image_id":
        raise MissingColumnError("first CSV column must be 'image_id'")
    attributes = header[1:]
    if not attributes:
        raise MissingColumnError("CSV has no attribute columns")

    ids, rows = [], []
    seen = set()
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise MissingColumnError(f"row {line_no} has {len(row)} cells, expected {len(header)}")
        img = row[0]
        if img in seen:
            raise DuplicateImageIdError(f"duplicate image id {img!r}")
        seen.add(img)
        values = []
        for attr, cell in zip(attributes, row[1:]):
            if binary:
                if cell not in ("0", "1"):
                    raise NonBinaryLabelError(
                        f"label {attr}={cell!r} for image {img!r} is not 0/1"
                    )
                values.append(int(cell))
            else:
                values.append(float(cell))
        ids.append(img)
        rows.append(values)
    dtype = np.int8 if binary else np.float64
    return ids, attributes, np.array(rows, dtype=dtype).reshape(len(ids), len(attributes))


def read_labels(source: TextIO) -> LabelTable:
    """Parse a ground-truth label CSV (cells restricted to 0/1)."""
    ids, attributes, values = _parse_table(source, binary=True)
    return LabelTable(image_ids=ids, attributes=attributes, ground_truth=values)


def read_predictions(source: TextIO):
    """Parse a prediction CSV (same schema, real-valued cells)."""
    return _parse_table(source, binary=False)
