"""Dataset preparation: manifest cleaning, character dictionary, record store, split.

The record store is a single self-described binary file (see `RecordStore`)
standing in for an embedded database: insertion-ordered records of
(key, label, PNG bytes) with a whole-file CRC32 so corruption is detectable.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
import warnings
import zlib
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    DuplicateKeyError,
    EmptyManifestError,
    ManifestUnreadableError,
    StoreCorruptError,
    StoreIoError,
)

# rejection reason codes emitted by clean_manifest
MALFORMED_LINE = "MALFORMED_LINE"
EMPTY_LABEL = "EMPTY_LABEL"
MISSING_IMAGE = "MISSING_IMAGE"
CORRUPT_IMAGE = "CORRUPT_IMAGE"


@dataclass(frozen=True)
class CharDict:
    """Ordered character<->index mapping; index 0 is the reserved CTC blank.

    Characters occupy indices 1..N in `chars` order.  The serialized form is
    one character per line: line k (1-based) holds the character of index k.
    """

    chars: tuple[str, ...]
    blank_index: int = 0

    def __post_init__(self):
        if len(set(self.chars)) != len(self.chars):
            raise ValueError("duplicate characters in dictionary")
        for ch in self.chars:
            if len(ch) != 1 or ch in ("\n", "\r"):
                raise ValueError(f"invalid dictionary character {ch!r}")

    @classmethod
    def from_chars(cls, chars) -> "CharDict":
        return cls(chars=tuple(chars))

    @classmethod
    def from_labels(cls, labels) -> "CharDict":
        """Distinct label characters sorted by ascending code point."""
        seen = set()
        for label in labels:
            seen.update(label)
        if not seen:
            raise EmptyManifestError("no characters found in labels")
        return cls(chars=tuple(sorted(seen)))

    @cached_property
    def index_of(self) -> dict[str, int]:
        return {ch: i + 1 for i, ch in enumerate(self.chars)}

    @property
    def size(self) -> int:
        return len(self.chars)

    def encode(self, label: str) -> list[int]:
        from .errors import UnknownCharacterError

        try:
            return [self.index_of[ch] for ch in label]
        except KeyError as exc:
            raise UnknownCharacterError(f"character {exc.args[0]!r} not in dictionary")

    def decode(self, indices) -> str:
        return "".join(self.chars[i - 1] for i in indices)

    def serialize(self) -> str:
        return "".join(ch + "\n" for ch in self.chars)

    def digest(self) -> bytes:
        """SHA-256 of the canonical serialization; embedded in checkpoints."""
        return hashlib.sha256(self.serialize().encode("utf-8")).digest()

    def to_file(self, path) -> None:
        Path(path).write_text(self.serialize(), encoding="utf-8")

    @classmethod
    def from_file(cls, path) -> "CharDict":
        text = Path(path).read_text(encoding="utf-8")
        chars = [line for line in text.split("\n") if line != ""]
        return cls(chars=tuple(chars))


@dataclass
class ManifestEntry:
    path: str
    label: str


@dataclass
class Rejection:
    line_no: int
    entry: str
    reason: str


def read_manifest(path) -> list[str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ManifestUnreadableError(f"cannot read manifest {path}: {exc}") from exc
    return [line for line in text.split("\n") if line != ""]


def write_manifest(entries: list[ManifestEntry], path) -> None:
    Path(path).write_text(
        "".join(f"{e.path}\t{e.label}\n" for e in entries), encoding="utf-8"
    )


def clean_manifest(manifest_path, image_root) -> tuple[list[ManifestEntry], list[Rejection]]:
    """Drop malformed lines, empty labels, and missing/undecodable images.

    Returns the surviving entries in manifest order plus one Rejection per
    dropped line with a stable reason code.
    """
    root = Path(image_root)
    kept: list[ManifestEntry] = []
    rejected: list[Rejection] = []
    for line_no, line in enumerate(read_manifest(manifest_path), start=1):
        if line.count("\t") != 1:
            rejected.append(Rejection(line_no, line, MALFORMED_LINE))
            continue
        rel_path, label = line.split("\t")
        if label == "":
            rejected.append(Rejection(line_no, rel_path, EMPTY_LABEL))
            continue
        img_path = root / rel_path
        if not img_path.is_file():
            rejected.append(Rejection(line_no, rel_path, MISSING_IMAGE))
            continue
        try:
            with Image.open(img_path) as img:
                img.load()
        except Exception:
            rejected.append(Rejection(line_no, rel_path, CORRUPT_IMAGE))
            continue
        kept.append(ManifestEntry(path=rel_path, label=label))
    return kept, rejected


def build_dict(entries: list[ManifestEntry]) -> CharDict:
    if not entries:
        raise EmptyManifestError("cannot build a dictionary from an empty manifest")
    return CharDict.from_labels(e.label for e in entries)


_MAGIC = b"OCRS"
_VERSION = 1


class RecordStore:
    """Single-file container of (key, label, PNG image bytes) records.

    Layout, little-endian: magic `OCRS`, u32 version, u64 count, then per
    record key_len u32 + key, label_len u32 + label, img_len u64 + image
    bytes, and finally a CRC32 (u32) of all preceding bytes.
    """

    def __init__(self, path, keys, offsets, blob):
        self.path = Path(path)
        self._keys = keys            # insertion order
        self._offsets = offsets      # key -> (label, img_offset, img_len)
        self._blob = blob            # whole file, kept resident at desk scale

    # -- writing --

    @classmethod
    def pack(cls, records, path) -> "RecordStore":
        """Write records ((key, label, image_bytes) triples) to `path`."""
        path = Path(path)
        seen = set()
        body = io.BytesIO()
        count = 0
        for key, label, img in records:
            if key in seen:
                raise DuplicateKeyError(f"duplicate record key {key!r}")
            seen.add(key)
            kb = key.encode("utf-8")
            lb = label.encode("utf-8")
            body.write(struct.pack("<I", len(kb)))
            body.write(kb)
            body.write(struct.pack("<I", len(lb)))
            body.write(lb)
            body.write(struct.pack("<Q", len(img)))
            body.write(img)
            count += 1
        blob = _MAGIC + struct.pack("<IQ", _VERSION, count) + body.getvalue()
        blob += struct.pack("<I", zlib.crc32(blob))
        try:
            path.write_bytes(blob)
        except OSError as exc:
            raise StoreIoError(f"cannot write store {path}: {exc}") from exc
        return cls.open(path)

    @classmethod
    def pack_manifest(cls, entries, image_root, path) -> "RecordStore":
        """Pack cleaned manifest entries; keys are the manifest image paths."""
        root = Path(image_root)

        def records():
            for e in entries:
                try:
                    img = (root / e.path).read_bytes()
                except OSError as exc:
                    raise StoreIoError(f"cannot read image {e.path}: {exc}") from exc
                yield e.path, e.label, img

        return cls.pack(records(), path)

    # -- reading --

    @classmethod
    def open(cls, path) -> "RecordStore":
        path = Path(path)
        try:
            blob = path.read_bytes()
        except OSError as exc:
            raise StoreIoError(f"cannot read store {path}: {exc}") from exc
        if len(blob) < 20 or blob[:4] != _MAGIC:
            raise StoreCorruptError(f"{path} is not a record store")
        (crc,) = struct.unpack("<I", blob[-4:])
        if zlib.crc32(blob[:-4]) != crc:
            raise StoreCorruptError(f"{path} failed CRC validation")
        (version, count) = struct.unpack("<IQ", blob[4:16])
        if version != _VERSION:
            raise StoreCorruptError(f"{path} has unsupported version {version}")
        keys = []
        offsets = {}
        pos = 16
        end = len(blob) - 4
        try:
            for _ in range(count):
                (klen,) = struct.unpack_from("<I", blob, pos)
                pos += 4
                key = blob[pos:pos + klen].decode("utf-8")
                pos += klen
                (llen,) = struct.unpack_from("<I", blob, pos)
                pos += 4
                label = blob[pos:pos + llen].decode("utf-8")
                pos += llen
                (ilen,) = struct.unpack_from("<Q", blob, pos)
                pos += 8
                if pos + ilen > end:
                    raise StoreCorruptError(f"{path} record overruns file")
                if key in offsets:
                    raise DuplicateKeyError(f"duplicate record key {key!r}")
                keys.append(key)
                offsets[key] = (label, pos, ilen)
                pos += ilen
        except (struct.error, UnicodeDecodeError) as exc:
            raise StoreCorruptError(f"{path} is truncated or garbled: {exc}") from exc
        if pos != end:
            raise StoreCorruptError(f"{path} has trailing garbage")
        return cls(path, keys, offsets, blob)

    @property
    def count(self) -> int:
        return len(self._keys)

    def keys(self) -> list[str]:
        return list(self._keys)

    def get(self, key: str) -> tuple[str, bytes]:
        """Return (label, image_bytes) for one key."""
        label, off, ilen = self._offsets[key]
        return label, self._blob[off:off + ilen]

    def records(self):
        """Iterate (key, label, image_bytes) in insertion order."""
        for key in self._keys:
            label, off, ilen = self._offsets[key]
            yield key, label, self._blob[off:off + ilen]

    def label(self, key: str) -> str:
        return self._offsets[key][0]

    def load_image(self, key: str) -> np.ndarray:
        """Decode one record's PNG into an RGB uint8 array."""
        _, img = self.get(key)
        with Image.open(io.BytesIO(img)) as im:
            return np.asarray(im.convert("RGB"))


@dataclass
class SplitSpec:
    train_ids: list[str]
    val_ids: list[str]
    ratio: tuple[int, int]
    seed: int

    def to_file(self, path) -> None:
        Path(path).write_text(
            json.dumps(
                {
                    "train": self.train_ids,
                    "val": self.val_ids,
                    "ratio": list(self.ratio),
                    "seed": self.seed,
                },
                indent=1,
            ),
            encoding="utf-8",
        )

    @classmethod
    def from_file(cls, path) -> "SplitSpec":
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            train_ids=list(d["train"]),
            val_ids=list(d["val"]),
            ratio=(d["ratio"][0], d["ratio"][1]),
            seed=int(d["seed"]),
        )


def split(ids, ratio: tuple[int, int] = (10, 1), seed: int = 0) -> SplitSpec:
    """Seeded shuffle, then partition with |val| = floor(N * r_val / (r_train + r_val)).

    The validation side takes the front of the shuffled order; the remainder
    trains.  Empty validation (N too small) is allowed but warned about.
    """
    ids = list(ids)
    r_train, r_val = ratio
    n_val = len(ids) * r_val // (r_train + r_val)
    rng = np.random.default_rng(np.random.SeedSequence([0x5711, seed]))
    order = rng.permutation(len(ids))
    shuffled = [ids[i] for i in order]
    if n_val == 0:
        warnings.warn(
            f"{len(ids)} samples yield an empty validation split at ratio {ratio}",
            stacklevel=2,
        )
    return SplitSpec(
        train_ids=shuffled[n_val:], val_ids=shuffled[:n_val], ratio=ratio, seed=seed
    )
