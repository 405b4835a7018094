"""Persistence of fused multimodal token matrices with placeholder metadata.

An archive is a directory holding ``manifest.json`` plus one tensor file per
video. Tensor file layout (no padding between fields):

    magic "FSTK" | u32 LE version=1 | u8 rank | rank x u64 LE dims |
    row-major f32 LE payload

Decoupling splits a fused (L x D) token matrix back into visual tokens
(T x L_sp x D, frame-major) and textual tokens (L_t x D) using the recorded
placeholder positions; fusing is its exact inverse.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError

TENSOR_MAGIC = b"FSTK"
TENSOR_VERSION = 1
MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1

SPLITS = ("train", "val", "test")
PROMPT_MODES = ("unknown", "known-support", "known-query")


# -- tensor files --------------------------------------------------------------


def write_tensor(path, array: np.ndarray) -> None:
    """Write a float array as f32 little-endian with a shape header."""
    arr = np.ascontiguousarray(array, dtype="<f4")
    header = TENSOR_MAGIC + struct.pack("<IB", TENSOR_VERSION, arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.tobytes())


def read_tensor(path) -> np.ndarray:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read tensor file {path}: {exc}") from exc
    if len(blob) < 9 or blob[:4] != TENSOR_MAGIC:
        raise FormatError(f"{path}: bad magic")
    version, rank = struct.unpack_from("<IB", blob, 4)
    if version != TENSOR_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    offset = 9
    if len(blob) < offset + 8 * rank:
        raise FormatError(f"{path}: truncated header")
    dims = struct.unpack_from(f"<{rank}Q", blob, offset)
    offset += 8 * rank
    count = int(np.prod(dims, dtype=np.int64)) if rank else 1
    expected = offset + 4 * count
    if len(blob) != expected:
        raise FormatError(f"{path}: payload length {len(blob) - offset} != {4 * count}")
    data = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
    return data.reshape(dims).copy()


# -- records -------------------------------------------------------------------


@dataclass
class VideoRecord:
    """One video's fused tokens plus the metadata needed to decouple them."""

    video_id: str
    class_label: str
    split: str
    prompt_mode: str
    tokens: np.ndarray                 # (L, D)
    placeholder_indices: np.ndarray    # sorted, unique, len == frames * spatial_len
    frames: int
    spatial_len: int
    text_len: int
    source_layer: int = -1
    source_model: str = "synthetic"

    def violations(self) -> list[str]:
        out = []
        idx = np.asarray(self.placeholder_indices)
        length = self.tokens.shape[0]
        if self.tokens.ndim != 2:
            out.append(f"{self.video_id}: tokens must be rank 2")
            return out
        if idx.size != self.frames * self.spatial_len:
            out.append(f"{self.video_id}: {idx.size} placeholder indices, "
                       f"expected frames*spatial_len={self.frames * self.spatial_len}")
        if length != self.text_len + self.frames * self.spatial_len:
            out.append(f"{self.video_id}: token count {length} != "
                       f"text_len + frames*spatial_len")
        if idx.size and (idx.min() < 0 or idx.max() >= length):
            out.append(f"{self.video_id}: placeholder index out of range")
        if idx.size > 1 and not np.all(np.diff(idx) > 0):
            out.append(f"{self.video_id}: placeholder indices not strictly increasing")
        if not np.isfinite(self.tokens).all():
            out.append(f"{self.video_id}: non-finite token values")
        if self.split not in SPLITS:
            out.append(f"{self.video_id}: unknown split {self.split!r}")
        if self.prompt_mode not in PROMPT_MODES:
            out.append(f"{self.video_id}: unknown prompt mode {self.prompt_mode!r}")
        return out


@dataclass
class DecoupledTokens:
    """Visual (T x L_sp x D) and textual (L_t x D) halves of one record."""

    visual: np.ndarray
    textual: np.ndarray


def decouple(record: VideoRecord) -> DecoupledTokens:
    """Split fused tokens at the recorded placeholder positions.

    Visual rows come out in ascending placeholder order, grouped frame-major;
    textual rows are the remaining rows in ascending position order. Values
    are copied bit-exactly, never modified.
    """
    idx = np.asarray(record.placeholder_indices, dtype=np.int64)
    length, dim = record.tokens.shape
    if idx.size % max(record.frames, 1) != 0 or idx.size != record.frames * record.spatial_len:
        raise FormatError(f"{record.video_id}: placeholder count {idx.size} does not "
                          f"split into {record.frames} frames")
    if idx.size and (idx.min() < 0 or idx.max() >= length):
        raise FormatError(f"{record.video_id}: placeholder index out of range")
    visual = record.tokens[idx].reshape(record.frames, record.spatial_len, dim)
    mask = np.ones(length, dtype=bool)
    mask[idx] = False
    textual = record.tokens[mask]
    return DecoupledTokens(visual=visual, textual=textual)


def fuse(tokens: DecoupledTokens, placeholder_indices, length: int) -> np.ndarray:
    """Exact inverse of :func:`decouple`."""
    idx = np.asarray(placeholder_indices, dtype=np.int64)
    frames, spatial, dim = tokens.visual.shape
    if frames * spatial + tokens.textual.shape[0] != length:
        raise FormatError(f"visual {frames}x{spatial} + textual "
                          f"{tokens.textual.shape[0]} rows != L={length}")
    if idx.size != frames * spatial:
        raise FormatError(f"{idx.size} placeholder indices for {frames * spatial} visual tokens")
    out = np.empty((length, dim), dtype=tokens.visual.dtype)
    out[idx] = tokens.visual.reshape(-1, dim)
    mask = np.ones(length, dtype=bool)
    mask[idx] = False
    out[mask] = tokens.textual
    return out


# -- manifest ------------------------------------------------------------------


@dataclass
class ManifestEntry:
    video_id: str
    class_label: str
    split: str
    prompt_mode: str
    tensor_file: str
    tokens_shape: tuple
    placeholder_indices: list
    frames: int
    spatial_len: int
    text_len: int
    source_layer: int = -1
    source_model: str = "synthetic"

    def to_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "class_label": self.class_label,
            "split": self.split,
            "prompt_mode": self.prompt_mode,
            "tensor_file": self.tensor_file,
            "tokens_shape": list(self.tokens_shape),
            "placeholder_indices": [int(i) for i in self.placeholder_indices],
            "frames": self.frames,
            "spatial_len": self.spatial_len,
            "text_len": self.text_len,
            "source_layer": self.source_layer,
            "source_model": self.source_model,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ManifestEntry":
        return cls(video_id=d["video_id"], class_label=d["class_label"],
                   split=d["split"], prompt_mode=d["prompt_mode"],
                   tensor_file=d["tensor_file"],
                   tokens_shape=tuple(d["tokens_shape"]),
                   placeholder_indices=d["placeholder_indices"],
                   frames=d["frames"], spatial_len=d["spatial_len"],
                   text_len=d["text_len"],
                   source_layer=d.get("source_layer", -1),
                   source_model=d.get("source_model", "synthetic"))


@dataclass
class ArchiveManifest:
    root: Path
    dim: int
    videos: list = field(default_factory=list)
    format_version: int = MANIFEST_VERSION

    def split_classes(self) -> dict:
        classes: dict[str, set] = {s: set() for s in SPLITS}
        for e in self.videos:
            classes.setdefault(e.split, set()).add(e.class_label)
        return {s: sorted(v) for s, v in classes.items()}

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "dim": self.dim,
            "split_classes": self.split_classes(),
            "videos": [e.to_dict() for e in self.videos],
        }


def save_manifest(manifest: ArchiveManifest) -> None:
    path = Path(manifest.root) / MANIFEST_NAME
    path.write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def load_manifest(archive_dir) -> ArchiveManifest:
    root = Path(archive_dir)
    path = root / MANIFEST_NAME
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise OSError(f"cannot read manifest {path}: {exc}") from exc
    if raw.get("format_version") != MANIFEST_VERSION:
        raise FormatError(f"{path}: unsupported manifest version "
                          f"{raw.get('format_version')}")
    videos = [ManifestEntry.from_dict(d) for d in raw["videos"]]
    return ArchiveManifest(root=root, dim=int(raw["dim"]), videos=videos,
                           format_version=raw["format_version"])


def load_record(manifest: ArchiveManifest, entry: ManifestEntry) -> VideoRecord:
    tokens = read_tensor(Path(manifest.root) / entry.tensor_file)
    return VideoRecord(video_id=entry.video_id, class_label=entry.class_label,
                       split=entry.split, prompt_mode=entry.prompt_mode,
                       tokens=tokens,
                       placeholder_indices=np.asarray(entry.placeholder_indices,
                                                      dtype=np.int64),
                       frames=entry.frames, spatial_len=entry.spatial_len,
                       text_len=entry.text_len, source_layer=entry.source_layer,
                       source_model=entry.source_model)


def validate(manifest: ArchiveManifest) -> list[str]:
    """Check every format invariant; empty list iff the archive is well-formed."""
    violations: list[str] = []
    classes = manifest.split_classes()
    overlap = set(classes.get("train", ())) & set(classes.get("test", ()))
    for cls in sorted(overlap):
        violations.append(f"class {cls!r} appears in both train and test splits")
    seen_ids = set()
    for entry in manifest.videos:
        if entry.video_id in seen_ids:
            violations.append(f"duplicate video id {entry.video_id!r}")
        seen_ids.add(entry.video_id)
        path = Path(manifest.root) / entry.tensor_file
        if not path.exists():
            violations.append(f"{entry.video_id}: missing tensor file {entry.tensor_file}")
            continue
        try:
            tokens = read_tensor(path)
        except FormatError as exc:
            violations.append(str(exc))
            continue
        if tokens.shape != tuple(entry.tokens_shape):
            violations.append(f"{entry.video_id}: file shape {tokens.shape} != "
                              f"manifest shape {tuple(entry.tokens_shape)}")
            continue
        if tokens.ndim != 2 or tokens.shape[1] != manifest.dim:
            violations.append(f"{entry.video_id}: token dim {tokens.shape} != "
                              f"archive dim {manifest.dim}")
            continue
        record = load_record(manifest, entry)
        violations.extend(record.violations())
    return violations


class Archive:
    """Read-side view of an archive: cached records and split/class indexing."""

    def __init__(self, manifest: ArchiveManifest):
        self.manifest = manifest
        self.entries = {e.video_id: e for e in manifest.videos}
        self.by_split_class: dict[str, dict[str, list[str]]] = {}
        for e in manifest.videos:
            self.by_split_class.setdefault(e.split, {}).setdefault(
                e.class_label, []).append(e.video_id)
        for split in self.by_split_class.values():
            for ids in split.values():
                ids.sort()
        self._records: dict[str, VideoRecord] = {}

    @classmethod
    def open(cls, archive_dir) -> "Archive":
        return cls(load_manifest(archive_dir))

    @property
    def dim(self) -> int:
        return self.manifest.dim

    def record(self, video_id: str) -> VideoRecord:
        rec = self._records.get(video_id)
        if rec is None:
            rec = load_record(self.manifest, self.entries[video_id])
            self._records[video_id] = rec
        return rec

    def classes(self, split: str, prompt_mode: str | None = None) -> list[str]:
        table = self.by_split_class.get(split, {})
        if prompt_mode is None:
            return sorted(table)
        keep = []
        for cls, ids in table.items():
            if any(self.entries[v].prompt_mode == prompt_mode for v in ids):
                keep.append(cls)
        return sorted(keep)

    def videos(self, split: str, class_label: str,
               prompt_mode: str | None = None) -> list[str]:
        ids = self.by_split_class.get(split, {}).get(class_label, [])
        if prompt_mode is not None:
            ids = [v for v in ids if self.entries[v].prompt_mode == prompt_mode]
        return ids
