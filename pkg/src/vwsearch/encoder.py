"""Encode interest points into per-image visual-word descriptors.

Each image becomes at most ``max_words`` visual-word occurrences, each
carrying the word index, its term frequency over the image, the word's idf,
and the image locations of every point assigned to it.  Occurrences are
kept in tf*idf-descending order (ties toward the lower index) and truncated
at the cap, top-weighted words first.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .features import InterestPoint
from .vocabulary import Dictionary, assign_words

MAX_WORDS = 100

DESC_MAGIC = b"TSVW"
DESC_VERSION = 1


@dataclass(frozen=True)
class VisualWordOccurrence:
    index: int  # 1-based word index
    tf: float
    idf: float
    locations: tuple[tuple[float, float], ...]

    @property
    def weight(self) -> float:
        return self.tf * self.idf


@dataclass(frozen=True)
class ImageDescriptor:
    image_id: str
    occurrences: tuple[VisualWordOccurrence, ...]
    total_points: int

    def word_indices(self) -> set[int]:
        return {o.index for o in self.occurrences}

    def weights(self) -> dict[int, float]:
        return {o.index: o.weight for o in self.occurrences}


def encode_image(
    dictionary: Dictionary,
    points: list[InterestPoint],
    image_id: str,
    max_words: int = MAX_WORDS,
) -> ImageDescriptor:
    """Assign points to visual words and keep the top ``max_words`` words by
    tf*idf weight.  Zero-descriptor (flat) points carry no word and are
    dropped before tf normalization.  Order-insensitive in the input points.
    """
    if max_words < 1:
        raise InvalidInputError("max_words must be >= 1")
    usable = [p for p in points if np.any(p.descriptor != 0)]
    if not usable:
        return ImageDescriptor(image_id=image_id, occurrences=(), total_points=0)
    descs = np.stack([p.descriptor for p in usable])
    words = assign_words(dictionary, descs)
    by_word: dict[int, list[tuple[float, float]]] = {}
    for p, w in zip(usable, words):
        by_word.setdefault(int(w), []).append((p.x, p.y))
    total = len(usable)
    occs = []
    for w, locs in by_word.items():
        # stable location order regardless of input point order
        locs = sorted(locs)
        occs.append(
            VisualWordOccurrence(
                index=w,
                tf=len(locs) / total,
                idf=float(dictionary.idf[w - 1]),
                locations=tuple(locs),
            )
        )
    occs.sort(key=lambda o: (-o.weight, o.index))
    return ImageDescriptor(
        image_id=image_id, occurrences=tuple(occs[:max_words]), total_points=total
    )


def descriptor_cosine(d1: ImageDescriptor, d2: ImageDescriptor) -> float:
    """Cosine similarity of the sparse tf*idf vectors; 0 if either is empty."""
    w1 = d1.weights()
    w2 = d2.weights()
    n1 = math.sqrt(sum(v * v for v in w1.values()))
    n2 = math.sqrt(sum(v * v for v in w2.values()))
    if n1 == 0.0 or n2 == 0.0:
        return 0.0
    dot = sum(v * w2[k] for k, v in w1.items() if k in w2)
    return dot / (n1 * n2)


def serialize_descriptor(desc: ImageDescriptor) -> bytes:
    buf = bytearray()
    buf += DESC_MAGIC
    ident = desc.image_id.encode("utf-8")
    buf += struct.pack("<HH", DESC_VERSION, len(ident))
    buf += ident
    buf += struct.pack("<IH", desc.total_points, len(desc.occurrences))
    for o in desc.occurrences:
        buf += struct.pack("<IffH", o.index, o.tf, o.idf, len(o.locations))
        for x, y in o.locations:
            buf += struct.pack("<ff", x, y)
    return bytes(buf)


def deserialize_descriptor(data: bytes) -> ImageDescriptor:
    if data[:4] != DESC_MAGIC:
        raise InvalidInputError("bad descriptor magic")
    version, id_len = struct.unpack_from("<HH", data, 4)
    if version != DESC_VERSION:
        raise InvalidInputError(f"unsupported descriptor version {version}")
    off = 8
    image_id = data[off : off + id_len].decode("utf-8")
    off += id_len
    total_points, n_occ = struct.unpack_from("<IH", data, off)
    off += 6
    occs = []
    for _ in range(n_occ):
        index, tf, idf, n_loc = struct.unpack_from("<IffH", data, off)
        off += 14
        locs = []
        for _ in range(n_loc):
            x, y = struct.unpack_from("<ff", data, off)
            off += 8
            locs.append((x, y))
        occs.append(
            VisualWordOccurrence(index=index, tf=tf, idf=idf, locations=tuple(locs))
        )
    return ImageDescriptor(
        image_id=image_id, occurrences=tuple(occs), total_points=total_points
    )


def write_descriptor(path: str | Path, desc: ImageDescriptor) -> None:
    Path(path).write_bytes(serialize_descriptor(desc))


def read_descriptor(path: str | Path) -> ImageDescriptor:
    return deserialize_descriptor(Path(path).read_bytes())
