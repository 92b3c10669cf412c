"""Corpus-level plumbing shared by the CLI and the service: batch
extraction, dictionary building with idf, and full-corpus indexing."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .encoder import MAX_WORDS, encode_image
from .features import detect_interest_points, read_points, write_points
from .image import load_image
from .store import UNTAGGED, InvertedIndex
from .vocabulary import Dictionary, assign_words, build_dictionary, compute_idf

log = logging.getLogger("vwsearch")

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg"}
DEFAULT_MAX_POINTS = 500


def iter_images(image_dir: str | Path) -> list[Path]:
    root = Path(image_dir)
    if not root.is_dir():
        raise OSError(f"not a directory: {root}")
    return sorted(
        p for p in root.rglob("*") if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
    )


def image_id_for(path: Path, root: Path) -> str:
    return path.relative_to(root).as_posix()


@dataclass
class ExtractionSummary:
    images: int = 0
    points: int = 0
    failures: list[str] = field(default_factory=list)


def extract_directory(
    image_dir: str | Path,
    out_dir: str | Path,
    max_points: int = DEFAULT_MAX_POINTS,
    upright: bool = False,
    sample_mode: str = "top",
    seed: int | None = None,
) -> ExtractionSummary:
    """Detect and serialize interest points for every image under a
    directory; decode failures are recorded, not fatal."""
    image_dir = Path(image_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = ExtractionSummary()
    for path in iter_images(image_dir):
        image_id = image_id_for(path, image_dir)
        try:
            img = load_image(path)
            points = detect_interest_points(
                img, max_points, upright=upright, sample_mode=sample_mode, seed=seed
            )
        except (OSError, InvalidInputError, ValueError) as exc:
            log.warning("skipping %s: %s", image_id, exc)
            summary.failures.append(image_id)
            continue
        out = out_dir / (image_id.replace("/", "__") + ".tsip")
        write_points(out, points)
        summary.images += 1
        summary.points += len(points)
    return summary


def build_dictionary_from_points(
    points_dir: str | Path,
    k: int,
    iterations: int = 250,
    nn_count: int = 25,
    seed: int = 0,
    tree_count: int = 8,
    checks: int | None = 32,
) -> Dictionary:
    """Cluster all stored point files into a dictionary and compute idf over
    the same corpus (one word set per point file)."""
    files = sorted(Path(points_dir).glob("*.tsip"))
    if not files:
        raise InvalidInputError(f"no point files under {points_dir}")
    per_image = []
    for f in files:
        pts = read_points(f)
        descs = [p.descriptor for p in pts if np.any(p.descriptor != 0)]
        per_image.append(np.array(descs).reshape(len(descs), 64))
    all_descs = np.vstack([d for d in per_image if len(d)])
    ppi = max((len(d) for d in per_image), default=0)
    dictionary = build_dictionary(
        all_descs,
        k,
        iterations=iterations,
        nn_count=nn_count,
        seed=seed,
        tree_count=tree_count,
        checks=checks,
        points_per_image=ppi,
    )
    word_sets = [
        set(assign_words(dictionary, d).tolist()) if len(d) else set()
        for d in per_image
    ]
    return dictionary.with_idf(compute_idf(word_sets, k))


def read_tags_file(path: str | Path) -> dict[str, str]:
    """image_id <TAB> tag lines; blank lines and #-comments ignored."""
    tags = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise InvalidInputError(f"malformed tags line: {line!r}")
        tags[parts[0]] = parts[1].strip().lower()
    return tags


@dataclass
class IndexSummary:
    images: int = 0
    failures: list[str] = field(default_factory=list)


def index_corpus(
    dictionary: Dictionary,
    image_dir: str | Path,
    index_root: str | Path,
    tags: dict[str, str] | None = None,
    max_points: int = DEFAULT_MAX_POINTS,
    max_words: int = MAX_WORDS,
    upright: bool = False,
    compact: bool = False,
) -> IndexSummary:
    """Extract, encode, and add every image under ``image_dir``; reruns are
    idempotent.  Images missing from ``tags`` are stored as untagged."""
    image_dir = Path(image_dir)
    index_root = Path(index_root)
    checksum = dictionary.checksum()
    if (index_root / "manifest.json").is_file():
        index = InvertedIndex.open(index_root, dictionary_checksum=checksum)
    else:
        index = InvertedIndex.create(
            index_root, k=dictionary.size, dictionary_checksum=checksum, compact=compact
        )
    tags = tags or {}
    summary = IndexSummary()
    for path in iter_images(image_dir):
        image_id = image_id_for(path, image_dir)
        try:
            img = load_image(path)
            points = detect_interest_points(img, max_points, upright=upright)
        except (OSError, InvalidInputError, ValueError) as exc:
            log.warning("skipping %s: %s", image_id, exc)
            summary.failures.append(image_id)
            continue
        desc = encode_image(dictionary, points, image_id, max_words=max_words)
        index.add_image(desc, tags.get(image_id, UNTAGGED))
        summary.images += 1
    return summary
