"""On-disk descriptor store, file-per-word inverted index, and tag store.

Layout under the index root:

    manifest.json      corpus metadata: k, dictionary checksum, and the
                       committed image set with each image's tag and words
    descriptors/       one binary descriptor file per image
    postings/<w>.ids   newline-delimited sorted image ids per word
    postings.pack/.idx compact single-file variant (``compact=True``)
    tags.tsv           image_id <TAB> tag export, regenerated on commit

The manifest rename is the commit point.  Posting additions land before the
manifest and removals after it; reads filter raw posting entries through
the committed manifest, so an interrupted ``add_image`` is never visible as
a partial state.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from .errors import ChecksumMismatchError, InvalidInputError, NotFoundError, StorageError
from .encoder import ImageDescriptor, read_descriptor, serialize_descriptor

MANIFEST_VERSION = 1
UNTAGGED = "untagged"


def _commit_barrier(stage: str) -> None:
    """Hook for crash-injection tests; a no-op in production."""


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _normalize_tag(tag: str) -> str:
    tag = tag.strip().lower()
    if not tag:
        raise InvalidInputError("tag must be a non-empty token")
    return tag


class InvertedIndex:
    """Single-writer / multi-reader persistent index over ImageDescriptors."""

    def __init__(self, root: str | Path, manifest: dict):
        self.root = Path(root)
        self._manifest = manifest

    # -- lifecycle ---------------------------------------------------------

    @classmethod
    def create(
        cls,
        root: str | Path,
        k: int,
        dictionary_checksum: str = "",
        compact: bool = False,
    ) -> "InvertedIndex":
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        (root / "descriptors").mkdir(exist_ok=True)
        if not compact:
            (root / "postings").mkdir(exist_ok=True)
        manifest = {
            "version": MANIFEST_VERSION,
            "k": k,
            "dictionary_checksum": dictionary_checksum,
            "compact": compact,
            "images": {},
        }
        idx = cls(root, manifest)
        idx._write_manifest()
        return idx

    @classmethod
    def open(
        cls, root: str | Path, dictionary_checksum: str | None = None
    ) -> "InvertedIndex":
        root = Path(root)
        mpath = root / "manifest.json"
        if not mpath.is_file():
            raise StorageError(f"no index at {root} (missing manifest.json)")
        manifest = json.loads(mpath.read_text())
        if manifest.get("version") != MANIFEST_VERSION:
            raise StorageError(f"unsupported manifest version in {mpath}")
        idx = cls(root, manifest)
        if dictionary_checksum is not None:
            idx.require_dictionary(dictionary_checksum)
        return idx

    def require_dictionary(self, checksum: str) -> None:
        recorded = self._manifest.get("dictionary_checksum", "")
        if recorded and recorded != checksum:
            raise ChecksumMismatchError(
                "index was built against a different dictionary "
                f"(index {recorded[:12]}..., supplied {checksum[:12]}...)"
            )

    @property
    def k(self) -> int:
        return int(self._manifest["k"])

    @property
    def compact(self) -> bool:
        return bool(self._manifest.get("compact", False))

    # -- paths -------------------------------------------------------------

    def _descriptor_path(self, image_id: str) -> Path:
        safe = image_id.replace("/", "__")
        return self.root / "descriptors" / f"{safe}.tsvw"

    def _postings_path(self, word: int) -> Path:
        return self.root / "postings" / f"{word}.ids"

    # -- raw postings storage ---------------------------------------------

    def _read_raw_postings(self, word: int) -> list[str]:
        if self.compact:
            return self._read_compact().get(str(word), [])
        path = self._postings_path(word)
        if not path.is_file():
            return []
        return [line for line in path.read_text().splitlines() if line]

    def _write_raw_postings(self, updates: dict[int, list[str]]) -> None:
        if self.compact:
            table = self._read_compact()
            for word, ids in updates.items():
                table[str(word)] = ids
            self._write_compact(table)
            return
        for word, ids in updates.items():
            _atomic_write(self._postings_path(word), ("".join(f"{i}\n" for i in ids)).encode())

    def _read_compact(self) -> dict[str, list[str]]:
        pack = self.root / "postings.pack"
        idxf = self.root / "postings.idx"
        if not pack.is_file() or not idxf.is_file():
            return {}
        offsets = json.loads(idxf.read_text())
        blob = pack.read_bytes()
        table = {}
        for word, (off, length) in offsets.items():
            chunk = blob[off : off + length].decode("utf-8", errors="replace")
            table[word] = [line for line in chunk.splitlines() if line]
        return table

    def _write_compact(self, table: dict[str, list[str]]) -> None:
        parts = []
        offsets = {}
        pos = 0
        for word in sorted(table, key=int):
            data = ("".join(f"{i}\n" for i in table[word])).encode()
            if not data:
                continue
            offsets[word] = [pos, len(data)]
            parts.append(data)
            pos += len(data)
        _atomic_write(self.root / "postings.pack", b"".join(parts))
        _atomic_write(self.root / "postings.idx", json.dumps(offsets).encode())

    # -- manifest / tags ---------------------------------------------------

    def _write_manifest(self) -> None:
        _atomic_write(
            self.root / "manifest.json",
            json.dumps(self._manifest, indent=1, sort_keys=True).encode(),
        )

    def _write_tags_tsv(self) -> None:
        lines = "".join(
            f"{image_id}\t{info['tag']}\n"
            for image_id, info in sorted(self._manifest["images"].items())
        )
        _atomic_write(self.root / "tags.tsv", lines.encode())

    # -- writes ------------------------------------------------------------

    def add_image(self, desc: ImageDescriptor, tag: str = UNTAGGED) -> None:
        """Persist a descriptor, update postings, and record the tag.

        Re-adding an image replaces its prior state atomically: readers see
        either the full old state or the full new state.
        """
        tag = _normalize_tag(tag)
        image_id = desc.image_id
        if not image_id:
            raise InvalidInputError("descriptor needs a non-empty image_id")
        new_words = sorted(desc.word_indices())
        for w in new_words:
            if not 1 <= w <= self.k:
                raise InvalidInputError(f"word index {w} out of range 1..{self.k}")
        old = self._manifest["images"].get(image_id)
        old_words = set(old["words"]) if old else set()

        _commit_barrier("begin")
        path = self._descriptor_path(image_id)
        path.parent.mkdir(parents=True, exist_ok=True)
        _atomic_write(path, serialize_descriptor(desc))
        _commit_barrier("descriptor")

        additions = {}
        for w in new_words:
            ids = set(self._read_raw_postings(w))
            if image_id not in ids:
                additions[w] = sorted(ids | {image_id})
        if additions:
            self._write_raw_postings(additions)
        _commit_barrier("postings_add")

        self._manifest["images"][image_id] = {"tag": tag, "words": new_words}
        self._write_manifest()
        _commit_barrier("manifest")

        removed = old_words - set(new_words)
        if removed:
            removals = {}
            for w in removed:
                ids = [i for i in self._read_raw_postings(w) if i != image_id]
                removals[w] = ids
            self._write_raw_postings(removals)
        self._write_tags_tsv()
        _commit_barrier("cleanup")

    # -- reads -------------------------------------------------------------

    def postings(self, word: int) -> list[str]:
        """Sorted ids of committed images whose descriptor contains ``word``."""
        if not 1 <= word <= self.k:
            raise InvalidInputError(f"word index {word} out of range 1..{self.k}")
        images = self._manifest["images"]
        out = [
            i
            for i in self._read_raw_postings(word)
            if i in images and word in images[i]["words"]
        ]
        return sorted(set(out))

    def tag_search(self, tag: str) -> list[str]:
        tag = tag.strip().lower()
        return sorted(
            i for i, info in self._manifest["images"].items() if info["tag"] == tag
        )

    def tags(self) -> list[str]:
        return sorted({info["tag"] for info in self._manifest["images"].values()})

    def images(self) -> list[str]:
        return sorted(self._manifest["images"])

    def has_image(self, image_id: str) -> bool:
        return image_id in self._manifest["images"]

    def tag_of(self, image_id: str) -> str:
        info = self._manifest["images"].get(image_id)
        if info is None:
            raise NotFoundError(image_id)
        return info["tag"]

    def words_of(self, image_id: str) -> set[int]:
        info = self._manifest["images"].get(image_id)
        if info is None:
            raise NotFoundError(image_id)
        return set(info["words"])

    def descriptor(self, image_id: str) -> ImageDescriptor:
        if image_id not in self._manifest["images"]:
            raise NotFoundError(image_id)
        return read_descriptor(self._descriptor_path(image_id))

    def verify(self) -> list[str]:
        """Full-rescan consistency check; returns a list of problems (empty
        when postings, descriptors, and the manifest agree)."""
        problems = []
        seen_words = set()
        for image_id in self.images():
            try:
                desc = self.descriptor(image_id)
            except (OSError, InvalidInputError) as exc:
                problems.append(f"{image_id}: unreadable descriptor ({exc})")
                continue
            words = desc.word_indices()
            if words != self.words_of(image_id):
                problems.append(f"{image_id}: manifest words disagree with descriptor")
            seen_words |= words
            for w in words:
                if image_id not in self.postings(w):
                    problems.append(f"{image_id}: missing from postings({w})")
        for w in sorted(seen_words):
            for image_id in self.postings(w):
                if w not in self.words_of(image_id):
                    problems.append(f"postings({w}): stray id {image_id}")
        return problems
