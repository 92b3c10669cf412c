import numpy as np
import pytest

from vwsearch.encoder import ImageDescriptor, VisualWordOccurrence
from vwsearch.features import InterestPoint
from vwsearch.store import InvertedIndex
from vwsearch.vocabulary import DIM, Dictionary


def unit_vec(dim_index: int) -> np.ndarray:
    v = np.zeros(DIM)
    v[dim_index % DIM] = 1.0
    return v


def make_dictionary(k: int, idf=None, seed: int = 0) -> Dictionary:
    """Dictionary with k well-separated centroids (scaled random corners)."""
    rng = np.random.default_rng(seed)
    cents = rng.integers(0, 2, size=(k, DIM)).astype(np.float64) * 10.0
    cents += np.arange(k)[:, None] * 0.001  # break accidental duplicates
    if idf is None:
        idf = np.ones(k)
    return Dictionary(size=k, centroids=cents.astype(np.float32), idf=np.asarray(idf))


def fake_point(x: float, y: float, descriptor: np.ndarray) -> InterestPoint:
    return InterestPoint(
        x=x,
        y=y,
        scale=2.0,
        orientation=0.0,
        laplacian_sign=1,
        response=1.0,
        descriptor=descriptor,
    )


def points_for_words(dictionary: Dictionary, word_locs: dict[int, list[tuple[float, float]]]):
    """Interest points whose descriptors sit exactly on chosen centroids."""
    pts = []
    for word, locs in word_locs.items():
        for x, y in locs:
            pts.append(fake_point(x, y, dictionary.centroids[word - 1].astype(np.float64)))
    return pts


def make_descriptor(image_id: str, word_locs: dict[int, list[tuple[float, float]]],
                    idf: dict[int, float] | None = None) -> ImageDescriptor:
    total = sum(len(v) for v in word_locs.values())
    occs = []
    for word, locs in word_locs.items():
        occs.append(
            VisualWordOccurrence(
                index=word,
                tf=len(locs) / total,
                idf=(idf or {}).get(word, 1.0),
                locations=tuple(sorted(locs)),
            )
        )
    occs.sort(key=lambda o: (-o.weight, o.index))
    return ImageDescriptor(image_id=image_id, occurrences=tuple(occs), total_points=total)


def build_index(root, images, k: int = 64, compact: bool = False) -> InvertedIndex:
    """images: list of (image_id, tag, {word: [locations]})."""
    index = InvertedIndex.create(root, k=k, dictionary_checksum="", compact=compact)
    for image_id, tag, word_locs in images:
        index.add_image(make_descriptor(image_id, word_locs), tag)
    return index


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
