"""Visual vocabulary: kd-forest ANN, approximate k-means, idf, dictionary I/O.

Cluster assignment during k-means goes through a forest of randomized
kd-trees (split dimension drawn from the top-5 variance dimensions at each
node); queries retrieve a candidate set bounded by a leaf-visit budget and
keep the closest.  An unlimited budget (``checks=None``) degrades to exact
search by exhausting the priority queue with branch-and-bound pruning.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import InvalidInputError

DIM = 64
DEFAULT_TREES = 8
DEFAULT_CHECKS = 32
DEFAULT_LEAF_SIZE = 8
TOP_VARIANCE_DIMS = 5

DICT_MAGIC = b"TSDC"
DICT_VERSION = 1


class _Node:
    __slots__ = ("dim", "value", "left", "right", "indices")

    def __init__(self, dim=-1, value=0.0, left=None, right=None, indices=None):
        self.dim = dim
        self.value = value
        self.left = left
        self.right = right
        self.indices = indices  # leaf only


class KdForest:
    """Several randomized kd-trees over one point set, searched jointly."""

    def __init__(
        self,
        points: np.ndarray,
        tree_count: int = DEFAULT_TREES,
        checks: int | None = DEFAULT_CHECKS,
        seed: int = 0,
        leaf_size: int = DEFAULT_LEAF_SIZE,
    ):
        self.points = np.asarray(points, dtype=np.float64)
        if self.points.ndim != 2 or len(self.points) == 0:
            raise InvalidInputError("forest needs a non-empty 2-D point set")
        self.tree_count = tree_count
        self.checks = checks
        self.seed = seed
        self.leaf_size = leaf_size
        rng = np.random.default_rng(seed)
        self.trees = [
            self._build(np.arange(len(self.points)), rng) for _ in range(tree_count)
        ]

    def _build(self, indices: np.ndarray, rng) -> _Node:
        if len(indices) <= self.leaf_size:
            return _Node(indices=indices)
        sub = self.points[indices]
        var = sub.var(axis=0)
        top = np.argsort(-var)[:TOP_VARIANCE_DIMS]
        dim = int(top[rng.integers(0, len(top))])
        value = float(sub[:, dim].mean())
        mask = sub[:, dim] < value
        left, right = indices[mask], indices[~mask]
        if len(left) == 0 or len(right) == 0:
            # degenerate split (constant dimension): make a leaf
            return _Node(indices=indices)
        return _Node(dim, value, self._build(left, rng), self._build(right, rng))

    def knn(self, query: np.ndarray, k: int, checks="default") -> list[int]:
        """Indices of (approximately) the k nearest points, closest first.

        ``checks`` caps the number of leaf visits; ``"default"`` uses the
        forest's configured budget and ``None`` means exact search.
        """
        query = np.asarray(query, dtype=np.float64)
        if not np.all(np.isfinite(query)):
            raise InvalidInputError("query vector must be finite")
        if checks == "default":
            checks = self.checks
        exact = checks is None
        heap: list[tuple[float, int, _Node]] = []
        tiebreak = 0
        visited: set[int] = set()
        leaf_visits = 0
        # (distance, index) of current best candidates, kept sorted
        best: list[tuple[float, int]] = []

        def visit_leaf(node: _Node):
            nonlocal best, leaf_visits
            fresh = [i for i in node.indices if i not in visited]
            if not fresh:
                return  # leaf already covered via another tree; free of charge
            leaf_visits += 1
            visited.update(fresh)
            pts = self.points[fresh]
            d = np.einsum("ij,ij->i", pts - query, pts - query)
            best.extend(zip(d.tolist(), fresh))
            best.sort()
            del best[max(k, 1) :]

        def descend(node: _Node, bound: float):
            # ``bound`` is a valid lower bound on the squared distance from
            # the query to the node's region (max over split-plane margins,
            # so repeated split dimensions never overcount)
            nonlocal tiebreak
            while node.indices is None:
                diff = query[node.dim] - node.value
                if diff < 0:
                    near, far = node.left, node.right
                else:
                    near, far = node.right, node.left
                tiebreak += 1
                heapq.heappush(heap, (max(bound, diff * diff), tiebreak, far))
                node = near
            visit_leaf(node)

        for tree in self.trees:
            descend(tree, 0.0)
        while heap:
            if (
                not exact
                and leaf_visits >= checks
                and len(best) >= min(k, len(self.points))
            ):
                break
            bound, _, node = heapq.heappop(heap)
            if len(best) >= min(k, len(self.points)) and bound > best[-1][0]:
                continue  # provably no closer point down this branch
            descend(node, bound)
        # ties broken toward the lower index
        best.sort(key=lambda t: (t[0], t[1]))
        return [i for _, i in best[:k]]

    def nearest(self, query: np.ndarray, checks="default") -> int:
        return self.knn(query, 1, checks=checks)[0]


@dataclass(frozen=True)
class Dictionary:
    """Immutable visual vocabulary: centroids, per-word idf, ANN parameters.

    Word indices are 1-based and dense (1..size); centroid row ``w - 1``
    belongs to word ``w``.
    """

    size: int
    centroids: np.ndarray  # (size, 64) float32
    idf: np.ndarray  # (size,) float32
    ann_params: tuple[int, int | None] = (DEFAULT_TREES, DEFAULT_CHECKS)
    build_meta: dict = field(default_factory=dict)
    _forest: KdForest | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        cents = np.asarray(self.centroids, dtype=np.float32).reshape(self.size, DIM)
        if self.size < 1:
            raise InvalidInputError("dictionary size must be >= 1")
        if not np.all(np.isfinite(cents)):
            raise InvalidInputError("centroids must be finite")
        idf = np.asarray(self.idf, dtype=np.float32).reshape(self.size)
        if np.any(idf < 0):
            raise InvalidInputError("idf values must be non-negative")
        object.__setattr__(self, "centroids", cents)
        object.__setattr__(self, "idf", idf)

    @property
    def forest(self) -> KdForest:
        if self._forest is None:
            trees, checks = self.ann_params
            forest = KdForest(
                self.centroids.astype(np.float64),
                tree_count=trees,
                checks=checks,
                seed=int(self.build_meta.get("seed", 0)),
            )
            object.__setattr__(self, "_forest", forest)
        return self._forest

    def with_idf(self, idf: np.ndarray) -> "Dictionary":
        return replace(self, idf=np.asarray(idf, dtype=np.float32), _forest=self._forest)

    def checksum(self) -> str:
        return hashlib.sha256(serialize_dictionary(self)).hexdigest()


def assign_nearest_word(
    dictionary: Dictionary, descriptor: np.ndarray, checks: int | None = "default"
) -> int:
    """1-based index of the (approximately) nearest centroid; ties go to the
    lowest index; ``checks=None`` forces exact search."""
    if checks == "default":
        checks = dictionary.ann_params[1]
    return dictionary.forest.nearest(descriptor, checks=checks) + 1


def assign_words(
    dictionary: Dictionary, descriptors: np.ndarray, checks: int | None = "default"
) -> np.ndarray:
    """Vector of 1-based word indices for a batch of descriptors."""
    descriptors = np.atleast_2d(np.asarray(descriptors, dtype=np.float64))
    if checks == "default":
        checks = dictionary.ann_params[1]
    return np.array(
        [dictionary.forest.nearest(d, checks=checks) + 1 for d in descriptors],
        dtype=np.int64,
    )


def _exact_assign(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Brute-force nearest centroid per point, chunked to bound memory."""
    n = len(points)
    out = np.empty(n, dtype=np.int64)
    chunk = max(1, 4_000_000 // max(1, len(centroids)))
    c2 = np.einsum("ij,ij->i", centroids, centroids)
    for s in range(0, n, chunk):
        block = points[s : s + chunk]
        d = c2[None, :] - 2.0 * block @ centroids.T
        out[s : s + chunk] = np.argmin(d, axis=1)
    return out


def build_dictionary(
    descriptors: np.ndarray,
    k: int,
    iterations: int = 250,
    nn_count: int = 25,
    seed: int = 0,
    tree_count: int = DEFAULT_TREES,
    checks: int | None = DEFAULT_CHECKS,
    points_per_image: int | None = None,
) -> Dictionary:
    """Approximate k-means over 64-d descriptors.

    Seeded init by sampling without replacement; each round reassigns every
    descriptor through a fresh forest over the current centroids (retrieving
    ``nn_count`` candidates and keeping the closest) and recomputes means.
    Empty clusters are reseeded with the descriptor farthest from its
    centroid.  Stops early once assignments stop changing.  Deterministic
    given identical inputs and seed.
    """
    data = np.asarray(descriptors, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != DIM:
        raise InvalidInputError(f"descriptors must be (n, {DIM})")
    if not np.all(np.isfinite(data)):
        raise InvalidInputError("descriptors must be finite")
    n = len(data)
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    if n < k:
        raise InvalidInputError(f"need at least k={k} descriptors, got {n}")
    if iterations < 1:
        raise InvalidInputError("iterations must be >= 1")

    rng = np.random.default_rng(seed)
    centroids = data[np.sort(rng.choice(n, size=k, replace=False))].copy()
    prev = None
    for it in range(iterations):
        if checks is None or checks >= k:
            # unlimited budget, or a budget covering every centroid: both
            # are identical to exact assignment, so skip the forest
            assign = _exact_assign(data, centroids)
        else:
            forest = KdForest(
                centroids, tree_count=tree_count, checks=checks, seed=seed
            )
            assign = np.empty(n, dtype=np.int64)
            for i in range(n):
                cand = forest.knn(data[i], nn_count, checks=checks)
                pts = centroids[cand]
                d = np.einsum("ij,ij->i", pts - data[i], pts - data[i])
                assign[i] = cand[int(np.argmin(d))]
        if prev is not None and np.array_equal(assign, prev):
            break
        prev = assign
        sums = np.zeros((k, DIM))
        counts = np.zeros(k, dtype=np.int64)
        np.add.at(sums, assign, data)
        np.add.at(counts, assign, 1)
        nonempty = counts > 0
        centroids[nonempty] = sums[nonempty] / counts[nonempty, None]
        empty = np.flatnonzero(~nonempty)
        if len(empty) > 0:
            dist = np.einsum(
                "ij,ij->i", data - centroids[assign], data - centroids[assign]
            )
            order = np.argsort(-dist, kind="stable")
            for slot, cluster in enumerate(empty):
                centroids[cluster] = data[order[slot]]
    meta = {
        "iterations": iterations,
        "nn_count": nn_count,
        "points_per_image": points_per_image or 0,
        "corpus_size": n,
        "seed": seed,
    }
    return Dictionary(
        size=k,
        centroids=centroids.astype(np.float32),
        idf=np.zeros(k, dtype=np.float32),
        ann_params=(tree_count, checks),
        build_meta=meta,
    )


def compute_idf(corpus_word_sets: list[set[int]], k: int) -> np.ndarray:
    """idf[w] = ln(N / n_w) over a corpus of per-image word sets (1-based
    words); words absent everywhere get the sentinel ln(N) + 1."""
    if not corpus_word_sets:
        raise InvalidInputError("corpus must be non-empty")
    n_images = len(corpus_word_sets)
    counts = np.zeros(k, dtype=np.int64)
    for words in corpus_word_sets:
        for w in words:
            if not 1 <= w <= k:
                raise InvalidInputError(f"word index {w} out of range 1..{k}")
            counts[w - 1] += 1
    idf = np.full(k, math.log(n_images) + 1.0)
    seen = counts > 0
    idf[seen] = np.log(n_images / counts[seen])
    return idf


def serialize_dictionary(d: Dictionary) -> bytes:
    """TSDC binary layout, little-endian throughout."""
    meta = d.build_meta
    trees, checks = d.ann_params
    buf = bytearray()
    buf += DICT_MAGIC
    buf += struct.pack("<HI", DICT_VERSION, d.size)
    buf += np.ascontiguousarray(d.centroids, dtype="<f4").tobytes()
    buf += np.ascontiguousarray(d.idf, dtype="<f4").tobytes()
    buf += struct.pack("<HI", trees, 0xFFFFFFFF if checks is None else checks)
    buf += struct.pack(
        "<IIIQq",
        int(meta.get("iterations", 0)),
        int(meta.get("nn_count", 0)),
        int(meta.get("points_per_image", 0)),
        int(meta.get("corpus_size", 0)),
        int(meta.get("seed", 0)),
    )
    return bytes(buf)


def save_dictionary(d: Dictionary, path: str | Path) -> None:
    Path(path).write_bytes(serialize_dictionary(d))


def load_dictionary(path: str | Path) -> Dictionary:
    data = Path(path).read_bytes()
    if data[:4] != DICT_MAGIC:
        raise InvalidInputError(f"{path}: bad magic")
    version, k = struct.unpack_from("<HI", data, 4)
    if version != DICT_VERSION:
        raise InvalidInputError(f"{path}: unsupported version {version}")
    off = 10
    cents = np.frombuffer(data, dtype="<f4", count=k * DIM, offset=off).reshape(k, DIM)
    off += k * DIM * 4
    idf = np.frombuffer(data, dtype="<f4", count=k, offset=off)
    off += k * 4
    trees, checks_raw = struct.unpack_from("<HI", data, off)
    off += 6
    iterations, nn_count, ppi, corpus_size, seed = struct.unpack_from("<IIIQq", data, off)
    checks = None if checks_raw == 0xFFFFFFFF else checks_raw
    return Dictionary(
        size=k,
        centroids=cents.copy(),
        idf=idf.copy(),
        ann_params=(trees, checks),
        build_meta={
            "iterations": iterations,
            "nn_count": nn_count,
            "points_per_image": ppi,
            "corpus_size": corpus_size,
            "seed": seed,
        },
    )


def dictionary_to_json(d: Dictionary) -> str:
    """Textual mirror of the binary format, for inspection."""
    trees, checks = d.ann_params
    payload = {
        "size": d.size,
        "centroids": np.asarray(d.centroids, dtype=float).tolist(),
        "idf": np.asarray(d.idf, dtype=float).tolist(),
        "ann_params": {"tree_count": trees, "checks": checks},
        "build_meta": d.build_meta,
    }
    return json.dumps(payload, indent=2, sort_keys=True)
