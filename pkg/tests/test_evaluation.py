import itertools

import numpy as np
import pytest

from conftest import build_index
from vwsearch.errors import InvalidInputError
from vwsearch.evaluation import (
    EvalReport,
    Ranking,
    average_precision,
    mean_average_precision,
    precision_at,
    run_region_protocol,
    run_whole_image_protocol,
    run_whole_image_report,
)
from vwsearch.query import POSITIVE, QuerySpec, Rect


def mk(rel, R):
    ids = tuple(f"i{n}" for n in range(len(rel)))
    return Ranking(query_id="q", image_ids=ids, relevance=tuple(rel), relevant_total=R)


def reference_average_precision(rel, R, denominator="min"):
    """Independent evaluation: recompute P(r) from scratch at each rank."""
    N = len(rel)
    total = 0.0
    for r in range(1, N + 1):
        p_r = sum(rel[:r]) / r
        total += p_r * rel[r - 1]
    if R == 0:
        return 0.0
    denom = min(R, N) if denominator == "min" else R
    return total / denom if denom else 0.0


def test_precision_all_relevant():
    assert precision_at(mk([1, 1, 1], 3), 3) == 1.0


def test_precision_pattern():
    assert precision_at(mk([1, 0, 1], 2), 3) == pytest.approx(2 / 3)


def test_precision_none_relevant():
    assert precision_at(mk([0, 0, 0, 0], 5), 4) == 0.0


def test_precision_rank_out_of_range():
    with pytest.raises(InvalidInputError):
        precision_at(mk([1, 0], 1), 3)
    with pytest.raises(InvalidInputError):
        precision_at(mk([1, 0], 1), 0)


def test_avep_perfect():
    assert average_precision(mk([1, 1], 2)) == 1.0


def test_avep_hand_case():
    assert average_precision(mk([1, 0, 1], 2)) == pytest.approx((1 + 2 / 3) / 2)


def test_avep_no_relevant_retrieved():
    assert average_precision(mk([0, 0, 0], 5)) == 0.0
    assert average_precision(mk([0, 0, 0], 0)) == 0.0


def test_avep_literal_denominator():
    assert average_precision(mk([1, 0, 1], 5), denominator="literal") == pytest.approx(
        (1 + 2 / 3) / 5
    )


def test_avep_exhaustive_oracle():
    # every relevance pattern of length <= 8, every sensible R
    for n in range(1, 9):
        for rel in itertools.product((0, 1), repeat=n):
            for R in range(0, n + 3):
                if sum(rel) > R:
                    continue
                got = average_precision(mk(list(rel), R))
                want = reference_average_precision(list(rel), R)
                assert abs(got - want) < 1e-12
                got_lit = average_precision(mk(list(rel), R), denominator="literal")
                want_lit = reference_average_precision(list(rel), R, "literal")
                assert abs(got_lit - want_lit) < 1e-12


def test_avep_range_and_prefix_dominance(rng):
    for _ in range(200):
        n = int(rng.integers(1, 12))
        rel = rng.integers(0, 2, size=n).tolist()
        R = int(sum(rel) + rng.integers(0, 4))
        v = average_precision(mk(rel, R))
        assert 0.0 <= v <= 1.0
        # swapping a relevant item one rank earlier never decreases aveP
        for i in range(1, n):
            if rel[i] == 1 and rel[i - 1] == 0:
                better = rel.copy()
                better[i - 1], better[i] = 1, 0
                assert average_precision(mk(better, R)) >= v - 1e-12
                break


def test_cutoff_consistency(rng):
    rel = rng.integers(0, 2, size=10).tolist()
    R = 20
    full = average_precision(mk(rel, R))
    prefix = average_precision(mk(rel[:10], R))
    assert full == prefix


def test_map_mean():
    a = mk([1, 1], 2)  # aveP 1.0
    b = mk([0, 0], 2)  # aveP 0.0
    assert mean_average_precision([a, b]) == 0.5
    assert mean_average_precision([a]) == 1.0
    with pytest.raises(InvalidInputError):
        mean_average_precision([])


def separable_corpus(tmp_path, n_categories=4, per_category=6):
    """Each category uses a private block of words shared by its images."""
    images = []
    for c in range(n_categories):
        words = list(range(c * 10 + 1, c * 10 + 6))
        for i in range(per_category):
            word_locs = {w: [(float(w), float(i))] for w in words}
            images.append((f"cat{c}/im{i}", f"cat{c}", word_locs))
    return build_index(tmp_path, images, k=10 * n_categories + 5)


def test_whole_image_protocol_separable(tmp_path):
    idx = separable_corpus(tmp_path)
    for c in range(4):
        row = run_whole_image_protocol(idx, f"cat{c}", cutoff=20)
        assert row.map_score == pytest.approx(1.0, abs=1e-9)
        assert row.n_queries == 6
        assert row.cutoff == 20


def test_whole_image_protocol_unknown_category(tmp_path):
    idx = separable_corpus(tmp_path)
    with pytest.raises(InvalidInputError):
        run_whole_image_protocol(idx, "zebra")


def test_identical_descriptors_base_rate(tmp_path):
    # all images share one descriptor: ranking degenerates to the
    # deterministic tie order; oracle simulates that order directly
    images = []
    for c, cat in enumerate(["a", "b"]):
        for i in range(4):
            images.append((f"{cat}{i}", cat, {1: [(0.0, 0.0)], 2: [(1.0, 1.0)]}))
    idx = build_index(tmp_path, images, k=4)
    cutoff = 7
    row = run_whole_image_protocol(idx, "a", cutoff=cutoff)

    expected = []
    for source in sorted(i for i, _, _ in images if i.startswith("a")):
        order = [i for i, _, _ in sorted(images) if i != source]
        rel = [1 if i.startswith("a") else 0 for i in order][:cutoff]
        expected.append(reference_average_precision(rel, R=3))
    assert row.map_score == pytest.approx(sum(expected) / len(expected), abs=1e-12)


def test_region_protocol_explicit_all_relevant(tmp_path):
    idx = separable_corpus(tmp_path)
    everything = set(idx.images())
    queries = [
        QuerySpec("cat0/im0", (Rect(0, 0, 100, 100, POSITIVE),), limit=20),
        QuerySpec("cat1/im0", (Rect(0, 0, 100, 100, POSITIVE),), limit=20),
    ]
    report = run_region_protocol(
        idx,
        queries,
        relevance_rule="explicit",
        relevant_sets={q.source_image: everything for q in queries},
        cutoff=5,
    )
    assert all(row.map_score == pytest.approx(1.0) for row in report.rows)


def test_region_protocol_explicit_empty(tmp_path):
    idx = separable_corpus(tmp_path)
    queries = [QuerySpec("cat0/im0", (Rect(0, 0, 100, 100, POSITIVE),), limit=20)]
    report = run_region_protocol(
        idx,
        queries,
        relevance_rule="explicit",
        relevant_sets={"cat0/im0": set()},
        cutoff=5,
    )
    assert report.rows[0].map_score == 0.0


def test_region_protocol_tag_rule(tmp_path):
    idx = separable_corpus(tmp_path)
    queries = [
        QuerySpec(f"cat{c}/im0", (Rect(0, 0, 100, 100, POSITIVE),), limit=20)
        for c in range(4)
    ]
    report = run_region_protocol(idx, queries, relevance_rule="tag", cutoff=10)
    assert len(report.rows) == 4
    assert {r.category for r in report.rows} == {f"cat{c}" for c in range(4)}
    assert all(r.map_score == pytest.approx(1.0) for r in report.rows)


def test_region_protocol_errors(tmp_path):
    idx = separable_corpus(tmp_path)
    q = [QuerySpec("cat0/im0", (Rect(0, 0, 100, 100, POSITIVE),), limit=5)]
    with pytest.raises(InvalidInputError):
        run_region_protocol(idx, [], relevance_rule="tag")
    with pytest.raises(InvalidInputError):
        run_region_protocol(idx, q, relevance_rule="explicit")
    with pytest.raises(InvalidInputError):
        run_region_protocol(idx, q, relevance_rule="explicit", relevant_sets={})


def test_report_tsv_schema_and_write(tmp_path):
    idx = separable_corpus(tmp_path)
    report = run_whole_image_report(idx, cutoff=20)
    tsv = report.to_tsv()
    lines = tsv.strip().split("\n")
    assert lines[0] == "category\tmap\tprecision\tn_queries\tcutoff"
    assert len(lines) == 5
    out = report.write(tmp_path / "run")
    assert out.read_text() == tsv
    assert (tmp_path / "run" / "config.json").exists()
    table = report.format_table()
    assert "100.00" in table
