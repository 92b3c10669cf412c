import json

import numpy as np
import pytest
from PIL import Image

from vwsearch.cli import EXIT_DATA, EXIT_IO, EXIT_OK, EXIT_USAGE, main
from vwsearch.store import InvertedIndex
from vwsearch.vocabulary import load_dictionary


CATS = ["bus", "forest", "horse"]


def render_corpus(root, per_category=3, size=64):
    """Tiny synthetic corpus: per-category base texture plus mild per-image
    noise, so same-category images share interest points."""
    root.mkdir(parents=True, exist_ok=True)
    tag_lines = []
    for c, cat in enumerate(CATS):
        base = np.random.default_rng(100 + c).random((size, size))
        for i in range(per_category):
            noise = np.random.default_rng(1000 * c + i).random((size, size))
            arr = np.clip(0.85 * base + 0.15 * noise, 0, 1)
            (root / cat).mkdir(exist_ok=True)
            path = root / cat / f"im{i}.png"
            Image.fromarray((arr * 255).astype(np.uint8), mode="L").save(path)
            tag_lines.append(f"{cat}/im{i}.png\t{cat}")
    tags = root.parent / "tags.tsv"
    tags.write_text("\n".join(tag_lines) + "\n")
    return tags


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    ws = tmp_path_factory.mktemp("cli")
    images = ws / "images"
    tags = render_corpus(images)
    points = ws / "points"
    assert main(["extract", str(images), str(points), "--max-points", "80"]) == EXIT_OK
    dict_path = ws / "dict.tsdc"
    assert (
        main(
            [
                "--seed", "5",
                "build-dict",
                str(points),
                "--out", str(dict_path),
                "--k", "24",
                "--iterations", "15",
                "--nn", "5",
            ]
        )
        == EXIT_OK
    )
    index_root = ws / "index"
    assert (
        main(
            [
                "index",
                str(images),
                "--dict", str(dict_path),
                "--index-root", str(index_root),
                "--tags", str(tags),
                "--max-points", "80",
            ]
        )
        == EXIT_OK
    )
    return ws


def test_extract_empty_dir(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    assert main(["extract", str(tmp_path / "empty"), str(tmp_path / "out")]) == EXIT_OK
    assert "0 images" in capsys.readouterr().out


def test_extract_missing_dir(tmp_path):
    assert main(["extract", str(tmp_path / "nope"), str(tmp_path / "out")]) == EXIT_IO


def test_extract_writes_point_files(workspace):
    files = sorted((workspace / "points").glob("*.tsip"))
    assert len(files) == 9


def test_build_dict_deterministic(workspace, tmp_path):
    out1 = tmp_path / "d1.tsdc"
    out2 = tmp_path / "d2.tsdc"
    args = [
        "--seed", "5",
        "build-dict",
        str(workspace / "points"),
        "--k", "24",
        "--iterations", "15",
        "--nn", "5",
    ]
    assert main(args + ["--out", str(out1)]) == EXIT_OK
    assert main(args + ["--out", str(out2)]) == EXIT_OK
    assert out1.read_bytes() == out2.read_bytes()
    assert out1.read_bytes() == (workspace / "dict.tsdc").read_bytes()


def test_build_dict_json_mirror(workspace, tmp_path):
    out = tmp_path / "d.tsdc"
    js = tmp_path / "d.json"
    assert (
        main(
            [
                "--seed", "5",
                "build-dict",
                str(workspace / "points"),
                "--out", str(out),
                "--k", "8",
                "--iterations", "3",
                "--nn", "3",
                "--json-out", str(js),
            ]
        )
        == EXIT_OK
    )
    payload = json.loads(js.read_text())
    assert payload["size"] == 8


def test_index_tags_searchable(workspace):
    idx = InvertedIndex.open(workspace / "index")
    for cat in CATS:
        assert idx.tag_search(cat) == [f"{cat}/im{i}.png" for i in range(3)]


def test_index_idempotent_rerun(workspace):
    index_root = workspace / "index"
    before = (index_root / "manifest.json").read_bytes()
    assert (
        main(
            [
                "index",
                str(workspace / "images"),
                "--dict", str(workspace / "dict.tsdc"),
                "--index-root", str(index_root),
                "--tags", str(workspace / "tags.tsv"),
                "--max-points", "80",
            ]
        )
        == EXIT_OK
    )
    assert (index_root / "manifest.json").read_bytes() == before


def test_index_wrong_dictionary_fails(workspace, tmp_path):
    other = tmp_path / "other.tsdc"
    assert (
        main(
            [
                "--seed", "9",
                "build-dict",
                str(workspace / "points"),
                "--out", str(other),
                "--k", "8",
                "--iterations", "2",
                "--nn", "3",
            ]
        )
        == EXIT_OK
    )
    code = main(
        [
            "index",
            str(workspace / "images"),
            "--dict", str(other),
            "--index-root", str(workspace / "index"),
        ]
    )
    assert code == EXIT_DATA


def test_query_whole_image(workspace, capsys):
    assert (
        main(
            [
                "query",
                "--index-root", str(workspace / "index"),
                "--source", "bus/im0.png",
                "--whole-image",
                "--limit", "5",
            ]
        )
        == EXIT_OK
    )
    out = capsys.readouterr().out
    assert out.strip()
    assert "score=" in out


def test_query_with_rects(workspace, capsys):
    assert (
        main(
            [
                "query",
                "--index-root", str(workspace / "index"),
                "--source", "bus/im0.png",
                "--rect", "0,0,64,64,pos",
                "--limit", "5",
            ]
        )
        == EXIT_OK
    )
    assert capsys.readouterr().out.strip()


def test_query_unknown_source(workspace):
    code = main(
        [
            "query",
            "--index-root", str(workspace / "index"),
            "--source", "nope.png",
            "--whole-image",
        ]
    )
    assert code == EXIT_DATA


def test_query_bad_rect(workspace):
    code = main(
        [
            "query",
            "--index-root", str(workspace / "index"),
            "--source", "bus/im0.png",
            "--rect", "0,0,64,64",
        ]
    )
    assert code == EXIT_DATA


def test_evaluate_whole_image(workspace, tmp_path, capsys):
    run = tmp_path / "run"
    assert (
        main(
            [
                "evaluate",
                "--index-root", str(workspace / "index"),
                "--protocol", "whole-image",
                "--cutoff", "20",
                "--out", str(run),
            ]
        )
        == EXIT_OK
    )
    tsv = (run / "report.tsv").read_text().strip().split("\n")
    assert tsv[0] == "category\tmap\tprecision\tn_queries\tcutoff"
    assert len(tsv) == 1 + len(CATS)


def test_evaluate_region_with_relevant_set(workspace, tmp_path):
    queries = tmp_path / "queries.json"
    queries.write_text(
        json.dumps(
            [
                {
                    "source_image": "bus/im0.png",
                    "rects": [{"x0": 0, "y0": 0, "x1": 64, "y1": 64, "polarity": "positive"}],
                }
            ]
        )
    )
    relevant = tmp_path / "relevant.txt"
    relevant.write_text("bus/im1.png\nbus/im2.png\n")
    run = tmp_path / "run"
    assert (
        main(
            [
                "evaluate",
                "--index-root", str(workspace / "index"),
                "--protocol", "region",
                "--queries", str(queries),
                "--relevant-set", str(relevant),
                "--out", str(run),
            ]
        )
        == EXIT_OK
    )
    assert (run / "report.tsv").exists()


def test_usage_errors():
    assert pytest.raises(SystemExit, main, ["frobnicate"]).value.code == EXIT_USAGE
    assert pytest.raises(SystemExit, main, []).value.code == EXIT_USAGE


def test_dictionary_loadable(workspace):
    d = load_dictionary(workspace / "dict.tsdc")
    assert d.size == 24
    assert d.build_meta["seed"] == 5
    assert float(np.max(d.idf)) > 0
