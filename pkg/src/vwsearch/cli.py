"""Command-line interface: extract, build-dict, index, query, evaluate, serve.

Exit codes: 0 success, 1 usage error, 2 data/config error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import InvalidInputError, InvalidQueryError, NotFoundError, StorageError
from .evaluation import run_region_protocol, run_whole_image_report
from .pipeline import (
    DEFAULT_MAX_POINTS,
    build_dictionary_from_points,
    extract_directory,
    index_corpus,
    read_tags_file,
)
from .query import NEGATIVE, POSITIVE, QuerySpec, Rect, region_query, whole_image_query
from .store import InvertedIndex
from .vocabulary import dictionary_to_json, load_dictionary, save_dictionary

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_IO = 3

log = logging.getLogger("vwsearch")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text())


def _parse_rect(text: str) -> Rect:
    # format: x0,y0,x1,y1,pos|neg
    parts = text.split(",")
    if len(parts) != 5:
        raise InvalidInputError(f"bad rect {text!r}; expected x0,y0,x1,y1,pos|neg")
    x0, y0, x1, y1 = (float(v) for v in parts[:4])
    pol = {"pos": POSITIVE, "neg": NEGATIVE}.get(parts[4].strip())
    if pol is None:
        raise InvalidInputError(f"bad rect polarity {parts[4]!r}")
    return Rect(x0, y0, x1, y1, pol)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vwsearch", description=__doc__)
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--seed", type=int, default=0, help="seed for stochastic steps")
    p.add_argument("--verbose", "-v", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("extract", help="detect interest points for a directory of images")
    sp.add_argument("image_dir")
    sp.add_argument("out_dir")
    sp.add_argument("--max-points", type=int, default=DEFAULT_MAX_POINTS)
    sp.add_argument("--upright", action="store_true")
    sp.add_argument("--sample-mode", choices=["top", "random"], default="top")

    sp = sub.add_parser("build-dict", help="cluster stored points into a dictionary")
    sp.add_argument("points_dir")
    sp.add_argument("--out", required=True)
    sp.add_argument("--k", type=int, default=10000)
    sp.add_argument("--iterations", type=int, default=250)
    sp.add_argument("--nn", type=int, default=25)
    sp.add_argument("--trees", type=int, default=8)
    sp.add_argument("--checks", type=int, default=32)
    sp.add_argument("--json-out", help="also write a JSON mirror of the dictionary")

    sp = sub.add_parser("index", help="extract, encode, and index a corpus")
    sp.add_argument("image_dir")
    sp.add_argument("--dict", required=True, dest="dictionary")
    sp.add_argument("--index-root", required=True)
    sp.add_argument("--tags", help="TSV file: image_id <TAB> tag")
    sp.add_argument("--max-points", type=int, default=DEFAULT_MAX_POINTS)
    sp.add_argument("--upright", action="store_true")
    sp.add_argument("--compact", action="store_true", help="single-file postings")

    sp = sub.add_parser("query", help="run a query against an index")
    sp.add_argument("--index-root", required=True)
    sp.add_argument("--source", required=True)
    sp.add_argument("--rect", action="append", default=[], help="x0,y0,x1,y1,pos|neg")
    sp.add_argument("--whole-image", action="store_true")
    sp.add_argument("--limit", type=int, default=20)
    sp.add_argument("--lambda", dest="negative_weight", type=float, default=1.0)
    sp.add_argument("--keep-source", action="store_true")

    sp = sub.add_parser("evaluate", help="run an evaluation protocol")
    sp.add_argument("--index-root", required=True)
    sp.add_argument("--protocol", choices=["whole-image", "region"], required=True)
    sp.add_argument("--cutoff", type=int, default=20)
    sp.add_argument("--category", action="append", default=None)
    sp.add_argument("--denominator", choices=["min", "literal"], default="min")
    sp.add_argument("--queries", help="JSON query file for the region protocol")
    sp.add_argument("--relevant-set", help="newline-delimited relevant ids (explicit rule)")
    sp.add_argument("--out", required=True, help="run directory for report files")

    sp = sub.add_parser("serve", help="serve the HTTP/JSON API")
    sp.add_argument("--index-root", required=True)
    sp.add_argument("--dict", required=True, dest="dictionary")
    sp.add_argument("--image-root", required=True)
    sp.add_argument("--bind", default="127.0.0.1:8000")
    sp.add_argument("--static", help="directory of built UI assets to serve at /")
    return p


def _cmd_extract(args) -> int:
    summary = extract_directory(
        args.image_dir,
        args.out_dir,
        max_points=args.max_points,
        upright=args.upright,
        sample_mode=args.sample_mode,
        seed=args.seed,
    )
    print(
        f"extracted {summary.points} points from {summary.images} images "
        f"({len(summary.failures)} failures)"
    )
    return EXIT_OK


def _cmd_build_dict(args) -> int:
    dictionary = build_dictionary_from_points(
        args.points_dir,
        k=args.k,
        iterations=args.iterations,
        nn_count=args.nn,
        seed=args.seed,
        tree_count=args.trees,
        checks=args.checks,
    )
    save_dictionary(dictionary, args.out)
    if args.json_out:
        Path(args.json_out).write_text(dictionary_to_json(dictionary))
    print(f"wrote dictionary of {dictionary.size} words to {args.out}")
    return EXIT_OK


def _cmd_index(args) -> int:
    dictionary = load_dictionary(args.dictionary)
    tags = read_tags_file(args.tags) if args.tags else None
    summary = index_corpus(
        dictionary,
        args.image_dir,
        args.index_root,
        tags=tags,
        max_points=args.max_points,
        upright=args.upright,
        compact=args.compact,
    )
    print(f"indexed {summary.images} images ({len(summary.failures)} failures)")
    return EXIT_OK


def _cmd_query(args) -> int:
    index = InvertedIndex.open(args.index_root)
    if args.whole_image:
        results = whole_image_query(
            args.source, index, limit=args.limit, exclude_source=not args.keep_source
        )
    else:
        rects = tuple(_parse_rect(r) for r in args.rect)
        spec = QuerySpec(
            source_image=args.source,
            rects=rects,
            limit=args.limit,
            negative_weight=args.negative_weight,
            exclude_source=not args.keep_source,
        )
        results = region_query(spec, index)
    for rank, r in enumerate(results, start=1):
        print(
            f"{rank}\t{r.image_id}\tscore={r.score:g}"
            f"\t+{len(r.matched_positive)}\t-{len(r.matched_negative)}"
        )
    return EXIT_OK


def _load_query_file(path: str) -> list[QuerySpec]:
    specs = []
    for item in json.loads(Path(path).read_text()):
        rects = tuple(
            Rect(r["x0"], r["y0"], r["x1"], r["y1"], r.get("polarity", POSITIVE))
            for r in item["rects"]
        )
        specs.append(
            QuerySpec(
                source_image=item["source_image"],
                rects=rects,
                limit=item.get("limit", 20),
                negative_weight=item.get("lambda", 1.0),
            )
        )
    return specs


def _cmd_evaluate(args) -> int:
    index = InvertedIndex.open(args.index_root)
    if args.protocol == "whole-image":
        report = run_whole_image_report(
            index,
            categories=args.category,
            cutoff=args.cutoff,
            denominator=args.denominator,
        )
    else:
        if not args.queries:
            raise InvalidInputError("region protocol requires --queries")
        specs = _load_query_file(args.queries)
        relevant_sets = None
        rule = "tag"
        if args.relevant_set:
            rule = "explicit"
            ids = {
                line.strip()
                for line in Path(args.relevant_set).read_text().splitlines()
                if line.strip()
            }
            relevant_sets = {s.source_image: ids for s in specs}
        report = run_region_protocol(
            index,
            specs,
            relevance_rule=rule,
            relevant_sets=relevant_sets,
            cutoff=args.cutoff,
            denominator=args.denominator,
        )
    tsv = report.write(args.out)
    print(report.format_table())
    print(f"report written to {tsv}")
    return EXIT_OK


def _cmd_serve(args, config: dict) -> int:
    import uvicorn

    from .service import EngineConfig, create_app

    merged = dict(config)
    merged.update(
        dictionary_path=args.dictionary,
        index_root=args.index_root,
        image_root=args.image_root,
        bind=args.bind,
        static_dir=args.static,
    )
    engine_config = EngineConfig.from_dict(merged)
    app = create_app(engine_config)
    host, _, port = engine_config.bind.partition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        config = _load_config(args.config)
        if args.command == "extract":
            return _cmd_extract(args)
        if args.command == "build-dict":
            return _cmd_build_dict(args)
        if args.command == "index":
            return _cmd_index(args)
        if args.command == "query":
            return _cmd_query(args)
        if args.command == "evaluate":
            return _cmd_evaluate(args)
        if args.command == "serve":
            return _cmd_serve(args, config)
        parser.error(f"unknown command {args.command}")
    except (InvalidInputError, InvalidQueryError, NotFoundError, StorageError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
