"""HTTP/JSON API over a committed index, consumed by the browser client."""

from __future__ import annotations

import mimetypes
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .errors import InvalidInputError, InvalidQueryError, NotFoundError
from .query import NEGATIVE, POSITIVE, QuerySpec, Rect, region_query
from .store import InvertedIndex
from .vocabulary import Dictionary, load_dictionary


@dataclass
class EngineConfig:
    dictionary_path: str
    index_root: str
    image_root: str
    max_points: int = 500
    upright: bool = False
    default_lambda: float = 1.0
    default_limit: int = 20
    bind: str = "127.0.0.1:8000"
    static_dir: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "EngineConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in data.items() if k in known})


class RectBody(BaseModel):
    x0: float
    y0: float
    x1: float
    y1: float
    polarity: str


class QueryBody(BaseModel):
    source_image: str
    rects: list[RectBody]
    negative_weight: float | None = Field(default=None, alias="lambda")
    limit: int | None = None
    exclude_source: bool = True

    model_config = {"populate_by_name": True}


def create_app(config: EngineConfig) -> FastAPI:
    """Build the service; raises if the dictionary and index disagree."""
    dictionary = load_dictionary(config.dictionary_path)
    index = InvertedIndex.open(config.index_root, dictionary.checksum())
    image_root = Path(config.image_root)
    app = FastAPI(title="vwsearch")
    app.state.index = index
    app.state.dictionary = dictionary

    @app.get("/api/health")
    def health():
        return {
            "status": "ok",
            "images": len(index.images()),
            "dictionary_size": dictionary.size,
            "tags": index.tags(),
        }

    @app.get("/api/categories")
    def categories():
        return index.tags()

    @app.get("/api/search")
    def search(tag: str):
        return index.tag_search(tag)

    @app.get("/api/images/{image_id:path}/words")
    def image_words(image_id: str):
        try:
            desc = index.descriptor(image_id)
        except NotFoundError:
            raise HTTPException(status_code=404, detail=f"unknown image {image_id}")
        return [
            {
                "index": o.index,
                "tf": o.tf,
                "idf": o.idf,
                "weight": o.weight,
                "locations": [[x, y] for x, y in o.locations],
            }
            for o in desc.occurrences
        ]

    @app.get("/api/images/{image_id:path}")
    def image_bytes(image_id: str):
        if not index.has_image(image_id):
            raise HTTPException(status_code=404, detail=f"unknown image {image_id}")
        path = image_root / image_id
        if not path.is_file():
            raise HTTPException(status_code=404, detail=f"image file missing: {image_id}")
        media = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
        return Response(content=path.read_bytes(), media_type=media)

    @app.post("/api/query")
    def query(body: QueryBody):
        try:
            rects = tuple(
                Rect(r.x0, r.y0, r.x1, r.y1, r.polarity) for r in body.rects
            )
            spec = QuerySpec(
                source_image=body.source_image,
                rects=rects,
                limit=body.limit if body.limit is not None else config.default_limit,
                negative_weight=(
                    body.negative_weight
                    if body.negative_weight is not None
                    else config.default_lambda
                ),
                exclude_source=body.exclude_source,
            )
            results = region_query(spec, index)
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except (InvalidQueryError, InvalidInputError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return [
            {
                "image_id": r.image_id,
                "score": r.score,
                "matched_positive": len(r.matched_positive),
                "matched_negative": len(r.matched_negative),
            }
            for r in results
        ]

    if config.static_dir and Path(config.static_dir).is_dir():
        app.mount("/", StaticFiles(directory=config.static_dir, html=True), name="ui")

    return app
