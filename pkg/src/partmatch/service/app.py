"""FastAPI application wrapping AnnotationService.

Paths and verbs are part of the public contract; bodies are the pydantic
schemas in this package. The app serializes all mutations through the
service's internal lock, so concurrent reviewer sessions are safe.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException, Query, Response
from fastapi.responses import JSONResponse

from ..annotation import AnnotationService, DuplicateShapeError, StaleLeaseError, UnknownLabelError
from .schemas import DecisionIn, ItemOut, PredictionIn, StatsOut, VocabOut


def _item_out(item: dict) -> dict:
    return {
        "shape_id": item["shape_id"],
        "status": item["status"],
        "low_confidence": item["low_confidence"],
        "avg_fused_conf": item["avg_fused_conf"],
        "revision": item["revision"],
        "prediction": item["prediction"],
        "lease": item["lease"],
        "final_partlets": item["final_partlets"],
        "review_duration": item["review_duration"],
    }


def create_app(service: AnnotationService) -> FastAPI:
    app = FastAPI(title="partmatch annotation service")
    app.state.service = service

    @app.post("/shapes", response_model=ItemOut, status_code=201)
    def ingest(prediction: PredictionIn):
        try:
            item = service.ingest(prediction.model_dump())
        except DuplicateShapeError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return _item_out(item)

    @app.get("/queue/next", response_model=ItemOut | None)
    def lease_next(reviewer: str = Query(min_length=1)):
        item = service.lease_next(reviewer)
        if item is None:
            return Response(status_code=204)
        return _item_out(item)

    @app.post("/items/{item_id}/decision", response_model=ItemOut)
    def submit_decision(item_id: str, decision: DecisionIn):
        try:
            item = service.submit_decision(
                item_id,
                decision.reviewer,
                decision.revision,
                [v.model_dump(exclude_none=True) for v in decision.verdicts],
            )
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except StaleLeaseError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except UnknownLabelError as exc:
            return JSONResponse(
                status_code=422,
                content={"detail": str(exc), "suggestions": exc.suggestions},
            )
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return _item_out(item)

    @app.get("/items/{item_id}", response_model=ItemOut)
    def get_item(item_id: str):
        try:
            return _item_out(service.get_item(item_id))
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.get("/export")
    def export(status: str = "AUTO_ACCEPTED,REVIEWED"):
        statuses = tuple(s.strip() for s in status.split(",") if s.strip())
        data = service.export(statuses=statuses)
        return Response(content=data, media_type="application/json")

    @app.get("/stats", response_model=StatsOut)
    def stats():
        return service.stats()

    @app.get("/vocab", response_model=VocabOut)
    def vocab(object_class: str = Query(alias="class")):
        labels = service.vocab.get(object_class, [])
        resolved = sorted({service.cmap.resolve(l) for l in labels})
        return {"object_class": object_class, "labels": resolved}

    return app
