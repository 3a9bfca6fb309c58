"""Request/response bodies for the annotation HTTP API."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field, field_validator


class PartletOut(BaseModel):
    name: str
    conf_soft: float = Field(ge=0.0, le=1.0)
    conf_maha: float = Field(ge=0.0, le=1.0)
    conf_fused: float = Field(ge=0.0, le=1.0)
    mask_point_indices: list[int]


class PredictionIn(BaseModel):
    shape_id: str = Field(min_length=1)
    category: str | None = None
    partlets: list[PartletOut]
    unlabeled_count: int = 0


class LeaseOut(BaseModel):
    reviewer: str
    granted: float
    expiry: float


class ItemOut(BaseModel):
    shape_id: str
    status: Literal["AUTO_ACCEPTED", "PENDING", "LEASED", "REVIEWED"]
    low_confidence: bool
    avg_fused_conf: float
    revision: int
    prediction: PredictionIn
    lease: LeaseOut | None = None
    final_partlets: list[PartletOut] | None = None
    review_duration: float = 0.0


class VerdictIn(BaseModel):
    partlet_index: int = Field(ge=0)
    verdict: Literal["ACCEPT", "RELABEL", "REJECT_PART"]
    new_label: str | None = None

    @field_validator("new_label")
    @classmethod
    def _relabel_needs_label(cls, v, info):
        if info.data.get("verdict") == "RELABEL" and not v:
            raise ValueError("RELABEL requires new_label")
        return v


class DecisionIn(BaseModel):
    reviewer: str = Field(min_length=1)
    revision: int = Field(ge=0)
    verdicts: list[VerdictIn]


class StatsOut(BaseModel):
    items: int
    by_status: dict[str, int]
    queue_length: int


class VocabOut(BaseModel):
    object_class: str
    labels: list[str]


class ErrorOut(BaseModel):
    detail: str
    suggestions: list[str] | None = None
