# src/data_pipeline/schemas.py

from typing import Optional

from pydantic import BaseModel, Field, ValidationError, field_validator

from src import config

__all__ = [
    "CorpusRecord", "PairRecord", "TripletRecord", "QueryRecord",
    "LabeledTextRecord", "ScoredPairRecord", "RerankRecord", "ValidationError",
]


class CorpusRecord(BaseModel):
    """One document of a pre-training or evaluation corpus."""
    id: str
    text: str


class PairRecord(BaseModel):
    """Query-target training pair; batches never mix sources."""
    query: str
    target: str
    source: str = "default"


class TripletRecord(BaseModel):
    """Hard-negative record: one positive and exactly fifteen negatives."""
    query: str
    positive: str
    negatives: list[str]

    @field_validator("negatives")
    @classmethod
    def _exactly_fifteen(cls, negatives: list[str]) -> list[str]:
        if len(negatives) != config.NUM_HARD_NEGATIVES:
            raise ValueError(
                f"expected exactly {config.NUM_HARD_NEGATIVES} negatives, got {len(negatives)}"
            )
        return negatives


class QueryRecord(BaseModel):
    id: str
    text: str


class LabeledTextRecord(BaseModel):
    """Clustering / classification item."""
    id: Optional[str] = None
    text: str
    label: str


class ScoredPairRecord(BaseModel):
    """STS item (gold similarity score) or pair-classification item (0/1 score)."""
    text1: str
    text2: str
    score: float = Field(..., ge=0)


class RerankRecord(BaseModel):
    """A query with candidate passages split into relevant and non-relevant ones."""
    query: str
    positive: list[str] = Field(..., min_length=1)
    negative: list[str] = Field(default_factory=list)
