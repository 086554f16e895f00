"""Request/response models for the recruitment service."""

from __future__ import annotations

from pydantic import BaseModel, Field

from ..ledger import AdmissionDecision, ProgressReport


class SiteIn(BaseModel):
    site_id: str = Field(min_length=1)
    responses: dict[str, str | float]
    metadata: dict[str, str] = Field(default_factory=dict)


class CategoryRefOut(BaseModel):
    moderator: str
    label: str


class DecisionOut(BaseModel):
    verdict: str
    profile: dict[str, str]
    binding_categories: list[CategoryRefOut]
    tallies_after: dict[str, dict[str, int]]

    @classmethod
    def from_decision(cls, decision: AdmissionDecision) -> "DecisionOut":
        return cls.model_validate(decision.to_dict())


class CategoryProgressOut(BaseModel):
    moderator: str
    label: str
    tally: int
    target: float
    limit: int
    remaining: int
    status: str


class StatusOut(BaseModel):
    plan_digest: str
    accepted: int
    total_target: int
    complete: bool
    categories: list[CategoryProgressOut]
    steer_toward: list[CategoryRefOut]

    @classmethod
    def from_report(cls, report: ProgressReport) -> "StatusOut":
        return cls.model_validate(report.to_dict())


class WithdrawalOut(BaseModel):
    site_id: str
    status: str = "withdrawn"
    seq: int


class ErrorBody(BaseModel):
    code: str
    message: str
    detail: str | None = None
