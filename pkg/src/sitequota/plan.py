"""Quota plans: per-category targets and enforceable integer limits.

Given population shares and the study's total site count, each category
gets a real-valued target (total * share, never rounded) and an integer
limit floor(total * (share + slack)), clamped up to ceil(target) so a limit
can never sit below its own target. Targets and limits are computed in
decimal arithmetic on the shares' shortest decimal form, so published shares
like 0.18 produce exactly the products a reader would compute by hand
(80 * 0.18 = 14.4, not 14.399999999999999).
"""

from __future__ import annotations

import json
import warnings as _warnings
from dataclasses import dataclass
from decimal import ROUND_CEILING, ROUND_FLOOR, Decimal, localcontext
from pathlib import Path

from .errors import DocumentError
from .estimation import ModeratorSpec, PopulationEstimates, canonical_digest

PLAN_SCHEMA_VERSION = 1

DEFAULT_SLACK = 0.05


class QuotaPlanWarning(UserWarning):
    """A plan was built, but a limit had to be clamped or slack is tiny."""


class ProvenanceWarning(UserWarning):
    """A loaded document's recorded digest does not match its content."""


@dataclass(frozen=True)
class PlanCategory:
    moderator: str
    label: str
    share: float
    target: float
    limit: int

    def to_dict(self) -> dict:
        return {
            "moderator": self.moderator,
            "label": self.label,
            "share": self.share,
            "target": self.target,
            "limit": self.limit,
        }


@dataclass(frozen=True)
class QuotaPlan:
    """Immutable compiled plan: one limit per category across all moderators."""

    total_target: int
    slack: float
    categories: tuple[PlanCategory, ...]
    moderators: tuple[ModeratorSpec, ...]
    slack_overrides: tuple[tuple[str, float], ...] = ()
    estimates_digest: str | None = None

    def slack_for(self, moderator: str) -> float:
        for name, value in self.slack_overrides:
            if name == moderator:
                return value
        return self.slack

    def moderator_names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.moderators)

    def categories_for(self, moderator: str) -> tuple[PlanCategory, ...]:
        return tuple(c for c in self.categories if c.moderator == moderator)

    def category(self, moderator: str, label: str) -> PlanCategory:
        for c in self.categories:
            if c.moderator == moderator and c.label == label:
                return c
        raise DocumentError(f"plan has no category {moderator}/{label}")

    def limit_map(self) -> dict[tuple[str, str], int]:
        return {(c.moderator, c.label): c.limit for c in self.categories}

    def spec(self, moderator: str) -> ModeratorSpec:
        for m in self.moderators:
            if m.name == moderator:
                return m
        raise DocumentError(f"plan has no moderator {moderator!r}")

    def content(self) -> dict:
        doc: dict = {
            "schema_version": PLAN_SCHEMA_VERSION,
            "J": self.total_target,
            "delta": self.slack,
            "moderators": [m.to_dict() for m in self.moderators],
            "categories": [c.to_dict() for c in self.categories],
        }
        if self.slack_overrides:
            doc["delta_overrides"] = dict(self.slack_overrides)
        return doc

    def digest(self) -> str:
        return canonical_digest(self.content())


def _decimal_products(share: float, slack: float, total: int) -> tuple[float, int, int]:
    """(target, floor(total*(share+slack)), ceil(total*share)) in exact decimal."""
    with localcontext() as ctx:
        ctx.prec = 50
        d_share = Decimal(repr(share))
        d_slack = Decimal(repr(slack))
        d_target = d_share * total
        target = float(d_target)
        floor_limit = int(
            ((d_share + d_slack) * total).to_integral_value(rounding=ROUND_FLOOR)
        )
        ceil_target = int(d_target.to_integral_value(rounding=ROUND_CEILING))
    return target, floor_limit, ceil_target


def build_plan(
    estimates: PopulationEstimates,
    total: int,
    slack: float = DEFAULT_SLACK,
    slack_overrides: dict[str, float] | None = None,
) -> QuotaPlan:
    """Compile estimates into a plan for *total* sites with the given slack.

    Emits a QuotaPlanWarning whenever a floor-rounded limit had to be
    clamped up to the ceiling of its own target.
    """
    if total < 1:
        raise DocumentError(f"total site count must be at least 1, got {total}")
    if slack < 0:
        raise DocumentError(f"slack must be nonnegative, got {slack}")
    overrides = dict(slack_overrides or {})
    known = {m.spec.name for m in estimates.moderators}
    unknown = set(overrides) - known
    if unknown:
        raise DocumentError(f"slack overrides for unknown moderators: {sorted(unknown)}")
    for name, value in overrides.items():
        if value < 0:
            raise DocumentError(f"slack override for {name!r} must be nonnegative")

    categories: list[PlanCategory] = []
    for mod in estimates.moderators:
        effective = overrides.get(mod.spec.name, slack)
        for cat in mod.categories:
            target, floor_limit, ceil_target = _decimal_products(
                cat.share, effective, total
            )
            limit = floor_limit
            if cat.share > 0 and ceil_target > floor_limit:
                limit = ceil_target
                _warnings.warn(
                    f"limit for {mod.spec.name}/{cat.label} clamped up to "
                    f"{limit} so its target {target} stays reachable",
                    QuotaPlanWarning,
                    stacklevel=2,
                )
            categories.append(
                PlanCategory(
                    moderator=mod.spec.name,
                    label=cat.label,
                    share=cat.share,
                    target=target,
                    limit=limit,
                )
            )
    if total * slack < 1:
        _warnings.warn(
            f"slack {slack} amounts to under one site at total {total}; "
            "limits may equal bare targets",
            QuotaPlanWarning,
            stacklevel=2,
        )
    return QuotaPlan(
        total_target=total,
        slack=slack,
        categories=tuple(categories),
        moderators=estimates.specs(),
        slack_overrides=tuple(sorted(overrides.items())),
        estimates_digest=estimates.digest(),
    )


@dataclass(frozen=True)
class ModeratorFeasibility:
    moderator: str
    limit_sum: int
    feasible: bool


@dataclass(frozen=True)
class FeasibilityReport:
    total_target: int
    moderators: tuple[ModeratorFeasibility, ...]
    warnings: tuple[str, ...]

    @property
    def feasible(self) -> bool:
        return all(m.feasible for m in self.moderators)

    def to_dict(self) -> dict:
        return {
            "total_target": self.total_target,
            "feasible": self.feasible,
            "moderators": [
                {"moderator": m.moderator, "limit_sum": m.limit_sum, "feasible": m.feasible}
                for m in self.moderators
            ],
            "warnings": list(self.warnings),
        }


def check_feasibility(plan: QuotaPlan) -> FeasibilityReport:
    """Per moderator, can the limits jointly accommodate the full total?"""
    rows: list[ModeratorFeasibility] = []
    notes: list[str] = []
    for name in plan.moderator_names():
        cats = plan.categories_for(name)
        limit_sum = sum(c.limit for c in cats)
        rows.append(
            ModeratorFeasibility(
                moderator=name,
                limit_sum=limit_sum,
                feasible=limit_sum >= plan.total_target,
            )
        )
        effective = plan.slack_for(name)
        for c in cats:
            _, floor_limit, ceil_target = _decimal_products(
                c.share, effective, plan.total_target
            )
            if c.share > 0 and c.limit == ceil_target > floor_limit:
                notes.append(
                    f"{name}/{c.label}: limit clamped up to ceil(target) = {c.limit}"
                )
        if plan.total_target * effective < 1:
            notes.append(
                f"{name}: slack {effective} is under one site at total "
                f"{plan.total_target} and may round away entirely"
            )
    return FeasibilityReport(
        total_target=plan.total_target,
        moderators=tuple(rows),
        warnings=tuple(notes),
    )


def plan_to_document(plan: QuotaPlan) -> dict:
    doc = plan.content()
    doc["provenance"] = {
        "estimates_digest": plan.estimates_digest,
        "content_digest": plan.digest(),
    }
    return doc


def save_plan(plan: QuotaPlan, path: str | Path | None = None) -> dict:
    """Serialize the plan; when *path* is given, also write it as JSON."""
    doc = plan_to_document(plan)
    if path is not None:
        Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return doc


def load_plan(source: str | Path | dict) -> QuotaPlan:
    """Parse and validate a plan document (path or already-parsed dict).

    Raises DocumentError for structural problems; a digest that no longer
    matches the content only warns (the plan may have been hand-edited).
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.is_file():
            raise DocumentError(f"plan document not found: {path}")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DocumentError(f"plan document is not valid JSON: {exc}") from None
    else:
        doc = source
    if not isinstance(doc, dict):
        raise DocumentError("plan document must be a JSON object")
    version = doc.get("schema_version")
    if version != PLAN_SCHEMA_VERSION:
        raise DocumentError(
            f"plan schema_version {version!r} is not {PLAN_SCHEMA_VERSION}"
        )
    for field in ("J", "delta", "categories", "moderators"):
        if field not in doc:
            raise DocumentError(f"plan document missing field {field!r}")

    categories = []
    for raw in doc["categories"]:
        for field in ("moderator", "label", "share", "target", "limit"):
            if field not in raw:
                raise DocumentError(f"plan category missing field {field!r}")
        categories.append(
            PlanCategory(
                moderator=raw["moderator"],
                label=raw["label"],
                share=float(raw["share"]),
                target=float(raw["target"]),
                limit=int(raw["limit"]),
            )
        )
    moderators = tuple(ModeratorSpec.from_dict(m) for m in doc["moderators"])
    overrides = tuple(sorted((doc.get("delta_overrides") or {}).items()))
    provenance = doc.get("provenance") or {}
    plan = QuotaPlan(
        total_target=int(doc["J"]),
        slack=float(doc["delta"]),
        categories=tuple(categories),
        moderators=moderators,
        slack_overrides=overrides,
        estimates_digest=provenance.get("estimates_digest"),
    )
    validate_plan(plan)
    recorded = provenance.get("content_digest")
    if recorded is not None and recorded != plan.digest():
        _warnings.warn(
            "plan content does not match its recorded digest; "
            "the document may have been edited after it was built",
            ProvenanceWarning,
            stacklevel=2,
        )
    return plan


def validate_plan(plan: QuotaPlan) -> None:
    if plan.total_target < 1:
        raise DocumentError(f"plan total must be at least 1, got {plan.total_target}")
    names = plan.moderator_names()
    if len(set(names)) != len(names):
        raise DocumentError(f"duplicate moderator names in plan: {list(names)}")
    by_moderator: dict[str, list[PlanCategory]] = {}
    for c in plan.categories:
        if c.moderator not in names:
            raise DocumentError(
                f"category {c.moderator}/{c.label} references an undeclared moderator"
            )
        by_moderator.setdefault(c.moderator, []).append(c)
        if not (0.0 <= c.share <= 1.0):
            raise DocumentError(
                f"share {c.share!r} for {c.moderator}/{c.label} is outside [0, 1]"
            )
        if c.limit < 0:
            raise DocumentError(
                f"limit for {c.moderator}/{c.label} is negative"
            )
    for name in names:
        cats = by_moderator.get(name, [])
        if not cats:
            raise DocumentError(f"moderator {name!r} has no categories in the plan")
        share_sum = 0.0
        target_sum = 0.0
        for c in cats:
            share_sum += c.share
            target_sum += c.target
        if abs(share_sum - 1.0) > 1e-9:
            raise DocumentError(
                f"shares for moderator {name!r} sum to {share_sum!r}, not 1"
            )
        if abs(target_sum - plan.total_target) > 1e-6:
            raise DocumentError(
                f"targets for moderator {name!r} sum to {target_sum!r}, "
                f"not the plan total {plan.total_target}"
            )
