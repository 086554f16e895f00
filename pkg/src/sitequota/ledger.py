"""Append-only admission ledger enforcing quota limits during recruitment.

Every adjudication is an event (admitted / rejected / withdrawn); tallies and
the accepted-site set are pure functions of the event sequence, so any ledger
can be reconstructed, audited, or tamper-checked by replay. A site is
accepted only if it fits the limit of its category under every moderator
*and* the overall total; rejections never move a tally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Iterable, Mapping, Union

from .errors import (
    ClassificationError,
    DuplicateSiteError,
    ReplayError,
    UnknownSiteError,
)
from .estimation import ModeratorSpec, discretize
from .plan import QuotaPlan

# Reserved moderator name marking the overall sample-size cap in a
# rejection's binding categories. Real moderators must not use it.
OVERALL_CAP = "__overall__"

ACCEPTED = "accepted"
REJECTED = "rejected"

STATUS_OPEN = "open"
STATUS_NEAR_LIMIT = "near-limit"
STATUS_SATURATED = "saturated"
# the moderator's remaining capacity cannot cover what the study still needs
STATUS_SHORTFALL_RISK = "shortfall-risk"

NEAR_LIMIT_FRACTION = 0.8


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class CandidateSite:
    """A site under recruitment: id, raw moderator responses, annotations."""

    site_id: str
    responses: Mapping[str, str | float]
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.site_id:
            raise ClassificationError("site_id must be non-empty")


@dataclass(frozen=True)
class CategoryRef:
    moderator: str
    label: str

    def to_dict(self) -> dict:
        return {"moderator": self.moderator, "label": self.label}


def classify_site(
    site: CandidateSite,
    plan: QuotaPlan,
    specs: Iterable[ModeratorSpec] | None = None,
) -> dict[str, str]:
    """Resolve one category per plan moderator from the site's responses.

    Categorical responses must match a declared level exactly (no trimming,
    no case folding); continuous responses are cut with the thresholds frozen
    into the plan. Missing or unknown responses are errors: a site that
    cannot be classified cannot be adjudicated.
    """
    specs = tuple(specs) if specs is not None else plan.moderators
    by_name = {s.name: s for s in specs}
    profile: dict[str, str] = {}
    for name in plan.moderator_names():
        spec = by_name.get(name)
        if spec is None:
            raise ClassificationError(f"no moderator spec supplied for {name!r}")
        if name not in site.responses or site.responses[name] is None:
            raise ClassificationError(f"missing response: {name}")
        response = site.responses[name]
        if spec.kind == "categorical":
            if not isinstance(response, str) or response not in spec.levels:
                raise ClassificationError(
                    f"unknown level {response!r} for moderator {name!r}; "
                    f"declared levels: {list(spec.levels)}"
                )
            profile[name] = response
        else:
            if isinstance(response, str):
                try:
                    response = float(response)
                except ValueError:
                    raise ClassificationError(
                        f"non-numeric response {response!r} for continuous "
                        f"moderator {name!r}"
                    ) from None
            labels = spec.category_labels()
            profile[name] = labels[discretize(float(response), spec) - 1]
    return profile


@dataclass(frozen=True)
class AdmittedEvent:
    seq: int
    time: str
    site_id: str
    profile: dict[str, str]
    metadata: dict[str, str] = field(default_factory=dict)

    type = "admitted"


@dataclass(frozen=True)
class RejectedEvent:
    seq: int
    time: str
    site_id: str
    profile: dict[str, str]
    binding_categories: tuple[CategoryRef, ...]
    metadata: dict[str, str] = field(default_factory=dict)

    type = "rejected"


@dataclass(frozen=True)
class WithdrawnEvent:
    seq: int
    time: str
    site_id: str

    type = "withdrawn"


LedgerEvent = Union[AdmittedEvent, RejectedEvent, WithdrawnEvent]


def event_to_dict(event: LedgerEvent) -> dict:
    doc: dict = {"seq": event.seq, "type": event.type, "time": event.time,
                 "site_id": event.site_id}
    if isinstance(event, AdmittedEvent):
        doc["profile"] = dict(event.profile)
        if event.metadata:
            doc["metadata"] = dict(event.metadata)
    elif isinstance(event, RejectedEvent):
        doc["profile"] = dict(event.profile)
        doc["binding_categories"] = [c.to_dict() for c in event.binding_categories]
        if event.metadata:
            doc["metadata"] = dict(event.metadata)
    return doc


def event_from_dict(doc: dict, index: int) -> LedgerEvent:
    try:
        kind = doc["type"]
        seq = doc["seq"]
        time = doc["time"]
        site_id = doc["site_id"]
    except (KeyError, TypeError) as exc:
        raise ReplayError(f"event {index}: malformed event record ({exc})", index) from None
    if kind == "admitted":
        return AdmittedEvent(
            seq=seq, time=time, site_id=site_id,
            profile=dict(doc.get("profile") or {}),
            metadata=dict(doc.get("metadata") or {}),
        )
    if kind == "rejected":
        binding = tuple(
            CategoryRef(moderator=b["moderator"], label=b["label"])
            for b in doc.get("binding_categories") or ()
        )
        if not binding:
            raise ReplayError(
                f"event {index}: rejected event has no binding categories", index
            )
        return RejectedEvent(
            seq=seq, time=time, site_id=site_id,
            profile=dict(doc.get("profile") or {}),
            binding_categories=binding,
            metadata=dict(doc.get("metadata") or {}),
        )
    if kind == "withdrawn":
        return WithdrawnEvent(seq=seq, time=time, site_id=site_id)
    raise ReplayError(f"event {index}: unknown event type {kind!r}", index)


@dataclass(frozen=True)
class AdmissionDecision:
    verdict: str
    profile: dict[str, str]
    binding_categories: tuple[CategoryRef, ...]
    tallies_after: dict[str, dict[str, int]]

    @property
    def accepted(self) -> bool:
        return self.verdict == ACCEPTED

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "profile": dict(self.profile),
            "binding_categories": [c.to_dict() for c in self.binding_categories],
            "tallies_after": {m: dict(v) for m, v in self.tallies_after.items()},
        }


@dataclass(frozen=True)
class CategoryProgress:
    moderator: str
    label: str
    tally: int
    target: float
    limit: int
    remaining: int
    status: str

    def to_dict(self) -> dict:
        return {
            "moderator": self.moderator,
            "label": self.label,
            "tally": self.tally,
            "target": self.target,
            "limit": self.limit,
            "remaining": self.remaining,
            "status": self.status,
        }


@dataclass(frozen=True)
class ProgressReport:
    plan_digest: str
    accepted: int
    total_target: int
    complete: bool
    categories: tuple[CategoryProgress, ...]
    steer_toward: tuple[CategoryRef, ...]

    def to_dict(self) -> dict:
        return {
            "plan_digest": self.plan_digest,
            "accepted": self.accepted,
            "total_target": self.total_target,
            "complete": self.complete,
            "categories": [c.to_dict() for c in self.categories],
            "steer_toward": [c.to_dict() for c in self.steer_toward],
        }


class RecruitmentLedger:
    """Single-writer recruitment state derived from an append-only event log.

    Mutating calls (admit, withdraw) must be serialized by the caller; reads
    (what_if, status, snapshot) do not mutate. The clock is injectable so
    tests and replays are deterministic.
    """

    def __init__(self, plan: QuotaPlan, clock: Callable[[], str] = utc_now_iso):
        self.plan = plan
        self.clock = clock
        self.events: list[LedgerEvent] = []
        self._tallies: dict[tuple[str, str], int] = {
            (c.moderator, c.label): 0 for c in plan.categories
        }
        self._limits = plan.limit_map()
        self._accepted: dict[str, dict[str, str]] = {}
        self._ever_accepted: set[str] = set()
        self.last_seq = 0

    # -- queries ------------------------------------------------------------

    @property
    def accepted_count(self) -> int:
        return len(self._accepted)

    def accepted_sites(self) -> dict[str, dict[str, str]]:
        return {sid: dict(profile) for sid, profile in self._accepted.items()}

    def tally(self, moderator: str, label: str) -> int:
        return self._tallies[(moderator, label)]

    def tallies_snapshot(self) -> dict[str, dict[str, int]]:
        snapshot: dict[str, dict[str, int]] = {}
        for c in self.plan.categories:
            snapshot.setdefault(c.moderator, {})[c.label] = self._tallies[
                (c.moderator, c.label)
            ]
        return snapshot

    def snapshot(self) -> dict:
        """State export: everything needed to compare two ledgers."""
        return {
            "plan_digest": self.plan.digest(),
            "tallies": self.tallies_snapshot(),
            "accepted_sites": self.accepted_sites(),
            "last_seq": self.last_seq,
        }

    # -- adjudication -------------------------------------------------------

    def _adjudicate(self, profile: dict[str, str]) -> tuple[str, tuple[CategoryRef, ...]]:
        binding = [
            CategoryRef(moderator=mod, label=label)
            for mod, label in profile.items()
            if self._tallies[(mod, label)] + 1 > self._limits[(mod, label)]
        ]
        if self.accepted_count + 1 > self.plan.total_target:
            binding.append(CategoryRef(moderator=OVERALL_CAP, label="total"))
        return (REJECTED, tuple(binding)) if binding else (ACCEPTED, ())

    def _decision(
        self, profile: dict[str, str], verdict: str, binding: tuple[CategoryRef, ...]
    ) -> AdmissionDecision:
        tallies = self.tallies_snapshot()
        if verdict == ACCEPTED:
            for mod, label in profile.items():
                tallies[mod][label] += 1
        return AdmissionDecision(
            verdict=verdict,
            profile=dict(profile),
            binding_categories=binding,
            tallies_after=tallies,
        )

    def what_if(self, site: CandidateSite) -> AdmissionDecision:
        """Adjudicate without recording anything: same verdict admit would give."""
        if site.site_id in self._ever_accepted:
            raise DuplicateSiteError(
                f"site {site.site_id!r} has already been accepted into this ledger"
            )
        profile = classify_site(site, self.plan)
        verdict, binding = self._adjudicate(profile)
        return self._decision(profile, verdict, binding)

    def admit(self, site: CandidateSite) -> AdmissionDecision:
        """Adjudicate and record: on accept, every moderator tally moves at once."""
        decision = self.what_if(site)
        seq = self.last_seq + 1
        if decision.accepted:
            event: LedgerEvent = AdmittedEvent(
                seq=seq,
                time=self.clock(),
                site_id=site.site_id,
                profile=decision.profile,
                metadata=dict(site.metadata),
            )
            for mod, label in decision.profile.items():
                self._tallies[(mod, label)] += 1
            self._accepted[site.site_id] = decision.profile
            self._ever_accepted.add(site.site_id)
        else:
            event = RejectedEvent(
                seq=seq,
                time=self.clock(),
                site_id=site.site_id,
                profile=decision.profile,
                binding_categories=decision.binding_categories,
                metadata=dict(site.metadata),
            )
        self.events.append(event)
        self.last_seq = seq
        return decision

    def withdraw(self, site_id: str) -> WithdrawnEvent:
        """Remove an accepted site; its capacity frees up immediately."""
        profile = self._accepted.get(site_id)
        if profile is None:
            raise UnknownSiteError(
                f"site {site_id!r} is not currently accepted; cannot withdraw"
            )
        seq = self.last_seq + 1
        event = WithdrawnEvent(seq=seq, time=self.clock(), site_id=site_id)
        for mod, label in profile.items():
            self._tallies[(mod, label)] -= 1
        del self._accepted[site_id]
        self.events.append(event)
        self.last_seq = seq
        return event

    # -- progress -----------------------------------------------------------

    def status(self) -> ProgressReport:
        accepted = self.accepted_count
        total = self.plan.total_target
        remaining_overall = total - accepted

        remaining_by_mod: dict[str, dict[str, int]] = {}
        for c in self.plan.categories:
            remaining_by_mod.setdefault(c.moderator, {})[c.label] = (
                c.limit - self._tallies[(c.moderator, c.label)]
            )

        rows: list[CategoryProgress] = []
        for c in self.plan.categories:
            tally = self._tallies[(c.moderator, c.label)]
            remaining = c.limit - tally
            moderator_capacity = sum(remaining_by_mod[c.moderator].values())
            if remaining == 0:
                status = STATUS_SATURATED
            elif remaining_overall > moderator_capacity:
                status = STATUS_SHORTFALL_RISK
            elif c.limit > 0 and tally >= NEAR_LIMIT_FRACTION * c.limit:
                status = STATUS_NEAR_LIMIT
            else:
                status = STATUS_OPEN
            rows.append(
                CategoryProgress(
                    moderator=c.moderator,
                    label=c.label,
                    tally=tally,
                    target=c.target,
                    limit=c.limit,
                    remaining=remaining,
                    status=status,
                )
            )

        steer = sorted(
            (r for r in rows if r.status != STATUS_SATURATED and r.target > 0
             and r.target > r.tally),
            key=lambda r: (
                -((r.target - r.tally) / r.target),
                -r.target,
                r.moderator,
                r.label,
            ),
        )
        return ProgressReport(
            plan_digest=self.plan.digest(),
            accepted=accepted,
            total_target=total,
            complete=accepted >= total,
            categories=tuple(rows),
            steer_toward=tuple(CategoryRef(r.moderator, r.label) for r in steer),
        )


def replay(
    events: Iterable[LedgerEvent | dict],
    plan: QuotaPlan,
    clock: Callable[[], str] = utc_now_iso,
) -> RecruitmentLedger:
    """Rebuild a ledger from its event log, verifying every step.

    Rejects logs that are out of order, structurally malformed, or that
    would push any tally past its limit (tamper detection). The error names
    the first offending event index.
    """
    ledger = RecruitmentLedger(plan, clock=clock)
    valid = set(ledger._tallies)
    for index, raw in enumerate(events, start=1):
        event = event_from_dict(raw, index) if isinstance(raw, dict) else raw
        if event.seq != index:
            raise ReplayError(
                f"event {index}: sequence number {event.seq} is not {index} "
                "(log out of order or truncated at the front)", index,
            )
        if isinstance(event, (AdmittedEvent, RejectedEvent)):
            profile = event.profile
            if set(profile) != set(plan.moderator_names()):
                raise ReplayError(
                    f"event {index}: profile moderators {sorted(profile)} do not "
                    f"match the plan's {sorted(plan.moderator_names())}", index,
                )
            for mod, label in profile.items():
                if (mod, label) not in valid:
                    raise ReplayError(
                        f"event {index}: unknown category {mod}/{label}", index
                    )
        if isinstance(event, AdmittedEvent):
            if event.site_id in ledger._ever_accepted:
                raise ReplayError(
                    f"event {index}: site {event.site_id!r} admitted twice", index
                )
            if ledger.accepted_count + 1 > plan.total_target:
                raise ReplayError(
                    f"event {index}: admission exceeds the overall total "
                    f"{plan.total_target}", index,
                )
            for mod, label in event.profile.items():
                if ledger._tallies[(mod, label)] + 1 > ledger._limits[(mod, label)]:
                    raise ReplayError(
                        f"event {index}: admission would push {mod}/{label} past "
                        f"its limit {ledger._limits[(mod, label)]}", index,
                    )
            for mod, label in event.profile.items():
                ledger._tallies[(mod, label)] += 1
            ledger._accepted[event.site_id] = dict(event.profile)
            ledger._ever_accepted.add(event.site_id)
        elif isinstance(event, WithdrawnEvent):
            profile = ledger._accepted.get(event.site_id)
            if profile is None:
                raise ReplayError(
                    f"event {index}: withdrawal of {event.site_id!r}, which is "
                    "not currently accepted", index,
                )
            for mod, label in profile.items():
                ledger._tallies[(mod, label)] -= 1
            del ledger._accepted[event.site_id]
        ledger.events.append(event)
        ledger.last_seq = event.seq
    return ledger
