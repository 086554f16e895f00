"""Weighted population estimates over survey microdata.

Per-category shares use the standard ratio estimator: the weight falling in
a category divided by the weight of all records with a classifiable response
for that moderator. Continuous moderators are cut into quantile categories on
the weighted empirical CDF: threshold t_q is the smallest observed value whose
cumulative weight reaches q/k of the total, and a value equal to a threshold
belongs to the higher category. Both definitions are interpolation-free, so
scaling every weight by a positive constant changes nothing.

Accumulation is plain sequential float addition (no pairwise summation) so
results are reproducible bit-for-bit and checkable against a linear-scan
oracle.
"""

from __future__ import annotations

import hashlib
import json
import math
from bisect import bisect_right
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

from .errors import ClassificationError, DocumentError, EstimationError, SchemaError
from .survey import SurveyDataset, SurveySchema, schema_from_dict

# Categories estimated from fewer than this many records are flagged as
# low-precision. Diagnostic only; nothing is blocked.
LOW_PRECISION_N = 30

ESTIMATES_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ModeratorSpec:
    """One impact moderator and how responses map onto its categories.

    Categorical moderators enumerate their level labels. Continuous ones
    carry a quantile count and, once resolved against a dataset, the
    ascending thresholds that cut the variable into categories.
    """

    name: str
    source: str
    kind: str
    levels: tuple[str, ...] = ()
    quantile_count: int = 0
    thresholds: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind == "categorical":
            if len(self.levels) < 2:
                raise SchemaError(
                    f"moderator {self.name!r} needs at least 2 levels"
                )
            if len(set(self.levels)) != len(self.levels):
                raise SchemaError(
                    f"moderator {self.name!r} has duplicate level labels"
                )
        elif self.kind == "continuous":
            if self.quantile_count < 2:
                raise SchemaError(
                    f"moderator {self.name!r} needs a quantile count of at least 2"
                )
            if self.thresholds is not None:
                ts = self.thresholds
                if any(not math.isfinite(t) for t in ts):
                    raise SchemaError(
                        f"moderator {self.name!r} has non-finite thresholds"
                    )
                if any(a >= b for a, b in zip(ts, ts[1:])):
                    raise SchemaError(
                        f"moderator {self.name!r} thresholds must be strictly ascending"
                    )
        else:
            raise SchemaError(
                f"moderator {self.name!r} has kind {self.kind!r}; "
                "expected 'categorical' or 'continuous'"
            )

    @property
    def resolved(self) -> bool:
        return self.kind == "categorical" or self.thresholds is not None

    def category_labels(self) -> tuple[str, ...]:
        if self.kind == "categorical":
            return self.levels
        if self.thresholds is None:
            raise EstimationError(
                f"moderator {self.name!r} has no thresholds yet; "
                "resolve it against a dataset first"
            )
        return tuple(f"Q{i}" for i in range(1, len(self.thresholds) + 2))

    def to_dict(self) -> dict:
        doc: dict = {"name": self.name, "source": self.source, "kind": self.kind}
        if self.kind == "categorical":
            doc["levels"] = list(self.levels)
        else:
            doc["quantile_count"] = self.quantile_count
            if self.thresholds is not None:
                doc["thresholds"] = list(self.thresholds)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ModeratorSpec":
        try:
            name = doc["name"]
            kind = doc["kind"]
        except KeyError as exc:
            raise SchemaError(f"moderator document missing field {exc.args[0]!r}") from None
        thresholds = doc.get("thresholds")
        return cls(
            name=name,
            source=doc.get("source", name),
            kind=kind,
            levels=tuple(doc.get("levels", ())),
            quantile_count=int(doc.get("quantile_count", 0)),
            thresholds=tuple(thresholds) if thresholds is not None else None,
        )


def discretize(value: float, spec: ModeratorSpec) -> int:
    """Map a numeric value to its 1-based category under the spec's thresholds.

    Intervals are half-open with the boundary belonging upward: category c
    covers t_{c-1} <= value < t_c, with t_0 = -inf and t_k = +inf.
    """
    if spec.kind != "continuous" or spec.thresholds is None:
        raise EstimationError(
            f"moderator {spec.name!r} is not a resolved continuous moderator"
        )
    if not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ClassificationError(
            f"cannot classify non-finite value {value!r} for moderator {spec.name!r}"
        )
    return bisect_right(spec.thresholds, value) + 1


def weighted_quantile_thresholds(
    dataset: SurveyDataset, variable: str, k: int
) -> tuple[tuple[float, ...], list[str]]:
    """Cut points for k weighted-quantile categories of a continuous variable.

    t_q is the smallest observed value v with cumulative weight(<= v) at
    least (q/k) * W over non-missing records. Collided thresholds are
    deduplicated, shrinking the category count with a warning; if the data
    cannot support even the reduced cut, an error proposes a smaller k.

    Returns (thresholds, warnings).
    """
    if k < 2:
        raise EstimationError(f"quantile count must be at least 2, got {k}")
    pairs = [
        (rec.values[variable], rec.weight)
        for rec in dataset.records
        if rec.values.get(variable) is not None
    ]
    if len(pairs) < k:
        raise EstimationError(
            f"variable {variable!r} has {len(pairs)} non-missing values; "
            f"need at least {k} for {k} categories"
        )
    pairs.sort(key=lambda p: p[0])  # stable: ties keep record order

    cumulative = []
    total = 0.0
    for value, weight in pairs:
        total += weight
        cumulative.append(total)

    thresholds: list[float] = []
    position = 0
    for q in range(1, k):
        target = (q / k) * total
        while cumulative[position] < target:
            position += 1
        thresholds.append(float(pairs[position][0]))

    deduped: list[float] = []
    for t in thresholds:
        if not deduped or t != deduped[-1]:
            deduped.append(t)

    warnings: list[str] = []
    categories = len(deduped) + 1
    distinct = len({v for v, _ in pairs})
    if distinct < categories:
        hint = (
            f"try a quantile count of at most {distinct}"
            if distinct >= 2
            else "the variable has a single distinct value and cannot be discretized"
        )
        raise EstimationError(
            f"variable {variable!r} has {distinct} distinct value(s), too few "
            f"for {categories} categories; {hint}"
        )
    if categories < k:
        warnings.append(
            f"moderator on {variable!r}: quantile thresholds collided; "
            f"categories reduced from {k} to {categories}"
        )
    return tuple(deduped), warnings


@dataclass(frozen=True)
class CategoryEstimate:
    label: str
    share: float
    unweighted_n: int | None = None
    weighted_mass: float | None = None
    low_precision: bool | None = None

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "share": self.share,
            "unweighted_n": self.unweighted_n,
            "weighted_mass": self.weighted_mass,
            "low_precision": self.low_precision,
        }


@dataclass(frozen=True)
class ModeratorEstimates:
    spec: ModeratorSpec
    categories: tuple[CategoryEstimate, ...]
    missing_n: int = 0
    missing_mass: float = 0.0
    warnings: tuple[str, ...] = ()

    @property
    def shares(self) -> tuple[float, ...]:
        return tuple(c.share for c in self.categories)

    def to_dict(self) -> dict:
        doc = self.spec.to_dict()
        doc["categories"] = [c.to_dict() for c in self.categories]
        doc["missing"] = {"unweighted_n": self.missing_n, "weighted_mass": self.missing_mass}
        doc["warnings"] = list(self.warnings)
        return doc


def weighted_proportion(dataset: SurveyDataset, spec: ModeratorSpec) -> ModeratorEstimates:
    """Per-category weighted shares for one moderator, with diagnostics.

    Records missing the response are excluded from the denominator and
    reported; an unknown categorical level is an error (strict matching).
    """
    labels = spec.category_labels()
    mass = {label: 0.0 for label in labels}
    count = {label: 0 for label in labels}
    missing_n = 0
    missing_mass = 0.0
    denominator = 0.0

    for rec in dataset.records:
        response = rec.values.get(spec.source)
        if response is None:
            missing_n += 1
            missing_mass += rec.weight
            continue
        if spec.kind == "categorical":
            if response not in mass:
                raise EstimationError(
                    f"unknown level {response!r} for moderator {spec.name!r}; "
                    f"declared levels: {list(labels)}"
                )
            label = response  # type: ignore[assignment]
        else:
            label = labels[discretize(float(response), spec) - 1]
        mass[label] += rec.weight
        count[label] += 1
        denominator += rec.weight

    if denominator <= 0.0:
        raise EstimationError(
            f"no classifiable responses for moderator {spec.name!r}"
        )
    categories = tuple(
        CategoryEstimate(
            label=label,
            share=mass[label] / denominator,
            unweighted_n=count[label],
            weighted_mass=mass[label],
            low_precision=count[label] < LOW_PRECISION_N,
        )
        for label in labels
    )
    return ModeratorEstimates(
        spec=spec,
        categories=categories,
        missing_n=missing_n,
        missing_mass=missing_mass,
    )


@dataclass(frozen=True)
class PopulationEstimates:
    """Survey-based shares for every moderator category, plus diagnostics."""

    moderators: tuple[ModeratorEstimates, ...]
    total_weight: float | None
    total_categories: int
    provenance: dict | None = None

    def moderator(self, name: str) -> ModeratorEstimates:
        for m in self.moderators:
            if m.spec.name == name:
                return m
        raise EstimationError(f"no moderator named {name!r} in estimates")

    def specs(self) -> tuple[ModeratorSpec, ...]:
        return tuple(m.spec for m in self.moderators)

    def content(self) -> dict:
        return {
            "schema_version": ESTIMATES_SCHEMA_VERSION,
            "total_weight": self.total_weight,
            "total_categories": self.total_categories,
            "moderators": [m.to_dict() for m in self.moderators],
        }

    def digest(self) -> str:
        return canonical_digest(self.content())

    def to_document(self) -> dict:
        doc = self.content()
        doc["provenance"] = self.provenance
        return doc

    @classmethod
    def from_document(cls, doc: dict) -> "PopulationEstimates":
        if not isinstance(doc, dict):
            raise DocumentError("estimates document must be a JSON object")
        version = doc.get("schema_version")
        if version != ESTIMATES_SCHEMA_VERSION:
            raise DocumentError(
                f"estimates document schema_version {version!r} is not "
                f"{ESTIMATES_SCHEMA_VERSION}"
            )
        if "moderators" not in doc:
            raise DocumentError("estimates document missing field 'moderators'")
        moderators = []
        for raw in doc["moderators"]:
            try:
                spec = ModeratorSpec.from_dict(raw)
            except SchemaError as exc:
                raise DocumentError(str(exc)) from None
            cats = []
            for c in raw.get("categories", []):
                for required in ("label", "share"):
                    if required not in c:
                        raise DocumentError(
                            f"estimates category missing field {required!r}"
                        )
                cats.append(
                    CategoryEstimate(
                        label=c["label"],
                        share=float(c["share"]),
                        unweighted_n=c.get("unweighted_n"),
                        weighted_mass=c.get("weighted_mass"),
                        low_precision=c.get("low_precision"),
                    )
                )
            missing = raw.get("missing") or {}
            moderators.append(
                ModeratorEstimates(
                    spec=spec,
                    categories=tuple(cats),
                    missing_n=missing.get("unweighted_n", 0),
                    missing_mass=missing.get("weighted_mass", 0.0),
                    warnings=tuple(raw.get("warnings", ())),
                )
            )
        est = cls(
            moderators=tuple(moderators),
            total_weight=doc.get("total_weight"),
            total_categories=doc.get(
                "total_categories", sum(len(m.categories) for m in moderators)
            ),
            provenance=doc.get("provenance"),
        )
        validate_estimates(est)
        return est

    @classmethod
    def from_shares(
        cls, shares: dict[str, dict[str, float]] | list[ModeratorEstimates]
    ) -> "PopulationEstimates":
        """Build estimates from published shares (no microdata diagnostics).

        ``shares`` maps moderator name -> {level label -> share}; level order
        follows insertion order.
        """
        moderators: list[ModeratorEstimates] = []
        if isinstance(shares, dict):
            for name, level_shares in shares.items():
                spec = ModeratorSpec(
                    name=name,
                    source=name,
                    kind="categorical",
                    levels=tuple(level_shares),
                )
                cats = tuple(
                    CategoryEstimate(label=label, share=float(share))
                    for label, share in level_shares.items()
                )
                moderators.append(ModeratorEstimates(spec=spec, categories=cats))
        else:
            moderators = list(shares)
        est = cls(
            moderators=tuple(moderators),
            total_weight=None,
            total_categories=sum(len(m.categories) for m in moderators),
        )
        validate_estimates(est)
        return est


def validate_estimates(est: PopulationEstimates) -> None:
    names = [m.spec.name for m in est.moderators]
    if len(set(names)) != len(names):
        raise DocumentError(f"duplicate moderator names in estimates: {names}")
    for m in est.moderators:
        total = 0.0
        for c in m.categories:
            if not (0.0 <= c.share <= 1.0):
                raise DocumentError(
                    f"share {c.share!r} for {m.spec.name}/{c.label} is outside [0, 1]"
                )
            total += c.share
        if abs(total - 1.0) > 1e-9:
            raise DocumentError(
                f"shares for moderator {m.spec.name!r} sum to {total!r}, not 1"
            )
    expected = sum(len(m.categories) for m in est.moderators)
    if est.total_categories != expected:
        raise DocumentError(
            f"total_categories {est.total_categories} does not match the "
            f"{expected} categories listed"
        )


def estimate(
    dataset: SurveyDataset, specs: list[ModeratorSpec] | tuple[ModeratorSpec, ...]
) -> PopulationEstimates:
    """Resolve thresholds where needed, then estimate shares per moderator."""
    if not specs:
        raise EstimationError("at least one moderator is required")
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise EstimationError(f"duplicate moderator names: {names}")

    moderators: list[ModeratorEstimates] = []
    for spec in specs:
        warnings: tuple[str, ...] = ()
        if spec.kind == "continuous" and spec.thresholds is None:
            thresholds, warn = weighted_quantile_thresholds(
                dataset, spec.source, spec.quantile_count
            )
            spec = replace(spec, thresholds=thresholds)
            warnings = tuple(warn)
        result = weighted_proportion(dataset, spec)
        moderators.append(replace(result, warnings=warnings))

    total_weight = 0.0
    for rec in dataset.records:
        total_weight += rec.weight

    provenance = {
        "source_file": dataset.source_path,
        "source_digest": dataset.source_digest,
        "eligibility_filter": (
            dataset.schema.eligibility_filter.describe()
            if dataset.schema.eligibility_filter
            else "all records eligible"
        ),
        "load_report": dataset.report.to_dict(),
        "created": datetime.now(timezone.utc).isoformat(),
    }
    return PopulationEstimates(
        moderators=tuple(moderators),
        total_weight=total_weight,
        total_categories=sum(len(m.categories) for m in moderators),
        provenance=provenance,
    )


def canonical_digest(content: dict) -> str:
    """SHA-256 over a canonical JSON encoding (sorted keys, no whitespace)."""
    blob = json.dumps(content, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def load_study_config(path: str | Path) -> tuple[SurveySchema, tuple[ModeratorSpec, ...]]:
    """Read the combined survey-schema + moderator-list configuration document."""
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"study configuration not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"study configuration is not valid JSON: {exc}") from None
    schema = schema_from_dict(doc)
    raw_moderators = doc.get("moderators")
    if not raw_moderators:
        raise SchemaError("study configuration lists no moderators")
    specs = tuple(ModeratorSpec.from_dict(m) for m in raw_moderators)
    known = {v.name for v in schema.variables}
    for spec in specs:
        if spec.source not in known:
            raise SchemaError(
                f"moderator {spec.name!r} reads variable {spec.source!r}, "
                "which the schema does not declare"
            )
    return schema, specs
