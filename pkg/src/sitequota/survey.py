"""Survey microdata loading: schemas, eligibility filters, weighted records.

Input is a delimited text file (comma- or tab-separated, auto-detected from
the extension) with a header row. Rows that fail the eligibility filter or
carry a missing/nonpositive weight are dropped at load time and counted in
the load report; a malformed cell is an error, not a silent drop.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import LoadError, SchemaError

VARIABLE_KINDS = ("categorical", "continuous")

# canonical comparator spellings; unicode forms are accepted on input
_COMPARATOR_ALIASES = {
    "=": "=", "==": "=",
    "!=": "!=", "≠": "!=",
    "<": "<",
    "<=": "<=", "≤": "<=",
    ">": ">",
    ">=": ">=", "≥": ">=",
}
_ORDERING = ("<", "<=", ">", ">=")


@dataclass(frozen=True)
class FilterClause:
    """One conjunct of an eligibility filter: ``column comparator literal``."""

    column: str
    comparator: str
    literal: str | float | int | bool

    def __post_init__(self):
        canon = _COMPARATOR_ALIASES.get(self.comparator)
        if canon is None:
            raise SchemaError(
                f"unknown comparator {self.comparator!r}; expected one of "
                f"{sorted(set(_COMPARATOR_ALIASES.values()))}"
            )
        object.__setattr__(self, "comparator", canon)
        if canon in _ORDERING and isinstance(self.literal, str):
            raise SchemaError(
                f"ordering comparator {canon!r} on column {self.column!r} "
                "requires a numeric literal"
            )

    def matches(self, raw: str | None) -> bool:
        # A missing value can never establish eligibility.
        if raw is None or raw == "":
            return False
        if isinstance(self.literal, str):
            if self.comparator == "=":
                return raw == self.literal
            return raw != self.literal
        try:
            value = float(raw)
        except ValueError:
            return False
        lit = float(self.literal)
        if self.comparator == "=":
            return value == lit
        if self.comparator == "!=":
            return value != lit
        if self.comparator == "<":
            return value < lit
        if self.comparator == "<=":
            return value <= lit
        if self.comparator == ">":
            return value > lit
        return value >= lit


@dataclass(frozen=True)
class EligibilityFilter:
    """Conjunction of clauses; an empty clause list keeps every record."""

    clauses: tuple[FilterClause, ...] = ()

    def matches(self, row: dict[str, str]) -> bool:
        return all(c.matches(row.get(c.column)) for c in self.clauses)

    def describe(self) -> str:
        if not self.clauses:
            return "all records eligible"
        return " AND ".join(
            f"{c.column} {c.comparator} {c.literal!r}" for c in self.clauses
        )


@dataclass(frozen=True)
class VariableSpec:
    name: str
    kind: str

    def __post_init__(self):
        if self.kind not in VARIABLE_KINDS:
            raise SchemaError(
                f"variable {self.name!r} has kind {self.kind!r}; "
                f"expected one of {VARIABLE_KINDS}"
            )


@dataclass(frozen=True)
class SurveySchema:
    """Which columns carry the weight, the id, and the moderator variables."""

    weight_column: str
    variables: tuple[VariableSpec, ...]
    id_column: str | None = None
    eligibility_filter: EligibilityFilter | None = None

    def __post_init__(self):
        names = [v.name for v in self.variables]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise SchemaError(f"duplicate variable names: {sorted(dupes)}")

    def variable(self, name: str) -> VariableSpec:
        for v in self.variables:
            if v.name == name:
                return v
        raise SchemaError(f"no variable named {name!r} in schema")

    def required_columns(self) -> list[str]:
        cols = [self.weight_column]
        if self.id_column:
            cols.append(self.id_column)
        cols.extend(v.name for v in self.variables)
        if self.eligibility_filter:
            cols.extend(c.column for c in self.eligibility_filter.clauses)
        return cols


def schema_from_dict(doc: dict) -> SurveySchema:
    """Build a SurveySchema from the study configuration document."""
    if not isinstance(doc, dict):
        raise SchemaError("schema document must be a JSON object")
    try:
        weight_column = doc["weight_column"]
        raw_vars = doc["variables"]
    except KeyError as exc:
        raise SchemaError(f"schema document missing field {exc.args[0]!r}") from None
    variables = tuple(
        VariableSpec(name=v["name"], kind=v["kind"]) for v in raw_vars
    )
    elig = None
    if doc.get("eligibility_filter") is not None:
        clauses = tuple(
            FilterClause(
                column=c["column"],
                comparator=c["comparator"],
                literal=c["literal"],
            )
            for c in doc["eligibility_filter"].get("clauses", [])
        )
        elig = EligibilityFilter(clauses=clauses)
    return SurveySchema(
        weight_column=weight_column,
        variables=variables,
        id_column=doc.get("id_column"),
        eligibility_filter=elig,
    )


@dataclass(frozen=True)
class SurveyRecord:
    """One surveyed site: opaque id, positive sampling weight, responses."""

    id: str
    weight: float
    values: dict[str, str | float | None]


@dataclass
class LoadReport:
    rows_read: int = 0
    kept: int = 0
    dropped_by_filter: int = 0
    dropped_by_weight: int = 0
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "kept": self.kept,
            "dropped_by_filter": self.dropped_by_filter,
            "dropped_by_weight": self.dropped_by_weight,
            "warnings": list(self.warnings),
        }


@dataclass
class SurveyDataset:
    records: list[SurveyRecord]
    schema: SurveySchema
    report: LoadReport
    source_path: str | None = None
    source_digest: str | None = None


def _delimiter_for(path: Path) -> str:
    return "\t" if path.suffix.lower() in (".tsv", ".tab") else ","


def load_survey(path: str | Path, schema: SurveySchema) -> SurveyDataset:
    """Parse the file at *path*, keeping eligible rows with usable weights.

    Raises LoadError for a missing file, a header lacking a schema column,
    or an unparseable weight/continuous cell (named by row and column).
    Missing or nonpositive weights drop the row with a report warning.
    """
    path = Path(path)
    if not path.is_file():
        raise LoadError(f"survey file not found: {path}")
    digest = hashlib.sha256(path.read_bytes()).hexdigest()

    report = LoadReport()
    records: list[SurveyRecord] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, delimiter=_delimiter_for(path))
        header = reader.fieldnames or []
        missing = [c for c in schema.required_columns() if c not in header]
        if missing:
            raise LoadError(
                f"columns missing from {path.name}: {sorted(set(missing))}"
            )
        elig = schema.eligibility_filter
        for row_number, row in enumerate(reader, start=2):
            report.rows_read += 1
            if elig is not None and not elig.matches(row):
                report.dropped_by_filter += 1
                continue
            raw_weight = row.get(schema.weight_column) or ""
            if raw_weight == "":
                report.dropped_by_weight += 1
                report.warnings.append(
                    f"row {row_number}: missing weight; record dropped"
                )
                continue
            try:
                weight = float(raw_weight)
            except ValueError:
                raise LoadError(
                    f"row {row_number}, column {schema.weight_column!r}: "
                    f"unparseable weight {raw_weight!r}"
                ) from None
            if not math.isfinite(weight) or weight <= 0:
                report.dropped_by_weight += 1
                report.warnings.append(
                    f"row {row_number}: nonpositive or non-finite weight "
                    f"{raw_weight!r}; record dropped"
                )
                continue

            values: dict[str, str | float | None] = {}
            for var in schema.variables:
                cell = row.get(var.name) or ""
                if cell == "":
                    values[var.name] = None
                elif var.kind == "continuous":
                    try:
                        parsed = float(cell)
                    except ValueError:
                        raise LoadError(
                            f"row {row_number}, column {var.name!r}: "
                            f"unparseable numeric value {cell!r}"
                        ) from None
                    if not math.isfinite(parsed):
                        raise LoadError(
                            f"row {row_number}, column {var.name!r}: "
                            f"non-finite value {cell!r}"
                        )
                    values[var.name] = parsed
                else:
                    values[var.name] = cell

            if schema.id_column:
                record_id = row.get(schema.id_column) or f"row{row_number}"
            else:
                record_id = f"row{row_number}"
            records.append(SurveyRecord(id=record_id, weight=weight, values=values))
            report.kept += 1

    return SurveyDataset(
        records=records,
        schema=schema,
        report=report,
        source_path=str(path),
        source_digest=digest,
    )
