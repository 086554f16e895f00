import pytest

from sitequota.estimation import (
    CategoryEstimate,
    ModeratorEstimates,
    ModeratorSpec,
    PopulationEstimates,
)
from sitequota.plan import build_plan
from sitequota.survey import LoadReport, SurveyDataset, SurveyRecord, SurveySchema, VariableSpec


def make_dataset(rows, variables=None):
    """Build an in-memory dataset from (weight, values) or (id, weight, values)."""
    records = []
    for i, row in enumerate(rows):
        if len(row) == 2:
            weight, values = row
            rid = f"r{i}"
        else:
            rid, weight, values = row
        records.append(SurveyRecord(id=rid, weight=float(weight), values=dict(values)))
    if variables is None:
        names = sorted({k for r in records for k in r.values})
        variables = tuple(
            VariableSpec(
                name=n,
                kind="continuous"
                if any(isinstance(r.values.get(n), (int, float)) for r in records)
                else "categorical",
            )
            for n in names
        )
    schema = SurveySchema(weight_column="w", variables=tuple(variables))
    return SurveyDataset(records=records, schema=schema, report=LoadReport())


def estimates_from(moderators):
    """PopulationEstimates from [(spec, {label: share}), ...]."""
    built = []
    for spec, shares in moderators:
        cats = tuple(
            CategoryEstimate(label=label, share=float(share))
            for label, share in shares.items()
        )
        built.append(ModeratorEstimates(spec=spec, categories=cats))
    return PopulationEstimates.from_shares(built)


@pytest.fixture
def example1_estimates():
    """Quartile shares 0.25 each plus a 0.16/0.84 binary moderator."""
    quartiles = ModeratorSpec(
        name="math_minutes",
        source="math_minutes",
        kind="continuous",
        quantile_count=4,
        thresholds=(225.0, 270.0, 322.0),
    )
    looping = ModeratorSpec(
        name="looping", source="looping", kind="categorical", levels=("yes", "no")
    )
    return estimates_from(
        [
            (quartiles, {"Q1": 0.25, "Q2": 0.25, "Q3": 0.25, "Q4": 0.25}),
            (looping, {"yes": 0.16, "no": 0.84}),
        ]
    )


@pytest.fixture
def example1_plan(example1_estimates):
    return build_plan(example1_estimates, total=40, slack=0.05)


@pytest.fixture
def example2_estimates():
    return PopulationEstimates.from_shares(
        {
            "esl_techniques": {"yes": 0.82, "no": 0.18},
            "regular_classroom": {"yes": 0.37, "no": 0.63},
        }
    )


@pytest.fixture
def example2_plan(example2_estimates):
    return build_plan(example2_estimates, total=80, slack=0.05)
