import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_dataset
from sitequota.errors import ClassificationError, DocumentError, EstimationError
from sitequota.estimation import (
    ModeratorSpec,
    PopulationEstimates,
    discretize,
    estimate,
    weighted_proportion,
    weighted_quantile_thresholds,
)

# --- independent oracles -----------------------------------------------------
# Deliberately separate implementations: plain linear scans over the records.


def oracle_proportions(rows, levels):
    """rows: (weight, level-or-None). Counting/summing scan in record order."""
    mass = {lv: 0.0 for lv in levels}
    denom = 0.0
    for weight, level in rows:
        if level is None:
            continue
        mass[level] += weight
        denom += weight
    return {lv: mass[lv] / denom for lv in levels}


def oracle_thresholds(rows, k):
    """rows: (value, weight). One full cumulative scan per quantile."""
    ordered = sorted(rows, key=lambda r: r[0])
    total = 0.0
    for _, w in ordered:
        total += w
    cuts = []
    for q in range(1, k):
        target = (q / k) * total
        cum = 0.0
        for value, w in ordered:
            cum += w
            if cum >= target:
                cuts.append(float(value))
                break
    deduped = []
    for t in cuts:
        if not deduped or t != deduped[-1]:
            deduped.append(t)
    return tuple(deduped)


LEVEL_SPEC = ModeratorSpec(name="m", source="m", kind="categorical", levels=("A", "B"))


# --- weighted proportions ----------------------------------------------------


def test_weighted_proportion_hand_arithmetic():
    # sum(w in A)/sum(w) = 3/4, B = 1/4
    ds = make_dataset([(2, {"m": "A"}), (1, {"m": "B"}), (1, {"m": "A"})])
    result = weighted_proportion(ds, LEVEL_SPEC)
    assert result.shares == (0.75, 0.25)
    assert [c.unweighted_n for c in result.categories] == [2, 1]


def test_weighted_proportion_degenerate_single_level():
    ds = make_dataset([(1, {"m": "A"}), (2, {"m": "A"})])
    result = weighted_proportion(ds, LEVEL_SPEC)
    assert result.shares == (1.0, 0.0)


def test_weighted_proportion_equal_quarters():
    # 10 records per level, equal weights: one quarter each
    spec = ModeratorSpec(name="m", source="m", kind="categorical",
                         levels=("A", "B", "C", "D"))
    rows = [(1, {"m": lv}) for lv in ("A", "B", "C", "D") for _ in range(10)]
    result = weighted_proportion(make_dataset(rows), spec)
    assert result.shares == (0.25, 0.25, 0.25, 0.25)


def test_weighted_proportion_missing_excluded_and_reported():
    ds = make_dataset([(1, {"m": "A"}), (5, {"m": None}), (1, {"m": "B"})])
    result = weighted_proportion(ds, LEVEL_SPEC)
    assert result.shares == (0.5, 0.5)
    assert result.missing_n == 1
    assert result.missing_mass == 5.0


def test_weighted_proportion_all_missing_errors():
    ds = make_dataset([(1, {"m": None}), (1, {"m": None})])
    with pytest.raises(EstimationError, match="no classifiable"):
        weighted_proportion(ds, LEVEL_SPEC)


def test_weighted_proportion_unknown_level_errors():
    ds = make_dataset([(1, {"m": "A"}), (1, {"m": "Z"})])
    with pytest.raises(EstimationError, match="'Z'"):
        weighted_proportion(ds, LEVEL_SPEC)


def test_low_precision_flag_below_30():
    rows = [(1, {"m": "A"}) for _ in range(30)] + [(1, {"m": "B"}) for _ in range(29)]
    result = weighted_proportion(make_dataset(rows), LEVEL_SPEC)
    by_label = {c.label: c for c in result.categories}
    assert by_label["A"].low_precision is False
    assert by_label["B"].low_precision is True


# --- weighted quantile thresholds --------------------------------------------


def test_thresholds_unit_weights_1_to_8():
    ds = make_dataset([(1, {"x": float(v)}) for v in range(1, 9)])
    cuts, warnings = weighted_quantile_thresholds(ds, "x", 4)
    assert cuts == (2.0, 4.0, 6.0)
    assert warnings == []
    assert cuts == oracle_thresholds([(float(v), 1.0) for v in range(1, 9)], 4)


def test_thresholds_all_identical_errors():
    ds = make_dataset([(1, {"x": 5.0}) for _ in range(6)])
    with pytest.raises(EstimationError, match="distinct"):
        weighted_quantile_thresholds(ds, "x", 4)


def test_weighted_median_pulled_to_heavy_record():
    # cumulative weight 3 < 50 at value 1; reaches 50 only at 100
    rows = [(1, {"x": 1.0}), (1, {"x": 1.0}), (1, {"x": 1.0}), (97, {"x": 100.0})]
    cuts, _ = weighted_quantile_thresholds(make_dataset(rows), "x", 2)
    assert cuts == (100.0,)


def test_threshold_collision_reduces_categories_with_warning():
    # half the mass sits on the minimum: Q1 and Q2 cuts collide at 1
    rows = [(4, {"x": 1.0}), (1, {"x": 2.0}), (1, {"x": 3.0}), (1, {"x": 4.0}),
            (1, {"x": 5.0})]
    cuts, warnings = weighted_quantile_thresholds(make_dataset(rows), "x", 4)
    assert len(cuts) < 3
    assert warnings and "reduced" in warnings[0]


def test_too_few_records_errors():
    ds = make_dataset([(1, {"x": 1.0}), (1, {"x": 2.0})])
    with pytest.raises(EstimationError, match="at least 4"):
        weighted_quantile_thresholds(ds, "x", 4)


# --- discretize ---------------------------------------------------------------

QUARTILE_SPEC = ModeratorSpec(
    name="x", source="x", kind="continuous", quantile_count=4,
    thresholds=(2.0, 4.0, 6.0),
)


@pytest.mark.parametrize(
    "value,category",
    [(1.9, 1), (2.0, 2), (3.9, 2), (4.0, 3), (6.0, 4), (-1e9, 1), (1e9, 4)],
)
def test_discretize_boundaries_belong_upward(value, category):
    assert discretize(value, QUARTILE_SPEC) == category


def test_discretize_rejects_non_finite():
    for bad in (float("nan"), float("inf"), float("-inf")):
        with pytest.raises(ClassificationError):
            discretize(bad, QUARTILE_SPEC)


@given(st.floats(allow_nan=False, allow_infinity=False), st.floats(allow_nan=False, allow_infinity=False))
def test_discretize_monotone(a, b):
    lo, hi = min(a, b), max(a, b)
    assert discretize(lo, QUARTILE_SPEC) <= discretize(hi, QUARTILE_SPEC)


# --- estimate -----------------------------------------------------------------


def test_estimate_binary_moderator_c2():
    spec = ModeratorSpec(name="looping", source="looping", kind="categorical",
                         levels=("yes", "no"))
    rows = [(1, {"looping": "yes"}) for _ in range(16)]
    rows += [(1, {"looping": "no"}) for _ in range(84)]
    est = estimate(make_dataset(rows), [spec])
    assert est.total_categories == 2
    assert est.moderators[0].shares == (0.16, 0.84)


def test_estimate_two_moderators_c6():
    quart = ModeratorSpec(name="x", source="x", kind="continuous", quantile_count=4)
    binary = ModeratorSpec(name="m", source="m", kind="categorical", levels=("A", "B"))
    rows = [(1, {"x": float(v), "m": "A" if v % 2 else "B"}) for v in range(1, 9)]
    est = estimate(make_dataset(rows), [quart, binary])
    assert est.total_categories == 6
    assert est.moderators[0].spec.thresholds == (2.0, 4.0, 6.0)


def test_estimate_empty_specs_errors():
    with pytest.raises(EstimationError, match="at least one"):
        estimate(make_dataset([(1, {"m": "A"})]), [])


def test_estimate_is_deterministic():
    spec = ModeratorSpec(name="m", source="m", kind="categorical", levels=("A", "B"))
    rows = [(0.3, {"m": "A"}), (1.7, {"m": "B"}), (2.2, {"m": "A"})]
    a = estimate(make_dataset(rows), [spec])
    b = estimate(make_dataset(rows), [spec])
    assert a.moderators[0].shares == b.moderators[0].shares
    assert a.digest() == b.digest()


# --- properties ---------------------------------------------------------------

level_rows = st.lists(
    st.tuples(
        st.floats(min_value=0.01, max_value=1000, allow_nan=False),
        st.sampled_from(["A", "B", "C"]),
    ),
    min_size=1,
    max_size=50,
)


@given(level_rows)
def test_shares_sum_to_one(rows):
    spec = ModeratorSpec(name="m", source="m", kind="categorical",
                         levels=("A", "B", "C"))
    result = weighted_proportion(make_dataset([(w, {"m": lv}) for w, lv in rows]), spec)
    assert abs(sum(result.shares) - 1.0) <= 1e-9
    assert all(0.0 <= s <= 1.0 for s in result.shares)


@given(level_rows, st.integers(min_value=-8, max_value=8))
def test_share_invariance_under_dyadic_weight_scaling(rows, exponent):
    # powers of two keep every float operation exact
    scale = 2.0 ** exponent
    spec = ModeratorSpec(name="m", source="m", kind="categorical",
                         levels=("A", "B", "C"))
    base = weighted_proportion(make_dataset([(w, {"m": lv}) for w, lv in rows]), spec)
    scaled = weighted_proportion(
        make_dataset([(w * scale, {"m": lv}) for w, lv in rows]), spec
    )
    assert base.shares == scaled.shares


@given(level_rows, st.floats(min_value=0.1, max_value=10, allow_nan=False))
def test_share_invariance_under_arbitrary_scaling(rows, scale):
    spec = ModeratorSpec(name="m", source="m", kind="categorical",
                         levels=("A", "B", "C"))
    base = weighted_proportion(make_dataset([(w, {"m": lv}) for w, lv in rows]), spec)
    scaled = weighted_proportion(
        make_dataset([(w * scale, {"m": lv}) for w, lv in rows]), spec
    )
    for a, b in zip(base.shares, scaled.shares):
        assert math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-12)


value_rows = st.lists(
    st.tuples(
        st.integers(min_value=1, max_value=100),   # dyadic-exact weights
        st.integers(min_value=-50, max_value=50),  # values
    ),
    min_size=4,
    max_size=50,
)


@given(value_rows, st.integers(min_value=-8, max_value=8))
def test_threshold_invariance_under_dyadic_weight_scaling(rows, exponent):
    scale = 2.0 ** exponent
    ds = make_dataset([(float(w), {"x": float(v)}) for w, v in rows])
    scaled = make_dataset([(w * scale, {"x": float(v)}) for w, v in rows])
    try:
        base_cuts, _ = weighted_quantile_thresholds(ds, "x", 4)
    except EstimationError:
        return
    scaled_cuts, _ = weighted_quantile_thresholds(scaled, "x", 4)
    assert base_cuts == scaled_cuts


@given(st.lists(st.sampled_from(["A", "B", "C"]), min_size=1, max_size=50))
def test_unit_weights_match_counting_oracle(levels):
    spec = ModeratorSpec(name="m", source="m", kind="categorical",
                         levels=("A", "B", "C"))
    result = weighted_proportion(
        make_dataset([(1.0, {"m": lv}) for lv in levels]), spec
    )
    counts = {lv: levels.count(lv) for lv in ("A", "B", "C")}
    for cat in result.categories:
        assert cat.share == counts[cat.label] / len(levels)
        assert cat.unweighted_n == counts[cat.label]


@settings(max_examples=60)
@given(value_rows)
def test_thresholds_match_oracle(rows):
    ds = make_dataset([(float(w), {"x": float(v)}) for w, v in rows])
    pairs = [(float(v), float(w)) for w, v in rows]
    for k in (2, 3, 4):
        try:
            cuts, _ = weighted_quantile_thresholds(ds, "x", k)
        except EstimationError:
            continue
        assert cuts == oracle_thresholds(pairs, k)


# --- documents ----------------------------------------------------------------


def test_estimates_document_roundtrip(example1_estimates):
    doc = example1_estimates.to_document()
    loaded = PopulationEstimates.from_document(doc)
    assert loaded.moderators[0].shares == example1_estimates.moderators[0].shares
    assert loaded.digest() == example1_estimates.digest()


def test_estimates_document_rejects_bad_shares(example1_estimates):
    doc = example1_estimates.to_document()
    doc["moderators"][1]["categories"][0]["share"] = 0.5
    with pytest.raises(DocumentError, match="sum to"):
        PopulationEstimates.from_document(doc)


def test_estimates_document_rejects_wrong_version(example1_estimates):
    doc = example1_estimates.to_document()
    doc["schema_version"] = 99
    with pytest.raises(DocumentError, match="schema_version"):
        PopulationEstimates.from_document(doc)
