"""Survey-anchored quota planning and enforcement for multi-site studies.

Pipeline: load weighted survey microdata, estimate per-category population
shares, compile them into per-category recruitment limits, then enforce
those limits over a live, append-only admission ledger. A simulation
harness quantifies how the limits bound composition drift and shrink
selection bias relative to recruiting the easiest sites first.
"""

from .errors import SiteQuotaError
from .estimation import (
    ModeratorSpec,
    PopulationEstimates,
    discretize,
    estimate,
    weighted_proportion,
    weighted_quantile_thresholds,
)
from .ledger import (
    AdmissionDecision,
    CandidateSite,
    RecruitmentLedger,
    classify_site,
    replay,
)
from .plan import QuotaPlan, build_plan, check_feasibility, load_plan, save_plan
from .survey import EligibilityFilter, SurveySchema, load_survey

__version__ = "0.1.0"

__all__ = [
    "AdmissionDecision",
    "CandidateSite",
    "EligibilityFilter",
    "ModeratorSpec",
    "PopulationEstimates",
    "QuotaPlan",
    "RecruitmentLedger",
    "SiteQuotaError",
    "SurveySchema",
    "build_plan",
    "check_feasibility",
    "classify_site",
    "discretize",
    "estimate",
    "load_plan",
    "load_survey",
    "replay",
    "save_plan",
    "weighted_proportion",
    "weighted_quantile_thresholds",
]
