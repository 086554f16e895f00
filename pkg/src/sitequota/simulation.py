"""Monte Carlo comparison of recruitment strategies on synthetic populations.

Each site draws a category per moderator, a site-level impact
(base + per-category effects + normal noise) and a recruitment
attractiveness score (size_coef * lognormal size + per-category effects +
normal noise). When the same categories raise both impact and
attractiveness, recruiting the most attractive sites first overrepresents
high-impact sites and biases the sample mean; capping each category at its
population share plus slack bounds that overrepresentation.

All functional forms here are modeling assumptions of this harness, chosen
to be hand-verifiable; they are configuration, not estimated quantities.
Replications derive independent child seeds from (master_seed, replication
index), so results do not depend on execution order.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FeasibilityError, SimulationError
from .estimation import PopulationEstimates, canonical_digest
from .ledger import CandidateSite, RecruitmentLedger
from .plan import QuotaPlan, build_plan, check_feasibility

PURPOSIVE = "purposive"
QUOTA = "quota_constrained"
SIMPLE_RANDOM = "simple_random"
STRATEGIES = (PURPOSIVE, QUOTA, SIMPLE_RANDOM)

# fixed timestamp for in-memory simulation ledgers; nothing is persisted
_SIM_CLOCK = lambda: "1970-01-01T00:00:00+00:00"  # noqa: E731


@dataclass(frozen=True)
class ModeratorModel:
    name: str
    labels: tuple[str, ...]
    probabilities: tuple[float, ...]

    def __post_init__(self):
        if len(self.labels) != len(self.probabilities) or len(self.labels) < 2:
            raise SimulationError(
                f"moderator {self.name!r} needs matching labels and "
                "probabilities (at least 2)"
            )
        if any(p < 0 for p in self.probabilities):
            raise SimulationError(f"moderator {self.name!r} has negative probabilities")
        if abs(sum(self.probabilities) - 1.0) > 1e-9:
            raise SimulationError(
                f"probabilities for moderator {self.name!r} sum to "
                f"{sum(self.probabilities)!r}, not 1"
            )


@dataclass(frozen=True)
class ImpactModel:
    base: float = 0.0
    effects: dict[str, dict[str, float]] = field(default_factory=dict)
    noise_sd: float = 0.0


@dataclass(frozen=True)
class PropensityModel:
    size_coef: float = 0.0
    size_median: float = 1.0
    size_log_sd: float = 0.0
    effects: dict[str, dict[str, float]] = field(default_factory=dict)
    noise_sd: float = 0.0


@dataclass(frozen=True)
class SimConfig:
    population_size: int
    moderators: tuple[ModeratorModel, ...]
    impact: ImpactModel
    propensity: PropensityModel
    total_recruited: int
    slack: float = 0.05
    replications: int = 1
    master_seed: int = 0
    stochastic_response: bool = False

    def __post_init__(self):
        if self.population_size < self.total_recruited:
            raise SimulationError(
                f"population size {self.population_size} is below the "
                f"recruitment total {self.total_recruited}"
            )
        if self.total_recruited < 1:
            raise SimulationError("recruitment total must be at least 1")
        if self.replications < 1:
            raise SimulationError("at least one replication is required")
        names = [m.name for m in self.moderators]
        if not names or len(set(names)) != len(names):
            raise SimulationError("moderators must be non-empty and uniquely named")

    def to_document(self) -> dict:
        return {
            "population_size": self.population_size,
            "moderators": [
                {"name": m.name, "labels": list(m.labels),
                 "probabilities": list(m.probabilities)}
                for m in self.moderators
            ],
            "impact": {
                "base": self.impact.base,
                "effects": self.impact.effects,
                "noise_sd": self.impact.noise_sd,
            },
            "propensity": {
                "size_coef": self.propensity.size_coef,
                "size_median": self.propensity.size_median,
                "size_log_sd": self.propensity.size_log_sd,
                "effects": self.propensity.effects,
                "noise_sd": self.propensity.noise_sd,
            },
            "total_recruited": self.total_recruited,
            "slack": self.slack,
            "replications": self.replications,
            "master_seed": self.master_seed,
            "stochastic_response": self.stochastic_response,
        }

    @classmethod
    def from_document(cls, doc: dict) -> "SimConfig":
        try:
            moderators = tuple(
                ModeratorModel(
                    name=m["name"],
                    labels=tuple(m["labels"]),
                    probabilities=tuple(float(p) for p in m["probabilities"]),
                )
                for m in doc["moderators"]
            )
            impact_doc = doc.get("impact") or {}
            propensity_doc = doc.get("propensity") or {}
            return cls(
                population_size=int(doc["population_size"]),
                moderators=moderators,
                impact=ImpactModel(
                    base=float(impact_doc.get("base", 0.0)),
                    effects=impact_doc.get("effects") or {},
                    noise_sd=float(impact_doc.get("noise_sd", 0.0)),
                ),
                propensity=PropensityModel(
                    size_coef=float(propensity_doc.get("size_coef", 0.0)),
                    size_median=float(propensity_doc.get("size_median", 1.0)),
                    size_log_sd=float(propensity_doc.get("size_log_sd", 0.0)),
                    effects=propensity_doc.get("effects") or {},
                    noise_sd=float(propensity_doc.get("noise_sd", 0.0)),
                ),
                total_recruited=int(doc["total_recruited"]),
                slack=float(doc.get("slack", 0.05)),
                replications=int(doc.get("replications", 1)),
                master_seed=int(doc.get("master_seed", 0)),
                stochastic_response=bool(doc.get("stochastic_response", False)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SimulationError(f"invalid simulation config: {exc}") from None

    @classmethod
    def from_file(cls, path: str | Path) -> "SimConfig":
        path = Path(path)
        if not path.is_file():
            raise SimulationError(f"simulation config not found: {path}")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SimulationError(f"simulation config is not valid JSON: {exc}") from None
        return cls.from_document(doc)


@dataclass(frozen=True)
class Site:
    index: int
    profile: dict[str, str]
    impact: float
    attractiveness: float


@dataclass
class Population:
    sites: list[Site]
    moderators: tuple[ModeratorModel, ...]

    def __len__(self) -> int:
        return len(self.sites)

    def mean_impact(self) -> float:
        total = 0.0
        for site in self.sites:
            total += site.impact
        return total / len(self.sites)

    def realized_shares(self) -> dict[str, dict[str, float]]:
        counts: dict[str, dict[str, int]] = {
            m.name: {label: 0 for label in m.labels} for m in self.moderators
        }
        for site in self.sites:
            for mod, label in site.profile.items():
                counts[mod][label] += 1
        n = len(self.sites)
        return {
            mod: {label: c / n for label, c in labels.items()}
            for mod, labels in counts.items()
        }


def child_rng(master_seed: int, replication: int, stream: int) -> np.random.Generator:
    """Deterministic per-replication stream, independent of execution order."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=(master_seed, replication, stream))
    )


def generate_population(config: SimConfig, seed: int | np.random.Generator) -> Population:
    """Draw N synthetic sites: profile, impact, attractiveness."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = config.population_size

    profiles: list[dict[str, str]] = [dict() for _ in range(n)]
    impact = np.full(n, config.impact.base, dtype=float)
    score = np.zeros(n, dtype=float)
    for mod in config.moderators:
        draws = rng.choice(len(mod.labels), size=n, p=np.asarray(mod.probabilities))
        gamma = config.impact.effects.get(mod.name, {})
        d_eff = config.propensity.effects.get(mod.name, {})
        impact_by_level = np.array([gamma.get(label, 0.0) for label in mod.labels])
        score_by_level = np.array([d_eff.get(label, 0.0) for label in mod.labels])
        impact += impact_by_level[draws]
        score += score_by_level[draws]
        for i, level_index in enumerate(draws):
            profiles[i][mod.name] = mod.labels[level_index]

    size = rng.lognormal(
        mean=math.log(config.propensity.size_median),
        sigma=config.propensity.size_log_sd,
        size=n,
    )
    score += config.propensity.size_coef * size
    if config.impact.noise_sd > 0:
        impact += rng.normal(0.0, config.impact.noise_sd, size=n)
    if config.propensity.noise_sd > 0:
        score += rng.normal(0.0, config.propensity.noise_sd, size=n)

    sites = [
        Site(index=i, profile=profiles[i], impact=float(impact[i]),
             attractiveness=float(score[i]))
        for i in range(n)
    ]
    return Population(sites=sites, moderators=config.moderators)


def recruitment_order(population: Population) -> list[Site]:
    """Most attractive first; ties broken by site index for determinism."""
    return sorted(population.sites, key=lambda s: (-s.attractiveness, s.index))


def _response_mask(
    order: list[Site], rng: np.random.Generator | None, stochastic: bool
) -> list[bool]:
    if not stochastic:
        return [True] * len(order)
    if rng is None:
        raise SimulationError("stochastic response requires a seeded generator")
    draws = rng.random(len(order))
    return [
        draws[i] < 1.0 / (1.0 + math.exp(-site.attractiveness))
        for i, site in enumerate(order)
    ]


def run_purposive(
    population: Population,
    total: int,
    rng: np.random.Generator | None = None,
    stochastic: bool = False,
) -> list[Site]:
    """Walk sites in attractiveness order, taking the first *total* responders."""
    if len(population) < total:
        raise SimulationError(
            f"population of {len(population)} cannot supply {total} sites"
        )
    order = recruitment_order(population)
    responds = _response_mask(order, rng, stochastic)
    sample = [site for site, ok in zip(order, responds) if ok]
    return sample[:total]


@dataclass
class QuotaRun:
    sample: list[Site]
    rejections: int
    shortfall: int
    ledger: RecruitmentLedger


def run_quota(
    population: Population,
    plan: QuotaPlan,
    rng: np.random.Generator | None = None,
    stochastic: bool = False,
) -> QuotaRun:
    """Offer the same attractiveness-ordered stream to an admission ledger.

    Sites rejected by a limit are skipped; the walk stops once the plan's
    total is reached or the stream runs out (a shortfall, reported not
    raised).
    """
    report = check_feasibility(plan)
    if not report.feasible:
        bad = [m.moderator for m in report.moderators if not m.feasible]
        raise FeasibilityError(
            f"plan cannot reach {plan.total_target} sites; "
            f"limits too low under: {bad}"
        )
    ledger = RecruitmentLedger(plan, clock=_SIM_CLOCK)
    order = recruitment_order(population)
    responds = _response_mask(order, rng, stochastic)
    sample: list[Site] = []
    rejections = 0
    for site, ok in zip(order, responds):
        if not ok:
            continue
        decision = ledger.admit(
            CandidateSite(site_id=f"site-{site.index}", responses=site.profile)
        )
        if decision.accepted:
            sample.append(site)
            if len(sample) == plan.total_target:
                break
        else:
            rejections += 1
    return QuotaRun(
        sample=sample,
        rejections=rejections,
        shortfall=plan.total_target - len(sample),
        ledger=ledger,
    )


def run_simple_random(
    population: Population, total: int, rng: np.random.Generator
) -> list[Site]:
    indices = rng.choice(len(population), size=total, replace=False)
    return [population.sites[i] for i in sorted(int(i) for i in indices)]


@dataclass(frozen=True)
class SampleMetrics:
    bias: float
    deviations: dict[str, dict[str, float]]
    mean_deviation: float
    max_deviation: float


def evaluate(sample: list[Site], population: Population, plan: QuotaPlan | None = None) -> SampleMetrics:
    """Bias of the sample mean impact and per-category composition deviation."""
    if not sample:
        raise SimulationError("cannot evaluate an empty sample")
    sample_total = 0.0
    # index order, so a census sample reproduces the population sum exactly
    for site in sorted(sample, key=lambda s: s.index):
        sample_total += site.impact
    bias = sample_total / len(sample) - population.mean_impact()

    pop_shares = population.realized_shares()
    counts: dict[str, dict[str, int]] = {
        mod: {label: 0 for label in labels} for mod, labels in pop_shares.items()
    }
    for site in sample:
        for mod, label in site.profile.items():
            counts[mod][label] += 1
    deviations: dict[str, dict[str, float]] = {}
    flat: list[float] = []
    for mod, labels in pop_shares.items():
        deviations[mod] = {}
        for label, pop_share in labels.items():
            dev = abs(counts[mod][label] / len(sample) - pop_share)
            deviations[mod][label] = dev
            flat.append(dev)
    return SampleMetrics(
        bias=bias,
        deviations=deviations,
        mean_deviation=sum(flat) / len(flat),
        max_deviation=max(flat),
    )


def plan_from_population(population: Population, total: int, slack: float) -> QuotaPlan:
    """Quota plan anchored at the population's realized category shares."""
    shares = population.realized_shares()
    estimates = PopulationEstimates.from_shares(
        {mod: dict(labels) for mod, labels in shares.items()}
    )
    # plans are rebuilt per replication; clamp warnings would only be noise
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return build_plan(estimates, total, slack)


@dataclass(frozen=True)
class ReplicationRecord:
    replication: int
    strategy: str
    bias: float
    mean_deviation: float
    max_deviation: float
    rejections: int
    shortfall: int

    def to_dict(self) -> dict:
        return {
            "rep": self.replication,
            "strategy": self.strategy,
            "bias": self.bias,
            "mean_deviation": self.mean_deviation,
            "max_deviation": self.max_deviation,
            "rejections": self.rejections,
            "shortfall": self.shortfall,
        }


@dataclass(frozen=True)
class StrategySummary:
    strategy: str
    mean_bias: float
    bias_mc_se: float
    mean_abs_bias: float
    mean_deviation: float
    max_deviation: float
    mean_rejections: float
    shortfall_replications: int

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "mean_bias": self.mean_bias,
            "bias_mc_se": self.bias_mc_se,
            "mean_abs_bias": self.mean_abs_bias,
            "mean_deviation": self.mean_deviation,
            "max_deviation": self.max_deviation,
            "mean_rejections": self.mean_rejections,
            "shortfall_replications": self.shortfall_replications,
        }


@dataclass(frozen=True)
class SimResult:
    config: SimConfig
    strategies: dict[str, StrategySummary]
    bias_gap_quota_vs_purposive: float
    bias_gap_se: float
    records: tuple[ReplicationRecord, ...]

    def to_document(self, include_records: bool = False) -> dict:
        doc = {
            "config_digest": canonical_digest(self.config.to_document()),
            "replications": self.config.replications,
            "master_seed": self.config.master_seed,
            "strategies": {name: s.to_dict() for name, s in self.strategies.items()},
            "quota_vs_purposive": {
                "abs_bias_gap": self.bias_gap_quota_vs_purposive,
                "gap_mc_se": self.bias_gap_se,
            },
        }
        if include_records:
            doc["records"] = [r.to_dict() for r in self.records]
        return doc


def _mc_se(values: list[float]) -> float:
    if len(values) < 2:
        return 0.0
    return statistics.stdev(values) / math.sqrt(len(values))


def run_replication(config: SimConfig, replication: int) -> list[ReplicationRecord]:
    """One replication: shared population, all three strategies."""
    rng_pop = child_rng(config.master_seed, replication, 0)
    population = generate_population(config, rng_pop)
    plan = plan_from_population(population, config.total_recruited, config.slack)

    records: list[ReplicationRecord] = []

    rng_resp = (
        child_rng(config.master_seed, replication, 2)
        if config.stochastic_response else None
    )
    purposive_sample = run_purposive(
        population, config.total_recruited, rng_resp, config.stochastic_response
    )
    metrics = evaluate(purposive_sample, population, plan)
    records.append(
        ReplicationRecord(
            replication=replication, strategy=PURPOSIVE, bias=metrics.bias,
            mean_deviation=metrics.mean_deviation, max_deviation=metrics.max_deviation,
            rejections=0, shortfall=config.total_recruited - len(purposive_sample),
        )
    )

    rng_resp_q = (
        child_rng(config.master_seed, replication, 3)
        if config.stochastic_response else None
    )
    quota_run = run_quota(population, plan, rng_resp_q, config.stochastic_response)
    metrics = evaluate(quota_run.sample, population, plan)
    records.append(
        ReplicationRecord(
            replication=replication, strategy=QUOTA, bias=metrics.bias,
            mean_deviation=metrics.mean_deviation, max_deviation=metrics.max_deviation,
            rejections=quota_run.rejections, shortfall=quota_run.shortfall,
        )
    )

    rng_random = child_rng(config.master_seed, replication, 1)
    random_sample = run_simple_random(population, config.total_recruited, rng_random)
    metrics = evaluate(random_sample, population, plan)
    records.append(
        ReplicationRecord(
            replication=replication, strategy=SIMPLE_RANDOM, bias=metrics.bias,
            mean_deviation=metrics.mean_deviation, max_deviation=metrics.max_deviation,
            rejections=0, shortfall=0,
        )
    )
    return records


def run_experiment(config: SimConfig) -> SimResult:
    """All replications, reduced to per-strategy summaries.

    Aggregation happens over the per-replication records keyed by
    replication index, so running replications in any order (or in
    parallel) yields the same result.
    """
    all_records: list[ReplicationRecord] = []
    for replication in range(config.replications):
        all_records.extend(run_replication(config, replication))
    all_records.sort(key=lambda r: (r.replication, STRATEGIES.index(r.strategy)))

    strategies: dict[str, StrategySummary] = {}
    by_strategy: dict[str, list[ReplicationRecord]] = {name: [] for name in STRATEGIES}
    for record in all_records:
        by_strategy[record.strategy].append(record)
    for name, records in by_strategy.items():
        biases = [r.bias for r in records]
        strategies[name] = StrategySummary(
            strategy=name,
            mean_bias=sum(biases) / len(biases),
            bias_mc_se=_mc_se(biases),
            mean_abs_bias=sum(abs(b) for b in biases) / len(biases),
            mean_deviation=sum(r.mean_deviation for r in records) / len(records),
            max_deviation=max(r.max_deviation for r in records),
            mean_rejections=sum(r.rejections for r in records) / len(records),
            shortfall_replications=sum(1 for r in records if r.shortfall > 0),
        )

    # paired gap: both strategies see the same populations
    gaps = [
        abs(p.bias) - abs(q.bias)
        for p, q in zip(by_strategy[PURPOSIVE], by_strategy[QUOTA])
    ]
    return SimResult(
        config=config,
        strategies=strategies,
        bias_gap_quota_vs_purposive=sum(gaps) / len(gaps),
        bias_gap_se=_mc_se(gaps),
        records=tuple(all_records),
    )


def write_records_csv(result: SimResult, path: str | Path) -> None:
    """Per-replication export: rep, strategy, bias, deviations, rejections."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["rep", "strategy", "bias", "mean_deviation", "max_deviation",
             "rejections", "shortfall"]
        )
        for r in result.records:
            writer.writerow(
                [r.replication, r.strategy, r.bias, r.mean_deviation,
                 r.max_deviation, r.rejections, r.shortfall]
            )
