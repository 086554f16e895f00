"""Command-line pipeline: estimate shares, compile a plan, run recruitment.

A quota rejection is a successful adjudication and exits 0 with the verdict
in the output; nonzero exits are reserved for malfunctions. Usage errors
exit 2, invalid input artifacts exit 3, domain conflicts (infeasible plan,
duplicate site, corrupt log) exit 4.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from .errors import (
    ClassificationError,
    DigestMismatchError,
    DocumentError,
    EstimationError,
    FeasibilityError,
    LedgerError,
    LoadError,
    LockHeldError,
    SchemaError,
    SimulationError,
)
from .estimation import PopulationEstimates, estimate, load_study_config
from .eventlog import open_ledger, replay_file
from .ledger import CandidateSite, ProgressReport
from .plan import build_plan, check_feasibility, load_plan, save_plan
from .simulation import SimConfig, run_experiment, write_records_csv
from .survey import load_survey

EXIT_VALIDATION = 3
EXIT_DOMAIN = 4

_VALIDATION_ERRORS = (SchemaError, LoadError, EstimationError, DocumentError,
                      ClassificationError)
_DOMAIN_ERRORS = (LedgerError, FeasibilityError, LockHeldError,
                  DigestMismatchError, SimulationError)


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _VALIDATION_ERRORS as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)
        except _DOMAIN_ERRORS as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_DOMAIN)

    return wrapper


def _emit(document: dict, out: str | None) -> None:
    text = json.dumps(document, indent=2)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        click.echo(text)


def _load_site(path: str) -> CandidateSite:
    p = Path(path)
    if not p.is_file():
        raise DocumentError(f"site file not found: {p}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DocumentError(f"site file is not valid JSON: {exc}") from None
    if "site_id" not in doc or "responses" not in doc:
        raise DocumentError("site file must carry 'site_id' and 'responses'")
    return CandidateSite(
        site_id=doc["site_id"],
        responses=doc["responses"],
        metadata=doc.get("metadata") or {},
    )


@click.group()
def main() -> None:
    """Survey-anchored quota planning and recruitment enforcement."""


@main.command("estimate")
@click.option("--survey", "survey_path", required=True, help="Delimited survey microdata file.")
@click.option("--schema", "schema_path", required=True,
              help="Study configuration JSON (survey schema + moderators).")
@click.option("--out", "out", default=None, help="Write estimates JSON here (default: stdout).")
@handle_errors
def estimate_cmd(survey_path: str, schema_path: str, out: str | None) -> None:
    """Estimate per-category population shares from survey microdata."""
    schema, specs = load_study_config(schema_path)
    dataset = load_survey(survey_path, schema)
    estimates = estimate(dataset, specs)
    _emit(estimates.to_document(), out)
    for line in dataset.report.warnings:
        click.echo(f"warning: {line}", err=True)


@main.command("plan")
@click.option("--estimates", "estimates_path", required=True, help="Estimates JSON document.")
@click.option("--total", "total", required=True, type=int,
              help="Total number of sites the study aims to recruit.")
@click.option("--slack", "slack", default=0.05, show_default=True, type=float,
              help="Tolerated per-category overrepresentation, in share terms.")
@click.option("--out", "out", default=None, help="Write plan JSON here (default: stdout).")
@handle_errors
def plan_cmd(estimates_path: str, total: int, slack: float, out: str | None) -> None:
    """Compile estimates into per-category targets and integer limits."""
    p = Path(estimates_path)
    if not p.is_file():
        raise DocumentError(f"estimates document not found: {p}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DocumentError(f"estimates document is not valid JSON: {exc}") from None
    estimates = PopulationEstimates.from_document(doc)
    plan = build_plan(estimates, total, slack)
    report = check_feasibility(plan)
    document = save_plan(plan, out)
    if not out:
        click.echo(json.dumps(document, indent=2))
    click.echo(json.dumps(report.to_dict(), indent=2), err=True)


@main.command("admit")
@click.option("--plan", "plan_path", required=True)
@click.option("--log", "log_path", required=True)
@click.option("--site", "site_path", required=True, help="Candidate site JSON file.")
@handle_errors
def admit_cmd(plan_path: str, log_path: str, site_path: str) -> None:
    """Adjudicate a site and record the decision in the event log."""
    plan = load_plan(plan_path)
    site = _load_site(site_path)
    with open_ledger(plan, log_path) as lf:
        decision = lf.admit(site)
    click.echo(json.dumps(decision.to_dict(), indent=2))


@main.command("whatif")
@click.option("--plan", "plan_path", required=True)
@click.option("--log", "log_path", required=True)
@click.option("--site", "site_path", required=True, help="Candidate site JSON file.")
@handle_errors
def whatif_cmd(plan_path: str, log_path: str, site_path: str) -> None:
    """Adjudicate a site without recording anything."""
    plan = load_plan(plan_path)
    site = _load_site(site_path)
    ledger = replay_file(plan, log_path)
    decision = ledger.what_if(site)
    click.echo(json.dumps(decision.to_dict(), indent=2))


@main.command("withdraw")
@click.option("--plan", "plan_path", required=True)
@click.option("--log", "log_path", required=True)
@click.option("--id", "site_id", required=True)
@handle_errors
def withdraw_cmd(plan_path: str, log_path: str, site_id: str) -> None:
    """Withdraw an accepted site, freeing its quota capacity."""
    plan = load_plan(plan_path)
    with open_ledger(plan, log_path) as lf:
        event = lf.withdraw(site_id)
    click.echo(json.dumps({"site_id": site_id, "status": "withdrawn", "seq": event.seq}))


def _render_status(report: ProgressReport) -> str:
    width = max(
        [len(f"{c.moderator}/{c.label}") for c in report.categories] + [8]
    )
    lines = [
        f"accepted {report.accepted} of {report.total_target}"
        + (" (complete)" if report.complete else ""),
        f"{'category'.ljust(width)}  tally  target  limit  remaining  status",
    ]
    for c in report.categories:
        name = f"{c.moderator}/{c.label}".ljust(width)
        lines.append(
            f"{name}  {c.tally:5d}  {c.target:6g}  {c.limit:5d}  "
            f"{c.remaining:9d}  {c.status}"
        )
    if report.steer_toward:
        steer = ", ".join(f"{s.moderator}/{s.label}" for s in report.steer_toward)
        lines.append(f"steer recruitment toward: {steer}")
    return "\n".join(lines)


@main.command("status")
@click.option("--plan", "plan_path", required=True)
@click.option("--log", "log_path", required=True)
@click.option("--json", "as_json", is_flag=True, default=False,
              help="Machine-readable report.")
@handle_errors
def status_cmd(plan_path: str, log_path: str, as_json: bool) -> None:
    """Progress report: tallies, remaining capacity, steering hints."""
    plan = load_plan(plan_path)
    ledger = replay_file(plan, log_path)
    report = ledger.status()
    if as_json:
        click.echo(json.dumps(report.to_dict(), indent=2))
    else:
        click.echo(_render_status(report))


@main.command("replay")
@click.option("--plan", "plan_path", required=True)
@click.option("--log", "log_path", required=True)
@handle_errors
def replay_cmd(plan_path: str, log_path: str) -> None:
    """Validate an event log and print the resulting tallies."""
    plan = load_plan(plan_path)
    ledger = replay_file(plan, log_path)
    click.echo(json.dumps(ledger.snapshot(), indent=2))


@main.command("serve")
@click.option("--config", "config_path", required=True, help="Service config JSON.")
@handle_errors
def serve_cmd(config_path: str) -> None:
    """Run the recruitment HTTP service."""
    from .service import ServiceConfig, serve

    serve(ServiceConfig.from_file(config_path))


@main.command("simulate")
@click.option("--config", "config_path", required=True, help="Simulation config JSON.")
@click.option("--out", "out", default=None, help="Write SimResult JSON here (default: stdout).")
@click.option("--csv", "csv_path", default=None,
              help="Also write per-replication records as CSV.")
@handle_errors
def simulate_cmd(config_path: str, out: str | None, csv_path: str | None) -> None:
    """Compare purposive, quota-constrained, and simple-random recruitment."""
    config = SimConfig.from_file(config_path)
    result = run_experiment(config)
    _emit(result.to_document(), out)
    if csv_path:
        write_records_csv(result, csv_path)


if __name__ == "__main__":
    main()
