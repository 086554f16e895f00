"""Exception types shared across the toolkit.

Two broad families matter to callers: input/validation problems (bad files,
bad schemas, unclassifiable responses) and domain problems (quota conflicts,
corrupt ledgers, infeasible plans). The CLI maps them to distinct exit codes.
"""


class SiteQuotaError(Exception):
    """Base class for all toolkit errors."""


# --- validation family: the input artifact is wrong -------------------------

class SchemaError(SiteQuotaError):
    """A survey schema or study configuration document is invalid."""


class LoadError(SiteQuotaError):
    """Survey microdata could not be loaded (missing file/column, bad cell)."""


class EstimationError(SiteQuotaError):
    """Population shares or thresholds cannot be estimated from the data."""


class DocumentError(SiteQuotaError):
    """A JSON artifact (estimates, plan, config) fails its contract."""


class ClassificationError(SiteQuotaError):
    """A site response cannot be mapped onto a plan category."""


# --- domain family: the request conflicts with recorded state ---------------

class LedgerError(SiteQuotaError):
    """Base class for admission-ledger failures."""


class DuplicateSiteError(LedgerError):
    """The site id has already been accepted into this ledger."""


class UnknownSiteError(LedgerError):
    """The site id is not currently accepted (withdraw target missing)."""


class ReplayError(LedgerError):
    """An event log is corrupt, out of order, or violates quota limits."""

    def __init__(self, message: str, event_index: int | None = None):
        super().__init__(message)
        self.event_index = event_index


class FeasibilityError(SiteQuotaError):
    """A quota plan cannot admit enough sites to reach its overall total."""


class DigestMismatchError(SiteQuotaError):
    """A plan and an event log that were not created together."""


class LockHeldError(SiteQuotaError):
    """Another writer holds the advisory lock on the event log."""


class SimulationError(SiteQuotaError):
    """A simulation configuration or run is invalid."""
