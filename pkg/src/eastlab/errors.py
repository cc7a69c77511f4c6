"""Shared exception types."""


class EastLabError(Exception):
    """Base class for all package errors."""


class IllegalUpdateError(EastLabError):
    """An update was attempted at a site whose facilitation constraint is not met.

    Carries the offending site so callers can report it.
    """

    def __init__(self, site, reason=""):
        self.site = site
        self.reason = reason
        msg = f"illegal update at site {site}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class SizeCapError(EastLabError):
    """An exact enumeration or dense solve was refused because the instance
    exceeds the documented size cap."""


class UnreachableTargetError(EastLabError):
    """No legal path connects the start configuration to the requested target."""


class BudgetExceededError(EastLabError):
    """A simulation or series evaluation ran out of its event/term budget.

    Partial results, when available, are attached as attributes rather than
    silently returned as if complete.
    """

    def __init__(self, msg, **partial):
        super().__init__(msg)
        for key, val in partial.items():
            setattr(self, key, val)
