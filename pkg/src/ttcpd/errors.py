"""Exception hierarchy shared by all calibration modules."""


class CalibrationError(Exception):
    """Base class for every error raised by :mod:`ttcpd`."""


class DomainError(CalibrationError, ValueError):
    """An input lies outside the domain of a formula (e.g. a PD not in (0, 1))."""


class EmptyPortfolio(CalibrationError, ValueError):
    """A sub-portfolio has no observed default rate at all."""

    def __init__(self, portfolios):
        self.portfolios = list(portfolios)
        super().__init__(f"no observed default rates for portfolio(s) {self.portfolios}")


class SingularSystem(CalibrationError):
    """The constrained least-squares system is rank deficient.

    ``report`` holds the :class:`~ttcpd.identifiability.IdentifiabilityReport`
    describing the deficiency and the disconnected portfolio/year groups.
    """

    def __init__(self, report):
        self.report = report
        msg = f"system is singular (rank deficiency {report.deficiency})"
        if report.notes:
            msg += ": " + "; ".join(report.notes)
        super().__init__(msg)


class NotConverged(CalibrationError):
    """The outer fixed-point loop hit ``max_iter``; ``trace`` has the history."""

    def __init__(self, trace, max_iter):
        self.trace = trace
        last = trace.records[-1] if trace.records else None
        msg = f"no convergence after {max_iter} iterations"
        if last is not None:
            msg += f" (last max|dK|={last.max_dk:.3e}, max|df|={last.max_df:.3e})"
        super().__init__(msg)
