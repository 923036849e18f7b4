"""Exception types raised by the toolkit.

Every error carries a ``details`` dict so the CLI can emit a machine-readable
diagnostic alongside the message.
"""


class DSChargeError(Exception):
    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    def to_dict(self):
        out = {"error": type(self).__name__, "message": str(self)}
        out.update({k: _plain(v) for k, v in self.details.items()})
        return out


def _plain(v):
    try:
        import numpy as np

        if isinstance(v, np.ndarray):
            return v.tolist()
        if isinstance(v, np.generic):
            return v.item()
    except ImportError:  # pragma: no cover
        pass
    return v


class ParameterError(DSChargeError, ValueError):
    """Invalid physical or numerical parameter (lambda <= 0, n_theta < 4, ...)."""


class DomainError(DSChargeError, ValueError):
    """A point lies outside the domain of a chart, slice or model."""


class DegenerateMetricError(DSChargeError, ValueError):
    pass


class SignatureError(DegenerateMetricError):
    """Lorentzian metric whose time direction is not timelike."""


class SingularChartError(DomainError):
    pass


class SingularSliceError(DomainError):
    pass


class HorizonError(DomainError):
    """Query too close to a coordinate horizon to be trusted."""


class InversionError(DSChargeError, ArithmeticError):
    pass


class IntegrationError(DSChargeError, ArithmeticError):
    pass


class NotFoundError(DSChargeError, LookupError):
    pass


class IncompleteReportError(DSChargeError, KeyError):
    def __str__(self):
        return self.args[0] if self.args else ""
