"""Charges and exact solutions for asymptotically de Sitter initial data."""

from .charges import ChargeReport, ExtrapolationSpec, QuadratureSpec, charge_report
from .errors import DSChargeError
from .initial_data import InitialDataSet
from .models import build

__version__ = "0.1.0"

__all__ = [
    "ChargeReport",
    "DSChargeError",
    "ExtrapolationSpec",
    "InitialDataSet",
    "QuadratureSpec",
    "build",
    "charge_report",
]
