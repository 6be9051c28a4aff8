"""River-basin information system for daily hydro-meteorological series.

Modules:
    model       dense daily series, stations, immutable versioning
    ingest      delimited-text parsing and rendering, gap detection
    analysis    statistics, trends, correlation, availability, aggregation
    correction  outlier screening and gap-filling with audit records
    geodata     shapefile subset, catchment geometry, spatial linking
    catalogue   OGC CSW 2.0.2 (GET/KVP subset) metadata endpoint
    store       SQLite-backed persistence, accounts, permissions
    service     HTTP API
    cli         command-line entry points
"""

from .errors import BasinError
from .model import (
    DailySeries,
    GapReport,
    MISSING,
    QualityFlag,
    Station,
    StationKind,
    Variable,
    derive_version,
    validate_series,
)

__all__ = [
    "BasinError",
    "DailySeries",
    "GapReport",
    "MISSING",
    "QualityFlag",
    "Station",
    "StationKind",
    "Variable",
    "derive_version",
    "validate_series",
]

__version__ = "0.1.0"
