import inspect

EMPTY = inspect._empty

QUARTERS_PER_HOUR = 4
HOURS_PER_DAY = 24

DT_DAA = 1.0
DT_ID = 1.0 / QUARTERS_PER_HOUR

# 365 * 24 / 12
HOURS_PER_MONTH = 730.0

# EPEX spot price limits (EUR/MWh)
PRICE_LIMIT = 9999.0

FEASIBILITY_TOL = 1e-6
INTEGRALITY_TOL = 1e-6
ZERO_TOL = 1e-9

NOISE_SWEEP = (0.1, 0.2, 0.5, 1.0)

__all__ = [
    "EMPTY",
    "QUARTERS_PER_HOUR",
    "HOURS_PER_DAY",
    "DT_DAA",
    "DT_ID",
    "HOURS_PER_MONTH",
    "PRICE_LIMIT",
    "FEASIBILITY_TOL",
    "INTEGRALITY_TOL",
    "ZERO_TOL",
    "NOISE_SWEEP",
]
