"""Shade-occupancy prediction from thermal-stress features.

Pipeline: sensor CSV ingestion -> THI feature engineering -> regression
trees / random forests / a small fully connected network -> day-grouped
cross-validation with RMSE reporting. Everything stochastic is driven by
named, seeded Philox streams so runs are bit-reproducible.
"""

__version__ = "0.1.0"
