"""National research strengths by field from highly-cited publication authorship.

Submodules:

- ``corpus``: data model, validated ingestion, and dataset summaries
- ``disambig``: byline-to-roster resolution and its quality metrics
- ``hca``: world citation percentiles per (year, category) and highly-cited labels
- ``scoring``: top scientists under full and fractional counting
- ``analytics``: eligibility, incidence, rankings, and rank correlation
- ``synth``: seeded synthetic corpora and bias experiments
- ``pipeline``, ``reports``, ``cli``: end-to-end runs and their outputs
"""

__version__ = "0.1.0"

from .errors import DataValidationError, FieldStrengthError, InputError, InvariantViolation

__all__ = ["DataValidationError", "FieldStrengthError", "InputError", "InvariantViolation", "__version__"]
