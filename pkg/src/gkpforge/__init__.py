"""gkpforge: barrier budgets and Generalized King Plot extraction for
gravitomagnetic spin-quadrupole searches in highly charged ions.

The toolkit computes, at desk scale: the electromagnetic barrier budget of
a rank-2 spin-gravity search, exact angular-momentum selection rules and
hyperfine ladders, the multi-isotope design-matrix algebra with
preconditioned conditioning diagnostics, seeded Monte Carlo campaigns for
conditioning and injection-recovery, and the metrological milestone
arithmetic for the anomalous-coupling bound.
"""

__version__ = "0.1.0"

from . import angular, barriers, budget, gkp, montecarlo, nucdata
from .errors import (
    ConfigurationError,
    GkpforgeError,
    NumericalError,
    RankDeficiencyError,
    RefusalError,
    UnderdeterminedError,
    ValidationError,
)

__all__ = [
    "__version__",
    "angular",
    "barriers",
    "budget",
    "gkp",
    "montecarlo",
    "nucdata",
    "GkpforgeError",
    "ValidationError",
    "ConfigurationError",
    "RefusalError",
    "UnderdeterminedError",
    "RankDeficiencyError",
    "NumericalError",
]
