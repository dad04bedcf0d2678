"""pmtxcheck: a bounded verification workbench for crash-consistent
persistent-memory transactions.

Executable models of a PMDK-style failure-atomic transaction core and two
concurrent extensions (TML- and NOrec-based) run over simulated PSC/PTSO
persistency models; a bounded explorer checks every interleaving and crash
placement against an operational reference specification and the
dynamic-durable-opacity criterion over histories and execution graphs.
"""

from .explorer import Config, check_lower, check_upper, explore
from .opacity import (check_dynamic_opacity_execution, check_history_ddo,
                      check_opacity_execution,
                      check_serializability_execution)
from .refspec import accepts_history, sequential_histories

__version__ = "0.1.0"

__all__ = [
    "Config", "explore", "check_upper", "check_lower",
    "accepts_history", "sequential_histories",
    "check_opacity_execution", "check_dynamic_opacity_execution",
    "check_serializability_execution", "check_history_ddo",
    "__version__",
]
