"""Online, per-user reply-priority ranking for email inboxes.

A bank of fixed rankers (OWA aggregations of three interaction criteria,
a timeline order and single-criterion orders) is combined per user by an
adaptive mixture that shifts weight to whichever ranker best predicted the
user's actual reply order.
"""

__version__ = "0.1.0"

from .aggregation import DEFAULT_RANKERS, RankerSpec, owa, rim_weights
from .config import ExperimentConfig, build_config
from .email_stream import AddressDirectory, EmailObject, parse_directory, parse_email_log
from .mrac import MOSRState, mosr_step, mrac_update, ranking_loss
from .pipeline import run_experiment

__all__ = [
    "DEFAULT_RANKERS", "RankerSpec", "owa", "rim_weights", "ExperimentConfig", "build_config",
    "AddressDirectory", "EmailObject", "parse_directory", "parse_email_log",
    "MOSRState", "mosr_step", "mrac_update", "ranking_loss", "run_experiment",
]
