"""popsim: population-protocol simulation toolkit.

Bundled protocols: the stable exact-majority protocol with its phase clock
and backup, the standalone fixed-resolution clock, stable floor(log2 n)
size estimation, and the pure epidemic/cancel processes used as timing
oracles.
"""

from .engine import (
    InteractionRecord,
    MaxInteractions,
    MaxParallelTime,
    Population,
    Predicate,
    RunResult,
    Silent,
    is_silent,
    new_population,
    run_until,
    step,
)
from .majority import (
    AgentState,
    BackupSpec,
    MajorityParams,
    MajoritySpec,
    backup_transition,
    exact_majority_oracle,
    majority_inputs,
    paper_proof_params,
    paper_sim_params,
)
from .protocol import ProtocolSpec, Randomized, check_swap_symmetry

__version__ = "0.1.0"

__all__ = [
    "AgentState",
    "BackupSpec",
    "InteractionRecord",
    "MajorityParams",
    "MajoritySpec",
    "MaxInteractions",
    "MaxParallelTime",
    "Population",
    "Predicate",
    "ProtocolSpec",
    "Randomized",
    "RunResult",
    "Silent",
    "backup_transition",
    "check_swap_symmetry",
    "exact_majority_oracle",
    "is_silent",
    "majority_inputs",
    "new_population",
    "paper_proof_params",
    "paper_sim_params",
    "run_until",
    "step",
]
