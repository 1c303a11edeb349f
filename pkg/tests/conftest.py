import pytest

from popsim.engine import TransitionTable
from popsim.majority import MajoritySpec, paper_sim_params


@pytest.fixture(scope="session")
def shared_tables():
    """Transition tables shared across tests keyed by (protocol, n)."""
    return {}


@pytest.fixture(scope="session")
def majority_table_factory(shared_tables):
    def get(n, **overrides):
        key = ("majority", n, tuple(sorted(overrides.items())))
        if key not in shared_tables:
            spec = MajoritySpec(paper_sim_params(n, **overrides))
            shared_tables[key] = TransitionTable(spec)
        return shared_tables[key]
    return get
