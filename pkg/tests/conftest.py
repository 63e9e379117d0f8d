import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from nkaq.syntax import ONE, ZERO, Star, atom, mk_prod, mk_sum

settings.register_profile("repo", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

SEED = 42


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


def exprs(letters=("a", "b", "c"), max_leaves=8, constants=True):
    """Expressions over ``letters``; stars may be improper."""
    leaves = [st.sampled_from([atom(x) for x in letters])]
    if constants:
        leaves.append(st.sampled_from([ZERO, ONE]))
    base = st.one_of(*leaves)

    def grow(children):
        return st.one_of(
            st.lists(children, min_size=2, max_size=3).map(mk_sum),
            st.lists(children, min_size=2, max_size=3).map(mk_prod),
            children.map(Star),
        )

    return st.recursive(base, grow, max_leaves=max_leaves)


def proper_exprs(letters=("a", "b", "c"), max_leaves=8):
    """Expressions whose starred parts never contain the empty word."""
    from nkaq.series import is_proper
    return exprs(letters, max_leaves).filter(is_proper)
