import hypothesis
import numpy as np
import pytest

from aoikit import mm11_abandonment, preemptive_line

hypothesis.settings.register_profile("suite", max_examples=60, deadline=None)
hypothesis.settings.load_profile("suite")


@pytest.fixture(scope="session")
def corpus():
    """Stable models exercised by every cross-cutting invariant."""
    return [
        mm11_abandonment(1.0, 1.0, 1.0),
        mm11_abandonment(1.0, 1.0, 0.0),
        mm11_abandonment(2.0, 3.0, 0.5),
        mm11_abandonment(0.5, 2.0, 0.5),
        preemptive_line([1.0]),
        preemptive_line([1.0, 1.0]),
        preemptive_line([1.0, 2.0, 3.0]),
        preemptive_line([2.0, 1.0, 0.5, 3.0]),
    ]


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240831)
