import hypothesis
import numpy as np
import pytest

from dummyfl.nn import LabeledBatch, MlpArchitecture, init_params

hypothesis.settings.register_profile("ci", max_examples=50, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile("ci")


def random_model(arch, rng, scale=1.0):
    model = init_params(arch, rng)
    return model.with_theta(model.theta * scale)


def random_batch(arch, n, rng):
    return LabeledBatch(rng.standard_normal((n, arch.input_dim)), rng.integers(0, arch.num_classes, n))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_arch():
    return MlpArchitecture(3, (4, 3), 3)


ACCEPTANCE_LOG = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LOG:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LOG:
            terminalreporter.write_line(line)
