"""Shared fixtures for the loop soup test suite."""

import os
import tempfile

# keep test runs from writing into the project's logs/ directory
os.environ.setdefault("LOG_DIR", tempfile.mkdtemp(prefix="loopsoup-logs-"))

import pytest  # noqa: E402

from loopsoup.src.components.exact_engine import ExactEngine  # noqa: E402
from loopsoup.src.components.loop_sampler import LoopSampler  # noqa: E402
from loopsoup.src.config_entity.config_params import EngineConfig, ModelParams, SamplerSettings  # noqa: E402
from loopsoup.src.config_settings.config_manager import ConfigurationManager  # noqa: E402
from loopsoup.src.utils.rng import make_generator  # noqa: E402


@pytest.fixture
def engine():
    return ExactEngine(EngineConfig())


@pytest.fixture
def strict_engine():
    """Engine that refuses to raise its working precision on its own."""
    return ExactEngine(EngineConfig(precision_bits=64, auto_precision=False))


@pytest.fixture
def sampler():
    return LoopSampler(SamplerSettings())


@pytest.fixture
def general_sampler():
    return LoopSampler(SamplerSettings(mode="general"))


@pytest.fixture
def rng():
    return make_generator(20240611)


@pytest.fixture
def manager():
    return ConfigurationManager()


@pytest.fixture
def model():
    def build(n, kappa=1.0, alpha=1.0):
        return ModelParams(n=n, kappa=kappa, alpha=alpha)
    return build
