import os
import sys
from datetime import datetime, timedelta, timezone

import pytest

# Modules live at the repository root
sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from corpus import SAMPLE_PROFILES, synthesize_sample  # noqa: E402

SAMPLE_TEXT = "this is a test and this is fun"


class FixedClock:
    """Deterministic clock advancing one second per reading"""

    def __init__(self, start=datetime(2024, 1, 1, tzinfo=timezone.utc), step=timedelta(seconds=1)):
        self.now = start
        self.step = step

    def __call__(self):
        current = self.now
        self.now = self.now + self.step
        return current


@pytest.fixture
def sample_text():
    return SAMPLE_TEXT


@pytest.fixture
def clock():
    return FixedClock()


@pytest.fixture
def registry_path(tmp_path):
    return tmp_path / "registry.jsonl"


@pytest.fixture(scope="session")
def experiment_corpus():
    """The ten synthesized experiment samples, keyed by sample id"""
    return {
        profile.sample_id: synthesize_sample(profile.word_count, seed=index)
        for index, profile in enumerate(SAMPLE_PROFILES)
    }
