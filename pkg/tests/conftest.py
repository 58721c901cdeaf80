"""
Pytest configuration and fixtures

Author: Edgar McOchieng
"""

import json
import os
import shutil
import tempfile

import pytest

from src.experiment import dump_config
from tests.factories import small_config


@pytest.fixture
def temp_dir():
    """Create a temporary directory for tests"""
    temp_path = tempfile.mkdtemp()
    yield temp_path
    shutil.rmtree(temp_path)


@pytest.fixture
def small_config_file(temp_dir):
    """A complete config file for a two-round run writing under temp_dir"""
    config = small_config(rounds=2, trust_alpha=11.0, output_dir=os.path.join(temp_dir, "runs"))
    return str(dump_config(config, os.path.join(temp_dir, "small.json")))


@pytest.fixture
def minimal_config_file(temp_dir):
    """A config file holding only the required key"""
    path = os.path.join(temp_dir, "minimal.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump({"trust_window": 5}, f)
    return path
