"""Shared fixture paths and helpers."""

from __future__ import annotations

from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def net6_path() -> Path:
    return FIXTURES / "net6.json"


@pytest.fixture(scope="session")
def net6(net6_path: Path):
    from icegrid.grid_model import parse_network

    return parse_network(net6_path)
