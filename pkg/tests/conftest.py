from fractions import Fraction

import pytest

from app.services.bracket_service import realize
from app.services.dsl_service import parse_form


@pytest.fixture
def realized():
    """realized("a1*n*{a2*n}", {1: ..., 2: ...}) -> a bracket polynomial."""

    def build(text: str, binding: dict | None = None):
        return realize(parse_form(text), binding or {})

    return build


@pytest.fixture
def overflow_phi(realized):
    """{n/10} with unit multiplier, in exact mode."""
    return realized("a1*{1/10*n}", {1: Fraction(1)})


@pytest.fixture
def floors_file(tmp_path, monkeypatch):
    from app.config.config import settings

    path = tmp_path / "pilot_floors.json"
    monkeypatch.setattr(settings, "PILOT_FLOORS_PATH", str(path))
    return path
