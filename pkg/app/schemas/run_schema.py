from datetime import datetime
from enum import Enum
from typing import Any

from pydantic import BaseModel, Field

from app.config.config import settings


class NumericMode(str, Enum):
    FLOAT = "float"
    EXACT = "exact"


class OutputFormat(str, Enum):
    JSON = "json"
    CSV = "csv"


class Experiment(str, Enum):
    UK_FLOOR = "uk-floor"
    RECURRENCE_SCAN = "recurrence-scan"
    HEISENBERG = "heisenberg"
    APPENDIX_C = "appendixC"


class RunConfig(BaseModel):
    subcommand: str
    n_values: list[int] = []
    k: int | None = None
    phi: str | None = None
    bind: str | None = None
    mode: NumericMode = NumericMode.FLOAT
    method: str | None = None
    budget: int | None = None
    seed: int = settings.DEFAULT_SEED
    out: str | None = None
    format: OutputFormat = OutputFormat.JSON
    recalibrate: bool = False
    extra: dict[str, Any] = {}


class CellResult(BaseModel):
    cell_id: str
    k: int | None = None
    N: int | None = None
    value: float | None = None
    method: str | None = None
    stderr: float | None = None
    lower_bound: float | None = None
    floor: float | None = None
    passed: bool
    expected_fail: bool = False
    details: dict[str, Any] = {}


class ReproReport(BaseModel):
    schema_version: int = settings.REPORT_SCHEMA_VERSION
    experiment: Experiment
    config: RunConfig
    cells: list[CellResult]
    floors: dict[str, float] = {}
    floors_provenance: str | None = None
    notes: list[str] = []
    passed: bool
    wall_clock_seconds: float
    created_at: datetime = Field(default_factory=datetime.now)
