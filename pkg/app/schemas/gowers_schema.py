from enum import Enum

from pydantic import BaseModel, ConfigDict, Field

from app.config.config import settings


class Method(str, Enum):
    AUTO = "auto"
    DIRECT = "direct"
    RECURSIVE = "recursive-fft"
    MONTE_CARLO = "monte-carlo"

    @classmethod
    def _missing_(cls, value):
        aliases = {"recursive": cls.RECURSIVE, "fft": cls.RECURSIVE, "mc": cls.MONTE_CARLO}
        if isinstance(value, str):
            return aliases.get(value.lower())
        return None


class GowersReport(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = settings.REPORT_SCHEMA_VERSION
    k: int
    N: int
    ntilde: int = Field(alias="Ntilde")
    norm: float
    normalizer: float
    method: Method
    mc_stderr: float | None = None
    mc_lower_bound: float | None = None
    samples: int | None = None
    seed: int | None = None
    gcs_lower_bound: float | None = None


class NormEstimate(BaseModel):
    norm: float
    power: float
    method: Method
    stderr: float | None = None
    lower_bound: float | None = None
    samples: int | None = None


class GcsReport(BaseModel):
    lhs: float
    rhs: float
    holds: bool


class CorrelationReport(BaseModel):
    k: int
    N: int
    set_size: int
    value: float
    exact: bool
    stderr: float | None = None
    samples: int | None = None
