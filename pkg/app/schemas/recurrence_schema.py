from enum import Enum

from pydantic import BaseModel

from app.config.config import settings


class CheckMode(str, Enum):
    PLAIN = "plain"
    STRONG = "strong"
    APPROX = "approx"
    STRONG_APPROX = "strong_approx"

    @property
    def strong(self) -> bool:
        return self in (CheckMode.STRONG, CheckMode.STRONG_APPROX)

    @property
    def approximate(self) -> bool:
        return self in (CheckMode.APPROX, CheckMode.STRONG_APPROX)


class BudgetMode(str, Enum):
    EXHAUSTIVE = "exhaustive"
    RANDOMIZED = "randomized"


class CheckerBudget(BaseModel):
    mode: BudgetMode = BudgetMode.EXHAUSTIVE
    max_tuples: int = settings.CHECKER_MAX_TUPLES
    seed: int = settings.DEFAULT_SEED


class ViolationWitness(BaseModel):
    n: int
    hs: list[int]
    derivative_value: float
    derivative_exact: str | None = None
    mode: CheckMode


class CheckResult(BaseModel):
    schema_version: int = settings.REPORT_SCHEMA_VERSION
    ok: bool
    certified: bool
    mode: CheckMode
    budget: CheckerBudget
    k: int
    N: int
    set_size: int
    tuples_checked: int
    delta: float | None = None
    witness: ViolationWitness | None = None
    note: str | None = None


class WeakRecurrenceReport(BaseModel):
    N: int
    eps: float
    lam: float
    density: float
    holds: bool


class DerivativeIdentityReport(BaseModel):
    k: int
    n: int
    h: int
    lhs: float
    rhs: float
    lhs_exact: str | None = None
    rhs_exact: str | None = None
    equal: bool


class DilationReport(BaseModel):
    k: int
    n: int
    h: int
    dilated_h: int
    phi_value: float
    nu_values: list[float]
    predicted_phi_width: float
    predicted_nu_width: float
    phi_factor: float
    nu_factor: float | None = None
    within_prediction: bool
    hypothesis_breach: bool
    chain_holds: bool


class SimpleDerivReport(BaseModel):
    n: int
    hs: list[int]
    value: float
    q: float | None = None
    q_is_integer: bool | None = None
    abs_q: float | None = None


class ConcentrationReport(BaseModel):
    N: int
    set_size: int
    interval: str | None = None
    fraction: float


class SweepRow(BaseModel):
    eps: float
    progressions: int
    violations: int


class SweepReport(BaseModel):
    k: int
    N: int
    rows: list[SweepRow]
    largest_clean_eps: float | None = None


class DensityRow(BaseModel):
    N: int
    density: float


class DensityScanReport(BaseModel):
    rows: list[DensityRow]
    floor: float | None = None
    smallest_n_meeting_floor: int | None = None
