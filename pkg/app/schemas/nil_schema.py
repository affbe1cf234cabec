from pydantic import BaseModel


class HeisenbergReport(BaseModel):
    alpha: str
    beta: str
    n_max: int
    mode: str
    checked: int
    max_error: float
    passed: bool


class MappingEntry(BaseModel):
    block: int
    row: int
    col: int
    coefficients: list[str]  # ascending powers of n


class MappingPayload(BaseModel):
    p: int
    r: int
    entries: list[MappingEntry]


class InverseReport(BaseModel):
    mapping: MappingPayload
    inverse: MappingPayload
    degree: int
    inverse_degree: int
    product_is_identity: bool
    triviality_depth: int | None = None


class DiscrepancyReport(BaseModel):
    points: int
    dimension: int
    boxes_per_axis: int
    discrepancy: float


class FiltrationCheck(BaseModel):
    kind: str
    degree: int
    samples: int
    holds: bool
