"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field


class BudgetModel(BaseModel):
    h_r: int = 16384
    h_s: int = 2048
    turns_t: int = 12


class ParamsModel(BaseModel):
    temperature: float = 1.0
    top_p: float = 1.0
    max_tokens: Optional[int] = None
    seed: Optional[int] = None


class BackendModel(BaseModel):
    kind: str
    script: Optional[str] = None
    base_url: Optional[str] = None
    model: Optional[str] = None
    api_key_env: Optional[str] = None
    max_in_flight: Optional[int] = None
    retry_limit: Optional[int] = None
    timeout_seconds: Optional[float] = None
    cache: Optional[str] = None
    inner: Optional[dict[str, Any]] = None

    def to_spec(self) -> dict[str, Any]:
        return {k: v for k, v in self.model_dump().items() if v is not None}


class DecodeRequest(BaseModel):
    dataset: str
    out_dir: str
    decoder: str = "rc"
    budget: BudgetModel = Field(default_factory=BudgetModel)
    params: ParamsModel = Field(default_factory=ParamsModel)
    samples: int = 1
    seed: int = 0
    backend: BackendModel
    templates_dir: Optional[str] = None
    summary_detail: str = "two_paragraphs"
    decoder_options: dict[str, Any] = Field(default_factory=dict)
    concurrency: int = 1


class DecodeResponse(BaseModel):
    run_dir: str
    decoder: str
    problems: int
    samples: int
    written: int
    skipped: int
    failures: list[dict[str, Any]]


class RolloutsRequest(BaseModel):
    dataset: str
    out_dir: str
    t_train: int = 3
    n_summ: int = 2
    k_group: int = 8
    budget: BudgetModel = Field(default_factory=BudgetModel)
    params: ParamsModel = Field(default_factory=ParamsModel)
    mode: str = "rc"
    use_replay: bool = False
    epoch: int = 1
    seed: int = 0
    backend: BackendModel
    buffer_path: Optional[str] = None
    buffer_capacity: Optional[int] = None
    baseline_kind: str = "self_refine"
    templates_dir: Optional[str] = None
    summary_detail: str = "two_paragraphs"


class RolloutsResponse(BaseModel):
    batch_path: str
    buffer_path: str
    rows: int
    groups: int
    zero_variance_groups: int = 0
    skipped_problems: list[Any] = Field(default_factory=list)
    fresh_start_problems: list[str] = Field(default_factory=list)
    max_lineage_depth: int = 0
    skipped_existing: bool = False


class EvalRequest(BaseModel):
    run_dir: str


class EvalResponse(BaseModel):
    summary: dict[str, Any]


class CostSweepRequest(BaseModel):
    c: int = 1000
    h_r: int = 16384
    h_s: int = 2048
    t_min: int = 1
    t_max: int = 12
    out_path: Optional[str] = None


class CostRow(BaseModel):
    t: int
    budget_tokens: int
    ic_standard: int
    ic_relay: int
    speedup: float
    memory_ratio: float


class CostSweepResponse(BaseModel):
    rows: list[CostRow]


class ScoreRequest(BaseModel):
    trace: str
    answer: str


class ScoreResponse(BaseModel):
    reward: float
    extracted: Optional[str]
    terminated: bool
    reason: str


class AnnotateStrategiesRequest(BaseModel):
    run_dir: str
    backend: BackendModel
    templates_dir: Optional[str] = None
    max_tokens: int = 512
    temperature: float = 0.0


class AnnotateStrategiesResponse(BaseModel):
    pairs: int
    distribution: dict[str, float]
    unparsed: int


class AnnotateDifficultyRequest(BaseModel):
    dataset: str
    out_path: str
    backend: BackendModel
    k: int = 64
    seed: int = 0
    budget: BudgetModel = Field(default_factory=BudgetModel)
    params: ParamsModel = Field(default_factory=ParamsModel)
    templates_dir: Optional[str] = None


class AnnotateDifficultyResponse(BaseModel):
    out_path: str
    problems_scored: int
    k: int


class HealthResponse(BaseModel):
    status: str
    version: str
