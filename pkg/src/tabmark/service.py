"""FastAPI service wrapping the core toolkit for multi-client use.

Tables travel inline as JSON (column names + row-major values); keys use the
same document schema as the key files, so a key generated over HTTP can be
saved and used by the CLI and vice versa. Heavy batch work (Monte-Carlo
sweeps, large file round-trips) stays in the CLI, which talks to the core
package directly.

Run with: uvicorn tabmark.service:app
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import tableio
from .detection import detect
from .embedding import DEFAULT_ALPHA, DEFAULT_M, NumericTable, build_key, embed_table
from .errors import TabmarkError
from .fidelity import fidelity_report
from .robustness import robustness_bounds

app = FastAPI(title="tabmark", version="0.1.0")


class TablePayload(BaseModel):
    columns: list[str]
    rows: list[list[float]]

    def to_table(self) -> NumericTable:
        if not self.rows:
            return NumericTable(self.columns, np.empty((0, len(self.columns))))
        return NumericTable(self.columns, np.asarray(self.rows, dtype=float))

    @classmethod
    def from_table(cls, table: NumericTable) -> "TablePayload":
        return cls(columns=list(table.column_names), rows=table.values.tolist())


class NormalizerModel(BaseModel):
    mean: float
    std: float


class KeyColumnModel(BaseModel):
    name: str
    m: int
    bits: str  # base64, bit-packed little-endian within bytes
    normalizer: Optional[NormalizerModel] = None


class KeyModel(BaseModel):
    version: int
    alpha_default: float
    columns: list[KeyColumnModel]

    def to_key(self):
        return tableio.key_from_dict(self.model_dump(exclude_none=True))

    @classmethod
    def from_key(cls, key) -> "KeyModel":
        return cls.model_validate(tableio.key_to_dict(key))


class KeygenRequest(BaseModel):
    table: TablePayload
    columns: Optional[list[str]] = None
    m: int = DEFAULT_M
    seed: int = 0
    alpha: float = DEFAULT_ALPHA


class EmbedRequest(BaseModel):
    table: TablePayload
    key: KeyModel
    seed: int = 0


class EmbedResponse(BaseModel):
    table: TablePayload
    linf: float
    per_column_w1: dict[str, float]


class DetectRequest(BaseModel):
    table: TablePayload
    key: KeyModel
    alpha: Optional[float] = None


class ColumnResultModel(BaseModel):
    column_name: str
    n: int
    green_count: int
    z: float
    binomial_p_value: float


class DetectResponse(BaseModel):
    per_column: list[ColumnResultModel]
    chi_square_stat: float
    degrees: int
    global_p_value: float
    alpha: float
    decision: str


class FidelityRequest(BaseModel):
    original: TablePayload
    watermarked: TablePayload
    key: KeyModel
    include_correlation: bool = False


class FidelityResponse(BaseModel):
    linf: float
    per_column_w1: dict[str, float]
    multivariate_w1_bound: float
    max_corr_diff: Optional[float] = None


class BoundsRequest(BaseModel):
    n: int = Field(ge=1)
    p: int = Field(ge=1)
    alpha: float = Field(gt=0.0, lt=1.0, default=0.05)


class BoundsResponse(BaseModel):
    n: int
    p: int
    alpha: float
    min_flips: float
    max_attacked: float
    failure_prob_lb: float


def _bad_request(exc: TabmarkError) -> HTTPException:
    return HTTPException(status_code=400, detail=str(exc))


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/keygen", response_model=KeyModel)
def keygen(req: KeygenRequest) -> KeyModel:
    try:
        table = req.table.to_table()
        key = build_key(table, req.columns, m=req.m, seed=req.seed, alpha=req.alpha)
        return KeyModel.from_key(key)
    except TabmarkError as exc:
        raise _bad_request(exc) from exc


@app.post("/embed", response_model=EmbedResponse)
def embed(req: EmbedRequest) -> EmbedResponse:
    try:
        table = req.table.to_table()
        key = req.key.to_key()
        wm = embed_table(table, key, req.seed)
        rep = fidelity_report(table, wm, key, include_correlation=False)
        return EmbedResponse(
            table=TablePayload.from_table(wm),
            linf=rep.linf,
            per_column_w1=dict(rep.per_column_w1),
        )
    except TabmarkError as exc:
        raise _bad_request(exc) from exc


@app.post("/detect", response_model=DetectResponse)
def detect_endpoint(req: DetectRequest) -> DetectResponse:
    try:
        report = detect(req.table.to_table(), req.key.to_key(), req.alpha)
    except TabmarkError as exc:
        raise _bad_request(exc) from exc
    return DetectResponse(
        per_column=[ColumnResultModel(**vars(c)) for c in report.per_column],
        chi_square_stat=report.chi_square_stat,
        degrees=report.degrees,
        global_p_value=report.global_p_value,
        alpha=report.alpha,
        decision=report.decision,
    )


@app.post("/fidelity", response_model=FidelityResponse)
def fidelity(req: FidelityRequest) -> FidelityResponse:
    try:
        rep = fidelity_report(
            req.original.to_table(),
            req.watermarked.to_table(),
            req.key.to_key(),
            include_correlation=req.include_correlation,
        )
    except TabmarkError as exc:
        raise _bad_request(exc) from exc
    return FidelityResponse(
        linf=rep.linf,
        per_column_w1=dict(rep.per_column_w1),
        multivariate_w1_bound=rep.multivariate_w1_bound,
        max_corr_diff=rep.max_corr_diff,
    )


@app.post("/bounds", response_model=BoundsResponse)
def bounds(req: BoundsRequest) -> BoundsResponse:
    try:
        b = robustness_bounds(req.n, req.p, req.alpha)
    except TabmarkError as exc:
        raise _bad_request(exc) from exc
    return BoundsResponse(**vars(b))
