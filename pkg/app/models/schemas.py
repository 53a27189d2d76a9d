"""Pydantic models: chain-spec file format and API request/response bodies"""

import json
import math
from pathlib import Path
from typing import Annotated, Dict, List, Optional, Union

from pydantic import AfterValidator, BaseModel, Field

from app.services.model import MG1Spec, PowerTailModel, make_sequence


def _check_matrix(rows: List[List[float]]) -> List[List[float]]:
    """Rectangular, non-empty, finite"""
    if not rows or not rows[0]:
        raise ValueError("matrix must be a non-empty array of rows")
    width = len(rows[0])
    for row in rows:
        if len(row) != width:
            raise ValueError(f"ragged matrix: rows of length {width} and {len(row)}")
        if not all(math.isfinite(x) for x in row):
            raise ValueError("matrix entries must be finite numbers")
    return rows


MatrixField = Annotated[List[List[float]], AfterValidator(_check_matrix)]


class TailModelSchema(BaseModel):
    """Power tail D (k^-gamma - (k+1)^-gamma), k >= k0"""
    gamma: float
    k0: int
    D: MatrixField


class BlockSequenceSchema(BaseModel):
    explicit: List[MatrixField] = Field(default_factory=list)
    tail: Optional[TailModelSchema] = None


class ChainSpecSchema(BaseModel):
    """
    Chain-spec JSON document.

    ``explicit[i]`` is block k_min + i, with k_min = -1 for A and 0 for B.
    """
    M0: int = Field(ge=1)
    M1: int = Field(ge=1)
    B_minus1: MatrixField
    B: BlockSequenceSchema
    A: BlockSequenceSchema

    def to_spec(self) -> MG1Spec:
        def tail(t: Optional[TailModelSchema]) -> Optional[PowerTailModel]:
            return None if t is None else PowerTailModel(gamma=t.gamma, k0=t.k0, D=t.D)

        return MG1Spec(
            M0=self.M0,
            M1=self.M1,
            B_minus1=self.B_minus1,
            Bseq=make_sequence("B", self.M0, self.M1, self.B.explicit, tail(self.B.tail)),
            Aseq=make_sequence("A", self.M0, self.M1, self.A.explicit, tail(self.A.tail)),
        )

    @classmethod
    def from_spec(cls, spec: MG1Spec) -> "ChainSpecSchema":
        """Serialize a chain (a truncated chain serializes with tail = null)."""
        def seq(s) -> BlockSequenceSchema:
            t = None
            if s.tail is not None:
                t = TailModelSchema(gamma=s.tail.gamma, k0=s.tail.k0, D=s.tail.D.tolist())
            return BlockSequenceSchema(explicit=[b.tolist() for b in s.explicit], tail=t)

        return cls(M0=spec.M0, M1=spec.M1, B_minus1=spec.B_minus1.tolist(), B=seq(spec.Bseq), A=seq(spec.Aseq))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ChainSpecSchema":
        with open(path, "r", encoding="utf-8") as f:
            return cls.model_validate(json.load(f))


# ---------------------------------------------------------------------------
# API
# ---------------------------------------------------------------------------

class SolveRequest(BaseModel):
    spec: ChainSpecSchema
    N: int = Field(ge=1)
    L: Optional[int] = Field(default=None, ge=0)


class HeadResponse(BaseModel):
    N: int
    L: int
    pis: List[List[float]]
    tail_mass: float
    normalization_detail: Dict[str, float]
    g_period: Optional[int] = None
    elapsed_ms: float = 0.0
    cached: bool = False


class ViolationSchema(BaseModel):
    clause: str
    message: str


class ValidateResponse(BaseModel):
    valid: bool
    violations: List[ViolationSchema] = Field(default_factory=list)
    warnings: List[str] = Field(default_factory=list)
    sigma: Optional[float] = None
    varpi: Optional[List[float]] = None
    mbar_A: Optional[List[float]] = None
    mbar_B_e: Optional[List[float]] = None
    flags: Dict[str, bool] = Field(default_factory=dict)
    assumption1_ok: bool = False


class TailsCheckRequest(BaseModel):
    gamma: float = Field(gt=1)
    xs: Optional[List[float]] = None
    y: float = 1.0
    p: float = 2.0
    xi: float = 1.0
    cutoff: int = 10_000


class DiagnosticsSchema(BaseModel):
    check: str
    distribution: str
    xs: List[float]
    ratios: List[float]
    target: float
    tolerance: float
    limit_estimate: float
    verdict: bool
    params: Dict[str, float] = Field(default_factory=dict)


class DiagnosticsResponse(BaseModel):
    integrated_tail: List[DiagnosticsSchema]
    light_tail_control: List[DiagnosticsSchema]


class SweepRequest(BaseModel):
    spec: ChainSpecSchema
    Ns: List[int] = Field(min_length=1)
    N_ref: int = Field(ge=1)
    gamma: Optional[float] = Field(default=None, gt=1)


class HealthResponse(BaseModel):
    status: str
    version: str
    solver: Dict[str, object] = Field(default_factory=dict)
