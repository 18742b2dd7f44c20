"""
Pydantic models for the RMMT library and benchmark.
Defines the public records: engine mode, transaction statistics, validation
reports, BP documents and benchmark configuration/results.
"""

import math
from enum import Enum
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .config import DEFAULT_LEAF_FILL
from .errors import AccountingError


class EngineKind(str, Enum):
    """Concurrency mode selector."""
    GLOBAL_RWLOCK = "rwlock"
    SPECULATIVE_FALLBACK = "speculative"


class ConcurrencyMode(BaseModel):
    """Engine mode plus speculative retry budget."""
    model_config = ConfigDict(frozen=True)

    kind: EngineKind = Field(..., description="Concurrency mode")
    retry_limit: int = Field(2, ge=0, description="Aborted attempts retried before taking the fallback lock")
    backoff: bool = Field(False, description="Exponential backoff between speculative retries")


class TxnStats(BaseModel):
    """Per-run operation counters."""
    model_config = ConfigDict(frozen=True)

    attempts: int = Field(0, ge=0, description="Speculative attempts started")
    fast_commits: int = Field(0, ge=0, description="Operations committed without the fallback lock")
    fallback_commits: int = Field(0, ge=0, description="Operations committed under the fallback lock")
    aborts: int = Field(0, ge=0, description="Aborted speculative attempts")
    reads_done: int = Field(0, ge=0, description="Completed read operations")
    writes_done: int = Field(0, ge=0, description="Completed write operations")
    max_attempts: int = Field(0, ge=0, description="Most speculative attempts used by a single operation")

    @property
    def completed(self) -> int:
        return self.fast_commits + self.fallback_commits


class Violation(BaseModel):
    """One broken structural rule."""
    path: Tuple[int, ...] = Field(..., description="Child indices from the root to the node")
    rule: str = Field(..., description="Rule name")
    detail: str = Field(..., description="What was found")


class ValidationReport(BaseModel):
    """Result of a full structural check of a tree."""
    violations: List[Violation] = Field(default=[], description="All violations found")

    @property
    def ok(self) -> bool:
        return not self.violations


class BpFormat(str, Enum):
    """Serialization formats for BP documents."""
    TEXT = "text"
    PACKED = "packed"


class BpDocument(BaseModel):
    """A balanced parentheses sequence with its provenance."""
    model_config = ConfigDict(frozen=True)

    seq: bytes = Field(..., description="One byte per symbol: 1 = open, 0 = close")
    source: str = Field("", description="File name or generator seed")

    @field_validator('seq', mode='before')
    @classmethod
    def coerce_seq(cls, v):
        if isinstance(v, (bytearray, memoryview)):
            return bytes(v)
        return v

    @property
    def node_count(self) -> int:
        return len(self.seq) // 2

    def __len__(self) -> int:
        return len(self.seq)


class BenchConfig(BaseModel):
    """Parameters of one benchmark run."""
    model_config = ConfigDict(frozen=True)

    mode: ConcurrencyMode = Field(..., description="Engine mode and retry budget")
    threads: int = Field(..., ge=1, description="Number of worker threads")
    duration_seconds: float = Field(..., gt=0, description="Timed loop length per repetition")
    write_pct: float = Field(..., ge=0, le=1, description="Probability that an iteration is a write")
    input_path: Optional[str] = Field(None, description="XML, BP text or packed BP input file")
    random_nodes: Optional[int] = Field(None, ge=0, description="Generate a random tree with this many nodes")
    seed: int = Field(..., description="Base seed for input generation and worker RNGs")
    repetitions: int = Field(..., ge=1, description="Number of repetitions")
    validate_after: bool = Field(True, description="Run a structural check after each repetition")
    leaf_fill: float = Field(DEFAULT_LEAF_FILL, gt=0, le=1, description="Leaf fill used when building the tree")
    prefer_writers: bool = Field(False, description="Reader-writer lock makes new readers wait behind queued writers")

    @model_validator(mode='after')
    def check_input(self):
        if (self.input_path is None) == (self.random_nodes is None):
            raise ValueError('exactly one of input_path or random_nodes is required')
        return self

    @property
    def retry_limit(self) -> int:
        return self.mode.retry_limit

    @property
    def input_label(self) -> str:
        return self.input_path if self.input_path is not None else f"random:{self.random_nodes}"


class BenchRecord(BaseModel):
    """One CSV row: a repetition, or the mean over repetitions."""
    mode: EngineKind = Field(..., description="Concurrency mode")
    threads: int = Field(..., ge=1, description="Worker threads")
    duration_s: float = Field(..., gt=0, description="Configured duration")
    write_pct: float = Field(..., ge=0, le=1, description="Configured write probability")
    retries: int = Field(..., ge=0, description="Configured retry budget")
    input: str = Field(..., description="Input file path, or 'random:<nodes>' for a generated tree")
    seed: int = Field(..., description="Base seed of the run")
    repetitions: int = Field(..., ge=1, description="Repetitions in the run")
    leaf_fill: float = Field(..., gt=0, le=1, description="Leaf fill used when building the tree")
    rep: Union[int, Literal["mean"]] = Field(..., description="Repetition index or 'mean'")
    ops_total: float = Field(..., ge=0, description="Completed operations")
    ops_read: float = Field(..., ge=0, description="Completed reads")
    ops_write: float = Field(..., ge=0, description="Completed writes")
    fast_commits: float = Field(..., ge=0, description="Speculative commits")
    fallback_commits: float = Field(..., ge=0, description="Fallback commits")
    aborts: float = Field(..., ge=0, description="Aborted attempts")
    throughput: float = Field(..., ge=0, description="Operations per second")
    wall_seconds: float = Field(..., gt=0, description="Measured wall time")
    validated: Optional[bool] = Field(None, description="Post-run structural check result")

    def check_accounting(self) -> None:
        """Raise AccountingError if the record's identities do not hold."""
        if not math.isclose(self.ops_total, self.ops_read + self.ops_write, abs_tol=1e-6):
            raise AccountingError(
                f"ops_total {self.ops_total} != ops_read {self.ops_read} + ops_write {self.ops_write}")
        if self.rep != "mean" and not math.isclose(
                self.throughput, self.ops_total / self.wall_seconds, rel_tol=1e-9, abs_tol=1e-9):
            raise AccountingError(
                f"throughput {self.throughput} != ops_total / wall_seconds")
        if self.mode == EngineKind.GLOBAL_RWLOCK and (self.aborts or self.fallback_commits):
            raise AccountingError("rwlock mode cannot abort or fall back")
