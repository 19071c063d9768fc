"""Value types shared by every module: industrial metadata, datasets, model
parameters, and the task/population/cohort/plan orchestration hierarchy.

All types are immutable after construction and serialize to JSON with exactly
the field names declared here; scenario files and run reports use that form.
Per-sample structure (finite values, quality-code alignment) is rejected at
construction, while cross-sample and schema-vs-aspect checks are performed by
:func:`dataset_conforms` so that malformed datasets can be diagnosed.
"""

from __future__ import annotations

import math
from enum import Enum
from typing import Annotated, Any, Mapping, Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import CycleDetected, SchemaMismatch, TypeMismatch, UnresolvedReference

FiniteFloat = Annotated[float, Field(allow_inf_nan=False)]
Byte = Annotated[int, Field(ge=0, le=255)]


class FrozenModel(BaseModel):
    model_config = ConfigDict(frozen=True)


class DataType(str, Enum):
    Real = "Real"
    Integer = "Integer"
    Boolean = "Boolean"


class TaskKind(str, Enum):
    Training = "Training"
    Evaluation = "Evaluation"


class FLMode(str, Enum):
    Sync = "Sync"
    Async = "Async"


class Algorithm(str, Enum):
    LinearRegressionGD = "LinearRegressionGD"


class ClientStep(str, Enum):
    Preprocess = "Preprocess"
    Train = "Train"
    Evaluate = "Evaluate"


class ServerStep(str, Enum):
    FedAvgAggregate = "FedAvgAggregate"
    AsyncMerge = "AsyncMerge"
    CollectMetrics = "CollectMetrics"


class Variable(FrozenModel):
    """One typed channel of an aspect's time series."""

    name: str = Field(min_length=1)
    unit: str = ""
    dataType: DataType = DataType.Real
    defaultValue: float | int | bool = 0.0
    length: int = Field(default=1, ge=1)
    qualityCode: bool = False

    @model_validator(mode="after")
    def _default_matches_type(self) -> "Variable":
        v = self.defaultValue
        if self.dataType is DataType.Boolean:
            if not isinstance(v, bool):
                raise ValueError("defaultValue must be a boolean")
        elif self.dataType is DataType.Integer:
            if isinstance(v, bool) or not isinstance(v, int):
                raise ValueError("defaultValue must be an integer")
        else:
            if isinstance(v, bool):
                raise ValueError("defaultValue must be a real number")
            if not math.isfinite(float(v)):
                raise ValueError("defaultValue must be finite")
        return self


class AspectType(FrozenModel):
    """Data scheme: an ordered set of variables."""

    id: str = Field(min_length=1)
    name: str = ""
    variables: tuple[Variable, ...] = Field(min_length=1)

    @model_validator(mode="after")
    def _distinct_names(self) -> "AspectType":
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ValueError("variable names must be pairwise distinct")
        return self

    @property
    def sample_width(self) -> int:
        return sum(v.length for v in self.variables)

    @property
    def has_quality_codes(self) -> bool:
        return any(v.qualityCode for v in self.variables)


class AssetType(FrozenModel):
    id: str = Field(min_length=1)
    name: str = ""
    aspectTypeIds: tuple[str, ...] = Field(min_length=1)
    parentTypeId: Optional[str] = None

    @field_validator("aspectTypeIds")
    @classmethod
    def _canonical(cls, ids: tuple[str, ...]) -> tuple[str, ...]:
        return tuple(sorted(set(ids)))


class Asset(FrozenModel):
    """A concrete machine instance recorded by one edge device."""

    id: str = Field(min_length=1)
    assetTypeId: str
    location: str = ""
    envDescription: str = ""
    parentAssetId: Optional[str] = None
    edgeDeviceId: str


class HwConfig(FrozenModel):
    cpuCores: int = Field(ge=1)
    memMb: int = Field(ge=1)


class ResourceUsage(FrozenModel):
    cpuLoad: float = Field(ge=0.0, le=1.0)
    memUsedMb: int = Field(ge=0)


class EdgeDevice(FrozenModel):
    id: str = Field(min_length=1)
    organizationId: str
    location: str = ""
    hwConfig: HwConfig
    resourceUsage: ResourceUsage

    @model_validator(mode="after")
    def _usage_within_hw(self) -> "EdgeDevice":
        if self.resourceUsage.memUsedMb > self.hwConfig.memMb:
            raise ValueError("memUsedMb exceeds configured memMb")
        return self


class Sample(FrozenModel):
    """One timestamped observation: input values, a target, optional codes."""

    timestamp: int = Field(ge=0)
    values: tuple[FiniteFloat, ...]
    target: FiniteFloat
    qualityCodes: Optional[tuple[Byte, ...]] = None

    @model_validator(mode="after")
    def _codes_aligned(self) -> "Sample":
        if self.qualityCodes is not None and len(self.qualityCodes) != len(self.values):
            raise ValueError("qualityCodes must align with values")
        return self


class Dataset(FrozenModel):
    aspectTypeId: str
    samples: tuple[Sample, ...] = ()


class MLModelSpec(FrozenModel):
    id: str = Field(min_length=1)
    algorithm: Algorithm = Algorithm.LinearRegressionGD
    inputDim: int = Field(ge=1)
    aspectTypeId: str


class ModelParams(FrozenModel):
    """Flat linear-model parameters; the unit of FL exchange."""

    weights: tuple[FiniteFloat, ...] = Field(min_length=1)
    bias: FiniteFloat = 0.0
    version: int = Field(default=0, ge=0)

    @property
    def dim(self) -> int:
        return len(self.weights)


class TaskConfig(FrozenModel):
    learningRate: float = Field(gt=0.0)
    localEpochs: int = Field(default=1, ge=0)
    # maxRounds admits 0 (degenerate runs stop immediately with MaxRounds)
    maxRounds: int = Field(default=1, ge=0)
    convergenceEps: float = Field(default=1e-8, gt=0.0)
    repeatEverySec: Optional[int] = Field(default=None, gt=0)
    mode: FLMode = FLMode.Sync


class FLTask(FrozenModel):
    id: str = Field(min_length=1)
    clientId: str
    modelSpecId: str
    assetId: str
    kind: TaskKind = TaskKind.Training
    config: TaskConfig


class PopulationKey(FrozenModel):
    """Identity of a learning problem: asset type plus the data schemes."""

    assetTypeId: str
    aspectTypeIds: tuple[str, ...] = Field(min_length=1)

    @field_validator("aspectTypeIds")
    @classmethod
    def _canonical(cls, ids: tuple[str, ...]) -> tuple[str, ...]:
        return tuple(sorted(set(ids)))

    def as_string(self) -> str:
        return f"{self.assetTypeId}::{','.join(self.aspectTypeIds)}"


class FLPopulation(FrozenModel):
    key: PopulationKey
    taskIds: tuple[str, ...] = ()

    @field_validator("taskIds")
    @classmethod
    def _canonical(cls, ids: tuple[str, ...]) -> tuple[str, ...]:
        return tuple(sorted(set(ids)))


class FLCohort(FrozenModel):
    id: str = Field(min_length=1)
    populationKey: PopulationKey
    taskIds: tuple[str, ...] = Field(min_length=1)
    isDefault: bool = False

    @field_validator("taskIds")
    @classmethod
    def _canonical(cls, ids: tuple[str, ...]) -> tuple[str, ...]:
        return tuple(sorted(set(ids)))


class ScheduleEntry(FrozenModel):
    deviceId: str
    startTick: int = Field(ge=0)
    durationTicks: int = Field(ge=1)


class FLPlan(FrozenModel):
    id: str = Field(min_length=1)
    taskIds: tuple[str, ...] = Field(min_length=1)
    clientSteps: tuple[ClientStep, ...]
    serverStep: ServerStep
    schedule: tuple[ScheduleEntry, ...] = ()

    @field_validator("taskIds")
    @classmethod
    def _canonical(cls, ids: tuple[str, ...]) -> tuple[str, ...]:
        return tuple(sorted(set(ids)))

    @model_validator(mode="after")
    def _no_device_overlap(self) -> "FLPlan":
        by_device: dict[str, list[tuple[int, int]]] = {}
        for e in self.schedule:
            by_device.setdefault(e.deviceId, []).append((e.startTick, e.startTick + e.durationTicks))
        for device, spans in by_device.items():
            spans.sort()
            for (_, end_a), (start_b, _) in zip(spans, spans[1:]):
                if start_b < end_a:
                    raise ValueError(f"overlapping schedule intervals on device {device!r}")
        return self


def population_key(task: FLTask, catalog: Any) -> PopulationKey:
    """Population identity of a task: its asset's type plus the model spec's
    aspect types. Equal keys mean the same learning problem.

    ``catalog`` needs ``assets`` and ``modelSpecs`` mappings (see
    registry.Catalog).
    """
    asset = catalog.assets.get(task.assetId)
    if asset is None:
        raise UnresolvedReference(f"asset {task.assetId!r} not in catalog")
    spec = catalog.modelSpecs.get(task.modelSpecId)
    if spec is None:
        raise UnresolvedReference(f"model spec {task.modelSpecId!r} not in catalog")
    return PopulationKey(assetTypeId=asset.assetTypeId, aspectTypeIds=(spec.aspectTypeId,))


def _check_forest(parent_of: Mapping[str, Optional[str]]) -> None:
    state: dict[str, int] = {}  # 0 in progress, 1 done
    for start in parent_of:
        node: Optional[str] = start
        trail = []
        while node is not None and node in parent_of and node not in state:
            state[node] = 0
            trail.append(node)
            nxt = parent_of[node]
            if nxt is not None and nxt in state and state[nxt] == 0:
                raise CycleDetected(nxt)
            node = nxt
        if node is not None and node not in parent_of:
            raise UnresolvedReference(f"parent {node!r} is not part of the submitted records")
        for n in trail:
            state[n] = 1


def validate_hierarchy(assets: Sequence[Asset], types: Sequence[AssetType]) -> None:
    """Check that asset and asset-type parent graphs are forests and that an
    asset's parent has the type its own type declares as parent.

    Raises CycleDetected, TypeMismatch, or UnresolvedReference.
    """
    _check_forest({t.id: t.parentTypeId for t in types})
    _check_forest({a.id: a.parentAssetId for a in assets})

    types_by_id = {t.id: t for t in types}
    assets_by_id = {a.id: a for a in assets}
    for a in assets:
        own_type = types_by_id.get(a.assetTypeId)
        if own_type is None:
            raise UnresolvedReference(f"asset type {a.assetTypeId!r} is not part of the submitted records")
        if a.parentAssetId is None or own_type.parentTypeId is None:
            continue
        parent = assets_by_id[a.parentAssetId]
        if parent.assetTypeId != own_type.parentTypeId:
            raise TypeMismatch(a.id, f"parent has type {parent.assetTypeId!r}, expected {own_type.parentTypeId!r}")


def dataset_conforms(ds: Dataset, at: AspectType) -> None:
    """Check a dataset against its aspect type's scheme.

    Raises SchemaMismatch(sampleIndex, reason) on the first offending sample;
    returns None when the dataset conforms.
    """
    if ds.aspectTypeId != at.id:
        raise SchemaMismatch(0, f"dataset is for aspect type {ds.aspectTypeId!r}, not {at.id!r}")
    width = at.sample_width
    needs_codes = at.has_quality_codes
    prev_ts: Optional[int] = None
    for i, sample in enumerate(ds.samples):
        if len(sample.values) != width:
            raise SchemaMismatch(i, f"expected {width} values, got {len(sample.values)}")
        if prev_ts is not None and sample.timestamp <= prev_ts:
            raise SchemaMismatch(i, "non-increasing timestamp")
        prev_ts = sample.timestamp
        if needs_codes and sample.qualityCodes is None:
            raise SchemaMismatch(i, "quality codes required but missing")
        if not needs_codes and sample.qualityCodes is not None:
            raise SchemaMismatch(i, "quality codes present but no variable carries them")
        if not all(math.isfinite(v) for v in sample.values) or not math.isfinite(sample.target):
            raise SchemaMismatch(i, "non-finite value")
