"""Composition of workflow definitions into plans, and their sequential execution."""

import heapq
import logging
import shutil
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field

from .constants import ARTIFACTS_DIR, WORKFLOW_GRAPH_FILE
from .errors import (
    CyclicBindings,
    DuplicateBinding,
    IncompatiblePorts,
    IoFailure,
    NoExecutableRealization,
    UnboundRequiredInput,
    UnknownComponent,
    UnknownPort,
)
from .model import (
    DEFAULT_PREFERENCE,
    AbstractionLevel,
    Binding,
    ComponentManifest,
    InputsObject,
    Realization,
    RealizationKind,
    ScalarValue,
    WorkflowDefinition,
    ports_compatible,
)
from .provenance import RunRecord, hash_file, record_run, write_fair_metadata, write_run_record
from .renderer import plan_to_dot
from .stage import StageContext, StageOutcome, StageRunner, load_entry_point

logger = logging.getLogger(__name__)


class StageStatus(str, Enum):
    OK = "Ok"
    FAILED = "Failed"


class PlanStage(BaseModel):
    """One executable stage: a manifest and the realization chosen for it."""

    model_config = ConfigDict(frozen=True)

    index: int = Field(..., description="Position in execution order.")
    stage: int = Field(..., description="Index in the workflow definition.")
    manifest: ComponentManifest
    realization: Realization
    locator: str = Field(..., description="Realization locator resolved against the manifest.")


class WorkflowPlan(BaseModel):
    model_config = ConfigDict(frozen=True)

    title: str
    stages: List[PlanStage] = Field(default_factory=list)
    edges: List[Binding] = Field(default_factory=list)
    inputs: InputsObject = Field(default_factory=InputsObject)

    def stage_for(self, definition_index: int) -> PlanStage:
        return next(s for s in self.stages if s.stage == definition_index)


class StageResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    stage_index: int
    status: StageStatus
    outputs: Dict[str, Path] = Field(default_factory=dict)
    message: str = ""
    parameters: Dict[str, ScalarValue] = Field(default_factory=dict)
    artifacts: Dict[str, str] = Field(default_factory=dict)
    sources: Dict[str, str] = Field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status is StageStatus.OK


ProgressCallback = Callable[[PlanStage, StageResult, int], None]


def resolve_realization(
    manifest: ComponentManifest,
    requested: Optional[AbstractionLevel] = None,
    preference: Sequence[AbstractionLevel] = DEFAULT_PREFERENCE,
) -> Realization:
    """Pick the realization for a stage, falling back along ``preference``."""

    def at(level: AbstractionLevel) -> Optional[Realization]:
        return next((r for r in manifest.realizations if r.level == level), None)

    if requested is not None:
        hit = at(requested)
        if hit is not None:
            return hit
        if requested is AbstractionLevel.MATHEMATICAL_MODEL:
            raise NoExecutableRealization(manifest.id, "no description realization")
    for level in preference:
        if level is AbstractionLevel.MATHEMATICAL_MODEL:
            continue
        hit = at(level)
        if hit is not None:
            if requested is not None:
                logger.info(
                    "%s: level %d unavailable, falling back to level %d",
                    manifest.id,
                    int(requested),
                    int(level),
                )
            return hit
    levels = sorted({int(r.level) for r in manifest.realizations})
    raise NoExecutableRealization(manifest.id, f"available levels {levels}")


def _check_binding(
    binding: Binding, definition: WorkflowDefinition, manifests: List[ComponentManifest]
) -> None:
    n = len(definition.stages)
    for stage in (binding.producer_stage, binding.consumer_stage):
        if not 0 <= stage < n:
            raise UnknownPort(f"binding {binding} references undeclared stage {stage}")
    out = manifests[binding.producer_stage].output_port(binding.output_port)
    if out is None:
        raise UnknownPort(
            f"binding {binding}: component '{manifests[binding.producer_stage].id}' "
            f"has no output '{binding.output_port}'"
        )
    in_ = manifests[binding.consumer_stage].input_port(binding.input_port)
    if in_ is None:
        raise UnknownPort(
            f"binding {binding}: component '{manifests[binding.consumer_stage].id}' "
            f"has no input '{binding.input_port}'"
        )
    if not ports_compatible(out, in_):
        reason = (
            f"{out.semantic_type}[{out.unit}]{out.shape or ''} vs "
            f"{in_.semantic_type}[{in_.unit}]{in_.shape or ''}"
        )
        raise IncompatiblePorts(str(binding), reason)


def execution_order(n_stages: int, bindings: Sequence[Binding]) -> List[int]:
    """Stable topological order: the lowest ready definition index runs first."""
    successors: Dict[int, List[int]] = {i: [] for i in range(n_stages)}
    indegree = [0] * n_stages
    for b in bindings:
        successors[b.producer_stage].append(b.consumer_stage)
        indegree[b.consumer_stage] += 1
    ready = [i for i in range(n_stages) if indegree[i] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        i = heapq.heappop(ready)
        order.append(i)
        for j in successors[i]:
            indegree[j] -= 1
            if indegree[j] == 0:
                heapq.heappush(ready, j)
    if len(order) != n_stages:
        stuck = sorted(set(range(n_stages)) - set(order))
        raise CyclicBindings(f"bindings form a cycle through stages {stuck}")
    return order


def compose(
    definition: WorkflowDefinition,
    registry: Mapping[str, ComponentManifest],
    inputs: Optional[InputsObject] = None,
    preference: Sequence[AbstractionLevel] = DEFAULT_PREFERENCE,
) -> WorkflowPlan:
    """Validate a workflow definition against the registry and resolve every stage."""
    inputs = inputs if inputs is not None else InputsObject()

    manifests = []
    for ref in definition.stages:
        if ref.component_id not in registry:
            raise UnknownComponent(ref.component_id)
        manifests.append(registry[ref.component_id])

    bound = set()
    for binding in definition.bindings:
        _check_binding(binding, definition, manifests)
        key = (binding.consumer_stage, binding.input_port)
        if key in bound:
            raise DuplicateBinding(
                f"input '{binding.input_port}' of stage {binding.consumer_stage} is bound twice"
            )
        bound.add(key)

    order = execution_order(len(definition.stages), definition.bindings)

    for i, manifest in enumerate(manifests):
        for port in manifest.inputs:
            if port.required and (i, port.name) not in bound and port.name not in inputs:
                raise UnboundRequiredInput(i, port.name)

    stages = []
    for position, i in enumerate(order):
        manifest = manifests[i]
        realization = resolve_realization(manifest, definition.stages[i].requested_level, preference)
        logger.info(
            "stage %d: %s %s at level %d (%s)",
            position,
            manifest.id,
            manifest.version,
            int(realization.level),
            realization.kind.value,
        )
        stages.append(
            PlanStage(
                index=position,
                stage=i,
                manifest=manifest,
                realization=realization,
                locator=manifest.resolve_locator(realization),
            )
        )
    return WorkflowPlan(
        title=definition.title, stages=stages, edges=list(definition.bindings), inputs=inputs
    )


def _runner_for(plan_stage: PlanStage) -> StageRunner:
    realization = plan_stage.realization
    if realization.kind is RealizationKind.SOLVER_EXECUTABLE:
        return load_entry_point(plan_stage.locator)
    if realization.kind in (RealizationKind.DATA_TABLE, RealizationKind.URL_SOURCE):
        from .components.data import run_surrogate

        return run_surrogate
    raise NoExecutableRealization(plan_stage.manifest.id, "descriptions cannot be executed")


def _relative(path: Path, out_dir: Path) -> str:
    return path.relative_to(out_dir).as_posix()


def _stage_artifacts(artifacts_dir: Path, prefix: str, out_dir: Path) -> Dict[str, str]:
    """Digest of every file the stage wrote, keyed by path relative to out_dir."""
    digests = {}
    for entry in sorted(artifacts_dir.iterdir()):
        if not entry.name.startswith(prefix):
            continue
        files = [entry] if entry.is_file() else sorted(p for p in entry.rglob("*") if p.is_file())
        for path in files:
            digests[_relative(path, out_dir)] = hash_file(path)
    return digests


def _prepare_output_tree(out_dir: Path) -> Path:
    artifacts_dir = out_dir / ARTIFACTS_DIR
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if artifacts_dir.exists():
            # artifacts/ belongs to the latest run only
            shutil.rmtree(artifacts_dir)
        artifacts_dir.mkdir()
    except OSError as e:
        raise IoFailure(f"cannot prepare output directory {out_dir}: {e}") from e
    return artifacts_dir


def _run_stage(
    plan: WorkflowPlan, plan_stage: PlanStage, produced: Dict[int, Dict[str, Path]], out_dir: Path
) -> StageResult:
    manifest = plan_stage.manifest
    declared = {port.name for port in manifest.inputs}
    params = {k: v for k, v in plan.inputs.entries.items() if k in declared}
    upstream = {
        b.input_port: produced[b.producer_stage][b.output_port]
        for b in plan.edges
        if b.consumer_stage == plan_stage.stage
    }
    parameters = dict(params)
    parameters.update({port: _relative(path, out_dir) for port, path in upstream.items()})

    ctx = StageContext(
        index=plan_stage.index,
        manifest=manifest,
        realization=plan_stage.realization,
        locator=plan_stage.locator,
        params=params,
        upstream=upstream,
        artifacts_dir=out_dir / ARTIFACTS_DIR,
    )
    logger.info("Running stage %d (%s)", plan_stage.index, manifest.id)
    try:
        outcome = _runner_for(plan_stage)(ctx)
        if not isinstance(outcome, StageOutcome):
            raise TypeError(f"stage runner returned {type(outcome).__name__}, expected StageOutcome")
        missing = [p.name for p in manifest.outputs if p.name not in outcome.outputs]
        missing += [port for port, path in outcome.outputs.items() if not Path(path).is_file()]
        if missing:
            raise RuntimeError(f"no artifact for output port(s) {', '.join(sorted(missing))}")
    except Exception as e:  # any failure inside a stage is reported, not raised
        logger.info("Stage %d failed: %s", plan_stage.index, e)
        return StageResult(
            stage_index=plan_stage.index,
            status=StageStatus.FAILED,
            message=f"{type(e).__name__}: {e}",
            parameters=parameters,
            artifacts=_stage_artifacts(ctx.artifacts_dir, ctx.prefix, out_dir),
        )

    return StageResult(
        stage_index=plan_stage.index,
        status=StageStatus.OK,
        outputs={port: Path(path) for port, path in outcome.outputs.items()},
        message=outcome.message,
        parameters=parameters,
        artifacts=_stage_artifacts(ctx.artifacts_dir, ctx.prefix, out_dir),
        sources=dict(outcome.sources),
    )


def execute(
    plan: WorkflowPlan,
    out_dir: Union[str, Path],
    progress: Optional[ProgressCallback] = None,
    config_digest: Optional[str] = None,
) -> Tuple[List[StageResult], RunRecord]:
    """Run the plan stage by stage, stopping at the first failure.

    Writes ``artifacts/``, ``workflow.dot``, ``run_record.json`` and
    ``fair_metadata.json`` under ``out_dir``.
    """
    out_dir = Path(out_dir).resolve()
    _prepare_output_tree(out_dir)
    try:
        (out_dir / WORKFLOW_GRAPH_FILE).write_text(plan_to_dot(plan), encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"cannot write {WORKFLOW_GRAPH_FILE}: {e}") from e

    started = datetime.now(timezone.utc)
    results: List[StageResult] = []
    produced: Dict[int, Dict[str, Path]] = {}
    for plan_stage in plan.stages:
        result = _run_stage(plan, plan_stage, produced, out_dir)
        results.append(result)
        if progress is not None:
            progress(plan_stage, result, len(plan.stages))
        if not result.ok:
            break
        produced[plan_stage.stage] = dict(result.outputs)
    finished = datetime.now(timezone.utc)

    record = record_run(plan, results, started, finished, out_dir, config_digest=config_digest)
    write_run_record(out_dir, record)
    write_fair_metadata(out_dir, record)
    logger.info("Run %s finished with status %s", record.run_id, record.status.value)
    return results, record
