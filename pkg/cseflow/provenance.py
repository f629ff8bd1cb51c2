"""Run records, artifact digests and FAIR metadata export."""

import hashlib
import json
import logging
import uuid
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Annotated, Any, Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, StringConstraints

from .constants import (
    ARTIFACTS_DIR,
    FAIR_METADATA_FILE,
    PROGRAM_NAME,
    RUN_RECORD_FILE,
    TOOL_VERSION,
)
from .errors import IoFailure
from .model import PortSpec, ScalarValue

if TYPE_CHECKING:
    from .engine import StageResult, WorkflowPlan

logger = logging.getLogger(__name__)

Digest = Annotated[str, StringConstraints(pattern=r"^[0-9a-f]{64}$")]


def hash_artifact(data: bytes) -> str:
    """SHA-256 hex digest of the exact bytes."""
    return hashlib.sha256(data).hexdigest()


def hash_file(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def canonical_json(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode(
        "utf-8"
    )


def canonical_digest(obj: Any) -> str:
    """Digest of the sorted-key compact JSON form of ``obj``."""
    return hash_artifact(canonical_json(obj))


class RunStatus(str, Enum):
    COMPLETED = "Completed"
    FAILED = "Failed"


class ArtifactRef(BaseModel):
    model_config = ConfigDict(frozen=True)

    path: str = Field(..., description="Path relative to the output directory.")
    digest: Digest


class StageRecord(BaseModel):
    """Provenance of one executed stage."""

    model_config = ConfigDict(frozen=True)

    index: int
    component_id: str
    version: str
    level: int
    kind: str
    locator: str
    status: str
    message: str = ""
    inputs: List[PortSpec] = Field(default_factory=list)
    outputs_spec: List[PortSpec] = Field(default_factory=list)
    parameters: Dict[str, ScalarValue] = Field(default_factory=dict)
    outputs: Dict[str, ArtifactRef] = Field(default_factory=dict)
    artifacts: Dict[str, Digest] = Field(default_factory=dict)
    sources: Dict[str, Digest] = Field(default_factory=dict)


class RunRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    run_id: str
    tool_version: str = TOOL_VERSION
    workflow_title: str
    started: str
    finished: str
    input_digest: Digest
    config_digest: Digest
    status: RunStatus
    stages: List[StageRecord] = Field(default_factory=list)

    def artifact_digests(self) -> List[str]:
        """All artifact digests in execution order."""
        return [d for stage in self.stages for _, d in sorted(stage.artifacts.items())]


def utc_timestamp(moment: Optional[datetime] = None) -> str:
    moment = moment or datetime.now(timezone.utc)
    return moment.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def _relative(path: Path, out_dir: Path) -> str:
    try:
        return path.resolve().relative_to(out_dir.resolve()).as_posix()
    except ValueError:
        return path.as_posix()


def record_run(
    plan: "WorkflowPlan",
    results: List["StageResult"],
    started: datetime,
    finished: datetime,
    out_dir: Union[str, Path],
    config_digest: Optional[str] = None,
    run_id: Optional[str] = None,
) -> RunRecord:
    """Build the RunRecord of one execution; Completed iff every stage is Ok."""
    out_dir = Path(out_dir)
    by_index = {stage.index: stage for stage in plan.stages}
    stages = []
    for result in results:
        plan_stage = by_index[result.stage_index]
        manifest = plan_stage.manifest
        outputs = {}
        for port, path in sorted(result.outputs.items()):
            rel = _relative(Path(path), out_dir)
            digest = result.artifacts.get(rel)
            if digest is None:
                digest = hash_file(path)
            outputs[port] = ArtifactRef(path=rel, digest=digest)
        stages.append(
            StageRecord(
                index=result.stage_index,
                component_id=manifest.id,
                version=manifest.version,
                level=int(plan_stage.realization.level),
                kind=plan_stage.realization.kind.value,
                locator=plan_stage.locator,
                status=result.status.value,
                message=result.message,
                inputs=manifest.inputs,
                outputs_spec=manifest.outputs,
                parameters=result.parameters,
                outputs=outputs,
                artifacts=result.artifacts,
                sources=result.sources,
            )
        )

    ok = len(results) == len(plan.stages) and all(r.ok for r in results)
    return RunRecord(
        run_id=run_id or str(uuid.uuid4()),
        workflow_title=plan.title,
        started=utc_timestamp(started),
        finished=utc_timestamp(finished),
        input_digest=canonical_digest(plan.inputs.entries),
        config_digest=config_digest or canonical_digest({}),
        status=RunStatus.COMPLETED if ok else RunStatus.FAILED,
        stages=stages,
    )


def _pretty(data: Any) -> bytes:
    return (json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def record_to_json(rec: RunRecord) -> bytes:
    return _pretty(rec.model_dump(mode="json", by_alias=True))


def load_run_record(data: Union[bytes, str]) -> RunRecord:
    return RunRecord.model_validate_json(data)


def _ports(ports: List[PortSpec]) -> List[Dict[str, Any]]:
    return [
        {k: v for k, v in p.model_dump(mode="json", by_alias=True).items() if v is not None}
        for p in ports
    ]


def export_fair_metadata(rec: RunRecord) -> bytes:
    """FAIR-oriented view of a run record; byte-identical for equal records."""
    stages = []
    for stage in rec.stages:
        stages.append(
            {
                "component": {
                    "identifier": f"{stage.component_id}@{stage.version}",
                    "id": stage.component_id,
                    "version": stage.version,
                },
                "realization": {
                    "level": stage.level,
                    "kind": stage.kind,
                    "locator": stage.locator,
                },
                "status": stage.status,
                "interfaces": {
                    "inputs": _ports(stage.inputs),
                    "outputs": _ports(stage.outputs_spec),
                },
                "parameters": dict(stage.parameters),
                "distributions": [
                    {"port": port, "path": ref.path, "checksum": {"sha256": ref.digest}}
                    for port, ref in sorted(stage.outputs.items())
                ],
                "checksums": {path: {"sha256": d} for path, d in sorted(stage.artifacts.items())},
                "sources": {url: {"sha256": d} for url, d in sorted(stage.sources.items())},
            }
        )
    document = {
        "identifier": f"urn:uuid:{rec.run_id}",
        "title": rec.workflow_title,
        "status": rec.status.value,
        "created": rec.started,
        "modified": rec.finished,
        "software": {"name": PROGRAM_NAME, "version": rec.tool_version},
        "access": {"run_record": RUN_RECORD_FILE, "artifacts": f"{ARTIFACTS_DIR}/"},
        "provenance": {
            "input_digest": {"sha256": rec.input_digest},
            "config_digest": {"sha256": rec.config_digest},
        },
        "stages": stages,
    }
    return _pretty(document)


def _write(path: Path, data: bytes) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e
    return path


def write_run_record(out_dir: Union[str, Path], rec: RunRecord) -> Path:
    return _write(Path(out_dir) / RUN_RECORD_FILE, record_to_json(rec))


def write_fair_metadata(out_dir: Union[str, Path], rec: RunRecord) -> Path:
    return _write(Path(out_dir) / FAIR_METADATA_FILE, export_fair_metadata(rec))


def append_registry(
    registry_path: Union[str, Path], rec: RunRecord, record_path: Union[str, Path]
) -> None:
    """Append one line describing ``rec`` to an append-only JSONL index."""
    registry_path = Path(registry_path)
    record_path = Path(record_path)
    entry = {
        "run_id": rec.run_id,
        "workflow_title": rec.workflow_title,
        "status": rec.status.value,
        "started": rec.started,
        "finished": rec.finished,
        "record": str(record_path.resolve()),
        "record_digest": hash_file(record_path),
    }
    try:
        registry_path.parent.mkdir(parents=True, exist_ok=True)
        with open(registry_path, "ab") as f:
            f.write(canonical_json(entry) + b"\n")
    except OSError as e:
        raise IoFailure(f"cannot append to registry {registry_path}: {e}") from e
    logger.info("Registered run %s in %s", rec.run_id, registry_path)
