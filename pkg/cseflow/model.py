"""Core domain types: ports, abstraction levels, realizations, manifests, workflows."""

import json
import logging
import re
from enum import Enum, IntEnum
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    StrictBool,
    StrictFloat,
    StrictInt,
    StrictStr,
    ValidationError,
    field_validator,
)

from .constants import (
    DATA_TABLE,
    DEFAULT_WORKFLOW_TITLE,
    DESCRIPTION,
    MANIFEST_FILE,
    SEMANTIC_TYPES,
    SOLVER,
    URL_SOURCE,
)
from .errors import MalformedJson

logger = logging.getLogger(__name__)

_IDENTIFIER_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_.\-]*$")
_SEMVER_RE = re.compile(
    r"^(0|[1-9]\d*)\.(0|[1-9]\d*)\.(0|[1-9]\d*)"
    r"(?:-[0-9A-Za-z.\-]+)?(?:\+[0-9A-Za-z.\-]+)?$"
)
_DIGEST_RE = re.compile(r"^[0-9a-f]{64}$")

ScalarValue = Union[StrictBool, StrictInt, StrictFloat, StrictStr]


class AbstractionLevel(IntEnum):
    """The three redundant ways a component can be realized."""

    MATHEMATICAL_MODEL = 1
    SIMULATION_MODEL = 2
    SURROGATE_MODEL = 3


class RealizationKind(str, Enum):
    DESCRIPTION = DESCRIPTION
    SOLVER_EXECUTABLE = SOLVER
    DATA_TABLE = DATA_TABLE
    URL_SOURCE = URL_SOURCE


# Level each realization kind must sit on
LEVEL_OF_KIND: Dict[RealizationKind, AbstractionLevel] = {
    RealizationKind.DESCRIPTION: AbstractionLevel.MATHEMATICAL_MODEL,
    RealizationKind.SOLVER_EXECUTABLE: AbstractionLevel.SIMULATION_MODEL,
    RealizationKind.DATA_TABLE: AbstractionLevel.SURROGATE_MODEL,
    RealizationKind.URL_SOURCE: AbstractionLevel.SURROGATE_MODEL,
}

DEFAULT_PREFERENCE: Tuple[AbstractionLevel, ...] = (
    AbstractionLevel.SIMULATION_MODEL,
    AbstractionLevel.SURROGATE_MODEL,
)


class PortSpec(BaseModel):
    """One named input or output of a component."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    name: str = Field(..., description="Port identifier, unique per direction.")
    semantic_type: str = Field(
        ..., alias="type", description="Tag from the closed semantic type registry."
    )
    unit: str = Field("", description="Physical unit; empty means dimensionless.")
    shape: Optional[List[int]] = Field(None, description="Optional array shape.")
    required: bool = Field(
        True, description="Whether compose insists on a binding or input value."
    )


class Realization(BaseModel):
    """A level-tagged way of satisfying a component's I/O contract."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    level: AbstractionLevel
    kind: RealizationKind
    locator: str = Field(..., description="Path, URL or module:function entry point.")
    checksum: Optional[str] = Field(None, description="SHA-256 hex digest of the source.")
    argument: Optional[str] = Field(
        None, description="Input parameter used as abscissa by table surrogates."
    )

    @property
    def executable(self) -> bool:
        return self.kind is not RealizationKind.DESCRIPTION


class ComponentManifest(BaseModel):
    """Metadata, I/O ports and realizations of one workflow component."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    id: str
    version: str
    title: str = ""
    inputs: List[PortSpec] = Field(default_factory=list)
    outputs: List[PortSpec] = Field(default_factory=list)
    realizations: List[Realization] = Field(default_factory=list)
    description_ref: Optional[str] = Field(None, alias="description")
    source_dir: Optional[Path] = Field(
        None, exclude=True, description="Directory the manifest was loaded from."
    )

    def input_port(self, name: str) -> Optional[PortSpec]:
        return next((p for p in self.inputs if p.name == name), None)

    def output_port(self, name: str) -> Optional[PortSpec]:
        return next((p for p in self.outputs if p.name == name), None)

    def resolve_locator(self, realization: Realization) -> str:
        """Resolve file locators relative to the manifest directory."""
        if realization.kind in (RealizationKind.DATA_TABLE, RealizationKind.DESCRIPTION):
            path = Path(realization.locator)
            if not path.is_absolute() and self.source_dir is not None:
                return str(self.source_dir / path)
        return realization.locator

    def description_path(self) -> Optional[Path]:
        """Markdown description: explicit reference first, then a level-1 realization."""
        if self.description_ref:
            path = Path(self.description_ref)
            if not path.is_absolute() and self.source_dir is not None:
                path = self.source_dir / path
            return path
        for realization in self.realizations:
            if realization.kind is RealizationKind.DESCRIPTION:
                return Path(self.resolve_locator(realization))
        return None


class Finding(BaseModel):
    model_config = ConfigDict(frozen=True)

    path: str
    message: str


class ValidationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    component_id: str
    findings: List[Finding] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings

    def __str__(self) -> str:
        if self.ok:
            return f"{self.component_id}: ok"
        lines = [f"{self.component_id}: {len(self.findings)} finding(s)"]
        lines.extend(f"  {f.path}: {f.message}" for f in self.findings)
        return "\n".join(lines)


class StageRef(BaseModel):
    model_config = ConfigDict(frozen=True)

    component_id: str
    requested_level: Optional[AbstractionLevel] = None


class Binding(BaseModel):
    """Wires one producer output port to one consumer input port."""

    model_config = ConfigDict(frozen=True)

    producer_stage: int
    output_port: str
    consumer_stage: int
    input_port: str

    def __str__(self) -> str:
        return (
            f"{self.producer_stage}.{self.output_port} -> "
            f"{self.consumer_stage}.{self.input_port}"
        )


class WorkflowDefinition(BaseModel):
    model_config = ConfigDict(frozen=True)

    title: str = DEFAULT_WORKFLOW_TITLE
    stages: List[StageRef] = Field(default_factory=list)
    bindings: List[Binding] = Field(default_factory=list)


class InputsObject(BaseModel):
    """Flat parameter map read from the inputs object JSON file."""

    model_config = ConfigDict(frozen=True)

    entries: Dict[str, ScalarValue] = Field(default_factory=dict)

    @field_validator("entries")
    @classmethod
    def _keys_non_empty(cls, entries: Dict[str, ScalarValue]) -> Dict[str, ScalarValue]:
        if any(not key for key in entries):
            raise ValueError("parameter names must be non-empty strings")
        return entries

    def __contains__(self, key: str) -> bool:
        return key in self.entries

    def __getitem__(self, key: str) -> ScalarValue:
        return self.entries[key]

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, key: str, default=None):
        return self.entries.get(key, default)


def _check_ports(ports: List[PortSpec], direction: str) -> List[Finding]:
    findings = []
    seen = set()
    for i, port in enumerate(ports):
        path = f"{direction}[{i}]"
        if not port.name:
            findings.append(Finding(path=f"{path}.name", message="port name must be non-empty"))
        elif port.name in seen:
            findings.append(
                Finding(path=f"{path}.name", message=f"duplicate port '{port.name}'")
            )
        seen.add(port.name)
        if port.semantic_type not in SEMANTIC_TYPES:
            findings.append(
                Finding(
                    path=f"{path}.type",
                    message=f"unknown semantic type '{port.semantic_type}'",
                )
            )
        if port.shape is not None and any(n <= 0 for n in port.shape):
            findings.append(
                Finding(path=f"{path}.shape", message="shape entries must be positive")
            )
    return findings


def validate_manifest(manifest: ComponentManifest) -> ValidationReport:
    """Check every manifest invariant; violations become findings, never exceptions."""
    findings: List[Finding] = []

    if not _IDENTIFIER_RE.match(manifest.id):
        findings.append(Finding(path="id", message=f"invalid identifier '{manifest.id}'"))
    if not _SEMVER_RE.match(manifest.version):
        findings.append(
            Finding(path="version", message=f"'{manifest.version}' is not a semantic version")
        )

    findings.extend(_check_ports(manifest.inputs, "inputs"))
    findings.extend(_check_ports(manifest.outputs, "outputs"))

    if not manifest.realizations:
        findings.append(
            Finding(path="realizations", message="at least one realization is required")
        )
    seen = set()
    for i, realization in enumerate(manifest.realizations):
        path = f"realizations[{i}]"
        expected = LEVEL_OF_KIND[realization.kind]
        if realization.level != expected:
            findings.append(
                Finding(
                    path=path,
                    message=(
                        f"realization level/kind mismatch: kind '{realization.kind.value}' "
                        f"requires level {int(expected)}, got {int(realization.level)}"
                    ),
                )
            )
        if not realization.locator:
            findings.append(Finding(path=f"{path}.locator", message="locator must be non-empty"))
        key = (realization.level, realization.kind, realization.locator)
        if key in seen:
            findings.append(Finding(path=path, message="duplicate realization"))
        seen.add(key)
        if realization.checksum is not None and not _DIGEST_RE.match(realization.checksum):
            findings.append(
                Finding(
                    path=f"{path}.checksum",
                    message="checksum must be a lowercase SHA-256 hex digest",
                )
            )

    return ValidationReport(component_id=manifest.id, findings=findings)


def ports_compatible(out: PortSpec, in_: PortSpec) -> bool:
    """Type, unit and shape must agree; port names are irrelevant."""
    if out.semantic_type != in_.semantic_type or out.unit != in_.unit:
        return False
    if out.shape is None and in_.shape is None:
        return True
    if out.shape is None or in_.shape is None:
        return False
    return list(out.shape) == list(in_.shape)


def _load_json(text: Union[bytes, str]):
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as e:
            raise MalformedJson(f"not valid UTF-8 ({e.reason})") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedJson(e.msg, e.lineno, e.colno) from e


def parse_manifest(
    text: Union[bytes, str], source_dir: Optional[Path] = None
) -> ComponentManifest:
    """Parse a component.json document. Invariants are left to validate_manifest."""
    data = _load_json(text)
    if not isinstance(data, dict):
        raise MalformedJson("component manifest must be a JSON object")
    try:
        manifest = ComponentManifest.model_validate(data)
    except ValidationError as e:
        raise MalformedJson(f"invalid component manifest: {e}") from e
    if source_dir is not None:
        manifest = manifest.model_copy(update={"source_dir": Path(source_dir)})
    return manifest


def load_manifest(path: Union[str, Path]) -> ComponentManifest:
    path = Path(path)
    return parse_manifest(path.read_bytes(), source_dir=path.parent)


def manifest_to_json(manifest: ComponentManifest) -> str:
    data = manifest.model_dump(mode="json", by_alias=True, exclude_none=True)
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def load_registry(directory: Union[str, Path]) -> Dict[str, ComponentManifest]:
    """Load every ``<dir>/<component>/component.json`` keyed by component id."""
    registry: Dict[str, ComponentManifest] = {}
    for manifest_path in sorted(Path(directory).glob(f"*/{MANIFEST_FILE}")):
        manifest = load_manifest(manifest_path)
        if manifest.id in registry:
            logger.warning("Ignoring duplicate component id '%s' in %s", manifest.id, manifest_path)
            continue
        registry[manifest.id] = manifest
    return registry


def load_workflow(text: Union[bytes, str]) -> WorkflowDefinition:
    """Parse a workflow definition JSON document."""
    data = _load_json(text)
    if not isinstance(data, dict):
        raise MalformedJson("workflow definition must be a JSON object")
    try:
        stages = [
            StageRef(component_id=s["component"], requested_level=s.get("level"))
            for s in data.get("stages", [])
        ]
        bindings = [
            Binding(
                producer_stage=b["from"]["stage"],
                output_port=b["from"]["port"],
                consumer_stage=b["to"]["stage"],
                input_port=b["to"]["port"],
            )
            for b in data.get("bindings", [])
        ]
        return WorkflowDefinition(
            title=data.get("title", DEFAULT_WORKFLOW_TITLE), stages=stages, bindings=bindings
        )
    except (KeyError, TypeError, ValidationError) as e:
        raise MalformedJson(f"invalid workflow definition: {e}") from e
