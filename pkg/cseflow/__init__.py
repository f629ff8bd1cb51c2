"""cseflow - CSE workflows of multi-level components with provenance capture."""

from .config import (
    CliOptions,
    ComponentSelector,
    Config,
    config_to_ini,
    merge_options,
    parse_cli,
    parse_config,
    parse_inputs,
)
from .constants import TOOL_VERSION
from .description import MarkdownDoc, render_markdown, render_pdf
from .engine import (
    PlanStage,
    StageResult,
    StageStatus,
    WorkflowPlan,
    compose,
    execute,
    resolve_realization,
)
from .errors import *
from .model import (
    DEFAULT_PREFERENCE,
    AbstractionLevel,
    Binding,
    ComponentManifest,
    InputsObject,
    PortSpec,
    Realization,
    RealizationKind,
    StageRef,
    ValidationReport,
    WorkflowDefinition,
    load_manifest,
    load_registry,
    load_workflow,
    parse_manifest,
    ports_compatible,
    validate_manifest,
)
from .provenance import (
    RunRecord,
    RunStatus,
    export_fair_metadata,
    hash_artifact,
    record_run,
)
from .renderer import plan_to_dot
from .stage import StageContext, StageOutcome

__version__ = TOOL_VERSION
__all__ = [
    # Domain types
    "AbstractionLevel",
    "PortSpec",
    "Realization",
    "RealizationKind",
    "ComponentManifest",
    "ValidationReport",
    "StageRef",
    "Binding",
    "WorkflowDefinition",
    "InputsObject",
    "DEFAULT_PREFERENCE",
    "validate_manifest",
    "ports_compatible",
    "parse_manifest",
    "load_manifest",
    "load_registry",
    "load_workflow",
    # Configuration
    "Config",
    "CliOptions",
    "ComponentSelector",
    "parse_inputs",
    "parse_config",
    "config_to_ini",
    "parse_cli",
    "merge_options",
    # Engine
    "WorkflowPlan",
    "PlanStage",
    "StageResult",
    "StageStatus",
    "StageContext",
    "StageOutcome",
    "compose",
    "resolve_realization",
    "execute",
    "plan_to_dot",
    # Provenance
    "RunRecord",
    "RunStatus",
    "hash_artifact",
    "record_run",
    "export_fair_metadata",
    # Description
    "MarkdownDoc",
    "render_markdown",
    "render_pdf",
]
