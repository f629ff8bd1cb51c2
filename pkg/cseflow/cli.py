"""Command-line entry point: parse, merge, dispatch, map errors to exit codes."""

import logging
import sys
from pathlib import Path
from typing import List, Mapping, Optional

from .config import (
    ComponentSelector,
    Config,
    format_help,
    format_usage,
    merge_options,
    parse_cli,
    parse_config,
    parse_inputs,
)
from .constants import (
    DEFAULT_WORKFLOW_TITLE,
    DESCRIPTION_DIR,
    PROGRAM_NAME,
    RUN_RECORD_FILE,
    TIME_AVERAGE_COMPONENT,
    WORKFLOW_GRAPH_FILE,
)
from .description import MarkdownDoc, write_description
from .engine import PlanStage, StageResult, WorkflowPlan, compose, execute
from .errors import (
    CliError,
    CompositionError,
    ConfigError,
    ConverterFailed,
    FetchError,
    FlowError,
    IoFailure,
    NoConverterConfigured,
    UnknownComponent,
)
from .model import (
    AbstractionLevel,
    Binding,
    ComponentManifest,
    InputsObject,
    Realization,
    RealizationKind,
    StageRef,
    WorkflowDefinition,
    load_registry,
    load_workflow,
    validate_manifest,
)
from .provenance import RunStatus, append_registry, canonical_digest
from .utils import render_to_file

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_WORKFLOW_FAILED = 1
EXIT_USAGE = 2
EXIT_ENVIRONMENT = 3

_SHIPPED_COMPONENTS = Path(__file__).resolve().parent.parent / "components"
_HANDLER_TAG = "_cseflow_cli"


def _err(message: str) -> None:
    print(f"{PROGRAM_NAME}: {message}", file=sys.stderr)


def configure_logging(level: str) -> None:
    """One stderr handler on the package logger, replaced on every call."""
    package_logger = logging.getLogger("cseflow")
    for handler in list(package_logger.handlers):
        if getattr(handler, _HANDLER_TAG, False):
            package_logger.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    setattr(handler, _HANDLER_TAG, True)
    package_logger.addHandler(handler)
    try:
        package_logger.setLevel(level.upper())
    except ValueError as e:
        raise ConfigError(f"invalid log_level '{level}'") from e


def load_config(path: Path) -> Config:
    try:
        data = path.read_bytes()
    except OSError as e:
        raise IoFailure(f"config not found: {path}") from e
    return parse_config(data)


def load_inputs(path: Optional[Path]) -> InputsObject:
    if path is None:
        return InputsObject()
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise IoFailure(f"cannot read inputs object {path}: {e}") from e
    return parse_inputs(data)


def components_directory(config: Config) -> Path:
    directory = Path(config.components_dir)
    if not directory.is_dir() and not directory.is_absolute() and _SHIPPED_COMPONENTS.is_dir():
        logger.info("%s not found, using shipped components in %s", directory, _SHIPPED_COMPONENTS)
        return _SHIPPED_COMPONENTS
    return directory


def _checked(registry: Mapping[str, ComponentManifest], component_id: str) -> ComponentManifest:
    if component_id not in registry:
        raise UnknownComponent(component_id)
    manifest = registry[component_id]
    report = validate_manifest(manifest)
    if not report.ok:
        raise ConfigError(f"invalid component manifest\n{report}")
    return manifest


def solver_definition(config: Config) -> WorkflowDefinition:
    return WorkflowDefinition(
        title=config.workflow_title,
        stages=[
            StageRef(
                component_id=config.solver_component,
                requested_level=AbstractionLevel.SIMULATION_MODEL,
            )
        ],
    )


def data_definition(
    config: Config, registry: Mapping[str, ComponentManifest], inputs: InputsObject
) -> WorkflowDefinition:
    """Data component at surrogate level, followed by the time average when t_e is given."""
    stages = [
        StageRef(
            component_id=config.data_component,
            requested_level=AbstractionLevel.SURROGATE_MODEL,
        )
    ]
    bindings = []
    if "t_e" in inputs and TIME_AVERAGE_COMPONENT in registry:
        stages.append(StageRef(component_id=TIME_AVERAGE_COMPONENT))
        bindings.append(
            Binding(producer_stage=0, output_port="series", consumer_stage=1, input_port="series")
        )
    return WorkflowDefinition(title=config.workflow_title, stages=stages, bindings=bindings)


def with_data_source(manifest: ComponentManifest, config: Config) -> ComponentManifest:
    """Replace the surrogate realizations by --get-data / --get-url-data, if given."""
    if config.get_data is not None:
        source = Realization(
            level=AbstractionLevel.SURROGATE_MODEL,
            kind=RealizationKind.DATA_TABLE,
            locator=str(Path(config.get_data).resolve()),
        )
    elif config.get_url_data is not None:
        source = Realization(
            level=AbstractionLevel.SURROGATE_MODEL,
            kind=RealizationKind.URL_SOURCE,
            locator=config.get_url_data,
        )
    else:
        return manifest
    kept = [r for r in manifest.realizations if r.level != AbstractionLevel.SURROGATE_MODEL]
    return manifest.model_copy(update={"realizations": kept + [source]})


def print_progress(stage: PlanStage, result: StageResult, total: int) -> None:
    outcome = "ok" if result.ok else "failed"
    print(
        f"[{stage.index + 1}/{total}] {stage.manifest.id} "
        f"(level {int(stage.realization.level)}) ... {outcome}",
        flush=True,
    )


def convert_markdown(config: Config) -> None:
    source, target = config.inputmarkdown
    doc = MarkdownDoc.from_path(source)
    if config.display_html or not config.display_pdf:
        write_description(doc, target, title=config.workflow_title)
    if config.display_pdf:
        pdf_target = target if not config.display_html else target.with_suffix(".pdf")
        write_description(
            doc, pdf_target, title=config.workflow_title, pdf=True, converter_cmd=config.pdf_converter
        )


def render_descriptions(plan: WorkflowPlan, config: Config, out_dir: Path) -> None:
    for stage in plan.stages:
        path = stage.manifest.description_path()
        if path is None or not path.is_file():
            logger.warning("%s has no description to render", stage.manifest.id)
            continue
        doc = MarkdownDoc.from_path(path)
        title = plan.title
        target_dir = out_dir / DESCRIPTION_DIR
        if config.display_html:
            write_description(doc, target_dir / f"{stage.manifest.id}.html", title=title)
        if config.display_pdf:
            write_description(
                doc, target_dir / f"{stage.manifest.id}.pdf", title=title, pdf=True,
                converter_cmd=config.pdf_converter,
            )


def run_workflow(
    config: Config,
    definition: WorkflowDefinition,
    registry: Mapping[str, ComponentManifest],
    inputs: InputsObject,
) -> int:
    for ref in definition.stages:
        _checked(registry, ref.component_id)
    plan = compose(definition, registry, inputs)
    out_dir = Path(config.output_directory)
    results, record = execute(
        plan,
        out_dir,
        progress=print_progress,
        config_digest=canonical_digest(config.model_dump(mode="json")),
    )

    if config.render_graph in ("svg", "png"):
        dot_path = out_dir / WORKFLOW_GRAPH_FILE
        try:
            render_to_file(
                dot_path.read_text(encoding="utf-8"),
                dot_path.with_suffix(f".{config.render_graph}"),
                format=config.render_graph,
            )
        except (RuntimeError, OSError) as e:
            logger.warning("Could not render workflow graph: %s", e)
    if config.registry_path is not None:
        append_registry(config.registry_path, record, out_dir / RUN_RECORD_FILE)
    if config.display_html or config.display_pdf:
        render_descriptions(plan, config, out_dir)

    if record.status is not RunStatus.COMPLETED:
        failed = results[-1]
        _err(f"stage {failed.stage_index} failed: {failed.message}")
        return EXIT_WORKFLOW_FAILED
    return EXIT_OK


def dispatch(config: Config) -> int:
    requested = False
    if config.inputmarkdown is not None:
        convert_markdown(config)
        requested = True

    data_requested = (
        config.component_selector is ComponentSelector.MATH_DATA
        or config.get_data is not None
        or config.get_url_data is not None
    )
    solver_requested = config.component_selector is ComponentSelector.MATH_SOLVER
    if not (config.workflow_path or solver_requested or data_requested):
        if requested:
            return EXIT_OK
        _err("nothing to do: choose --math-solver, --math-data, --get-data, --get-url-data or --inputmarkdown")
        print(format_usage(), file=sys.stderr, end="")
        return EXIT_USAGE

    inputs = load_inputs(config.input_path)
    registry = dict(load_registry(components_directory(config)))

    if config.workflow_path is not None:
        try:
            text = Path(config.workflow_path).read_bytes()
        except OSError as e:
            raise IoFailure(f"cannot read workflow definition {config.workflow_path}: {e}") from e
        definition = load_workflow(text)
        if config.workflow_title != DEFAULT_WORKFLOW_TITLE:
            definition = definition.model_copy(update={"title": config.workflow_title})
    elif solver_requested:
        definition = solver_definition(config)
    else:
        manifest = _checked(registry, config.data_component)
        registry[manifest.id] = with_data_source(manifest, config)
        definition = data_definition(config, registry, inputs)
    return run_workflow(config, definition, registry, inputs)


def main(args: Optional[List[str]] = None) -> int:
    """Run the tool; returns the process exit status."""
    args = sys.argv[1:] if args is None else list(args)
    try:
        cli = parse_cli(args)
    except CliError as e:
        _err(str(e))
        print(format_usage(), file=sys.stderr, end="")
        return EXIT_USAGE
    if cli.help:
        print(format_help(), end="")
        return EXIT_OK

    try:
        base = load_config(cli.config_path) if cli.config_path is not None else Config()
        config = merge_options(cli, base)
        configure_logging(config.log_level)
        return dispatch(config)
    except CompositionError as e:
        _err(f"composition failed: {e}")
        return EXIT_WORKFLOW_FAILED
    except (CliError, ConfigError, NoConverterConfigured) as e:
        _err(str(e))
        return EXIT_USAGE
    except (IoFailure, FetchError, ConverterFailed) as e:
        _err(str(e))
        return EXIT_ENVIRONMENT
    except FlowError as e:
        _err(str(e))
        return EXIT_USAGE
    except OSError as e:
        _err(str(e))
        return EXIT_ENVIRONMENT


def run() -> None:
    sys.exit(main())
