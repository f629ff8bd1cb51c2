"""Inputs object, INI config and command-line parsing, and option merging."""

import argparse
import configparser
import json
import logging
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .constants import (
    DEFAULT_COMPONENTS_DIR,
    DEFAULT_DATA_COMPONENT,
    DEFAULT_LOG_LEVEL,
    DEFAULT_OUTPUT_DIRECTORY,
    DEFAULT_SECTION,
    DEFAULT_SOLVER_COMPONENT,
    DEFAULT_WORKFLOW_TITLE,
    PROGRAM_NAME,
)
from .errors import (
    CliError,
    ConflictingDataFlags,
    DuplicateKey,
    MalformedIni,
    MalformedJson,
    MissingFlagValue,
    NestedValue,
    UnknownFlag,
)
from .model import InputsObject

logger = logging.getLogger(__name__)


class ComponentSelector(str, Enum):
    MATH_DATA = "math-data"
    MATH_SOLVER = "math-solver"
    UNSET = ""


class Config(BaseModel):
    """Effective option set of one run."""

    model_config = ConfigDict(frozen=True)

    workflow_title: str = DEFAULT_WORKFLOW_TITLE
    input_path: Optional[Path] = None
    output_directory: Path = Path(DEFAULT_OUTPUT_DIRECTORY)
    component_selector: ComponentSelector = ComponentSelector.UNSET
    display_html: bool = False
    display_pdf: bool = False
    inputmarkdown: Optional[Tuple[Path, Path]] = None
    get_data: Optional[Path] = None
    get_url_data: Optional[str] = None
    pdf_converter: Optional[str] = None
    components_dir: Path = Path(DEFAULT_COMPONENTS_DIR)
    solver_component: str = DEFAULT_SOLVER_COMPONENT
    data_component: str = DEFAULT_DATA_COMPONENT
    workflow_path: Optional[Path] = None
    registry_path: Optional[Path] = None
    render_graph: str = ""
    log_level: str = DEFAULT_LOG_LEVEL
    user_sections: Dict[str, Dict[str, str]] = Field(default_factory=dict)

    @field_validator("output_directory")
    @classmethod
    def _output_directory_non_empty(cls, value: Path) -> Path:
        if not str(value) or str(value) == ".":
            # Path("") collapses to "."
            raise ValueError("output_directory must be non-empty")
        return value


class CliOptions(BaseModel):
    """Flags given on the command line; None means "not given"."""

    model_config = ConfigDict(frozen=True)

    help: bool = False
    config_path: Optional[Path] = None
    workflow_title: Optional[str] = None
    input_path: Optional[Path] = None
    output_directory: Optional[Path] = None
    component_selector: Optional[ComponentSelector] = None
    display_html: Optional[bool] = None
    display_pdf: Optional[bool] = None
    inputmarkdown: Optional[Tuple[Path, Path]] = None
    get_data: Optional[Path] = None
    get_url_data: Optional[str] = None
    # Header flags; accepted, select nothing
    component: bool = False
    data: bool = False
    display: bool = False


# [default] key -> Config field
_CONFIG_KEYS = {
    "workflow_title": "workflow_title",
    "input": "input_path",
    "output_directory": "output_directory",
    "component": "component_selector",
    "display_html": "display_html",
    "display_pdf": "display_pdf",
    "inputmarkdown": "inputmarkdown",
    "get_data": "get_data",
    "get_url_data": "get_url_data",
    "pdf_converter": "pdf_converter",
    "components_dir": "components_dir",
    "solver_component": "solver_component",
    "data_component": "data_component",
    "workflow": "workflow_path",
    "registry": "registry_path",
    "render_graph": "render_graph",
    "log_level": "log_level",
}
_BOOL_FIELDS = {"display_html", "display_pdf"}
# Empty value means "unset" for these
_OPTIONAL_FIELDS = {
    "input_path",
    "inputmarkdown",
    "get_data",
    "get_url_data",
    "pdf_converter",
    "workflow_path",
    "registry_path",
}

_TRUE = {"true", "1"}
_FALSE = {"false", "0", ""}


def parse_bool(value: str) -> bool:
    """Booleans are true/false/1/0 in any case; the empty string is false."""
    lowered = value.strip().lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE:
        return False
    raise ValueError(f"not a boolean: '{value}'")


def parse_markdown_paths(value: str) -> Tuple[Path, Path]:
    """Split ``<in>:<out>``; both halves are required."""
    source, sep, target = value.rpartition(":")
    if not sep or not source or not target:
        raise ValueError(f"expected <input.md>:<output>, got '{value}'")
    source_path, target_path = Path(source), Path(target)
    for path in (source_path, target_path):
        if not path.is_absolute():
            logger.warning("--inputmarkdown path '%s' is not absolute", path)
    return source_path, target_path


def _decode(text: Union[bytes, str], error_cls):
    if isinstance(text, str):
        return text
    try:
        return text.decode("utf-8")
    except UnicodeDecodeError as e:
        raise error_cls(f"not valid UTF-8 ({e.reason})") from e


def parse_inputs(text: Union[bytes, str]) -> InputsObject:
    """Read a flat JSON inputs object."""
    source = _decode(text, MalformedJson)
    try:
        data = json.loads(source)
    except json.JSONDecodeError as e:
        raise MalformedJson(e.msg, e.lineno, e.colno) from e
    if not isinstance(data, dict):
        raise MalformedJson("inputs object must be a JSON object")
    for key, value in data.items():
        if isinstance(value, (dict, list)):
            raise NestedValue(key)
        if value is None:
            raise MalformedJson(f"value of '{key}' is null; expected number, string or boolean")
        if not key:
            raise MalformedJson("parameter names must be non-empty strings")
    return InputsObject(entries=data)


def _reject_continuations(source: str) -> None:
    for lineno, line in enumerate(source.splitlines(), start=1):
        if line[:1] in (" ", "\t") and line.strip() and line.strip()[0] not in "#;":
            raise MalformedIni("indented lines are not supported (no line continuations)", lineno)


def _field_value(field: str, raw: str):
    if field in _BOOL_FIELDS:
        return parse_bool(raw)
    if field in _OPTIONAL_FIELDS and raw == "":
        return None
    if field == "component_selector":
        return ComponentSelector(raw.strip().lower())
    if field == "inputmarkdown":
        return parse_markdown_paths(raw)
    return raw


def parse_config(text: Union[bytes, str]) -> Config:
    """Read the INI dialect: [default] keys populate Config, the rest is kept verbatim."""
    source = _decode(text, MalformedIni)
    _reject_continuations(source)

    parser = configparser.ConfigParser(
        delimiters=("=",),
        interpolation=None,
        strict=True,
        comment_prefixes=("#", ";"),
        inline_comment_prefixes=None,
        empty_lines_in_values=False,
        default_section="\x00defaults",
    )
    parser.optionxform = str  # case-sensitive keys
    try:
        parser.read_string(source)
    except configparser.DuplicateOptionError as e:
        raise DuplicateKey(e.section, e.option, e.lineno or 0) from e
    except configparser.DuplicateSectionError as e:
        raise MalformedIni(f"duplicate section [{e.section}]", e.lineno or 0) from e
    except configparser.MissingSectionHeaderError as e:
        raise MalformedIni("key outside of any [section]", e.lineno) from e
    except configparser.ParsingError as e:
        lineno = e.errors[0][0] if e.errors else 0
        raise MalformedIni("expected 'key = value'", lineno) from e

    values = {}
    user_sections: Dict[str, Dict[str, str]] = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            if section == DEFAULT_SECTION and key in _CONFIG_KEYS:
                field = _CONFIG_KEYS[key]
                try:
                    value = _field_value(field, raw)
                except ValueError as e:
                    raise MalformedIni(f"[{section}] {key}: {e}") from e
                if value is not None:
                    values[field] = value
            else:
                user_sections.setdefault(section, {})[key] = raw

    try:
        config = Config(**values, user_sections=user_sections)
    except ValidationError as e:
        raise MalformedIni(str(e)) from e
    _check_data_source(config)
    return config


def config_to_ini(config: Config) -> str:
    """Serialize a Config in the dialect parse_config reads."""
    lines = [f"[{DEFAULT_SECTION}]"]
    defaults = Config()
    for key, field in _CONFIG_KEYS.items():
        value = getattr(config, field)
        if value is None:
            continue
        if field in _BOOL_FIELDS:
            text = "true" if value else "false"
        elif field == "component_selector":
            text = value.value
        elif field == "inputmarkdown":
            text = f"{value[0]}:{value[1]}"
        else:
            text = str(value)
        if field not in _BOOL_FIELDS and value == getattr(defaults, field) and text == "":
            continue
        lines.append(f"{key} = {text}")
    for key, raw in config.user_sections.get(DEFAULT_SECTION, {}).items():
        lines.append(f"{key} = {raw}")
    for section, entries in config.user_sections.items():
        if section == DEFAULT_SECTION:
            continue
        lines.append("")
        lines.append(f"[{section}]")
        lines.extend(f"{key} = {raw}" for key, raw in entries.items())
    return "\n".join(lines) + "\n"


def _check_data_source(config: Config) -> None:
    if config.get_data is not None and config.get_url_data is not None:
        raise ConflictingDataFlags()


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting."""

    def error(self, message: str):
        raise CliError(message)


def _bool_arg(value: str) -> bool:
    try:
        return parse_bool(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def _markdown_arg(value: str) -> Tuple[Path, Path]:
    try:
        return parse_markdown_paths(value)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog=PROGRAM_NAME,
        add_help=False,
        allow_abbrev=False,
        description=(
            "Compose, execute and document CSE workflows whose components are "
            "abstract objects with redundant realizations (description, solver, data)."
        ),
    )
    parser.add_argument("--help", action="store_true", help="show this help message and exit")
    parser.add_argument("--workflow-title", dest="workflow_title", metavar="TITLE",
                        help="working title of the workflow")
    parser.add_argument("--input", dest="input_path", type=Path, metavar="PATH",
                        help="inputs object file (.json) with the numerical parameters")
    parser.add_argument("--output-directory", dest="output_directory", type=Path,
                        metavar="PATH", help="output directory (default: Output)")
    parser.add_argument("--config", dest="config_path", type=Path, metavar="PATH",
                        help="configuration file (.ini)")

    component = parser.add_argument_group("component", "choose the workflow component to run")
    component.add_argument("--component", action="store_true",
                           help="component group header; combine with a selector below")
    selector = component.add_mutually_exclusive_group()
    selector.add_argument("--math-data", dest="component_selector", action="store_const",
                          const=ComponentSelector.MATH_DATA,
                          help="execute the data (surrogate) component")
    selector.add_argument("--math-solver", dest="component_selector", action="store_const",
                          const=ComponentSelector.MATH_SOLVER,
                          help="execute the numerical model component")

    display = parser.add_argument_group("display", "render the markdown description")
    display.add_argument("--display", action="store_true",
                         help="display group header")
    display.add_argument("--display_html", type=_bool_arg, metavar="BOOL",
                         help="convert the description to HTML (empty string parses false)")
    display.add_argument("--display_pdf", type=_bool_arg, metavar="BOOL",
                         help="convert the description to PDF via pdf_converter")
    display.add_argument("--inputmarkdown", type=_markdown_arg, metavar="IN:OUT",
                         help="absolute input .md path and output path, colon-separated")

    data = parser.add_argument_group("data", "furnish a lookup table or data source")
    data.add_argument("--data", action="store_true", help="data group header")
    data.add_argument("--get-data", dest="get_data", type=Path, metavar="PATH",
                      help="lookup table file (CSV, two columns)")
    data.add_argument("--get-url-data", dest="get_url_data", metavar="URL",
                      help="lookup table URL (http, https or file)")
    return parser


def format_help() -> str:
    return build_parser().format_help()


def format_usage() -> str:
    return build_parser().format_usage()


def _flag_of(message: str) -> str:
    # argparse messages look like "argument --input: expected one argument"
    head = message.split(":", 1)[0]
    return head.replace("argument ", "").split("/")[0].strip()


def parse_cli(args: List[str]) -> CliOptions:
    """Parse flags (program name excluded). --help short-circuits everything else."""
    if "--help" in args:
        return CliOptions(help=True)
    parser = build_parser()
    try:
        namespace, unknown = parser.parse_known_args(args)
    except CliError as e:
        message = str(e)
        if "expected one argument" in message:
            raise MissingFlagValue(_flag_of(message)) from e
        raise
    if unknown:
        raise UnknownFlag(unknown[0])
    fields = {k: v for k, v in vars(namespace).items() if v is not None}
    return CliOptions(**fields)


def merge_options(cli: CliOptions, cfg: Config) -> Config:
    """CLI values override config values field by field."""
    overrides = {
        field: getattr(cli, field)
        for field in (
            "workflow_title",
            "input_path",
            "output_directory",
            "component_selector",
            "display_html",
            "display_pdf",
            "inputmarkdown",
            "get_data",
            "get_url_data",
        )
        if getattr(cli, field) is not None
    }
    try:
        merged = Config(**{**cfg.model_dump(), **overrides})
    except ValidationError as e:
        raise CliError(str(e)) from e
    _check_data_source(merged)
    return merged
