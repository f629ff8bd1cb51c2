"""Exception hierarchy shared by every cseflow module."""

from typing import Optional


class FlowError(Exception):
    """Base class for all cseflow errors."""


# config-io


class ConfigError(FlowError, ValueError):
    """Raised when an inputs object or config file cannot be used."""


class MalformedJson(ConfigError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(f"{where}{message}")


class NestedValue(ConfigError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"value of '{key}' must be a scalar, not an object or array")


class MalformedIni(ConfigError):
    def __init__(self, message: str, line: int = 0):
        self.line = line
        where = f"line {line}: " if line else ""
        super().__init__(f"{where}{message}")


class DuplicateKey(ConfigError):
    def __init__(self, section: str, key: str, line: int = 0):
        self.section = section
        self.key = key
        self.line = line
        super().__init__(f"line {line}: duplicate key '{key}' in section [{section}]")


class ConflictingDataFlags(ConfigError):
    def __init__(self):
        super().__init__("get_data and get_url_data cannot both be set")


class CliError(FlowError, ValueError):
    """Raised for command-line usage errors."""


class UnknownFlag(CliError):
    def __init__(self, flag: str):
        self.flag = flag
        super().__init__(f"unrecognized flag: {flag}")


class MissingFlagValue(CliError):
    def __init__(self, flag: str):
        self.flag = flag
        super().__init__(f"flag {flag} expects a value")


# engine


class CompositionError(FlowError, ValueError):
    """Raised when a workflow definition cannot be turned into a plan."""


class UnknownComponent(CompositionError):
    def __init__(self, component_id: str):
        self.component_id = component_id
        super().__init__(f"component '{component_id}' is not in the registry")


class UnknownPort(CompositionError):
    pass


class DuplicateBinding(CompositionError):
    pass


class IncompatiblePorts(CompositionError):
    def __init__(self, binding: str, reason: str = ""):
        self.binding = binding
        suffix = f" ({reason})" if reason else ""
        super().__init__(f"incompatible ports in binding {binding}{suffix}")


class CyclicBindings(CompositionError):
    pass


class UnboundRequiredInput(CompositionError):
    def __init__(self, stage: int, port: str):
        self.stage = stage
        self.port = port
        super().__init__(
            f"stage {stage}: required input '{port}' is neither bound nor in the inputs object"
        )


class NoExecutableRealization(CompositionError):
    def __init__(self, component_id: str, detail: str = ""):
        self.component_id = component_id
        suffix = f": {detail}" if detail else ""
        super().__init__(f"component '{component_id}' has no usable realization{suffix}")


class IoFailure(FlowError, OSError):
    """Raised when the output tree cannot be created or written."""


# cahn-hilliard


class InvalidParams(FlowError, ValueError):
    pass


class DomainError(FlowError, ValueError):
    pass


class FieldOutOfRange(FlowError, ArithmeticError):
    def __init__(self, message: str, step: Optional[int] = None):
        self.step = step
        where = f"step {step}: " if step is not None else ""
        super().__init__(f"{where}{message}")


# data


class DataError(FlowError, ValueError):
    """Raised when tabular or time-series data is unusable."""


class MalformedCsv(DataError):
    def __init__(self, message: str, line: int = 0):
        self.line = line
        where = f"line {line}: " if line else ""
        super().__init__(f"{where}{message}")


class NonMonotonicX(DataError):
    pass


class TooFewRows(DataError):
    pass


class OutOfRange(DataError):
    pass


class CoverageError(DataError):
    pass


class FetchError(FlowError, OSError):
    """Raised when a data source cannot be retrieved."""


class UnsupportedScheme(FetchError):
    def __init__(self, scheme: str):
        self.scheme = scheme
        super().__init__(f"unsupported URL scheme '{scheme}' (use http, https or file)")


class TransportFailure(FetchError):
    pass


class HttpStatus(FetchError):
    def __init__(self, code: int, url: str = ""):
        self.code = code
        self.url = url
        super().__init__(f"HTTP {code} for {url}" if url else f"HTTP {code}")


# description


class NoConverterConfigured(FlowError, ValueError):
    def __init__(self):
        super().__init__("PDF output requested but no pdf_converter is configured")


class ConverterFailed(FlowError, RuntimeError):
    def __init__(self, exit_code: int, stderr: str = ""):
        self.exit_code = exit_code
        self.stderr = stderr
        detail = f": {stderr.strip()}" if stderr.strip() else ""
        super().__init__(f"PDF converter exited with status {exit_code}{detail}")
