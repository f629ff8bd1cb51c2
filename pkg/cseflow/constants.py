# Semantic port types (closed registry)
SCALAR = "scalar"
INTEGER = "integer"
BOOLEAN = "boolean"
STRING = "string"
SCALAR_FIELD_2D = "scalar-field-2d"
TIME_SERIES = "time-series"
TABLE = "table"

SEMANTIC_TYPES = frozenset(
    {SCALAR, INTEGER, BOOLEAN, STRING, SCALAR_FIELD_2D, TIME_SERIES, TABLE}
)

# Artifact file extension per semantic type
ARTIFACT_EXTENSIONS = {
    SCALAR: "txt",
    INTEGER: "txt",
    BOOLEAN: "txt",
    STRING: "txt",
    SCALAR_FIELD_2D: "csv",
    TIME_SERIES: "csv",
    TABLE: "csv",
}

# Realization kinds as spelled in component.json
DESCRIPTION = "description"
SOLVER = "solver"
DATA_TABLE = "table"
URL_SOURCE = "url"

# Config defaults
DEFAULT_WORKFLOW_TITLE = "This is a CSE workflow description under MaRDIFlow"
DEFAULT_OUTPUT_DIRECTORY = "Output"
DEFAULT_COMPONENTS_DIR = "components"
DEFAULT_SOLVER_COMPONENT = "cahn-hilliard"
DEFAULT_DATA_COMPONENT = "data"
TIME_AVERAGE_COMPONENT = "time-average"
DEFAULT_LOG_LEVEL = "WARNING"
DEFAULT_SECTION = "default"

# Output tree
ARTIFACTS_DIR = "artifacts"
DESCRIPTION_DIR = "description"
RUN_RECORD_FILE = "run_record.json"
FAIR_METADATA_FILE = "fair_metadata.json"
WORKFLOW_GRAPH_FILE = "workflow.dot"
MANIFEST_FILE = "component.json"

# Data sources
URL_SCHEMES = ("http", "https", "file")
HTTP_TIMEOUT = 30
MAX_REDIRECTS = 5

# Float formatting that round-trips IEEE-754 doubles
FLOAT_FORMAT = "%.17g"

PROGRAM_NAME = "mardiflow-like"

TOOL_VERSION = "0.1.0"
REGISTRY_FILE = "registry.jsonl"
