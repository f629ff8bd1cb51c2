"""Level-3 data surrogates (lookup tables, URL sources) and the time-average objective."""

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union
from urllib.parse import urlsplit
from urllib.request import url2pathname

import numpy as np
import requests

from ..constants import (
    BOOLEAN,
    FLOAT_FORMAT,
    HTTP_TIMEOUT,
    INTEGER,
    MAX_REDIRECTS,
    SCALAR,
    TABLE,
    TIME_SERIES,
    URL_SCHEMES,
)
from ..errors import (
    CoverageError,
    DataError,
    HttpStatus,
    InvalidParams,
    MalformedCsv,
    NonMonotonicX,
    OutOfRange,
    TooFewRows,
    TransportFailure,
    UnsupportedScheme,
)
from ..model import RealizationKind
from ..provenance import hash_artifact
from ..stage import StageContext, StageOutcome

logger = logging.getLogger(__name__)

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def _check_knots(x: np.ndarray, y: np.ndarray, what: str) -> None:
    if len(x) < 2:
        raise TooFewRows(f"{what} needs at least 2 rows, got {len(x)}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DataError(f"{what} values must be finite")
    steps = np.diff(x)
    if np.any(steps <= 0):
        i = int(np.argmax(steps <= 0))
        raise NonMonotonicX(
            f"{what} abscissae must be strictly increasing (row {i + 2}: {x[i + 1]!r} after {x[i]!r})"
        )


@dataclass(frozen=True, eq=False)
class LookupTable:
    """Knots (x, y) with strictly increasing x."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=np.float64))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=np.float64))
        _check_knots(self.x, self.y, "lookup table")

    @property
    def knots(self) -> List[Tuple[float, float]]:
        return list(zip(self.x.tolist(), self.y.tolist()))

    def to_csv(self, header: Tuple[str, str] = ("x", "y")) -> str:
        lines = [",".join(header)]
        lines.extend(f"{FLOAT_FORMAT % a},{FLOAT_FORMAT % b}" for a, b in self.knots)
        return "\n".join(lines) + "\n"


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Samples (t, X) with strictly increasing t."""

    t: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", np.asarray(self.t, dtype=np.float64))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        _check_knots(self.t, self.values, "time series")

    @classmethod
    def from_table(cls, table: LookupTable) -> "TimeSeries":
        return cls(t=table.x, values=table.y)


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def parse_table(text: Union[bytes, str]) -> LookupTable:
    """Two numeric columns, comma-separated, optional single all-text header line."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8-sig")
        except UnicodeDecodeError as e:
            raise MalformedCsv(f"not valid UTF-8 ({e.reason})") from e
    xs: List[float] = []
    ys: List[float] = []
    first = True
    for lineno, row in enumerate(csv.reader(text.splitlines()), start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        cells = [cell.strip() for cell in row]
        if len(cells) != 2:
            raise MalformedCsv(f"expected 2 columns, got {len(cells)}", lineno)
        if first and not any(_is_number(cell) for cell in cells):
            first = False
            continue
        first = False
        try:
            x, y = float(cells[0]), float(cells[1])
        except ValueError as e:
            raise MalformedCsv(f"non-numeric value in {cells}", lineno) from e
        if not (math.isfinite(x) and math.isfinite(y)):
            raise MalformedCsv(f"non-finite value in {cells}", lineno)
        xs.append(x)
        ys.append(y)
    return LookupTable(x=xs, y=ys)


def load_table(path: Union[str, Path]) -> LookupTable:
    return parse_table(Path(path).read_bytes())


def interpolate(table: LookupTable, x: float) -> float:
    """Piecewise-linear, exact at knots, no extrapolation."""
    x = float(x)
    lo, hi = table.x[0], table.x[-1]
    if not math.isfinite(x) or x < lo or x > hi:
        raise OutOfRange(f"x={x!r} outside the table range [{lo!r}, {hi!r}]")
    i = int(np.searchsorted(table.x, x))
    if i < len(table.x) and table.x[i] == x:
        return float(table.y[i])
    return float(np.interp(x, table.x, table.y))


def time_average_objective(series: TimeSeries, t_e: float) -> float:
    """(1/t_e) times the trapezoid integral of X over [0, t_e]."""
    t_e = float(t_e)
    if not t_e > 0:
        raise CoverageError(f"t_e must be positive, got {t_e!r}")
    if series.t[0] > 0 or series.t[-1] < t_e:
        raise CoverageError(
            f"series covers [{series.t[0]!r}, {series.t[-1]!r}], which does not contain [0, {t_e!r}]"
        )
    inside = series.t[(series.t > 0) & (series.t < t_e)]
    t = np.concatenate(([0.0], inside, [t_e]))
    x = np.interp(t, series.t, series.values)
    return float(_trapezoid(x, t) / t_e)


def _read_file_url(url: str) -> bytes:
    parts = urlsplit(url)
    if parts.netloc not in ("", "localhost"):
        raise TransportFailure(f"file URL with remote host '{parts.netloc}' is not supported")
    path = Path(url2pathname(parts.path))
    try:
        return path.read_bytes()
    except OSError as e:
        raise TransportFailure(f"cannot read {path}: {e}") from e


def fetch_url(url: str) -> Tuple[bytes, str]:
    """Body bytes and their SHA-256 digest."""
    scheme = urlsplit(url).scheme.lower()
    if scheme not in URL_SCHEMES:
        raise UnsupportedScheme(scheme)
    if scheme == "file":
        body = _read_file_url(url)
        return body, hash_artifact(body)

    with requests.Session() as session:
        session.max_redirects = MAX_REDIRECTS
        try:
            response = session.get(url, timeout=HTTP_TIMEOUT)
        except requests.TooManyRedirects as e:
            raise TransportFailure(f"more than {MAX_REDIRECTS} redirects for {url}") from e
        except requests.RequestException as e:
            raise TransportFailure(f"cannot fetch {url}: {e}") from e
        if response.status_code >= 400:
            raise HttpStatus(response.status_code, url)
        body = response.content
        expected = response.headers.get("Content-Length")
        # Content-Length counts encoded bytes when a Content-Encoding is present
        if expected is not None and not response.headers.get("Content-Encoding"):
            try:
                expected_length = int(expected)
            except ValueError as e:
                raise TransportFailure(
                    f"malformed Content-Length {expected!r} from {url}"
                ) from e
            if expected_length != len(body):
                raise TransportFailure(
                    f"truncated body from {url}: expected {expected} bytes, got {len(body)}"
                )
    logger.info("Fetched %d bytes from %s", len(body), url)
    return body, hash_artifact(body)


def _surrogate_argument(ctx: StageContext) -> str:
    if ctx.realization.argument:
        return ctx.realization.argument
    for port in ctx.manifest.inputs:
        if port.semantic_type == SCALAR:
            return port.name
    raise InvalidParams(
        f"component '{ctx.manifest.id}' has no scalar input to use as the table abscissa"
    )


def run_surrogate(ctx: StageContext) -> StageOutcome:
    """Serve a component's outputs from its lookup table or URL source."""
    sources = {}
    if ctx.realization.kind is RealizationKind.URL_SOURCE:
        data, digest = fetch_url(ctx.locator)
        sources[ctx.locator] = digest
    else:
        data = Path(ctx.locator).read_bytes()
        digest = hash_artifact(data)
    if ctx.realization.checksum is not None and digest != ctx.realization.checksum:
        raise DataError(
            f"checksum mismatch for {ctx.locator}: expected {ctx.realization.checksum}, got {digest}"
        )
    logger.debug("Verified source %s (%s)", ctx.locator, digest)
    table = parse_table(data)

    outputs = {}
    value: Optional[float] = None
    for port in ctx.manifest.outputs:
        path = ctx.artifact_path(port.name)
        if port.semantic_type in (TABLE, TIME_SERIES):
            path.write_text(table.to_csv(), encoding="utf-8")
        elif port.semantic_type in (SCALAR, INTEGER, BOOLEAN):
            if value is None:
                argument = _surrogate_argument(ctx)
                if argument not in ctx.params:
                    raise InvalidParams(f"surrogate argument '{argument}' is not in the inputs object")
                value = interpolate(table, ctx.params[argument])
            path.write_text(FLOAT_FORMAT % value + "\n", encoding="utf-8")
        else:
            raise DataError(
                f"a lookup table cannot provide output '{port.name}' of type {port.semantic_type}"
            )
        outputs[port.name] = path

    return StageOutcome(outputs=outputs, message=f"{len(table.x)} knots from {ctx.locator}", sources=sources)


def time_average_stage(ctx: StageContext) -> StageOutcome:
    """Engine entry point of the time-average post-processing component."""
    if "series" not in ctx.upstream:
        raise InvalidParams("input 'series' must be bound to an upstream time series")
    if "t_e" not in ctx.params:
        raise InvalidParams("input 't_e' is missing from the inputs object")
    series = TimeSeries.from_table(load_table(ctx.upstream["series"]))
    objective = time_average_objective(series, ctx.params["t_e"])
    path = ctx.artifact_path("objective")
    path.write_text(FLOAT_FORMAT % objective + "\n", encoding="utf-8")
    return StageOutcome(outputs={"objective": path}, message=f"objective {objective:.6g}")
