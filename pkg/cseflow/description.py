"""Markdown descriptions (level-1 realizations) rendered to HTML, and PDF by delegation."""

import html
import logging
import shlex
from pathlib import Path
from typing import Optional, Union

import mistune
from pydantic import BaseModel, ConfigDict, Field

from .constants import DEFAULT_WORKFLOW_TITLE
from .errors import ConfigError, ConverterFailed, IoFailure, NoConverterConfigured
from .utils import pipe_through

logger = logging.getLogger(__name__)


class MarkdownDoc(BaseModel):
    model_config = ConfigDict(frozen=True)

    source: str = Field("", description="Markdown text.")
    path: Optional[Path] = Field(None, description="File the text was read from.")

    @classmethod
    def from_path(cls, path: Union[str, Path]) -> "MarkdownDoc":
        path = Path(path)
        try:
            data = path.read_bytes()
        except OSError as e:
            raise IoFailure(f"cannot read markdown file {path}: {e}") from e
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ConfigError(f"{path} is not valid UTF-8 ({e.reason})") from e
        return cls(source=text, path=path)


def _escape_once(text: str) -> str:
    # Idempotent: already-escaped entities are not escaped twice
    return html.escape(html.unescape(text), quote=False)


class DescriptionHTMLRenderer(mistune.HTMLRenderer):
    """HTML renderer restricted to what component descriptions use."""

    def codespan(self, text: str) -> str:
        return f"<code>{_escape_once(text)}</code>"

    def image(self, text: str, url: str, title: Optional[str] = None) -> str:
        """Images are not embedded; the alt text stands in."""
        return _escape_once(text)

    def block_quote(self, text: str) -> str:
        return text


def render_body(source: str) -> str:
    renderer = DescriptionHTMLRenderer(escape=True)
    md = mistune.create_markdown(renderer=renderer)
    return md(source)


def render_markdown(doc: MarkdownDoc, title: str = DEFAULT_WORKFLOW_TITLE) -> bytes:
    """Standalone UTF-8 HTML document with ``title`` in <title>."""
    body = render_body(doc.source)
    page = (
        "<!DOCTYPE html>\n"
        '<html lang="en">\n'
        "<head>\n"
        '<meta charset="utf-8" />\n'
        f"<title>{html.escape(title, quote=False)}</title>\n"
        "</head>\n"
        "<body>\n"
        f"{body}"
        "</body>\n"
        "</html>\n"
    )
    return page.encode("utf-8")


def render_pdf(
    doc: MarkdownDoc, converter_cmd: Optional[str], title: str = DEFAULT_WORKFLOW_TITLE
) -> bytes:
    """Pipe the rendered HTML through ``converter_cmd`` and return its stdout."""
    if not converter_cmd or not converter_cmd.strip():
        raise NoConverterConfigured()
    argv = shlex.split(converter_cmd)
    page = render_markdown(doc, title)
    try:
        result = pipe_through(argv, page)
    except FileNotFoundError as e:
        raise ConverterFailed(127, f"{argv[0]}: command not found") from e
    if result.returncode != 0:
        raise ConverterFailed(result.returncode, result.stderr.decode("utf-8", "replace"))
    logger.info("Converted %s to PDF with %s", doc.path or "<markdown>", argv[0])
    return result.stdout


def write_description(
    doc: MarkdownDoc,
    target: Union[str, Path],
    title: str = DEFAULT_WORKFLOW_TITLE,
    pdf: bool = False,
    converter_cmd: Optional[str] = None,
) -> Path:
    """Render ``doc`` to ``target`` as HTML, or as PDF when ``pdf`` is set."""
    target = Path(target)
    data = render_pdf(doc, converter_cmd, title) if pdf else render_markdown(doc, title)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(data)
    except OSError as e:
        raise IoFailure(f"cannot write {target}: {e}") from e
    return target
