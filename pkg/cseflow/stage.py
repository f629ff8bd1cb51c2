"""Contract between the engine and the code that runs one stage."""

import importlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict

from .constants import ARTIFACT_EXTENSIONS
from .model import ComponentManifest, Realization


@dataclass(frozen=True)
class StageContext:
    """Everything a stage runner may look at.

    ``params`` holds the inputs-object values of the component's declared input
    ports; ``upstream`` maps bound input ports to artifact files of earlier stages.
    """

    index: int
    manifest: ComponentManifest
    realization: Realization
    locator: str
    params: Dict[str, Any]
    upstream: Dict[str, Path]
    artifacts_dir: Path

    @property
    def prefix(self) -> str:
        return f"stage{self.index}_"

    def artifact_path(self, port: str) -> Path:
        """``stage<k>_<port>.<ext>``, extension taken from the port's semantic type."""
        spec = self.manifest.output_port(port)
        ext = ARTIFACT_EXTENSIONS.get(spec.semantic_type, "dat") if spec else "dat"
        return self.artifacts_dir / f"{self.prefix}{port}.{ext}"

    def artifact_dir(self, port: str) -> Path:
        path = self.artifacts_dir / f"{self.prefix}{port}"
        path.mkdir(parents=True, exist_ok=True)
        return path


@dataclass(frozen=True)
class StageOutcome:
    outputs: Dict[str, Path]
    message: str = ""
    # fetched URL -> sha256 of the body
    sources: Dict[str, str] = field(default_factory=dict)


StageRunner = Callable[[StageContext], StageOutcome]


def load_entry_point(locator: str) -> StageRunner:
    """Import ``package.module:function``."""
    module_name, sep, attr = locator.partition(":")
    if not sep or not module_name or not attr:
        raise ValueError(f"solver locator must look like 'package.module:function', got '{locator}'")
    module = importlib.import_module(module_name)
    try:
        runner = getattr(module, attr)
    except AttributeError as e:
        raise ValueError(f"module '{module_name}' has no attribute '{attr}'") from e
    if not callable(runner):
        raise ValueError(f"'{locator}' is not callable")
    return runner
