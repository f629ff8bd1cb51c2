import subprocess
from pathlib import Path
from typing import List, Union


def pipe_through(cmd: List[str], data: bytes) -> subprocess.CompletedProcess:
    """Run ``cmd`` with ``data`` on stdin, capturing stdout and stderr.

    Raises FileNotFoundError when the executable does not exist.
    """
    return subprocess.run(cmd, input=data, capture_output=True, check=False)


def render_to_file(dot_source: str, output_path: Union[str, Path], format: str = "svg") -> Path:
    """Render DOT source to file using graphviz."""
    output_path = Path(output_path)
    try:
        result = pipe_through(
            ["dot", f"-T{format}", "-o", str(output_path)], dot_source.encode("utf-8")
        )
    except FileNotFoundError:
        raise RuntimeError(
            "Graphviz 'dot' executable not found. Please install Graphviz."
        )
    if result.returncode != 0:
        raise RuntimeError(f"Graphviz failed: {result.stderr.decode('utf-8', 'replace')}")
    return output_path
