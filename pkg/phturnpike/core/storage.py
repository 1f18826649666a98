import csv
import io
import json
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterator, List, Sequence

import structlog
from pydantic import BaseModel

from phturnpike.core.errors import InputFormatError
from phturnpike.models.base import to_plain

logger = structlog.get_logger(__name__)


def atomic_write_text(path: Path, text: str) -> Path:
    """Write to a sibling temp file, then rename over the target"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=str(path.parent))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except OSError as exc:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise InputFormatError(f"cannot write {path}: {exc}", {"path": str(path)}) from exc
    return path


def dump_json(payload: Any) -> str:
    if isinstance(payload, BaseModel):
        return payload.model_dump_json(indent=2) + "\n"
    return json.dumps(to_plain(payload), indent=2, allow_nan=True) + "\n"


def format_row(values: Sequence[Any]) -> List[str]:
    return [repr(float(v)) for v in values]


def read_json(path: Path) -> Any:
    """Load JSON, reporting syntax errors with line and column"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise InputFormatError(f"cannot read {path}: {exc}", {"path": str(path)}) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputFormatError(
            f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}",
            {"path": str(path), "line": exc.lineno, "column": exc.colno},
        ) from exc


class OutputWriter:
    """Writes the files of one run into a single directory"""

    def __init__(self, out_dir: Path) -> None:
        self.out_dir = Path(out_dir)
        self.written: List[Path] = []

    def write_text(self, name: str, text: str) -> Path:
        path = atomic_write_text(self.out_dir / name, text)
        self.written.append(path)
        logger.debug("output written", path=str(path))
        return path

    def write_json(self, name: str, payload: Any) -> Path:
        return self.write_text(name, dump_json(payload))

    def write_csv(self, name: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> Path:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow(format_row(row))
        return self.write_text(name, buffer.getvalue())

    def write_columns(self, name: str, comment: str, rows: Sequence[Sequence[Any]]) -> Path:
        """gnuplot-style whitespace separated columns"""
        lines = [f"# {comment}"]
        lines.extend(" ".join(format_row(row)) for row in rows)
        return self.write_text(name, "\n".join(lines) + "\n")


@contextmanager
def output_session(out_dir: Path) -> Iterator[OutputWriter]:
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputFormatError(f"cannot create output directory {out_dir}: {exc}") from exc
    writer = OutputWriter(out_dir)
    try:
        yield writer
    except Exception:
        logger.warning("run aborted", out_dir=str(out_dir), files_written=len(writer.written))
        raise
