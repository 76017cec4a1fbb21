"""
Result files and the run manifest.

Data files are pure functions of the configuration and seeds; timestamps and
wall-clock durations are written to ``manifest.json`` only, together with a
SHA-256 hash of every data file.
"""

import csv
import hashlib
import json
import logging
import math
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import scipy
import torch

from sled_qubit import __version__

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "{:.16e}"  # 17 significant digits
MANIFEST_NAME = "manifest.json"


def _format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return FLOAT_FORMAT.format(value)
    return str(value)


def _jsonable(value: Any) -> Any:
    """Convert numpy scalars and arrays, replacing non-finite floats by None."""
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def file_sha256(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


@dataclass(frozen=True)
class FileRecord:
    """One emitted file, relative to the run directory."""

    path: str
    sha256: str
    bytes: int


class ResultWriter:
    """
    Writes tables and JSON documents into one run directory.

    Files are registered in the order they are written; callers write in job
    index order so the index does not depend on scheduling.

    Example:
        >>> writer = ResultWriter(Path("runs/steady"))
        >>> writer.write_table("markers", {"gamma": [1.0], "delta_s": [-1.0]})
        [PosixPath('runs/steady/markers.csv'), PosixPath('runs/steady/markers.json')]
    """

    def __init__(self, directory: Union[str, Path], formats: Sequence[str] = ("csv", "json")):
        self.directory = Path(directory)
        self.formats = tuple(formats)
        self.records: List[FileRecord] = []
        self.directory.mkdir(parents=True, exist_ok=True)

    def _register(self, path: Path) -> Path:
        record = FileRecord(
            path=path.relative_to(self.directory).as_posix(),
            sha256=file_sha256(path),
            bytes=path.stat().st_size,
        )
        self.records = [r for r in self.records if r.path != record.path] + [record]
        logger.debug("Wrote %s (%d bytes)", record.path, record.bytes)
        return path

    def write_table(self, name: str, columns: Mapping[str, Sequence[Any]]) -> List[Path]:
        """
        Write a column table as ``name.csv`` (and a JSON mirror).

        Raises:
            ValueError: If the columns differ in length
        """
        lengths = {key: len(values) for key, values in columns.items()}
        if len(set(lengths.values())) > 1:
            raise ValueError(f"columns of table '{name}' differ in length: {lengths}")
        rows = len(next(iter(lengths.values()), [])) if lengths else 0
        paths = []
        csv_path = self.directory / f"{name}.csv"
        with open(csv_path, "w", encoding="utf-8", newline="") as f:
            out = csv.writer(f, lineterminator="\n")
            out.writerow(list(columns))
            for index in range(rows):
                out.writerow([_format_cell(values[index]) for values in columns.values()])
        paths.append(self._register(csv_path))
        if "json" in self.formats:
            mirror = {key: [_jsonable(v) for v in values] for key, values in columns.items()}
            paths.append(self.write_json(name, mirror))
        return paths

    def write_json(self, name: str, data: Any) -> Path:
        path = self.directory / f"{name}.json"
        with open(path, "w", encoding="utf-8") as f:
            json.dump(_jsonable(data), f, indent=2, sort_keys=False)
            f.write("\n")
        return self._register(path)

    def register(self, path: Union[str, Path]) -> Path:
        """Add a file written by another component (e.g. a noise dump)."""
        return self._register(Path(path))


@dataclass
class RunManifest:
    """
    Provenance of one command invocation.

    Attributes:
        command: Subcommand name
        config: Configuration as given (original units)
        resolved: Parameters in internal units (rad/s, s)
        derived: Quantities computed from the parameters (eta, n, gamma_beta,
            Delta_s per solver, step size)
        seeds: Base seed and trajectory count
        version: Package version
        started: ISO timestamp of the start
        wall_clock: Duration in seconds
        files: Emitted files with content hashes
    """

    command: str
    config: Dict[str, Any]
    resolved: Dict[str, Any] = field(default_factory=dict)
    derived: Dict[str, Any] = field(default_factory=dict)
    seeds: Dict[str, Any] = field(default_factory=dict)
    version: str = ""
    started: str = ""
    wall_clock: float = 0.0
    environment: Dict[str, str] = field(default_factory=dict)
    files: List[FileRecord] = field(default_factory=list)
    _t0: float = field(default=0.0, init=False, repr=False)

    def start(self) -> "RunManifest":
        self.version = __version__
        self.started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        self.environment = {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "torch": torch.__version__,
        }
        self._t0 = time.perf_counter()
        return self

    def finish(self, writer: ResultWriter) -> Path:
        """Record the file index and wall clock, then write manifest.json."""
        self.wall_clock = time.perf_counter() - self._t0
        self.files = list(writer.records)
        path = writer.directory / MANIFEST_NAME
        self.save(path)
        logger.info("Run '%s' wrote %d files to %s in %.1f s", self.command, len(self.files), writer.directory, self.wall_clock)
        return path

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "version": self.version,
            "started": self.started,
            "wall_clock_s": self.wall_clock,
            "environment": self.environment,
            "config": _jsonable(self.config),
            "resolved": _jsonable(self.resolved),
            "derived": _jsonable(self.derived),
            "seeds": _jsonable(self.seeds),
            "files": [asdict(r) for r in self.files],
        }

    def save(self, path: Union[str, Path]) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")


def verify_manifest(directory: Union[str, Path]) -> List[str]:
    """
    Check every file listed in a run's manifest against its hash.

    Returns:
        Relative paths that are missing or whose content changed
    """
    directory = Path(directory)
    with open(directory / MANIFEST_NAME, "r", encoding="utf-8") as f:
        manifest = json.load(f)
    bad = []
    for record in manifest["files"]:
        path = directory / record["path"]
        if not path.exists() or file_sha256(path) != record["sha256"]:
            bad.append(record["path"])
    return bad


def read_column(path: Union[str, Path], column: str) -> Optional[np.ndarray]:
    """Numeric column of a CSV written by :class:`ResultWriter`, or None if absent."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or column not in reader.fieldnames:
            return None
        return np.array([float(row[column]) for row in reader])
