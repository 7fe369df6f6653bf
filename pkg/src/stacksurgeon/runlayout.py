"""Run directory convention and compact run labels.

One profile per configuration lives at::

    <benchmark>/<application>/<cores>/<CpuFullName>/<mem>GB/[ruby/]callstack.json

and is labelled ``<cores><CPU><mem>[r]``, e.g. ``1AS3r``.
"""

import os
import re
from dataclasses import dataclass
from pathlib import Path, PurePosixPath

from .errors import DirNotFound

FILENAME = "callstack.json"

CPU_FULL = {"AS": "AtomicSimpleCPU", "TS": "TimingSimpleCPU", "O3": "O3CPU"}
CPU_ABBREV = {full: abbr for abbr, full in CPU_FULL.items()}

_POSITIVE = re.compile(r"[1-9][0-9]*")
_MEMORY = re.compile(r"([1-9][0-9]*)GB")


def cpu_abbrev(name: str) -> str:
    if name in CPU_FULL:
        return name
    if name in CPU_ABBREV:
        return CPU_ABBREV[name]
    raise ValueError(f"unknown CPU type {name!r}")


@dataclass(frozen=True)
class RunMeta:
    benchmark: str
    application: str
    cores: int
    cpu_type: str
    memory_gb: int
    ruby: bool

    def __post_init__(self):
        object.__setattr__(self, "cpu_type", cpu_abbrev(self.cpu_type))
        if self.cores < 1:
            raise ValueError("cores must be at least 1")
        if self.memory_gb < 1:
            raise ValueError("memory_gb must be at least 1")
        for part in (self.benchmark, self.application):
            if not part or "/" in part or part in (".", ".."):
                raise ValueError(f"invalid path component {part!r}")

    @property
    def cpu_full_name(self) -> str:
        return CPU_FULL[self.cpu_type]


def layout_path(meta: RunMeta) -> str:
    parts = [meta.benchmark, meta.application, str(meta.cores), meta.cpu_full_name,
             f"{meta.memory_gb}GB"]
    if meta.ruby:
        parts.append("ruby")
    parts.append(FILENAME)
    return str(PurePosixPath(*parts))


def label(meta: RunMeta) -> str:
    return f"{meta.cores}{meta.cpu_type}{meta.memory_gb}" + ("r" if meta.ruby else "")


def parse_layout(parts):
    """Decode path components (relative to the runs root) into a RunMeta.

    Returns None when the components do not follow the convention.
    """
    parts = list(parts)
    if not parts or parts[-1] != FILENAME:
        return None
    parts = parts[:-1]
    ruby = len(parts) == 6 and parts[-1] == "ruby"
    if ruby:
        parts = parts[:-1]
    if len(parts) != 5:
        return None
    benchmark, application, cores, cpu, memory = parts
    mem = _MEMORY.fullmatch(memory)
    if not _POSITIVE.fullmatch(cores) or not mem:
        return None
    try:
        return RunMeta(benchmark, application, int(cores), cpu, int(mem[1]), ruby)
    except ValueError:
        return None


def meta_from_path(path) -> "RunMeta | None":
    """Decode the trailing components of any path, absolute or relative."""
    parts = Path(path).parts
    for n in (7, 6):
        if len(parts) >= n:
            meta = parse_layout(parts[-n:])
            if meta is not None:
                return meta
    return None


def discover_runs(root_dir, skipped=None):
    """Find every conforming ``callstack.json`` under ``root_dir``.

    Returns ``(RunMeta, Path)`` pairs sorted by path. Files that do not fit
    the layout are appended to ``skipped`` when a list is given.
    """
    root = Path(root_dir)
    if not root.is_dir():
        raise DirNotFound(f"no such directory {root}")
    found = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for fn in sorted(filenames):
            path = Path(dirpath) / fn
            meta = parse_layout(path.relative_to(root).parts)
            if meta is None:
                if skipped is not None:
                    skipped.append(path)
            else:
                found.append((meta, path))
    found.sort(key=lambda mp: mp[1].as_posix())
    return found


_NATURAL = re.compile(r"(\d+)")


def natural_key(text: str):
    """Sort key treating digit runs as numbers: 1AS3r < 4AS3r < 16AS3r."""
    return [(0, int(tok), "") if tok.isdigit() else (1, 0, tok)
            for tok in _NATURAL.split(text) if tok]
