"""Address-to-function-name resolution from ELF symbol tables."""

import bisect
import ctypes
import ctypes.util
import functools
import re
import warnings
from dataclasses import dataclass
from pathlib import Path

from elftools.common.exceptions import ELFError
from elftools.elf.elffile import ELFFile
from elftools.elf.sections import SymbolTableSection

from .errors import NoSymbols, TargetNotFound


@dataclass(frozen=True)
class FrameName:
    display: str
    resolved: bool


def hex_name(address: int) -> FrameName:
    return FrameName(f"0x{address:x}", False)


# -- demangling --------------------------------------------------------------

@functools.lru_cache(maxsize=1)
def _cxa_demangle():
    name = ctypes.util.find_library("stdc++")
    if not name:
        return None
    try:
        lib = ctypes.CDLL(name)
        libc = ctypes.CDLL(None)
    except OSError:
        return None
    fn = lib.__cxa_demangle
    fn.restype = ctypes.c_void_p
    fn.argtypes = [ctypes.c_char_p, ctypes.c_void_p, ctypes.c_void_p,
                   ctypes.POINTER(ctypes.c_int)]
    libc.free.argtypes = [ctypes.c_void_p]
    return fn, libc.free


@functools.lru_cache(maxsize=65536)
def demangle(name: str) -> str:
    """Itanium C++ demangling; names that are not mangled come back as-is."""
    if not name.startswith("_Z"):
        return name
    funcs = _cxa_demangle()
    if funcs is None:
        return name
    fn, free = funcs
    status = ctypes.c_int(0)
    ptr = fn(name.encode(), None, None, ctypes.byref(status))
    if status.value != 0 or not ptr:
        return name
    try:
        return ctypes.string_at(ptr).decode("utf-8", "replace")
    finally:
        free(ptr)


_ANON = "(anonymous namespace)"


def trim_signature(name: str) -> str:
    """Drop the parameter list: everything from the first ``(`` onward.

    ``(anonymous namespace)`` and ``operator()`` are part of the name, not
    the parameter list, so they are skipped over.
    """
    i = 0
    while True:
        j = name.find("(", i)
        if j < 0:
            return name
        if name.startswith(_ANON, j):
            i = j + len(_ANON)
        elif name.endswith("operator", 0, j) and name.startswith("()", j):
            i = j + 2
        elif j == 0:
            return name
        else:
            return name[:j]


def display_name(symbol: str) -> str:
    return trim_signature(demangle(symbol))


# -- index ---------------------------------------------------------------------

class SymbolIndex:
    """Immutable sorted set of ``[start, end) -> name`` ranges.

    Ranges never overlap: when two ranges share a start address the one
    given first wins, and a range is clipped where the next one begins.
    """

    def __init__(self, ranges=()):
        by_start = {}
        for start, end, name in ranges:
            if start not in by_start:
                by_start[start] = (end, name)
        starts = sorted(by_start)
        ends = []
        names = []
        for k, s in enumerate(starts):
            end, name = by_start[s]
            if k + 1 < len(starts):
                end = min(end, starts[k + 1])
            ends.append(end)
            names.append(name)
        self._starts = tuple(starts)
        self._ends = tuple(ends)
        self._names = tuple(names)

    @classmethod
    def from_ranges(cls, ranges):
        return cls(ranges)

    def __len__(self):
        return len(self._starts)

    @property
    def has_symbols(self) -> bool:
        return bool(self._starts)

    def lookup(self, address: int) -> FrameName:
        k = bisect.bisect_right(self._starts, address) - 1
        if k >= 0 and address < self._ends[k]:
            return FrameName(self._names[k], True)
        return hex_name(address)


def _elf_function_ranges(elf):
    """Yield ``(value, size, name, is_global)`` for every defined function."""
    tables = [s for s in elf.iter_sections() if isinstance(s, SymbolTableSection)]
    symtab = [s for s in tables if s.name == ".symtab"]
    for section in symtab or tables:
        for sym in section.iter_symbols():
            if sym["st_info"]["type"] not in ("STT_FUNC", "STT_GNU_IFUNC"):
                continue
            if sym["st_shndx"] == "SHN_UNDEF" or not sym["st_value"] or not sym.name:
                continue
            yield (sym["st_value"], sym["st_size"], sym.name,
                   sym["st_info"]["bind"] == "STB_GLOBAL")


def _load_bias(elf, map_start):
    """Runtime minus link-time address for an object mapped at ``map_start``."""
    if elf["e_type"] != "ET_DYN":
        return 0
    vaddrs = [seg["p_vaddr"] - seg["p_offset"]
              for seg in elf.iter_segments() if seg["p_type"] == "PT_LOAD"]
    return map_start - (min(vaddrs) if vaddrs else 0)


def _object_ranges(path, bias):
    try:
        with open(path, "rb") as fh:
            elf = ELFFile(fh)
            if bias is None:
                bias = 0
            elif callable(bias):
                bias = bias(elf)
            funcs = list(_elf_function_ranges(elf))
    except (OSError, ELFError):
        return []
    # global symbols first so they win shared start addresses
    funcs.sort(key=lambda f: (f[0], not f[3], f[2]))
    values = sorted({f[0] for f in funcs})
    out = []
    for value, size, name, _glob in funcs:
        start = value + bias
        if size:
            end = start + size
        else:
            k = bisect.bisect_right(values, value)
            end = (values[k] + bias) if k < len(values) else start + 1
        out.append((start, end, display_name(name)))
    return out


_MAPS_LINE = re.compile(
    r"^([0-9a-f]+)-([0-9a-f]+)\s+(\S{4})\s+([0-9a-f]+)\s+\S+\s+\d+\s*(.*)$")


def read_maps(pid):
    """Parse ``/proc/<pid>/maps`` into ``(start, end, perms, offset, path)``."""
    try:
        text = Path(f"/proc/{pid}/maps").read_text()
    except FileNotFoundError:
        raise TargetNotFound(f"no such process {pid}") from None
    out = []
    for line in text.splitlines():
        m = _MAPS_LINE.match(line)
        if m:
            out.append((int(m[1], 16), int(m[2], 16), m[3], int(m[4], 16), m[5]))
    return out


def _ranges_for_pid(pid):
    by_path = {}
    executable = set()
    for start, _end, perms, offset, path in read_maps(pid):
        if not path.startswith("/"):
            continue
        by_path.setdefault(path, []).append(start - offset)
        if "x" in perms:
            executable.add(path)
    ranges = []
    for path in sorted(executable):
        base = min(by_path[path])
        # read through the target's root so container paths still resolve
        real = Path(f"/proc/{pid}/root{path}")
        if not real.exists():
            real = Path(path)
        ranges.extend(_object_ranges(real, lambda elf, b=base: _load_bias(elf, b)))
    return ranges


def build_symbol_index(target) -> SymbolIndex:
    """Index the functions of a live process (``int`` pid) or an executable.

    For an executable path the link-time addresses are used as-is. A target
    without any function symbols yields an empty index and a
    :class:`NoSymbols` warning; lookups then fall back to hex.
    """
    if isinstance(target, int):
        ranges = _ranges_for_pid(target)
    else:
        path = Path(target)
        if not path.exists():
            raise TargetNotFound(f"no such file {path}")
        ranges = _object_ranges(path, None)
    index = SymbolIndex(ranges)
    if not index.has_symbols:
        warnings.warn(NoSymbols(f"no function symbols found for {target}"), stacklevel=2)
    return index


EMPTY_INDEX = SymbolIndex()


def resolve_frame(index, frame) -> FrameName:
    if isinstance(frame, str):
        return FrameName(frame, True)
    return index.lookup(frame)


def resolve(index, sample):
    """Name every frame of ``sample``, leaf-first, same length and order."""
    return [resolve_frame(index, f) for f in sample.frames]
