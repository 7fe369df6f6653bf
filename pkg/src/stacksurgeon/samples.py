"""Sample sources: live callchain sampling through perf events, or replay.

Both backends hand out :class:`RawSample` values through the same
:class:`SamplerSession` interface, so everything downstream can be tested
without a kernel.

Replay files use the collapsed-stack convention, one chain per line,
root-first::

    # comment
    main;simulate;tick 3
    main;simulate;0x401a2c

Frames spelled ``0x...`` are treated as raw addresses and go through the
symbolizer like live frames; anything else is taken as an already resolved
function name.
"""

import errno
import os
import re
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

from . import perf
from .errors import (
    InvalidSession,
    MalformedReplay,
    PermissionDenied,
    SessionClosed,
    TargetNotFound,
    UnsupportedPlatform,
)

DEFAULT_INTERVAL_MS = 1000.0
DEFAULT_MAX_DEPTH = 127

Frame = Union[int, str]

_HEX_FRAME = re.compile(r"0x[0-9a-fA-F]+")


@dataclass(frozen=True)
class SessionSpec:
    pid: Optional[int] = None
    cgroup: Optional[str] = None
    interval_ms: float = DEFAULT_INTERVAL_MS
    max_stack_depth: int = DEFAULT_MAX_DEPTH
    include_kernel: bool = False

    def __post_init__(self):
        if (self.pid is None) == (self.cgroup is None):
            raise InvalidSession("exactly one of pid / cgroup must be set")
        if not self.interval_ms > 0:
            raise InvalidSession(f"interval must be positive, got {self.interval_ms}")
        if self.max_stack_depth < 2:
            raise InvalidSession("max_stack_depth must be at least 2")

    @property
    def interval_ns(self) -> int:
        return max(1, int(round(self.interval_ms * 1_000_000)))


@dataclass(frozen=True)
class RawSample:
    """One stack sample. ``frames[0]`` is the executing function."""

    frames: Tuple[Frame, ...]
    timestamp: int
    truncated: bool = False
    pid: Optional[int] = None

    def __post_init__(self):
        if not self.frames:
            raise ValueError("a sample needs at least one frame")


@dataclass(frozen=True)
class SessionSummary:
    total_samples: int
    dropped_samples: int
    wall_duration: float


class SampleBatch(list):
    """Samples from one poll, plus how many the kernel dropped meanwhile."""

    def __init__(self, samples=(), dropped=0):
        super().__init__(samples)
        self.dropped = dropped


def _clip(frames, depth):
    if len(frames) > depth:
        return tuple(frames[:depth]), True
    return tuple(frames), False


class SamplerSession:
    """Common bookkeeping for both backends."""

    def __init__(self, spec: Optional[SessionSpec]):
        self.spec = spec
        self.closed = False
        self._total = 0
        self._dropped = 0
        self._last_ts = 0
        self._started = time.monotonic()
        self._summary = None

    def poll(self) -> SampleBatch:
        if self.closed:
            raise SessionClosed("session already closed")
        samples, dropped = self._drain()
        samples.sort(key=lambda s: s.timestamp)
        out = SampleBatch(dropped=dropped)
        for s in samples:
            if s.timestamp < self._last_ts:
                s = RawSample(s.frames, self._last_ts, s.truncated, s.pid)
            self._last_ts = s.timestamp
            out.append(s)
        self._total += len(out)
        self._dropped += dropped
        return out

    def close(self) -> SessionSummary:
        if self._summary is None:
            self._release()
            self.closed = True
            self._summary = SessionSummary(self._total, self._dropped,
                                           time.monotonic() - self._started)
        return self._summary

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _drain(self):
        raise NotImplementedError

    def _release(self):
        pass


class ReplaySession(SamplerSession):
    def __init__(self, samples, path, batch=None):
        super().__init__(None)
        self.path = path
        self._pending = list(samples)
        self._batch = batch

    def _drain(self):
        n = len(self._pending) if self._batch is None else self._batch
        taken, self._pending = self._pending[:n], self._pending[n:]
        return taken, 0


class LiveSession(SamplerSession):
    def __init__(self, spec, buffers, t0_ns, kernel_depth, attr=None, tids=()):
        super().__init__(spec)
        self._buffers = buffers
        self._t0 = t0_ns
        self._kernel_depth = kernel_depth
        self._attr = attr
        self._tids = set(tids)

    def _follow_new_threads(self):
        # inherited per-task events cannot be mmapped, so threads spawned
        # after attach are picked up here instead
        for tid in _list_tids(self.spec.pid) - self._tids:
            self._tids.add(tid)
            try:
                buf = perf.RingBuffer(_open_fd(self._attr, tid, -1))
            except (TargetNotFound, OSError):
                continue
            buf.enable()
            self._buffers.append(buf)

    def _drain(self):
        if self.spec.pid is not None and self._attr is not None:
            self._follow_new_threads()
        depth = self.spec.max_stack_depth
        samples = []
        dropped = 0
        for buf in self._buffers:
            for rtype, payload in buf.read_records():
                if rtype == perf.PERF_RECORD_LOST:
                    dropped += perf.decode_lost(payload)
                elif rtype == perf.PERF_RECORD_SAMPLE:
                    pid, _tid, t, ips = perf.decode_sample(payload)
                    frames = perf.user_frames(ips, self.spec.include_kernel)
                    if not frames:
                        continue
                    cut = len(ips) >= self._kernel_depth
                    frames, truncated = _clip(frames, depth)
                    truncated = truncated or (cut and len(frames) == depth)
                    samples.append(RawSample(frames, max(0, t - self._t0), truncated, pid))
        return samples, dropped

    def _release(self):
        for buf in self._buffers:
            buf.close()
        self._buffers = []


def _list_tids(pid):
    try:
        return {int(t) for t in os.listdir(f"/proc/{pid}/task")}
    except (FileNotFoundError, ProcessLookupError):
        return set()


def parse_replay(text, max_stack_depth=DEFAULT_MAX_DEPTH, interval_ms=DEFAULT_INTERVAL_MS):
    """Parse replay text into leaf-first samples, in file order.

    Timestamps are synthesized as ``index * interval`` since the format does
    not record them.
    """
    step = int(round(interval_ms * 1_000_000))
    samples = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        count = 1
        head, _, tail = line.rpartition(" ")
        if head and tail.isdigit():
            count = int(tail)
            line = head.rstrip()
            if count < 1:
                raise MalformedReplay(lineno, "repeat count must be at least 1")
        names = line.split(";")
        if any(not n.strip() for n in names):
            raise MalformedReplay(lineno, "empty frame")
        frames = []
        for n in reversed(names):
            n = n.strip()
            frames.append(int(n, 16) if _HEX_FRAME.fullmatch(n) else n)
        frames, truncated = _clip(frames, max_stack_depth)
        for _ in range(count):
            samples.append(RawSample(frames, len(samples) * step, truncated))
    return samples


def open_replay(path, max_stack_depth=DEFAULT_MAX_DEPTH, interval_ms=DEFAULT_INTERVAL_MS,
                batch=None) -> ReplaySession:
    """Open a replay file; ``batch`` limits how many samples one poll returns."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return ReplaySession(parse_replay(text, max_stack_depth, interval_ms), path, batch)


def live_supported() -> bool:
    return perf.syscall_number() is not None


def _open_fd(attr, pid, cpu, flags=perf.PERF_FLAG_FD_CLOEXEC):
    try:
        return perf.perf_event_open(attr, pid, cpu, flags=flags)
    except OSError as e:
        if e.errno == errno.ESRCH:
            raise TargetNotFound(f"no such process {pid}") from e
        if e.errno in (errno.EACCES, errno.EPERM):
            raise PermissionDenied(f"not allowed to profile target: {e.strerror}") from e
        if e.errno == errno.ENOSYS:
            raise UnsupportedPlatform("kernel has no perf_event_open") from e
        raise


def open_session(spec: SessionSpec) -> LiveSession:
    """Arm live sampling on every task of ``spec.pid`` or every CPU of a cgroup."""
    if not live_supported():
        raise UnsupportedPlatform(f"live sampling is not supported on {sys.platform}")
    t0 = time.monotonic_ns()
    # one spare frame so a chain cut by the kernel is detectable; when the
    # kernel limit forbids it, a chain of exactly that length counts as cut
    limit = perf.kernel_max_stack()
    depth = min(spec.max_stack_depth + 1, limit)
    fds = []
    buffers = []
    try:
        if spec.pid is not None:
            tids = sorted(_list_tids(spec.pid))
            if not tids:
                raise TargetNotFound(f"no such process {spec.pid}")
            attr = perf.build_attr(perf.PERF_COUNT_SW_TASK_CLOCK, spec.interval_ns, depth,
                                   spec.include_kernel, inherit=False)
            for tid in tids:
                try:
                    fds.append(_open_fd(attr, tid, -1))
                except TargetNotFound:
                    # thread exited between listing and attach
                    continue
            if not fds:
                raise TargetNotFound(f"no such process {spec.pid}")
        else:
            try:
                cg_fd = os.open(spec.cgroup, os.O_RDONLY | os.O_DIRECTORY)
            except (FileNotFoundError, NotADirectoryError):
                raise TargetNotFound(f"no such cgroup {spec.cgroup}") from None
            try:
                attr = perf.build_attr(perf.PERF_COUNT_SW_CPU_CLOCK, spec.interval_ns, depth,
                                       spec.include_kernel, inherit=False)
                for cpu in sorted(os.sched_getaffinity(0)):
                    fds.append(_open_fd(attr, cg_fd, cpu,
                                        perf.PERF_FLAG_FD_CLOEXEC | perf.PERF_FLAG_PID_CGROUP))
            finally:
                os.close(cg_fd)
            attr = None
            tids = ()
        while fds:
            buffers.append(perf.RingBuffer(fds[0]))
            fds.pop(0)
    except BaseException:
        for buf in buffers:
            buf.close()
        for fd in fds:
            os.close(fd)
        raise
    for buf in buffers:
        buf.enable()
    return LiveSession(spec, buffers, t0, depth, attr, tids)


def poll_samples(session: SamplerSession) -> SampleBatch:
    return session.poll()


def close_session(session: SamplerSession) -> SessionSummary:
    return session.close()
