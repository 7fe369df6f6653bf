"""Thin ctypes layer over Linux ``perf_event_open`` and its mmap ring buffer.

Only what the sampler needs: a software clock event with callchain capture,
one ring buffer per event fd, and a decoder for SAMPLE and LOST records.
"""

import ctypes
import errno
import fcntl
import mmap
import os
import platform
import struct
import sys

# perf_event_attr.type
PERF_TYPE_SOFTWARE = 1
# software event configs
PERF_COUNT_SW_CPU_CLOCK = 0
PERF_COUNT_SW_TASK_CLOCK = 1

PERF_SAMPLE_IP = 1 << 0
PERF_SAMPLE_TID = 1 << 1
PERF_SAMPLE_TIME = 1 << 2
PERF_SAMPLE_CALLCHAIN = 1 << 5

# attr flag bits
_DISABLED = 1 << 0
_INHERIT = 1 << 1
_EXCLUDE_KERNEL = 1 << 5
_EXCLUDE_HV = 1 << 6
_USE_CLOCKID = 1 << 25

PERF_FLAG_FD_CLOEXEC = 1 << 3
PERF_FLAG_PID_CGROUP = 1 << 2

PERF_EVENT_IOC_ENABLE = 0x2400
PERF_EVENT_IOC_DISABLE = 0x2401

PERF_RECORD_LOST = 2
PERF_RECORD_SAMPLE = 9

# callchain context markers are the top 4095 values of u64
PERF_CONTEXT_MAX = (1 << 64) - 4095
PERF_CONTEXT_KERNEL = (1 << 64) - 128
PERF_CONTEXT_USER = (1 << 64) - 512

CLOCK_MONOTONIC = 1

ATTR_SIZE = 128
DATA_PAGES = 64  # must be a power of two

_SYSCALL_NR = {
    "x86_64": 298,
    "aarch64": 241,
    "arm64": 241,
    "riscv64": 241,
    "i386": 336,
    "i686": 336,
    "armv7l": 364,
    "ppc64le": 319,
    "s390x": 331,
}

_libc = None


def syscall_number():
    if not sys.platform.startswith("linux"):
        return None
    return _SYSCALL_NR.get(platform.machine())


def kernel_max_stack(default=127):
    try:
        with open("/proc/sys/kernel/perf_event_max_stack") as fh:
            return int(fh.read())
    except (OSError, ValueError):
        return default


def _get_libc():
    global _libc
    if _libc is None:
        _libc = ctypes.CDLL(None, use_errno=True)
        _libc.syscall.restype = ctypes.c_long
    return _libc


def build_attr(config, period_ns, max_stack, include_kernel=False, inherit=False):
    """Pack a ``perf_event_attr`` for time-based sampling with callchains."""
    buf = bytearray(ATTR_SIZE)
    sample_type = PERF_SAMPLE_IP | PERF_SAMPLE_TID | PERF_SAMPLE_TIME | PERF_SAMPLE_CALLCHAIN
    struct.pack_into("<IIQQQQ", buf, 0, PERF_TYPE_SOFTWARE, ATTR_SIZE, config,
                     period_ns, sample_type, 0)
    flags = _DISABLED | _EXCLUDE_HV | _USE_CLOCKID
    if inherit:
        flags |= _INHERIT
    if not include_kernel:
        flags |= _EXCLUDE_KERNEL
    struct.pack_into("<Q", buf, 40, flags)
    struct.pack_into("<I", buf, 48, 1)  # wakeup_events
    struct.pack_into("<i", buf, 92, CLOCK_MONOTONIC)
    struct.pack_into("<H", buf, 108, min(max_stack, 0xFFFF))
    return bytes(buf)


def perf_event_open(attr, pid, cpu, group_fd=-1, flags=PERF_FLAG_FD_CLOEXEC):
    """Call the syscall; raises OSError with the kernel's errno on failure."""
    nr = syscall_number()
    if nr is None:
        raise OSError(errno.ENOSYS, "perf_event_open is not available on this platform")
    libc = _get_libc()
    cattr = ctypes.create_string_buffer(attr, len(attr))
    fd = libc.syscall(nr, cattr, ctypes.c_int(pid), ctypes.c_int(cpu),
                      ctypes.c_int(group_fd), ctypes.c_ulong(flags))
    if fd < 0:
        err = ctypes.get_errno()
        raise OSError(err, os.strerror(err))
    return fd


class RingBuffer:
    """One event fd and its mmap'd ring buffer."""

    _HEAD_OFF = 1024
    _TAIL_OFF = 1032

    def __init__(self, fd, data_pages=DATA_PAGES):
        self.fd = fd
        self.page_size = mmap.PAGESIZE
        self.data_size = data_pages * self.page_size
        self.map = mmap.mmap(fd, self.page_size + self.data_size,
                             mmap.MAP_SHARED, mmap.PROT_READ | mmap.PROT_WRITE)

    def enable(self):
        fcntl.ioctl(self.fd, PERF_EVENT_IOC_ENABLE, 0)

    def disable(self):
        fcntl.ioctl(self.fd, PERF_EVENT_IOC_DISABLE, 0)

    def read_records(self):
        """Drain every complete record; yields ``(type, payload bytes)``."""
        m = self.map
        head = struct.unpack_from("<Q", m, self._HEAD_OFF)[0]
        tail = struct.unpack_from("<Q", m, self._TAIL_OFF)[0]
        base = self.page_size
        size = self.data_size
        out = []
        while tail + 8 <= head:
            hdr = self._copy(m, base, size, tail, 8)
            rtype, _misc, rsize = struct.unpack("<IHH", hdr)
            if rsize < 8 or tail + rsize > head:
                break
            out.append((rtype, self._copy(m, base, size, tail + 8, rsize - 8)))
            tail += rsize
        struct.pack_into("<Q", m, self._TAIL_OFF, tail)
        return out

    @staticmethod
    def _copy(m, base, size, pos, n):
        start = pos % size
        end = start + n
        if end <= size:
            return m[base + start:base + end]
        return m[base + start:base + size] + m[base:base + end - size]

    def close(self):
        try:
            self.disable()
        except OSError:
            pass
        self.map.close()
        os.close(self.fd)


def decode_sample(payload):
    """Decode a SAMPLE record laid out for ``IP|TID|TIME|CALLCHAIN``.

    Returns ``(pid, tid, time_ns, ips)`` where ``ips`` still contains the
    kernel's context markers.
    """
    _ip, pid, tid, t, nr = struct.unpack_from("<QIIQQ", payload, 0)
    ips = struct.unpack_from(f"<{nr}Q", payload, 32)
    return pid, tid, t, ips


def decode_lost(payload):
    _id, lost = struct.unpack_from("<QQ", payload, 0)
    return lost


def user_frames(ips, include_kernel=False):
    """Strip context markers, keeping user frames (and kernel ones if asked)."""
    frames = []
    context = PERF_CONTEXT_USER
    for ip in ips:
        if ip >= PERF_CONTEXT_MAX:
            context = ip
            continue
        if context == PERF_CONTEXT_USER or (include_kernel and context == PERF_CONTEXT_KERNEL):
            if ip:
                frames.append(ip)
    return frames
