import os
import subprocess
import sys

import pytest
from hypothesis import given, strategies as st

from stacksurgeon import perf
from stacksurgeon.errors import InvalidSession, MalformedReplay, SessionClosed, TargetNotFound
from stacksurgeon.samples import (
    RawSample,
    SessionSpec,
    close_session,
    open_replay,
    open_session,
    parse_replay,
    poll_samples,
)


def write(tmp_path, text, name="x.stacks"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestSessionSpec:
    def test_default_interval_is_one_second(self):
        assert SessionSpec(pid=1).interval_ms == 1000

    def test_zero_interval_rejected(self):
        with pytest.raises(InvalidSession):
            SessionSpec(pid=1, interval_ms=0)

    def test_needs_exactly_one_target(self):
        with pytest.raises(InvalidSession):
            SessionSpec()
        with pytest.raises(InvalidSession):
            SessionSpec(pid=1, cgroup="/sys/fs/cgroup/x")

    def test_depth_at_least_two(self):
        with pytest.raises(InvalidSession):
            SessionSpec(pid=1, max_stack_depth=1)


def test_raw_sample_needs_frames():
    with pytest.raises(ValueError):
        RawSample((), 0)


class TestReplay:
    def test_two_lines_become_leaf_first_samples(self, tmp_path):
        session = open_replay(write(tmp_path, "a;b;c\na;d\n"))
        got = poll_samples(session)
        assert [s.frames for s in got] == [("c", "b", "a"), ("d", "a")]

    def test_empty_file(self, tmp_path):
        session = open_replay(write(tmp_path, ""))
        assert poll_samples(session) == []
        assert close_session(session).total_samples == 0

    def test_empty_frame_is_malformed(self, tmp_path):
        with pytest.raises(MalformedReplay) as exc:
            open_replay(write(tmp_path, "# c\na;b\na;;c\n"))
        assert exc.value.line == 3

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            open_replay(tmp_path / "nope.stacks")

    def test_three_chains_in_file_order(self, data_dir):
        session = open_replay(data_dir / "three.stacks")
        got = poll_samples(session)
        assert [s.frames for s in got] == [
            ("tick", "simulate", "main"),
            (0x1010, "simulate", "main"),
            ("helper", "main"),
        ]
        assert poll_samples(session) == []
        summary = close_session(session)
        assert (summary.total_samples, summary.dropped_samples) == (3, 0)

    def test_repeat_count_and_comments(self, tmp_path):
        got = parse_replay("# header\nmain;f 3\n\nmain;g\n")
        assert [s.frames for s in got] == [("f", "main")] * 3 + [("g", "main")]

    def test_zero_repeat_count_is_malformed(self):
        with pytest.raises(MalformedReplay):
            parse_replay("a;b 0\n")

    def test_names_with_spaces_survive(self):
        (s,) = parse_replay("main;operator new(unsigned long)\n")
        assert s.frames == ("operator new(unsigned long)", "main")

    def test_truncation_keeps_leaf_end(self):
        (s,) = parse_replay("a;b;c;d;e\n", max_stack_depth=3)
        assert s.frames == ("e", "d", "c") and s.truncated
        (s,) = parse_replay("a;b;c\n", max_stack_depth=3)
        assert not s.truncated

    def test_timestamps_monotone(self, tmp_path):
        session = open_replay(write(tmp_path, "a;b 5\na;c 5\n"), interval_ms=10)
        ts = [s.timestamp for s in poll_samples(session)]
        assert ts == sorted(ts) and ts[1] - ts[0] == 10_000_000

    def test_batches_drain_completely(self, tmp_path):
        path = write(tmp_path, "a;b 4\na;c 3\n")
        whole = poll_samples(open_replay(path))
        session = open_replay(path, batch=3)
        parts = []
        while batch := poll_samples(session):
            assert len(batch) <= 3
            parts.extend(batch)
        assert parts == whole
        assert close_session(session).total_samples == len(whole)

    def test_double_close_is_idempotent(self, tmp_path):
        session = open_replay(write(tmp_path, "a;b\n"))
        poll_samples(session)
        first = close_session(session)
        assert close_session(session) == first

    def test_poll_after_close(self, tmp_path):
        session = open_replay(write(tmp_path, "a\n"))
        close_session(session)
        with pytest.raises(SessionClosed):
            poll_samples(session)


names = st.text(alphabet="abcxyz:_<>", min_size=1, max_size=6).filter(lambda s: not s.startswith("0x"))
chains = st.lists(st.lists(names, min_size=1, max_size=8), max_size=30)


@given(chains)
def test_replay_is_deterministic_and_exact(chains):
    text = "".join(";".join(c) + "\n" for c in chains)
    a, b = parse_replay(text), parse_replay(text)
    assert a == b
    assert [list(reversed(s.frames)) for s in a] == chains
    assert all(len(s.frames) <= 127 for s in a)


# -- live backend -------------------------------------------------------------

def test_user_frames_strip_markers():
    ips = [perf.PERF_CONTEXT_KERNEL, 0xffff1, perf.PERF_CONTEXT_USER, 0x10, 0x20]
    assert perf.user_frames(ips) == [0x10, 0x20]
    assert perf.user_frames(ips, include_kernel=True) == [0xffff1, 0x10, 0x20]


def test_attr_layout():
    attr = perf.build_attr(perf.PERF_COUNT_SW_TASK_CLOCK, 10_000_000, 64)
    assert len(attr) == perf.ATTR_SIZE
    import struct
    type_, size, config, period = struct.unpack_from("<IIQQ", attr, 0)
    assert (type_, size, config, period) == (1, 128, 1, 10_000_000)
    flags = struct.unpack_from("<Q", attr, 40)[0]
    assert flags & (1 << 5)  # exclude_kernel by default
    assert not flags & (1 << 1)  # no inherit: inherited per-task events cannot be mmapped


@pytest.mark.skipif(not sys.platform.startswith("linux"), reason="linux only")
def test_missing_pid_is_target_not_found():
    with pytest.raises(TargetNotFound):
        open_session(SessionSpec(pid=2**22 + 12345))


@pytest.mark.skipif(not sys.platform.startswith("linux"), reason="linux only")
def test_missing_cgroup_is_target_not_found(tmp_path):
    with pytest.raises(TargetNotFound):
        open_session(SessionSpec(cgroup=str(tmp_path / "no-such-cgroup")))


@pytest.mark.live
def test_live_poll_before_any_interval_is_empty(busyloop):
    proc = subprocess.Popen(["sleep", "5"])
    try:
        session = open_session(SessionSpec(pid=proc.pid, interval_ms=1000))
        assert poll_samples(session) == []
        summary = close_session(session)
        assert summary.total_samples == 0 and summary.dropped_samples == 0
    finally:
        proc.kill()
        proc.wait()


@pytest.mark.live
def test_live_samples_are_bounded_and_monotone(busyloop):
    from stacksurgeon.workload import start_busyloop

    proc = start_busyloop(busyloop, 3)
    try:
        session = open_session(SessionSpec(pid=proc.pid, interval_ms=10, max_stack_depth=3))
        import time
        collected = []
        for _ in range(10):
            time.sleep(0.1)
            collected.extend(poll_samples(session))
        summary = close_session(session)
    finally:
        proc.kill()
        proc.wait()
    assert collected
    assert summary.total_samples == len(collected)
    ts = [s.timestamp for s in collected]
    assert ts == sorted(ts)
    assert all(1 <= len(s.frames) <= 3 for s in collected)
    # burn <- spin_x <- run_workload <- main: cut at 3 frames
    assert any(s.truncated for s in collected)
    assert all(s.pid == proc.pid for s in collected)


@pytest.mark.live
def test_live_sample_rate_at_100ms(busyloop):
    """A fully busy target at 100 ms sampling yields ~10 samples per second."""
    from stacksurgeon.workload import start_busyloop

    proc = start_busyloop(busyloop, 7)
    try:
        import time
        session = open_session(SessionSpec(pid=proc.pid, interval_ms=100))
        time.sleep(6)
        n = len(poll_samples(session))
        close_session(session)
    finally:
        proc.kill()
        proc.wait()
    assert abs(n - 60) <= 60 * 0.05
