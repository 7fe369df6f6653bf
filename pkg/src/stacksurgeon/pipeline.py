"""Sampler -> symbolizer -> call tree, as used by ``stacksurgeon record``."""

import logging
import time
import warnings

from . import samples as sampling
from .calltree import CallTree, ingest
from .errors import NoSymbols, StackSurgeonError
from .symbols import EMPTY_INDEX, build_symbol_index, resolve

log = logging.getLogger(__name__)


class Symbolizer:
    """Per-pid symbol indexes, built on first sight of each pid."""

    def __init__(self, default=EMPTY_INDEX):
        self.default = default
        self._by_pid = {}

    def index_for(self, pid):
        if pid is None:
            return self.default
        index = self._by_pid.get(pid)
        if index is None:
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", NoSymbols)
                    index = build_symbol_index(pid)
            except StackSurgeonError:
                # process already gone; its frames stay hex
                index = self.default
            self._by_pid[pid] = index
        return index

    def names(self, sample):
        """Root-first display names for one sample."""
        chain = resolve(self.index_for(sample.pid), sample)
        return [f.display for f in reversed(chain)]


def ingest_samples(tree, batch, symbolizer):
    for sample in batch:
        ingest(tree, symbolizer.names(sample))
    return tree


def record_session(session, symbolizer, duration=None, poll_every=None, stop=None):
    """Drain ``session`` into a new tree until ``duration`` seconds pass.

    Replay sessions are drained to exhaustion and ignore ``duration``.
    On KeyboardInterrupt the samples gathered so far are kept; the summary
    comes back together with the tree and the interrupt flag.
    """
    tree = CallTree()
    interrupted = False
    try:
        if isinstance(session, sampling.ReplaySession):
            while True:
                batch = session.poll()
                if not batch:
                    break
                ingest_samples(tree, batch, symbolizer)
        else:
            interval = session.spec.interval_ms / 1000
            poll_every = poll_every or min(max(interval, 0.05), 0.5)
            deadline = None if duration is None else time.monotonic() + duration
            while deadline is None or time.monotonic() < deadline:
                if stop is not None and stop():
                    break
                time.sleep(poll_every if deadline is None
                           else max(0.0, min(poll_every, deadline - time.monotonic())))
                batch = session.poll()
                if batch.dropped:
                    log.warning("%d samples dropped (ring buffer overrun)", batch.dropped)
                ingest_samples(tree, batch, symbolizer)
    except KeyboardInterrupt:
        interrupted = True
    finally:
        if not session.closed:
            # final drain so nothing buffered is lost
            try:
                ingest_samples(tree, session.poll(), symbolizer)
            except StackSurgeonError:
                pass
        summary = session.close()
    return tree, summary, interrupted


def record_replay(path, **kwargs):
    """Tree built from a replay file, exactly as ``record --replay`` would."""
    session = sampling.open_replay(path, **kwargs)
    tree, _summary, _ = record_session(session, Symbolizer())
    return tree
