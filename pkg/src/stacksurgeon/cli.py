"""Command line entry point: ``stacksurgeon record|analyze|chart``.

Exit codes: 0 ok, 1 runtime error, 2 I/O error, 64 usage error.
"""

import argparse
import logging
import os
import re
import sys
from pathlib import Path

from . import samples as sampling
from .analyzer import breakdown_for_runs, parse_config
from .calltree import deserialize, serialize
from .errors import StackSurgeonError
from .pipeline import Symbolizer, record_session
from .report import ChartSpec, color_enabled, emit_stacked_bars, render
from .runlayout import discover_runs, label, meta_from_path, natural_key

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_IO = 2
EXIT_USAGE = 64

log = logging.getLogger("stacksurgeon")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


_DURATION = re.compile(r"\s*([0-9]*\.?[0-9]+)\s*(ms|s|m)?\s*")
_UNIT_MS = {"ms": 1, "s": 1000, "m": 60000}


def duration_ms(text, default_unit="ms"):
    """``"10ms"``, ``"1.5s"``, ``"2m"``; bare numbers use ``default_unit``."""
    m = _DURATION.fullmatch(text)
    if not m:
        raise argparse.ArgumentTypeError(f"bad duration {text!r}")
    return float(m[1]) * _UNIT_MS[m[2] or default_unit]


def _seconds(text):
    return duration_ms(text, "s") / 1000


def build_parser():
    p = _Parser(prog="stacksurgeon", description="Sampling callchain profiler and "
                "call-tree breakdown tool.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    rec = sub.add_parser("record", help="sample a process and write callstack.json")
    src = rec.add_mutually_exclusive_group(required=True)
    src.add_argument("--pid", type=int)
    src.add_argument("--cgroup")
    src.add_argument("--replay", type=Path, help="collapsed-stack replay file")
    rec.add_argument("--interval", type=duration_ms, default=sampling.DEFAULT_INTERVAL_MS,
                     help="sampling interval (default 1000ms)")
    rec.add_argument("--duration", type=_seconds, default=None,
                     help="stop after this long (default: until the target exits)")
    rec.add_argument("--depth", type=int, default=sampling.DEFAULT_MAX_DEPTH,
                     help="maximum frames per callchain")
    rec.add_argument("--kernel", action="store_true", help="keep kernel frames")
    rec.add_argument("-o", "--out", type=Path, default=Path("callstack.json"))

    an = sub.add_parser("analyze", help="category breakdown of one or more trees")
    an.add_argument("trees", nargs="+", type=Path)
    an.add_argument("-c", "--config", type=Path, required=True)
    an.add_argument("-f", "--format", choices=("csv", "txt", "svg"), default="txt")
    an.add_argument("-o", "--out", type=Path)

    ch = sub.add_parser("chart", help="stacked bar chart over a runs directory")
    ch.add_argument("runs_dir", type=Path)
    ch.add_argument("-c", "--config", type=Path, required=True)
    ch.add_argument("-o", "--out", type=Path, default=Path("breakdown.svg"))
    ch.add_argument("--title", default="Execution time breakdown")
    return p


def _write(path, data):
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True)
    if isinstance(data, str):
        path.write_text(data, encoding="utf-8")
    else:
        path.write_bytes(data)


def cmd_record(args):
    symbolizer = Symbolizer()
    stop = None
    try:
        if args.replay is not None:
            session = sampling.open_replay(args.replay, max_stack_depth=args.depth,
                                           interval_ms=args.interval)
        else:
            spec = sampling.SessionSpec(pid=args.pid, cgroup=args.cgroup,
                                        interval_ms=args.interval, max_stack_depth=args.depth,
                                        include_kernel=args.kernel)
            if args.pid is not None:
                # index now, while the target is certainly alive
                symbolizer.index_for(args.pid)
                stop = lambda: not os.path.exists(f"/proc/{args.pid}/stat") or _is_zombie(args.pid)
            session = sampling.open_session(spec)
    except (StackSurgeonError, OSError) as e:
        log.error("cannot open sample source: %s", e)
        return EXIT_ERROR

    tree, summary, interrupted = record_session(session, symbolizer, args.duration, stop=stop)
    try:
        _write(args.out, serialize(tree))
    except OSError as e:
        log.error("cannot write %s: %s", args.out, e)
        return EXIT_IO
    print(f"samples: {summary.total_samples}  dropped: {summary.dropped_samples}  "
          f"wall: {summary.wall_duration:.2f}s  -> {args.out}", file=sys.stderr)
    if interrupted:
        log.warning("interrupted; partial profile written")
    return EXIT_OK


def _is_zombie(pid):
    try:
        with open(f"/proc/{pid}/stat") as fh:
            return fh.read().rsplit(")", 1)[1].split()[0] in ("Z", "X")
    except (OSError, IndexError):
        return True


def _load_config(path):
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _run_labels(paths):
    labels = []
    for p in paths:
        meta = meta_from_path(p)
        labels.append(label(meta) if meta else p.stem)
    # fall back to the full path wherever labels collide
    return [lb if labels.count(lb) == 1 else str(p) for lb, p in zip(labels, paths)]


def _emit(out, data):
    if out is None:
        sys.stdout.flush()
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    else:
        _write(out, data)


def cmd_analyze(args):
    try:
        config = _load_config(args.config)
        runs = []
        for path, lbl in zip(args.trees, _run_labels(args.trees)):
            try:
                runs.append((lbl, deserialize(path.read_text(encoding="utf-8"))))
            except StackSurgeonError as e:
                raise StackSurgeonError(f"{path}: {type(e).__name__}: {e}") from e
        table = breakdown_for_runs(runs, config)
    except FileNotFoundError as e:
        log.error("%s", e)
        return EXIT_IO
    except StackSurgeonError as e:
        log.error("%s: %s", type(e).__name__, e)
        return EXIT_ERROR
    for lbl, row in table.rows.items():
        if not row.matched_roots:
            log.warning("%s: root pattern %r matched nothing", lbl, config.root_pattern)
    color = args.out is None and args.format == "txt" and color_enabled(sys.stdout)
    data = render(table, ChartSpec(format=args.format), color)
    try:
        _emit(args.out, data)
    except OSError as e:
        log.error("cannot write output: %s", e)
        return EXIT_IO
    return EXIT_OK


def cmd_chart(args):
    skipped = []
    try:
        config = _load_config(args.config)
        found = discover_runs(args.runs_dir, skipped)
    except FileNotFoundError as e:
        log.error("%s", e)
        return EXIT_IO
    except StackSurgeonError as e:
        log.error("%s: %s", type(e).__name__, e)
        return EXIT_ERROR
    for path in skipped:
        log.warning("skipping non-conforming file %s", path)
    if not found:
        log.error("no runs found under %s", args.runs_dir)
        return EXIT_ERROR

    labels = [label(meta) for meta, _ in found]
    # runs of different applications may share a label; qualify those
    labels = [lb if labels.count(lb) == 1 else f"{m.benchmark}/{m.application}:{lb}"
              for lb, (m, _) in zip(labels, found)]
    try:
        runs = [(lb, deserialize(p.read_text(encoding="utf-8")))
                for lb, (_m, p) in sorted(zip(labels, found), key=lambda t: natural_key(t[0]))]
        table = breakdown_for_runs(runs, config)
        svg = emit_stacked_bars(table, ChartSpec(title=args.title))
    except StackSurgeonError as e:
        log.error("%s: %s", type(e).__name__, e)
        return EXIT_ERROR
    try:
        _write(args.out, svg)
    except OSError as e:
        log.error("cannot write %s: %s", args.out, e)
        return EXIT_IO
    print(f"{len(runs)} run(s) charted -> {args.out}", file=sys.stderr)
    return EXIT_OK


def _configure_logging(verbose):
    root = logging.getLogger("stacksurgeon")
    for h in list(root.handlers):
        root.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    root.propagate = False


COMMANDS = {"record": cmd_record, "analyze": cmd_analyze, "chart": cmd_chart}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(parser.format_usage().rstrip(), file=sys.stderr)
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return e.code or EXIT_OK
    _configure_logging(args.verbose)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
