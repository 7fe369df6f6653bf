"""Sampling callchain profiler and call-tree breakdown toolkit."""

from .analyzer import (
    AnalysisConfig,
    BreakdownTable,
    CategoryBreakdown,
    aggregate_children,
    aggregate_flat,
    analyze,
    breakdown_for_runs,
    classify,
    find_roots,
    parse_config,
)
from .calltree import (
    CallNode,
    CallTree,
    deserialize,
    ingest,
    merge,
    reverse_chain,
    self_count,
    serialize,
    share,
)
from .report import ChartSpec, emit_csv, emit_stacked_bars, emit_text_table
from .runlayout import RunMeta, discover_runs, label, layout_path
from .samples import (
    RawSample,
    SessionSpec,
    SessionSummary,
    close_session,
    open_replay,
    open_session,
    poll_samples,
)
from .symbols import FrameName, SymbolIndex, build_symbol_index, resolve

__version__ = "0.1.0"
