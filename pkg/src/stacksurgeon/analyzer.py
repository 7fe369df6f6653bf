"""Config-driven category breakdowns over a call tree.

A config anchors the analysis at every outermost occurrence of a root
function, then attributes samples below it to categories:

* ``children`` mode classifies each direct child of a matched root and
  credits it with the child's inclusive count;
* ``flatten`` mode visits every node under a matched root and credits the
  node's self count to the category of its own name.

The matched roots' own self time lands in the reserved ``self`` category,
so in both modes categories + denied + uncategorized + self always add up
to the denominator (the summed counts of the matched roots).
"""

import functools
import logging
import re
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Tuple

from .calltree import CallNode, CallTree, self_count
from .errors import ConfigSyntaxError, DuplicateLabel, MissingRoot, UncategorizedFound

log = logging.getLogger(__name__)

SELF = "self"
UNCATEGORIZED = "uncategorized"
RESERVED = (SELF, UNCATEGORIZED)

MODES = ("children", "flatten")
POLICIES = ("bucket", "error")


@functools.lru_cache(maxsize=4096)
def _compile(pattern: str):
    return re.compile(".*".join(re.escape(part) for part in pattern.split("*")), re.DOTALL)


def match(pattern: str, name: str) -> bool:
    """Whole-name match where ``*`` stands for any run of characters."""
    return _compile(pattern).fullmatch(name) is not None


@dataclass(frozen=True)
class AnalysisConfig:
    root_pattern: str
    whitelist: Tuple[Tuple[str, str], ...] = ()  # (pattern, category)
    blacklist: Tuple[str, ...] = ()
    mode: str = "children"
    uncategorized_policy: str = "bucket"

    def __post_init__(self):
        if not self.root_pattern:
            raise MissingRoot()
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.uncategorized_policy not in POLICIES:
            raise ValueError(f"uncategorized policy must be one of {POLICIES}")
        for _pattern, category in self.whitelist:
            if not category or category in RESERVED:
                raise ValueError(f"invalid category name {category!r}")

    @property
    def categories(self) -> List[str]:
        """Whitelist categories in order of first appearance."""
        return list(dict.fromkeys(c for _p, c in self.whitelist))


def parse_config(text: str) -> AnalysisConfig:
    """Parse the line-oriented config format.

    Directives: ``root <pattern>``, ``cat <category> <pattern>``,
    ``deny <pattern>``, ``mode children|flatten``,
    ``uncategorized bucket|error``; ``#`` starts a comment line.
    """
    root = None
    whitelist = []
    blacklist = []
    mode = "children"
    policy = "bucket"
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        directive, _, rest = line.partition(" ")
        rest = rest.strip()
        if directive == "root":
            if not rest:
                raise ConfigSyntaxError(lineno, "root needs a pattern")
            if root is not None:
                raise ConfigSyntaxError(lineno, "root given more than once")
            root = rest
        elif directive == "cat":
            category, _, pattern = rest.partition(" ")
            pattern = pattern.strip()
            if not category or not pattern:
                raise ConfigSyntaxError(lineno, "expected: cat <category> <pattern>")
            if category in RESERVED:
                raise ConfigSyntaxError(lineno, f"category name {category!r} is reserved")
            whitelist.append((pattern, category))
        elif directive == "deny":
            if not rest:
                raise ConfigSyntaxError(lineno, "deny needs a pattern")
            blacklist.append(rest)
        elif directive == "mode":
            if rest not in MODES:
                raise ConfigSyntaxError(lineno, f"mode must be one of {', '.join(MODES)}")
            mode = rest
        elif directive == "uncategorized":
            if rest not in POLICIES:
                raise ConfigSyntaxError(lineno, f"policy must be one of {', '.join(POLICIES)}")
            policy = rest
        else:
            raise ConfigSyntaxError(lineno, f"unknown directive {directive!r}")
    if root is None:
        raise MissingRoot()
    return AnalysisConfig(root, tuple(whitelist), tuple(blacklist), mode, policy)


class Verdict(NamedTuple):
    kind: str  # "category" | "denied" | "uncategorized"
    category: Optional[str] = None


DENIED = Verdict("denied")
UNMATCHED = Verdict("uncategorized")


def classify(name: str, config: AnalysisConfig) -> Verdict:
    if any(match(p, name) for p in config.blacklist):
        return DENIED
    for pattern, category in config.whitelist:
        if match(pattern, name):
            return Verdict("category", category)
    return UNMATCHED


def find_roots(tree: CallTree, pattern: str) -> List[CallNode]:
    """Outermost nodes whose name matches ``pattern``, in pre-order."""
    found = []

    def visit(node):
        if match(pattern, node.name):
            found.append(node)
            return
        for name in sorted(node.children):
            visit(node.children[name])

    for name in sorted(tree.roots):
        visit(tree.roots[name])
    return found


@dataclass
class CategoryBreakdown:
    entries: List[Tuple[str, int, float]]
    denominator: int
    matched_roots: int
    denied: int = 0
    uncategorized_names: List[str] = field(default_factory=list)

    def as_dict(self) -> Dict[str, Tuple[int, float]]:
        return {c: (n, p) for c, n, p in self.entries}

    def count(self, category: str) -> int:
        return self.as_dict().get(category, (0, 0.0))[0]

    def percent(self, category: str) -> float:
        return self.as_dict().get(category, (0, 0.0))[1]


def _pct(count, denominator):
    return 100 * count / denominator if denominator else 0.0


def _finish(counts, self_total, denominator, roots, denied, unmatched, config):
    if unmatched and config.uncategorized_policy == "error":
        raise UncategorizedFound(unmatched)
    if unmatched:
        log.warning("uncategorized functions: %s", ", ".join(sorted(set(unmatched))))
    entries = []
    for category in config.categories:
        if counts.get(category):
            entries.append((category, counts[category], _pct(counts[category], denominator)))
    if counts.get(UNCATEGORIZED):
        n = counts[UNCATEGORIZED]
        entries.append((UNCATEGORIZED, n, _pct(n, denominator)))
    entries.append((SELF, self_total, _pct(self_total, denominator)))
    return CategoryBreakdown(entries, denominator, len(roots), denied,
                             sorted(set(unmatched)))


def _credit(name, n, config, counts, unmatched):
    """Add ``n`` samples for ``name``; returns the amount denied."""
    verdict = classify(name, config)
    if verdict is DENIED:
        return n
    if verdict.kind == "category":
        counts[verdict.category] = counts.get(verdict.category, 0) + n
    else:
        counts[UNCATEGORIZED] = counts.get(UNCATEGORIZED, 0) + n
        unmatched.append(name)
    return 0


def aggregate_children(tree: CallTree, config: AnalysisConfig) -> CategoryBreakdown:
    roots = find_roots(tree, config.root_pattern)
    counts: Dict[str, int] = {}
    unmatched: List[str] = []
    denied = self_total = 0
    for root in roots:
        self_total += self_count(root)
        for name in sorted(root.children):
            denied += _credit(name, root.children[name].count, config, counts, unmatched)
    denominator = sum(r.count for r in roots)
    return _finish(counts, self_total, denominator, roots, denied, unmatched, config)


def aggregate_flat(tree: CallTree, config: AnalysisConfig) -> CategoryBreakdown:
    roots = find_roots(tree, config.root_pattern)
    counts: Dict[str, int] = {}
    unmatched: List[str] = []
    denied = self_total = 0
    for root in roots:
        self_total += self_count(root)
        stack = [root.children[n] for n in sorted(root.children, reverse=True)]
        while stack:
            node = stack.pop()
            n = self_count(node)
            if n:
                denied += _credit(node.name, n, config, counts, unmatched)
            stack.extend(node.children[c] for c in sorted(node.children, reverse=True))
    denominator = sum(r.count for r in roots)
    return _finish(counts, self_total, denominator, roots, denied, unmatched, config)


def analyze(tree: CallTree, config: AnalysisConfig) -> CategoryBreakdown:
    if config.mode == "flatten":
        return aggregate_flat(tree, config)
    return aggregate_children(tree, config)


@dataclass
class BreakdownTable:
    """Per-run breakdowns sharing one category order."""

    categories: List[str]
    rows: Dict[str, CategoryBreakdown]

    def __len__(self):
        return len(self.rows)


def pad(breakdown: CategoryBreakdown, categories: List[str]) -> CategoryBreakdown:
    have = breakdown.as_dict()
    entries = [(c, *have.get(c, (0, 0.0))) for c in categories]
    return CategoryBreakdown(entries, breakdown.denominator, breakdown.matched_roots,
                             breakdown.denied, list(breakdown.uncategorized_names))


def category_order(config: AnalysisConfig, breakdowns) -> List[str]:
    present = {c for b in breakdowns for c, _n, _p in b.entries}
    order = [c for c in config.categories if c in present]
    if UNCATEGORIZED in present:
        order.append(UNCATEGORIZED)
    order.append(SELF)
    return order


def breakdown_for_runs(runs, config: AnalysisConfig) -> BreakdownTable:
    """Analyze each ``(label, tree)`` pair and align their categories."""
    results = {}
    for label, tree in runs:
        if label in results:
            raise DuplicateLabel(label)
        results[label] = analyze(tree, config)
    order = category_order(config, results.values())
    return BreakdownTable(order, {label: pad(b, order) for label, b in results.items()})
