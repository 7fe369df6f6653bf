"""Count-annotated call tree and its ``callstack.json`` form.

Every node carries an *inclusive* count: the number of samples whose chain
passes through that position. A chain is ingested root-first and bumps the
count of every node along its path, so the root ends up holding the total
and a node's exclusive (self) count is its count minus its children's.

On disk a node is a JSON object with one ``count`` member followed by its
children keyed by name::

    {"main": {"count": 3, "simulate": {"count": 3, "tick": {"count": 2}}}}
"""

import json
import re
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Sequence, Tuple

from .errors import EmptyChain, SchemaViolation, ZeroTotal

COUNT_KEY = "count"
_ESCAPED = re.compile(r"count(#fn)*")


@dataclass
class CallNode:
    name: str
    count: int = 0
    children: Dict[str, "CallNode"] = field(default_factory=dict)

    def child(self, name: str) -> "CallNode":
        node = self.children.get(name)
        if node is None:
            node = self.children[name] = CallNode(name)
        return node

    def children_total(self) -> int:
        return sum(c.count for c in self.children.values())

    def walk(self, path=()) -> Iterator[Tuple[Tuple[str, ...], "CallNode"]]:
        """Pre-order ``(path, node)`` pairs, children in name order."""
        path = path + (self.name,)
        yield path, self
        for name in sorted(self.children):
            yield from self.children[name].walk(path)


@dataclass
class CallTree:
    roots: Dict[str, CallNode] = field(default_factory=dict)
    total_samples: int = 0

    def root(self, name: str) -> CallNode:
        node = self.roots.get(name)
        if node is None:
            node = self.roots[name] = CallNode(name)
        return node

    def walk(self) -> Iterator[Tuple[Tuple[str, ...], CallNode]]:
        for name in sorted(self.roots):
            yield from self.roots[name].walk()

    def node_at(self, path: Sequence[str]):
        """The node at ``path`` (root-first names), or None."""
        if not path:
            return None
        node = self.roots.get(path[0])
        for name in path[1:]:
            if node is None:
                return None
            node = node.children.get(name)
        return node


def reverse_chain(chain: Sequence) -> List:
    if not chain:
        raise EmptyChain("cannot reverse an empty chain")
    return list(reversed(chain))


def ingest(tree: CallTree, chain: Sequence[str]) -> CallTree:
    """Add one root-first chain, incrementing every node on its path."""
    if not chain:
        raise EmptyChain("cannot ingest an empty chain")
    node = tree.root(chain[0])
    node.count += 1
    for name in chain[1:]:
        node = node.child(name)
        node.count += 1
    tree.total_samples += 1
    return tree


def _add_into(dst: CallNode, src: CallNode):
    dst.count += src.count
    for name, child in src.children.items():
        _add_into(dst.child(name), child)


def merge(t1: CallTree, t2: CallTree) -> CallTree:
    """Node-wise sum of two trees; neither input is modified."""
    out = CallTree()
    for tree in (t1, t2):
        for name, node in tree.roots.items():
            _add_into(out.root(name), node)
        out.total_samples += tree.total_samples
    return out


def share(count: int, total_samples: int) -> float:
    """Percentage of ``total_samples`` that ``count`` represents."""
    if total_samples <= 0:
        raise ZeroTotal("total_samples must be positive")
    if not 0 <= count <= total_samples:
        raise ValueError(f"count {count} outside [0, {total_samples}]")
    return 100 * count / total_samples


def self_count(node: CallNode) -> int:
    return node.count - node.children_total()


# -- callstack.json ------------------------------------------------------------

def escape_name(name: str) -> str:
    # "count" is reserved for the sample count; a function of that name (or an
    # already-escaped lookalike) gains one "#fn" suffix
    return name + "#fn" if _ESCAPED.fullmatch(name) else name


def unescape_name(key: str) -> str:
    if _ESCAPED.fullmatch(key) and key != COUNT_KEY:
        return key[:-3]
    return key


def _to_obj(node: CallNode) -> dict:
    obj = {COUNT_KEY: node.count}
    for name in sorted(node.children):
        obj[escape_name(name)] = _to_obj(node.children[name])
    return obj


def to_dict(tree: CallTree) -> dict:
    return {escape_name(name): _to_obj(tree.roots[name]) for name in sorted(tree.roots)}


def serialize(tree: CallTree, indent=None) -> str:
    return json.dumps(to_dict(tree), indent=indent, ensure_ascii=False)


def _pairs(pairs):
    keys = [k for k, _ in pairs]
    if len(set(keys)) != len(keys):
        dup = next(k for k in keys if keys.count(k) > 1)
        raise SchemaViolation("", f"duplicate member {dup!r}")
    return dict(pairs)


def _from_obj(name: str, obj, path: str) -> CallNode:
    if not isinstance(obj, dict):
        raise SchemaViolation(path, "node must be an object")
    count = obj.get(COUNT_KEY)
    if count is None:
        raise SchemaViolation(path, "missing 'count'")
    if not isinstance(count, int) or isinstance(count, bool):
        raise SchemaViolation(path, f"'count' must be an integer, got {count!r}")
    if count < 1:
        raise SchemaViolation(path, f"'count' must be at least 1, got {count}")
    node = CallNode(name, count)
    for key, value in obj.items():
        if key == COUNT_KEY:
            continue
        child = unescape_name(key)
        node.children[child] = _from_obj(child, value, f"{path}/{key}")
    if node.children_total() > count:
        raise SchemaViolation(path, f"children counts sum to {node.children_total()}"
                              f" which exceeds count {count}")
    return node


def from_dict(data) -> CallTree:
    if not isinstance(data, dict):
        raise SchemaViolation("", "top level must be an object")
    tree = CallTree()
    for key, value in data.items():
        name = unescape_name(key)
        if key == COUNT_KEY:
            raise SchemaViolation(key, "'count' is not allowed at the top level")
        tree.roots[name] = _from_obj(name, value, key)
    tree.total_samples = sum(r.count for r in tree.roots.values())
    return tree


def deserialize(text: str) -> CallTree:
    try:
        data = json.loads(text, object_pairs_hook=_pairs)
    except json.JSONDecodeError as e:
        raise SchemaViolation("", f"invalid JSON: {e}") from None
    return from_dict(data)


def build_tree(chains) -> CallTree:
    """Ingest an iterable of root-first chains into a fresh tree."""
    tree = CallTree()
    for chain in chains:
        ingest(tree, chain)
    return tree
