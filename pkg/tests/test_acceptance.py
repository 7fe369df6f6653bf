"""Exit criteria. Each test carries ``@acceptance(n, title)``; the terminal
summary prints one PASS/FAIL/SKIP line per criterion."""

import itertools
import random
import time

import pytest

from oracles import outermost_matches, prefix_counts, random_chains
from stacksurgeon.analyzer import AnalysisConfig, analyze, find_roots, parse_config
from stacksurgeon.calltree import build_tree, deserialize, self_count, serialize, share
from stacksurgeon.cli import main
from stacksurgeon.report import ChartSpec, emit_csv, emit_stacked_bars
from stacksurgeon.runlayout import RunMeta, discover_runs, label, layout_path

acceptance = pytest.mark.acceptance


@acceptance(1, "ingest oracle equivalence, 1,000 random chains")
def test_ingest_oracle_equivalence():
    chains = random_chains(seed=1, n=1000, alphabet=8, max_depth=12)
    assert max(map(len, chains)) <= 12
    t0 = time.perf_counter()
    tree = build_tree(chains)
    elapsed = time.perf_counter() - t0
    expected = prefix_counts(chains)
    got = {path: node.count for path, node in tree.walk()}
    assert got == dict(expected)
    assert tree.total_samples == 1000
    assert elapsed < 1.0


@acceptance(2, "parent dominance and conservation on 200 random trees")
def test_dominance_and_conservation():
    t0 = time.perf_counter()
    for seed in range(200):
        rng = random.Random(seed)
        chains = random_chains(seed=seed, n=rng.randint(1, 300), alphabet=8, max_depth=12,
                               roots=rng.randint(1, 3))
        tree = build_tree(chains)
        assert tree.total_samples == len(chains) == sum(r.count for r in tree.roots.values())
        for _path, node in tree.walk():
            kids = node.children_total()
            assert node.count >= kids
            assert self_count(node) + kids == node.count
    assert time.perf_counter() - t0 < 5.0


@acceptance(3, "share formula")
def test_share_formula():
    tree = build_tree(random_chains(seed=3, n=777))
    (root,) = tree.roots.values()
    assert share(root.count, tree.total_samples) == 100.0
    assert share(50, 200) == 25.0


@acceptance(4, "callstack.json round trip and byte-exact example")
def test_round_trip():
    assert serialize(build_tree([["a", "b"]])) == '{"a": {"count": 1, "b": {"count": 1}}}'
    for seed in range(50):
        tree = build_tree(random_chains(seed=seed, n=200, roots=1 + seed % 3))
        assert deserialize(serialize(tree)) == tree


def _random_config(rng, mode):
    names = list("abcdefgh") + ["a*", "*c", "*", "b*d"]
    return AnalysisConfig(
        root_pattern=rng.choice(list("Rabc") + ["*a*"]),
        whitelist=tuple((rng.choice(names), f"K{rng.randint(1, 4)}") for _ in range(rng.randint(0, 5))),
        blacklist=tuple(rng.choice(names) for _ in range(rng.randint(0, 3))),
        mode=mode,
    )


@acceptance(5, "analyzer conservation in children and flatten modes")
def test_analyzer_conservation():
    t0 = time.perf_counter()
    for seed in range(300):
        rng = random.Random(seed)
        tree = build_tree(random_chains(seed=seed, n=rng.randint(1, 200), alphabet=8,
                                        max_depth=12, roots=rng.randint(1, 2)))
        for mode in ("children", "flatten"):
            cfg = _random_config(rng, mode)
            b = analyze(tree, cfg)
            roots = find_roots(tree, cfg.root_pattern)
            assert b.denominator == sum(r.count for r in roots)
            assert sum(n for _c, n, _p in b.entries) + b.denied == b.denominator
            if mode == "flatten":
                for r in roots:
                    assert sum(self_count(n) for _p, n in r.walk()) == r.count
    assert time.perf_counter() - t0 < 5.0


@acceptance(6, "outermost root match, brute-force cross-check")
def test_outermost_match():
    for seed in range(300):
        rng = random.Random(seed)
        chains = [[rng.choice("ab")] + [rng.choice("abc") for _ in range(rng.randint(0, 10))]
                  for _ in range(rng.randint(1, 40))]
        tree = build_tree(chains)
        paths = dict(tree.walk())
        for pattern in ("a", "b", "c", "*", "a*"):
            roots = find_roots(tree, pattern)
            expected = outermost_matches(paths, pattern)
            assert {id(n) for n in roots} == {id(paths[p]) for p in expected}
            where = {id(n): p for p, n in paths.items()}
            rp = [where[id(n)] for n in roots]
            for p, q in itertools.permutations(rp, 2):
                assert q[:len(p)] != p  # no returned root below another


@acceptance(7, "run layout round trip, canonical path and label")
def test_layout(tmp_path):
    canonical = RunMeta("parsec-3.0", "blackscholes", 1, "AS", 3, True)
    assert layout_path(canonical) == "parsec-3.0/blackscholes/1/AtomicSimpleCPU/3GB/ruby/callstack.json"
    assert label(canonical) == "1AS3r"
    metas = [RunMeta("parsec-3.0", "blackscholes", c, cpu, m, r)
             for c, cpu, m, r in itertools.product((1, 4, 16), ("AS", "TS", "O3"),
                                                   (3, 8, 16), (True, False))]
    for meta in metas:
        p = tmp_path / layout_path(meta)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text("{}")
    found = discover_runs(tmp_path)
    assert sorted(map(repr, (m for m, _ in found))) == sorted(map(repr, metas))
    for meta, path in found:
        assert path.relative_to(tmp_path).as_posix() == layout_path(meta)


@acceptance(8, "end-to-end replay of 10,000 chains reproduces constructed shares")
def test_end_to_end_replay(tmp_path, data_dir, capsys):
    t0 = time.perf_counter()
    out = tmp_path / "callstack.json"
    assert main(["record", "--replay", str(data_dir / "e2e_10k.stacks"), "-o", str(out)]) == 0
    assert deserialize(out.read_text()).total_samples == 10_000
    capsys.readouterr()
    assert main(["analyze", str(out), "-c", str(data_dir / "e2e.conf"), "-f", "csv"]) == 0
    csv_text = capsys.readouterr().out
    # by construction: 8,000 chains under tick; 5,000 / 2,000 / 600 categorized,
    # 200 denied (pybind11), 200 ending in tick itself
    assert csv_text == (
        "label,category,count,percent\n"
        "callstack,Ruby,5000,62.50\n"
        "callstack,Cache,2000,25.00\n"
        "callstack,Stat,600,7.50\n"
        "callstack,self,200,2.50\n")
    assert time.perf_counter() - t0 < 5.0


@acceptance(9, "live fidelity: 70/30 workload within 8 points")
@pytest.mark.live
def test_live_fidelity(busyloop, tmp_path):
    from stacksurgeon.workload import WORKLOAD_CONFIG, start_busyloop

    proc = start_busyloop(busyloop, 62)
    try:
        out = tmp_path / "live.json"
        rc = main(["record", "--pid", str(proc.pid), "--interval", "10ms",
                   "--duration", "60s", "-o", str(out)])
    finally:
        proc.kill()
        proc.wait()
    assert rc == 0
    b = analyze(deserialize(out.read_text()), parse_config(WORKLOAD_CONFIG))
    a_pct, b_pct = b.percent("A"), b.percent("B")
    print(f"live shares: A={a_pct:.2f}% B={b_pct:.2f}% over {b.denominator} samples")
    assert abs(a_pct - 70) <= 8
    assert abs(b_pct - 30) <= 8


@acceptance(10, "reporter determinism and golden SVG")
def test_reporter_determinism(data_dir):
    from stacksurgeon.analyzer import breakdown_for_runs
    from stacksurgeon.calltree import CallNode, CallTree

    root = CallNode("tick", 100, {"X": CallNode("X", 60), "Y": CallNode("Y", 30)})
    table = breakdown_for_runs([("1AS3r", CallTree({"tick": root}, 100))],
                               parse_config("root tick\ncat A X\ncat B Y\n"))
    spec = ChartSpec(title="tick breakdown")
    svgs = {emit_stacked_bars(table, spec) for _ in range(3)}
    csvs = {emit_csv(table) for _ in range(3)}
    assert len(svgs) == 1 and len(csvs) == 1
    assert svgs.pop() == (data_dir / "golden_1AS3r.svg").read_bytes()
    assert csvs.pop() == "label,category,count,percent\n1AS3r,A,60,60.00\n1AS3r,B,30,30.00\n1AS3r,self,10,10.00\n"
