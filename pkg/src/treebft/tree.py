"""Communication topologies, bin partitions and reconfiguration analytics.

A star is a height-2 tree, so one protocol engine serves both shapes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from treebft.errors import Infeasible, InsufficientBins, OutOfDomain, ShapeInfeasible


def max_faults(n: int) -> int:
    """Largest f with f <= (N-1)/3."""
    return max(0, (n - 1) // 3)


def quorum(n: int) -> int:
    return 2 * max_faults(n) + 1


@dataclass(frozen=True)
class Shape:
    height: int
    root_fanout: int

    def internal_count(self) -> int:
        """Root plus every node on levels 1..height-2."""
        return sum(self.root_fanout ** lvl for lvl in range(self.height - 1))


@dataclass(frozen=True)
class TreeConfig:
    root: int
    parent: dict = field(hash=False)
    children: dict = field(hash=False)
    height: int
    internal: frozenset

    @property
    def processes(self) -> list[int]:
        return sorted(self.children)

    @property
    def n(self) -> int:
        return len(self.children)

    def children_of(self, pid: int) -> list[int]:
        return self.children.get(pid, [])

    def parent_of(self, pid: int) -> int | None:
        return self.parent.get(pid)

    def is_leaf(self, pid: int) -> bool:
        return not self.children.get(pid)

    def depth_of(self, pid: int) -> int:
        d = 0
        while pid != self.root:
            pid = self.parent[pid]
            d += 1
        return d

    def subtree(self, pid: int) -> list[int]:
        out, stack = [], [pid]
        while stack:
            p = stack.pop()
            out.append(p)
            stack.extend(reversed(self.children.get(p, [])))
        return out

    def to_text(self) -> str:
        """Canonical adjacency form, one ``id: child,child`` line per node."""
        lines = [f"{p}: {','.join(str(c) for c in self.children[p])}".rstrip()
                 for p in sorted(self.children)]
        return "\n".join(lines) + "\n"


def _assemble(order: Sequence[int], shape: Shape) -> TreeConfig:
    n = len(order)
    h, m = shape.height, shape.root_fanout
    if h < 2:
        raise ShapeInfeasible("height must be >= 2")
    if m < 1:
        raise ShapeInfeasible("root fanout must be >= 1")
    if len(set(order)) != n:
        raise ShapeInfeasible("duplicate process ids")
    # internal levels 0..h-2 are full m-ary; the last level takes the rest
    level_sizes = [m ** lvl for lvl in range(h - 1)]
    n_internal = sum(level_sizes)
    n_leaves = n - n_internal
    if n_leaves < level_sizes[-1]:
        raise ShapeInfeasible(
            f"N={n} cannot fill a height-{h} tree with root fanout {m}: "
            f"needs at least {n_internal + level_sizes[-1]} processes")
    if h == 2 and n_leaves != m:
        raise ShapeInfeasible(f"a height-2 tree over N={n} has root fanout {n - 1}, not {m}")

    children: dict[int, list[int]] = {p: [] for p in order}
    parent: dict[int, int] = {}
    levels: list[list[int]] = []
    pos = 0
    for size in level_sizes:
        levels.append(list(order[pos:pos + size]))
        pos += size
    for lvl in range(1, len(levels)):
        for i, p in enumerate(levels[lvl]):
            par = levels[lvl - 1][i // m]
            parent[p] = par
            children[par].append(p)
    last = levels[-1]
    for i, p in enumerate(order[pos:]):
        par = last[i % len(last)]
        parent[p] = par
        children[par].append(p)
    internal = frozenset(p for p in order if children[p]) | {order[0]}
    return TreeConfig(root=order[0], parent=parent, children=children, height=h, internal=internal)


def make_balanced_tree(processes: Sequence[int], height: int, root_fanout: int) -> TreeConfig:
    """First process is the root; nodes fill breadth-first, leaves round-robin."""
    return _assemble(list(processes), Shape(height, root_fanout))


def make_star(processes: Sequence[int]) -> TreeConfig:
    procs = list(processes)
    if len(procs) < 2:
        raise ShapeInfeasible("a star needs at least 2 processes")
    return _assemble(procs, Shape(2, len(procs) - 1))


@dataclass(frozen=True)
class BinPartition:
    bins: tuple
    bin_size: int
    leftover: tuple
    processes: tuple

    def bin_for(self, k: int) -> tuple:
        return self.bins[k % len(self.bins)]


def partition_bins(processes: Sequence[int], bin_size: int, f: int) -> BinPartition:
    """Split processes into floor(N/I) disjoint bins of exactly I members."""
    procs = tuple(processes)
    if bin_size < 1:
        raise InsufficientBins("bin size must be >= 1")
    count = len(procs) // bin_size
    if count < f + 1:
        raise InsufficientBins(
            f"N={len(procs)}, I={bin_size} gives {count} bins; f={f} needs at least {f + 1}")
    bins = tuple(procs[i * bin_size:(i + 1) * bin_size] for i in range(count))
    return BinPartition(bins=bins, bin_size=bin_size, leftover=procs[count * bin_size:],
                        processes=procs)


def build(k: int, partition: BinPartition, shape: Shape) -> TreeConfig:
    """Tree number ``k`` of the evolving graph: internal nodes from bin k mod |bins|."""
    if shape.internal_count() != partition.bin_size:
        raise ShapeInfeasible(
            f"shape has {shape.internal_count()} internal slots, bins hold {partition.bin_size}")
    chosen = partition.bin_for(k)
    members = set(chosen)
    rest = [p for p in sorted(partition.processes) if p not in members]
    return _assemble(list(chosen) + rest, shape)


def is_robust(tree: TreeConfig, faults: Iterable[int]) -> bool:
    """Correct root and no faulty vertex between the root and any correct node."""
    faulty = set(faults)
    if tree.root in faulty:
        return False
    stack = [(tree.root, False)]
    while stack:
        p, cut = stack.pop()
        bad = p in faulty
        if cut and not bad:
            return False
        for c in tree.children.get(p, ()):
            stack.append((c, cut or bad))
    return True


def robust_fraction(n: int, internal: int, f: int) -> Fraction:
    """Share of internal-node assignments with no faulty internal node.

    (N-f)!(N-I)! / ((N-f-I)! N!) evaluated as a product of I ratios.
    """
    if f < 0 or internal <= 0 or internal > n or n - f < internal:
        raise OutOfDomain(f"need 0 <= f, 0 < I <= N, N-f >= I (got N={n}, I={internal}, f={f})")
    out = Fraction(1)
    for j in range(internal):
        out *= Fraction(n - f - j, n - j)
    return out


def conformity_bound_check(partition: BinPartition, shape: Shape, faults: Iterable[int]) -> int:
    """Smallest k whose tree has only correct internal nodes."""
    faulty = set(faults)
    for k in range(len(partition.bins)):
        if not faulty.intersection(build(k, partition, shape).internal):
            return k
    raise Infeasible("every bin contains a faulty process")


def plan_linear_rotation(partition: BinPartition, f: int) -> list[frozenset]:
    """Candidate internal-node sets when only f (not f+1) bins fit.

    The bins come first. If each of them held a fault, every bin holds exactly
    one and the leftovers are all correct, so the leftovers replace the first
    bin's members chunk by chunk until the faulty one is gone.
    """
    bins, left = partition.bins, list(partition.leftover)
    size = partition.bin_size
    if len(bins) < f or (len(bins) == f and f > 0 and not left):
        raise Infeasible(f"{len(bins)} bins and {len(left)} leftover processes cannot mask f={f}")
    plan = [frozenset(b) for b in bins]
    if not left:
        return plan
    base = list(bins[0])
    chunk = min(len(left), size)
    for start in range(0, size, chunk):
        cand = list(base)
        stop = min(start + chunk, size)
        cand[start:stop] = left[:stop - start]
        plan.append(frozenset(cand))
    return plan


def linear_rotation_bound(partition: BinPartition) -> int:
    left = len(partition.leftover)
    return len(partition.bins) + (math.ceil(partition.bin_size / left) if left else 0)
