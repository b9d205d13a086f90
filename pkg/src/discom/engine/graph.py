"""Cell dependency graph: edges run precedent -> dependent.

Cycle members are found by SCC decomposition (component of size >= 2, or a
self-reference); the cached topological order covers the remaining formula
cells with a deterministic row-major tie-break so every replica recomputes
in the same order.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from itertools import count
from typing import Iterable, Mapping

from discom.engine.ast import references
from discom.model.address import CellAddress
from discom.model.workbook import FormulaContent, Workbook


@dataclass(frozen=True)
class DepGraph:
    dependents: Mapping[CellAddress, frozenset[CellAddress]]  # precedent -> dependents
    precedents: Mapping[CellAddress, frozenset[CellAddress]]  # formula cell -> cells it reads
    cycle_cells: frozenset[CellAddress]
    topo_order: tuple[CellAddress, ...]  # formula cells not on cycles
    edges: int = field(default=0)

    def dependents_of(self, addr: CellAddress) -> frozenset[CellAddress]:
        return self.dependents.get(addr, frozenset())

    def downstream(self, seeds: Iterable[CellAddress]) -> set[CellAddress]:
        """Transitive dependents of the seed cells (seeds excluded unless
        reachable from another seed)."""
        out: set[CellAddress] = set()
        stack = list(seeds)
        while stack:
            node = stack.pop()
            for dep in self.dependents.get(node, ()):  # only formula cells appear
                if dep not in out:
                    out.add(dep)
                    stack.append(dep)
        return out


def canonical_address(wb: Workbook, addr: CellAddress,
                      sheet_map: Mapping[str, str] | None = None) -> CellAddress:
    """Rewrite the sheet part to the workbook's canonical spelling; an
    address on a missing sheet is returned unchanged."""
    if sheet_map is None:
        sheet_map = {s.name.casefold(): s.name for s in wb.sheets}
    canon = sheet_map.get(addr.sheet.casefold())
    if canon is None or canon == addr.sheet:
        return addr
    return CellAddress(canon, addr.col, addr.row)


def build_dep_graph(wb: Workbook) -> DepGraph:
    sheet_map = {s.name.casefold(): s.name for s in wb.sheets}
    precedents: dict[CellAddress, frozenset[CellAddress]] = {}
    dependents: dict[CellAddress, set[CellAddress]] = {}
    edge_count = 0
    for addr, cell in wb.iter_cells():
        if not isinstance(cell.content, FormulaContent):
            continue
        refs = frozenset(canonical_address(wb, r, sheet_map)
                         for r in references(cell.content.ast))
        precedents[addr] = refs
        edge_count += len(refs)
        for p in refs:
            dependents.setdefault(p, set()).add(addr)

    formula_cells = set(precedents)
    sccs = strongly_connected(sorted(formula_cells, key=lambda a: a.sort_key),
                               lambda n: dependents.get(n, ()))
    cycle: set[CellAddress] = set()
    for comp in sccs:
        if len(comp) > 1:
            cycle.update(comp)
        elif comp[0] in precedents[comp[0]]:
            cycle.add(comp[0])

    order = _topo_order(formula_cells - cycle, precedents, dependents, cycle)
    return DepGraph(
        dependents={p: frozenset(d) for p, d in dependents.items()},
        precedents=precedents,
        cycle_cells=frozenset(cycle),
        topo_order=tuple(order),
        edges=edge_count,
    )


def strongly_connected(nodes, successors) -> list[list]:
    """Iterative Tarjan over any hashable nodes."""
    index: dict[CellAddress, int] = {}
    lowlink: dict[CellAddress, int] = {}
    on_stack: set[CellAddress] = set()
    stack: list[CellAddress] = []
    components: list[list[CellAddress]] = []
    counter = count()

    for root in nodes:
        if root in index:
            continue
        index[root] = lowlink[root] = next(counter)
        stack.append(root)
        on_stack.add(root)
        work = [(root, iter(successors(root)))]
        while work:
            node, succ_iter = work[-1]
            advanced = False
            for succ in succ_iter:
                if succ not in index:
                    index[succ] = lowlink[succ] = next(counter)
                    stack.append(succ)
                    on_stack.add(succ)
                    work.append((succ, iter(successors(succ))))
                    advanced = True
                    break
                if succ in on_stack:
                    lowlink[node] = min(lowlink[node], index[succ])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[node])
            if lowlink[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == node:
                        break
                components.append(comp)
    return components


def _topo_order(nodes: set[CellAddress],
                precedents: Mapping[CellAddress, frozenset[CellAddress]],
                dependents: Mapping[CellAddress, set[CellAddress]],
                cycle: set[CellAddress]) -> list[CellAddress]:
    indegree: dict[CellAddress, int] = {}
    for n in nodes:
        indegree[n] = sum(1 for p in precedents[n] if p in nodes)
    ready = [(n.sort_key, n) for n, deg in indegree.items() if deg == 0]
    heapq.heapify(ready)
    order: list[CellAddress] = []
    while ready:
        _, node = heapq.heappop(ready)
        order.append(node)
        for dep in dependents.get(node, ()):
            if dep in indegree and dep not in cycle:
                indegree[dep] -= 1
                if indegree[dep] == 0:
                    heapq.heappush(ready, (dep.sort_key, dep))
    # cycle descendants were excluded up front; everything off-cycle must order
    assert len(order) == len(nodes), "topological order missed off-cycle cells"
    return order
