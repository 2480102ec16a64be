"""Industry-space graph: maximum spanning tree plus a proximity threshold network."""

import logging
import warnings
from dataclasses import dataclass
from xml.sax.saxutils import quoteattr

import numpy as np

from .errors import InputError
from .tables import fmt, render_rows

log = logging.getLogger(__name__)

MST, THRESHOLD, BOTH = "mst", "threshold", "both"


class DisjointSet:
    def __init__(self, n):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True


def _pairs(prox):
    prox = np.asarray(prox, dtype=float)
    if prox.ndim != 2 or prox.shape[0] != prox.shape[1]:
        raise InputError("proximity matrix must be square")
    a, b = np.triu_indices(prox.shape[0], k=1)
    return prox, a, b


def max_spanning_tree(prox):
    """Kruskal maximum spanning forest over the positive-proximity edges.

    Edges are ``(a, b, prox)`` with ``a < b``.  Ties are broken by the lower
    industry index so the result is fully determined by the matrix.  A
    disconnected graph yields a spanning forest and a warning.
    """
    prox, a, b = _pairs(prox)
    w = prox[a, b]
    keep = w > 0
    a, b, w = a[keep], b[keep], w[keep]
    order = np.lexsort((b, a, -w))
    n = prox.shape[0]
    dsu = DisjointSet(n)
    edges = []
    for k in order:
        if dsu.union(int(a[k]), int(b[k])):
            edges.append((int(a[k]), int(b[k]), float(w[k])))
            if len(edges) == n - 1:
                break
    components = len({dsu.find(v) for v in range(n)})
    if components > 1:
        warnings.warn(f"proximity graph has {components} components; returning a spanning forest",
                      RuntimeWarning, stacklevel=2)
    return edges


def threshold_network(prox, threshold=0.81):
    """All industry pairs with proximity strictly above ``threshold``."""
    if not 0 <= threshold <= 1:
        raise InputError("threshold must lie in [0, 1]")
    prox, a, b = _pairs(prox)
    w = prox[a, b]
    keep = w > threshold
    return [(int(x), int(y), float(v)) for x, y, v in zip(a[keep], b[keep], w[keep])]


@dataclass(frozen=True)
class IndustrySpaceGraph:
    """Superposed industry space.

    ``edges`` holds ``(a, b, prox, origin)`` with ``a < b`` sorted by node
    index; origin is ``mst``, ``threshold`` or ``both``.
    """

    industries: tuple
    sizes: tuple
    edges: tuple

    @property
    def n_nodes(self):
        return len(self.industries)

    def adjacency(self):
        g = np.zeros((self.n_nodes, self.n_nodes), dtype=bool)
        for a, b, _, _ in self.edges:
            g[a, b] = g[b, a] = True
        return g

    def degree(self):
        return self.adjacency().sum(axis=1)

    def is_connected(self):
        dsu = DisjointSet(self.n_nodes)
        for a, b, _, _ in self.edges:
            dsu.union(a, b)
        return len({dsu.find(v) for v in range(self.n_nodes)}) <= 1

    def edge_table(self):
        rows = [(self.industries[a].code, self.industries[b].code, prox, origin)
                for a, b, prox, origin in self.edges]
        return render_rows(["source", "target", "phi", "origin"], rows)

    def graphml(self):
        """GraphML document with node size and sector attributes."""
        lines = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            '<graphml xmlns="http://graphml.graphdrawing.org/xmlns">',
            '  <key id="label" for="node" attr.name="label" attr.type="string"/>',
            '  <key id="sector" for="node" attr.name="sector" attr.type="string"/>',
            '  <key id="size" for="node" attr.name="size" attr.type="int"/>',
            '  <key id="phi" for="edge" attr.name="phi" attr.type="double"/>',
            '  <key id="origin" for="edge" attr.name="origin" attr.type="string"/>',
            '  <graph id="industry_space" edgedefault="undirected">',
        ]
        for code, size in zip(self.industries, self.sizes):
            lines += [
                f"    <node id={quoteattr(code.code)}>",
                f"      <data key=\"label\">{_xml_text(code.name or code.code)}</data>",
                f"      <data key=\"sector\">{code.sector}</data>",
                f"      <data key=\"size\">{int(size)}</data>",
                "    </node>",
            ]
        for k, (a, b, prox, origin) in enumerate(self.edges):
            lines += [
                f"    <edge id=\"e{k}\" source={quoteattr(self.industries[a].code)} "
                f"target={quoteattr(self.industries[b].code)}>",
                f"      <data key=\"phi\">{fmt(prox)}</data>",
                f"      <data key=\"origin\">{origin}</data>",
                "    </edge>",
            ]
        lines += ["  </graph>", "</graphml>", ""]
        return "\n".join(lines)


def _xml_text(s):
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def superpose(mst_edges, threshold_edges, industries, sizes):
    """Union of both edge sets with origin tags."""
    merged = {}
    for a, b, prox in mst_edges:
        merged[(min(a, b), max(a, b))] = [prox, MST]
    for a, b, prox in threshold_edges:
        key = (min(a, b), max(a, b))
        if key in merged:
            merged[key][1] = BOTH
        else:
            merged[key] = [prox, THRESHOLD]
    if len(sizes) != len(industries):
        raise InputError("one size per industry required")
    edges = tuple((a, b, float(prox), origin) for (a, b), (prox, origin) in sorted(merged.items()))
    return IndustrySpaceGraph(tuple(industries), tuple(int(s) for s in sizes), edges)


def build_industry_space(prox, industries, sizes, threshold=0.81):
    tree = max_spanning_tree(prox)
    thr = threshold_network(prox, threshold)
    graph = superpose(tree, thr, industries, sizes)
    log.info("industry space: %d tree edges, %d threshold edges, %d combined",
             len(tree), len(thr), len(graph.edges))
    return graph
