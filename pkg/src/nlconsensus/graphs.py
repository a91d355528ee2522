"""Simple undirected connected graphs and their induced-subgraph decompositions.

Graphs are immutable: the edge set is fixed at construction and every matrix
accessor returns a read-only array. Vertices are 0-indexed.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BadSize,
    Disconnected,
    EmptySubset,
    IndexOutOfRange,
    InducedDisconnected,
    IsolatedVertex,
    SelfLoop,
    UnknownTopology,
)

TOPOLOGIES = ("line", "ring", "star", "complete", "complete_bipartite", "karate")
KARATE_SIZE = 34


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph on vertices ``0 .. n-1``.

    Use :func:`from_edge_list` or :func:`builtin` to build one; both validate
    the graph (no self-loops, no isolated vertex, connected).
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    name: str = "custom"

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and self.edges == other.edges

    def __hash__(self):
        return hash((self.n, self.edges))

    def __repr__(self):
        return f"Graph(name={self.name!r}, n={self.n}, m={len(self.edges)})"

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        if self.edges:
            i, j = np.array(self.edges).T
            a[i, j] = 1.0
            a[j, i] = 1.0
        return _readonly(a)

    @cached_property
    def degrees(self) -> np.ndarray:
        return _readonly(self.adjacency.sum(axis=1))

    @cached_property
    def laplacian(self) -> np.ndarray:
        return _readonly(np.diag(self.degrees) - self.adjacency)

    @cached_property
    def transition(self) -> np.ndarray:
        """Row-stochastic matrix ``D^-1 A``."""
        return _readonly(self.adjacency / self.degrees[:, None])

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[i])

    def to_dict(self) -> dict:
        return {"n": self.n, "name": self.name, "edges": [list(e) for e in self.edges]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _canonical_edges(edges: Iterable[Sequence[int]], n: int) -> tuple[tuple[int, int], ...]:
    out = set()
    for e in edges:
        i, j = int(e[0]), int(e[1])
        if not (0 <= i < n and 0 <= j < n):
            raise IndexOutOfRange(f"edge ({i}, {j}) outside [0, {n})")
        if i == j:
            raise SelfLoop(f"self-loop at vertex {i}")
        out.add((min(i, j), max(i, j)))
    return tuple(sorted(out))


def from_edge_list(edges: Iterable[Sequence[int]], n: int, *, name: str = "custom",
                   validate: bool = True) -> Graph:
    """Build a graph from vertex pairs; duplicates and reversed pairs collapse.

    ``validate=False`` skips the isolated-vertex and connectivity checks (self
    loops and bad indices are always rejected). It exists so that tests can
    build deliberately invalid graphs.
    """
    if n < 1:
        raise BadSize(f"vertex count must be positive, got {n}")
    g = Graph(int(n), _canonical_edges(edges, n), name)
    if validate:
        isolated = np.flatnonzero(g.degrees == 0)
        if isolated.size:
            raise IsolatedVertex(f"isolated vertices: {isolated.tolist()}")
        if not is_connected(g):
            raise Disconnected(f"graph {name!r} is not connected")
    return g


def is_connected(g: Graph) -> bool:
    """Breadth-first search from vertex 0 reaches every vertex."""
    if g.n == 0:
        return True
    seen = np.zeros(g.n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    adj = g.adjacency
    while queue:
        i = queue.popleft()
        for j in np.flatnonzero(adj[i]):
            if not seen[j]:
                seen[j] = True
                queue.append(j)
    return bool(seen.all())


def _karate_edges() -> list[tuple[int, int]]:
    text = resources.files("nlconsensus.data").joinpath("karate.edges").read_text()
    return parse_edge_text(text)


def karate_partition() -> np.ndarray:
    """Faction label per vertex: 0 = group of vertex 0, 1 = group of vertex 33."""
    text = resources.files("nlconsensus.data").joinpath("karate.partition").read_text()
    return parse_partition_text(text, KARATE_SIZE)


def karate_factions() -> tuple[tuple[int, ...], tuple[int, ...]]:
    labels = karate_partition()
    return (tuple(np.flatnonzero(labels == 0).tolist()),
            tuple(np.flatnonzero(labels == 1).tolist()))


def builtin(topology: str, n: int | Sequence[int] | None = None) -> Graph:
    """Canonical deterministic graphs.

    ``complete_bipartite`` takes ``n=(p, q)``; ``karate`` ignores ``n`` unless it
    is given, in which case it must be 34.
    """
    if topology not in TOPOLOGIES:
        raise UnknownTopology(f"unknown topology {topology!r}; expected one of {TOPOLOGIES}")
    if topology == "karate":
        if n is not None and n != KARATE_SIZE:
            raise BadSize(f"karate has {KARATE_SIZE} vertices, got n={n}")
        return from_edge_list(_karate_edges(), KARATE_SIZE, name="karate")
    if topology == "complete_bipartite":
        try:
            p, q = (int(v) for v in n)
        except TypeError:
            raise BadSize("complete_bipartite needs n=(p, q)") from None
        if p < 1 or q < 1:
            raise BadSize(f"complete_bipartite sides must be positive, got {(p, q)}")
        edges = [(i, p + j) for i in range(p) for j in range(q)]
        return from_edge_list(edges, p + q, name=f"complete_bipartite({p},{q})")
    if n is None or isinstance(n, (tuple, list)):
        raise BadSize(f"{topology} needs an integer size")
    n = int(n)
    minimum = 3 if topology == "ring" else 2
    if n < minimum:
        raise BadSize(f"{topology} needs n >= {minimum}, got {n}")
    if topology == "line":
        edges = [(i, i + 1) for i in range(n - 1)]
    elif topology == "ring":
        edges = [(i, (i + 1) % n) for i in range(n)]
    elif topology == "star":
        edges = [(0, i) for i in range(1, n)]
    else:
        edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    return from_edge_list(edges, n, name=f"{topology}({n})")


def random_connected(n: int, p: float, rng: np.random.Generator, max_tries: int = 1000) -> Graph:
    """Erdős–Rényi G(n, p) resampled until connected."""
    iu = np.triu_indices(n, k=1)
    for _ in range(max_tries):
        mask = rng.random(iu[0].size) < p
        g = from_edge_list(zip(iu[0][mask], iu[1][mask]), n, name=f"gnp({n},{p})",
                           validate=False)
        if g.degrees.min() > 0 and is_connected(g):
            return g
    raise Disconnected(f"no connected G({n}, {p}) sample in {max_tries} tries")


def from_spec(spec: str) -> Graph:
    """Parse ``line:5``, ``complete_bipartite:2,3``, ``karate`` or an edge-list path."""
    name, _, arg = spec.partition(":")
    if name in TOPOLOGIES:
        if name == "karate":
            return builtin("karate")
        if not arg:
            raise BadSize(f"graph spec {spec!r} is missing a size")
        if name == "complete_bipartite":
            return builtin(name, tuple(int(v) for v in arg.replace("x", ",").split(",")))
        return builtin(name, int(arg))
    path = Path(spec)
    if path.exists():
        return read_edge_list(path)
    raise UnknownTopology(f"{spec!r} is neither a built-in topology nor an existing file")


# --- edge-list and partition text formats ---------------------------------

def _data_lines(text: str):
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line


def parse_edge_text(text: str) -> list[tuple[int, int]]:
    edges = []
    for line in _data_lines(text):
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"edge line must hold two integers: {line!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return edges


def read_edge_list(path: str | Path, n: int | None = None) -> Graph:
    """Whitespace-separated 0-indexed pairs, one per line, ``#`` comments.

    Without ``n`` the vertex count is one plus the largest index.
    """
    path = Path(path)
    edges = parse_edge_text(path.read_text())
    if n is None:
        n = 1 + max(max(e) for e in edges) if edges else 0
    return from_edge_list(edges, n, name=path.stem)


def write_edge_list(g: Graph, path: str | Path) -> None:
    lines = [f"# {g.name}: n={g.n} m={g.m}"] + [f"{i} {j}" for i, j in g.edges]
    Path(path).write_text("\n".join(lines) + "\n")


def parse_partition_text(text: str, n: int | None = None) -> np.ndarray:
    pairs = []
    for line in _data_lines(text):
        v, lab = line.split()
        pairs.append((int(v), int(lab)))
    size = n if n is not None else 1 + max(v for v, _ in pairs)
    labels = np.full(size, -1, dtype=int)
    for v, lab in pairs:
        if not 0 <= v < size:
            raise IndexOutOfRange(f"partition vertex {v} outside [0, {size})")
        labels[v] = lab
    if (labels < 0).any():
        raise ValueError(f"partition leaves vertices unlabeled: {np.flatnonzero(labels < 0).tolist()}")
    return labels


def read_partition(path: str | Path, n: int | None = None) -> np.ndarray:
    return parse_partition_text(Path(path).read_text(), n)


def clusters_from_labels(labels: np.ndarray) -> list[tuple[int, ...]]:
    return [tuple(np.flatnonzero(labels == lab).tolist()) for lab in np.unique(labels)]


def graph_from_json(text: str) -> Graph:
    data = json.loads(text)
    return from_edge_list(data["edges"], data["n"], name=data.get("name", "custom"))


# --- induced subgraphs -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class SubgraphDecomposition:
    """Internal/external structure of the subgraph induced by ``vertex_set``.

    All arrays are indexed by position in ``vertex_set`` (ascending original
    indices). ``total_degrees`` are degrees in the full graph.
    ``boundary_edges`` are ``(inside, outside)`` vertex pairs.
    """

    graph: Graph
    vertex_set: tuple[int, ...]
    internal_adjacency: np.ndarray
    internal_degrees: np.ndarray
    total_degrees: np.ndarray
    external_degrees: np.ndarray
    boundary_edges: tuple[tuple[int, int], ...]

    @property
    def size(self) -> int:
        return len(self.vertex_set)

    @cached_property
    def selection(self) -> np.ndarray:
        """``S`` with ``S @ x`` picking the subgraph coordinates."""
        s = np.zeros((self.size, self.graph.n))
        s[np.arange(self.size), list(self.vertex_set)] = 1.0
        return _readonly(s)

    @cached_property
    def external_adjacency(self) -> np.ndarray:
        """Rows of ``A`` for the subgraph with internal columns zeroed (``S A_ext``)."""
        rows = self.graph.adjacency[list(self.vertex_set)].copy()
        rows[:, list(self.vertex_set)] = 0.0
        return _readonly(rows)

    @cached_property
    def internal_transition(self) -> np.ndarray:
        """``D_in^-1 A_in`` (requires every internal degree to be positive)."""
        return _readonly(self.internal_adjacency / self.internal_degrees[:, None])

    def to_dict(self) -> dict:
        return {
            "vertex_set": list(self.vertex_set),
            "boundary_edges": [list(e) for e in self.boundary_edges],
            "internal_degrees": self.internal_degrees.astype(int).tolist(),
            "external_degrees": self.external_degrees.astype(int).tolist(),
            "total_degrees": self.total_degrees.astype(int).tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def induced_subgraph(g: Graph, vertices: Iterable[int]) -> SubgraphDecomposition:
    vs = sorted({int(v) for v in vertices})
    if not vs:
        raise EmptySubset("vertex subset is empty")
    if vs[0] < 0 or vs[-1] >= g.n:
        raise IndexOutOfRange(f"subset indices must lie in [0, {g.n})")
    a_in = g.adjacency[np.ix_(vs, vs)].copy()
    local = [(i, j) for i in range(len(vs)) for j in range(i + 1, len(vs)) if a_in[i, j]]
    sub = from_edge_list(local, len(vs), validate=False)
    if len(vs) > 1 and (sub.degrees.min() == 0 or not is_connected(sub)):
        raise InducedDisconnected(f"subgraph induced by {vs} is not connected")
    inside = set(vs)
    boundary = tuple((i, int(j)) for i in vs for j in g.neighbors(i) if int(j) not in inside)
    d_in = a_in.sum(axis=1)
    d = g.degrees[vs].copy()
    return SubgraphDecomposition(
        graph=g,
        vertex_set=tuple(vs),
        internal_adjacency=_readonly(a_in),
        internal_degrees=_readonly(d_in),
        total_degrees=_readonly(d),
        external_degrees=_readonly(d - d_in),
        boundary_edges=boundary,
    )
