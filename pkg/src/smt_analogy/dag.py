"""Vertex-labeled DAGs in the structure-mapping sense.

Edges point from an expression to its arguments and carry the argument
position. Node ids are dense (0..n-1) so graphs index straight into
matrices.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError
from .vocab import SignatureVocab


class NodeKind(enum.Enum):
    ENTITY = "entity"
    FUNCTION = "function"
    RELATION = "relation"

    @property
    def index(self) -> int:
        return _KIND_INDEX[self]


_KIND_INDEX = {NodeKind.ENTITY: 0, NodeKind.FUNCTION: 1, NodeKind.RELATION: 2}


@dataclass(frozen=True)
class SmtNode:
    id: int
    kind: NodeKind
    signature: str


@dataclass(frozen=True, order=True)
class Edge:
    src: int
    dst: int
    pos: int


@dataclass(frozen=True)
class SmtDag:
    """Immutable expression DAG.

    ``children[u]`` lists the argument ids of ``u`` ordered by position and
    ``parents[v]`` lists ``(parent, pos)`` tuples. Both are built once at
    construction; endpoints that fall outside ``0..n-1`` are left out of the
    caches and reported by :func:`validate_dag`.
    """

    nodes: tuple[SmtNode, ...]
    edges: tuple[Edge, ...]
    id: str = ""
    children: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)
    parents: tuple[tuple[tuple[int, int], ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.nodes)
        out: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        inc: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        for e in self.edges:
            if 0 <= e.src < n and 0 <= e.dst < n:
                out[e.src].append((e.pos, e.dst))
                inc[e.dst].append((e.src, e.pos))
        object.__setattr__(
            self, "children", tuple(tuple(d for _, d in sorted(lst)) for lst in out)
        )
        object.__setattr__(self, "parents", tuple(tuple(sorted(lst)) for lst in inc))

    @classmethod
    def build(
        cls,
        nodes: Iterable[tuple[NodeKind | str, str]],
        edges: Iterable[tuple[int, int, int]],
        id: str = "",
    ) -> "SmtDag":
        """Construct from ``(kind, signature)`` tuples and ``(src, dst, pos)`` triples."""
        built = []
        for i, (kind, sig) in enumerate(nodes):
            if not isinstance(kind, NodeKind):
                kind = NodeKind(kind)
            built.append(SmtNode(i, kind, sig))
        return cls(tuple(built), tuple(Edge(*e) for e in edges), id)

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def n(self) -> int:
        return len(self.nodes)

    def kind(self, u: int) -> NodeKind:
        return self.nodes[u].kind

    def signature(self, u: int) -> str:
        return self.nodes[u].signature

    def child_at(self, u: int, pos: int) -> int | None:
        for e in self.edges:
            if e.src == u and e.pos == pos:
                return e.dst
        return None

    def roots(self) -> list[int]:
        return [u for u in range(self.n) if not self.parents[u]]

    def with_id(self, new_id: str) -> "SmtDag":
        return SmtDag(self.nodes, self.edges, new_id)

    def permuted(self, perm: Sequence[int]) -> "SmtDag":
        """Relabel node ``u`` as ``perm[u]``."""
        nodes = [None] * self.n
        for node in self.nodes:
            nodes[perm[node.id]] = SmtNode(perm[node.id], node.kind, node.signature)
        edges = sorted(Edge(perm[e.src], perm[e.dst], e.pos) for e in self.edges)
        return SmtDag(tuple(nodes), tuple(edges), self.id)


# -- validation ---------------------------------------------------------------


def validate_dag(dag: SmtDag) -> list[str]:
    """Return every violated invariant as a readable message; empty means valid."""
    problems: list[str] = []
    n = dag.n
    for i, node in enumerate(dag.nodes):
        if node.id != i:
            problems.append(f"node at index {i} has id {node.id}; ids must be dense 0..{n - 1}")
        if not isinstance(node.signature, str) or not node.signature.strip():
            problems.append(f"node {i} has an empty signature")

    seen: set[tuple[int, int, int]] = set()
    positions: dict[int, list[int]] = {}
    for e in dag.edges:
        triple = (e.src, e.dst, e.pos)
        if not (0 <= e.src < n and 0 <= e.dst < n):
            problems.append(f"edge {triple} references a missing node")
            continue
        if e.pos < 0:
            problems.append(f"edge {triple} has a negative position")
        if e.src == e.dst:
            problems.append(f"edge {triple} is a self-loop")
        if triple in seen:
            problems.append(f"edge {triple} is duplicated")
        seen.add(triple)
        positions.setdefault(e.src, []).append(e.pos)

    for u, pos in sorted(positions.items()):
        if dag.nodes[u].kind is NodeKind.ENTITY:
            problems.append(f"entity node {u} must be a leaf but has {len(pos)} outgoing edge(s)")
        if sorted(pos) != list(range(len(pos))):
            problems.append(f"node {u} has argument positions {sorted(pos)}; expected 0..{len(pos) - 1}")

    if _topological_order(dag) is None:
        problems.append("edge relation contains a cycle")
    return problems


def _topological_order(dag: SmtDag) -> list[int] | None:
    indeg = [len(p) for p in dag.parents]
    queue = deque(u for u in range(dag.n) if indeg[u] == 0)
    order = []
    while queue:
        u = queue.popleft()
        order.append(u)
        for c in dag.children[u]:
            indeg[c] -= 1
            if indeg[c] == 0:
                queue.append(c)
    return order if len(order) == dag.n else None


def topological_order(dag: SmtDag) -> list[int]:
    """Parents before children (Kahn's algorithm, FIFO order)."""
    order = _topological_order(dag)
    if order is None:
        raise DataError(f"graph {dag.id!r} contains a cycle")
    return order


def node_heights(dag: SmtDag) -> np.ndarray:
    """Longest path (in edges) from each node down to a leaf."""
    heights = np.zeros(dag.n, dtype=np.int64)
    for u in reversed(topological_order(dag)):
        if dag.children[u]:
            heights[u] = 1 + max(heights[c] for c in dag.children[u])
    return heights


def descendants(dag: SmtDag, root: int, hops: int | None = None) -> list[int]:
    """Nodes reachable from ``root`` in at most ``hops`` steps, in BFS order."""
    dist = {root: 0}
    order = [root]
    queue = deque([root])
    while queue:
        u = queue.popleft()
        if hops is not None and dist[u] >= hops:
            continue
        for c in dag.children[u]:
            if c not in dist:
                dist[c] = dist[u] + 1
                order.append(c)
                queue.append(c)
    return order


def k_hop_rooted_subgraph(dag: SmtDag, root: int, k: int | None) -> tuple[SmtDag, dict[int, int]]:
    """Sub-DAG on the nodes within ``k`` hops below ``root``.

    ``k=None`` takes the full descendant closure. The root becomes node 0 and
    the remaining nodes keep BFS order. Returns the graph and the old->new map.
    """
    if not 0 <= root < dag.n:
        raise DataError(f"unknown root id {root} for graph {dag.id!r} with {dag.n} nodes")
    if k is not None and k < 1:
        raise ValueError(f"k must be positive, got {k}")
    keep = descendants(dag, root, k)
    remap = {old: new for new, old in enumerate(keep)}
    nodes = tuple(SmtNode(remap[u], dag.nodes[u].kind, dag.nodes[u].signature) for u in keep)
    # A frontier node may reach some arguments through other paths; it keeps
    # its argument edges only when all of them fit, so positions stay 0..arity-1.
    whole = {u for u in keep if all(c in remap for c in dag.children[u])}
    edges = tuple(
        sorted(
            Edge(remap[e.src], remap[e.dst], e.pos)
            for e in dag.edges
            if e.src in whole and e.dst in remap
        )
    )
    return SmtDag(nodes, edges, f"{dag.id}@{root}"), remap


def ancestors(dag: SmtDag, u: int) -> set[int]:
    seen: set[int] = set()
    stack = [u]
    while stack:
        v = stack.pop()
        for p, _ in dag.parents[v]:
            if p not in seen:
                seen.add(p)
                stack.append(p)
    return seen


def adjacency_matrix(dag: SmtDag) -> np.ndarray:
    a = np.zeros((dag.n, dag.n), dtype=np.float64)
    for e in dag.edges:
        a[e.src, e.dst] = 1.0
    return a


def pairs_to_matrix(pairs: Iterable[tuple[int, int]], n_base: int, n_target: int) -> np.ndarray:
    """Binary alignment matrix with ones at the given (base, target) cells."""
    x = np.zeros((n_base, n_target))
    for b, t in pairs:
        x[b, t] = 1.0
    return x


def node_features(node: SmtNode, vocab: SignatureVocab) -> np.ndarray:
    """One-hot kind followed by the unit-norm signature embedding."""
    onehot = np.zeros(3)
    onehot[node.kind.index] = 1.0
    return np.concatenate([onehot, vocab.embed(node.signature)])


def feature_matrix(dag: SmtDag, vocab: SignatureVocab) -> np.ndarray:
    if dag.n == 0:
        return np.zeros((0, 3 + vocab.dim))
    return np.stack([node_features(node, vocab) for node in dag.nodes])


# -- exact rooted-subgraph test -------------------------------------------------


def is_rooted_subgraph(
    small: SmtDag,
    root_s: int,
    big: SmtDag,
    root_b: int,
    ordered_functions: bool = True,
) -> bool:
    """Whether ``small`` embeds into ``big`` with ``root_s`` sent to ``root_b``.

    The injection must preserve node kinds, edges and argument positions, and
    relation signatures. Entity and function signatures are free. With
    ``ordered_functions=False`` the arguments of function nodes may be matched
    in any order.
    """
    if not (0 <= root_s < small.n and 0 <= root_b < big.n):
        return False

    def compatible(u: int, t: int) -> bool:
        ku = small.nodes[u].kind
        if ku is not big.nodes[t].kind:
            return False
        if ku is NodeKind.RELATION and small.nodes[u].signature != big.nodes[t].signature:
            return False
        return len(small.children[u]) <= len(big.children[t])

    def positional(u: int) -> bool:
        return ordered_functions or small.nodes[u].kind is not NodeKind.FUNCTION

    out_s = [{e.pos: e.dst for e in small.edges if e.src == u} for u in range(small.n)]
    out_b = [{e.pos: e.dst for e in big.edges if e.src == t} for t in range(big.n)]

    # Assign reachable nodes first so most candidates are forced by a parent.
    order = descendants(small, root_s)
    reached = set(order)
    order += [u for u in range(small.n) if u not in reached]
    index = {u: i for i, u in enumerate(order)}
    mapping: dict[int, int] = {}
    used: set[int] = set()

    def candidates(u: int) -> Iterable[int]:
        if u == root_s:
            return [root_b]
        for p, pos in small.parents[u]:
            if p in mapping and index[p] < index[u]:
                if positional(p):
                    c = out_b[mapping[p]].get(pos)
                    return [] if c is None else [c]
                return big.children[mapping[p]]
        return range(big.n)

    def consistent(u: int, t: int) -> bool:
        for p, pos in small.parents[u]:
            if p in mapping:
                tp = mapping[p]
                if positional(p):
                    if out_b[tp].get(pos) != t:
                        return False
                elif t not in big.children[tp]:
                    return False
        for pos, c in out_s[u].items():
            if c in mapping:
                if positional(u):
                    if out_b[t].get(pos) != mapping[c]:
                        return False
                elif mapping[c] not in big.children[t]:
                    return False
        return True

    def search(i: int) -> bool:
        if i == len(order):
            return True
        u = order[i]
        for t in candidates(u):
            if t in used or not compatible(u, t) or not consistent(u, t):
                continue
            mapping[u] = t
            used.add(t)
            if search(i + 1):
                return True
            del mapping[u]
            used.discard(t)
        return False

    return search(0)
