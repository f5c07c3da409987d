"""Synthetic corpora: random expression DAGs, planted analogies, order pairs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, TypeVar

import numpy as np

from .dag import (
    Edge,
    NodeKind,
    SmtDag,
    SmtNode,
    ancestors,
    is_rooted_subgraph,
    k_hop_rooted_subgraph,
    node_heights,
    pairs_to_matrix,
)
from .errors import DataError
from .vocab import SignatureVocab, default_vocab, tokens_by_prefix

T = TypeVar("T")

MAX_RETRIES = 10


@dataclass(frozen=True)
class GenParams:
    depth_min: int = 2
    depth_max: int = 7
    branch_min: int = 1
    branch_max: int = 3
    max_nodes: int = 60
    internal_prob: float = 0.5  # chance an off-spine child above the last level is an expression
    share_prob: float = 0.25  # chance a new entity argument reuses an existing entity
    distractor: float = 0.3
    relabel: float = 0.5
    base_max_nodes: int | None = None
    base_hops: int | None = None  # None extracts the full descendant closure
    vocab: SignatureVocab = field(default_factory=default_vocab)
    seed: int = 0

    def __post_init__(self):
        if not (1 <= self.depth_min <= self.depth_max <= 10):
            raise ValueError(f"depth range [{self.depth_min}, {self.depth_max}] must lie within [1, 10]")
        if not (1 <= self.branch_min <= self.branch_max):
            raise ValueError(f"branching range [{self.branch_min}, {self.branch_max}] is empty")
        if self.max_nodes < self.depth_max + 1:
            raise ValueError("max_nodes cannot hold a DAG of the maximum depth")
        for name in ("internal_prob", "share_prob", "relabel"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.distractor < 0:
            raise ValueError("distractor fraction must be non-negative")


@dataclass(frozen=True)
class AnalogyInstance:
    base: SmtDag
    target: SmtDag
    gold: tuple[tuple[int, int], ...] | None = None
    id: str = ""

    def __post_init__(self):
        if self.gold is None:
            return
        gold = tuple(sorted((int(b), int(t)) for b, t in self.gold))
        object.__setattr__(self, "gold", gold)
        bs = [b for b, _ in gold]
        ts = [t for _, t in gold]
        if len(set(bs)) != len(bs) or len(set(ts)) != len(ts):
            raise DataError(f"instance {self.id!r}: gold pairs are not one-to-one")
        for b, t in gold:
            if not (0 <= b < self.base.n and 0 <= t < self.target.n):
                raise DataError(f"instance {self.id!r}: gold pair ({b}, {t}) references a missing node")

    def gold_matrix(self) -> np.ndarray | None:
        if self.gold is None:
            return None
        return pairs_to_matrix(self.gold, self.base.n, self.target.n)


@dataclass(frozen=True)
class OrderPair:
    query: SmtDag
    query_root: int
    anchor: SmtDag
    anchor_root: int
    positive: bool


# -- DAG generation -------------------------------------------------------------


class _Builder:
    def __init__(self, rng: np.random.Generator, vocab: SignatureVocab):
        self.rng = rng
        self.vocab = vocab
        self.relations = tokens_by_prefix(vocab, "rel")
        self.functions = tokens_by_prefix(vocab, "fn")
        self.entities = tokens_by_prefix(vocab, "ent")
        if not (self.relations and self.functions and self.entities):
            raise ValueError("vocabulary needs rel*, fn* and ent* groups for generation")
        self.kinds: list[NodeKind] = []
        self.sigs: list[str] = []
        self.edges: list[Edge] = []

    def _member(self, heads: list[str]) -> str:
        head = heads[self.rng.integers(len(heads))]
        group = self.vocab.synonyms(head)
        return group[self.rng.integers(len(group))]

    def add(self, kind: NodeKind) -> int:
        if kind is NodeKind.RELATION:
            sig = self.relations[self.rng.integers(len(self.relations))]
        elif kind is NodeKind.FUNCTION:
            sig = self._member(self.functions)
        else:
            sig = self._member(self.entities)
        self.kinds.append(kind)
        self.sigs.append(sig)
        return len(self.kinds) - 1

    def expression_kind(self) -> NodeKind:
        return NodeKind.RELATION if self.rng.random() < 0.5 else NodeKind.FUNCTION

    def dag(self, graph_id: str) -> SmtDag:
        return SmtDag.build(zip(self.kinds, self.sigs), [(e.src, e.dst, e.pos) for e in self.edges], graph_id)


def _grow(params: GenParams, rng: np.random.Generator, depth: int, branch_max: int) -> _Builder | None:
    b = _Builder(rng, params.vocab)
    root = b.add(b.expression_kind())
    entities: list[int] = []
    # frontier entries: (node, level, on_spine)
    frontier = [(root, 0, True)]
    head = 0
    while head < len(frontier):
        u, level, spine = frontier[head]
        head += 1
        arity = int(rng.integers(params.branch_min, branch_max + 1))
        spine_slot = int(rng.integers(arity)) if spine else -1
        taken: set[int] = set()
        for pos in range(arity):
            child_level = level + 1
            if pos == spine_slot and child_level < depth:
                kind = b.expression_kind()
            elif child_level < depth and pos != spine_slot and rng.random() < params.internal_prob:
                kind = b.expression_kind()
            else:
                kind = NodeKind.ENTITY
            if kind is NodeKind.ENTITY:
                reusable = [e for e in entities if e not in taken]
                if reusable and rng.random() < params.share_prob:
                    c = reusable[int(rng.integers(len(reusable)))]
                else:
                    c = b.add(kind)
                    entities.append(c)
            else:
                c = b.add(kind)
                frontier.append((c, child_level, pos == spine_slot))
            taken.add(c)
            b.edges.append(Edge(u, c, pos))
            if len(b.kinds) > params.max_nodes:
                return None
    return b


def generate_dag(params: GenParams, seed: int, graph_id: str = "") -> SmtDag:
    """Random expression DAG whose height is drawn uniformly from the depth range.

    Growth is top-down from one root. One designated spine path reaches the
    sampled depth; leaves are entities, and new entity arguments may reuse
    existing entities, which is what makes the result a DAG rather than a
    tree. If the node cap is exceeded the attempt is redrawn with a tighter
    branching range.
    """
    rng = np.random.default_rng(seed)
    depth = int(rng.integers(params.depth_min, params.depth_max + 1))
    branch_max = params.branch_max
    for _ in range(MAX_RETRIES + 1):
        built = _grow(params, rng, depth, branch_max)
        if built is not None:
            return built.dag(graph_id or f"g{seed}")
        branch_max = max(params.branch_min, branch_max - 1)
    raise DataError(
        f"could not generate a DAG of depth {depth} within {params.max_nodes} nodes "
        f"after {MAX_RETRIES} retries"
    )


# -- planted analogies ----------------------------------------------------------


def _add_distractors(core: SmtDag, params: GenParams, rng: np.random.Generator) -> SmtDag:
    n_extra = int(round(params.distractor * core.n))
    b = _Builder(rng, params.vocab)
    b.kinds = [node.kind for node in core.nodes]
    b.sigs = [node.signature for node in core.nodes]
    b.edges = list(core.edges)
    for _ in range(n_extra):
        existing = len(b.kinds)
        if rng.random() < 0.5:
            b.add(NodeKind.ENTITY)
            continue
        # a new expression over existing nodes never changes heights below it
        arity = min(existing, int(rng.integers(params.branch_min, params.branch_max + 1)))
        args = rng.choice(existing, size=arity, replace=False)
        u = b.add(b.expression_kind())
        for pos, c in enumerate(args):
            b.edges.append(Edge(u, int(c), pos))
    return b.dag(core.id)


def _relabel(dag: SmtDag, params: GenParams, rng: np.random.Generator) -> SmtDag:
    nodes = []
    for node in dag.nodes:
        sig = node.signature
        if node.kind is not NodeKind.RELATION and rng.random() < params.relabel:
            others = [s for s in params.vocab.synonyms(sig) if s != sig]
            if others:
                sig = others[int(rng.integers(len(others)))]
        nodes.append(SmtNode(node.id, node.kind, sig))
    return SmtDag(tuple(nodes), dag.edges, dag.id)


def sample_analogy_pair(params: GenParams, seed: int, instance_id: str = "") -> AnalogyInstance:
    """Plant a base inside a generated target and record the injection as gold.

    The base is a rooted sub-DAG of the generated core (root drawn among
    nodes of height >= 1), with shuffled ids and, with probability
    ``relabel`` per entity/function node, a different signature from the same
    synonym group. The target is the core plus distractor expressions, also
    with shuffled ids.
    """
    rng = np.random.default_rng([seed, 1])
    for attempt in range(MAX_RETRIES + 1):
        core = generate_dag(params, seed if attempt == 0 else int(rng.integers(2**31)))
        heights = node_heights(core)
        roots = []
        for u in range(core.n):
            if heights[u] < 1:
                continue
            sub, remap = k_hop_rooted_subgraph(core, u, params.base_hops)
            if params.base_max_nodes is None or sub.n <= params.base_max_nodes:
                roots.append(u)
        if roots:
            break
    else:
        raise DataError(f"no base root fits within {params.base_max_nodes} nodes after {MAX_RETRIES} retries")

    root = roots[int(rng.integers(len(roots)))]
    base, remap = k_hop_rooted_subgraph(core, root, params.base_hops)

    target = _add_distractors(core, params, rng)
    t_perm = rng.permutation(target.n)
    target = target.permuted(t_perm).with_id(f"{instance_id or seed}-target")

    b_perm = rng.permutation(base.n)
    base = base.permuted(b_perm).with_id(f"{instance_id or seed}-base")
    base = _relabel(base, params, rng)

    gold = tuple(sorted((int(b_perm[new]), int(t_perm[old])) for old, new in remap.items()))
    return AnalogyInstance(base, target, gold, instance_id or f"pair{seed}")


# -- order pairs for encoder training -------------------------------------------


def _perturb(query: SmtDag, rng: np.random.Generator, max_depth: int) -> SmtDag:
    """Add one argument edge somewhere above ``max_depth`` in the query."""
    depth = {0: 0}
    for u in range(query.n):  # BFS ids from extraction
        for c in query.children[u]:
            depth.setdefault(c, depth[u] + 1)
    sites = [u for u in range(query.n) if query.kind(u) is not NodeKind.ENTITY and depth[u] < max_depth]
    if not sites:
        sites = [0] if query.kind(0) is not NodeKind.ENTITY else []
    if not sites:
        return query
    nodes = list(query.nodes)
    edges = list(query.edges)
    u = sites[int(rng.integers(len(sites)))]
    pos = len(query.children[u])
    reach_up = ancestors(query, u) | {u} | set(query.children[u])
    targets = [v for v in range(query.n) if v not in reach_up]
    if targets and rng.random() < 0.5:
        v = targets[int(rng.integers(len(targets)))]
    else:
        v = len(nodes)
        leaves = [w for w in range(query.n) if query.kind(w) is NodeKind.ENTITY]
        sig = query.signature(leaves[int(rng.integers(len(leaves)))]) if leaves else "ent0a"
        nodes.append(SmtNode(v, NodeKind.ENTITY, sig))
    edges.append(Edge(u, v, pos))
    return SmtDag(tuple(nodes), tuple(edges), query.id + "+e")


def sample_order_pairs(
    corpus: Sequence[SmtDag],
    n_pos: int,
    n_neg: int,
    k: int,
    seed: int,
    max_attempts: int | None = None,
) -> list[OrderPair]:
    """Positive and negative (query, anchor) pairs for the max-margin loss.

    Every anchor is the ``k``-hop rooted subgraph of a corpus graph, and every
    query has depth at most ``k``, so the subgraph relation is decided inside
    the neighborhood a ``k``-layer encoder can see. Positives take a
    ``j``-hop extraction (``j`` uniform in 1..k) at the anchor's root.
    Negatives are half cross-graph root pairs and half positives with one
    extra argument edge; each is checked with the exact test.
    """
    if not corpus:
        raise DataError("cannot sample order pairs from an empty corpus")
    rng = np.random.default_rng(seed)
    budget = max_attempts if max_attempts is not None else 50 * (n_pos + n_neg) + 100

    def draw_rooted() -> tuple[SmtDag, int]:
        g = corpus[int(rng.integers(len(corpus)))]
        return g, int(rng.integers(g.n))

    def positive() -> OrderPair:
        g, u = draw_rooted()
        hops = int(rng.integers(1, k + 1))
        query, _ = k_hop_rooted_subgraph(g, u, hops)
        anchor, _ = k_hop_rooted_subgraph(g, u, k)
        return OrderPair(query, 0, anchor, 0, True)

    pairs = [positive() for _ in range(n_pos)]

    negatives: list[OrderPair] = []
    attempts = 0
    while len(negatives) < n_neg:
        attempts += 1
        if attempts > budget:
            raise DataError(
                f"found only {len(negatives)} of {n_neg} verified negatives after {budget} attempts"
            )
        if len(negatives) % 2 == 0:
            g1, u1 = draw_rooted()
            g2, u2 = draw_rooted()
            query, _ = k_hop_rooted_subgraph(g1, u1, int(rng.integers(1, k + 1)))
            anchor, _ = k_hop_rooted_subgraph(g2, u2, k)
        else:
            pos = positive()
            query = _perturb(pos.query, rng, k)
            anchor = pos.anchor
        if not is_rooted_subgraph(query, 0, anchor, 0):
            negatives.append(OrderPair(query, 0, anchor, 0, False))
    return pairs + negatives


def split_corpus(items: Sequence[T], fraction: float, seed: int) -> tuple[list[T], list[T]]:
    """Uniform random split; the first part holds ``round(fraction * n)`` items."""
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie strictly between 0 and 1, got {fraction}")
    n = len(items)
    order = np.random.default_rng(seed).permutation(n)
    n_first = int(round(fraction * n))
    first = sorted(order[:n_first].tolist())
    second = sorted(order[n_first:].tolist())
    return [items[i] for i in first], [items[i] for i in second]


def make_corpus(params: GenParams, n_pairs: int, seed: int) -> list[AnalogyInstance]:
    """``n_pairs`` planted instances with per-instance seeds derived from ``seed``."""
    seeds = np.random.default_rng(seed).integers(0, 2**31 - 1, size=n_pairs)
    return [sample_analogy_pair(params, int(s), f"pair{i:04d}") for i, s in enumerate(seeds)]

