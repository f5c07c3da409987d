"""Exact structure mapping: rule checks and a backtracking matcher.

A mapping is a set of ``(base id, target id)`` correspondences. It is
rule-consistent when

* every matched pair has the same node kind and arity, and each argument of
  the base node is matched to the argument of the target node at the same
  position (parallel connectivity),
* no node takes part in more than one correspondence (one-to-one),
* matched relations carry identical signatures (tiered identicality).

Among consistent mappings, larger ones win; ties go to the larger
systematicity score, then to the lexicographically smallest pair list.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dag import NodeKind, SmtDag, ancestors, node_heights
from .errors import DataError, SizeLimitError
from .vocab import SignatureVocab

Pair = tuple[int, int]


@dataclass
class RuleReport:
    parallel_connectivity: bool
    connectivity_violations: list[Pair]
    one_to_one: bool
    one_to_one_violations: list[tuple[str, int]]
    tiered_identicality: bool
    identicality_violations: list[Pair]
    systematicity_score: float
    correspondence_count: int

    @property
    def all_rules(self) -> bool:
        return self.parallel_connectivity and self.one_to_one and self.tiered_identicality


@dataclass(frozen=True)
class SearchLimits:
    max_base: int = 12
    max_target: int = 40
    max_mappings: int = 64  # maximal mappings kept in the enumeration
    max_visits: int = 200_000  # search nodes spent enumerating maximal mappings


@dataclass
class StructureMap:
    best: tuple[Pair, ...]
    count: int
    score: float
    maximal: list[tuple[Pair, ...]] = field(default_factory=list)
    enumeration_complete: bool = True


def systematicity_score(target: SmtDag, mapping: Sequence[Pair], heights: np.ndarray | None = None) -> float:
    """Sum of ``1 + height`` over the matched target nodes."""
    if heights is None:
        heights = node_heights(target)
    return float(sum(1 + int(heights[t]) for _, t in mapping))


def _signature_ok(base: SmtDag, u: int, target: SmtDag, t: int, vocab: SignatureVocab | None) -> bool:
    su, st = base.signature(u), target.signature(t)
    if base.kind(u) is NodeKind.RELATION:
        return su == st
    if vocab is not None:  # strict mode
        return su == st or vocab.same_group(su, st)
    return True


def _out_map(dag: SmtDag) -> list[dict[int, int]]:
    out: list[dict[int, int]] = [{} for _ in range(dag.n)]
    for e in dag.edges:
        out[e.src][e.pos] = e.dst
    return out


def verify_alignment(
    base: SmtDag,
    target: SmtDag,
    x: np.ndarray,
    strict_vocab: SignatureVocab | None = None,
) -> RuleReport:
    """Check a binary alignment matrix against the three hard rules."""
    x = np.asarray(x)
    if x.shape != (base.n, target.n):
        raise DataError(f"alignment shape {x.shape} does not match ({base.n}, {target.n})")
    on = x > 0.5
    pairs = [(int(u), int(t)) for u, t in zip(*np.nonzero(on))]

    one_bad = [("base", int(i)) for i in np.nonzero(on.sum(axis=1) > 1)[0]]
    one_bad += [("target", int(j)) for j in np.nonzero(on.sum(axis=0) > 1)[0]]

    out_b, out_t = _out_map(base), _out_map(target)
    conn_bad: list[Pair] = []
    ident_bad: list[Pair] = []
    for u, t in pairs:
        if len(out_b[u]) != len(out_t[t]):
            conn_bad.append((u, t))
        else:
            for pos, c in out_b[u].items():
                tc = out_t[t].get(pos)
                if tc is None or not on[c, tc]:
                    conn_bad.append((u, t))
                    break
        if base.kind(u) is not target.kind(t) or not _signature_ok(base, u, target, t, strict_vocab):
            ident_bad.append((u, t))

    return RuleReport(
        parallel_connectivity=not conn_bad,
        connectivity_violations=conn_bad,
        one_to_one=not one_bad,
        one_to_one_violations=one_bad,
        tiered_identicality=not ident_bad,
        identicality_violations=ident_bad,
        systematicity_score=systematicity_score(target, pairs),
        correspondence_count=len(pairs),
    )


def _post_order(dag: SmtDag) -> list[int]:
    """Children before parents, with each parent placed right after its subtree."""
    seen: set[int] = set()
    order: list[int] = []
    for r in range(dag.n):
        if dag.parents[r] or r in seen:
            continue
        stack = [(r, iter(dag.children[r]))]
        seen.add(r)
        while stack:
            u, it = stack[-1]
            for c in it:
                if c not in seen:
                    seen.add(c)
                    stack.append((c, iter(dag.children[c])))
                    break
            else:
                stack.pop()
                order.append(u)
    return order


class _Matcher:
    def __init__(self, base: SmtDag, target: SmtDag, strict_vocab: SignatureVocab | None):
        self.base = base
        self.target = target
        self.order = _post_order(base)
        self.h_t = node_heights(target)
        self.out_t = _out_map(target)
        self.kids = [base.children[u] for u in range(base.n)]
        # static candidates: same kind, arity and (for relations) signature
        self.cand = [
            [
                t
                for t in range(target.n)
                if base.kind(u) is target.kind(t)
                and len(base.children[u]) == len(target.children[t])
                and _signature_ok(base, u, target, t, strict_vocab)
            ]
            for u in range(base.n)
        ]
        self.ub = [max((1 + int(self.h_t[t]) for t in c), default=0) for c in self.cand]
        self.ancestors = [sorted(ancestors(base, u)) for u in range(base.n)]
        self.m = [-2] * base.n  # -2 undecided, -1 unmatched
        self.used = [False] * target.n

    def options(self, u: int) -> list[int]:
        """Valid target images for ``u`` given its (already decided) arguments."""
        kids = self.kids[u]
        if not kids:
            return [t for t in self.cand[u] if not self.used[t]]
        images = [self.m[c] for c in kids]
        if min(images) < 0:
            return []
        opts = []
        for t in self.cand[u]:
            if self.used[t]:
                continue
            out = self.out_t[t]
            if all(out.get(p) == images[p] for p in range(len(kids))):
                opts.append(t)
        return opts

    def extendable(self) -> bool:
        """Whether any unmatched base node could be added to the current full mapping."""
        for u in range(self.base.n):
            if self.m[u] == -1 and self.options(u):
                return True
        return False

    def pairs(self) -> tuple[Pair, ...]:
        return tuple((u, t) for u, t in enumerate(self.m) if t >= 0)


def _best_mapping(mt: _Matcher) -> tuple[tuple[Pair, ...], int, int]:
    order = mt.order
    n = len(order)
    dead = [0] * mt.base.n  # number of unmatched descendants blocking a node
    best: list = [(-1, -1), ()]

    # optimistic totals over undecided, unblocked nodes
    def bound(i: int, count: int, score: int) -> tuple[int, int]:
        c, s = count, score
        for u in order[i:]:
            if dead[u] == 0 and mt.ub[u] > 0:
                c += 1
                s += mt.ub[u]
        return c, s

    def visit(i: int, count: int, score: int):
        if i == n:
            key = (count, score)
            pairs = mt.pairs()
            if key > best[0] or (key == best[0] and pairs < best[1]):
                best[0], best[1] = key, pairs
            return
        if bound(i, count, score) < best[0]:
            return
        u = order[i]
        if dead[u] == 0:
            for t in mt.options(u):
                mt.m[u] = t
                mt.used[t] = True
                visit(i + 1, count + 1, score + 1 + int(mt.h_t[t]))
                mt.used[t] = False
        mt.m[u] = -1
        for a in mt.ancestors[u]:
            dead[a] += 1
        visit(i + 1, count, score)
        for a in mt.ancestors[u]:
            dead[a] -= 1
        mt.m[u] = -2

    visit(0, 0, 0)
    (count, score), pairs = best
    return pairs, count, score


def _maximal_mappings(mt: _Matcher, limits: SearchLimits) -> tuple[list[tuple[Pair, ...]], bool]:
    found: list[tuple[Pair, ...]] = []
    visits = [0]
    order = mt.order

    def visit(i: int) -> bool:
        visits[0] += 1
        if visits[0] > limits.max_visits or len(found) >= limits.max_mappings:
            return False
        if i == len(order):
            if not mt.extendable():
                found.append(mt.pairs())
            return True
        u = order[i]
        for t in mt.options(u):
            mt.m[u] = t
            mt.used[t] = True
            ok = visit(i + 1)
            mt.used[t] = False
            if not ok:
                mt.m[u] = -2
                return False
        mt.m[u] = -1
        ok = visit(i + 1)
        mt.m[u] = -2
        return ok

    complete = visit(0)
    return sorted(found), complete


def exact_structure_map(
    base: SmtDag,
    target: SmtDag,
    limits: SearchLimits = SearchLimits(),
    strict_vocab: SignatureVocab | None = None,
    enumerate_maximal: bool = True,
) -> StructureMap:
    """Best rule-consistent mapping plus the maximal mappings found within limits.

    Base nodes are decided children-first, so a parent is only ever tried
    against target nodes whose arguments already hold the images of its own
    arguments. The best mapping comes from a branch-and-bound pass that is
    exact regardless of the enumeration limits.
    """
    if base.n > limits.max_base or target.n > limits.max_target:
        raise SizeLimitError(
            f"instance has |V_B|={base.n}, |V_T|={target.n}; "
            f"limits are {limits.max_base} and {limits.max_target}"
        )
    mt = _Matcher(base, target, strict_vocab)
    best, count, score = _best_mapping(mt)
    maximal, complete = _maximal_mappings(mt, limits) if enumerate_maximal else ([], False)
    return StructureMap(best, count, float(score), maximal, complete)

