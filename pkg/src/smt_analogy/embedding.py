"""Order-preserving node embeddings.

A K-layer sum-pooling GIN passes messages from arguments up to their
expressions, so the embedding of a node summarizes the K-hop sub-DAG rooted
at it. Training pushes the embedding of a rooted subgraph elementwise below
the embedding of any graph containing it.

Gradients are written out by hand; :func:`loss_and_grad` is the single entry
point the trainer and the gradient checks use.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .dag import SmtDag, feature_matrix
from .errors import NumericError
from .optim import AdamState
from .synth import OrderPair, sample_order_pairs
from .vocab import SignatureVocab

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmbedConfig:
    layers: int = 3
    hidden: int = 64
    dim: int = 64
    margin: float = 1.0
    lr: float = 1e-3
    steps: int = 2000
    batch_size: int = 64
    pairs: int = 1000  # positives and negatives each in the training pool
    seed: int = 0

    def __post_init__(self):
        if self.layers < 1 or self.dim < 1 or self.hidden < 1:
            raise ValueError("layers, hidden and dim must be at least 1")
        if self.margin <= 0 or self.lr <= 0:
            raise ValueError("margin and learning rate must be positive")
        if self.steps < 0 or self.batch_size < 1 or self.pairs < 1:
            raise ValueError("steps must be >= 0, batch_size and pairs >= 1")


@dataclass
class EncoderParams:
    config: EmbedConfig
    in_dim: int
    weights: dict[str, np.ndarray]

    def check(self) -> None:
        for name, shape in expected_shapes(self.config, self.in_dim).items():
            w = self.weights.get(name)
            if w is None or w.shape != shape:
                got = None if w is None else w.shape
                raise ValueError(f"parameter {name!r} has shape {got}, expected {shape}")
            if not np.all(np.isfinite(w)):
                raise NumericError(f"parameter {name!r} contains non-finite values")

    def copy(self) -> "EncoderParams":
        return EncoderParams(self.config, self.in_dim, {k: v.copy() for k, v in self.weights.items()})

    def flat(self) -> np.ndarray:
        return np.concatenate([self.weights[k].ravel() for k in sorted(self.weights)])

    def with_flat(self, vec: np.ndarray) -> "EncoderParams":
        out, i = {}, 0
        for k in sorted(self.weights):
            w = self.weights[k]
            out[k] = vec[i : i + w.size].reshape(w.shape).copy()
            i += w.size
        return EncoderParams(self.config, self.in_dim, out)


def expected_shapes(config: EmbedConfig, in_dim: int) -> dict[str, tuple[int, ...]]:
    h = config.hidden
    shapes: dict[str, tuple[int, ...]] = {"input.W": (in_dim, h), "input.b": (h,)}
    for k in range(config.layers):
        shapes[f"layer{k}.eps"] = ()
        shapes[f"layer{k}.W1"] = (h, h)
        shapes[f"layer{k}.b1"] = (h,)
        shapes[f"layer{k}.W2"] = (h, h)
        shapes[f"layer{k}.b2"] = (h,)
    shapes["head.W"] = (config.layers * h, config.dim)
    shapes["head.b"] = (config.dim,)
    return shapes


def init_params(config: EmbedConfig, vocab: SignatureVocab, seed: int | None = None) -> EncoderParams:
    """Glorot-uniform weights, zero biases and zero epsilons."""
    rng = np.random.default_rng(config.seed if seed is None else seed)
    in_dim = 3 + vocab.dim
    weights = {}
    for name, shape in expected_shapes(config, in_dim).items():
        if len(shape) == 2:
            a = np.sqrt(6.0 / (shape[0] + shape[1]))
            weights[name] = rng.uniform(-a, a, size=shape)
        else:
            weights[name] = np.zeros(shape)
    return EncoderParams(config, in_dim, weights)


# -- forward / backward ---------------------------------------------------------


@dataclass
class GraphBatch:
    """Disjoint union of graphs; ``offsets[i]`` is the first row of graph ``i``."""

    features: np.ndarray
    children: sp.csr_matrix  # children[u, c] = 1 for every argument edge u -> c
    offsets: np.ndarray

    @classmethod
    def of(cls, graphs: Sequence[SmtDag], vocab: SignatureVocab) -> "GraphBatch":
        feats, rows, cols, offsets = [], [], [], []
        base = 0
        for g in graphs:
            offsets.append(base)
            feats.append(feature_matrix(g, vocab))
            for e in g.edges:
                rows.append(base + e.src)
                cols.append(base + e.dst)
            base += g.n
        n = base
        adj = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        return cls(np.concatenate(feats) if feats else np.zeros((0, 3 + vocab.dim)), adj, np.array(offsets))


def _forward(params: EncoderParams, batch: GraphBatch):
    w = params.weights
    K = params.config.layers
    h = batch.features @ w["input.W"] + w["input.b"]
    cache = {"h0": h}
    outs = []
    for k in range(K):
        z = (1.0 + w[f"layer{k}.eps"]) * h + batch.children @ h
        a = z @ w[f"layer{k}.W1"] + w[f"layer{k}.b1"]
        r = np.maximum(a, 0.0)
        h = r @ w[f"layer{k}.W2"] + w[f"layer{k}.b2"]
        cache[k] = (z, a, r, cache["h0"] if k == 0 else outs[-1])
        outs.append(h)
    cat = np.concatenate(outs, axis=1)
    out = cat @ w["head.W"] + w["head.b"]
    cache["cat"] = cat
    return out, cache


def _backward(params: EncoderParams, batch: GraphBatch, cache, d_out: np.ndarray) -> dict[str, np.ndarray]:
    w = params.weights
    K = params.config.layers
    hdim = params.config.hidden
    grads: dict[str, np.ndarray] = {}
    grads["head.W"] = cache["cat"].T @ d_out
    grads["head.b"] = d_out.sum(axis=0)
    d_cat = d_out @ w["head.W"].T
    d_h = np.zeros_like(cache["h0"])
    for k in reversed(range(K)):
        z, a, r, h_prev = cache[k]
        d_h = d_h + d_cat[:, k * hdim : (k + 1) * hdim]
        grads[f"layer{k}.W2"] = r.T @ d_h
        grads[f"layer{k}.b2"] = d_h.sum(axis=0)
        d_a = (d_h @ w[f"layer{k}.W2"].T) * (a > 0)
        grads[f"layer{k}.W1"] = z.T @ d_a
        grads[f"layer{k}.b1"] = d_a.sum(axis=0)
        d_z = d_a @ w[f"layer{k}.W1"].T
        grads[f"layer{k}.eps"] = np.array(np.sum(d_z * h_prev))
        d_h = (1.0 + w[f"layer{k}.eps"]) * d_z + batch.children.T @ d_z
    grads["input.W"] = batch.features.T @ d_h
    grads["input.b"] = d_h.sum(axis=0)
    return grads


def encode(params: EncoderParams, dag: SmtDag, vocab: SignatureVocab) -> np.ndarray:
    """Node embeddings of ``dag`` as an ``n x dim`` matrix (row ``u`` = node ``u``)."""
    if params.in_dim != 3 + vocab.dim:
        raise ValueError(f"encoder expects {params.in_dim}-dim features, vocabulary gives {3 + vocab.dim}")
    params.check()
    out, _ = _forward(params, GraphBatch.of([dag], vocab))
    return out


def encode_many(params: EncoderParams, graphs: Sequence[SmtDag], vocab: SignatureVocab) -> list[np.ndarray]:
    batch = GraphBatch.of(graphs, vocab)
    out, _ = _forward(params, batch)
    ends = list(batch.offsets[1:]) + [out.shape[0]]
    return [out[s:e] for s, e in zip(batch.offsets, ends)]


# -- order loss -----------------------------------------------------------------


def order_violation(h_u: np.ndarray, h_v: np.ndarray) -> float:
    """Squared norm of the part of ``h_u`` sticking out above ``h_v``."""
    h_u, h_v = np.asarray(h_u, dtype=float), np.asarray(h_v, dtype=float)
    if h_u.shape != h_v.shape:
        raise ValueError(f"dimension mismatch: {h_u.shape} vs {h_v.shape}")
    diff = np.maximum(h_u - h_v, 0.0)
    return float(diff @ diff)


@dataclass
class PairBatch:
    graphs: GraphBatch
    query_rows: np.ndarray
    anchor_rows: np.ndarray
    positive: np.ndarray

    @classmethod
    def of(cls, pairs: Sequence[OrderPair], vocab: SignatureVocab) -> "PairBatch":
        graphs = []
        for p in pairs:
            graphs.extend((p.query, p.anchor))
        gb = GraphBatch.of(graphs, vocab)
        q = np.array([gb.offsets[2 * i] + p.query_root for i, p in enumerate(pairs)], dtype=np.int64)
        a = np.array([gb.offsets[2 * i + 1] + p.anchor_root for i, p in enumerate(pairs)], dtype=np.int64)
        return cls(gb, q, a, np.array([p.positive for p in pairs], dtype=bool))


def pair_violations(params: EncoderParams, batch: PairBatch) -> np.ndarray:
    out, _ = _forward(params, batch.graphs)
    diff = np.maximum(out[batch.query_rows] - out[batch.anchor_rows], 0.0)
    return np.sum(diff * diff, axis=1)


def loss_and_grad(params: EncoderParams, batch: PairBatch, margin: float, need_grad: bool = True):
    """Max-margin order loss summed over the batch, and its parameter gradient.

    Positives contribute ``D`` and negatives ``max(0, margin - D)``, where
    ``D`` is the order violation of the query root over the anchor root.
    """
    out, cache = _forward(params, batch.graphs)
    hq, ha = out[batch.query_rows], out[batch.anchor_rows]
    diff = np.maximum(hq - ha, 0.0)
    d = np.sum(diff * diff, axis=1)
    active_neg = (~batch.positive) & (d < margin)
    loss = float(d[batch.positive].sum() + (margin - d[active_neg]).sum())
    if not np.isfinite(loss):
        raise NumericError(f"order loss is not finite ({loss})")
    if not need_grad:
        return loss, None
    coef = np.where(batch.positive, 1.0, np.where(active_neg, -1.0, 0.0))
    g = 2.0 * diff * coef[:, None]
    d_out = np.zeros_like(out)
    np.add.at(d_out, batch.query_rows, g)
    np.add.at(d_out, batch.anchor_rows, -g)
    return loss, _backward(params, batch.graphs, cache, d_out)


def margin_loss(params: EncoderParams, pairs: Sequence[OrderPair], margin: float, vocab: SignatureVocab) -> float:
    if not pairs:
        raise ValueError("batch must be non-empty")
    loss, _ = loss_and_grad(params, PairBatch.of(pairs, vocab), margin, need_grad=False)
    return loss


# -- training -------------------------------------------------------------------


@dataclass
class TrainResult:
    params: EncoderParams
    losses: list[float]
    pairs: list[OrderPair]


def train_encoder(
    config: EmbedConfig,
    corpus: Sequence[SmtDag],
    vocab: SignatureVocab,
    seed: int | None = None,
    pairs: Sequence[OrderPair] | None = None,
) -> TrainResult:
    """Adam on the max-margin order loss over mini-batches drawn from a pair pool.

    The pool holds ``config.pairs`` positives and as many negatives sampled
    from ``corpus`` (or ``pairs`` when given). Every step draws a fresh batch
    of half positives, half negatives.
    """
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng([seed, 7])
    if pairs is None:
        pairs = sample_order_pairs(corpus, config.pairs, config.pairs, config.layers, seed)
    pos = [p for p in pairs if p.positive]
    neg = [p for p in pairs if not p.positive]
    if not pos or not neg:
        raise ValueError("training needs at least one positive and one negative pair")

    params = init_params(config, vocab, seed)
    adam = AdamState(lr=config.lr)
    losses: list[float] = []
    half = max(1, config.batch_size // 2)
    for step in range(config.steps):
        idx_p = rng.integers(len(pos), size=half)
        idx_n = rng.integers(len(neg), size=half)
        batch = PairBatch.of([pos[i] for i in idx_p] + [neg[i] for i in idx_n], vocab)
        try:
            loss, grads = loss_and_grad(params, batch, config.margin)
        except NumericError as exc:
            raise NumericError(f"step {step}: {exc}") from exc
        losses.append(loss)
        adam.update(params.weights, grads)
        if step % 500 == 0:
            log.debug("step %d loss %.4f", step, loss)
    return TrainResult(params, losses, list(pairs))


def config_dict(config: EmbedConfig) -> dict:
    return asdict(config)
