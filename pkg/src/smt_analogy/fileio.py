"""JSON file formats (graphs, corpora, checkpoints, predictions, metrics) and PGM export.

All writers are deterministic: keys keep insertion order, separators are
fixed and floats use Python's shortest round-trip repr, except checkpoint
weights, which are written with 17 significant digits. Readers raise
:class:`DataError` naming the file and the offending line or JSON path.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .dag import SmtDag, validate_dag
from .embedding import EmbedConfig, EncoderParams, expected_shapes
from .errors import DataError, NumericError
from .inference import CandidateInference
from .synth import AnalogyInstance
from .vocab import SignatureVocab

GRAPH_VERSION = "1"
FILE_VERSION = 1

PathLike = str | os.PathLike


# -- deterministic JSON text ----------------------------------------------------


def _float_repr(x: float) -> str:
    return repr(float(x))


def _float_17(x: float) -> str:
    return format(float(x), ".17g")


def dumps(obj: Any, float_fmt: Callable[[float], str] = _float_repr) -> str:
    """Compact JSON with a chosen float format; rejects NaN and infinity."""
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            raise NumericError(f"cannot serialize non-finite float {obj}")
        return float_fmt(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), float_fmt)
    if isinstance(obj, dict):
        return "{" + ",".join(json.dumps(str(k)) + ":" + dumps(v, float_fmt) for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(dumps(v, float_fmt) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _write_text(path: PathLike, text: str) -> None:
    Path(path).write_text(text + "\n", encoding="utf-8")


def _load(path: PathLike) -> Any:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: cannot read ({exc.strerror or exc})") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from exc


def _need(d: Any, key: str, kind: type | tuple[type, ...], where: str) -> Any:
    if not isinstance(d, dict) or key not in d:
        raise DataError(f"{where}: missing field {key!r}")
    v = d[key]
    if kind in (int, (int,)) and isinstance(v, bool) or not isinstance(v, kind):
        raise DataError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}, got {type(v).__name__}")
    return v


def _check_version(d: Any, expected: Any, where: str) -> None:
    if not isinstance(d, dict):
        raise DataError(f"{where}: top level must be an object")
    if d.get("version") != expected:
        raise DataError(f"{where}: unsupported version {d.get('version')!r}, expected {expected!r}")


# -- graphs ---------------------------------------------------------------------


def graph_to_dict(dag: SmtDag) -> dict:
    return {
        "version": GRAPH_VERSION,
        "id": dag.id,
        "nodes": [{"id": n.id, "kind": n.kind.value, "signature": n.signature} for n in dag.nodes],
        "edges": [{"src": e.src, "dst": e.dst, "pos": e.pos} for e in dag.edges],
    }


def graph_from_dict(d: Any, where: str = "graph") -> SmtDag:
    """Parse and validate one graph object; the version field is optional inside corpora."""
    if isinstance(d, dict) and "version" in d and d["version"] != GRAPH_VERSION:
        raise DataError(f"{where}: unsupported graph version {d['version']!r}")
    gid = _need(d, "id", str, where)
    raw_nodes = _need(d, "nodes", list, where)
    raw_edges = _need(d, "edges", list, where)
    nodes = []
    for i, n in enumerate(raw_nodes):
        w = f"{where}.nodes[{i}]"
        nid = _need(n, "id", int, w)
        if nid != i:
            raise DataError(f"{w}: node ids must be dense and in order, found {nid} at index {i}")
        kind = _need(n, "kind", str, w)
        if kind not in ("entity", "function", "relation"):
            raise DataError(f"{w}.kind: unknown node kind {kind!r}")
        nodes.append((kind, _need(n, "signature", str, w)))
    edges = []
    for i, e in enumerate(raw_edges):
        w = f"{where}.edges[{i}]"
        edges.append((_need(e, "src", int, w), _need(e, "dst", int, w), _need(e, "pos", int, w)))
    dag = SmtDag.build(nodes, edges, gid)
    problems = validate_dag(dag)
    if problems:
        raise DataError(f"{where} ({gid!r}): " + "; ".join(problems))
    return dag


def write_graph(path: PathLike, dag: SmtDag) -> None:
    _write_text(path, dumps(graph_to_dict(dag)))


def read_graph(path: PathLike) -> SmtDag:
    d = _load(path)
    _check_version(d, GRAPH_VERSION, str(path))
    return graph_from_dict(d, str(path))


# -- corpora (also used for gold files) -----------------------------------------


def corpus_to_dict(instances: Sequence[AnalogyInstance]) -> dict:
    graphs: dict[str, SmtDag] = {}
    pairs = []
    for inst in instances:
        for g in (inst.base, inst.target):
            seen = graphs.setdefault(g.id, g)
            if seen != g:
                raise DataError(f"two different graphs share the id {g.id!r}")
        gold = None if inst.gold is None else [[b, t] for b, t in inst.gold]
        pairs.append({"id": inst.id, "base": inst.base.id, "target": inst.target.id, "gold": gold})
    out_graphs = []
    for g in graphs.values():
        d = graph_to_dict(g)
        del d["version"]
        out_graphs.append(d)
    return {"version": FILE_VERSION, "graphs": out_graphs, "pairs": pairs}


def corpus_from_dict(d: Any, where: str = "corpus") -> list[AnalogyInstance]:
    _check_version(d, FILE_VERSION, where)
    graphs: dict[str, SmtDag] = {}
    for i, g in enumerate(_need(d, "graphs", list, where)):
        dag = graph_from_dict(g, f"{where}.graphs[{i}]")
        if dag.id in graphs:
            raise DataError(f"{where}.graphs[{i}]: duplicate graph id {dag.id!r}")
        graphs[dag.id] = dag
    out = []
    ids: set[str] = set()
    for i, p in enumerate(_need(d, "pairs", list, where)):
        w = f"{where}.pairs[{i}]"
        pid = _need(p, "id", str, w)
        if pid in ids:
            raise DataError(f"{w}: duplicate pair id {pid!r}")
        ids.add(pid)
        refs = []
        for side in ("base", "target"):
            ref = _need(p, side, str, w)
            if ref not in graphs:
                raise DataError(f"{w}.{side}: unknown graph id {ref!r}")
            refs.append(graphs[ref])
        gold = p.get("gold")
        if gold is not None:
            if not isinstance(gold, list) or not all(
                isinstance(x, list) and len(x) == 2 and all(isinstance(v, int) and not isinstance(v, bool) for v in x)
                for x in gold
            ):
                raise DataError(f"{w}.gold: expected a list of [base, target] integer pairs or null")
            gold = tuple((b, t) for b, t in gold)
        try:
            out.append(AnalogyInstance(refs[0], refs[1], gold, pid))
        except DataError as exc:
            raise DataError(f"{w}: {exc}") from exc
    return out


def write_corpus(path: PathLike, instances: Sequence[AnalogyInstance]) -> None:
    _write_text(path, dumps(corpus_to_dict(instances)))


def read_corpus(path: PathLike) -> list[AnalogyInstance]:
    return corpus_from_dict(_load(path), str(path))


# -- encoder checkpoints ----------------------------------------------------------


def checkpoint_to_dict(params: EncoderParams, vocab: SignatureVocab) -> dict:
    return {
        "version": FILE_VERSION,
        "config": {
            "encoder": asdict(params.config),
            "in_dim": params.in_dim,
            "vocab": {"groups": [list(g) for g in vocab.groups], "dim": vocab.dim},
        },
        "vocab_seed": vocab.seed,
        "weights": {k: params.weights[k] for k in sorted(params.weights)},
    }


def checkpoint_from_dict(d: Any, where: str = "checkpoint") -> tuple[EncoderParams, SignatureVocab]:
    _check_version(d, FILE_VERSION, where)
    cfg = _need(d, "config", dict, where)
    try:
        config = EmbedConfig(**_need(cfg, "encoder", dict, f"{where}.config"))
        v = _need(cfg, "vocab", dict, f"{where}.config")
        vocab = SignatureVocab(
            tuple(tuple(g) for g in _need(v, "groups", list, f"{where}.config.vocab")),
            _need(v, "dim", int, f"{where}.config.vocab"),
            _need(d, "vocab_seed", int, where),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"{where}.config: {exc}") from exc
    in_dim = _need(cfg, "in_dim", int, f"{where}.config")
    raw = _need(d, "weights", dict, where)
    shapes = expected_shapes(config, in_dim)
    if set(raw) != set(shapes):
        raise DataError(f"{where}.weights: tensor names {sorted(raw)} do not match {sorted(shapes)}")
    weights = {}
    for name in sorted(shapes):
        try:
            w = np.asarray(raw[name], dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise DataError(f"{where}.weights.{name}: not a numeric array") from exc
        if w.shape != shapes[name]:
            raise DataError(f"{where}.weights.{name}: shape {w.shape}, expected {shapes[name]}")
        weights[name] = w
    params = EncoderParams(config, in_dim, weights)
    try:
        params.check()
    except (ValueError, NumericError) as exc:
        raise DataError(f"{where}: {exc}") from exc
    return params, vocab


def write_checkpoint(path: PathLike, params: EncoderParams, vocab: SignatureVocab) -> None:
    d = checkpoint_to_dict(params, vocab)
    weights = d.pop("weights")
    head = dumps(d)
    _write_text(path, head[:-1] + ',"weights":' + dumps(weights, _float_17) + "}")


def read_checkpoint(path: PathLike) -> tuple[EncoderParams, SignatureVocab]:
    return checkpoint_from_dict(_load(path), str(path))


# -- predictions ------------------------------------------------------------------


@dataclass
class Prediction:
    id: str
    scores: np.ndarray
    binary: np.ndarray
    objective_trace: list[float] = field(default_factory=list)
    candidates: list[CandidateInference] = field(default_factory=list)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Prediction):
            return NotImplemented
        return (
            self.id == other.id
            and np.array_equal(self.scores, other.scores)
            and np.array_equal(self.binary, other.binary)
            and list(self.objective_trace) == list(other.objective_trace)
            and list(self.candidates) == list(other.candidates)
        )


def predictions_to_dict(preds: Sequence[Prediction]) -> dict:
    return {
        "version": FILE_VERSION,
        "pairs": [
            {
                "id": p.id,
                "scores": np.asarray(p.scores, dtype=np.float64),
                "binary": np.asarray(p.binary).astype(np.int64),
                "objective_trace": [float(v) for v in p.objective_trace],
                "candidates": [{"base": c.base, "anchors": list(c.anchors)} for c in p.candidates],
            }
            for p in preds
        ],
    }


def _matrix(v: Any, where: str, dtype: type) -> np.ndarray:
    if not isinstance(v, list) or not all(isinstance(r, list) for r in v):
        raise DataError(f"{where}: expected a list of rows")
    if v and len({len(r) for r in v}) != 1:
        raise DataError(f"{where}: rows have different lengths")
    try:
        m = np.asarray(v, dtype=dtype)
    except (TypeError, ValueError) as exc:
        raise DataError(f"{where}: non-numeric entry") from exc
    return m.reshape(len(v), len(v[0]) if v else 0)


def predictions_from_dict(d: Any, where: str = "predictions") -> list[Prediction]:
    _check_version(d, FILE_VERSION, where)
    out = []
    for i, p in enumerate(_need(d, "pairs", list, where)):
        w = f"{where}.pairs[{i}]"
        scores = _matrix(_need(p, "scores", list, w), f"{w}.scores", np.float64)
        binary = _matrix(_need(p, "binary", list, w), f"{w}.binary", np.float64)
        if scores.shape != binary.shape:
            raise DataError(f"{w}: scores {scores.shape} and binary {binary.shape} differ in shape")
        if not np.all((binary == 0) | (binary == 1)):
            raise DataError(f"{w}.binary: entries must be 0 or 1")
        trace = [float(v) for v in _need(p, "objective_trace", list, w)]
        cands = [
            CandidateInference(_need(c, "base", int, f"{w}.candidates[{j}]"), tuple(_need(c, "anchors", list, f"{w}.candidates[{j}]")))
            for j, c in enumerate(_need(p, "candidates", list, w))
        ]
        out.append(Prediction(_need(p, "id", str, w), scores, binary, trace, cands))
    return out


def write_predictions(path: PathLike, preds: Sequence[Prediction]) -> None:
    _write_text(path, dumps(predictions_to_dict(preds)))


def read_predictions(path: PathLike) -> list[Prediction]:
    return predictions_from_dict(_load(path), str(path))


# -- metrics ----------------------------------------------------------------------


def write_json(path: PathLike, obj: dict) -> None:
    _write_text(path, dumps(obj))


def read_json(path: PathLike) -> Any:
    return _load(path)


# -- heatmaps ---------------------------------------------------------------------


def heatmap_bytes(scores: np.ndarray) -> bytes:
    """Binary PGM (P5, maxval 255) with one pixel per cell, rows = base nodes."""
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 2:
        raise DataError(f"heatmap needs a 2-D score matrix, got shape {s.shape}")
    if s.size and (not np.all(np.isfinite(s)) or s.min() < 0.0 or s.max() > 1.0):
        raise DataError("heatmap scores must lie in [0, 1]")
    # round half away from zero so 0.1 * 255 = 25.5 becomes 26
    pixels = np.floor(255.0 * s + 0.5).astype(np.uint8)
    rows, cols = s.shape
    return f"P5\n{cols} {rows}\n255\n".encode("ascii") + pixels.tobytes()


def export_heatmap(scores: np.ndarray, path: PathLike) -> None:
    Path(path).write_bytes(heatmap_bytes(scores))
