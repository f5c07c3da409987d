"""Batch stages over corpora: inference, oracle gold, scoring.

Per-pair failures (bad data, oversized instances, non-finite objectives)
are recorded and the remaining pairs carry on. Pairs may be processed by a
process pool whose size is capped by ``SMT_ANALOGY_THREADS``; results keep
corpus order, so outputs do not depend on the worker count.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import partial
from typing import Callable, Sequence, TypeVar

import numpy as np

from .embedding import EncoderParams
from .errors import DataError, NumericError
from .fileio import Prediction, read_checkpoint, read_corpus, write_json, write_predictions
from .inference import InferenceConfig, candidate_inferences, discretize, optimize_alignment
from .metrics import compute_metrics, exact_match, micro_metrics
from .oracle import SearchLimits, exact_structure_map, verify_alignment
from .synth import AnalogyInstance
from .vocab import SignatureVocab

log = logging.getLogger(__name__)

THREADS_ENV = "SMT_ANALOGY_THREADS"
RECOVERABLE = (DataError, NumericError, ValueError)

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True)
class Failure:
    id: str
    error: str


def worker_count() -> int:
    cpus = os.cpu_count() or 1
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return cpus
    try:
        cap = int(raw)
    except ValueError as exc:
        raise DataError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from exc
    if cap < 1:
        raise DataError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return min(cap, cpus)


def _guarded(fn: Callable[[T], R], item: T) -> R | Failure:
    try:
        return fn(item)
    except RECOVERABLE as exc:
        return Failure(getattr(item, "id", ""), f"{type(exc).__name__}: {exc}")


def map_pairs(fn: Callable[[T], R], items: Sequence[T], workers: int | None = None) -> list[R | Failure]:
    """Apply ``fn`` to every item in order; recoverable errors become :class:`Failure`."""
    workers = worker_count() if workers is None else workers
    task = partial(_guarded, fn)
    if workers <= 1 or len(items) <= 1:
        return [task(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(task, items, chunksize=max(1, len(items) // (4 * workers))))


def _split(results: Sequence[R | Failure]) -> tuple[list[R], list[Failure]]:
    ok = [r for r in results if not isinstance(r, Failure)]
    bad = [r for r in results if isinstance(r, Failure)]
    for f in bad:
        log.warning("pair %s failed: %s", f.id, f.error)
    return ok, bad


# -- inference --------------------------------------------------------------------


def predict(inst: AnalogyInstance, params: EncoderParams, vocab: SignatureVocab, config: InferenceConfig) -> Prediction:
    ca = optimize_alignment(config, inst, params, vocab)
    binary = discretize(ca.scores, config.tau)
    cands = candidate_inferences(inst.base, inst.target, binary)
    return Prediction(inst.id, ca.scores, binary, list(ca.trace), cands)


def infer_corpus(
    instances: Sequence[AnalogyInstance],
    params: EncoderParams,
    vocab: SignatureVocab,
    config: InferenceConfig,
    workers: int | None = None,
) -> tuple[list[Prediction], list[Failure]]:
    fn = partial(predict, params=params, vocab=vocab, config=config)
    return _split(map_pairs(fn, instances, workers))


# -- oracle gold ------------------------------------------------------------------


def with_oracle_gold(inst: AnalogyInstance, limits: SearchLimits = SearchLimits()) -> AnalogyInstance:
    best = exact_structure_map(inst.base, inst.target, limits, enumerate_maximal=False).best
    return replace(inst, gold=best)


def oracle_corpus(
    instances: Sequence[AnalogyInstance],
    limits: SearchLimits = SearchLimits(),
    workers: int | None = None,
) -> tuple[list[AnalogyInstance], list[Failure]]:
    """Replace every pair's gold with the oracle's best mapping."""
    return _split(map_pairs(partial(with_oracle_gold, limits=limits), instances, workers))


# -- scoring ----------------------------------------------------------------------


def _score_pair(pred: Prediction, inst: AnalogyInstance) -> dict:
    gold = inst.gold_matrix()
    expected = (inst.base.n, inst.target.n)
    if pred.scores.shape != expected:
        raise DataError(f"prediction has shape {pred.scores.shape}, instance is {expected}")
    report = verify_alignment(inst.base, inst.target, gold)
    if not report.all_rules:
        raise DataError(
            "gold alignment breaks structure-mapping rules "
            f"(connectivity {report.connectivity_violations}, one-to-one {report.one_to_one_violations}, "
            f"identicality {report.identicality_violations})"
        )
    m = compute_metrics(pred.scores, pred.binary, gold)
    pred_report = verify_alignment(inst.base, inst.target, pred.binary)
    return {"id": pred.id, **m.to_dict(), "exact_match": exact_match(pred.binary, gold), "rules_ok": pred_report.all_rules}


def evaluate(
    preds: Sequence[Prediction],
    gold: Sequence[AnalogyInstance],
    limits: SearchLimits = SearchLimits(),
    failures: Sequence[Failure] = (),
) -> dict:
    """Per-pair and micro-averaged metrics; pairs without gold get it from the oracle."""
    by_id = {p.id: p for p in preds}
    failed = list(failures)
    known = {f.id for f in failed}
    rows, cells = [], []
    for inst in gold:
        pred = by_id.get(inst.id)
        if pred is None:
            if inst.id not in known:
                failed.append(Failure(inst.id, "no prediction for this pair"))
            continue
        try:
            if inst.gold is None:
                inst = with_oracle_gold(inst, limits)
            rows.append(_score_pair(pred, inst))
        except RECOVERABLE as exc:
            failed.append(Failure(inst.id, f"{type(exc).__name__}: {exc}"))
            continue
        cells.append((pred.scores, pred.binary, inst.gold_matrix()))
    agg = micro_metrics(cells).to_dict()
    agg["exact_match_rate"] = float(np.mean([r["exact_match"] for r in rows])) if rows else 0.0
    agg["pairs_scored"] = len(rows)
    agg["pairs_failed"] = len(failed)
    return {
        "version": 1,
        "aggregate": agg,
        "pairs": rows,
        "failures": [{"id": f.id, "error": f.error} for f in failed],
    }


def run_pipeline(
    corpus_path: str | os.PathLike,
    model_path: str | os.PathLike,
    config: InferenceConfig,
    pred_out: str | os.PathLike,
    metrics_out: str | os.PathLike,
    limits: SearchLimits = SearchLimits(),
    workers: int | None = None,
) -> dict:
    """Infer every pair, score against file or oracle gold, write both outputs."""
    instances = read_corpus(corpus_path)
    params, vocab = read_checkpoint(model_path)
    preds, failures = infer_corpus(instances, params, vocab, config, workers)
    write_predictions(pred_out, preds)
    metrics = evaluate(preds, instances, limits, failures)
    write_json(metrics_out, metrics)
    return metrics
