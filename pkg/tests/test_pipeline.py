from dataclasses import replace

import numpy as np
import pytest

from conftest import SMALL
from smt_analogy.dag import SmtDag
from smt_analogy.errors import DataError
from smt_analogy.fileio import read_json, read_predictions, write_corpus
from smt_analogy.inference import InferenceConfig
from smt_analogy.oracle import SearchLimits, verify_alignment
from smt_analogy.pipeline import (
    THREADS_ENV,
    Failure,
    evaluate,
    infer_corpus,
    map_pairs,
    oracle_corpus,
    run_pipeline,
    worker_count,
)
from smt_analogy.synth import AnalogyInstance, GenParams, make_corpus, sample_analogy_pair

CFG = InferenceConfig(max_iters=300, lr=0.01)


def test_empty_corpus(tmp_path, model_file):
    write_corpus(tmp_path / "c.json", [])
    m = run_pipeline(tmp_path / "c.json", model_file, CFG, tmp_path / "p.json", tmp_path / "m.json")
    agg = m["aggregate"]
    assert (agg["tp"], agg["fp"], agg["tn"], agg["fn"]) == (0, 0, 0, 0)
    assert agg["pairs_scored"] == 0 and m["pairs"] == [] and m["failures"] == []
    assert read_json(tmp_path / "m.json") == m


def test_oracle_gold_used_when_missing(tmp_path, model_file):
    p = GenParams(depth_min=2, depth_max=4, max_nodes=15, distractor=0.0, relabel=0.0, base_max_nodes=8)
    inst = replace(sample_analogy_pair(p, 5, "only"), gold=None)
    write_corpus(tmp_path / "c.json", [inst])
    m = run_pipeline(tmp_path / "c.json", model_file, CFG, tmp_path / "p.json", tmp_path / "m.json")
    assert m["aggregate"]["pairs_scored"] == 1
    row = m["pairs"][0]
    assert row["id"] == "only" and 0.0 <= row["f1"] <= 1.0
    pred = read_predictions(tmp_path / "p.json")[0]
    assert pred.scores.shape == (inst.base.n, inst.target.n)


def test_rerun_is_byte_identical(tmp_path, model_file):
    write_corpus(tmp_path / "c.json", make_corpus(SMALL, 3, 1))
    for tag in ("a", "b"):
        run_pipeline(tmp_path / "c.json", model_file, CFG, tmp_path / f"p{tag}.json", tmp_path / f"m{tag}.json")
    assert (tmp_path / "pa.json").read_bytes() == (tmp_path / "pb.json").read_bytes()
    assert (tmp_path / "ma.json").read_bytes() == (tmp_path / "mb.json").read_bytes()


def test_failures_recorded_and_others_continue(small_encoder, vocab):
    good = make_corpus(SMALL, 2, 3)
    big = sample_analogy_pair(GenParams(depth_min=5, depth_max=6, base_max_nodes=30, max_nodes=60), 0, "big")
    big = replace(big, gold=None)
    preds, failures = infer_corpus(good + [big], small_encoder, vocab, CFG, workers=1)
    assert failures == [] and len(preds) == 3
    m = evaluate(preds, good + [big], SearchLimits(max_base=8))
    assert m["aggregate"]["pairs_scored"] == 2
    assert [f["id"] for f in m["failures"]] == ["big"]
    assert "SizeLimitError" in m["failures"][0]["error"]


def test_gold_breaking_rules_is_rejected(small_encoder, vocab):
    inst = sample_analogy_pair(SMALL, 1, "bad")
    (b, t) = inst.gold[0]
    wrong = [(b, t2) for t2 in range(inst.target.n) if inst.target.kind(t2) is not inst.base.kind(b)][:1]
    bad = replace(inst, gold=tuple(wrong))
    assert not verify_alignment(bad.base, bad.target, bad.gold_matrix()).all_rules
    preds, _ = infer_corpus([bad], small_encoder, vocab, CFG, workers=1)
    m = evaluate(preds, [bad])
    assert m["aggregate"]["pairs_scored"] == 0
    assert "gold alignment breaks" in m["failures"][0]["error"]


def test_missing_prediction_is_a_failure():
    inst = sample_analogy_pair(SMALL, 2, "lonely")
    m = evaluate([], [inst])
    assert m["failures"] == [{"id": "lonely", "error": "no prediction for this pair"}]


def test_oracle_corpus_fills_gold():
    insts = [replace(i, gold=None) for i in make_corpus(SMALL, 3, 4)]
    solved, failures = oracle_corpus(insts, workers=1)
    assert failures == []
    for inst in solved:
        assert inst.gold and verify_alignment(inst.base, inst.target, inst.gold_matrix()).all_rules


def _square(x):
    if x < 0:
        raise DataError("negative")
    return x * x


def test_map_pairs_pool_keeps_order():
    items = [3, -1, 2, 5, 4]
    serial = map_pairs(_square, items, workers=1)
    pooled = map_pairs(_square, items, workers=2)
    assert serial == pooled
    assert serial[0] == 9 and isinstance(serial[1], Failure)


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "1")
    assert worker_count() == 1
    monkeypatch.setenv(THREADS_ENV, "zero")
    with pytest.raises(DataError):
        worker_count()
    monkeypatch.setenv(THREADS_ENV, "0")
    with pytest.raises(DataError):
        worker_count()


def test_thread_count_does_not_change_output(tmp_path, model_file, monkeypatch):
    write_corpus(tmp_path / "c.json", make_corpus(SMALL, 4, 8))
    for n in ("1", "2"):
        monkeypatch.setenv(THREADS_ENV, n)
        run_pipeline(tmp_path / "c.json", model_file, CFG, tmp_path / f"p{n}.json", tmp_path / f"m{n}.json", workers=int(n))
    assert (tmp_path / "p1.json").read_bytes() == (tmp_path / "p2.json").read_bytes()
    assert (tmp_path / "m1.json").read_bytes() == (tmp_path / "m2.json").read_bytes()
