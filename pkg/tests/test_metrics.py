import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smt_analogy.metrics import compute_metrics, exact_match, micro_metrics, roc_auc

# scores, pred, gold -> (tp, fp, tn, fn, accuracy, precision, recall, f1, auc), all worked out by hand
FIXTURES = [
    # concordant pairs: 0.35 > 0.1 and 0.8 > both negatives, 0.35 < 0.4 -> 3 of 4
    ([0.1, 0.4, 0.35, 0.8], [0, 0, 0, 1], [0, 0, 1, 1], (1, 0, 2, 1, 3 / 4, 1.0, 1 / 2, 2 / 3, 0.75)),
    ([0.9, 0.1, 0.8, 0.2], [1, 0, 1, 0], [1, 0, 1, 0], (2, 0, 2, 0, 1.0, 1.0, 1.0, 1.0, 1.0)),
    # positives 0.2, 0.4 against negatives 0.1, 0.3, 0.0: 2 + 3 of 6
    ([0.2, 0.1, 0.3, 0.4, 0.0], [0, 0, 0, 0, 0], [1, 0, 0, 1, 0], (0, 0, 3, 2, 3 / 5, 0.0, 0.0, 0.0, 5 / 6)),
    ([0.6, 0.2, 0.7], [1, 0, 1], [0, 0, 0], (0, 2, 1, 0, 1 / 3, 0.0, 0.0, 0.0, 0.5)),
    ([0.3, 0.9], [0, 1], [1, 1], (1, 0, 0, 1, 1 / 2, 1.0, 1 / 2, 2 / 3, 0.5)),
    ([0.5, 0.5, 0.5, 0.5], [1, 1, 0, 0], [1, 0, 1, 0], (1, 1, 1, 1, 1 / 2, 1 / 2, 1 / 2, 1 / 2, 0.5)),
    ([0.1, 0.9, 0.2, 0.8], [0, 1, 0, 1], [1, 0, 1, 0], (0, 2, 0, 2, 0.0, 0.0, 0.0, 0.0, 0.0)),
    # 2 x 3 matrix; positives 0.7, 0.4 against 0.6, 0.1, 0.2, 0.3: 4 + 3 of 8
    (
        [[0.7, 0.6, 0.1], [0.2, 0.3, 0.4]],
        [[1, 1, 0], [0, 0, 0]],
        [[1, 0, 0], [0, 0, 1]],
        (1, 1, 3, 1, 4 / 6, 1 / 2, 1 / 2, 1 / 2, 7 / 8),
    ),
    # a tied positive/negative pair counts one half: (0.5 + 1 + 1 + 1) / 4
    ([0.3, 0.3, 0.9, 0.1], [0, 0, 1, 0], [1, 0, 1, 0], (1, 0, 2, 1, 3 / 4, 1.0, 1 / 2, 2 / 3, 0.875)),
    ([[0.6]], [[1]], [[1]], (1, 0, 0, 0, 1.0, 1.0, 1.0, 1.0, 0.5)),
]


@pytest.mark.parametrize("scores, pred, gold, expected", FIXTURES)
def test_hand_computed_fixtures(scores, pred, gold, expected):
    tp, fp, tn, fn, acc, pr, re, f1, auc = expected
    m = compute_metrics(np.array(scores), np.array(pred), np.array(gold))
    assert (m.tp, m.fp, m.tn, m.fn) == (tp, fp, tn, fn)
    assert m.accuracy == pytest.approx(acc, abs=1e-12)
    assert m.precision == pytest.approx(pr, abs=1e-12)
    assert m.recall == pytest.approx(re, abs=1e-12)
    assert m.f1 == pytest.approx(f1, abs=1e-12)
    assert m.roc_auc == pytest.approx(auc, abs=1e-12)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        compute_metrics(np.zeros(3), np.zeros(3), np.zeros(4))


def concordance_auc(s, y):
    pos = [a for a, t in zip(s, y) if t]
    neg = [b for b, t in zip(s, y) if not t]
    if not pos or not neg:
        return 0.5
    return sum(1.0 if a > b else 0.5 if a == b else 0.0 for a in pos for b in neg) / (len(pos) * len(neg))


cells = st.lists(st.tuples(st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]), st.booleans(), st.booleans()), min_size=1, max_size=30)


@settings(max_examples=100)
@given(cells)
def test_auc_equals_concordance(data):
    s = [c[0] for c in data]
    y = [c[1] for c in data]
    assert roc_auc(np.array(s), np.array(y)) == pytest.approx(concordance_auc(s, y), abs=1e-12)


@settings(max_examples=100)
@given(cells, st.randoms())
def test_permutation_symmetry_and_definitions(data, rnd):
    s, g, p = (np.array([c[i] for c in data], dtype=float) for i in range(3))
    m = compute_metrics(s, p, g)
    order = list(range(len(data)))
    rnd.shuffle(order)
    assert compute_metrics(s[order], p[order], g[order]) == m
    assert m.accuracy == pytest.approx((m.tp + m.tn) / len(data))
    if m.precision + m.recall > 0:
        assert m.f1 == pytest.approx(2 * m.precision * m.recall / (m.precision + m.recall))
    else:
        assert m.f1 == 0


@settings(max_examples=100)
@given(cells)
def test_auc_monotone_invariant(data):
    s = np.array([c[0] for c in data])
    y = np.array([c[1] for c in data])
    assert roc_auc(np.exp(3 * s) - 7, y) == pytest.approx(roc_auc(s, y), abs=1e-12)


def test_micro_pools_cells():
    a = (np.array([[0.9, 0.1]]), np.array([[1, 0]]), np.array([[1, 0]]))
    b = (np.array([[0.2], [0.7]]), np.array([[0], [1]]), np.array([[1], [0]]))
    m = micro_metrics([a, b])
    assert (m.tp, m.fp, m.tn, m.fn) == (1, 1, 1, 1)
    # pooled scores 0.9, 0.1, 0.2, 0.7 with gold 1, 0, 1, 0: concordant (0.9 > both) + (0.2 > 0.1) = 3 of 4
    assert m.roc_auc == 0.75


def test_micro_empty_has_zero_counts():
    m = micro_metrics([])
    assert (m.tp, m.fp, m.tn, m.fn) == (0, 0, 0, 0)
    assert m.f1 == 0.0 and m.roc_auc == 0.5


def test_exact_match():
    assert exact_match(np.eye(2), np.eye(2))
    assert not exact_match(np.eye(2), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        exact_match(np.eye(2), np.eye(3))
