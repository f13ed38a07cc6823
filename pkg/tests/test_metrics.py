import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperchoice import metrics

# ------------------------------------------------------------------
# Brute-force reference implementations (kept independent of the
# library: exhaustive pair counting for AUC, direct sums elsewhere).
# ------------------------------------------------------------------

def ref_accuracy(p, y, threshold=0.5):
    correct = 0
    for pi, yi in zip(p, y):
        pred = 1 if pi >= threshold else 0
        correct += pred == yi
    return correct / len(p)


def ref_auc(p, y):
    total = wins = 0.0
    for pi, yi in zip(p, y):
        if yi != 1:
            continue
        for pj, yj in zip(p, y):
            if yj != 0:
                continue
            total += 1
            if pi > pj:
                wins += 1
            elif pi == pj:
                wins += 0.5
    return wins / total


def ref_auc_pr(p, y):
    n_pos = sum(1 for yi in y if yi == 1)
    thresholds = sorted(set(p), reverse=True)
    ap = 0.0
    prev_recall = 0.0
    for t in thresholds:
        tp = sum(1 for pi, yi in zip(p, y) if pi >= t and yi == 1)
        fp = sum(1 for pi, yi in zip(p, y) if pi >= t and yi == 0)
        recall = tp / n_pos
        precision = tp / (tp + fp)
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return ap


def ref_ece(p, y, n_bins):
    n = len(p)
    total = 0.0
    for b in range(n_bins):
        members = [(pi, yi) for pi, yi in zip(p, y)
                   if min(int(pi * n_bins), n_bins - 1) == b]
        if not members:
            continue
        conf = sum(pi for pi, _ in members) / len(members)
        frac = sum(yi for _, yi in members) / len(members)
        total += (len(members) / n) * abs(conf - frac)
    return total


def ref_brier(p, y):
    return sum((pi - yi) ** 2 for pi, yi in zip(p, y)) / len(p)


def ref_nll(p, y):
    total = 0.0
    for pi, yi in zip(p, y):
        pi = min(max(pi, 1e-7), 1 - 1e-7)
        total += -(yi * np.log(pi) + (1 - yi) * np.log(1 - pi))
    return total / len(p)


# ---------------------------------------------------------------- accuracy

def test_accuracy_hand_values():
    assert metrics.accuracy([0.9, 0.1, 0.8], [1, 0, 0]) == pytest.approx(2 / 3)


def test_accuracy_perfect():
    assert metrics.accuracy([1.0, 0.0, 1.0], [1, 0, 1]) == 1.0


def test_accuracy_tie_rule():
    # p = 0.5 predicts class 1 under the >= rule
    y = [1, 0, 1, 1]
    assert metrics.accuracy([0.5] * 4, y) == pytest.approx(np.mean(y))


def test_accuracy_length_mismatch():
    with pytest.raises(ValueError):
        metrics.accuracy([0.5], [1, 0])


# ---------------------------------------------------------------- auc

def test_auc_perfect_ranking():
    assert metrics.auc_roc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0


def test_auc_pair_counting_oracle():
    p = [0.8, 0.4, 0.6, 0.2]
    y = [1, 1, 0, 0]
    assert metrics.auc_roc(p, y) == pytest.approx(0.75, abs=1e-15)


def test_auc_all_ties_half():
    assert metrics.auc_roc([0.5] * 6, [1, 0, 1, 0, 1, 0]) == 0.5


def test_auc_single_class_errors():
    with pytest.raises(ValueError):
        metrics.auc_roc([0.1, 0.2], [1, 1])


# ---------------------------------------------------------------- aucpr

def test_aucpr_perfect():
    assert metrics.auc_pr([0.9, 0.8, 0.1], [1, 1, 0]) == 1.0


def test_aucpr_hand_step_sum():
    assert metrics.auc_pr([0.9, 0.8, 0.1], [1, 0, 1]) == pytest.approx(5 / 6, abs=1e-12)


def test_aucpr_random_scores_near_positive_rate():
    rng = np.random.default_rng(0)
    n = 20000
    y = (rng.random(n) < 0.3).astype(int)
    p = rng.random(n)
    assert metrics.auc_pr(p, y) == pytest.approx(0.3, abs=0.05)


def test_aucpr_no_positives_errors():
    with pytest.raises(ValueError):
        metrics.auc_pr([0.5, 0.4], [0, 0])


# ---------------------------------------------------------------- ece

def test_ece_calibrated_bin_zero():
    p = [0.7] * 10
    y = [1] * 7 + [0] * 3
    assert metrics.ece(p, y) == pytest.approx(0.0, abs=1e-15)


def test_ece_single_bin_hand_value():
    assert metrics.ece([0.9] * 5, [0] * 5) == pytest.approx(0.9, abs=1e-15)


def test_ece_one_bin_is_mean_gap():
    rng = np.random.default_rng(1)
    p = rng.random(50)
    y = rng.integers(0, 2, size=50)
    assert metrics.ece(p, y, n_bins=1) == pytest.approx(abs(p.mean() - y.mean()),
                                                        abs=1e-12)


def test_ece_bad_bins():
    with pytest.raises(ValueError):
        metrics.ece([0.5], [1], n_bins=0)


# ---------------------------------------------------------------- brier / nll

def test_brier_values():
    assert metrics.brier([1.0, 0.0], [1, 0]) == 0.0
    assert metrics.brier([0.5, 0.5], [1, 0]) == 0.25
    assert metrics.brier([0.8], [0]) == pytest.approx(0.64, abs=1e-15)


def test_nll_values():
    assert metrics.nll([1.0, 0.0], [1, 0]) < 1e-6
    assert metrics.nll([0.5, 0.5], [0, 1]) == pytest.approx(np.log(2), abs=1e-12)
    assert metrics.nll([0.0], [1]) == pytest.approx(16.11809565095832, abs=1e-10)


# ---------------------------------------------------------------- oracle sweep

def random_instance(rng):
    n = int(rng.integers(2, 21))
    y = rng.integers(0, 2, size=n)
    if y.min() == y.max():
        y[0] = 1 - y[0]
    p = rng.random(n)
    if rng.random() < 0.3:
        p = np.round(p, 1)  # force ties
    return p, y


def test_all_metrics_match_brute_force():
    rng = np.random.default_rng(42)
    for _ in range(200):
        p, y = random_instance(rng)
        n_bins = int(rng.integers(1, 16))
        assert metrics.accuracy(p, y) == pytest.approx(ref_accuracy(p, y), abs=1e-12)
        assert metrics.auc_roc(p, y) == pytest.approx(ref_auc(p, y), abs=1e-12)
        assert metrics.auc_pr(p, y) == pytest.approx(ref_auc_pr(p, y), abs=1e-12)
        assert metrics.ece(p, y, n_bins) == pytest.approx(ref_ece(p, y, n_bins), abs=1e-12)
        assert metrics.brier(p, y) == pytest.approx(ref_brier(p, y), abs=1e-12)
        assert metrics.nll(p, y) == pytest.approx(ref_nll(p, y), abs=1e-12)


# ---------------------------------------------------------------- properties

scores_labels = st.integers(2, 30).flatmap(
    lambda n: st.tuples(
        st.lists(st.floats(0.001, 0.999), min_size=n, max_size=n),
        st.lists(st.integers(0, 1), min_size=n, max_size=n).filter(
            lambda ys: 0 < sum(ys) < len(ys)),
    ))


@settings(max_examples=60, deadline=None)
@given(scores_labels)
def test_auc_invariant_under_monotone_transform(data):
    p, y = np.array(data[0]), np.array(data[1])
    transformed = 1.0 / (1.0 + np.exp(-(3.0 * p + 1.0)))  # strictly increasing
    assert metrics.auc_roc(transformed, y) == pytest.approx(
        metrics.auc_roc(p, y), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(scores_labels)
def test_auc_flip_relationship(data):
    p, y = np.array(data[0]), np.array(data[1])
    assert metrics.auc_roc(1 - p, y) == pytest.approx(
        1 - metrics.auc_roc(p, y), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(scores_labels)
def test_brier_symmetry(data):
    p, y = np.array(data[0]), np.array(data[1])
    assert metrics.brier(p, y) == pytest.approx(metrics.brier(1 - p, 1 - y), abs=1e-14)


# ---------------------------------------------------------------- evaluate

def test_evaluate_constant_predictor():
    class DS:
        X = np.zeros((40, 2))
        y = np.array([1, 0] * 20)

    rate = DS.y.mean()
    report = metrics.evaluate(lambda X: np.full(len(X), rate), DS)
    assert report.auc == 0.5
    assert report.n_test == 40
    assert report.positive_rate == 0.5


def test_evaluate_report_fields_in_range():
    rng = np.random.default_rng(5)

    class DS:
        X = rng.normal(size=(60, 2))
        y = rng.integers(0, 2, size=60)

    report = metrics.evaluate(lambda X: rng.random(len(X)), DS)
    for name in ("acc", "auc", "aucpr", "ece", "brier"):
        assert 0.0 <= getattr(report, name) <= 1.0
    assert report.nll >= 0.0
