"""Tests for Micro-F, Macro-F and frequency buckets"""

import numpy as np
import pytest

from homer.evaluation import (
    bucket_index,
    bucketed_report,
    confusion,
    evaluate,
    macro_f1,
    micro_f1,
    per_label_f1,
)


def test_worked_example():
    truth = [{0, 1}, {1}, {2}]
    predicted = [{0}, {1, 2}, set()]
    c = confusion(truth, predicted, 3)

    assert c.tp.tolist() == [1, 1, 0]
    assert c.fp.tolist() == [0, 0, 1]
    assert c.fn.tolist() == [0, 1, 1]
    # 2*2 / (2*2 + 1 + 2)
    assert micro_f1(c) == pytest.approx(4 / 7)
    assert per_label_f1(c) == pytest.approx([1.0, 2 / 3, 0.0])
    assert macro_f1(c) == pytest.approx((1.0 + 2 / 3) / 3)


def test_perfect_and_empty_predictions():
    truth = [{0}, {1, 2}, {0, 2}]
    perfect = evaluate(truth, truth, 3)
    assert perfect.micro_f == 1.0
    assert perfect.macro_f == 1.0

    empty = evaluate(truth, [set(), set(), set()], 3)
    assert empty.micro_f == 0.0
    assert empty.macro_f == 0.0


def test_labels_never_seen_count_as_zero_in_macro_f():
    # label 2 has tp = fp = fn = 0
    c = confusion([{0}, {1}], [{0}, {1}], 3)
    assert micro_f1(c) == 1.0
    assert macro_f1(c) == pytest.approx(2 / 3)


def test_nothing_counted_gives_zero():
    c = confusion([], [], 4)
    assert micro_f1(c) == 0.0
    assert macro_f1(c) == 0.0


def test_scores_match_a_direct_computation_on_random_cases():
    rng = np.random.default_rng(17)
    for _ in range(100):
        num_labels = int(rng.integers(1, 15))
        n = int(rng.integers(1, 40))
        truth = [set(np.flatnonzero(rng.random(num_labels) < 0.3).tolist()) for _ in range(n)]
        predicted = [set(np.flatnonzero(rng.random(num_labels) < 0.3).tolist()) for _ in range(n)]

        tp = sum(len(t & p) for t, p in zip(truth, predicted))
        fp = sum(len(p - t) for t, p in zip(truth, predicted))
        fn = sum(len(t - p) for t, p in zip(truth, predicted))
        expected_micro = 2 * tp / (2 * tp + fp + fn) if tp + fp + fn else 0.0

        f1s = []
        for l in range(num_labels):
            ltp = sum(1 for t, p in zip(truth, predicted) if l in t and l in p)
            lfp = sum(1 for t, p in zip(truth, predicted) if l not in t and l in p)
            lfn = sum(1 for t, p in zip(truth, predicted) if l in t and l not in p)
            f1s.append(2 * ltp / (2 * ltp + lfp + lfn) if ltp + lfp + lfn else 0.0)

        report = evaluate(truth, predicted, num_labels)
        assert report.micro_f == pytest.approx(expected_micro, abs=1e-12)
        assert report.macro_f == pytest.approx(sum(f1s) / num_labels, abs=1e-12)
        assert 0.0 <= report.micro_f <= 1.0
        assert 0.0 <= report.macro_f <= 1.0


def test_macro_f_does_not_depend_on_label_order():
    rng = np.random.default_rng(3)
    truth = [set(np.flatnonzero(rng.random(30) < 0.2).tolist()) for _ in range(50)]
    predicted = [set(np.flatnonzero(rng.random(30) < 0.2).tolist()) for _ in range(50)]
    permutation = rng.permutation(30)

    shuffled_truth = [{int(permutation[l]) for l in t} for t in truth]
    shuffled_pred = [{int(permutation[l]) for l in p} for p in predicted]
    assert (macro_f1(confusion(truth, predicted, 30))
            == macro_f1(confusion(shuffled_truth, shuffled_pred, 30)))


def test_confusion_rejects_bad_input():
    with pytest.raises(ValueError):
        confusion([{0}], [], 2)
    with pytest.raises(ValueError):
        confusion([{0}], [{5}], 2)


@pytest.mark.parametrize('frequency, expected', [
    (0, 0), (1, 0), (70, 0), (71, 1), (699, 1), (700, 2), (5000, 2),
])
def test_bucket_boundaries(frequency, expected):
    assert bucket_index(frequency, (70, 700)) == expected


def test_no_bounds_gives_one_bucket():
    assert bucket_index(12345, ()) == 0


def test_bucketed_report_names_and_absent_buckets():
    c = confusion([{0, 1}, {1}], [{0}, {1}], 3)
    report = bucketed_report(c, [5, 80, 10])

    assert set(report) == {'rare', 'mid'}
    assert report['rare'].num_labels == 2
    assert report['mid'].num_labels == 1
    assert report['mid'].micro_f == 1.0
    # labels 0 and 2: label 2 never occurs
    assert report['rare'].macro_f == pytest.approx(0.5)


def test_single_covering_bucket_equals_the_global_scores():
    rng = np.random.default_rng(8)
    truth = [set(np.flatnonzero(rng.random(10) < 0.3).tolist()) for _ in range(30)]
    predicted = [set(np.flatnonzero(rng.random(10) < 0.3).tolist()) for _ in range(30)]
    c = confusion(truth, predicted, 10)

    report = bucketed_report(c, rng.integers(0, 100, size=10), bounds=[])
    assert list(report) == ['bucket_0']
    assert report['bucket_0'].micro_f == micro_f1(c)
    assert report['bucket_0'].macro_f == macro_f1(c)


def test_custom_bucket_names_and_bounds():
    c = confusion([{0}, {1}, {2}], [{0}, {1}, {2}], 3)
    report = bucketed_report(c, [1, 5, 50], bounds=[2, 10], names=['low', 'middle', 'high'])
    assert list(report) == ['low', 'middle', 'high']

    generic = bucketed_report(c, [1, 5, 50], bounds=[2, 10, 20, 40])
    assert list(generic) == ['bucket_0', 'bucket_1', 'bucket_4']


def test_bucketed_report_validation():
    c = confusion([{0}], [{0}], 2)
    with pytest.raises(ValueError):
        bucketed_report(c, [1, 2], bounds=[700, 70])
    with pytest.raises(ValueError):
        bucketed_report(c, [1])
    with pytest.raises(ValueError):
        bucketed_report(c, [1, 2], bounds=[70, 700], names=['only-one'])


def test_evaluate_report_to_dict():
    truth = [{0}, {1}]
    report = evaluate(truth, truth, 2, label_frequencies=[100, 1000])
    data = report.to_dict()
    assert data['micro_f'] == 1.0
    assert set(data['buckets']) == {'mid', 'frequent'}
    assert data['per_label_f1'] == [1.0, 1.0]
    assert 'per_label_f1' not in report.to_dict(include_per_label=False)


def test_micro_f_from_summed_counts():
    from homer.evaluation import ConfusionCounts
    c = ConfusionCounts(np.array([6, 4]), np.array([2, 3]), np.array([5, 0]))
    assert micro_f1(c) == pytest.approx(20 / 30)


def test_macro_f_examples():
    assert macro_f1(confusion([{0}], [{0}], 2)) == pytest.approx(0.5)
    # tp = fp = fn = 1 for both labels
    c = confusion([{0, 1}, {0}, {1}], [{0, 1}, {1}, {0}], 2)
    assert c.tp.tolist() == [1, 1]
    assert macro_f1(c) == pytest.approx(0.5)


def test_single_label_confusions():
    c = confusion([{0}], [{1}], 2)
    assert c.fn.tolist() == [1, 0]
    assert c.fp.tolist() == [0, 1]
    assert c.true_frequencies().tolist() == [1, 0]


def test_uniform_frequency_lands_in_one_bucket():
    c = confusion([{0}, {1}], [{0}, {1}], 3)
    report = bucketed_report(c, [100, 100, 100])
    assert list(report) == ['mid']
    assert report['mid'].num_labels == 3
