import json
import math

import numpy as np
import pytest

from gr2n.metrics import (
    MetricsReport,
    accuracy,
    average_precision,
    mean_average_precision,
    per_class_recall,
    recall_list,
)


def test_accuracy_values():
    assert accuracy([0, 1, 2], [0, 1, 2]) == 1.0
    assert accuracy([0, 1, 1, 2], [0, 1, 2, 2]) == 0.75


def test_accuracy_empty_rejected():
    with pytest.raises(ValueError, match="empty"):
        accuracy([], [])


def test_recall_values():
    assert per_class_recall([0, 1, 2, 1], [0, 1, 2, 1], 3).tolist() == [1.0, 1.0, 1.0]
    assert per_class_recall([0, 0, 0], [0, 1, 1], 2).tolist() == [1.0, 0.0]
    # gold (A, A, B), pred (A, B, B)
    assert per_class_recall([0, 1, 1], [0, 0, 1], 2).tolist() == [0.5, 1.0]


def test_recall_absent_class_is_nan():
    r = per_class_recall([0, 0], [0, 0], 2)
    assert r[0] == 1.0 and math.isnan(r[1])
    assert recall_list(r) == [1.0, None]


def test_ap_hand_case():
    # positives ranked 1st and 3rd of 3
    ap = average_precision([0.9, 0.5, 0.1], [True, False, True])
    assert ap == (1 + 2 / 3) / 2
    assert round(ap, 4) == 0.8333


def test_perfect_ranking_map():
    probs = np.array([[0.9, 0.1], [0.8, 0.2], [0.3, 0.7]])
    assert mean_average_precision(probs, [0, 0, 1]) == 1.0


def test_tied_scores_use_stable_order():
    # all scores equal: ranking is the given order, positives at ranks 2 and 3
    assert average_precision([0.5, 0.5, 0.5], [False, True, True]) == (1 / 2 + 2 / 3) / 2
    assert average_precision([0.5, 0.5, 0.5], [True, True, False]) == 1.0


def test_map_excludes_classes_without_positives(caplog):
    probs = np.array([[0.9, 0.1, 0.0], [0.2, 0.8, 0.0]])
    with caplog.at_level("INFO"):
        assert mean_average_precision(probs, [0, 1]) == 1.0
    assert "class 2" in caplog.text


def test_map_hand_case_two_classes():
    probs = np.array([[0.9, 0.1], [0.5, 0.4], [0.1, 0.3], [0.6, 0.2]])
    gold = [0, 1, 0, 1]
    # class 0 ranking: 0(+), 3, 1, 2(+) -> (1 + 2/4)/2; class 1 ranking: 1(+), 2, 3(+), 0 -> (1 + 2/3)/2
    assert mean_average_precision(probs, gold) == pytest.approx(((1 + 0.5) / 2 + (1 + 2 / 3) / 2) / 2, abs=1e-15)


def test_report_files(tmp_path):
    rep = MetricsReport(0.5, [1.0, None], 0.75, 0.1, [(0, 2.0), (10, 1.0)], {"eval_seconds": 0.2})
    rep.write(str(tmp_path))
    doc = json.loads((tmp_path / "metrics.json").read_text())
    assert MetricsReport.from_dict(doc) == rep
    assert (tmp_path / "loss_curve.csv").read_text().splitlines() == ["iteration,loss", "0,2.0", "10,1.0"]
    assert "recall_1," in (tmp_path / "metrics.csv").read_text()
