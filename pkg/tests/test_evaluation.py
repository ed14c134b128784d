import json

import numpy as np
import numpy.testing as npt
import pytest

from epag.corpus import LabeledRecord, MoveLabel
from epag.encoder import EncoderConfig
from epag.evaluation import (
    ConfusionMatrix,
    confusion,
    emit_report,
    evaluate,
    metrics,
    report_rows,
)
from epag.model import MoveModel
from epag.tokenizer import SubwordVocab


def bruteforce_metrics(preds, golds):
    """Independent recomputation straight from the label pairs."""
    classes = range(5)
    per = {}
    for c in classes:
        tp = sum(1 for p, g in zip(preds, golds) if p == c and g == c)
        pred_c = sum(1 for p in preds if p == c)
        gold_c = sum(1 for g in golds if g == c)
        p = tp / pred_c if pred_c else 0.0
        r = tp / gold_c if gold_c else 0.0
        f = 2 * p * r / (p + r) if (p + r) else 0.0
        per[c] = (p, r, f, pred_c, gold_c)
    active = [c for c in classes if per[c][3] + per[c][4] > 0]
    macro_p = sum(per[c][0] for c in active) / len(active)
    macro_r = sum(per[c][1] for c in active) / len(active)
    macro_f = sum(per[c][2] for c in active) / len(active)
    acc = sum(1 for p, g in zip(preds, golds) if p == g) / len(preds)
    return per, macro_p, macro_r, macro_f, acc


class TestConfusion:
    def test_counting(self):
        cm = confusion([0, 0, 1], [0, 1, 1]).array
        expected = np.zeros((5, 5), dtype=int)
        expected[0, 0] = 1
        expected[1, 0] = 1
        expected[1, 1] = 1
        npt.assert_array_equal(cm, expected)

    def test_perfect_predictions_diagonal(self):
        labels = [0, 1, 2, 3, 4, 2, 2]
        cm = confusion(labels, labels).array
        assert (cm - np.diag(np.diag(cm)) == 0).all()
        assert cm.sum() == len(labels)

    def test_empty_error(self):
        with pytest.raises(ValueError):
            confusion([], [])

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            confusion([0], [0, 1])

    def test_negative_counts_rejected(self):
        bad = [[0] * 5 for _ in range(5)]
        bad[0][0] = -1
        with pytest.raises(ValueError):
            ConfusionMatrix(tuple(tuple(row) for row in bad))


class TestMetrics:
    def test_worked_three_record_example(self):
        report = metrics(confusion([0, 0, 1], [0, 1, 1]))
        assert report.precision[0] == 0.5 and report.recall[0] == 1.0
        assert report.precision[1] == 1.0 and report.recall[1] == 0.5
        assert report.f1[0] == report.f1[1] == 2 / 3
        assert report.macro_f1 == 2 / 3
        assert report.accuracy == 2 / 3

    def test_perfect_diagonal_all_ones(self):
        report = metrics(confusion([0, 1, 2, 3, 4], [0, 1, 2, 3, 4]))
        assert report.macro_f1 == 1.0
        assert report.accuracy == 1.0
        assert all(v == 1.0 for v in report.precision)

    def test_absent_class_excluded_from_macro(self):
        # only classes 0 and 1 appear; macro runs over those two
        report = metrics(confusion([0, 1], [0, 1]))
        assert report.macro_f1 == 1.0
        assert report.f1[4] == 0.0

    def test_matches_bruteforce_on_random_inputs(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(1, 101))
            preds = rng.integers(0, 5, size=n).tolist()
            golds = rng.integers(0, 5, size=n).tolist()
            report = metrics(confusion(preds, golds))
            per, mp, mr, mf, acc = bruteforce_metrics(preds, golds)
            for c in range(5):
                assert abs(report.precision[c] - per[c][0]) < 1e-12
                assert abs(report.recall[c] - per[c][1]) < 1e-12
                assert abs(report.f1[c] - per[c][2]) < 1e-12
            assert abs(report.macro_precision - mp) < 1e-12
            assert abs(report.macro_recall - mr) < 1e-12
            assert abs(report.macro_f1 - mf) < 1e-12
            assert abs(report.accuracy - acc) < 1e-12

    def test_macro_invariant_under_relabeling(self):
        rng = np.random.default_rng(1)
        preds = rng.integers(0, 5, size=60).tolist()
        golds = rng.integers(0, 5, size=60).tolist()
        base = metrics(confusion(preds, golds))
        perm = rng.permutation(5)
        permuted = metrics(
            confusion([perm[p] for p in preds], [perm[g] for g in golds])
        )
        assert abs(base.macro_f1 - permuted.macro_f1) < 1e-12
        assert abs(base.accuracy - permuted.accuracy) < 1e-12

    def test_accuracy_times_total_is_trace(self):
        rng = np.random.default_rng(2)
        preds = rng.integers(0, 5, size=37).tolist()
        golds = rng.integers(0, 5, size=37).tolist()
        cm = confusion(preds, golds)
        report = metrics(cm)
        assert round(report.accuracy * report.total) == np.trace(cm.array)


def zero_weight_model(vocab_size):
    config = EncoderConfig(
        vocab_size=vocab_size, d_model=4, n_heads=2, n_layers=1, k_rel=2,
        mem_len=0, max_seq_len=16,
    )
    model = MoveModel.create(config, d_hidden=3, seed=0)
    for _, t in model.named_parameters():
        t.data[:] = 0.0
    return model


class TestEvaluate:
    def test_tie_breaks_make_all_background_perfect(self):
        vocab = SubwordVocab((("a", -1.0), ("b", -1.5)))
        model = zero_weight_model(vocab.size)
        records = [
            LabeledRecord(str(i), "ab"[i % 2] * 3, MoveLabel.BACKGROUND)
            for i in range(6)
        ]
        report = evaluate(model, vocab, records)
        assert report.accuracy == 1.0

    def test_empty_records_error(self):
        vocab = SubwordVocab((("a", -1.0),))
        with pytest.raises(ValueError):
            evaluate(zero_weight_model(vocab.size), vocab, [])

    def test_deterministic(self):
        vocab = SubwordVocab((("a", -1.0), ("b", -1.5)))
        model = MoveModel.create(
            EncoderConfig(vocab_size=vocab.size, d_model=4, n_heads=2, n_layers=1,
                          k_rel=2, mem_len=0, max_seq_len=16),
            d_hidden=3,
            seed=5,
        )
        records = [
            LabeledRecord(str(i), "abba"[: 1 + i % 4], MoveLabel(i % 5))
            for i in range(8)
        ]
        assert evaluate(model, vocab, records) == evaluate(model, vocab, records)

    def test_thread_env_preserves_results(self, monkeypatch):
        vocab = SubwordVocab((("a", -1.0), ("b", -1.5)))
        model = MoveModel.create(
            EncoderConfig(vocab_size=vocab.size, d_model=4, n_heads=2, n_layers=1,
                          k_rel=2, mem_len=0, max_seq_len=16),
            d_hidden=3,
            seed=6,
        )
        records = [
            LabeledRecord(str(i), "ab" * (1 + i % 3), MoveLabel(i % 5))
            for i in range(10)
        ]
        serial = evaluate(model, vocab, records)
        monkeypatch.setenv("EPAG_THREADS", "4")
        assert evaluate(model, vocab, records) == serial


class TestEmitReport:
    def sample_report(self):
        return metrics(confusion([0, 0, 1, 2], [0, 1, 1, 2]))

    def test_tsv_percentage_format(self, tmp_path):
        report = self.sample_report()
        p = tmp_path / "report.tsv"
        emit_report(report, p, "tsv")
        lines = p.read_text(encoding="utf-8").splitlines()
        row = dict(line.split("\t") for line in lines)
        assert row["accuracy"] == "75.00"
        assert row["macro_f1"] == f"{100 * report.macro_f1:.2f}"
        assert row["total"] == "4"

    def test_json_roundtrip_exact(self, tmp_path):
        report = self.sample_report()
        p = tmp_path / "report.json"
        emit_report(report, p, "json")
        data = json.loads(p.read_text(encoding="utf-8"))
        assert data["macro_f1"] == report.macro_f1
        assert data["accuracy"] == report.accuracy
        assert data["support"] == list(report.support)

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError, match="unknown report format"):
            emit_report(self.sample_report(), tmp_path / "x", "xml")

    def test_rows_cover_all_classes(self):
        rows = report_rows(self.sample_report())
        names = [r[0] for r in rows]
        for label in ("background", "purpose", "method", "result", "conclusion"):
            assert f"f1_{label}" in names
            assert f"support_{label}" in names
