"""Domain types: corpus validation, dataset containers, report invariants."""

import numpy as np
import pytest

from promptgate.core import (
    BENIGN,
    MALICIOUS,
    REJECT_BAD_LABEL,
    REJECT_DUPLICATE_ID,
    REJECT_EMPTY_ID,
    REJECT_EMPTY_TEXT,
    DatasetSplit,
    EmbeddedDataset,
    EvalReport,
    ProjectionResult,
    PromptRecord,
    validate_corpus,
)


def rec(id="r1", source="s", text="hello", label=0):
    return PromptRecord(id=id, source=source, text=text, label=label)


class TestValidateCorpus:
    def test_accepts_clean_records(self):
        records = [rec(id=f"r{i}", label=i % 2) for i in range(6)]
        summary = validate_corpus(records)
        assert summary.n_accepted == 6
        assert summary.rejects == ()
        assert summary.accepted == tuple(records)

    def test_preserves_input_order(self):
        records = [rec(id=f"r{i}") for i in (3, 1, 2, 0)]
        summary = validate_corpus(records)
        assert [r.id for r in summary.accepted] == ["r3", "r1", "r2", "r0"]

    def test_rejects_empty_id(self):
        summary = validate_corpus([rec(id="")])
        assert summary.n_accepted == 0
        assert summary.rejects[0].reason == REJECT_EMPTY_ID

    def test_rejects_empty_and_whitespace_text(self):
        summary = validate_corpus([rec(text=""), rec(id="r2", text="  \t\n ")])
        assert summary.n_accepted == 0
        assert summary.n_empty_text == 2

    def test_rejects_non_binary_labels(self):
        summary = validate_corpus([rec(label=2), rec(id="r2", label=-1), rec(id="r3", label=True)])
        assert summary.n_accepted == 0
        assert summary.n_bad_label == 3

    def test_rejects_duplicate_ids_keeping_first(self):
        summary = validate_corpus([rec(text="a"), rec(text="b"), rec(id="r2")])
        assert summary.n_accepted == 2
        assert summary.n_duplicate_id == 1
        assert summary.accepted[0].text == "a"

    def test_rejected_row_does_not_consume_its_id(self):
        # An id seen first on an invalid row must stay available.
        summary = validate_corpus([rec(id="x", text=""), rec(id="x", text="fine")])
        assert summary.n_accepted == 1
        assert summary.rejects[0].reason == REJECT_EMPTY_TEXT

    def test_first_failing_check_wins(self):
        summary = validate_corpus([rec(id="", text="", label=5)])
        assert summary.rejects[0].reason == REJECT_EMPTY_ID

    def test_n_rejected_counts(self):
        summary = validate_corpus([rec(text=""), rec(id="r2", label=7), rec(id="r3")])
        assert summary.n_rejected() == 2
        assert summary.n_rejected(REJECT_EMPTY_TEXT) == 1
        assert summary.n_rejected(REJECT_BAD_LABEL) == 1
        assert summary.n_rejected(REJECT_DUPLICATE_ID) == 0


class TestEmbeddedDataset:
    def make(self, n=4, d=3, **overrides):
        kwargs = dict(
            ids=tuple(f"r{i}" for i in range(n)),
            sources=("src",) * n,
            labels=np.arange(n) % 2,
            matrix=np.arange(n * d, dtype=np.float64).reshape(n, d),
            provider_tag="local-hash-384",
        )
        kwargs.update(overrides)
        return EmbeddedDataset(**kwargs)

    def test_basic_properties(self):
        ds = self.make()
        assert len(ds) == 4
        assert ds.dim == 3
        assert ds.labels.dtype == np.int64
        assert ds.matrix.dtype == np.float64

    def test_arrays_are_read_only(self):
        ds = self.make()
        with pytest.raises(ValueError):
            ds.matrix[0, 0] = 9.0
        with pytest.raises(ValueError):
            ds.labels[0] = 1

    def test_misaligned_lengths_rejected(self):
        with pytest.raises(ValueError, match="misaligned"):
            self.make(ids=("a", "b"))

    def test_non_binary_labels_rejected(self):
        with pytest.raises(ValueError, match="0 or 1"):
            self.make(labels=np.array([0, 1, 2, 0]))

    def test_non_finite_matrix_rejected(self):
        bad = np.ones((4, 3))
        bad[1, 1] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            self.make(matrix=bad)

    def test_non_2d_matrix_rejected(self):
        with pytest.raises(ValueError, match="2-D"):
            self.make(matrix=np.zeros(4))

    def test_subset_keeps_rows_aligned(self):
        ds = self.make()
        sub = ds.subset([2, 0])
        assert sub.ids == ("r2", "r0")
        assert list(sub.labels) == [0, 0]
        np.testing.assert_array_equal(sub.matrix, ds.matrix[[2, 0]])
        assert sub.provider_tag == ds.provider_tag

    def test_empty_dataset_allowed(self):
        ds = self.make(n=0, ids=(), sources=(), labels=np.zeros(0, dtype=np.int64),
                       matrix=np.zeros((0, 3)))
        assert len(ds) == 0
        assert ds.dim == 3


class TestDatasetSplit:
    def test_partition_accepted(self):
        split = DatasetSplit(
            train_indices=np.array([0, 2, 3]), test_indices=np.array([1, 4]),
            seed=7, test_fraction=0.4,
        )
        assert split.n == 5

    def test_overlapping_indices_rejected(self):
        with pytest.raises(ValueError, match="partition"):
            DatasetSplit(np.array([0, 1]), np.array([1, 2]), seed=0, test_fraction=0.5)

    def test_gap_in_indices_rejected(self):
        with pytest.raises(ValueError, match="partition"):
            DatasetSplit(np.array([0, 1]), np.array([3]), seed=0, test_fraction=0.5)

    @pytest.mark.parametrize("fraction", [0.0, 1.0, -0.1, 1.5])
    def test_test_fraction_bounds(self, fraction):
        with pytest.raises(ValueError, match="test_fraction"):
            DatasetSplit(np.array([0]), np.array([1]), seed=0, test_fraction=fraction)


class TestEvalReport:
    def make(self, **overrides):
        kwargs = dict(tp=8, fp=2, tn=9, fn=1, auc=0.93, precision=0.8, recall=0.889,
                      f1=0.842, threshold=0.5, model_tag="forest", provider_tag="local-hash-384")
        kwargs.update(overrides)
        return EvalReport(**kwargs)

    def test_round_trips_through_dict(self):
        report = self.make()
        assert EvalReport.from_dict(report.to_dict()) == report

    def test_n_evaluated(self):
        assert self.make().n_evaluated == 20

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError, match="tp"):
            self.make(tp=-1)

    @pytest.mark.parametrize("metric", ["auc", "precision", "recall", "f1"])
    def test_metric_range_enforced(self, metric):
        with pytest.raises(ValueError, match=metric):
            self.make(**{metric: 1.2})

    def test_rounded_published_values_construct(self):
        # f1 is not re-derived from precision/recall, so independently
        # rounded metric triples must be representable.
        report = self.make(precision=0.867, recall=0.870, f1=0.868)
        assert report.f1 == 0.868


class TestProjectionResult:
    def test_pca_requires_variance_ratios(self):
        with pytest.raises(ValueError, match="explained-variance"):
            ProjectionResult(points=np.zeros((3, 2)), method="pca")

    def test_pca_ratio_sum_capped_at_one(self):
        with pytest.raises(ValueError, match="sum"):
            ProjectionResult(np.zeros((3, 2)), "pca", explained_variance_ratio=(0.7, 0.5))

    def test_tsne_needs_no_ratios(self):
        result = ProjectionResult(np.zeros((3, 2)), "tsne", params={"perplexity": 15.0})
        assert result.explained_variance_ratio is None
        assert len(result) == 3

    def test_points_must_be_n_by_2(self):
        with pytest.raises(ValueError, match="n x 2"):
            ProjectionResult(np.zeros((3, 3)), "tsne")

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError, match="method"):
            ProjectionResult(np.zeros((3, 2)), "umap")

    def test_labels_constants(self):
        assert BENIGN == 0
        assert MALICIOUS == 1
