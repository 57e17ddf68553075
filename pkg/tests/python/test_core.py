"""
Tests for probability types, the error hierarchy and the Bayes prior update
"""

import numpy as np
import pytest

from shiftbench.core import (
    ConfusionKind,
    ConfusionMatrix,
    DegenerateSupport,
    DimensionMismatch,
    DimensionTooSmall,
    EmptyBatch,
    EstimationError,
    InputValidationError,
    LabeledBatch,
    LogitMatrix,
    NegativeEntry,
    NonFiniteLogits,
    PosteriorMatrix,
    ProbabilitySimplex,
    ShiftBenchError,
    ShiftWeights,
    SumOutOfTolerance,
    ZeroSourceEntry,
    batch_prior_update,
    prior_ratio,
    prior_update,
    validate_posteriors,
    validate_simplex,
)


class TestErrors:
    """Test the exception hierarchy"""

    def test_families(self):
        """Test that input and estimation errors map onto builtin families"""
        assert issubclass(NegativeEntry, InputValidationError)
        assert issubclass(InputValidationError, ValueError)
        assert issubclass(DegenerateSupport, EstimationError)
        assert issubclass(EstimationError, ArithmeticError)
        assert issubclass(EstimationError, ShiftBenchError)

    def test_details(self):
        """Test that structured details survive to_dict"""
        error = ZeroSourceEntry("zero", class_index=2)
        assert error.details == {"class_index": 2}
        assert error.to_dict() == {
            "error": "ZeroSourceEntry",
            "message": "zero",
            "class_index": 2,
        }


class TestProbabilitySimplex:
    """Test simplex validation"""

    def test_exact_simplex(self):
        """Test that an exact simplex is accepted"""
        assert validate_simplex([0.5, 0.5]).tolist() == [0.5, 0.5]

    def test_renormalised_within_tolerance(self):
        """Test that ingestion noise is renormalised away"""
        simplex = validate_simplex([0.5, 0.5 + 1e-7])
        assert simplex.probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_sum_out_of_tolerance(self):
        """Test that a vector far from summing to one is rejected"""
        with pytest.raises(SumOutOfTolerance):
            validate_simplex([0.7, 0.7])

    def test_negative_entry(self):
        """Test that negative entries are rejected"""
        with pytest.raises(NegativeEntry):
            ProbabilitySimplex([1.2, -0.2])

    def test_too_few_classes(self):
        """Test that a single-class simplex is rejected"""
        with pytest.raises(DimensionTooSmall):
            ProbabilitySimplex([1.0])

    def test_immutable(self):
        """Test that the wrapped array is read-only"""
        simplex = ProbabilitySimplex([0.25, 0.75])
        with pytest.raises(ValueError):
            simplex.probs[0] = 0.5

    def test_uniform(self):
        """Test the uniform constructor"""
        simplex = ProbabilitySimplex.uniform(4)
        assert simplex.m == 4
        assert simplex.is_strictly_positive()


class TestMatrices:
    """Test posterior, logit and confusion matrices"""

    def test_posterior_row_checked(self):
        """Test that a bad posterior row is reported with its index"""
        with pytest.raises(SumOutOfTolerance) as info:
            PosteriorMatrix([[0.5, 0.5], [0.9, 0.3]])
        assert info.value.details["row"] == 1

    def test_validate_posteriors_renormalises(self):
        """Test row renormalisation within the ingestion tolerance"""
        matrix = validate_posteriors([[0.5, 0.5 + 5e-7], [0.2, 0.8]])
        np.testing.assert_allclose(matrix.rows.sum(axis=1), 1.0, atol=1e-12)

    def test_empty_posteriors(self):
        """Test that an empty matrix is rejected"""
        with pytest.raises(EmptyBatch):
            PosteriorMatrix(np.zeros((0, 2)))

    def test_top_labels_tie_goes_low(self):
        """Test that argmax ties resolve to the lowest class index"""
        matrix = PosteriorMatrix([[0.5, 0.5], [0.2, 0.8]])
        assert matrix.top_labels().tolist() == [0, 1]
        assert matrix.top_probs().tolist() == [0.5, 0.8]

    def test_non_finite_logits(self):
        """Test that a non-finite logit is located"""
        with pytest.raises(NonFiniteLogits) as info:
            LogitMatrix([[0.0, 1.0], [np.inf, 0.0]])
        assert info.value.details == {"row": 1, "column": 0}

    def test_conditional_confusion_columns(self):
        """Test that conditional confusion columns must sum to one"""
        ConfusionMatrix([[0.5, 0.0], [0.5, 1.0]])
        with pytest.raises(SumOutOfTolerance):
            ConfusionMatrix([[0.5, 0.2], [0.6, 0.8]])

    def test_to_joint(self):
        """Test scaling conditional columns by the source prior"""
        confusion = ConfusionMatrix([[0.8, 0.1], [0.2, 0.9]])
        joint = confusion.to_joint(ProbabilitySimplex([0.25, 0.75]))
        assert joint.kind is ConfusionKind.JOINT
        np.testing.assert_allclose(joint.entries, [[0.2, 0.075], [0.05, 0.675]])
        np.testing.assert_allclose(confusion.recalls(), [0.8, 0.9])

    def test_weights_normalisation_check(self):
        """Test the sum(w * p_s) = 1 check"""
        weights = ShiftWeights([1.6, 0.4])
        assert weights.is_normalised_for(ProbabilitySimplex([0.5, 0.5]))
        assert not weights.is_normalised_for(ProbabilitySimplex([0.9, 0.1]))


class TestLabeledBatch:
    """Test labeled batches"""

    def test_label_count_must_match(self):
        """Test that label and row counts must agree"""
        with pytest.raises(DimensionMismatch):
            LabeledBatch(labels=[0, 1], posteriors=PosteriorMatrix([[0.5, 0.5]]))

    def test_label_range(self):
        """Test that labels must index a column"""
        with pytest.raises(InputValidationError):
            LabeledBatch(labels=[2], posteriors=PosteriorMatrix([[0.5, 0.5]]))

    def test_needs_scores(self):
        """Test that a batch without posteriors or logits is rejected"""
        with pytest.raises(InputValidationError):
            LabeledBatch(labels=[0])

    def test_take_and_counts(self):
        """Test row selection and class counting"""
        batch = LabeledBatch(
            labels=[0, 1, 1],
            posteriors=PosteriorMatrix([[0.9, 0.1], [0.3, 0.7], [0.4, 0.6]]),
            logits=LogitMatrix([[1.0, 0.0], [0.0, 1.0], [0.0, 0.5]]),
        )
        picked = batch.take([2, 0])
        assert picked.labels.tolist() == [1, 0]
        assert picked.logits is not None
        assert picked.logits.rows.tolist() == [[0.0, 0.5], [1.0, 0.0]]
        assert batch.class_counts().tolist() == [1, 2]


class TestPriorUpdate:
    """Test the Bayes prior update"""

    def test_identity_when_target_equals_source(self, uniform2):
        """Test that target = source returns the posterior unchanged"""
        posterior = ProbabilitySimplex([0.7, 0.3])
        updated = prior_update(posterior, uniform2, uniform2)
        assert updated.tolist() == [0.7, 0.3]

    def test_degenerate_posterior_is_fixed(self, uniform2):
        """Test that a one-hot posterior stays one-hot"""
        updated = prior_update(
            ProbabilitySimplex([1.0, 0.0]), uniform2, ProbabilitySimplex([0.9, 0.1])
        )
        assert updated.tolist() == [1.0, 0.0]

    def test_hand_evaluation(self, uniform2):
        """Test the update against a hand-computed value"""
        updated = prior_update(
            ProbabilitySimplex([0.7, 0.3]), uniform2, ProbabilitySimplex([0.9, 0.1])
        )
        np.testing.assert_allclose(updated.probs, [1.26 / 1.32, 0.06 / 1.32])

    def test_zero_source_rejected(self):
        """Test that a zero source entry is an input error"""
        with pytest.raises(ZeroSourceEntry):
            prior_ratio(ProbabilitySimplex([1.0, 0.0]), ProbabilitySimplex([0.5, 0.5]))

    def test_zero_target_allowed(self, uniform2):
        """Test that a zero target entry zeroes that class"""
        updated = prior_update(
            ProbabilitySimplex([0.6, 0.4]), uniform2, ProbabilitySimplex([0.0, 1.0])
        )
        assert updated.tolist() == [0.0, 1.0]

    def test_vanishing_support(self, uniform2):
        """Test that a posterior with no mass on the target support fails"""
        with pytest.raises(DegenerateSupport):
            prior_update(
                ProbabilitySimplex([1.0, 0.0]), uniform2, ProbabilitySimplex([0.0, 1.0])
            )

    def test_batch_identity_returns_input(self, uniform2):
        """Test that the batch update short-circuits when target = source"""
        rows = PosteriorMatrix([[0.7, 0.3], [0.1, 0.9]])
        assert batch_prior_update(rows, uniform2, uniform2) is rows

    def test_batch_rows_independent(self, uniform2):
        """Test that identical rows update identically"""
        rows = PosteriorMatrix([[0.7, 0.3]] * 3)
        updated = batch_prior_update(rows, uniform2, ProbabilitySimplex([0.9, 0.1]))
        assert np.all(updated.rows == updated.rows[0])

    def test_batch_matches_direct_formula(self, rng):
        """Test random updates against the direct formula"""
        for _ in range(1_000):
            m = int(rng.integers(2, 6))
            posterior = rng.dirichlet(np.ones(m))
            source = rng.dirichlet(np.ones(m))
            target = rng.dirichlet(np.ones(m))
            expected = posterior * target / source
            expected /= expected.sum()
            updated = prior_update(
                ProbabilitySimplex(posterior / posterior.sum()),
                ProbabilitySimplex(source / source.sum()),
                ProbabilitySimplex(target / target.sum()),
            )
            np.testing.assert_allclose(updated.probs, expected, atol=1e-12)

    def test_inverse_update_recovers_input(self, rng):
        """Test that updating back to the source recovers the posterior"""
        for _ in range(100):
            posterior = ProbabilitySimplex(rng.dirichlet(np.ones(4)))
            source = ProbabilitySimplex(rng.dirichlet(np.ones(4)))
            target = ProbabilitySimplex(rng.dirichlet(np.ones(4)))
            forward = prior_update(posterior, source, target)
            back = prior_update(forward, target, source)
            np.testing.assert_allclose(back.probs, posterior.probs, atol=1e-12)
