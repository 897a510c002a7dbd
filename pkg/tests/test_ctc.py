import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import brute_force_ctc_probability

from spokentopic import gradcheck
from spokentopic.ctc import (BLANK, InfeasibleAlignmentError, collapse, ctc_forward_backward, ctc_loss,
                             ctc_loss_batch, greedy_decode, per_frame_argmax, required_length)
from spokentopic.numerics import ContractError, Tensor


def _uniform(t_len, vocab=2):
    return np.zeros((t_len, vocab))


class TestCtcLossExamples:
    def test_single_frame_single_alignment(self):
        loss, _ = ctc_forward_backward(_uniform(1), [1])
        assert loss == pytest.approx(-math.log(0.5), abs=1e-12)

    def test_two_frames_three_alignments(self):
        loss, _ = ctc_forward_backward(_uniform(2), [1])
        assert loss == pytest.approx(-math.log(0.75), abs=1e-12)

    def test_repeat_needs_separating_blank(self):
        loss, _ = ctc_forward_backward(_uniform(3), [1, 1])
        assert loss == pytest.approx(-math.log(0.125), abs=1e-12)

    def test_tape_loss_is_a_scalar(self):
        out = ctc_loss(Tensor(_uniform(2), requires_grad=True), [1])
        assert out.shape == ()
        assert out.item() >= 0.0


class TestCtcErrors:
    @pytest.mark.parametrize("labels,frames", [([1, 1], 2), ([1, 2, 3], 2), ([2, 2, 2], 4)])
    def test_infeasible_length(self, labels, frames):
        with pytest.raises(InfeasibleAlignmentError):
            ctc_forward_backward(_uniform(frames, 4), labels)

    def test_blank_in_labels_rejected(self):
        with pytest.raises(ContractError):
            ctc_forward_backward(_uniform(3, 3), [1, BLANK])

    def test_empty_labels_rejected(self):
        with pytest.raises(ContractError):
            ctc_forward_backward(_uniform(3, 3), [])

    @pytest.mark.parametrize("labels,need", [([1], 1), ([1, 1], 3), ([1, 2, 2, 2], 6), ([3, 1, 3], 3)])
    def test_required_length(self, labels, need):
        assert required_length(labels) == need


class TestCtcOracle:
    @pytest.mark.parametrize("seed", range(40))
    def test_matches_brute_force_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        vocab = int(rng.integers(2, 5))
        n_lab = int(rng.integers(1, 4))
        labels = [int(v) for v in rng.integers(1, vocab, size=n_lab)]
        t_len = int(rng.integers(max(1, required_length(labels)), 7))
        logits = rng.normal(scale=2.0, size=(t_len, vocab))
        loss, _ = ctc_forward_backward(logits, labels)
        assert math.exp(-loss) == pytest.approx(brute_force_ctc_probability(logits, labels), abs=1e-9)

    @pytest.mark.parametrize("seed", range(5))
    def test_gradient_matches_finite_differences(self, seed):
        errors = gradcheck.suite_ctc(seed)
        assert errors["logits"] < gradcheck.TOLERANCE

    @pytest.mark.parametrize("seed", range(10))
    def test_per_frame_shift_invariance(self, seed):
        rng = np.random.default_rng(seed)
        logits = rng.normal(size=(6, 5))
        labels = [2, 2, 4]
        shifted = logits + rng.normal(scale=10.0, size=(6, 1))
        a, _ = ctc_forward_backward(logits, labels)
        b, _ = ctc_forward_backward(shifted, labels)
        assert abs(a - b) < 1e-9

    def test_gradient_rows_sum_to_zero(self):
        _, grad = ctc_forward_backward(np.random.default_rng(0).normal(size=(5, 4)), [1, 3])
        np.testing.assert_allclose(grad.sum(axis=1), 0.0, atol=1e-12)

    def test_long_sequence_stays_finite(self):
        rng = np.random.default_rng(0)
        logits = rng.normal(scale=30.0, size=(600, 6))
        loss, grad = ctc_forward_backward(logits, [int(v) for v in rng.integers(1, 6, size=80)])
        assert np.isfinite(loss) and np.isfinite(grad).all()


class TestCtcBatch:
    def test_mean_over_documents_ignores_padding(self):
        rng = np.random.default_rng(3)
        a, b = rng.normal(size=(4, 3)), rng.normal(size=(2, 3))
        padded = np.zeros((2, 4, 3))
        padded[0], padded[1, :2] = a, b
        padded[1, 2:] = 99.0
        x = Tensor(padded, requires_grad=True)
        loss = ctc_loss_batch(x, [4, 2], [[1, 2], [2]])
        expect = (ctc_forward_backward(a, [1, 2])[0] + ctc_forward_backward(b, [2])[0]) / 2
        assert loss.item() == pytest.approx(expect, abs=1e-12)
        loss.backward()
        assert (x.grad[1, 2:] == 0.0).all()


class TestDecoding:
    def test_argmax_example(self):
        assert per_frame_argmax(np.array([[2, 1], [0, 5], [3, 3]])) == [0, 1, 0]

    def test_all_zero_is_blank(self):
        assert per_frame_argmax(np.zeros((4, 5))) == [0, 0, 0, 0]

    def test_single_frame(self):
        assert per_frame_argmax(np.array([[0.0, 1.0, 2.0, 9.0]])) == [3]

    @pytest.mark.parametrize("ids,expect", [([0, 2, 2, 0, 3], [2, 3]), ([0, 0, 0], []), ([2, 0, 2], [2, 2])])
    def test_collapse(self, ids, expect):
        assert collapse(ids) == expect

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(1, 6), min_size=1, max_size=10))
    def test_diagonal_one_hot_round_trip(self, labels):
        path = []
        for i, lab in enumerate(labels):
            if i and labels[i - 1] == lab:
                path.append(BLANK)
            path.append(lab)
        logits = np.zeros((len(path), 7))
        logits[np.arange(len(path)), path] = 1.0
        assert greedy_decode(logits) == labels
