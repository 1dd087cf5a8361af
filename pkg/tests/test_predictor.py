"""Gated-attention pooling and the shared region/bag classifier heads."""

import math

import numpy as np
import pytest

from ainet import tensor as at
from ainet.arc import unmasked_region
from ainet.errors import ShapeError
from ainet.predictor import PredictorParams, gated_scores, gated_scores_values, predict


def pred_params(d, h=8, c=2, seed=0, zero_classifier=False):
    rng = np.random.default_rng(seed)
    cls_w = np.zeros((d, c)) if zero_classifier else rng.standard_normal((d, c))
    return PredictorParams(
        att_v=at.parameter(rng.standard_normal((d, h))),
        att_u=at.parameter(rng.standard_normal((d, h))),
        att_w=at.parameter(rng.standard_normal((h, 1))),
        cls_w=at.parameter(cls_w),
        cls_b=at.parameter(np.zeros(c)),
    )


def regions_from(arrays):
    return [unmasked_region(at.constant(a), 0) for a in arrays]


class TestGatedScores:
    def test_singleton_pools_to_one(self):
        p = pred_params(3)
        raw = gated_scores(at.constant(np.ones((1, 3))), p)
        pooled = at.softmax(raw)
        assert pooled.data.tolist() == [1.0]

    def test_identical_rows_uniform_weights(self):
        p = pred_params(4, seed=1)
        rows = np.tile([0.3, -0.2, 1.0, 0.5], (5, 1))
        weights = at.softmax(gated_scores(at.constant(rows), p)).data
        assert np.abs(weights - 0.2).max() < 1e-12

    def test_hand_set_scalar_oracle(self):
        d, h = 2, 2
        p = PredictorParams(
            att_v=at.parameter([[0.5, -1.0], [1.0, 0.25]]),
            att_u=at.parameter([[-0.5, 2.0], [0.75, 0.1]]),
            att_w=at.parameter([[2.0], [-1.0]]),
            cls_w=at.parameter(np.zeros((d, 2))),
            cls_b=at.parameter(np.zeros(2)),
        )
        feats = np.array([[1.0, 2.0], [-0.5, 0.25]])
        got = gated_scores(at.constant(feats), p).data
        for i in range(2):
            pre_v = [sum(feats[i][k] * p.att_v.data[k][j] for k in range(d)) for j in range(h)]
            pre_u = [sum(feats[i][k] * p.att_u.data[k][j] for k in range(d)) for j in range(h)]
            gate = [math.tanh(a) * (1 / (1 + math.exp(-b))) for a, b in zip(pre_v, pre_u)]
            expected = sum(g * w[0] for g, w in zip(gate, p.att_w.data))
            assert abs(got[i] - expected) < 1e-12

    def test_empty_rejected(self):
        with pytest.raises(ShapeError):
            gated_scores(at.constant(np.zeros((0, 3))), pred_params(3))

    def test_values_helper_leaves_no_tape(self):
        p = pred_params(3, seed=2)
        rows = np.random.default_rng(3).standard_normal((4, 3))
        values = gated_scores_values(rows, p)
        tracked = gated_scores(at.constant(rows), p)
        assert np.array_equal(values, tracked.data)
        at.backward(at.tsum(tracked))
        assert np.abs(p.att_w.grad).sum() > 0


class TestPredict:
    def test_single_region_region_equals_bag(self):
        rng = np.random.default_rng(4)
        p = pred_params(3, seed=5)
        corrected = regions_from([rng.standard_normal((6, 3))])
        region_probs, bag_probs = predict(corrected, p)
        assert np.array_equal(region_probs.data[0], bag_probs.data)

    def test_zero_classifier_gives_uniform(self):
        rng = np.random.default_rng(6)
        p = pred_params(3, c=4, seed=7, zero_classifier=True)
        region_probs, bag_probs = predict(regions_from([rng.standard_normal((5, 3))]), p)
        assert np.abs(region_probs.data - 0.25).max() < 1e-15
        assert np.abs(bag_probs.data - 0.25).max() < 1e-15

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(8)
        p = pred_params(4, c=3, seed=9)
        corrected = regions_from([rng.standard_normal((4, 4)) for _ in range(3)])
        region_probs, bag_probs = predict(corrected, p)
        assert np.abs(region_probs.data.sum(axis=1) - 1.0).max() < 1e-9
        assert abs(bag_probs.data.sum() - 1.0) < 1e-9
        assert (region_probs.data >= 0).all() and (bag_probs.data >= 0).all()

    def test_pooling_is_permutation_invariant(self):
        rng = np.random.default_rng(10)
        p = pred_params(3, seed=11)
        rows = rng.standard_normal((7, 3))
        perm = rng.permutation(7)
        probs_a, _ = predict(regions_from([rows]), p)
        probs_b, _ = predict(regions_from([rows[perm]]), p)
        assert np.abs(probs_a.data - probs_b.data).max() < 1e-12

    def test_empty_region_rejected(self):
        p = pred_params(3)
        with pytest.raises(ShapeError):
            predict(regions_from([np.zeros((0, 3))]), p)


def test_gradient_check_scores_and_predict():
    from ainet.gradcheck import finite_diff_grads, max_rel_error

    rng = np.random.default_rng(12)
    p = pred_params(3, h=4, c=2, seed=13)
    feats = [rng.standard_normal((4, 3)), rng.standard_normal((3, 3))]
    named = {"v": p.att_v, "u": p.att_u, "w": p.att_w, "cw": p.cls_w, "cb": p.cls_b}

    def run():
        region_probs, bag_probs = predict(regions_from(feats), p)
        return at.add(at.tsum(at.mul(region_probs, region_probs)),
                      at.tsum(at.mul(bag_probs, bag_probs)))

    at.backward(run())
    analytic = {k: t.grad.copy() for k, t in named.items()}
    for t in named.values():
        t.zero_grad()
    numeric = finite_diff_grads(lambda: run().item(), named)
    for k in named:
        assert max_rel_error(numeric[k], analytic[k]) < 1e-4
