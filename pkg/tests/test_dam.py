"""Anchor mining: projection, dual-level weights, top-k selection."""

import math

import numpy as np
import pytest

from ainet import tensor as at
from ainet.bags import Bag, partition
from ainet.dam import (DamParams, anchor_weights, embeddings,
                       project, select_anchors, selector_variant, top_k_count)
from ainet.errors import ConfigError


def dam_params(d, rng=None, identity=False):
    if identity:
        eye, zero = np.eye(d), np.zeros(d)
        return DamParams(w1=at.parameter(eye), b1=at.parameter(zero),
                         w2=at.parameter(eye.copy()), b2=at.parameter(zero.copy()))
    rng = rng or np.random.default_rng(0)
    return DamParams(
        w1=at.parameter(rng.standard_normal((d, d))),
        b1=at.parameter(rng.standard_normal(d)),
        w2=at.parameter(rng.standard_normal((d, d))),
        b2=at.parameter(rng.standard_normal(d)),
    )


def grid_bag(n, d, seed=0):
    rng = np.random.default_rng(seed)
    side = math.isqrt(n - 1) + 1
    coords = np.array([(i % side, i // side) for i in range(n)], dtype=np.int32)
    return Bag(bag_id="t", features=rng.standard_normal((n, d)), coords=coords, label=0)


class TestProject:
    def test_identity_on_nonnegative_input(self):
        x = at.constant(np.abs(np.random.default_rng(1).standard_normal((5, 4))))
        out = project(x, dam_params(4, identity=True))
        assert np.array_equal(out.data, x.data)

    def test_zero_params_give_zero(self):
        d = 4
        p = DamParams(w1=at.parameter(np.zeros((d, d))), b1=at.parameter(np.zeros(d)),
                      w2=at.parameter(np.zeros((d, d))), b2=at.parameter(np.zeros(d)))
        out = project(at.constant(np.ones((3, d))), p)
        assert np.array_equal(out.data, np.zeros((3, d)))

    def test_two_step_scalar_oracle(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((4, 3))
        p = dam_params(3, rng)
        hidden = np.maximum(x @ p.w1.data + p.b1.data, 0.0)
        expected = hidden @ p.w2.data + p.b2.data
        got = project(at.constant(x), p).data
        assert np.abs(got - expected).max() < 1e-12


class TestEmbeddings:
    def test_single_region_equals_bag(self):
        bag = grid_bag(9, 4)
        part = partition(bag, 1)
        f_bag, f_reg = embeddings(at.constant(bag.features), part)
        # the region sums rows in spatial order, so only fp noise differs
        assert np.abs(f_reg[0] - f_bag).max() < 1e-12

    def test_identical_instances(self):
        v = np.array([1.0, -2.0, 0.5])
        bag = grid_bag(8, 3)
        bag.features = np.tile(v, (8, 1))
        part = partition(bag, 4)
        f_bag, f_reg = embeddings(bag.features, part)
        assert np.allclose(f_bag, v, atol=1e-15)
        for emb in f_reg:
            assert np.allclose(emb, v, atol=1e-15)

    def test_weighted_mean_identity(self):
        bag = grid_bag(10, 5, seed=3)
        part = partition(bag, 4)
        f_bag, f_reg = embeddings(bag.features, part)
        recombined = sum(
            (len(idx) / bag.n_instances) * emb for idx, emb in zip(part.regions, f_reg)
        )
        assert np.abs(f_bag - recombined).max() < 1e-12


class TestAnchorWeights:
    def test_identical_instances_weight_one(self):
        bag = grid_bag(8, 3)
        bag.features = np.tile([1.0, 2.0, 3.0], (8, 1))
        part = partition(bag, 2)
        f_bag, f_reg = embeddings(bag.features, part)
        w = anchor_weights(bag.features, part, f_bag, f_reg, 0.7)
        assert np.abs(w - 1.0).max() < 1e-9

    def test_alpha_linearity_exact(self):
        bag = grid_bag(20, 6, seed=4)
        part = partition(bag, 4)
        f_bag, f_reg = embeddings(bag.features, part)
        w1 = anchor_weights(bag.features, part, f_bag, f_reg, 1.0)
        w0 = anchor_weights(bag.features, part, f_bag, f_reg, 0.0)
        for alpha in (0.0, 0.3, 0.7, 1.0):
            wa = anchor_weights(bag.features, part, f_bag, f_reg, alpha)
            assert np.array_equal(wa, alpha * w1 + (1.0 - alpha) * w0)

    def test_hand_set_scalar_oracle(self):
        feats = np.array([
            [1.0, 0.0], [0.0, 1.0],   # region A (left column)
            [1.0, 1.0], [2.0, 0.0],   # region B (right column)
        ])
        coords = np.array([[0, 0], [0, 1], [5, 0], [5, 1]], dtype=np.int32)
        bag = Bag(bag_id="h", features=feats, coords=coords, label=0)
        part = partition(bag, 2)
        f_bag, f_reg = embeddings(feats, part)
        alpha = 0.7
        got = anchor_weights(feats, part, f_bag, f_reg, alpha)

        def cos(u, v):
            nu = math.sqrt(sum(x * x for x in u)) + 1e-12
            nv = math.sqrt(sum(x * x for x in v)) + 1e-12
            return sum(a * b for a, b in zip(u, v)) / (nu * nv)

        region_of = {i: l for l, idx in enumerate(part.regions) for i in idx}
        for i in range(4):
            expected = alpha * cos(feats[i], f_reg[region_of[i]]) + (1 - alpha) * cos(
                feats[i], f_bag
            )
            assert abs(got[i] - expected) < 1e-12

    def test_scale_invariance(self):
        bag = grid_bag(12, 4, seed=5)
        part = partition(bag, 3)
        f_bag, f_reg = embeddings(bag.features, part)
        w = anchor_weights(bag.features, part, f_bag, f_reg, 0.7)
        scaled = bag.features.copy()
        scaled[3] *= 17.0
        w2 = anchor_weights(scaled, part, f_bag, f_reg, 0.7)
        assert abs(w[3] - w2[3]) < 1e-9


class TestSelectAnchors:
    def test_k100_selects_all(self):
        latent = at.constant(np.random.default_rng(6).standard_normal((10, 3)))
        weights = np.random.default_rng(7).standard_normal(10)
        anchors = select_anchors(latent, weights, 100)
        assert len(anchors) == 10
        assert sorted(anchors.indices.tolist()) == list(range(10))

    def test_spec_example_top2(self):
        weights = np.array([0.9, 0.1, 0.2, 0.8, 0.3, 0.4, 0.5, 0.6, 0.7, 0.0])
        latent = at.constant(np.zeros((10, 2)))
        anchors = select_anchors(latent, weights, 20)
        assert set(anchors.indices.tolist()) == {0, 3}

    def test_k0_empty(self):
        anchors = select_anchors(at.constant(np.zeros((5, 2))), np.ones(5), 0)
        assert len(anchors) == 0
        assert anchors.features.shape == (0, 2)

    def test_weights_sorted_non_increasing_and_unique(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            n = int(rng.integers(1, 30))
            w = np.round(rng.standard_normal(n), 1)
            k = float(rng.integers(0, 101))
            anchors = select_anchors(at.constant(np.zeros((n, 1))), w, k)
            assert len(set(anchors.indices.tolist())) == len(anchors)
            assert len(anchors) == top_k_count(k, n)
            assert all(anchors.weights[i] >= anchors.weights[i + 1]
                       for i in range(len(anchors) - 1))

    def test_tie_rule_matches_full_sort_oracle(self):
        rng = np.random.default_rng(9)
        for _ in range(1000):
            n = int(rng.integers(1, 40))
            w = np.round(rng.standard_normal(n), 1)
            k = float(rng.integers(0, 101))
            expected = sorted(range(n), key=lambda i: (-w[i], i))[:top_k_count(k, n)]
            got = select_anchors(at.constant(np.zeros((n, 1))), w, k).indices
            assert got.tolist() == expected

    def test_floor_of_k_percent(self):
        assert top_k_count(20, 10) == 2
        assert top_k_count(30, 10) == 3  # 0.3*10 must not round under
        assert top_k_count(25, 10) == 2
        assert top_k_count(0, 10) == 0
        assert top_k_count(100, 7) == 7

    def test_gradients_flow_through_selection(self):
        latent = at.parameter(np.random.default_rng(10).standard_normal((6, 3)))
        anchors = select_anchors(latent, np.arange(6.0), 50)
        at.backward(at.tsum(anchors.features))
        rows = np.abs(latent.grad).sum(axis=1) > 0
        assert rows.tolist() == [False, False, False, True, True, True]


class TestSelectorVariants:
    def setup_method(self):
        self.bag = grid_bag(16, 4, seed=11)
        self.part = partition(self.bag, 4)
        self.f_bag, self.f_reg = embeddings(self.bag.features, self.part)

    def test_bag_mode_equals_alpha_zero(self):
        w = selector_variant("bag", self.bag.features, self.part, self.f_bag, self.f_reg)
        w0 = anchor_weights(self.bag.features, self.part, self.f_bag, self.f_reg, 0.0)
        assert np.abs(w - w0).max() < 1e-15

    def test_region_mode_equals_alpha_one(self):
        w = selector_variant("region", self.bag.features, self.part, self.f_bag, self.f_reg)
        w1 = anchor_weights(self.bag.features, self.part, self.f_bag, self.f_reg, 1.0)
        assert np.abs(w - w1).max() < 1e-15

    def test_maxpool_rule(self):
        latent = np.array([[1.0, 5.0], [4.0, 2.0]])
        w = selector_variant("maxpool", latent, self.part, self.f_bag, self.f_reg)
        assert w.tolist() == [5.0, 4.0]

    def test_attention_mode_uses_scorer(self):
        w = selector_variant(
            "attention", self.bag.features, self.part, self.f_bag, self.f_reg,
            scorer=lambda rows: rows.sum(axis=1),
        )
        assert np.array_equal(w, self.bag.features.sum(axis=1))

    def test_attention_mode_requires_scorer(self):
        with pytest.raises(ConfigError):
            selector_variant("attention", self.bag.features, self.part,
                             self.f_bag, self.f_reg)

    def test_unknown_mode(self):
        with pytest.raises(ConfigError, match="selector"):
            selector_variant("votes", self.bag.features, self.part,
                             self.f_bag, self.f_reg)
