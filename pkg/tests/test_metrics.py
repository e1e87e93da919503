import json
import math

import numpy as np
import pytest
from scipy import ndimage

from greenseg.src.libs import autodiff, metrics
from greenseg.src.libs.autodiff import ParamTensor, Tensor
from greenseg.src.libs.metrics import MetricsReport, UndefinedMetric


def _border_pixels(component: np.ndarray) -> np.ndarray:
    padded = np.pad(component, 1)
    inner = padded[1:-1, 1:-1]
    exposed = ~(padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:])
    return np.argwhere(inner & exposed)


def _brute_weight_map(mask: np.ndarray, w0=10.0, sigma=5.0) -> np.ndarray:
    """Weight map by checking every pixel against every border pixel."""
    labels, count = ndimage.label(mask)
    total = mask.size
    n_pos = max(int(mask.sum()), 1)
    n_neg = max(total - int(mask.sum()), 1)
    balance = np.where(mask > 0, total / (2.0 * n_pos), total / (2.0 * n_neg)).astype(np.float32)
    if count < 2:
        return balance
    pixels = np.argwhere(np.ones_like(mask, dtype=bool))
    per_object = []
    for k in range(1, count + 1):
        border = _border_pixels(labels == k)
        diff = pixels[:, None, :] - border[None, :, :]
        per_object.append(np.sqrt((diff ** 2).sum(axis=2).astype(np.float64)).min(axis=1))
    dist = np.sort(np.stack(per_object), axis=0)
    d1 = dist[0].astype(np.float32).astype(np.float64).reshape(mask.shape)
    d2 = dist[1].astype(np.float32).astype(np.float64).reshape(mask.shape)
    return (balance + w0 * np.exp(-(d1 + d2) ** 2 / (2.0 * sigma ** 2))).astype(np.float32)


def _blobs(rng, size=48, seeds=0.01):
    return ndimage.binary_dilation(rng.random((size, size)) < seeds, iterations=2).astype(np.uint8)


class TestComponents:

    def test_empty(self):
        assert metrics.connected_components(np.zeros((8, 8)))[1] == 0

    def test_diagonal_pixels_are_separate(self):
        mask = np.zeros((4, 4), dtype=np.uint8)
        mask[1, 1] = mask[2, 2] = 1
        assert metrics.connected_components(mask)[1] == 2

    def test_three_squares(self):
        mask = np.zeros((32, 32), dtype=np.uint8)
        mask[2:6, 2:6] = 1
        mask[10:13, 20:30] = 1
        mask[25:30, 5:7] = 1
        labels, count = metrics.connected_components(mask)
        assert count == 3
        assert sorted(np.bincount(labels.ravel())[1:]) == [10, 16, 30]

    def test_first_encounter_order(self):
        mask = np.zeros((8, 8), dtype=np.uint8)
        mask[5, 1] = mask[1, 6] = 1
        labels, _ = metrics.connected_components(mask)
        assert labels[1, 6] == 1 and labels[5, 1] == 2


class TestBorderDistances:

    def test_no_objects(self):
        d1, d2 = metrics.border_distances(np.zeros((8, 8), dtype=np.int32))
        assert np.isinf(d1).all() and np.isinf(d2).all()

    def test_single_object(self):
        labels = np.zeros((8, 8), dtype=np.int32)
        labels[2:4, 2:4] = 1
        d1, d2 = metrics.border_distances(labels)
        assert d1[2, 2] == 0.0
        assert np.isinf(d2).all()

    def test_two_points(self):
        mask = np.zeros((32, 32), dtype=np.uint8)
        mask[10, 10] = mask[10, 20] = 1
        d1, d2 = metrics.border_distances(*metrics.connected_components(mask))
        assert d1[10, 15] == 5.0 and d2[10, 15] == 5.0
        assert d1[10, 10] == 0.0 and d2[10, 10] == 10.0


class TestWeightMap:

    def test_balanced_mask(self):
        mask = np.zeros((8, 8))
        mask[:4] = 1
        np.testing.assert_array_equal(metrics.class_balance_map(mask), 1.0)

    def test_quarter_positive(self):
        mask = np.zeros((8, 8))
        mask[:2] = 1
        balance = metrics.class_balance_map(mask)
        assert balance[0, 0] == pytest.approx(2.0)
        assert balance[7, 7] == pytest.approx(2.0 / 3.0)

    def test_all_background(self):
        np.testing.assert_array_equal(metrics.class_balance_map(np.zeros((4, 4))), 0.5)

    def test_single_object_has_no_border_term(self):
        mask = np.zeros((16, 16), dtype=np.uint8)
        mask[4:9, 4:9] = 1
        w = metrics.unet_weight_map(mask)
        np.testing.assert_array_equal(w.weights, w.class_balance)
        assert w.components == 1

    def test_midpoint_between_two_points(self):
        mask = np.zeros((32, 32), dtype=np.uint8)
        mask[10, 10] = mask[10, 20] = 1
        w = metrics.unet_weight_map(mask)
        expected = w.class_balance[10, 15] + 10.0 * math.exp(-2.0)
        assert w.weights[10, 15] == pytest.approx(expected, rel=1e-6)
        assert (w.weights >= w.class_balance.min()).all()

    def test_matches_brute_force(self):
        rng = np.random.default_rng(77)
        for _ in range(25):
            mask = _blobs(rng)
            np.testing.assert_allclose(metrics.unet_weight_map(mask).weights,
                                       _brute_weight_map(mask), rtol=1e-6)


class TestLosses:

    def test_confident_correct_prediction(self):
        mask = np.array([[[[1, 0], [0, 1]]]])
        logits = Tensor(np.where(mask > 0, 30.0, -30.0))
        assert metrics.weighted_bce(logits, mask).item() < 1e-9

    def test_uninformed_prediction(self):
        loss = metrics.weighted_bce(Tensor(np.zeros((2, 1, 4, 4))), np.ones((2, 4, 4)))
        assert loss.item() == pytest.approx(math.log(2.0))

    def test_bce_matches_direct_formula(self, rng):
        z = rng.normal(0, 3, (2, 1, 5, 5))
        y = rng.integers(0, 2, (2, 1, 5, 5))
        w = rng.uniform(0.5, 3.0, (2, 1, 5, 5))
        s = 1.0 / (1.0 + np.exp(-z))
        direct = np.mean(-w * (y * np.log(s) + (1 - y) * np.log(1 - s)))
        assert metrics.weighted_bce(Tensor(z), y, w).item() == pytest.approx(direct, abs=1e-6)

    def test_dice_empty_agreement(self):
        assert metrics.dice_loss(Tensor(np.full((1, 1, 4, 4), -50.0)), np.zeros((1, 4, 4))).item() \
            == pytest.approx(0.0, abs=1e-12)

    def test_dice_full_agreement(self):
        assert metrics.dice_loss(Tensor(np.full((1, 1, 4, 4), 50.0)), np.ones((1, 4, 4))).item() \
            == pytest.approx(0.0, abs=1e-12)

    def test_dice_single_missed_pixel(self):
        loss = metrics.dice_loss(Tensor(np.full((1, 1, 1, 1), -50.0)), np.ones((1, 1, 1)))
        assert loss.item() == pytest.approx(0.5)

    def test_dice_range(self, rng):
        for _ in range(10):
            loss = metrics.dice_loss(Tensor(rng.normal(0, 4, (3, 1, 6, 6))), rng.integers(0, 2, (3, 6, 6)))
            assert 0.0 <= loss.item() < 1.0

    def test_total_is_sum(self, rng):
        z = Tensor(rng.normal(0, 2, (2, 1, 4, 4)))
        y = rng.integers(0, 2, (2, 4, 4))
        w = rng.uniform(0.5, 2.0, (2, 4, 4))
        total = metrics.total_loss(z, y, w).item()
        assert total == pytest.approx(metrics.weighted_bce(z, y, w).item() + metrics.dice_loss(z, y).item())

    def test_tile_losses_average_to_batch_loss(self, rng):
        z = rng.normal(0, 2, (3, 1, 4, 4))
        y = rng.integers(0, 2, (3, 4, 4))
        per_tile = metrics.tile_losses(z, y)
        assert per_tile.shape == (3,)
        assert per_tile.mean() == pytest.approx(metrics.total_loss(Tensor(z), y).item())

    @pytest.mark.parametrize("loss", ["bce", "dice", "total"])
    def test_gradients(self, rng, loss):
        z = ParamTensor("z", rng.normal(0, 2, (2, 1, 4, 4)))
        y = rng.integers(0, 2, (2, 1, 4, 4))
        w = rng.uniform(0.5, 3.0, (2, 1, 4, 4))
        forward = {
            "bce": lambda: metrics.weighted_bce(z, y, w),
            "dice": lambda: metrics.dice_loss(z, y),
            "total": lambda: metrics.total_loss(z, y, w),
        }[loss]
        assert autodiff.grad_check(forward, [z], samples=None) < 1e-4

    def test_shape_mismatch(self):
        with pytest.raises(autodiff.ContractViolation):
            metrics.weighted_bce(Tensor(np.zeros((1, 1, 4, 4))), np.zeros((3, 3)))


class TestConfusion:

    @staticmethod
    def _example():
        mask = np.array([1, 1, 1, 1, 0, 0, 0, 0, 0, 0])
        probs = np.array([.9, .8, .7, .2, .6, .1, .1, .1, .1, .1])
        return probs, mask

    def test_counts_and_scores(self):
        report = metrics.confusion_metrics(*self._example(), threshold=0.5)
        assert (report.tp, report.fp, report.tn, report.fn) == (3, 1, 5, 1)
        assert report.precision == pytest.approx(0.75)
        assert report.recall == pytest.approx(0.75)
        assert report.f1 == pytest.approx(0.75)
        assert report.iou == pytest.approx(0.6)
        # p_o = 0.8, p_e = (4 * 4 + 6 * 6) / 100
        assert report.kappa == pytest.approx(0.28 / 0.48)
        assert report.total == 10

    def test_threshold_is_inclusive(self):
        report = metrics.confusion_metrics(np.array([0.5, 0.2]), np.array([1, 0]), threshold=0.5)
        assert report.tp == 1

    def test_perfect_prediction(self):
        mask = np.array([[0, 1], [1, 0]])
        report = metrics.confusion_metrics(mask.astype(float), mask)
        assert (report.precision, report.recall, report.f1, report.iou, report.kappa) == (1, 1, 1, 1, 1)

    def test_all_negative_prediction(self):
        report = metrics.confusion_metrics(np.zeros(6), np.array([1, 0, 1, 0, 0, 0]))
        assert report.recall == 0.0 and report.f1 == 0.0 and report.precision == 0.0

    def test_constant_agreement_has_zero_kappa(self):
        report = metrics.confusion_metrics(np.zeros(4), np.zeros(4))
        assert report.kappa == 0.0
        assert report.accuracy == 1.0

    def test_save(self, tmp_path):
        report = metrics.confusion_metrics(*self._example())
        report.save(tmp_path / "m.json")
        with open(tmp_path / "m.json", encoding="utf-8") as f:
            assert MetricsReport.model_validate(json.load(f)) == report


class TestAuc:

    def test_separated(self):
        assert metrics.roc_auc(np.array([.1, .2, .8, .9]), np.array([0, 0, 1, 1])) == 1.0

    def test_identical_scores(self):
        assert metrics.roc_auc(np.full(6, 0.3), np.array([0, 1, 0, 1, 1, 0])) == 0.5

    def test_pairwise_oracle(self):
        probs = np.array([0.1, 0.4, 0.35, 0.8, 0.4, 0.6])
        mask = np.array([0, 0, 1, 1, 1, 0])
        pos, neg = probs[mask == 1], probs[mask == 0]
        pairs = [1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg]
        assert metrics.roc_auc(probs, mask) == pytest.approx(sum(pairs) / len(pairs), abs=1e-12)

    def test_monotone_transform(self, rng):
        probs = rng.random(200)
        mask = rng.integers(0, 2, 200)
        assert metrics.roc_auc(probs, mask) == pytest.approx(metrics.roc_auc(probs ** 3, mask))

    def test_single_class(self):
        with pytest.raises(UndefinedMetric):
            metrics.roc_auc(np.random.default_rng(0).random(5), np.ones(5))


class TestBestThreshold:

    def test_grid(self):
        assert metrics.THRESHOLDS.size == 50
        assert np.isclose(metrics.THRESHOLDS, 0.5714, atol=1e-4).any()
        assert np.isclose(metrics.THRESHOLDS, 0.7959, atol=1e-4).any()

    def test_separable_picks_lowest(self):
        probs = np.array([0.1, 0.1, 0.9, 0.9])
        threshold, f1 = metrics.best_threshold(probs, np.array([0, 0, 1, 1]))
        assert f1 == 1.0
        assert threshold == pytest.approx(5 / 49)

    def test_matches_exhaustive_search(self, rng):
        probs = rng.random(500)
        mask = (probs + rng.normal(0, 0.3, 500) > 0.6).astype(int)
        scores = [metrics.confusion_metrics(probs, mask, t).f1 for t in metrics.THRESHOLDS]
        threshold, f1 = metrics.best_threshold(probs, mask)
        assert threshold == metrics.THRESHOLDS[int(np.argmax(scores))]
        assert f1 == max(scores)

    def test_accepts_tile_lists(self, rng):
        probs = [rng.random((4, 4)) for _ in range(3)]
        masks = [(p >= metrics.THRESHOLDS[25]).astype(int) for p in probs]
        assert metrics.best_threshold(probs, masks)[1] == 1.0


class TestEvaluate:

    def test_searches_threshold(self, rng):
        probs = rng.random((2, 8, 8))
        report = metrics.evaluate(probs, probs >= metrics.THRESHOLDS[15], best_epoch=7)
        assert report.best_threshold == report.threshold
        assert report.f1 == 1.0 and report.auc == 1.0
        assert report.best_epoch == 7

    def test_single_class_has_no_auc(self):
        report = metrics.evaluate(np.full(8, 0.2), np.zeros(8), threshold=0.5)
        assert report.auc is None
        assert report.best_threshold is None
