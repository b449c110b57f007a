"""评估服务测试（对照暴力计算的参考实现）."""
import numpy as np
import pytest
from scipy.special import softmax

from core.exceptions import ShapeError
from models.dataset import Dataset
from models.eval_types import (
    AttackConfig,
    AttackNorm,
    OODScoreKind,
    ScoredPrediction,
)
from models.experiment_config import DatasetName
from repositories import DatasetRepository
from services import EvalService
from tests.helpers import linear_network


@pytest.fixture
def evaluator() -> EvalService:
    return EvalService(chunk_size=7)


def brute_force_ece(preds, buckets):
    n = len(preds)
    total = 0.0
    for m in range(1, buckets + 1):
        lower, upper = (m - 1) / buckets, m / buckets
        members = [
            p for p in preds
            if lower < p.confidence <= upper
            or (m == 1 and p.confidence == 0.0)
        ]
        if not members:
            continue
        acc = sum(p.correct for p in members) / len(members)
        conf = sum(p.confidence for p in members) / len(members)
        total += len(members) / n * abs(acc - conf)
    return total


def brute_force_auroc(scores_in, scores_out):
    wins = 0.0
    for a in scores_in:
        for b in scores_out:
            wins += 1.0 if a > b else 0.5 if a == b else 0.0
    return wins / (len(scores_in) * len(scores_out))


def random_predictions(rng, n):
    confidence = rng.uniform(0.0, 1.0, size=n)
    # 落在桶边界上的置信度
    edges = rng.integers(0, 21, size=n) / 20
    confidence = np.where(rng.random(n) < 0.2, edges, confidence)
    return [
        ScoredPrediction(float(c), int(rng.integers(3)), int(rng.integers(3)))
        for c in confidence
    ]


def labelled_by(net, x):
    """以网络自身预测为标签的数据集（准确率为 1）."""
    y = np.argmax(net.forward_logits(x), axis=1)
    return Dataset(x, y, net.num_classes, 'memorized')


class TestCalibration:

    @pytest.mark.parametrize('seed', range(100))
    def test_ece_matches_brute_force(self, evaluator, seed):
        rng = np.random.default_rng(seed)
        preds = random_predictions(rng, int(rng.integers(1, 60)))
        buckets = int(rng.choice([1, 5, 10, 20]))
        assert evaluator.ece(preds, buckets) == pytest.approx(
            brute_force_ece(preds, buckets), abs=1e-12
        )

    def test_perfectly_calibrated(self, evaluator):
        preds = [ScoredPrediction(1.0, 1, 1)] * 10
        assert evaluator.ece(preds) == 0.0

    def test_reliability_table(self, evaluator):
        rng = np.random.default_rng(0)
        preds = random_predictions(rng, 200)
        table = evaluator.reliability(preds, 10)
        assert [b.index for b in table] == list(range(10))
        assert sum(b.count for b in table) == 200
        assert table[0].lower == 0.0 and table[-1].upper == 1.0
        ece = sum(b.count / 200 * abs(b.accuracy - b.confidence)
                  for b in table)
        assert ece == pytest.approx(evaluator.ece(preds, 10), abs=1e-12)

    def test_empty_predictions_rejected(self, evaluator):
        with pytest.raises(ShapeError):
            evaluator.ece([])


class TestAuroc:

    @pytest.mark.parametrize('seed', range(100))
    def test_matches_pair_counting(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.integers(0, 8, size=int(rng.integers(1, 40))).astype(float)
        b = rng.integers(0, 8, size=int(rng.integers(1, 40))).astype(float)
        if seed % 2:
            a = a + rng.normal(size=a.size)
        assert EvalService.auroc(a, b) == pytest.approx(
            brute_force_auroc(a, b), abs=1e-12
        )
        assert EvalService.auroc(a, b) + EvalService.auroc(b, a) == 1.0

    def test_separated_scores(self):
        assert EvalService.auroc([2.0, 3.0], [0.0, 1.0]) == 1.0
        assert EvalService.auroc([0.0], [1.0]) == 0.0

    def test_empty_scores_rejected(self):
        with pytest.raises(ShapeError):
            EvalService.auroc([], [1.0])


class TestScores:

    def test_accuracy_of_memorized_set(self, evaluator, mlp, rng):
        data = labelled_by(mlp, rng.normal(size=(30, 2)))
        assert evaluator.accuracy(mlp, data) == 1.0

    def test_predictions_confidence(self, evaluator, mlp, rng):
        data = labelled_by(mlp, rng.normal(size=(10, 2)))
        probs = softmax(mlp.forward_logits(data.x), axis=1)
        preds = evaluator.predictions(mlp, data)
        np.testing.assert_allclose(
            [p.confidence for p in preds], probs.max(axis=1)
        )
        assert all(p.correct for p in preds)

    def test_ood_scores(self, evaluator, mlp, rng):
        data = labelled_by(mlp, rng.normal(size=(20, 2)))
        density = evaluator.ood_scores(mlp, data, OODScoreKind.LOG_DENSITY)
        np.testing.assert_allclose(density, -mlp.energy(data.x))
        confidence = evaluator.ood_scores(
            mlp, data, OODScoreKind.MAX_SOFTMAX
        )
        assert np.all((confidence >= 0.5) & (confidence <= 1.0))

    def test_exchangeable_halves(self, evaluator, mlp):
        x = np.random.default_rng(4).normal(size=(2000, 2))
        data = labelled_by(mlp, x)
        first = data.subset(np.arange(1000))
        second = data.subset(np.arange(1000, 2000))
        auroc = EvalService.auroc(
            evaluator.ood_scores(mlp, first),
            evaluator.ood_scores(mlp, second),
        )
        assert auroc == pytest.approx(0.5, abs=0.05)

    def test_empty_dataset_rejected(self, evaluator, mlp):
        with pytest.raises(ShapeError):
            evaluator.accuracy(mlp, Dataset(np.empty((0, 2)), [], 2))


class TestAttack:

    @pytest.mark.parametrize('norm', [AttackNorm.LINF, AttackNorm.L2])
    def test_ball_constraint(self, evaluator, mlp, rng, norm):
        x = rng.normal(size=(25, 2))
        y = rng.integers(2, size=25)
        cfg = AttackConfig(norm=norm, radius=0.3, step_size=0.2, steps=7)
        x_adv = evaluator.pgd_attack(mlp, x, y, cfg, rng)
        delta = x_adv - x
        if norm == AttackNorm.LINF:
            assert np.max(np.abs(delta)) <= 0.3 + 1e-12
        else:
            assert np.max(np.linalg.norm(delta, axis=1)) <= 0.3 + 1e-12

    def test_domain_clip(self, evaluator, mlp, rng):
        x = rng.uniform(-1, 1, size=(20, 2))
        cfg = AttackConfig(
            radius=0.5, step_size=0.5, steps=3, clip_min=-1.0, clip_max=1.0
        )
        x_adv = evaluator.pgd_attack(mlp, x, np.zeros(20, int), cfg, rng)
        assert x_adv.min() >= -1.0 and x_adv.max() <= 1.0

    def test_pixel_domain_holds_under_large_radius(self, evaluator, rng):
        repo = DatasetRepository.get_instance()
        pixels = rng.integers(0, 256, size=(30, 2), dtype=np.uint8)
        pixels[0] = [0, 255]
        data = Dataset(repo.scale_pixels(pixels), rng.integers(2, size=30), 2)
        low, high = repo.domain_of(DatasetName.IDX, data)
        net = linear_network(2, 2, rng)
        for norm in AttackNorm:
            cfg = AttackConfig(
                norm=norm, radius=1.5, step_size=0.5, steps=5,
                clip_min=low, clip_max=high,
            )
            x_adv = evaluator.pgd_attack(net, data.x, data.y, cfg, rng)
            assert x_adv.min() >= -1.0 and x_adv.max() <= 1.0

    def test_one_step_linf_matches_fgsm(self, evaluator, rng):
        net = linear_network(4, 3, rng)
        x = rng.normal(size=(10, 4))
        y = rng.integers(3, size=10)
        cfg = AttackConfig(
            radius=0.1, step_size=0.1, steps=1, random_start=False
        )
        weight = net.first_layer.params['weight']
        bias = net.first_layer.params['bias']
        grad = softmax(x @ weight.T + bias, axis=1)
        grad[np.arange(10), y] -= 1.0
        expected = x + 0.1 * np.sign(grad @ weight)
        np.testing.assert_allclose(
            evaluator.pgd_attack(net, x, y, cfg), expected,
            rtol=0, atol=1e-12,
        )

    def test_attack_increases_loss(self, evaluator, rng):
        net = linear_network(4, 3, rng)
        x = rng.normal(size=(10, 4))
        y = rng.integers(3, size=10)
        cfg = AttackConfig(
            radius=0.2, step_size=0.05, steps=3, random_start=False
        )
        x_adv = evaluator.pgd_attack(net, x, y, cfg)
        before, _ = net.ce_and_grad_input(x, y)
        after, _ = net.ce_and_grad_input(x_adv, y)
        assert np.all(after >= before - 1e-12)

    def test_zero_radius_is_clean_accuracy(self, evaluator, mlp, rng):
        data = Dataset(rng.normal(size=(40, 2)), rng.integers(2, size=40), 2)
        cfg = AttackConfig(radius=0.0)
        assert evaluator.robust_accuracy(mlp, data, cfg) == (
            evaluator.accuracy(mlp, data)
        )
        sweep = evaluator.robustness_sweep(
            mlp, data, AttackConfig(steps=3), [0.0, 0.1, 0.5]
        )
        assert [r for r, _ in sweep] == [0.0, 0.1, 0.5]
        assert sweep[0][1] == evaluator.accuracy(mlp, data)

    def test_single_sample(self, evaluator, mlp, rng):
        x = rng.normal(size=2)
        x_adv = evaluator.pgd_attack(
            mlp, x, 1, AttackConfig(radius=0.1, step_size=0.1, steps=2), rng
        )
        assert x_adv.shape == (2,)
        assert np.max(np.abs(x_adv - x)) <= 0.1 + 1e-12

    def test_robust_accuracy_never_rises_with_radius(self, evaluator, rng):
        net = linear_network(4, 2, rng)
        data = labelled_by(net, rng.normal(size=(200, 4)))
        base = AttackConfig(steps=8, random_start=False)
        radii = [0.0, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6]
        accuracies = [
            acc for _, acc in evaluator.robustness_sweep(
                net, data, base, radii, step_fraction=0.25
            )
        ]
        assert accuracies[0] == 1.0
        assert all(b <= a for a, b in zip(accuracies, accuracies[1:]))
        assert accuracies[-1] < 1.0

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            AttackConfig(radius=-1.0)
