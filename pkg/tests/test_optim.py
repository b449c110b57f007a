"""优化器与学习率调度测试."""
import numpy as np
import pytest

from core.optim import SGD, Adam, lr_at, scale_decay_epochs


@pytest.mark.parametrize('epoch, expected', [
    (0, 0.1), (49, 0.1), (50, 0.02), (99, 0.02), (100, 0.004),
    (125, 0.0008), (149, 0.0008),
])
def test_step_schedule(epoch, expected):
    assert lr_at(0.1, 0.2, (50, 100, 125), epoch) == pytest.approx(expected)


@pytest.mark.parametrize('epochs, expected', [
    (150, (50, 100, 125)),
    (15, (5, 10, 13)),
    (3, (1, 2, 3)),
    (1, (1, 2, 3)),
])
def test_scaled_decay_epochs(epochs, expected):
    assert scale_decay_epochs(epochs) == expected


def test_sgd_momentum_accumulates():
    param = {'w': np.array([1.0])}
    sgd = SGD(momentum=0.5)
    sgd.step(param, {'w': np.array([1.0])}, lr=0.1)
    sgd.step(param, {'w': np.array([1.0])}, lr=0.1)
    # 0.1·1 + 0.1·(0.5 + 1)
    np.testing.assert_allclose(param['w'], [0.75])


def test_weight_decay():
    param = {'w': np.array([2.0])}
    SGD(weight_decay=0.5).step(param, {'w': np.array([0.0])}, lr=0.1)
    np.testing.assert_allclose(param['w'], [1.9])


def test_adam_first_step_moves_by_lr():
    param = {'w': np.array([1.0, -1.0])}
    Adam().step(param, {'w': np.array([3.0, -0.01])}, lr=0.01)
    np.testing.assert_allclose(param['w'], [0.99, -0.99], rtol=1e-6)
