import math

import numpy as np
import pytest

from tunekit.errors import OptimError
from tunekit.optim import OptimizerConfig, cosine_lr, sgd_momentum_step


def make_config(**overrides):
    base = dict(initial_lr=0.1, weight_decay=1e-4, total_steps=100)
    base.update(overrides)
    return OptimizerConfig(**base)


class TestConfig:
    def test_validation(self):
        with pytest.raises(OptimError):
            make_config(initial_lr=0.0)
        with pytest.raises(OptimError):
            make_config(weight_decay=-1e-4)
        with pytest.raises(OptimError):
            make_config(total_steps=0)
        with pytest.raises(OptimError):
            make_config(min_lr=0.2)  # above initial_lr
        with pytest.raises(OptimError):
            make_config(momentum=1.0)


class TestCosine:
    @pytest.mark.parametrize("total", [1, 7, 200, 400])
    def test_endpoints(self, total):
        config = make_config(total_steps=total)
        assert cosine_lr(0, config) == pytest.approx(config.initial_lr, rel=1e-15)
        assert cosine_lr(total, config) == pytest.approx(config.min_lr, abs=1e-18)

    @pytest.mark.parametrize("total", [200, 400])
    def test_midpoint_is_average(self, total):
        config = make_config(total_steps=total, min_lr=0.01)
        expected = (config.initial_lr + config.min_lr) / 2
        assert cosine_lr(total // 2, config) == pytest.approx(expected, rel=1e-13)

    @pytest.mark.parametrize("total", [7, 201])
    def test_symmetry(self, total):
        config = make_config(total_steps=total, min_lr=0.002)
        for t in range(total + 1):
            pair = cosine_lr(t, config) + cosine_lr(total - t, config)
            assert pair == pytest.approx(config.initial_lr + config.min_lr, rel=1e-13)

    def test_monotone_decreasing(self):
        config = make_config(total_steps=400)
        values = [cosine_lr(t, config) for t in range(401)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_step_bounds(self):
        config = make_config(total_steps=10)
        with pytest.raises(OptimError):
            cosine_lr(-1, config)
        with pytest.raises(OptimError):
            cosine_lr(11, config)


class TestSgdStep:
    def test_hand_computed_sequence(self):
        config = make_config(initial_lr=0.1, weight_decay=0.0, momentum=0.9)
        params = np.array([1.0, -2.0])
        velocity = np.zeros(2)
        grads = np.array([0.5, 0.5])
        params, velocity = sgd_momentum_step(params, grads, velocity, 0.1, config)
        assert np.allclose(velocity, [0.5, 0.5])
        assert np.allclose(params, [0.95, -2.05])
        params, velocity = sgd_momentum_step(params, grads, velocity, 0.1, config)
        # v = 0.9 * 0.5 + 0.5 = 0.95
        assert np.allclose(velocity, [0.95, 0.95])
        assert np.allclose(params, [0.95 - 0.095, -2.05 - 0.095])

    def test_weight_decay_couples_into_gradient(self):
        config = make_config(weight_decay=0.1, momentum=0.0)
        params = np.array([2.0])
        new_params, velocity = sgd_momentum_step(params, np.zeros(1), np.zeros(1), 0.5, config)
        # g = 0 + 0.1 * 2 = 0.2 ; p = 2 - 0.5 * 0.2
        assert np.allclose(velocity, [0.2])
        assert np.allclose(new_params, [1.9])

    def test_zero_momentum_is_plain_sgd(self):
        config = make_config(weight_decay=0.0, momentum=0.0)
        params = np.array([1.0, 2.0, 3.0])
        grads = np.array([0.1, -0.2, 0.3])
        new_params, _ = sgd_momentum_step(params, grads, np.zeros(3), 0.01, config)
        assert np.allclose(new_params, params - 0.01 * grads)

    def test_inputs_not_mutated(self):
        config = make_config()
        params = np.array([1.0])
        grads = np.array([1.0])
        velocity = np.array([1.0])
        sgd_momentum_step(params, grads, velocity, 0.1, config)
        assert params[0] == 1.0 and grads[0] == 1.0 and velocity[0] == 1.0

    def test_validation(self):
        config = make_config()
        with pytest.raises(OptimError):
            sgd_momentum_step(np.zeros(2), np.zeros(3), np.zeros(2), 0.1, config)
        with pytest.raises(OptimError):
            sgd_momentum_step(np.zeros(2), np.zeros(2), np.zeros(2), -0.1, config)
        with pytest.raises(OptimError):
            sgd_momentum_step(np.array([math.nan, 0.0]), np.zeros(2), np.zeros(2), 0.1, config)
