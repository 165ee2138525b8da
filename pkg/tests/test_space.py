import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tunekit.errors import SpaceError
from tunekit.space import (
    Choice,
    LogUniform,
    SearchSpace,
    TrialConfig,
    default_search_space,
    sample_config,
    validate_config,
)


class TestLogUniform:
    def test_bounds_validated(self):
        with pytest.raises(SpaceError):
            LogUniform(0.0, 1.0)
        with pytest.raises(SpaceError):
            LogUniform(1.0, 0.5)
        with pytest.raises(SpaceError):
            LogUniform(1.0, math.inf)

    def test_contains(self):
        spec = LogUniform(1e-4, 0.1)
        assert spec.contains(1e-4) and spec.contains(0.1) and spec.contains(1e-2)
        assert not spec.contains(9e-5)
        assert not spec.contains(0.2)
        assert not spec.contains("0.01")
        assert not spec.contains(True)

    def test_samples_inside_bounds(self):
        spec = LogUniform(1e-4, 0.1)
        rng = np.random.default_rng(0)
        values = [spec.sample(rng) for _ in range(2000)]
        assert all(1e-4 <= v <= 0.1 for v in values)

    def test_log_uniformity(self):
        # The log of the sample is uniform: each decade gets ~1/3 of the mass.
        spec = LogUniform(1e-4, 0.1)
        rng = np.random.default_rng(1)
        logs = np.log10([spec.sample(rng) for _ in range(30000)])
        for lo in (-4, -3, -2):
            frac = np.mean((logs >= lo) & (logs < lo + 1))
            assert abs(frac - 1 / 3) < 0.02


class TestChoice:
    def test_validated(self):
        with pytest.raises(SpaceError):
            Choice(())
        with pytest.raises(SpaceError):
            Choice((8, 8))

    def test_contains(self):
        spec = Choice((2, 6, 10, 14))
        assert spec.contains(2) and spec.contains(14)
        assert not spec.contains(4)
        assert not spec.contains("2")

    def test_sampling_hits_every_value(self):
        spec = Choice((8, 16))
        rng = np.random.default_rng(2)
        values = {spec.sample(rng) for _ in range(200)}
        assert values == {8, 16}


class TestSearchSpace:
    def test_default_space(self):
        space = default_search_space()
        assert space.learning_rate == LogUniform(1e-4, 0.1)
        assert space.weight_decay == LogUniform(1e-5, 0.1)
        assert space.randaugment_n.values == (1, 2, 3)
        assert space.randaugment_m.values == (2, 6, 10, 14)
        assert space.batch_size.values == (8, 16)

    def test_dict_round_trip(self):
        space = default_search_space()
        assert SearchSpace.from_dict(space.to_dict()) == space

    def test_from_dict_rejects_junk(self):
        good = default_search_space().to_dict()
        with pytest.raises(SpaceError):
            SearchSpace.from_dict({k: v for k, v in good.items() if k != "batch_size"})
        bad = dict(good)
        bad["extra"] = {"choice": [1]}
        with pytest.raises(SpaceError):
            SearchSpace.from_dict(bad)
        bad = dict(good)
        bad["learning_rate"] = {"uniform": [0, 1]}
        with pytest.raises(SpaceError):
            SearchSpace.from_dict(bad)
        bad = dict(good)
        bad["learning_rate"] = {"loguniform": [1e-4]}
        with pytest.raises(SpaceError):
            SearchSpace.from_dict(bad)


class TestSampling:
    def test_deterministic(self):
        space = default_search_space()
        assert sample_config(space, 42) == sample_config(space, 42)
        assert sample_config(space, 42) != sample_config(space, 43)

    def test_sampled_types(self):
        config = sample_config(default_search_space(), 0)
        assert isinstance(config.learning_rate, float)
        assert isinstance(config.weight_decay, float)
        assert isinstance(config.randaugment_n, int)
        assert isinstance(config.randaugment_m, int)
        assert isinstance(config.batch_size, int)

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=50, deadline=None)
    def test_samples_always_valid(self, seed):
        space = default_search_space()
        assert validate_config(space, sample_config(space, seed)) == []

    def test_validate_config_flags_violations(self):
        space = default_search_space()
        bad = TrialConfig(
            learning_rate=0.5, weight_decay=4.2e-4, randaugment_n=2, randaugment_m=7, batch_size=8
        )
        problems = validate_config(space, bad)
        assert len(problems) == 2
        assert any("learning_rate" in p for p in problems)
        assert any("randaugment_m" in p for p in problems)


class TestTrialConfig:
    def test_dict_round_trip(self):
        config = sample_config(default_search_space(), 5)
        assert TrialConfig.from_dict(config.to_dict()) == config

    def test_from_dict_strict(self):
        data = sample_config(default_search_space(), 5).to_dict()
        with pytest.raises(SpaceError):
            TrialConfig.from_dict({k: v for k, v in data.items() if k != "batch_size"})
        data["surprise"] = 3
        with pytest.raises(SpaceError):
            TrialConfig.from_dict(data)
