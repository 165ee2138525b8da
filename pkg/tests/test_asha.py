import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_rung_decision, sync_sha
from tunekit.asha import AshaConfig, AshaScheduler, Decision, TrialStatus, rung_levels
from tunekit.errors import SchedulerError


def make_config(**overrides):
    base = dict(grace_period=10, max_resource=200, num_trials=50, reduction_factor=4)
    base.update(overrides)
    return AshaConfig(**base)


class TestConfig:
    def test_validation(self):
        with pytest.raises(SchedulerError):
            make_config(grace_period=0)
        with pytest.raises(SchedulerError):
            make_config(max_resource=5)
        with pytest.raises(SchedulerError):
            make_config(reduction_factor=1)
        with pytest.raises(SchedulerError):
            make_config(num_trials=0)
        with pytest.raises(SchedulerError):
            make_config(metric_mode="maximize")

    def test_rung_levels(self):
        assert rung_levels(make_config()) == (10, 40, 160)
        assert rung_levels(make_config(grace_period=10, max_resource=90, reduction_factor=3)) == (10, 30, 90)
        assert rung_levels(make_config(grace_period=7, max_resource=7)) == (7,)
        assert rung_levels(make_config(grace_period=1, max_resource=8, reduction_factor=2)) == (1, 2, 4, 8)


class TestDecisions:
    def test_first_arrival_continues(self):
        sched = AshaScheduler(make_config())
        sched.add_trial(0)
        assert sched.record_and_decide(0, 10, 0.5) is Decision.CONTINUE

    def test_non_rung_resource_continues_without_recording(self):
        sched = AshaScheduler(make_config())
        sched.add_trial(0)
        assert sched.record_and_decide(0, 3, 0.9) is Decision.CONTINUE
        assert all(len(entries) == 0 for entries in sched.rungs.values())

    def test_worse_arrival_stopped(self):
        sched = AshaScheduler(make_config(reduction_factor=2))
        for tid, metric in ((0, 0.9), (1, 0.5)):
            sched.add_trial(tid)
        assert sched.record_and_decide(0, 10, 0.9) is Decision.CONTINUE
        # second arrival: rung has 2 entries, keep ceil(2/2)=1, rank 2
        assert sched.record_and_decide(1, 10, 0.5) is Decision.STOP
        assert sched.trial_status[1] is TrialStatus.STOPPED

    def test_better_late_arrival_continues_and_nothing_is_retracted(self):
        sched = AshaScheduler(make_config(reduction_factor=2))
        sched.add_trial(0)
        sched.add_trial(1)
        assert sched.record_and_decide(0, 10, 0.5) is Decision.CONTINUE
        assert sched.record_and_decide(1, 10, 0.9) is Decision.CONTINUE
        # trial 0 was promoted when it was alone; that verdict stands
        assert sched.trial_status[0] is TrialStatus.RUNNING
        assert [rec.decision for rec in sched.decision_log] == [Decision.CONTINUE, Decision.CONTINUE]

    def test_tie_goes_to_earlier_arrival(self):
        sched = AshaScheduler(make_config(reduction_factor=2))
        sched.add_trial(0)
        sched.add_trial(1)
        assert sched.record_and_decide(0, 10, 0.7) is Decision.CONTINUE
        assert sched.record_and_decide(1, 10, 0.7) is Decision.STOP

    def test_min_mode(self):
        sched = AshaScheduler(make_config(reduction_factor=2, metric_mode="min"))
        sched.add_trial(0)
        sched.add_trial(1)
        assert sched.record_and_decide(0, 10, 0.9) is Decision.CONTINUE
        assert sched.record_and_decide(1, 10, 0.5) is Decision.CONTINUE  # lower is better
        assert sched.trial_status[1] is TrialStatus.RUNNING

    def test_max_resource_completes_regardless_of_rank(self):
        config = make_config(grace_period=10, max_resource=40, reduction_factor=2, num_trials=3)
        sched = AshaScheduler(config)
        for tid in (0, 1):
            sched.add_trial(tid)
        assert sched.record_and_decide(0, 10, 0.9) is Decision.CONTINUE
        assert sched.record_and_decide(0, 40, 0.95) is Decision.COMPLETE
        assert sched.record_and_decide(1, 10, 0.95) is Decision.CONTINUE
        # rank 2 of 2 at the top rung would stop, but there is nothing left to run
        assert sched.record_and_decide(1, 40, 0.5) is Decision.COMPLETE
        assert sched.trial_status[1] is TrialStatus.COMPLETED
        assert [tid for tid, _ in sched.rungs[40]] == [0, 1]

    def test_max_resource_not_a_rung_completes_without_recording(self):
        config = make_config(grace_period=10, max_resource=200, reduction_factor=4)
        sched = AshaScheduler(config)
        sched.add_trial(0)
        sched.record_and_decide(0, 10, 0.5)
        sched.record_and_decide(0, 40, 0.6)
        sched.record_and_decide(0, 160, 0.7)
        assert sched.record_and_decide(0, 200, 0.71) is Decision.COMPLETE
        assert set(sched.rungs) == {10, 40, 160}

    def test_keep_count_over_growing_rung(self):
        # metrics arrive best-first, so arrival i has rank i+1 and survives
        # exactly while rank <= ceil(n / eta)
        config = make_config(reduction_factor=4, num_trials=20)
        sched = AshaScheduler(config)
        verdicts = []
        for tid in range(12):
            sched.add_trial(tid)
            verdicts.append(sched.record_and_decide(tid, 10, 1.0 - 0.01 * tid))
        for i, verdict in enumerate(verdicts):
            expected = Decision.CONTINUE if (i + 1) <= math.ceil((i + 1) / 4) else Decision.STOP
            assert verdict is expected, f"arrival {i}"


class TestRejections:
    def make_running(self):
        sched = AshaScheduler(make_config())
        sched.add_trial(0)
        sched.record_and_decide(0, 10, 0.5)
        return sched

    def test_rejects_without_mutation(self):
        sched = self.make_running()
        before = sched.state_snapshot()
        for call in (
            lambda: sched.record_and_decide(99, 40, 0.5),  # unknown trial
            lambda: sched.record_and_decide(0, 10, 0.6),  # resource did not increase
            lambda: sched.record_and_decide(0, 5, 0.6),  # resource went backwards
            lambda: sched.record_and_decide(0, 400, 0.6),  # beyond max_resource
            lambda: sched.record_and_decide(0, 40, float("nan")),
            lambda: sched.record_and_decide(0, 40, float("inf")),
            lambda: sched.record_and_decide(0, 40.0, 0.6),  # non-int resource
        ):
            with pytest.raises(SchedulerError):
                call()
            assert sched.state_snapshot() == before

    def test_finished_trials_accept_nothing(self):
        sched = AshaScheduler(make_config(reduction_factor=2))
        sched.add_trial(0)
        sched.add_trial(1)
        sched.record_and_decide(0, 10, 0.9)
        assert sched.record_and_decide(1, 10, 0.1) is Decision.STOP
        with pytest.raises(SchedulerError):
            sched.record_and_decide(1, 40, 0.99)

    def test_duplicate_and_over_budget_registration(self):
        sched = AshaScheduler(make_config(num_trials=1))
        sched.add_trial(0)
        with pytest.raises(SchedulerError):
            sched.add_trial(0)
        with pytest.raises(SchedulerError):
            sched.add_trial(1)


class TestBestTrial:
    def test_empty(self):
        assert AshaScheduler(make_config()).best_trial() is None

    def test_highest_rung_wins(self):
        sched = AshaScheduler(make_config(reduction_factor=2))
        for tid in (0, 1):
            sched.add_trial(tid)
        sched.record_and_decide(0, 10, 0.4)
        sched.record_and_decide(1, 10, 0.9)
        sched.record_and_decide(0, 40, 0.99)  # deeper beats better-at-shallow
        best = sched.best_trial()
        assert (best.trial_id, best.metric, best.resource) == (0, 0.99, 40)

    def test_tie_prefers_earlier_entry(self):
        sched = AshaScheduler(make_config(reduction_factor=4))
        for tid in (0, 1):
            sched.add_trial(tid)
        sched.record_and_decide(0, 10, 0.7)
        sched.record_and_decide(1, 10, 0.7)
        assert sched.best_trial().trial_id == 0


class TestAgainstSynchronousOracle:
    def test_matches_sync_sha_under_synchronous_arrivals(self):
        # 9 trials, quality fixed per trial, everyone reports rung by rung:
        # the per-arrival rule must reproduce synchronous halving exactly.
        config = make_config(
            grace_period=10, max_resource=90, reduction_factor=3, num_trials=9
        )
        plateau = {0: 0.90, 1: 0.60, 2: 0.58, 3: 0.86, 4: 0.56, 5: 0.54, 6: 0.88, 7: 0.52, 8: 0.50}

        def metric_at(tid, level):
            return plateau[tid] * (1 - math.exp(-level / 20))

        reached, kept = sync_sha(metric_at, list(plateau), (10, 30, 90), eta=3)

        sched = AshaScheduler(config)
        for tid in plateau:
            sched.add_trial(tid)
        alive = sorted(plateau)
        for level in (10, 30, 90):
            assert sorted(alive) == reached[level]
            survivors = []
            for tid in alive:
                verdict = sched.record_and_decide(tid, level, metric_at(tid, level))
                if verdict in (Decision.CONTINUE, Decision.COMPLETE):
                    survivors.append(tid)
            if level != 90:
                assert survivors == kept[level]
            alive = survivors


@given(
    st.lists(
        st.tuples(st.integers(0, 7), st.floats(0, 1, allow_nan=False, width=32)),
        min_size=1,
        max_size=60,
    ),
    st.integers(2, 5),
)
@settings(max_examples=200, deadline=None)
def test_every_rung_decision_matches_naive_rule(events, eta):
    """Property: each verdict equals an independent re-derivation."""
    config = AshaConfig(
        grace_period=10, max_resource=1000, num_trials=8, reduction_factor=eta
    )
    sched = AshaScheduler(config)
    next_resource = {}
    for tid, metric in events:
        if tid not in next_resource:
            sched.add_trial(tid)
            next_resource[tid] = 10
        if sched.trial_status[tid] is not TrialStatus.RUNNING:
            continue
        resource = next_resource[tid]
        if resource > config.max_resource:
            continue
        previous = [m for _, m in sched.rungs[resource]] if resource in sched.rungs else None
        verdict = sched.record_and_decide(tid, resource, float(metric))
        if previous is not None:
            assert verdict.value == naive_rung_decision(previous, float(metric), eta)
        next_resource[tid] = resource * eta
