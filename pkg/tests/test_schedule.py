import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from incbpe.errors import ConfigurationError, InvalidInputError, MalformedInputError, ScheduleStateError
from incbpe.schedule import (
    Continue,
    Increment,
    ScheduleConfig,
    Stop,
    decision_log_lines,
    new_schedule,
    observe_epoch,
    read_loss_trace,
    replay,
    write_loss_trace,
)


def test_defaults_are_the_published_constants():
    cfg = ScheduleConfig()
    assert cfg.loss_threshold == 0.05
    assert cfg.burn_in_epochs == 3
    assert cfg.patience_epochs == 10
    assert cfg.increments == (10000, 20000, 30000, 40000, 50000, 60000)


def test_new_schedule():
    state = new_schedule(ScheduleConfig())
    assert state.current_ops == 10000
    assert (state.epoch, state.last_loss, state.burn_in_remaining, state.stopped) == (0, None, 0, False)
    assert new_schedule(ScheduleConfig(increments=[5])).current_ops == 5


@pytest.mark.parametrize(
    "kwargs",
    [
        {"increments": []},
        {"increments": [10, 10]},
        {"increments": [20, 10]},
        {"loss_threshold": 0},
        {"loss_threshold": float("nan")},
        {"burn_in_epochs": -1},
        {"patience_epochs": 0},
    ],
)
def test_invalid_configs(kwargs):
    with pytest.raises(ConfigurationError):
        ScheduleConfig(**kwargs)


def test_config_from_dict_defaults_and_unknown():
    assert ScheduleConfig.from_dict({"burn_in_epochs": 1}).burn_in_epochs == 1
    assert ScheduleConfig.from_dict({}).increments[0] == 10000
    with pytest.raises(ConfigurationError):
        ScheduleConfig.from_dict({"burnin": 1})


def test_basic_trace():
    assert replay(ScheduleConfig(), [5.0, 4.0, 3.98]) == [Continue(), Continue(), Increment(20000)]
    assert replay(ScheduleConfig(), []) == []


def test_burn_in_suppresses_three_epochs():
    got = replay(ScheduleConfig(), [5.0, 4.99, 4.98, 4.97, 4.96, 4.95])
    assert got == [Continue(), Increment(20000), Continue(), Continue(), Continue(), Increment(30000)]


def test_strict_decrease_never_triggers():
    got = replay(ScheduleConfig(), [100.0 - i for i in range(40)])
    assert got == [Continue()] * 40


def test_errors():
    state = new_schedule()
    with pytest.raises(InvalidInputError):
        observe_epoch(state, math.inf)
    cfg = ScheduleConfig(patience_epochs=1)
    state, _ = observe_epoch(new_schedule(cfg), 1.0)
    state, _ = observe_epoch(state, 2.0)
    state, decision = observe_epoch(state, 3.0)
    assert decision == Stop() and state.stopped
    with pytest.raises(ScheduleStateError):
        observe_epoch(state, 1.0)


def test_states_are_snapshots():
    s0 = new_schedule()
    s1, _ = observe_epoch(s0, 1.0)
    assert s0.epoch == 0 and s1.epoch == 1


losses_st = st.lists(st.floats(min_value=-5, max_value=5, allow_nan=False), max_size=60)


@settings(max_examples=300, deadline=None)
@given(losses_st, st.integers(0, 4), st.integers(1, 6))
def test_schedule_properties(losses, burn_in, patience):
    cfg = ScheduleConfig(burn_in_epochs=burn_in, patience_epochs=patience, increments=[1, 2, 3, 4])
    decisions = replay(cfg, losses)
    assert decisions == replay(cfg, losses)
    inc_epochs = [i for i, d in enumerate(decisions) if isinstance(d, Increment)]
    targets = [decisions[i].target_ops for i in inc_epochs]
    assert targets == list(cfg.increments[1 : 1 + len(targets)])
    assert len(targets) <= len(cfg.increments) - 1
    assert all(b - a > burn_in for a, b in zip(inc_epochs, inc_epochs[1:]))
    stops = [i for i, d in enumerate(decisions) if isinstance(d, Stop)]
    assert stops in ([], [len(decisions) - 1])


def test_trace_file_roundtrip(tmp_path):
    path = tmp_path / "trace.jsonl"
    write_loss_trace([5.0, 4.0, 3.98], path)
    assert read_loss_trace(path) == [5.0, 4.0, 3.98]


@pytest.mark.parametrize(
    "text",
    ['{"epoch": 2, "loss": 1.0}\n', '{"epoch": 1}\n', "nope\n", '{"epoch": 1, "loss": "x"}\n', '{"epoch": 1, "loss": NaN}\n'],
)
def test_trace_file_errors(tmp_path, text):
    path = tmp_path / "trace.jsonl"
    path.write_text(text)
    with pytest.raises(MalformedInputError, match="line 1"):
        read_loss_trace(path)


def test_decision_log_format():
    lines = decision_log_lines([Continue(), Increment(20000), Stop()])
    assert [json.loads(l) for l in lines] == [
        {"epoch": 1, "decision": "continue", "target_ops": None},
        {"epoch": 2, "decision": "increment", "target_ops": 20000},
        {"epoch": 3, "decision": "stop", "target_ops": None},
    ]
