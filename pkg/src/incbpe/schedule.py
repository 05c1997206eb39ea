"""Loss-driven vocabulary growth schedule.

After every epoch the caller reports a validation loss. When the loss rises,
or moves by no more than ``loss_threshold``, and no burn-in is pending, the
schedule advances to the next merge count on the ladder. Training stops
``patience_epochs`` after the first strict loss increase.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Iterable, Sequence

from ._io import atomic_writer, read_lines
from .errors import ConfigurationError, InvalidInputError, MalformedInputError, ScheduleStateError

DEFAULT_INCREMENTS = (10000, 20000, 30000, 40000, 50000, 60000)


@dataclass(frozen=True)
class ScheduleConfig:
    loss_threshold: float = 0.05
    burn_in_epochs: int = 3
    increments: tuple[int, ...] = DEFAULT_INCREMENTS
    patience_epochs: int = 10

    def __post_init__(self):
        object.__setattr__(self, "increments", tuple(self.increments))
        if not (self.loss_threshold > 0 and math.isfinite(self.loss_threshold)):
            raise ConfigurationError(f"loss_threshold must be a positive finite number, got {self.loss_threshold}")
        if self.burn_in_epochs < 0:
            raise ConfigurationError(f"burn_in_epochs must be >= 0, got {self.burn_in_epochs}")
        if self.patience_epochs < 1:
            raise ConfigurationError(f"patience_epochs must be >= 1, got {self.patience_epochs}")
        if not self.increments:
            raise ConfigurationError("increments must not be empty")
        if any(b <= a for a, b in zip(self.increments, self.increments[1:])):
            raise ConfigurationError(f"increments must be strictly increasing, got {list(self.increments)}")

    @classmethod
    def from_dict(cls, data: dict) -> "ScheduleConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config fields: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "ScheduleConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise MalformedInputError(f"{path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path}: expected a JSON object")
        return cls.from_dict(data)


@dataclass(frozen=True)
class Continue:
    kind = "continue"


@dataclass(frozen=True)
class Increment:
    target_ops: int
    kind = "increment"


@dataclass(frozen=True)
class Stop:
    kind = "stop"


ScheduleDecision = Continue | Increment | Stop

CONTINUE = Continue()
STOP = Stop()


@dataclass(frozen=True)
class ScheduleState:
    config: ScheduleConfig = field(repr=False)
    current_increment_index: int = 0
    epoch: int = 0
    last_loss: float | None = None
    burn_in_remaining: int = 0
    first_increase_epoch: int | None = None
    stopped: bool = False

    @property
    def current_ops(self) -> int:
        return self.config.increments[self.current_increment_index]


def new_schedule(config: ScheduleConfig | None = None) -> ScheduleState:
    return ScheduleState(config=config or ScheduleConfig())


def observe_epoch(state: ScheduleState, loss: float) -> tuple[ScheduleState, ScheduleDecision]:
    """Advance one epoch with validation ``loss``; returns the new state and the decision."""
    if state.stopped:
        raise ScheduleStateError("schedule already stopped")
    if not math.isfinite(loss):
        raise InvalidInputError(f"loss must be finite, got {loss}")
    cfg = state.config
    epoch = state.epoch + 1
    if state.last_loss is None:
        return replace(state, epoch=epoch, last_loss=loss), CONTINUE

    increased = loss > state.last_loss
    trigger = increased or abs(loss - state.last_loss) <= cfg.loss_threshold
    first_increase = state.first_increase_epoch
    if increased and first_increase is None:
        first_increase = epoch
    state = replace(state, epoch=epoch, last_loss=loss, first_increase_epoch=first_increase)

    if first_increase is not None and epoch - first_increase >= cfg.patience_epochs:
        return replace(state, stopped=True), STOP
    if (
        trigger
        and state.burn_in_remaining == 0
        and state.current_increment_index + 1 < len(cfg.increments)
    ):
        index = state.current_increment_index + 1
        state = replace(state, current_increment_index=index, burn_in_remaining=cfg.burn_in_epochs)
        return state, Increment(cfg.increments[index])
    if state.burn_in_remaining > 0:
        state = replace(state, burn_in_remaining=state.burn_in_remaining - 1)
    return state, CONTINUE


def replay(config: ScheduleConfig, losses: Iterable[float]) -> list[ScheduleDecision]:
    decisions, _ = replay_with_state(config, losses)
    return decisions


def replay_with_state(
    config: ScheduleConfig, losses: Iterable[float]
) -> tuple[list[ScheduleDecision], ScheduleState]:
    state = new_schedule(config)
    decisions: list[ScheduleDecision] = []
    for loss in losses:
        state, decision = observe_epoch(state, loss)
        decisions.append(decision)
        if state.stopped:
            break
    return decisions, state


def read_loss_trace(path) -> list[float]:
    """Parse a JSON-lines loss trace; epochs must run 1, 2, 3, ..."""
    losses = []
    for lineno, line in enumerate(read_lines(path), start=1):
        if not line.strip():
            raise MalformedInputError(f"line {lineno}: blank line in loss trace")
        try:
            rec = json.loads(line)
            epoch = rec["epoch"]
            loss = rec["loss"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise MalformedInputError(f"line {lineno}: malformed trace record ({exc})") from None
        if isinstance(epoch, bool) or not isinstance(epoch, int) or epoch != lineno:
            raise MalformedInputError(f"line {lineno}: expected epoch {lineno}, got {epoch!r}")
        if isinstance(loss, bool) or not isinstance(loss, (int, float)) or not math.isfinite(loss):
            raise MalformedInputError(f"line {lineno}: loss must be a finite number, got {loss!r}")
        losses.append(float(loss))
    return losses


def write_loss_trace(losses: Sequence[float], path) -> None:
    with atomic_writer(path) as fh:
        for epoch, loss in enumerate(losses, start=1):
            fh.write(json.dumps({"epoch": epoch, "loss": loss}) + "\n")


def decision_record(epoch: int, decision: ScheduleDecision) -> dict:
    target = decision.target_ops if isinstance(decision, Increment) else None
    return {"epoch": epoch, "decision": decision.kind, "target_ops": target}


def decision_log_lines(decisions: Sequence[ScheduleDecision]) -> list[str]:
    return [json.dumps(decision_record(e, d)) for e, d in enumerate(decisions, start=1)]


def config_dict(config: ScheduleConfig) -> dict:
    data = asdict(config)
    data["increments"] = list(config.increments)
    return data
