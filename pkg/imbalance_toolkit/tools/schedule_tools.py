from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Union
import logging

from ..errors import InvalidConfig, InvalidScheduleOutput, InvalidTargets
from .data_tools import ClassDistribution
from .sampling_tools import SamplingTargets
from .shared_tools import round_half_up

logger = logging.getLogger(__name__)

SCHEDULE_KINDS = ("uniform", "progressive", "custom")

# (origin, final, i_estimator, total_estimators) -> targets
ScheduleRule = Callable[[ClassDistribution, SamplingTargets, int, int],
                        Union[SamplingTargets, Mapping[int, int]]]


@dataclass(frozen=True)
class BalancingSchedule:
    """How per-round sampling targets move from the original distribution to the final targets."""

    kind: str = "uniform"
    custom_rule: Optional[ScheduleRule] = None

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise InvalidConfig(f"unknown balancing schedule '{self.kind}', expected one of {SCHEDULE_KINDS}")
        if self.kind == "custom" and self.custom_rule is None:
            raise InvalidConfig("a custom balancing schedule needs a rule")

    @classmethod
    def from_value(cls, value: Union[str, ScheduleRule, 'BalancingSchedule', None]) -> 'BalancingSchedule':
        """Accept a schedule name, a callable rule or a schedule."""
        if value is None:
            return cls()
        if isinstance(value, BalancingSchedule):
            return value
        if callable(value):
            return cls(kind="custom", custom_rule=value)
        return cls(kind=str(value))

    def describe(self) -> str:
        if self.kind == "custom":
            return f"custom:{getattr(self.custom_rule, '__name__', 'rule')}"
        return self.kind


def _validate_rule_output(output, origin: ClassDistribution) -> SamplingTargets:
    try:
        targets = output if isinstance(output, SamplingTargets) else SamplingTargets(dict(output))
    except (InvalidTargets, TypeError, ValueError) as e:
        raise InvalidScheduleOutput(f"custom schedule returned malformed targets: {e}")
    missing = [c for c in origin.classes if c not in targets.targets]
    if missing:
        raise InvalidScheduleOutput(f"custom schedule returned no target for class {missing[0]}")
    unknown = [c for c in targets.targets if c not in origin]
    if unknown:
        raise InvalidScheduleOutput(f"custom schedule returned a target for unknown class {unknown[0]}")
    return targets


def schedule_targets(
    schedule: BalancingSchedule,
    origin: ClassDistribution,
    final: SamplingTargets,
    i_estimator: int,
    total_estimators: int,
) -> SamplingTargets:
    """
    Sampling targets for round `i_estimator` of `total_estimators`.

    uniform returns `final` every round; progressive interpolates linearly per class
    from the original counts (round 0) to `final` (last round), rounding half up;
    custom calls the user rule and validates what it returns.
    """
    if total_estimators < 1:
        raise InvalidConfig(f"total_estimators must be at least 1, got {total_estimators}")
    if not 0 <= i_estimator < total_estimators:
        raise InvalidConfig(f"i_estimator {i_estimator} outside [0, {total_estimators})")

    if schedule.kind == "uniform":
        return final
    if schedule.kind == "progressive":
        if total_estimators == 1:
            return final
        progress = i_estimator / (total_estimators - 1)
        return SamplingTargets({
            c: round_half_up(origin[c] + (final[c] - origin[c]) * progress) for c in origin.classes
        })

    targets = _validate_rule_output(
        schedule.custom_rule(origin, final, i_estimator, total_estimators), origin)
    logger.debug(f"Custom schedule round {i_estimator}: {targets.as_dict()}")
    return targets
