"""
Rejection policy settings and the rejection ledger shared by the flow engines.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Tuple

from model.instance_model import Outcome
from utils.errors import ParameterError

logger = logging.getLogger(__name__)


def inverse_epsilon(epsilon: float) -> int:
    """
    Return q = 1/epsilon, requiring it to be a positive integer.

    Raises:
        ParameterError: If epsilon <= 0 or 1/epsilon is not integral
    """
    if not (epsilon > 0):
        raise ParameterError("epsilon must be positive")
    q = round(1.0 / epsilon)
    if q < 1 or abs(q - 1.0 / epsilon) > 1e-9:
        raise ParameterError(f"1/epsilon must be a positive integer, got epsilon={epsilon}")
    return q


@dataclass(frozen=True)
class RejectionRules:
    """Which rejection rules the flow-time engine applies."""
    rule1: bool = True
    rule2: bool = True

    @classmethod
    def from_config(cls, config: Dict[str, Any]) -> 'RejectionRules':
        rules = config.get('rejection', {})
        return cls(rule1=bool(rules.get('rule1', True)), rule2=bool(rules.get('rule2', True)))

    @classmethod
    def disabled(cls) -> 'RejectionRules':
        """Immediate-dispatch baseline that never rejects."""
        return cls(rule1=False, rule2=False)

    @property
    def label(self) -> str:
        if self.rule1 and self.rule2:
            return "rules12"
        if not self.rule1 and not self.rule2:
            return "norej"
        return "rule1" if self.rule1 else "rule2"


@dataclass(frozen=True)
class RejectionEvent:
    """
    One rejection.

    `delay` is the time the rejected job would still have occupied the machine
    (q for unit speed, q/s otherwise). `affected` are the jobs whose definitive
    finish absorbs that delay. `own_term` is the extra delay charged to the
    rejected job itself (Rule 2 only).
    """
    time: float
    machine: int
    job: int
    outcome: Outcome
    remaining: float
    delay: float
    trigger: Optional[int]
    affected: Tuple[int, ...] = ()
    own_term: float = 0.0


@dataclass
class RejectionLedger:
    """Collects the rejections of one run and derives definitive-finish delays."""
    events: List[RejectionEvent] = field(default_factory=list)

    def record(self, event: RejectionEvent):
        self.events.append(event)
        logger.debug(f"t={event.time}: job {event.job} {event.outcome.value} on machine "
                     f"{event.machine} (remaining={event.remaining}, trigger={event.trigger})")

    def rejected_ids(self) -> List[int]:
        return [event.job for event in self.events]

    def by_outcome(self, outcome: Outcome) -> List[RejectionEvent]:
        return [event for event in self.events if event.outcome == outcome]

    def definitive_delays(self, job_ids: Iterable[int]) -> Dict[int, float]:
        """Total delay added to C_j for every job id given."""
        delays = {job_id: 0.0 for job_id in job_ids}
        for event in self.events:
            for job_id in event.affected:
                delays[job_id] += event.delay
            if event.own_term:
                delays[event.job] += event.own_term
        return delays
