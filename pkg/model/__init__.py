"""
Instance, job and trace model.
"""

from .instance_model import (
    EventKind,
    ExecutionRecord,
    Instance,
    Job,
    Model,
    Outcome,
    ScheduleTrace,
    TraceEvent,
    gen_random,
    parse_instance,
    serialize_instance,
)

__all__ = [
    'EventKind',
    'ExecutionRecord',
    'Instance',
    'Job',
    'Model',
    'Outcome',
    'ScheduleTrace',
    'TraceEvent',
    'gen_random',
    'parse_instance',
    'serialize_instance',
]
