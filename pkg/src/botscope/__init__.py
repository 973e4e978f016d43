"""Bot role analysis toolkit: event logs to classes, networks, cascades and tests."""

from .classify import Agency, ActorProfile, Stance, UserClass
from .events import Event, EventLog, Kind, Platform, normalize_log, parse_events
from .graph import InteractionGraph, Partition
from .pipeline import PipelineConfig, PipelineError, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "ActorProfile", "Agency", "Event", "EventLog", "InteractionGraph", "Kind", "Partition",
    "PipelineConfig", "PipelineError", "Platform", "Stance", "UserClass", "normalize_log",
    "parse_events", "run_pipeline",
]
