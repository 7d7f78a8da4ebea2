"""Match-event analytics: ingestion, possession phases, technical features,
passing networks, player ratings, population statistics, team-gender
classifiers and Shapley explanations."""
from .errors import MatchTechError
from .ingest import Event, EventStore, EventType, Gender, Match, Period, Player

__version__ = "0.1.0"

__all__ = ["MatchTechError", "Event", "EventStore", "EventType", "Gender", "Match", "Period", "Player", "__version__"]
