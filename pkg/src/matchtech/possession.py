"""Possession-phase segmentation.

A phase is a maximal run of events in which one team owns the ball. It ends
at the end of a period, when the ball goes out, on an offside or a foul, on
a cooling break, or when the opponent takes over the ball.

Rules used to recover these causes from event records:

* duels are contested, so they are buffered and attributed to the team that
  generates the next uncontested event;
* fouls, offsides and ``Ball out of the field`` interruptions terminate the
  current phase and are stored in it;
* a restart (throw-in, goal kick, corner) always opens a new phase and marks
  the previous one as ``BALL_OUT``; other set pieces mark it as ``FOUL``;
* a within-period silence longer than ``cooling_gap`` seconds is a cooling
  break, for women's matches or when a ``Cooling break`` event is present.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Sequence

from .errors import PreconditionError
from .ingest import Event, EventType, Gender, Period

BALL_OUT_RESTARTS = frozenset({"Throw in", "Goal kick", "Corner"})
COOLING_LABEL = "Cooling break"
DEFAULT_COOLING_GAP = 90.0


class EndReason(enum.Enum):
    HALF_END = "HalfEnd"
    BALL_OUT = "BallOut"
    OFFSIDE = "Offside"
    FOUL = "Foul"
    COOLING_BREAK = "CoolingBreak"
    TURNOVER = "TurnoverToOpponent"


@dataclass(frozen=True)
class PossessionPhase:
    match_id: int
    team_id: int
    period: Period
    start_sec: float
    end_sec: float
    events: tuple
    end_reason: EndReason

    @property
    def start(self) -> tuple:
        return (self.period, self.start_sec)

    @property
    def end(self) -> tuple:
        return (self.period, self.end_sec)

    @property
    def first_event(self) -> Event:
        return self.events[0]

    def passes(self) -> list:
        return [e for e in self.events if e.team_id == self.team_id and e.event_type is EventType.PASS]


def _terminal_reason(ev: Event) -> EndReason | None:
    if ev.event_type is EventType.FOUL:
        return EndReason.FOUL
    if ev.event_type is EventType.OFFSIDE:
        return EndReason.OFFSIDE
    if ev.event_type is EventType.OTHERS and ev.sub_type == "Ball out of the field":
        return EndReason.BALL_OUT
    return None


class _Builder:
    def __init__(self, match_id):
        self.match_id = match_id
        self.phases = []
        self.owner = None
        self.members = []
        self.closed_reason = None

    def open(self, team_id):
        self.owner = team_id
        self.members = []

    def close(self, reason):
        if self.owner is None:
            return
        evs = tuple(self.members)
        self.phases.append(
            PossessionPhase(
                match_id=self.match_id,
                team_id=self.owner,
                period=evs[0].period,
                start_sec=evs[0].timestamp_sec,
                end_sec=evs[-1].timestamp_sec,
                events=evs,
                end_reason=reason,
            )
        )
        self.owner = None
        self.members = []

    def relabel_last(self, reason):
        last = self.phases[-1]
        self.phases[-1] = PossessionPhase(
            last.match_id, last.team_id, last.period, last.start_sec, last.end_sec, last.events, reason
        )


def check_ordered(events: Sequence[Event]) -> None:
    for i in range(1, len(events)):
        if events[i].key < events[i - 1].key:
            raise PreconditionError(
                f"events not ordered by (period, timestamp) at position {i}: "
                f"{events[i - 1].key} then {events[i].key}"
            )


def segment(
    match_events: Sequence[Event],
    gender: Gender | None = None,
    cooling_gap: float = DEFAULT_COOLING_GAP,
) -> list:
    """Split one match's ordered events into possession phases."""
    check_ordered(match_events)
    if not match_events:
        return []
    b = _Builder(match_events[0].match_id)
    annotated = any(e.sub_type == COOLING_LABEL for e in match_events)
    detect_cooling = annotated or gender is Gender.FEMALE
    pending = []  # duels awaiting attribution
    prev = None

    def flush_pending_into_current():
        if pending:
            if b.owner is None:
                b.open(pending[0].team_id)
            b.members.extend(pending)
            pending.clear()

    for ev in match_events:
        if prev is not None and ev.period != prev.period:
            flush_pending_into_current()
            b.close(EndReason.HALF_END)
        elif prev is not None and detect_cooling:
            is_break = ev.sub_type == COOLING_LABEL or (
                not annotated and ev.timestamp_sec - prev.timestamp_sec > cooling_gap
            )
            if is_break:
                flush_pending_into_current()
                if b.owner is not None:
                    b.close(EndReason.COOLING_BREAK)
                elif b.phases and b.phases[-1].period == ev.period:
                    b.relabel_last(EndReason.COOLING_BREAK)
        prev = ev

        if ev.sub_type == COOLING_LABEL:
            # the annotation itself belongs to no one; keep it with the phase it ended
            if b.phases and b.phases[-1].period == ev.period:
                last = b.phases[-1]
                b.phases[-1] = PossessionPhase(
                    last.match_id, last.team_id, last.period, last.start_sec,
                    ev.timestamp_sec, last.events + (ev,), EndReason.COOLING_BREAK,
                )
            else:
                b.open(ev.team_id)
                b.members.append(ev)
                b.close(EndReason.COOLING_BREAK)
            continue

        if ev.event_type is EventType.DUEL:
            pending.append(ev)
            continue

        reason = _terminal_reason(ev)
        if reason is not None:
            if b.owner is None:
                b.open(pending[0].team_id if pending else ev.team_id)
            b.members.extend(pending)
            pending.clear()
            b.members.append(ev)
            b.close(reason)
            continue

        if ev.event_type is EventType.FREE_KICK:
            # a restart always opens a fresh phase
            if b.owner is not None:
                if pending:
                    b.members.extend(pending)
                    pending.clear()
                b.close(EndReason.BALL_OUT if ev.sub_type in BALL_OUT_RESTARTS else EndReason.FOUL)
            b.open(ev.team_id)
            b.members.extend(pending)
            pending.clear()
            b.members.append(ev)
            continue

        if b.owner is None:
            b.open(ev.team_id)
        elif ev.team_id != b.owner:
            b.close(EndReason.TURNOVER)
            b.open(ev.team_id)
        b.members.extend(pending)
        pending.clear()
        b.members.append(ev)

    flush_pending_into_current()
    b.close(EndReason.HALF_END)
    return b.phases


def phase_record(phase: PossessionPhase) -> dict:
    return {
        "match_id": phase.match_id,
        "team_id": phase.team_id,
        "start": [phase.period.code, phase.start_sec],
        "end": [phase.period.code, phase.end_sec],
        "reason": phase.end_reason.value,
        "event_ids": [e.event_id for e in phase.events],
    }


def export_phases(phases, fh) -> None:
    for ph in phases:
        fh.write(json.dumps(phase_record(ph), sort_keys=True) + "\n")
