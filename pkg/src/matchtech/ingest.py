"""Event-stream ingestion.

Reads Wyscout-style soccer-logs records (``eventName``, ``eventSec``,
``playerId``, ``matchId``, ``teamId``, ``positions``, ``subEventName``,
``tags``) plus match and player metadata into an immutable
:class:`EventStore`.

Files may be either one JSON record per line or a single top-level JSON
array (the layout of the public release); the format is detected from the
first non-blank character.
"""
from __future__ import annotations

import enum
import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import (
    MissingInputError,
    NotFoundError,
    ParseError,
    ReferentialIntegrityError,
    ValidationError,
)

ACCURATE_TAG = 1801
NOT_ACCURATE_TAG = 1802
GOAL_TAG = 101


class EventType(enum.Enum):
    PASS = "Pass"
    SHOT = "Shot"
    FOUL = "Foul"
    DUEL = "Duel"
    FREE_KICK = "FreeKick"
    OFFSIDE = "Offside"
    OTHERS = "Others"


_EVENT_TYPE_BY_NAME = {
    "pass": EventType.PASS,
    "shot": EventType.SHOT,
    "foul": EventType.FOUL,
    "duel": EventType.DUEL,
    "free kick": EventType.FREE_KICK,
    "freekick": EventType.FREE_KICK,
    "offside": EventType.OFFSIDE,
}

# Event names that fall in the Others type but are not on-ball play
# (goalkeeper actions and referee interruptions); excluded from ``n_others``.
AUXILIARY_EVENT_NAMES = frozenset(
    {"Save attempt", "Goalkeeper leaving line", "Interruption"}
)


def event_type_for(name: str) -> EventType:
    return _EVENT_TYPE_BY_NAME.get(name.strip().lower(), EventType.OTHERS)


class Period(enum.IntEnum):
    FIRST_HALF = 1
    SECOND_HALF = 2
    EXTRA_FIRST = 3
    EXTRA_SECOND = 4
    PENALTIES = 5

    @property
    def code(self) -> str:
        return _PERIOD_CODES[self]

    @classmethod
    def parse(cls, value) -> "Period":
        if isinstance(value, Period):
            return value
        if isinstance(value, int):
            return cls(value)
        try:
            return _PERIOD_BY_CODE[str(value).strip().upper()]
        except KeyError:
            raise ValidationError(f"unknown match period {value!r}") from None


_PERIOD_CODES = {
    Period.FIRST_HALF: "1H",
    Period.SECOND_HALF: "2H",
    Period.EXTRA_FIRST: "E1",
    Period.EXTRA_SECOND: "E2",
    Period.PENALTIES: "P",
}
_PERIOD_BY_CODE = {v: k for k, v in _PERIOD_CODES.items()}
_PERIOD_BY_CODE.update(
    {
        "FIRSTHALF": Period.FIRST_HALF,
        "SECONDHALF": Period.SECOND_HALF,
        "EXTRAFIRST": Period.EXTRA_FIRST,
        "EXTRASECOND": Period.EXTRA_SECOND,
    }
)


class Gender(enum.Enum):
    MALE = "male"
    FEMALE = "female"

    @classmethod
    def parse(cls, value) -> "Gender":
        if isinstance(value, Gender):
            return value
        v = str(value).strip().lower()
        if v in ("m", "male", "men", "1"):
            return cls.MALE
        if v in ("f", "female", "women", "0"):
            return cls.FEMALE
        raise ValidationError(f"unknown gender {value!r}")


Position = tuple  # (x, y) in percent of the pitch


@dataclass(frozen=True, slots=True)
class Event:
    event_type: EventType
    sub_type: str
    match_id: int
    team_id: int
    player_id: int
    period: Period
    timestamp_sec: float
    origin: tuple
    destination: tuple | None = None
    tags: frozenset = frozenset()
    event_name: str = ""
    event_id: int | None = None

    @property
    def accurate(self) -> bool:
        return ACCURATE_TAG in self.tags

    @property
    def is_goal(self) -> bool:
        return GOAL_TAG in self.tags

    @property
    def is_shot_attempt(self) -> bool:
        """Shot in motion or free-kick shot (penalties included)."""
        if self.event_type is EventType.SHOT:
            return True
        return self.event_type is EventType.FREE_KICK and self.sub_type in (
            "Free kick shot",
            "Penalty",
        )

    @property
    def key(self) -> tuple:
        return (int(self.period), self.timestamp_sec)


@dataclass(frozen=True)
class Match:
    match_id: int
    team_ids: tuple
    gender: Gender = Gender.MALE
    goals: Mapping = field(default_factory=dict)
    competition: str = ""
    label: str = ""
    period_ends: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if len(self.team_ids) != 2 or self.team_ids[0] == self.team_ids[1]:
            raise ValidationError(
                f"match {self.match_id}: needs exactly two distinct teams, got {self.team_ids}"
            )
        for tid, g in self.goals.items():
            if g < 0:
                raise ValidationError(f"match {self.match_id}: negative goals for team {tid}")

    def opponent(self, team_id: int) -> int:
        a, b = self.team_ids
        if team_id == a:
            return b
        if team_id == b:
            return a
        raise NotFoundError(f"team {team_id} did not play match {self.match_id}")


@dataclass(frozen=True)
class Player:
    player_id: int
    team_id: int | None
    name: str = ""
    role: str | None = None


class EventStore:
    """Matches, players and per-match ordered events. Read-only after construction."""

    def __init__(self, matches, players, events_by_match, teams=None):
        self.matches = MappingProxyType(dict(matches))
        self.players = MappingProxyType(dict(players))
        self.teams = MappingProxyType(dict(teams or {}))
        self._events = MappingProxyType(
            {mid: tuple(evs) for mid, evs in events_by_match.items()}
        )

    def __repr__(self):
        return (
            f"EventStore({len(self.matches)} matches, "
            f"{self.n_events} events, {len(self.active_players())} players)"
        )

    @property
    def n_events(self) -> int:
        return sum(len(v) for v in self._events.values())

    def match_ids(self) -> list:
        return sorted(self.matches)

    def events_for(self, match_id, team_id=None) -> list:
        try:
            evs = self._events[match_id]
        except KeyError:
            raise NotFoundError(f"unknown match_id {match_id}") from None
        if team_id is None:
            return list(evs)
        return [e for e in evs if e.team_id == team_id]

    def all_events(self) -> Iterator[Event]:
        for mid in self.match_ids():
            yield from self._events.get(mid, ())

    def active_players(self) -> set:
        """Players generating at least one event (``playerId`` 0 means none)."""
        return {e.player_id for e in self.all_events() if e.player_id}

    def team_name(self, team_id) -> str:
        return self.teams.get(team_id, str(team_id))

    def team_by_name(self, name: str, gender: Gender | None = None):
        for tid, tname in self.teams.items():
            if tname.lower() == name.lower():
                if gender is None or any(
                    tid in m.team_ids and m.gender == gender for m in self.matches.values()
                ):
                    return tid
        raise NotFoundError(f"no team named {name!r}")


def events_for(store: EventStore, match_id, team_id=None) -> list:
    return store.events_for(match_id, team_id)


# ---------------------------------------------------------------- parsing


def _iter_records(text: str, source: str = "<input>") -> Iterator[tuple]:
    """Yield ``(location, record)`` pairs from JSON-lines or a JSON array.

    Lines starting with ``#`` are metadata comments and are skipped.
    """
    if "#" in text:
        # blank the comment lines so reported line numbers stay true
        text = "\n".join("" if ln.startswith("#") else ln for ln in text.split("\n"))
    stripped = text.lstrip()
    if not stripped:
        return
    if stripped[0] == "[":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(
                f"{source}: malformed JSON at line {exc.lineno}, offset {exc.pos}: {exc.msg}"
            ) from None
        for i, rec in enumerate(data):
            yield f"{source}: record {i}", rec
        return
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(
                f"{source}: malformed record at line {lineno}, column {exc.colno}: {exc.msg}"
            ) from None
        yield f"{source}: line {lineno}", rec


def _coord(value, name: str, where: str) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ParseError(f"{where}: {name} is not a number: {value!r}") from None
    if not 0.0 <= v <= 100.0:
        raise ValidationError(f"{where}: {name}={v:g} outside [0, 100]")
    return v


def _position(pos, name: str, where: str) -> tuple:
    if not isinstance(pos, Mapping) or "x" not in pos or "y" not in pos:
        raise ParseError(f"{where}: {name} must be an object with x and y")
    return (_coord(pos["x"], f"{name}.x", where), _coord(pos["y"], f"{name}.y", where))


def _tag_ids(tags, where: str) -> frozenset:
    out = []
    for t in tags or ():
        if isinstance(t, Mapping):
            t = t.get("id")
        try:
            out.append(int(t))
        except (TypeError, ValueError):
            raise ParseError(f"{where}: bad tag {t!r}") from None
    return frozenset(out)


_REQUIRED = ("eventName", "eventSec", "playerId", "matchId", "teamId", "positions")


def event_from_record(rec: Mapping, where: str = "<record>", index: int | None = None) -> Event:
    if not isinstance(rec, Mapping):
        raise ParseError(f"{where}: record is not an object")
    missing = [k for k in _REQUIRED if k not in rec]
    if missing:
        raise ParseError(f"{where}: missing field(s) {', '.join(missing)}")
    positions = rec["positions"]
    if not isinstance(positions, list) or not positions:
        raise ParseError(f"{where}: positions must be a non-empty list")
    origin = _position(positions[0], "origin", where)
    destination = _position(positions[1], "destination", where) if len(positions) > 1 else None
    try:
        sec = float(rec["eventSec"])
        match_id = int(rec["matchId"])
        team_id = int(rec["teamId"])
        player_id = int(rec["playerId"])
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{where}: {exc}") from None
    if sec < 0:
        raise ValidationError(f"{where}: eventSec={sec} is negative")
    name = str(rec["eventName"])
    eid = rec.get("id", index)
    return Event(
        event_type=event_type_for(name),
        sub_type=str(rec.get("subEventName") or ""),
        match_id=match_id,
        team_id=team_id,
        player_id=player_id,
        period=Period.parse(rec.get("matchPeriod", "1H")),
        timestamp_sec=sec,
        origin=origin,
        destination=destination,
        tags=_tag_ids(rec.get("tags"), where),
        event_name=name,
        event_id=None if eid is None else int(eid),
    )


def parse_event_stream(raw, source: str = "<input>") -> list:
    """Parse event records (bytes or text) into :class:`Event` objects, in input order."""
    if isinstance(raw, (bytes, bytearray)):
        raw = raw.decode("utf-8")
    return [
        event_from_record(rec, where, index=i)
        for i, (where, rec) in enumerate(_iter_records(raw, source))
    ]


def event_to_record(ev: Event) -> dict:
    positions = [{"x": ev.origin[0], "y": ev.origin[1]}]
    if ev.destination is not None:
        positions.append({"x": ev.destination[0], "y": ev.destination[1]})
    rec = {
        "eventName": ev.event_name or ev.event_type.value,
        "eventSec": ev.timestamp_sec,
        "playerId": ev.player_id,
        "matchId": ev.match_id,
        "teamId": ev.team_id,
        "matchPeriod": ev.period.code,
        "positions": positions,
        "subEventName": ev.sub_type,
        "tags": [{"id": t} for t in sorted(ev.tags)],
    }
    if ev.event_id is not None:
        rec["id"] = ev.event_id
    return rec


def serialize_events(events: Iterable[Event]) -> str:
    return "".join(json.dumps(event_to_record(e), sort_keys=True) + "\n" for e in events)


_LABEL_RE = re.compile(r"^(?P<a>.+?)\s+-\s+(?P<b>.+?),\s*(?P<ga>\d+)\s*-\s*(?P<gb>\d+)")


def match_from_record(rec: Mapping, where: str, default_gender=Gender.MALE) -> tuple:
    """Return ``(Match, {team_id: name})`` for one match record."""
    try:
        mid = int(rec.get("wyId", rec.get("matchId")))
    except (TypeError, ValueError):
        raise ParseError(f"{where}: match record lacks wyId/matchId") from None
    names = {}
    if "teamsData" in rec:
        td = rec["teamsData"]
        # home side first when sides are given
        items = sorted(td.items(), key=lambda kv: 0 if kv[1].get("side") == "home" else 1)
        team_ids = tuple(int(k) for k, _ in items)
        goals = {int(k): int(v.get("score", 0)) for k, v in items}
    else:
        team_ids = tuple(int(t) for t in rec.get("teamIds", ()))
        goals = {int(k): int(v) for k, v in (rec.get("goals") or {}).items()}
    label = str(rec.get("label", ""))
    m = _LABEL_RE.match(label)
    if m and len(team_ids) == 2:
        # label order is home - away and scores follow the same order
        by_score = {}
        for side, tid in zip(("a", "b"), team_ids):
            by_score[tid] = m.group(side)
        names = {tid: nm.strip() for tid, nm in by_score.items()}
    period_ends = {}
    for k, v in (rec.get("periodEnds") or {}).items():
        period_ends[Period.parse(k)] = float(v)
    gender = Gender.parse(rec["gender"]) if "gender" in rec else Gender.parse(default_gender)
    match = Match(
        match_id=mid,
        team_ids=team_ids,
        gender=gender,
        goals=MappingProxyType(goals),
        competition=str(rec.get("competition", rec.get("competitionId", ""))),
        label=label,
        period_ends=MappingProxyType(period_ends),
    )
    return match, names


def _null_int(v):
    if v in (None, "", "null"):
        return None
    return int(v)


def player_from_record(rec: Mapping, where: str) -> Player:
    try:
        pid = int(rec.get("wyId", rec.get("playerId")))
    except (TypeError, ValueError):
        raise ParseError(f"{where}: player record lacks wyId/playerId") from None
    team = _null_int(rec.get("currentNationalTeamId", rec.get("teamId")))
    if team is None:
        team = _null_int(rec.get("currentTeamId"))
    role = rec.get("role")
    if isinstance(role, Mapping):
        role = role.get("code2") or role.get("name")
    name = rec.get("shortName") or rec.get("name") or ""
    return Player(player_id=pid, team_id=team, name=str(name), role=role or None)


def _read_text(path) -> str:
    p = Path(path)
    if not p.exists():
        raise MissingInputError(f"input file not found: {p}")
    return p.read_text(encoding="utf-8")


def _records(path) -> Iterator[tuple]:
    return _iter_records(_read_text(path), str(path))


def load_dataset(event_paths, match_path, player_path, team_path=None, gender=Gender.MALE) -> EventStore:
    """Load events, matches and players; check cross references; order events."""
    if isinstance(event_paths, (str, os.PathLike)):
        event_paths = [event_paths]
    matches, team_names = {}, {}
    for where, rec in _records(match_path):
        m, names = match_from_record(rec, where, gender)
        if m.match_id in matches:
            raise ValidationError(f"{where}: duplicate match {m.match_id}")
        matches[m.match_id] = m
        team_names.update(names)
    if team_path is not None:
        for where, rec in _records(team_path):
            tid = int(rec.get("wyId", rec.get("teamId")))
            team_names[tid] = str(rec.get("name", tid))
    players = {}
    for where, rec in _records(player_path):
        p = player_from_record(rec, where)
        if p.player_id in players:
            raise ValidationError(f"{where}: duplicate player_id {p.player_id}")
        players[p.player_id] = p
    events = []
    for path in event_paths:
        text = _read_text(path)
        events.extend(parse_event_stream(text, str(path)))
    return build_store(matches, players, events, team_names)


def build_store(matches: Mapping, players: Mapping, events: Sequence[Event], teams=None) -> EventStore:
    bad = []
    for i, e in enumerate(events):
        m = matches.get(e.match_id)
        if m is None:
            bad.append(f"event {e.event_id if e.event_id is not None else i}: unknown match_id {e.match_id}")
            continue
        if e.team_id not in m.team_ids:
            bad.append(f"event {e.event_id}: team_id {e.team_id} not in match {e.match_id}")
        if e.player_id and e.player_id not in players:
            bad.append(f"event {e.event_id}: unknown player_id {e.player_id}")
    if bad:
        head = "; ".join(bad[:10])
        more = f" (+{len(bad) - 10} more)" if len(bad) > 10 else ""
        raise ReferentialIntegrityError(f"dangling references: {head}{more}", bad)
    by_match = {mid: [] for mid in matches}
    for e in events:
        by_match[e.match_id].append(e)
    for mid, evs in by_match.items():
        # sort is stable, so equal keys keep file order
        evs.sort(key=lambda e: (int(e.period), e.timestamp_sec))
    matches = {mid: _with_period_ends(m, by_match[mid]) for mid, m in matches.items()}
    # players without a roster team inherit the team they played for
    players = dict(players)
    for e in events:
        p = players.get(e.player_id)
        if p is not None and p.team_id is None:
            players[e.player_id] = Player(p.player_id, e.team_id, p.name, p.role)
    return EventStore(matches, players, by_match, teams)


def _with_period_ends(match: Match, events) -> Match:
    ends = dict(match.period_ends)
    for e in events:
        if e.period not in match.period_ends:
            ends[e.period] = max(ends.get(e.period, 0.0), e.timestamp_sec)
    if ends == dict(match.period_ends):
        return match
    return Match(
        match.match_id,
        match.team_ids,
        match.gender,
        match.goals,
        match.competition,
        match.label,
        MappingProxyType(ends),
    )


# ---------------------------------------------------------------- store export


def match_to_record(m: Match, names: Mapping | None = None) -> dict:
    names = names or {}
    return {
        "matchId": m.match_id,
        "teamIds": list(m.team_ids),
        "teamNames": [names.get(t, "") for t in m.team_ids],
        "gender": m.gender.value,
        "goals": {str(k): v for k, v in sorted(m.goals.items())},
        "competition": m.competition,
        "label": m.label,
        "periodEnds": {p.code: v for p, v in sorted(m.period_ends.items())},
    }


def write_store(store: EventStore, directory, header: str = "") -> dict:
    """Write the normalized store as four line-delimited files; return their paths.

    ``header`` (a ``#`` comment line) is written at the top of every file.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = {k: d / f"{k}.jsonl" for k in ("events", "matches", "players", "teams")}
    for path in paths.values():
        path.write_text(header, encoding="utf-8")
    with open(paths["events"], "a", encoding="utf-8") as f:
        for mid in store.match_ids():
            f.write(serialize_events(store.events_for(mid)))
    with open(paths["matches"], "a", encoding="utf-8") as f:
        for mid in store.match_ids():
            f.write(json.dumps(match_to_record(store.matches[mid], store.teams), sort_keys=True) + "\n")
    with open(paths["players"], "a", encoding="utf-8") as f:
        for pid in sorted(store.players):
            p = store.players[pid]
            rec = {"playerId": p.player_id, "teamId": p.team_id, "name": p.name, "role": p.role}
            f.write(json.dumps(rec, sort_keys=True) + "\n")
    with open(paths["teams"], "a", encoding="utf-8") as f:
        for tid in sorted(store.teams):
            f.write(json.dumps({"teamId": tid, "name": store.teams[tid]}, sort_keys=True) + "\n")
    return paths


def read_store(directory) -> EventStore:
    d = Path(directory)
    matches, teams = {}, {}
    for where, rec in _records(d / "matches.jsonl"):
        m, _ = match_from_record(rec, where)
        matches[m.match_id] = m
        for tid, nm in zip(rec.get("teamIds", ()), rec.get("teamNames", ())):
            if nm:
                teams[int(tid)] = nm
    tpath = d / "teams.jsonl"
    if tpath.exists():
        for _, rec in _records(tpath):
            teams[int(rec["teamId"])] = rec["name"]
    players = {}
    for where, rec in _records(d / "players.jsonl"):
        p = player_from_record(rec, where)
        players[p.player_id] = p
    events = parse_event_stream(_read_text(d / "events.jsonl"), str(d / "events.jsonl"))
    return build_store(matches, players, events, teams)


def find_dataset_files(directory) -> dict:
    """Locate event/match/player/team files in a dataset directory.

    Accepts the public release's names (``events_World_Cup.json``,
    ``matches_World_Cup.json``, ``players.json``, ``teams.json``) or the
    normalized store names written by :func:`write_store`.
    """
    d = Path(directory)
    if not d.is_dir():
        raise MissingInputError(f"dataset directory not found: {d}")
    files = sorted(p for p in d.iterdir() if p.suffix in (".json", ".jsonl"))

    def pick(prefix, required=True):
        hits = [p for p in files if p.name.lower().startswith(prefix)]
        if not hits and required:
            raise MissingInputError(f"no {prefix}*.json[l] file in {d}")
        return hits

    out = {
        "event_paths": pick("events"),
        "match_path": pick("matches")[0],
        "player_path": pick("players")[0],
    }
    teams = pick("teams", required=False)
    out["team_path"] = teams[0] if teams else None
    return out


def load_directory(directory, gender=Gender.MALE) -> EventStore:
    return load_dataset(gender=gender, **find_dataset_files(directory))
