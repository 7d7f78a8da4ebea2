"""Shared fixtures: hand-built events, stores and small synthetic corpora."""
from __future__ import annotations

import itertools

import pytest

from matchtech.ingest import Event, EventStore, EventType, Gender, Match, Period, Player, build_store
from matchtech.ingest import ACCURATE_TAG, NOT_ACCURATE_TAG

_ids = itertools.count(1)

_NAMES = {
    EventType.PASS: "Pass",
    EventType.SHOT: "Shot",
    EventType.FOUL: "Foul",
    EventType.DUEL: "Duel",
    EventType.FREE_KICK: "Free Kick",
    EventType.OFFSIDE: "Offside",
    EventType.OTHERS: "Others on the ball",
}


def ev(kind, team, t, player=None, *, period=1, sub="", origin=(50.0, 50.0), dest=None,
       accurate=None, match=1, tags=(), name=None, eid=None):
    """Build an event; ``accurate`` adds the accuracy tag for passes."""
    tagset = set(tags)
    if accurate is True:
        tagset.add(ACCURATE_TAG)
    elif accurate is False:
        tagset.add(NOT_ACCURATE_TAG)
    if kind is EventType.PASS and dest is None:
        dest = (origin[0] + 5.0, origin[1])
    return Event(
        event_type=kind,
        sub_type=sub,
        match_id=match,
        team_id=team,
        player_id=player if player is not None else team * 10 + 1,
        period=Period(period),
        timestamp_sec=float(t),
        origin=tuple(origin),
        destination=None if dest is None else tuple(dest),
        tags=frozenset(tagset),
        event_name=name or _NAMES[kind],
        event_id=eid if eid is not None else next(_ids),
    )


def store_of(events, gender=Gender.MALE, teams=(1, 2), goals=None, match_ids=None) -> EventStore:
    """Wrap events in a store, creating the matches and players they reference."""
    mids = sorted({e.match_id for e in events} | set(match_ids or ()))
    matches = {m: Match(m, tuple(teams), gender, goals or {teams[0]: 1, teams[1]: 0}) for m in mids}
    players = {e.player_id: Player(e.player_id, e.team_id) for e in events if e.player_id}
    return build_store(matches, players, events, {teams[0]: "Alpha", teams[1]: "Beta"})


@pytest.fixture(scope="session")
def small_corpus():
    """Two genders, four simulated matches each, as one store."""
    from matchtech import synthetic
    from matchtech.cli import merge_stores
    from matchtech.ingest import load_directory
    import tempfile

    with tempfile.TemporaryDirectory() as d:
        stores = []
        for g, base in ((Gender.MALE, 5000), (Gender.FEMALE, 7000)):
            ds = synthetic.generate_event_dataset(4, g, seed=base, duration=0.5, match_id_base=base,
                                                  team_id_base=base // 10, player_id_base=base * 10)
            synthetic.write_event_dataset(ds, f"{d}/{g.value}")
            stores.append(load_directory(f"{d}/{g.value}", g))
        return merge_stores(stores)


# ---------------------------------------------------------------- acceptance report

ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """``record(n, ok, detail)`` stores one result line per acceptance criterion."""

    def record(n: int, ok: bool, detail: str) -> None:
        ACCEPTANCE[n] = (bool(ok), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
