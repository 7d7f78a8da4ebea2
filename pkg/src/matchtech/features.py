"""Per team-match technical features and the 19-variable performance vector."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, fields
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DependencyError, EventTypeMismatch, ParameterError, UndefinedValueError
from .ingest import AUXILIARY_EVENT_NAMES, Event, EventStore, EventType, Gender
from .possession import EndReason, PossessionPhase, segment
from .stats import normal_cdf

log = logging.getLogger(__name__)

PITCH_LENGTH_M = 110.0
PITCH_WIDTH_M = 65.0
GOAL_CENTER = (100.0, 50.0)

# restarts that count toward the interruption time
STOP_RESTARTS = frozenset(
    {"Free Kick", "Free kick cross", "Free kick shot", "Corner", "Throw in", "Penalty"}
)

FEATURE_NAMES = (
    "n_events",
    "n_shots",
    "n_fouls",
    "n_passes",
    "n_free_kicks",
    "n_duels",
    "n_offside",
    "n_others",
    "n_accurate_passes",
    "acc_p",
    "shot_d_mean",
    "pass_l_mean",
    "pass_v",
    "rec_t",
    "stop_t",
    "h_ind",
    "fc",
    "pr_avg",
    "pr_std",
)
COUNT_NAMES = FEATURE_NAMES[:9]


def to_meters(pos) -> tuple:
    return (pos[0] * PITCH_LENGTH_M / 100.0, pos[1] * PITCH_WIDTH_M / 100.0)


def distance_m(a, b) -> float:
    return math.hypot((a[0] - b[0]) * PITCH_LENGTH_M / 100.0, (a[1] - b[1]) * PITCH_WIDTH_M / 100.0)


def _mean(values, what) -> float:
    if not values:
        raise UndefinedValueError(f"{what}: no qualifying values")
    return math.fsum(values) / len(values)


# ---------------------------------------------------------------- counts


@dataclass(frozen=True)
class EventCounts:
    n_events: int = 0
    n_shots: int = 0
    n_fouls: int = 0
    n_passes: int = 0
    n_free_kicks: int = 0
    n_duels: int = 0
    n_offside: int = 0
    n_others: int = 0
    n_accurate_passes: int = 0


_COUNT_FIELD = {
    EventType.SHOT: "n_shots",
    EventType.FOUL: "n_fouls",
    EventType.PASS: "n_passes",
    EventType.FREE_KICK: "n_free_kicks",
    EventType.DUEL: "n_duels",
    EventType.OFFSIDE: "n_offside",
}


def count_events(events: Iterable[Event]) -> EventCounts:
    c = dict.fromkeys(COUNT_NAMES, 0)
    for e in events:
        c["n_events"] += 1
        name = _COUNT_FIELD.get(e.event_type)
        if name is not None:
            c[name] += 1
        elif e.event_name not in AUXILIARY_EVENT_NAMES:
            c["n_others"] += 1
        if e.event_type is EventType.PASS and e.accurate:
            c["n_accurate_passes"] += 1
    return EventCounts(**c)


def pass_accuracy(events: Iterable[Event]) -> float:
    passes = [e for e in events if e.event_type is EventType.PASS]
    if not passes:
        raise UndefinedValueError("pass accuracy undefined without passes")
    return sum(e.accurate for e in passes) / len(passes)


# ---------------------------------------------------------------- timing


def infer_receivers(team_events: Sequence[Event]) -> list:
    """Receiver of each accurate pass: the next player of the same team to act.

    Returns a list aligned with ``team_events``; entries are ``None`` for
    non-passes, inaccurate passes and passes with no identifiable receiver.
    """
    out = [None] * len(team_events)
    for i, e in enumerate(team_events):
        if e.event_type is not EventType.PASS or not e.accurate:
            continue
        for nxt in team_events[i + 1 :]:
            if nxt.period != e.period:
                break
            if nxt.player_id == 0:
                continue
            if nxt.player_id != e.player_id:
                out[i] = nxt.player_id
            break
    return out


def pass_velocity(team_events: Sequence[Event]) -> float:
    """Mean time between a pass and the next pass when the receiver makes it."""
    receivers = infer_receivers(team_events)
    pidx = [i for i, e in enumerate(team_events) if e.event_type is EventType.PASS]
    gaps = []
    for i, k in zip(pidx, pidx[1:]):
        p1, p2 = team_events[i], team_events[k]
        if p1.period == p2.period and receivers[i] is not None and receivers[i] == p2.player_id:
            gaps.append(p2.timestamp_sec - p1.timestamp_sec)
    return _mean(gaps, "pass velocity (no chained pass pair)")


def recovery_time(phases: Sequence[PossessionPhase], team_id) -> float:
    """Mean time from a team's last pass before losing the ball to its first pass after regaining it."""
    gaps = []
    last_pass = None
    lost = False
    for ph in phases:
        if ph.team_id != team_id:
            if last_pass is not None:
                lost = True
            continue
        passes = ph.passes()
        if not passes:
            continue
        if lost and last_pass.period == passes[0].period:
            gaps.append(passes[0].timestamp_sec - last_pass.timestamp_sec)
        last_pass = passes[-1]
        lost = False
    return _mean(gaps, "recovery time (no regained possession)")


def stop_time(phases: Sequence[PossessionPhase], team_id=None) -> float:
    """Mean stoppage before a restart (free kick, corner, throw-in) within a period.

    With ``team_id`` only restarts taken by that team count. Gaps following
    a cooling break are excluded.
    """
    gaps = []
    for prev, nxt in zip(phases, phases[1:]):
        if prev.period != nxt.period or prev.end_reason is EndReason.COOLING_BREAK:
            continue
        first = nxt.first_event
        if first.event_type is not EventType.FREE_KICK or first.sub_type not in STOP_RESTARTS:
            continue
        if team_id is not None and first.team_id != team_id:
            continue
        gaps.append(nxt.start_sec - prev.end_sec)
    return _mean(gaps, "stop time (no restart)")


def pass_length(events: Iterable[Event]) -> float:
    lengths = [
        distance_m(e.origin, e.destination)
        for e in events
        if e.event_type is EventType.PASS and e.destination is not None
    ]
    return _mean(lengths, "pass length (no pass with destination)")


def shot_velocity(events: Sequence[Event]) -> float:
    shots = [e for e in events if e.event_type is EventType.SHOT]
    gaps = [
        b.timestamp_sec - a.timestamp_sec
        for a, b in zip(shots, shots[1:])
        if a.period == b.period
    ]
    if len(shots) < 2:
        raise UndefinedValueError("shot velocity needs >= 2 shots")
    return _mean(gaps, "shot velocity (no two shots in one period)")


def shot_distance(event: Event) -> float:
    if not event.is_shot_attempt:
        raise EventTypeMismatch(f"not a shot: {event.event_name}/{event.sub_type}")
    return distance_m(event.origin, GOAL_CENTER)


def shot_distance_mean(events: Iterable[Event]) -> float:
    return _mean([shot_distance(e) for e in events if e.is_shot_attempt], "shot distance (no shots)")


# ---------------------------------------------------------------- zones


@dataclass(frozen=True)
class ZonePartition:
    """Three equal bands over the shooting range; ``bands[0]`` is Z1 (nearest goal)."""

    bands: tuple  # ((x_min, x_max), ...) for Z1, Z2, Z3
    counts: tuple
    shares: tuple

    @property
    def x_min(self) -> float:
        return self.bands[2][0]

    @property
    def x_max(self) -> float:
        return self.bands[0][1]

    def band_of(self, x: float) -> int:
        lo = self.x_min
        width = (self.x_max - lo) / 3.0
        k = int((x - lo) // width) if x > lo else 0
        return 2 - min(max(k, 0), 2)

    def edges_m_from_goal(self) -> tuple:
        """Band edges as distances from the goal line in meters, nearest first."""
        xs = (self.x_max, self.bands[0][0], self.bands[1][0], self.x_min)
        return tuple((100.0 - x) * PITCH_LENGTH_M / 100.0 for x in xs)


def _band_counts(bands_lo, width, xs) -> list:
    counts = [0, 0, 0]
    for x in xs:
        k = int((x - bands_lo) // width) if x > bands_lo else 0
        counts[2 - min(max(k, 0), 2)] += 1
    return counts


def zone_partition(shot_events: Iterable[Event]) -> ZonePartition:
    xs = [e.origin[0] for e in shot_events if e.is_shot_attempt]
    if not xs:
        raise UndefinedValueError("zone partition needs at least one shot")
    lo, hi = min(xs), max(xs)
    if hi <= lo:
        raise UndefinedValueError(f"zone partition degenerate: all shots at x={lo}")
    w = (hi - lo) / 3.0
    bands = ((lo + 2 * w, hi), (lo + w, lo + 2 * w), (lo, lo + w))
    counts = _band_counts(lo, w, xs)
    n = sum(counts)
    return ZonePartition(bands, tuple(counts), tuple(c / n for c in counts))


def zone_counts(partition: ZonePartition, team_events: Iterable[Event]) -> tuple:
    xs = [e.origin[0] for e in team_events if e.is_shot_attempt]
    w = (partition.x_max - partition.x_min) / 3.0
    return tuple(_band_counts(partition.x_min, w, xs))


def zone_shares(partition: ZonePartition, team_events: Iterable[Event]) -> tuple:
    counts = zone_counts(partition, team_events)
    n = sum(counts)
    if n == 0:
        raise UndefinedValueError("zone shares undefined without shots")
    return tuple(c / n for c in counts)


# ---------------------------------------------------------------- intensity


@dataclass(frozen=True)
class IntensityGrid:
    values: np.ndarray  # shape (ny, nx), events per square meter
    x_edges: np.ndarray  # meters
    y_edges: np.ndarray
    bandwidth: float

    @property
    def cell_area(self) -> float:
        return float((self.x_edges[1] - self.x_edges[0]) * (self.y_edges[1] - self.y_edges[0]))

    def integral(self) -> float:
        return float(self.values.sum() * self.cell_area)

    def argmax_cell(self) -> tuple:
        iy, ix = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return int(ix), int(iy)

    def cell_of(self, pos) -> tuple:
        xm, ym = to_meters(pos)
        nx, ny = len(self.x_edges) - 1, len(self.y_edges) - 1
        ix = min(int(xm / PITCH_LENGTH_M * nx), nx - 1)
        iy = min(int(ym / PITCH_WIDTH_M * ny), ny - 1)
        return ix, iy


def _interval_mass(c, h, upper):
    return normal_cdf((upper - c) / h) - normal_cdf(-c / h)


def kde_intensity(points, bandwidth: float, grid=(110, 65)) -> IntensityGrid:
    """Edge-corrected Gaussian kernel estimate of the first-order intensity.

    Each point's kernel is rescaled by its mass inside the pitch, so the
    intensity integrates to the number of points over the pitch.
    """
    pts = [to_meters(p) for p in points]
    if not pts:
        raise UndefinedValueError("intensity estimate needs at least one point")
    if bandwidth <= 0:
        raise ParameterError("bandwidth must be positive")
    nx, ny = grid
    x_edges = np.linspace(0.0, PITCH_LENGTH_M, nx + 1)
    y_edges = np.linspace(0.0, PITCH_WIDTH_M, ny + 1)
    xc = 0.5 * (x_edges[:-1] + x_edges[1:])
    yc = 0.5 * (y_edges[:-1] + y_edges[1:])
    h = float(bandwidth)
    norm = 1.0 / (2.0 * math.pi * h * h)
    values = np.zeros((ny, nx))
    for px, py in pts:
        mass = _interval_mass(px, h, PITCH_LENGTH_M) * _interval_mass(py, h, PITCH_WIDTH_M)
        kx = np.exp(-0.5 * ((xc - px) / h) ** 2)
        ky = np.exp(-0.5 * ((yc - py) / h) ** 2)
        values += np.outer(ky, kx) * (norm / mass)
    return IntensityGrid(values, x_edges, y_edges, h)


# ---------------------------------------------------------------- assembly


@dataclass
class TeamMatchFeatures:
    match_id: int
    team_id: int
    gender: Gender
    n_events: int = 0
    n_shots: int = 0
    n_fouls: int = 0
    n_passes: int = 0
    n_free_kicks: int = 0
    n_duels: int = 0
    n_offside: int = 0
    n_others: int = 0
    n_accurate_passes: int = 0
    acc_p: float | None = None
    shot_d_mean: float | None = None
    pass_l_mean: float | None = None
    pass_v: float | None = None
    rec_t: float | None = None
    stop_t: float | None = None
    h_ind: float | None = None
    fc: float | None = None
    pr_avg: float | None = None
    pr_std: float | None = None
    team_name: str = ""

    def vector(self) -> list:
        return [getattr(self, n) for n in FEATURE_NAMES]

    def __getitem__(self, name):
        return getattr(self, name)


def _maybe(fn, *args):
    try:
        return fn(*args)
    except UndefinedValueError:
        return None


def team_match_features(
    match_events: Sequence[Event],
    phases: Sequence[PossessionPhase],
    team_id,
    match_id,
    gender: Gender,
) -> TeamMatchFeatures:
    """Event-derived fields only; network and rating fields stay missing."""
    team_events = [e for e in match_events if e.team_id == team_id]
    counts = count_events(team_events)
    return TeamMatchFeatures(
        match_id=match_id,
        team_id=team_id,
        gender=gender,
        **{n: getattr(counts, n) for n in COUNT_NAMES},
        acc_p=_maybe(pass_accuracy, team_events),
        shot_d_mean=_maybe(shot_distance_mean, team_events),
        pass_l_mean=_maybe(pass_length, team_events),
        pass_v=_maybe(pass_velocity, team_events),
        rec_t=_maybe(recovery_time, phases, team_id),
        stop_t=_maybe(stop_time, phases, team_id),
    )


def assemble_features(
    store: EventStore,
    network_summaries: Mapping,
    pr_stats: Mapping,
    phases_by_match: Mapping | None = None,
) -> list:
    """One complete performance vector per team per match, in match-id order.

    ``network_summaries`` maps ``(match_id, team_id)`` to objects with ``h``
    and ``fc_avg`` (``None`` when undefined); ``pr_stats`` maps the same key
    to ``(pr_avg, pr_std)`` pairs or ``None``.
    """
    rows = []
    for mid in store.match_ids():
        match = store.matches[mid]
        evs = store.events_for(mid)
        phases = (phases_by_match or {}).get(mid)
        if phases is None:
            phases = segment(evs, gender=match.gender)
        for tid in match.team_ids:
            key = (mid, tid)
            if key not in network_summaries:
                raise DependencyError(f"netmetrics summary missing for match {mid}, team {tid}")
            if key not in pr_stats:
                raise DependencyError(f"playerank statistics missing for match {mid}, team {tid}")
            row = team_match_features(evs, phases, tid, mid, match.gender)
            net = network_summaries[key]
            if net is not None:
                row.h_ind, row.fc = net.h, net.fc_avg
            pr = pr_stats[key]
            if pr is not None:
                row.pr_avg, row.pr_std = pr
            row.team_name = store.team_name(tid)
            rows.append(row)
    return rows


def match_level_rows(rows: Sequence[TeamMatchFeatures]) -> list:
    """Per-match aggregation: counts summed over both teams, other features averaged."""
    by_match = {}
    for r in rows:
        by_match.setdefault(r.match_id, []).append(r)
    out = []
    for mid in sorted(by_match):
        group = by_match[mid]
        rec = {"match_id": mid, "gender": group[0].gender}
        for n in FEATURE_NAMES:
            vals = [getattr(r, n) for r in group if getattr(r, n) is not None]
            if n in COUNT_NAMES:
                rec[n] = sum(vals)
            else:
                rec[n] = math.fsum(vals) / len(vals) if vals else None
        out.append(rec)
    return out


def impute_missing(rows: Sequence[TeamMatchFeatures]) -> int:
    """Replace missing feature values with the column mean of ``rows``; returns how many."""
    filled = 0
    for n in FEATURE_NAMES:
        vals = [getattr(r, n) for r in rows if getattr(r, n) is not None]
        if not vals:
            continue
        mean = math.fsum(vals) / len(vals)
        for r in rows:
            if getattr(r, n) is None:
                setattr(r, n, mean)
                filled += 1
    if filled:
        log.info("imputed %d missing feature values with column means", filled)
    return filled


# ---------------------------------------------------------------- export

CSV_COLUMNS = ("match_id", "team_id", "team_name", "gender") + FEATURE_NAMES


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, Gender):
        return v.value
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_features_csv(rows, fh, columns=CSV_COLUMNS) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r[c] if isinstance(r, Mapping) else getattr(r, c, "")) for c in columns])


def _skip_comments(fh):
    for line in fh:
        if not line.startswith("#"):
            yield line


def read_features_csv(fh) -> list:
    rows = []
    names = {f.name for f in fields(TeamMatchFeatures)}
    for rec in csv.DictReader(_skip_comments(fh)):
        kw = {}
        for k, v in rec.items():
            if k not in names:
                continue
            if k == "gender":
                kw[k] = Gender.parse(v)
            elif k == "team_name":
                kw[k] = v
            elif v == "":
                kw[k] = None
            elif k in COUNT_NAMES or k in ("match_id", "team_id"):
                kw[k] = int(float(v))
            else:
                kw[k] = float(v)
        rows.append(TeamMatchFeatures(**kw))
    return rows
