"""Seeded synthetic data.

Two generators live here:

* :func:`synthetic_population` draws team-match performance vectors whose
  per-match moments equal the published per-match means and standard
  deviations. Count variables are drawn per match and split between the two
  teams; the other variables are drawn per team-match.
* :func:`generate_event_dataset` simulates raw event streams in the public
  release's record format, for exercising the full pipeline end to end.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .features import COUNT_NAMES, FEATURE_NAMES, TeamMatchFeatures
from .ingest import ACCURATE_TAG, GOAL_TAG, NOT_ACCURATE_TAG, Gender

# per-match (mean, std) as published, in FEATURE_NAMES order
TABLE2 = {
    Gender.MALE: {
        "n_events": (1549.62, 99.55),
        "n_shots": (21.52, 5.72),
        "n_fouls": (26.94, 6.41),
        "n_passes": (790.86, 98.76),
        "n_free_kicks": (90.05, 10.62),
        "n_duels": (394.52, 62.25),
        "n_offside": (2.91, 1.86),
        "n_others": (141.19, 24.65),
        "n_accurate_passes": (375.67, 138.30),
        "acc_p": (0.84, 0.05),
        "shot_d_mean": (19.99, 1.74),
        "pass_l_mean": (20.32, 1.70),
        "pass_v": (2.99, 0.17),
        "rec_t": (27.32, 10.14),
        "stop_t": (23.27, 2.99),
        "h_ind": (1.32, 0.36),
        "fc": (0.059, 0.003),
        "pr_avg": (0.01, 0.01),
        "pr_std": (0.05, 0.03),
    },
    Gender.FEMALE: {
        "n_events": (1522.62, 93.82),
        "n_shots": (21.98, 6.03),
        "n_fouls": (19.95, 5.94),
        "n_passes": (861.67, 101.25),
        "n_free_kicks": (102.70, 11.85),
        "n_duels": (419.91, 53.77),
        "n_offside": (3.88, 2.91),
        "n_others": (149.98, 26.08),
        "n_accurate_passes": (311.66, 127.17),
        "acc_p": (0.76, 0.08),
        "shot_d_mean": (18.39, 1.90),
        "pass_l_mean": (19.53, 1.53),
        "pass_v": (2.83, 0.12),
        "rec_t": (19.58, 10.37),
        "stop_t": (18.92, 3.38),
        "h_ind": (1.21, 0.27),
        "fc": (0.058, 0.004),
        "pr_avg": (-0.01, 0.01),
        "pr_std": (0.05, 0.03),
    },
}

# (teams, groups, knockout rounds, third-place match): the full men's
# tournament and the women's matches present in the event data
SCHEDULES = {
    Gender.MALE: (32, 8, (8, 4, 2, 1), True),
    Gender.FEMALE: (24, 6, (8,), False),
}

LOWER_BOUNDS = {"acc_p": 0.0, "h_ind": 1e-3, "fc": 0.0, "pr_std": 0.0, "rec_t": 0.0, "stop_t": 0.0}
UPPER_BOUNDS = {"acc_p": 1.0}


def schedule(gender: Gender, seed: int = 0) -> list:
    """``(match_index, team_a, team_b)``: round-robin groups of four, then knockout rounds."""
    n_teams, n_groups, rounds, third_place = SCHEDULES[gender]
    rng = np.random.default_rng(seed)
    per_group = n_teams // n_groups
    groups = [list(range(g * per_group, (g + 1) * per_group)) for g in range(n_groups)]
    games = []
    for grp in groups:
        for i in range(per_group):
            for j in range(i + 1, per_group):
                games.append((grp[i], grp[j]))
    # random group standings; winners and runners-up advance, then the best
    # third-placed teams until the first knockout round is full
    ranked = [[int(t) for t in rng.permutation(grp)] for grp in groups]
    alive = [g[0] for g in ranked] + [g[1] for g in ranked] + [g[2] for g in ranked]
    alive = alive[: 2 * rounds[0]]
    semi_losers = []
    for n_games in rounds:
        if n_games == 1 and third_place:
            games.append(tuple(semi_losers))
        winners, losers = [], []
        for k in range(n_games):
            a, b = alive[2 * k], alive[2 * k + 1]
            games.append((a, b))
            w = a if rng.random() < 0.5 else b
            winners.append(w)
            losers.append(b if w == a else a)
        if n_games == 2:
            semi_losers = losers
        alive = winners
    return [(i, a, b) for i, (a, b) in enumerate(games)]


def moment_matched(rng: np.random.Generator, n: int, mean: float, std: float) -> np.ndarray:
    """Gaussian draws rescaled so the sample mean and (ddof=1) std equal the targets."""
    z = rng.standard_normal(n)
    if n > 1:
        z = (z - z.mean()) / z.std(ddof=1)
    return mean + std * z


def synthetic_population(gender: Gender, seed: int = 0, params=None, id_offset: int | None = None) -> list:
    """Team-match rows for one tournament drawn from per-variable Gaussians.

    Count variables: per-match totals are moment-matched to the published
    per-match mean and std, rounded, and split between the teams around an
    even share. Other variables: team-match values are moment-matched to the
    published mean and std. Bounded variables are clipped to their range.
    """
    gender = Gender.parse(gender)
    params = params or TABLE2[gender]
    games = schedule(gender, seed)
    n_matches = len(games)
    rng = np.random.default_rng([seed, 0 if gender is Gender.MALE else 1])
    base = id_offset if id_offset is not None else (1000 if gender is Gender.MALE else 2000)
    prefix = "M" if gender is Gender.MALE else "W"
    rows = [
        TeamMatchFeatures(match_id=base * 10 + i, team_id=base + t, gender=gender, team_name=f"{prefix}{t + 1:02d}")
        for i, a, b in games
        for t in (a, b)
    ]
    for name in FEATURE_NAMES:
        mean, std = params[name]
        if name in COUNT_NAMES:
            totals = np.maximum(np.rint(moment_matched(rng, n_matches, mean, std)), 0).astype(int)
            shares = np.clip(rng.normal(0.5, 0.06, n_matches), 0.2, 0.8)
            first = np.rint(totals * shares).astype(int)
            for k in range(n_matches):
                setattr(rows[2 * k], name, int(first[k]))
                setattr(rows[2 * k + 1], name, int(totals[k] - first[k]))
        else:
            vals = moment_matched(rng, 2 * n_matches, mean, std)
            vals = np.clip(vals, LOWER_BOUNDS.get(name, -np.inf), UPPER_BOUNDS.get(name, np.inf))
            for r, v in zip(rows, vals):
                setattr(r, name, float(v))
    return rows


def two_population_rows(seed: int = 0) -> list:
    """Male and female synthetic tournaments, male rows first."""
    return synthetic_population(Gender.MALE, seed) + synthetic_population(Gender.FEMALE, seed)


# ---------------------------------------------------------------- event streams

_SPEED = {Gender.MALE: (2.99, 23.27, 0.84), Gender.FEMALE: (2.83, 18.92, 0.76)}
PASS_SUBTYPES = ("Simple pass", "Simple pass", "Simple pass", "High pass", "Head pass", "Cross")
OTHER_SUBTYPES = ("Touch", "Acceleration", "Clearance")
PERIOD_SECONDS = 2700.0


class _MatchSim:
    def __init__(self, rng, match_id, teams, rosters, gender, duration):
        self.rng = rng
        self.match_id = match_id
        self.teams = teams
        self.rosters = rosters
        self.gender = gender
        self.duration = duration
        self.pass_dt, self.stop_dt, self.acc = _SPEED[gender]
        self.events = []
        self.goals = {t: 0 for t in teams}

    def other(self, team):
        return self.teams[1] if team == self.teams[0] else self.teams[0]

    def player(self, team, exclude=None):
        roster = self.rosters[team]
        while True:
            # starters play most of the ball, two substitutes a little
            idx = int(self.rng.integers(0, 11)) if self.rng.random() < 0.93 else int(self.rng.integers(11, len(roster)))
            pid = roster[idx]
            if pid != exclude:
                return pid

    def emit(self, period, t, team, player, name, sub, origin, dest=None, tags=()):
        pos = [{"x": int(round(min(max(origin[0], 0), 100))), "y": int(round(min(max(origin[1], 0), 100)))}]
        if dest is not None:
            pos.append({"x": int(round(min(max(dest[0], 0), 100))), "y": int(round(min(max(dest[1], 0), 100)))})
        self.events.append({
            "eventName": name,
            "subEventName": sub,
            "eventSec": round(t, 3),
            "matchPeriod": period,
            "matchId": self.match_id,
            "teamId": team,
            "playerId": player,
            "positions": pos,
            "tags": [{"id": g} for g in tags],
        })

    def gap(self, mean):
        return float(self.rng.gamma(4.0, mean / 4.0))

    def play_period(self, period, start_team):
        rng = self.rng
        t = 0.0
        end = PERIOD_SECONDS * self.duration + float(rng.uniform(30, 180)) * self.duration
        team = start_team
        x, y = 50.0, 50.0
        restart = ("Pass", "Simple pass")
        cooling_at = None
        if self.gender is Gender.FEMALE and rng.random() < 0.3:
            cooling_at = end * 0.6
        holder = None
        while t < end:
            if cooling_at is not None and t > cooling_at:
                t += 180.0
                cooling_at = None
            name, sub = restart
            holder = self.player(team)
            # opening action
            if name == "Pass":
                tx, ty = x + rng.normal(6, 10), y + rng.normal(0, 18)
                recv = self.player(team, holder)
                self.emit(period, t, team, holder, "Pass", sub, (x, y), (tx, ty), (ACCURATE_TAG,))
                x, y, holder = tx, ty, recv
            else:
                tx, ty = x + rng.normal(10, 12), y + rng.normal(0, 20)
                self.emit(period, t, team, holder, "Free Kick", sub, (x, y), (tx, ty), (ACCURATE_TAG,))
                x, y = tx, ty
                holder = self.player(team, holder)
            x, y = float(np.clip(x, 1, 99)), float(np.clip(y, 1, 99))
            # build-up
            ended = False
            while not ended:
                t += self.gap(self.pass_dt)
                u = rng.random()
                if u < 0.08:
                    self.emit(period, t, team, self.player(team), "Others on the ball", rng.choice(OTHER_SUBTYPES), (x, y))
                    continue
                if u < 0.30:
                    # a contested duel, one record per side
                    opp = self.other(team)
                    won = rng.random() < 0.55
                    self.emit(period, t, team, holder, "Duel", "Ground attacking duel", (x, y), (x, y),
                              (703 if won else 701, ACCURATE_TAG if won else NOT_ACCURATE_TAG))
                    self.emit(period, t, opp, self.player(opp), "Duel", "Ground defending duel",
                              (100 - x, 100 - y), (100 - x, 100 - y),
                              (701 if won else 703, NOT_ACCURATE_TAG if won else ACCURATE_TAG))
                    if not won:
                        team, x, y = opp, 100 - x, 100 - y
                        holder = self.player(team)
                    continue
                if x > 70 and u < 0.30 + 0.2 * (x - 70) / 30:
                    t = self.shot(period, t, team, holder, x, y)
                    opp = self.other(team)
                    restart, team, x, y = self._after_shot(opp)
                    ended = True
                    continue
                if u < 0.34:
                    opp = self.other(team)
                    self.emit(period, t, opp, self.player(opp), "Foul", "Foul", (100 - x, 100 - y))
                    t += self.gap(self.stop_dt)
                    restart = ("Free Kick", "Free Kick")
                    ended = True
                    continue
                if u < 0.343:
                    self.emit(period, t, team, holder, "Offside", "", (x, y))
                    t += self.gap(self.stop_dt)
                    team = self.other(team)
                    x, y = 100 - x, 100 - y
                    restart = ("Free Kick", "Free Kick")
                    ended = True
                    continue
                if u < 0.40:
                    self.emit(period, t, team, 0, "Interruption", "Ball out of the field", (x, y))
                    t += self.gap(self.stop_dt)
                    team = self.other(team)
                    x, y = 100 - x, 100 - y
                    if x > 85:
                        restart, x, y = ("Free Kick", "Corner"), 99.0, 99.0 if y > 50 else 1.0
                    elif x < 8:
                        restart, x, y = ("Free Kick", "Goal kick"), 5.0, 50.0
                    else:
                        restart, y = ("Free Kick", "Throw in"), (0.0 if y < 50 else 100.0)
                    ended = True
                    continue
                accurate = rng.random() < self.acc
                tx, ty = x + rng.normal(4, 12), y + rng.normal(0, 20)
                tx, ty = float(np.clip(tx, 0, 100)), float(np.clip(ty, 0, 100))
                recv = self.player(team, holder)
                self.emit(period, t, team, holder, "Pass", rng.choice(PASS_SUBTYPES), (x, y), (tx, ty),
                          (ACCURATE_TAG,) if accurate else (NOT_ACCURATE_TAG,))
                if accurate:
                    x, y, holder = tx, ty, recv
                else:
                    # ball lost: the opponent plays on from the landing spot
                    team = self.other(team)
                    x, y = 100 - tx, 100 - ty
                    restart = ("Pass", "Simple pass")
                    t += self.gap(self.pass_dt)
                    ended = True
        return team

    def shot(self, period, t, team, holder, x, y):
        goal = self.rng.random() < 0.11
        tags = (GOAL_TAG, ACCURATE_TAG) if goal else ((ACCURATE_TAG,) if self.rng.random() < 0.35 else (NOT_ACCURATE_TAG,))
        self.emit(period, t, team, holder, "Shot", "Shot", (x, y), (100, 50), tags)
        opp = self.other(team)
        keeper = self.rosters[opp][0]
        t += 0.5
        self.emit(period, t, opp, keeper, "Save attempt", "Reflexes", (0, 50), (100, 50), (GOAL_TAG,) if goal else ())
        if goal:
            self.goals[team] += 1
            self._goal = True
        else:
            self._goal = False
        return t + self.gap(self.stop_dt)

    def _after_shot(self, opp):
        if self._goal:
            return ("Pass", "Simple pass"), opp, 50.0, 50.0
        return ("Free Kick", "Goal kick"), opp, 5.0, 50.0


def generate_event_dataset(n_matches: int = 4, gender=Gender.MALE, seed: int = 0, duration: float = 1.0,
                           n_teams: int | None = None, match_id_base: int = 5000, team_id_base: int = 100,
                           player_id_base: int = 10000, competition: str = "Synthetic Cup") -> dict:
    """Raw match, team, player and event records for ``n_matches`` simulated matches.

    ``duration`` scales the playing time (1.0 = two 45-minute halves), which
    the event count follows roughly linearly.
    """
    gender = Gender.parse(gender)
    rng = np.random.default_rng([seed, 7, 0 if gender is Gender.MALE else 1])
    n_teams = n_teams or max(2, min(2 * n_matches, 8))
    team_ids = [team_id_base + i for i in range(n_teams)]
    prefix = "Man" if gender is Gender.MALE else "Woman"
    team_names = {t: f"{prefix} Team {i + 1}" for i, t in enumerate(team_ids)}
    rosters, players = {}, []
    roles = ["GK"] + ["DF"] * 4 + ["MD"] * 4 + ["FW"] * 2 + ["MD", "FW"]
    for i, t in enumerate(team_ids):
        rosters[t] = [player_id_base + 100 * i + k for k in range(len(roles))]
        for k, pid in enumerate(rosters[t]):
            players.append({"wyId": pid, "shortName": f"{team_names[t]} #{k + 1}",
                            "currentNationalTeamId": t, "role": {"code2": roles[k]}})
    matches, events = [], []
    pairs = [(a, b) for a in range(n_teams) for b in range(a + 1, n_teams)]
    order = rng.permutation(len(pairs))
    for m in range(n_matches):
        a, b = pairs[order[m % len(pairs)]]
        home, away = team_ids[a], team_ids[b]
        mid = match_id_base + m
        sim = _MatchSim(rng, mid, (home, away), rosters, gender, duration)
        first = home if rng.random() < 0.5 else away
        sim.play_period("1H", first)
        sim.play_period("2H", sim.other(first))
        for k, e in enumerate(sim.events):
            e["id"] = mid * 100000 + k
        events.extend(sim.events)
        ga, gb = sim.goals[home], sim.goals[away]
        matches.append({
            "wyId": mid,
            "label": f"{team_names[home]} - {team_names[away]}, {ga} - {gb}",
            "gender": gender.value,
            "competitionId": competition,
            "teamsData": {str(home): {"side": "home", "score": ga}, str(away): {"side": "away", "score": gb}},
        })
    teams = [{"wyId": t, "name": team_names[t]} for t in team_ids]
    return {"events": events, "matches": matches, "players": players, "teams": teams}


def write_event_dataset(dataset: dict, directory, tag: str = "Synthetic", header: str = "") -> dict:
    """Write the records as the public release lays them out; return the paths.

    ``header`` (a ``#`` comment line) is written before each JSON document.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = {
        "events": d / f"events_{tag}.json",
        "matches": d / f"matches_{tag}.json",
        "players": d / "players.json",
        "teams": d / "teams.json",
    }
    for key, path in paths.items():
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(header)
            json.dump(dataset[key], fh, sort_keys=True)
    return paths
