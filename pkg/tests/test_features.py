import io
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from matchtech import features as F
from matchtech.errors import DependencyError, EventTypeMismatch, ParameterError, UndefinedValueError
from matchtech.ingest import EventType, Gender
from matchtech.netmetrics import NetworkSummary
from matchtech.possession import EndReason, segment

from conftest import ev, store_of

P, S, FL, D, FK, O, OT = (EventType.PASS, EventType.SHOT, EventType.FOUL, EventType.DUEL,
                          EventType.FREE_KICK, EventType.OFFSIDE, EventType.OTHERS)
A, B = 1, 2


def test_counts_empty_and_small():
    assert F.count_events([]) == F.EventCounts()
    c = F.count_events([ev(P, A, 1, accurate=True), ev(P, A, 2, accurate=True), ev(P, A, 3, accurate=False),
                        ev(S, A, 4)])
    assert (c.n_events, c.n_passes, c.n_accurate_passes, c.n_shots) == (4, 3, 2, 1)
    assert c.n_fouls == c.n_duels == c.n_free_kicks == c.n_offside == c.n_others == 0


def test_auxiliary_others_not_counted():
    c = F.count_events([ev(OT, A, 1, name="Save attempt"), ev(OT, A, 2, name="Interruption"),
                        ev(OT, A, 3, name="Others on the ball")])
    assert c.n_events == 3 and c.n_others == 1


def test_pass_accuracy():
    evs = [ev(P, A, i, accurate=i < 3) for i in range(4)]
    assert F.pass_accuracy(evs) == 0.75
    assert F.pass_accuracy([ev(P, A, 1, accurate=True)]) == 1.0
    with pytest.raises(UndefinedValueError):
        F.pass_accuracy([ev(S, A, 1)])


def test_pass_velocity_chain():
    evs = [ev(P, A, 2.0, player=11, accurate=True), ev(P, A, 5.0, player=12, accurate=True)]
    assert F.pass_velocity(evs) == 3.0
    unrelated = [ev(P, A, 2.0, player=11, accurate=False), ev(P, A, 5.0, player=12, accurate=True)]
    with pytest.raises(UndefinedValueError):
        F.pass_velocity(unrelated)


def test_recovery_time():
    evs = [ev(P, A, 10), ev(P, B, 15), ev(P, A, 25)]
    assert F.recovery_time(segment(evs), A) == 15.0
    with pytest.raises(UndefinedValueError):
        F.recovery_time(segment([ev(P, A, t) for t in range(5)]), A)


def test_recovery_excludes_period_boundary():
    evs = [ev(P, A, 10), ev(P, B, 15), ev(P, A, 5, period=2)]
    with pytest.raises(UndefinedValueError):
        F.recovery_time(segment(evs), A)


def test_stop_time():
    evs = [ev(P, A, 1), ev(OT, A, 10, sub="Ball out of the field"), ev(FK, B, 30, sub="Throw in")]
    assert F.stop_time(segment(evs)) == 20.0
    zero = [ev(P, A, 1), ev(FL, B, 4), ev(FK, A, 4, sub="Free Kick")]
    assert F.stop_time(segment(zero)) == 0.0
    with pytest.raises(UndefinedValueError):
        F.stop_time(segment([ev(P, A, 1), ev(P, B, 3)]))


def test_stop_time_skips_cooling_gap():
    evs = [ev(P, A, 1), ev(FK, B, 300, sub="Throw in"), ev(P, B, 301)]
    with pytest.raises(UndefinedValueError):
        F.stop_time(segment(evs, Gender.FEMALE))


def test_pass_length():
    assert F.pass_length([ev(P, A, 1, origin=(50, 50), dest=(60, 50))]) == pytest.approx(11.0, abs=1e-12)
    assert F.pass_length([ev(P, A, 1, origin=(50, 50), dest=(50, 50))]) == 0.0
    with pytest.raises(UndefinedValueError):
        F.pass_length([ev(S, A, 1)])


def test_shot_velocity():
    assert F.shot_velocity([ev(S, A, 100), ev(S, A, 160)]) == 60.0
    with pytest.raises(UndefinedValueError):
        F.shot_velocity([ev(S, A, 100)])


def test_shot_distance():
    assert F.shot_distance(ev(S, A, 1, origin=(90, 50))) == pytest.approx(11.0, abs=1e-12)
    assert F.shot_distance(ev(S, A, 1, origin=(100, 50))) == 0.0
    assert F.shot_distance(ev(FK, A, 1, sub="Free kick shot", origin=(80, 50))) == pytest.approx(22.0)
    with pytest.raises(EventTypeMismatch):
        F.shot_distance(ev(P, A, 1))


def test_zone_partition():
    shots = [ev(S, A, i, origin=(x, 50)) for i, x in enumerate((40, 55, 65, 85, 100))]
    zp = F.zone_partition(shots)
    assert zp.bands == ((80.0, 100.0), (60.0, 80.0), (40.0, 60.0))
    assert zp.counts == (2, 1, 2)
    assert sum(zp.shares) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(UndefinedValueError):
        F.zone_partition([ev(S, A, 1, origin=(70, 50)), ev(S, A, 2, origin=(70, 40))])
    with pytest.raises(UndefinedValueError):
        F.zone_partition([])
    assert F.zone_shares(zp, shots[1:3]) == (0.0, 0.5, 0.5)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 100, allow_nan=False), min_size=2, max_size=40))
def test_zone_bands_partition(xs):
    if max(xs) == min(xs):
        return
    shots = [ev(S, A, i, origin=(x, 50)) for i, x in enumerate(xs)]
    zp = F.zone_partition(shots)
    assert zp.bands[2][0] == min(xs) and zp.bands[0][1] == max(xs)
    assert zp.bands[0][0] == zp.bands[1][1] and zp.bands[1][0] == zp.bands[2][1]
    assert sum(zp.counts) == len(xs)
    assert sum(zp.shares) == pytest.approx(1.0, abs=1e-12)
    for x in xs:
        z = zp.band_of(x)
        lo, hi = zp.bands[z]
        assert lo - 1e-9 <= x <= hi + 1e-9


def test_kde_single_point_mode():
    g = F.kde_intensity([(30.5, 70.0)], 3.0)  # off the cell edges, so the mode cell is unique
    assert g.argmax_cell() == g.cell_of((30.5, 70.0))
    assert (g.values >= 0).all()


def test_kde_two_far_points_two_maxima():
    g = F.kde_intensity([(20.5, 50.5), (80.5, 50.5)], 2.0)
    row = g.values[g.cell_of((20.5, 50.5))[1]]
    interior = (row[1:-1] > row[:-2]) & (row[1:-1] > row[2:])
    assert interior.sum() == 2


def test_kde_mass_conservation():
    rng = np.random.default_rng(3)
    pts = rng.uniform(0, 100, size=(400, 2))
    g = F.kde_intensity(pts, 4.0)
    assert g.integral() == pytest.approx(400, rel=0.01)
    with pytest.raises(UndefinedValueError):
        F.kde_intensity([], 3.0)
    with pytest.raises(ParameterError):
        F.kde_intensity(pts, 0.0)


# Twenty-event, one-match fixture; values below were tallied by hand.
def _fixture():
    return [
        ev(P, A, 0, 11, accurate=True, origin=(50, 50), dest=(60, 50)),
        ev(P, A, 2, 12, accurate=True, origin=(60, 50), dest=(70, 50)),
        ev(P, A, 5, 13, accurate=True, origin=(70, 50), dest=(80, 60)),
        ev(P, A, 6, 11, accurate=False, origin=(80, 60), dest=(90, 50)),
        ev(P, B, 8, 21, accurate=True, origin=(10, 50), dest=(20, 50)),
        ev(P, B, 9, 22, accurate=True, origin=(20, 50), dest=(30, 50)),
        ev(D, B, 11, 21),
        ev(D, A, 11, 12),
        ev(P, A, 12, 12, accurate=True, origin=(50, 50), dest=(55, 50)),
        ev(S, A, 14, 13, origin=(90, 50)),
        ev(FK, B, 20, 21, sub="Throw in", origin=(0, 10)),
        ev(P, B, 22, 22, accurate=True, origin=(10, 10), dest=(20, 10)),
        ev(FL, A, 25, 11),
        ev(FK, B, 40, 21, sub="Free Kick"),
        ev(P, B, 42, 22, accurate=True),
        ev(P, B, 45, 21, accurate=False),
        ev(P, A, 47, 11, accurate=True, origin=(40, 40), dest=(50, 40)),
        ev(P, A, 49, 12, accurate=True, origin=(50, 40), dest=(60, 40)),
        ev(S, A, 52, 13, origin=(95, 50)),
        ev(OT, A, 60, 12, name="Touch"),
    ]


def test_fixture_phases():
    phases = segment(_fixture())
    assert [(p.team_id, p.start_sec, p.end_sec, p.end_reason) for p in phases] == [
        (A, 0, 6, EndReason.TURNOVER),
        (B, 8, 9, EndReason.TURNOVER),
        (A, 11, 14, EndReason.BALL_OUT),
        (B, 20, 25, EndReason.FOUL),
        (B, 40, 45, EndReason.TURNOVER),
        (A, 47, 60, EndReason.HALF_END),
    ]


def test_fixture_vector_fields():
    evs = _fixture()
    row = F.team_match_features(evs, segment(evs), A, 1, Gender.MALE)
    assert (row.n_events, row.n_passes, row.n_accurate_passes, row.n_shots, row.n_fouls, row.n_duels,
            row.n_others, row.n_free_kicks, row.n_offside) == (12, 7, 6, 2, 1, 1, 1, 0, 0)
    assert row.acc_p == 6 / 7
    assert row.pass_v == pytest.approx(2.0, abs=1e-12)  # chains (0,2) (2,5) (5,6) (47,49)
    assert row.rec_t == pytest.approx(20.5, abs=1e-12)  # (12-6 + 47-12) / 2
    assert row.stop_t is None  # A takes no restart
    diag = math.hypot(11.0, 6.5)
    assert row.pass_l_mean == pytest.approx((4 * 11.0 + 5.5 + 2 * diag) / 7, abs=1e-12)
    assert row.shot_d_mean == pytest.approx(8.25, abs=1e-12)
    other = F.team_match_features(evs, segment(evs), B, 1, Gender.MALE)
    assert other.stop_t == pytest.approx(10.5, abs=1e-12)  # throw-in 6 s, free kick 15 s
    assert other.n_free_kicks == 2 and other.acc_p == 4 / 5


def _summary(h=1.5, fc=0.05):
    return NetworkSummary(w=10, mu_p=1, sigma_p=1, mu_z=1, sigma_z=1, h=h, fc_avg=fc, fc_std=0.0)


def test_assemble_and_dependency_errors():
    store = store_of(_fixture())
    nets = {(1, A): _summary(), (1, B): None}
    pr = {(1, A): (0.1, 0.02), (1, B): (0.2, 0.01)}
    rows = F.assemble_features(store, nets, pr)
    assert len(rows) == 2
    a = rows[0]
    assert (a.team_id, a.h_ind, a.fc, a.pr_avg, a.pr_std, a.team_name) == (A, 1.5, 0.05, 0.1, 0.02, "Alpha")
    assert rows[1].h_ind is None and rows[1].fc is None
    with pytest.raises(DependencyError, match="netmetrics"):
        F.assemble_features(store, {(1, A): _summary()}, pr)
    with pytest.raises(DependencyError, match="playerank"):
        F.assemble_features(store, nets, {(1, A): (0.1, 0.0)})


def test_match_level_rows_sum_counts_average_rest():
    store = store_of(_fixture())
    pr = {(1, A): (0.1, 0.02), (1, B): (0.3, 0.04)}
    rows = F.assemble_features(store, {(1, A): _summary(), (1, B): _summary(2.5)}, pr)
    (m,) = F.match_level_rows(rows)
    assert m["n_events"] == 20 and m["n_passes"] == 12
    assert m["h_ind"] == 2.0 and m["pr_avg"] == pytest.approx(0.2)
    assert m["stop_t"] == 10.5  # only defined for one side


def test_csv_round_trip_and_determinism():
    store = store_of(_fixture())
    pr = {(1, A): (0.1, 0.02), (1, B): (0.3, 0.04)}
    rows = F.assemble_features(store, {(1, A): _summary(), (1, B): None}, pr)
    buf = io.StringIO()
    F.write_features_csv(rows, buf)
    back = F.read_features_csv(io.StringIO("# header\n" + buf.getvalue()))
    assert [r.vector() for r in back] == [r.vector() for r in rows]
    again = io.StringIO()
    F.write_features_csv(F.assemble_features(store, {(1, A): _summary(), (1, B): None}, pr), again)
    assert again.getvalue() == buf.getvalue()


def test_impute_missing():
    rows = [F.TeamMatchFeatures(1, A, Gender.MALE, acc_p=0.8), F.TeamMatchFeatures(1, B, Gender.MALE)]
    assert F.impute_missing(rows) >= 1
    assert rows[1].acc_p == 0.8


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 500, allow_nan=False))
def test_timing_translation_invariance(shift):
    evs = _fixture()
    moved = [replace(e, timestamp_sec=e.timestamp_sec + shift) for e in evs]
    for team in (A, B):
        r0 = F.team_match_features(evs, segment(evs), team, 1, Gender.MALE)
        r1 = F.team_match_features(moved, segment(moved), team, 1, Gender.MALE)
        for name in ("pass_v", "rec_t", "stop_t"):
            a, b = getattr(r0, name), getattr(r1, name)
            assert (a is None and b is None) or a == pytest.approx(b, abs=1e-9)
    shots = [e for e in evs if e.event_type is S]
    assert F.shot_velocity(shots) == pytest.approx(
        F.shot_velocity([replace(e, timestamp_sec=e.timestamp_sec + shift) for e in shots]), abs=1e-9)


def test_feature_ranges_on_corpus(small_corpus):
    from matchtech.netmetrics import summarize
    from matchtech.playerank import run_playerank

    store = small_corpus
    nets = {(m, t): summarize(store.events_for(m, t)) for m in store.match_ids() for t in store.matches[m].team_ids}
    pr = run_playerank(store).team_stats()
    rows = F.assemble_features(store, nets, pr)
    assert len(rows) == 2 * len(store.matches)
    diag = math.hypot(110, 65)
    for r in rows:
        assert r.n_accurate_passes <= r.n_passes
        assert r.acc_p == r.n_accurate_passes / r.n_passes
        for n in ("pass_v", "rec_t", "stop_t", "pass_l_mean"):
            v = getattr(r, n)
            assert v is None or v >= 0
        assert r.shot_d_mean is None or 0 <= r.shot_d_mean <= diag
        assert r.pr_std >= 0
