"""Command-line front end.

Every command reads a key-value config file (``--config``), applies flag
overrides, writes its outputs under ``--out`` and records a ``run_meta.json``
with the config hash, seed and timings. Each output file carries the config
hash in a header (``#`` comment line for text files, a ``_meta`` entry for
JSON). Exit codes: 0 success, 2 missing input, 3 validation failure,
4 undefined computation, 1 anything else.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from . import __version__, explain, features, ingest, netmetrics, playerank, possession, stats, synthetic
from .errors import MatchTechError, MissingInputError, ParameterError, UndefinedValueError, ValidationError
from .ingest import Gender
from .learn import evaluation
from .learn.dataset import LabeledDataset
from .learn.models import canonical_kind, train_model
from .learn.serialize import load_model, save_model

log = logging.getLogger("matchtech")

DATA_ENV = "MATCHTECH_DATA"
LOCK_NAME = ".matchtech.lock"
FIGURES = (
    "events-per-match",
    "shot-intensity",
    "zones",
    "roc",
    "importance",
    "beeswarm",
    "force",
    "accp-rect",
    "network",
    "team-indicators",
)


# ---------------------------------------------------------------- config


@dataclass
class RunConfig:
    dataset: list = field(default_factory=list)  # "path[:gender]" entries
    out: str = "out"
    seed: int = 0
    cooling_gap: float = possession.DEFAULT_COOLING_GAP
    goal_cap: int = playerank.GOAL_CAP
    k_roles: int = playerank.DEFAULT_ROLES
    alpha: float = playerank.DEFAULT_ALPHA
    pitch_length: float = features.PITCH_LENGTH_M
    pitch_width: float = features.PITCH_WIDTH_M
    kde_bandwidth: float = 3.0
    background_size: int = explain.DEFAULT_BACKGROUND
    n_permutations: int = 2000
    paired_repeats: int = 50
    significance: float = 0.05
    grids: dict = field(default_factory=dict)

    def hash(self) -> str:
        """Digest of everything that affects results (the output directory does not)."""
        rec = asdict(self)
        rec.pop("out")
        blob = json.dumps(rec, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def grid_for(self, kind: str):
        return self.grids.get(canonical_kind(kind))


_SCALARS = {
    "out": str,
    "seed": int,
    "cooling_gap": float,
    "goal_cap": int,
    "k_roles": int,
    "alpha": float,
    "pitch_length": float,
    "pitch_width": float,
    "kde_bandwidth": float,
    "background_size": int,
    "n_permutations": int,
    "paired_repeats": int,
    "significance": float,
}


def _grid_value(text: str):
    t = text.strip()
    if t.lower() in ("none", "inf", "unbounded"):
        return None
    try:
        return int(t)
    except ValueError:
        return float(t)


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    ``dataset`` may repeat or list comma-separated ``path[:gender]`` entries.
    ``grid.<model>.<param> = v1, v2, ...`` defines a grid; the product over a
    model's parameters is searched.
    """
    cfg = RunConfig()
    grid_axes = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{source}: line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "dataset":
            cfg.dataset.extend(v.strip() for v in value.split(",") if v.strip())
        elif key.startswith("grid."):
            parts = key.split(".")
            if len(parts) != 3:
                raise ValidationError(f"{source}: line {lineno}: grid keys look like grid.<model>.<param>")
            kind = canonical_kind(parts[1])
            grid_axes.setdefault(kind, {})[parts[2]] = [_grid_value(v) for v in value.split(",")]
        elif key in _SCALARS:
            try:
                setattr(cfg, key, _SCALARS[key](value))
            except ValueError:
                raise ValidationError(f"{source}: line {lineno}: bad value {value!r} for {key}") from None
        else:
            raise ValidationError(f"{source}: line {lineno}: unknown key {key!r}")
    for kind, axes in grid_axes.items():
        names = sorted(axes)
        cfg.grids[kind] = [dict(zip(names, combo)) for combo in product(*(axes[n] for n in names))]
    return cfg


def load_config(args) -> RunConfig:
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise MissingInputError(f"config file not found: {path}")
        cfg = parse_config_text(path.read_text(encoding="utf-8"), str(path))
    else:
        cfg = RunConfig()
    if args.dataset:
        cfg.dataset = list(args.dataset)
    if not cfg.dataset and os.environ.get(DATA_ENV):
        cfg.dataset = [os.environ[DATA_ENV]]
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out:
        cfg.out = args.out
    if cfg.cooling_gap <= 0 or cfg.kde_bandwidth <= 0 or cfg.background_size < 1:
        raise ValidationError("cooling_gap, kde_bandwidth and background_size must be positive")
    return cfg


# ---------------------------------------------------------------- run context


class Run:
    """Output directory, lock, metadata header and timings for one command."""

    def __init__(self, command: str, cfg: RunConfig):
        self.command = command
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.outputs = []
        self.timings = {}
        self._t0 = time.perf_counter()

    @property
    def header(self) -> str:
        return (f"# matchtech {__version__} command={self.command} "
                f"config_hash={self.cfg.hash()} seed={self.cfg.seed}\n")

    def meta(self) -> dict:
        return {"command": self.command, "config_hash": self.cfg.hash(), "seed": self.cfg.seed,
                "version": __version__}

    def path(self, name: str) -> Path:
        p = self.out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.outputs.append(str(p.relative_to(self.out)))
        return p

    @contextmanager
    def text(self, name: str):
        """Open a text output; the metadata header is written first."""
        with open(self.path(name), "w", encoding="utf-8", newline="") as fh:
            fh.write(self.header)
            yield fh

    def json(self, name: str, payload: dict) -> None:
        with open(self.path(name), "w", encoding="utf-8") as fh:
            json.dump({"_meta": self.meta(), **payload}, fh, sort_keys=True, indent=1, default=_json_default)
            fh.write("\n")

    @contextmanager
    def timed(self, label: str):
        t = time.perf_counter()
        yield
        self.timings[label] = round(time.perf_counter() - t, 6)

    def finish(self) -> None:
        self.timings["total"] = round(time.perf_counter() - self._t0, 6)
        meta = {**self.meta(), "config": asdict(self.cfg), "outputs": sorted(set(self.outputs)),
                "timings": self.timings}
        with open(self.out / f"run_meta_{self.command}.json", "w", encoding="utf-8") as fh:
            json.dump(meta, fh, sort_keys=True, indent=1, default=str)
            fh.write("\n")
        with open(self.out / "run_meta.json", "w", encoding="utf-8") as fh:
            json.dump(meta, fh, sort_keys=True, indent=1, default=str)
            fh.write("\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Gender):
        return o.value
    raise TypeError(f"not serializable: {type(o).__name__}")


class LockBusy(MatchTechError):
    exit_code = 1


@contextmanager
def output_lock(directory: Path):
    directory.mkdir(parents=True, exist_ok=True)
    lock = directory / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise LockBusy(f"output directory {directory} is locked by another run ({lock})") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        try:
            lock.unlink()
        except FileNotFoundError:
            pass


# ---------------------------------------------------------------- inputs


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise MissingInputError(f"{what} not found: {path}")
    return path


def parse_dataset_spec(spec: str) -> tuple:
    """``path`` or ``path:gender``; the gender defaults to male."""
    path, sep, suffix = spec.rpartition(":")
    if sep and path and suffix.lower() in ("m", "f", "male", "female", "men", "women"):
        return path, Gender.parse(suffix)
    return spec, Gender.MALE


def merge_stores(stores) -> ingest.EventStore:
    matches, players, teams, events = {}, {}, {}, []
    for s in stores:
        for mid, m in s.matches.items():
            if mid in matches:
                raise ValidationError(f"match {mid} appears in more than one dataset")
            matches[mid] = m
        players.update(s.players)
        teams.update(s.teams)
        events.extend(s.all_events())
    return ingest.build_store(matches, players, events, teams)


def store_dir(cfg: RunConfig, args) -> Path:
    return Path(getattr(args, "store", None) or Path(cfg.out) / "store")


def open_store(cfg: RunConfig, args) -> ingest.EventStore:
    d = store_dir(cfg, args)
    if not (d / "events.jsonl").exists():
        raise MissingInputError(f"event store not found: {d} (run `matchtech ingest` first)")
    return ingest.read_store(d)


def features_path(cfg: RunConfig, args) -> Path:
    return Path(getattr(args, "features", None) or Path(cfg.out) / "features.csv")


def read_features(path: Path) -> list:
    _require(path, "features file")
    with open(path, encoding="utf-8") as fh:
        rows = features.read_features_csv(fh)
    if not rows:
        raise ValidationError(f"features file {path} has no rows")
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, Gender):
        return v.value
    return str(v)


def _write_rows(fh, header, rows) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])


# ---------------------------------------------------------------- commands


def cmd_ingest(run: Run, args) -> int:
    cfg = run.cfg
    if not cfg.dataset:
        raise MissingInputError(f"no dataset given (use --dataset or set {DATA_ENV})")
    stores = []
    with run.timed("load"):
        for spec in cfg.dataset:
            path, gender = parse_dataset_spec(spec)
            stores.append(ingest.load_directory(path, gender))
    store = stores[0] if len(stores) == 1 else merge_stores(stores)
    ingest.write_store(store, run.out / "store", header=run.header)
    run.outputs.extend(f"store/{k}.jsonl" for k in ("events", "matches", "players", "teams"))
    n_players = len(store.active_players())
    summary = f"{len(store.matches)} matches, {store.n_events:,} events, {n_players} players"
    with run.text("ingest_summary.txt") as fh:
        fh.write(summary + "\n")
        for g in Gender:
            mids = [m for m in store.match_ids() if store.matches[m].gender is g]
            if mids:
                n = sum(len(store.events_for(m)) for m in mids)
                fh.write(f"{g.value}: {len(mids)} matches, {n:,} events, "
                         f"{n / len(mids):.2f} events/match\n")
    print(summary)
    return 0


def _phases(store, cfg) -> dict:
    return {
        mid: possession.segment(store.events_for(mid), store.matches[mid].gender, cfg.cooling_gap)
        for mid in store.match_ids()
    }


def _network_summaries(store) -> dict:
    out = {}
    for mid in store.match_ids():
        for tid in store.matches[mid].team_ids:
            out[(mid, tid)] = netmetrics.summarize(store.events_for(mid, tid))
    return out


def cmd_features(run: Run, args) -> int:
    cfg = run.cfg
    store = open_store(cfg, args)
    with run.timed("possession"):
        phases = _phases(store, cfg)
    with run.timed("networks"):
        nets = _network_summaries(store)
    with run.timed("playerank"):
        pr = playerank.run_playerank(store, cfg.alpha, cfg.k_roles, cfg.seed, cfg.goal_cap)
    with run.timed("assemble"):
        rows = features.assemble_features(store, nets, pr.team_stats(), phases)
    n_missing = sum(v is None for r in rows for v in r.vector())
    with run.text("features.csv") as fh:
        features.write_features_csv(rows, fh)
    match_rows = features.match_level_rows(rows)
    with run.text("match_features.csv") as fh:
        features.write_features_csv(match_rows, fh, ("match_id", "gender") + features.FEATURE_NAMES)
    with run.text("phases.jsonl") as fh:
        for mid in store.match_ids():
            possession.export_phases(phases[mid], fh)
    print(f"{len(rows)} team-match rows, {len(match_rows)} matches, {n_missing} missing values")
    return 0


def _gender_groups(rows) -> dict:
    groups = {"male": [], "female": []}
    for r in rows:
        g = r["gender"] if isinstance(r, dict) else r.gender
        groups[Gender.parse(g).value].append(r)
    if not groups["male"] or not groups["female"]:
        raise ValidationError("comparison needs rows of both genders")
    return groups


def cmd_stats(run: Run, args) -> int:
    cfg = run.cfg
    rows = read_features(features_path(cfg, args))
    level = args.level
    data = features.match_level_rows(rows) if level == "match" else rows
    report = stats.comparison_table(_gender_groups(data), features.FEATURE_NAMES, cfg.significance)
    with run.text("comparison.csv") as fh:
        stats.write_comparison_csv(report, fh)
    sdir = store_dir(cfg, args)
    if (sdir / "events.jsonl").exists():
        store = ingest.read_store(sdir)
        _zone_tests(run, store, cfg)
    print("significant at %.2f: %s" % (cfg.significance, ", ".join(report.flagged()) or "none"))
    return 0


def _zone_tests(run: Run, store, cfg) -> None:
    shots = [e for e in store.all_events() if e.is_shot_attempt]
    if not shots:
        return
    partition = features.zone_partition(shots)
    counts = {}
    for g in Gender:
        evs = [e for e in shots if store.matches[e.match_id].gender is g]
        counts[g] = features.zone_counts(partition, evs)
    rows = []
    n_m, n_f = sum(counts[Gender.MALE]), sum(counts[Gender.FEMALE])
    for z in range(3):
        k_m, k_f = counts[Gender.MALE][z], counts[Gender.FEMALE][z]
        lo, hi = partition.bands[z]
        try:
            res = stats.two_prop_z_test(k_m, n_m, k_f, n_f)
            zstat, p = res.statistic, res.p_value
        except UndefinedValueError:
            zstat = p = None
        rows.append((f"Z{z + 1}", lo, hi, k_m, n_m, k_m / n_m if n_m else None,
                     k_f, n_f, k_f / n_f if n_f else None, zstat, p))
    with run.text("zones.csv") as fh:
        _write_rows(fh, ["zone", "x_lo", "x_hi", "male_shots", "male_total", "male_share",
                         "female_shots", "female_total", "female_share", "z", "p_value"], rows)


def cmd_network(run: Run, args) -> int:
    cfg = run.cfg
    store = open_store(cfg, args)
    with run.timed("networks"):
        nets = _network_summaries(store)
    rows = []
    for (mid, tid), s in sorted(nets.items()):
        rows.append((mid, tid, store.team_name(tid), store.matches[mid].gender, s.w, s.mu_p, s.sigma_p,
                     s.mu_z, s.sigma_z, s.h, s.fc_avg, s.fc_std))
    with run.text("network_summary.csv") as fh:
        _write_rows(fh, ["match_id", "team_id", "team_name", "gender", "w", "mu_p", "sigma_p", "mu_z",
                         "sigma_z", "h", "fc_avg", "fc_std"], rows)
    by_team = {}
    for (mid, tid), s in sorted(nets.items()):
        by_team.setdefault(tid, []).append(s)
    team_rows = []
    for tid, ss in sorted(by_team.items()):
        hs = [s.h for s in ss if s.h is not None]
        fcs = [s.fc_avg for s in ss if s.fc_avg is not None]
        team_rows.append((tid, store.team_name(tid), len(ss), float(np.mean(hs)) if hs else None,
                          float(np.mean(fcs)) if fcs else None))
    with run.text("team_network.csv") as fh:
        _write_rows(fh, ["team_id", "team_name", "matches", "h_avg", "fc_avg"], team_rows)
    for mid, tid in _selected_team_matches(store, args):
        net = netmetrics.build_passing_network(store.events_for(mid, tid))
        cent = nets[(mid, tid)].centrality
        with run.text(f"network_{mid}_{tid}.jsonl") as fh:
            netmetrics.export_network(net, cent, fh, match_id=mid, team_id=tid)
    print(f"{len(nets)} team-match networks")
    return 0


def _selected_team_matches(store, args) -> list:
    if not getattr(args, "match", None):
        return []
    mid = int(args.match)
    if mid not in store.matches:
        raise ValidationError(f"unknown match {mid}")
    teams = store.matches[mid].team_ids
    if getattr(args, "team", None):
        t = args.team
        tid = int(t) if str(t).isdigit() else store.team_by_name(t)
        if tid not in teams:
            raise ValidationError(f"team {t} did not play match {mid}")
        teams = (tid,)
    return [(mid, t) for t in teams]


def cmd_rank(run: Run, args) -> int:
    cfg = run.cfg
    store = open_store(cfg, args)
    with run.timed("playerank"):
        pr = playerank.run_playerank(store, cfg.alpha, cfg.k_roles, cfg.seed, cfg.goal_cap)
    with run.text("playerank_weights.tsv") as fh:
        playerank.write_weights(pr.weights, fh)
    with run.text("ratings.csv") as fh:
        _write_rows(fh, ["player_id", "match_id", "team_id", "r", "goals", "rating", "role"],
                    [(r.player_id, r.match_id, r.team_id, r.r, r.goals, r.combined, pr.player_roles.get(r.player_id))
                     for r in sorted(pr.ratings, key=lambda r: (r.match_id, r.team_id, r.player_id))])
    with run.text("team_pr.csv") as fh:
        _write_rows(fh, ["match_id", "team_id", "team_name", "pr_avg", "pr_std"],
                    [(m, t, store.team_name(t), a, s) for (m, t), (a, s) in pr.team_stats().items()])
    if pr.roles is not None:
        with run.text("roles.csv") as fh:
            _write_rows(fh, ["role", "centroid_x", "centroid_y"],
                        [(k, c[0], c[1]) for k, c in enumerate(pr.roles.centroids)])
    print(f"{len(pr.ratings)} player ratings, R={pr.weights.R:.6g}")
    return 0


def _parse_params(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ValidationError(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = _grid_value(v)
    return out


def cmd_classify(run: Run, args) -> int:
    cfg = run.cfg
    rows = read_features(features_path(cfg, args))
    ds = LabeledDataset.from_features(rows)
    kind = canonical_kind(args.model)
    tune_idx, eval_idx = evaluation.split_tune_eval(ds, cfg.seed)
    tune, ev = ds.subset(tune_idx), ds.subset(eval_idx)
    fixed = _parse_params(args.param)
    grid_scores = []
    if fixed or kind == "baseline":
        params = fixed
    else:
        with run.timed("grid_search"):
            gr = evaluation.grid_search_5fold(tune, kind, cfg.grid_for(kind), cfg.seed)
        params, grid_scores = gr.best_params, gr.scores
    with run.timed("loto"):
        report = evaluation.leave_one_team_out_cv(ev, kind, params, cfg.seed)
        base = evaluation.leave_one_team_out_cv(ev, "baseline", {}, cfg.seed)
    model = train_model(kind, ev.X, ev.y, params, cfg.seed, ds.feature_names)
    model_path = run.path(f"model_{kind}.json")
    save_model(model, model_path, run.meta())
    with run.text(f"predictions_{kind}.csv") as fh:
        _write_rows(fh, ["row", "match_id", "team", "team_name", "label", "prediction", "score", "baseline_prediction"],
                    [(int(eval_idx[i]), ev.match_ids[i], ev.groups[i],
                      ev.team_names[i] if ev.team_names is not None else "", int(ev.y[i]),
                      int(report.predictions[i]), float(report.scores[i]), int(base.predictions[i]))
                     for i in range(len(ev))])
    if report.roc is not None:
        fpr, tpr, thr = report.roc
        with run.text(f"roc_{kind}.csv") as fh:
            _write_rows(fh, ["fpr", "tpr", "threshold"], zip(fpr, tpr, thr))
    bound_ok = all(err <= bound + 1e-12 for err, bound in report.bound_checks)
    summary = {
        "model": report.summary(),
        "baseline": base.summary(),
        "f1_ratio": (report.metrics.f1 / base.metrics.f1) if base.metrics.f1 > 0 else None,
        "grid": [{"params": p, "mean_f1": s} for p, s in grid_scores],
        "n_tune": len(tune),
        "n_eval": len(ev),
        "error_bound_holds": bound_ok,
        "model_file": model_path.name,
    }
    if args.paired:
        with run.timed("paired"):
            pm = evaluation.paired_match_eval(ds, kind, params, cfg.paired_repeats, cfg.seed)
        summary["paired"] = {"both_correct": pm.both_correct, "one_correct": pm.one_correct,
                             "none_correct": pm.none_correct, "matches_per_repeat": pm.repeats}
        with run.text(f"paired_{kind}.csv") as fh:
            _write_rows(fh, ["repeat", "match_id", "correct"], pm.matches)
    run.json(f"eval_{kind}.json", summary)
    m = report.metrics
    print(f"{kind}: accuracy={m.accuracy:.3f} precision={m.precision:.3f} recall={m.recall:.3f} "
          f"f1={m.f1:.3f} auc={report.auc if report.auc is None else round(report.auc, 3)}; "
          f"baseline f1={base.metrics.f1:.3f}")
    return 0


def cmd_explain(run: Run, args) -> int:
    cfg = run.cfg
    rows = read_features(features_path(cfg, args))
    ds = LabeledDataset.from_features(rows)
    kind = canonical_kind(args.model)
    mpath = Path(args.model_file) if args.model_file else Path(cfg.out) / f"model_{kind}.json"
    model = load_model(_require(mpath, "model file"))
    if tuple(model.feature_names) != tuple(ds.feature_names):
        raise ValidationError("model feature order does not match the features file")
    background = explain.BackgroundSet.sample(model.impute(ds.X), cfg.background_size, cfg.seed, ds.feature_names)
    idx = np.arange(len(ds))
    if args.match:
        sel = [i for i in idx if str(ds.match_ids[i]).split(":")[-1] == str(args.match)]
        if args.team:
            sel = [i for i in sel if str(ds.groups[i]).split(":")[-1] == str(args.team)
                   or (ds.team_names is not None and str(ds.team_names[i]).lower() == str(args.team).lower())]
        if not sel:
            raise ValidationError(f"no feature row for match {args.match}" + (f", team {args.team}" if args.team else ""))
        idx = np.array(sel)
    if args.limit:
        idx = idx[: args.limit]
    ids = [f"{ds.match_ids[i]}|{ds.groups[i]}" for i in idx]
    with run.timed("attributions"):
        attrs = explain.explain_rows(model, ds.X[idx], background, args.method, ids,
                                     cfg.n_permutations, cfg.seed, ds.feature_names)
    gi = explain.global_importance(model, None, None, attributions=attrs, feature_names=ds.feature_names)
    with run.text("attributions.csv") as fh:
        explain.write_attributions(attrs, fh)
    with run.text("importance.csv") as fh:
        explain.write_global(gi, fh)
    with run.text("beeswarm.csv") as fh:
        explain.write_summary(explain.summary_points(attrs), fh)
    with run.text("local.jsonl") as fh:
        for a in attrs:
            fh.write(json.dumps(explain.local_explanation(a), sort_keys=True) + "\n")
    if len(attrs) <= 5:
        for a in attrs:
            print(explain.local_text(explain.local_explanation(a)))
    print("top features: " + ", ".join(gi.ranking[:5]))
    return 0


# ---------------------------------------------------------------- report


def _artifact(cfg, name) -> Path:
    return _require(Path(cfg.out) / name, f"upstream artifact {name}")


def _read_csv(path: Path) -> list:
    with open(path, encoding="utf-8") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def fig_events_per_match(run, cfg, args):
    store = open_store(cfg, args)
    rows = [(mid, store.matches[mid].gender, len(store.events_for(mid))) for mid in store.match_ids()]
    counts = np.array([r[2] for r in rows])
    with run.text("fig_events-per-match.csv") as fh:
        _write_rows(fh, ["match_id", "gender", "n_events"], rows)
    edges = np.arange(np.floor(counts.min() / 100) * 100, np.ceil(counts.max() / 100) * 100 + 101, 100)
    hist, _ = np.histogram(counts, edges)
    with run.text("fig_events-per-match_hist.csv") as fh:
        _write_rows(fh, ["bin_lo", "bin_hi", "matches"], zip(edges[:-1], edges[1:], hist))
    return f"mean events/match = {counts.mean():.2f} over {len(counts)} matches"


def fig_shot_intensity(run, cfg, args):
    store = open_store(cfg, args)
    grid = (int(round(cfg.pitch_length)), int(round(cfg.pitch_width)))
    out = []
    for g in Gender:
        pts = [e.origin for e in store.all_events() if e.is_shot_attempt and store.matches[e.match_id].gender is g]
        if not pts:
            continue
        ig = features.kde_intensity(pts, cfg.kde_bandwidth, grid)
        xc = 0.5 * (ig.x_edges[:-1] + ig.x_edges[1:])
        yc = 0.5 * (ig.y_edges[:-1] + ig.y_edges[1:])
        for iy in range(len(yc)):
            for ix in range(len(xc)):
                out.append((g, ix, iy, xc[ix], yc[iy], ig.values[iy, ix]))
    with run.text("fig_shot-intensity.csv") as fh:
        _write_rows(fh, ["gender", "ix", "iy", "x_m", "y_m", "intensity"], out)
    return f"{len(out)} grid cells"


def fig_zones(run, cfg, args):
    rows = _read_csv(_artifact(cfg, "zones.csv"))
    with run.text("fig_zones.csv") as fh:
        _write_rows(fh, ["zone", "gender", "share"],
                    [(r["zone"], g, r[f"{g}_share"]) for r in rows for g in ("male", "female")])
    return f"{len(rows)} zones"


def fig_roc(run, cfg, args):
    kind = canonical_kind(args.model)
    rows = _read_csv(_artifact(cfg, f"roc_{kind}.csv"))
    with run.text("fig_roc.csv") as fh:
        _write_rows(fh, ["fpr", "tpr", "threshold"], ((r["fpr"], r["tpr"], r["threshold"]) for r in rows))
    return f"{len(rows)} ROC points"


def fig_importance(run, cfg, args):
    rows = _read_csv(_artifact(cfg, "importance.csv"))
    with run.text("fig_importance.csv") as fh:
        _write_rows(fh, ["rank", "feature", "mean_abs_phi"], ((r["rank"], r["feature"], r["mean_abs_phi"]) for r in rows))
    return "top: " + ", ".join(r["feature"] for r in rows[:3])


def fig_beeswarm(run, cfg, args):
    rows = _read_csv(_artifact(cfg, "beeswarm.csv"))
    # colour scale: feature value rank within its feature, in [0, 1]
    by_feat = {}
    for r in rows:
        by_feat.setdefault(r["feature"], []).append(float(r["value"]))
    out = []
    for r in rows:
        vals = np.array(by_feat[r["feature"]])
        v = float(r["value"])
        span = vals.max() - vals.min()
        out.append((r["feature"], r["instance_id"], r["value"], r["phi"], (v - vals.min()) / span if span > 0 else 0.5))
    with run.text("fig_beeswarm.csv") as fh:
        _write_rows(fh, ["feature", "instance_id", "value", "phi", "value_scaled"], out)
    return f"{len(out)} points"


def fig_force(run, cfg, args):
    path = _artifact(cfg, "local.jsonl")
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            rec = json.loads(line)
            if args.match and str(args.match) not in rec["instance_id"]:
                continue
            for f in rec["features"]:
                out.append((rec["instance_id"], rec["base_value"], rec["score"], f["feature"], f["value"],
                            f["phi"], f["direction"]))
    with run.text("fig_force.csv") as fh:
        _write_rows(fh, ["instance_id", "base_value", "score", "feature", "value", "phi", "direction"], out)
    return f"{len(out)} feature pushes"


def fig_accp_rect(run, cfg, args):
    kind = canonical_kind(args.model)
    preds = _read_csv(_artifact(cfg, f"predictions_{kind}.csv"))
    rows = read_features(features_path(cfg, args))
    ds = LabeledDataset.from_features(rows)
    acc, rec = ds.column("acc_p"), ds.column("rec_t")
    out = []
    for p in preds:
        i = int(p["row"])
        out.append((p["match_id"], p["team"], p["label"], p["prediction"], acc[i], rec[i],
                    int(p["label"] == p["prediction"])))
    with run.text("fig_accp-rect.csv") as fh:
        _write_rows(fh, ["match_id", "team", "label", "prediction", "acc_p", "rec_t", "correct"], out)
    return f"{len(out)} points"


def fig_network(run, cfg, args):
    store = open_store(cfg, args)
    pairs = _selected_team_matches(store, args)
    if not pairs:
        # default to both teams of the first match of the store
        mid = store.match_ids()[0]
        pairs = [(mid, t) for t in store.matches[mid].team_ids]
    n = 0
    with run.text("fig_network.csv") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["match_id", "team_id", "kind", "source", "target", "weight", "x", "y", "centrality"])
        for mid, tid in pairs:
            evs = store.events_for(mid, tid)
            net = netmetrics.build_passing_network(evs)
            cent = netmetrics.summarize(evs).centrality
            pos = {}
            for e in evs:
                if e.player_id:
                    pos.setdefault(e.player_id, []).append(e.origin)
            for node in net.nodes:
                xy = np.mean(pos[node], axis=0)
                w.writerow([mid, tid, "node", node, "", "", _fmt(float(xy[0])), _fmt(float(xy[1])),
                            _fmt(cent.get(node, 0.0))])
                n += 1
            for (u, v), c in sorted(net.edges.items()):
                w.writerow([mid, tid, "edge", u, v, c, "", "", ""])
                n += 1
    return f"{n} network records"


def fig_team_indicators(run, cfg, args):
    net = _read_csv(_artifact(cfg, "team_network.csv"))
    rows = read_features(features_path(cfg, args))
    by_team = {}
    for r in rows:
        by_team.setdefault(r.team_id, []).append(r)
    out = []
    for t in net:
        tid = int(t["team_id"])
        prs = [r.pr_avg for r in by_team.get(tid, []) if r.pr_avg is not None]
        g = by_team[tid][0].gender if tid in by_team else ""
        out.append((tid, t["team_name"], g, t["h_avg"], t["fc_avg"], float(np.mean(prs)) if prs else None))
    out.sort(key=lambda r: (-(float(r[3]) if r[3] not in ("", None) else -np.inf), r[0]))
    with run.text("fig_team-indicators.csv") as fh:
        _write_rows(fh, ["team_id", "team_name", "gender", "h_avg", "fc_avg", "pr_avg"], out)
    return f"{len(out)} teams"


_FIG_FUNCS = {
    "events-per-match": fig_events_per_match,
    "shot-intensity": fig_shot_intensity,
    "zones": fig_zones,
    "roc": fig_roc,
    "importance": fig_importance,
    "beeswarm": fig_beeswarm,
    "force": fig_force,
    "accp-rect": fig_accp_rect,
    "network": fig_network,
    "team-indicators": fig_team_indicators,
}


def cmd_report(run: Run, args) -> int:
    figs = args.fig or list(FIGURES)
    for name in figs:
        if name not in _FIG_FUNCS:
            raise ValidationError(f"unknown figure {name!r}; choose from {', '.join(FIGURES)}")
    for name in figs:
        with run.timed(name):
            msg = _FIG_FUNCS[name](run, run.cfg, args)
        print(f"{name}: {msg}")
    return 0


def cmd_synth(run: Run, args) -> int:
    cfg = run.cfg
    if args.kind == "population":
        rows = synthetic.two_population_rows(cfg.seed)
        with run.text("features.csv") as fh:
            features.write_features_csv(rows, fh)
        print(f"{len(rows)} synthetic team-match rows")
        return 0
    gender = Gender.parse(args.gender)
    ds = synthetic.generate_event_dataset(args.matches, gender, cfg.seed, args.duration,
                                          match_id_base=args.id_base, team_id_base=args.id_base // 10,
                                          player_id_base=args.id_base * 10)
    target = run.out / f"raw_{gender.value}"
    paths = synthetic.write_event_dataset(ds, target, header=run.header)
    run.outputs.extend(str(p.relative_to(run.out)) for p in paths.values())
    print(f"{len(ds['matches'])} matches, {len(ds['events']):,} events written to {target}")
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "features": cmd_features,
    "stats": cmd_stats,
    "network": cmd_network,
    "rank": cmd_rank,
    "classify": cmd_classify,
    "explain": cmd_explain,
    "report": cmd_report,
    "synth": cmd_synth,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--seed", type=int, help="random seed (overrides config)")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument("--dataset", action="append",
                        help=f"dataset directory, optionally suffixed :male or :female (default ${DATA_ENV})")
    common.add_argument("--store", help="event store directory (default <out>/store)")
    common.add_argument("--features", help="features file (default <out>/features.csv)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="matchtech", description="Match-event analytics pipeline.")
    parser.add_argument("--version", action="version", version=f"matchtech {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="parse raw event files into a store")
    sub.add_parser("features", parents=[common], help="compute the team-match performance vectors")
    p = sub.add_parser("stats", parents=[common], help="compare the two populations")
    p.add_argument("--level", choices=("match", "team"), default="match")
    p = sub.add_parser("network", parents=[common], help="passing networks and their indicators")
    p.add_argument("--match")
    p.add_argument("--team")
    sub.add_parser("rank", parents=[common], help="player ratings and roles")
    p = sub.add_parser("classify", parents=[common], help="tune and evaluate a gender classifier")
    p.add_argument("--model", default="adaboost")
    p.add_argument("--param", action="append", help="fixed model parameter key=value (skips the grid search)")
    p.add_argument("--paired", action="store_true", help="also run the repeated full-match evaluation")
    p = sub.add_parser("explain", parents=[common], help="Shapley attributions of a trained model")
    p.add_argument("--model", default="adaboost")
    p.add_argument("--model-file")
    p.add_argument("--method", choices=("exact", "permutation"), default="exact")
    p.add_argument("--match")
    p.add_argument("--team")
    p.add_argument("--limit", type=int)
    p = sub.add_parser("report", parents=[common], help="emit plot-ready data files")
    p.add_argument("--fig", action="append", help=f"figure name ({', '.join(FIGURES)}); default all")
    p.add_argument("--model", default="adaboost")
    p.add_argument("--match")
    p.add_argument("--team")
    p = sub.add_parser("synth", parents=[common], help="write a seeded synthetic dataset")
    p.add_argument("--kind", choices=("events", "population"), default="events")
    p.add_argument("--gender", default="male")
    p.add_argument("--matches", type=int, default=4)
    p.add_argument("--duration", type=float, default=1.0)
    p.add_argument("--id-base", type=int, default=5000)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        run = Run(args.command, cfg)
        with output_lock(run.out):
            code = COMMANDS[args.command](run, args)
            run.finish()
        return code
    except MatchTechError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: missing input: {exc.filename or exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
