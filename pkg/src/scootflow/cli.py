"""Command-line front end.

Every command reads the run configuration (defaults < ``--config`` TOML <
flags), writes under ``--out``, and stamps each output with the config hash
and seed.  Exit status: 0 success, 2 invalid input or config, 1 runtime
failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from datetime import timedelta
from pathlib import Path
from typing import Sequence

import numpy as np

from scootflow import buffers, charts
from scootflow import io as sio
from scootflow.config import SYNTH_FILES, RunConfig
from scootflow.errors import DomainError, FeedError, FitError, NotFittedError
from scootflow.events import EventTable
from scootflow.geo import GeoPoint, LocalProjection, MultiPolygon, Polygon
from scootflow.ingest import (
    EventKind,
    PollerConfig,
    SnapshotLog,
    derive_trips,
    read_events_csv,
    run_poller,
    write_events_csv,
    write_snapshots,
)
from scootflow.regress import (
    ForestParams,
    compare_models,
    feature_importance,
    load_model,
    read_matrix_csv,
    save_model,
    write_matrix_csv,
)
from scootflow.spatial import PoiCategory, PoiIndex, build_spatial_matrix, build_zone_records
from scootflow.synth import SynthSpec, gen_city, gen_snapshots, gen_weather
from scootflow.temporal import (
    BAND_DUMMIES,
    DAY_DUMMIES,
    build_temporal_matrix,
    hourly_counts,
    join_weather,
)
from scootflow.timeframes import TEN_FRAMES, WHOLE_PERIOD, DayClass, TimeFrame

logger = logging.getLogger("scootflow")


# --- shared loading ---------------------------------------------------------


class Workspace:
    """Lazily loaded inputs for one invocation."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self._proj = None
        self._zones = None
        self._pois = None
        self._events = None

    @property
    def projection(self) -> LocalProjection:
        if self._proj is None:
            o = self.cfg["origin"]
            origin = GeoPoint(*o) if o is not None else sio.features_origin(self.cfg.input_path("zones"))
            self._proj = LocalProjection(origin)
        return self._proj

    @property
    def zones(self):
        if self._zones is None:
            zones = sio.read_zones(self.cfg.input_path("zones"), self.projection)
            census = sio.read_census(self.cfg.input_path("census"), zones)
            self._zones = build_zone_records(zones, census, self.poi_list, self.projection)
        return self._zones

    @property
    def poi_list(self):
        if self._pois is None:
            self._pois = sio.read_pois(self.cfg.input_path("pois"))
        return self._pois

    @property
    def poi_index(self) -> PoiIndex:
        return PoiIndex(self.poi_list, self.projection)

    @property
    def paths(self):
        return sio.read_paths(self.cfg.input_path("paths"), self.projection)

    @property
    def events(self) -> EventTable:
        if self._events is None:
            evs = read_events_csv(self.cfg.input_path("events"))
            if not evs:
                raise DomainError("events file holds no events")
            self._events = EventTable.from_events(evs, self.projection, self.cfg["tz"])
        return self._events


def _outdir(cfg: RunConfig, *parts) -> Path:
    d = cfg.out.joinpath(*parts)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_text(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


# --- commands ---------------------------------------------------------------


def cmd_synth(cfg: RunConfig, args) -> None:
    s = cfg["synth"]
    spec = SynthSpec(
        seed=cfg.seed, grid=int(s["grid"]), zone_side_m=float(s["zone_side_m"]),
        n_vehicles=int(s["n_vehicles"]), trips_per_vehicle_hour=float(s["trips_per_vehicle_hour"]),
        gps_jitter=float(s["gps_jitter"]), stop_path_bias=float(s["stop_path_bias"]),
        rotation_radius=float(cfg["derive"]["rotation_radius"]), tz=cfg["tz"],
    )
    hours = int(s["days"]) * 24
    city = gen_city(spec)
    weather, _ = gen_weather(spec, hours)
    snaps, truth = gen_snapshots(spec, city, timedelta(hours=hours), weather)
    d = _outdir(cfg, "synth")
    proj = city.projection
    sio.write_zones(d / SYNTH_FILES["zones"], city.zones, proj)
    sio.write_pois(d / SYNTH_FILES["pois"], city.pois)
    sio.write_paths(d / SYNTH_FILES["paths"], city.paths, proj)
    sio.write_census(d / SYNTH_FILES["census"], city.census)
    sio.write_weather(d / SYNTH_FILES["weather"], weather)
    write_snapshots(d / SYNTH_FILES["snapshots"], snaps)
    write_events_csv(d / "truth_events.csv", truth, cfg.provenance())
    logger.info("synth: %d zones, %d snapshots, %d true events -> %s",
                len(city.zones), len(snaps), len(truth), d)


def cmd_poll(cfg: RunConfig, args) -> None:
    p = cfg["poller"]
    if not p["endpoint_url"]:
        raise DomainError("poller.endpoint_url is not set (use --url or the config file)")
    log_path = cfg["inputs"]["snapshots"] or str(_outdir(cfg) / "snapshots.ndjson")
    pc = PollerConfig(endpoint_url=p["endpoint_url"], snapshot_log_path=log_path,
                      interval=float(p["interval"]), timeout=float(p["timeout"]))
    stats = run_poller(pc, max_ticks=args.max_ticks)
    logger.info("poll: %d ticks, %d records, %d failures, %d missed",
                stats.ticks, stats.records, stats.failures, stats.missed)


def _events_out(cfg: RunConfig) -> Path:
    p = cfg["inputs"]["events"]
    if p:
        Path(p).parent.mkdir(parents=True, exist_ok=True)
        return Path(p)
    return _outdir(cfg) / "events.csv"


def cmd_derive(cfg: RunConfig, args) -> None:
    d = cfg["derive"]
    log = SnapshotLog(cfg.input_path("snapshots"))
    pc = PollerConfig(
        endpoint_url=cfg["poller"]["endpoint_url"], snapshot_log_path=log.path,
        rotation_radius=float(d["rotation_radius"]), min_absence=int(d["min_absence"]),
        battery_filter=bool(d["battery_filter"]), battery_jump=float(d["battery_jump"]),
        battery_window_min=float(d["battery_window_min"]),
    )
    events = derive_trips(log.read(), pc)
    out = _events_out(cfg)
    write_events_csv(out, events, cfg.provenance())
    logger.info("derive: %d events -> %s", len(events), out)


def _frame_list(cfg: RunConfig) -> list[TimeFrame]:
    return [WHOLE_PERIOD, *TEN_FRAMES] if cfg["fit"]["frames"] else [WHOLE_PERIOD]


def cmd_features_spatial(cfg: RunConfig, args) -> None:
    ws = Workspace(cfg)
    d = _outdir(cfg, "features")
    for frame in _frame_list(cfg):
        m = build_spatial_matrix(ws.zones, ws.events, frame)
        write_matrix_csv(d / f"spatial_{frame.label}.csv", m, cfg.provenance(), "zone_id", "trip_density")
    logger.info("features-spatial: %d zones -> %s", len(ws.zones), d)


def _resolve_zone_filters(ws: Workspace) -> list[tuple[str, Polygon | MultiPolygon]]:
    """Configured SA2 or zone ids; ``"auto"`` picks the SA2s richest in
    offices, cafes and recreation POIs, in that order."""
    spec = ws.cfg["fit"]["zones"]
    zones = ws.zones
    by_sa2: dict[str, list] = {}
    for z in zones:
        by_sa2.setdefault(z.parent_sa2_id, []).append(z)

    def region(members):
        parts = []
        for z in members:
            parts.extend(z.polygon.parts if isinstance(z.polygon, MultiPolygon) else [z.polygon])
        return MultiPolygon(tuple(parts))

    if spec == "auto":
        index = ws.poi_index
        counts = {sid: index.counts_in(region(ms)) for sid, ms in sorted(by_sa2.items())}
        ids = []
        for cat in (PoiCategory.OFFICE, PoiCategory.CAFE, PoiCategory.RECREATION):
            best = max(sorted(counts), key=lambda sid: counts[sid][cat])
            if best not in ids:
                ids.append(best)
    else:
        ids = [spec] if isinstance(spec, str) else list(spec)
    out = []
    zone_by_id = {z.zone_id: z for z in zones}
    for zid in ids:
        if zid in by_sa2:
            out.append((zid, region(by_sa2[zid])))
        elif zid in zone_by_id:
            out.append((zid, zone_by_id[zid].polygon))
        else:
            raise DomainError(f"fit.zones: {zid!r} is neither an SA2 id nor a zone id")
    return out


def cmd_features_temporal(cfg: RunConfig, args) -> None:
    ws = Workspace(cfg)
    weather = sio.read_weather(cfg.input_path("weather"))
    ev = ws.events
    whole = hourly_counts(ev)
    if not whole:
        raise DomainError("events file holds no trip starts")
    # every area series spans the same hours as the whole-city series
    span = (min(whole), max(whole))
    d = _outdir(cfg, "features")
    targets = [("all", None)] + _resolve_zone_filters(ws)
    for name, region in targets:
        counts = whole if region is None else hourly_counts(ev, region, span)
        rows = join_weather(counts, weather, cfg["tz"])
        m = build_temporal_matrix(rows)
        write_matrix_csv(d / f"temporal_{name}.csv", m, cfg.provenance(), "hour_start", "trip_count")
    logger.info("features-temporal: %d matrices -> %s", len(targets), d)


def _matrix_files(cfg: RunConfig) -> list[Path]:
    d = cfg.out / "features"
    if not d.is_dir():
        raise DomainError(f"no feature matrices under {d}; run features-spatial/features-temporal first")
    names = [f"spatial_{f.label}.csv" for f in _frame_list(cfg)]
    files = [d / n for n in names]
    files += sorted(p for p in d.glob("temporal_*.csv"))
    missing = [str(p) for p in files if not p.exists()]
    if missing:
        raise DomainError(f"missing feature matrix file(s): {', '.join(missing)}")
    return files


def _fmt(v: float) -> str:
    return "" if v != v else f"{v:.6f}"


def cmd_fit(cfg: RunConfig, args) -> None:
    f, nn = cfg["forest"], cfg["nn"]
    params = ForestParams(int(f["n_estimators"]), int(f["min_samples_leaf"]), int(f["min_samples_split"]))
    root = _outdir(cfg, "fit")
    summary = []
    for path in _matrix_files(cfg):
        name = path.stem
        m = read_matrix_csv(path, *_id_target(name))
        try:
            res = compare_models(
                m, tuple(cfg["fit"]["models"]), cfg.seed, float(cfg["fit"]["ratio"]), params,
                {k: list(v) for k, v in nn["grid"].items()}, tuple(nn["hidden"]), float(nn["learning_rate"]),
            )
        except (DomainError, FitError) as exc:
            logger.warning("fit %s skipped: %s", name, exc)
            summary.append([name, "", "", "", "", "", "", "", "", f"skipped: {exc}"])
            continue
        d = _outdir(cfg, "fit", name)
        for tag, model in res.models.items():
            save_model(d / f"{tag}.json", model, None if tag == "NBR" else res.standardization)
        rank = {r.model_tag: i + 1 for i, r in enumerate(res.ranked)}
        for r in res.reports:
            note = f"dropped collinear: {' '.join(res.nbr_dropped)}" if r.model_tag == "NBR" and res.nbr_dropped else ""
            summary.append([name, r.model_tag, r.scale, _fmt(r.mae), _fmt(r.mse), _fmt(r.rmse),
                            _fmt(r.mape), r.n_mape_excluded, rank.get(r.model_tag, ""), note])
    with open(root / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {cfg.provenance()}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["matrix", "model", "scale", "mae", "mse", "rmse", "mape", "n_mape_excluded", "rank", "note"])
        w.writerows(summary)
    logger.info("fit: %d result rows -> %s", len(summary), root / "summary.csv")


def _id_target(name: str) -> tuple[str, str]:
    return ("zone_id", "trip_density") if name.startswith("spatial_") else ("hour_start", "trip_count")


def cmd_importance(cfg: RunConfig, args) -> None:
    fit_root = cfg.out / "fit"
    d = _outdir(cfg, "importance")
    done = 0
    for path in _matrix_files(cfg):
        name = path.stem
        model_path = fit_root / name / "RFR.json"
        if not model_path.exists():
            logger.warning("importance %s skipped: no fitted RFR at %s", name, model_path)
            continue
        forest, _ = load_model(model_path)
        m = read_matrix_csv(path, *_id_target(name))
        try:
            entries = feature_importance(forest, m)
        except NotFittedError as exc:
            logger.warning("importance %s skipped: %s", name, exc)
            continue
        with open(d / f"{name}.csv", "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# {cfg.provenance()}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["feature", "score", "pearson_r"])
            for e in entries:
                w.writerow([e.feature, f"{e.score:.6f}", f"{e.pearson_r:.6f}"])
        neutral = DAY_DUMMIES + BAND_DUMMIES if name.startswith("temporal_") else ()
        _write_text(d / f"{name}.svg", charts.importance_svg(
            entries, f"Feature importance: {name}", cfg.provenance(), neutral))
        done += 1
    logger.info("importance: %d charts -> %s", done, d)


def _frames_all() -> list[TimeFrame]:
    return [WHOLE_PERIOD, *TEN_FRAMES]


def cmd_buffer_poi(cfg: RunConfig, args) -> None:
    ws = Workspace(cfg)
    ev, index = ws.events, ws.poi_index
    radius = float(cfg["buffers"]["poi_radius"])
    rows, summaries = [], []
    for cat in cfg["buffers"]["categories"]:
        cat = PoiCategory(cat).value
        hit = buffers.presence_mask(ev.xy, index.xy(cat), radius)
        rows += buffers.presence_rows(ev, hit, cat, radius, _frames_all())
        for dc in DayClass:
            for k in (EventKind.START, EventKind.STOP):
                summaries.append(buffers.presence_summary(ev, hit, cat, dc, k))
    d = _outdir(cfg, "buffers")
    buffers.write_buffer_csv(d / "poi_presence.csv", rows, cfg.provenance())
    buffers.write_summary_csv(d / "poi_presence_summary.csv", summaries, cfg.provenance())
    cats = [c for c in dict.fromkeys(r.target for r in rows)]
    series = [f"{dc.value} {k.value}" for dc in DayClass for k in (EventKind.START, EventKind.STOP)]
    lookup = {(s.target, s.day_class, s.event_kind): s.mean_of_frames for s in summaries}
    values = [[lookup[(c, dc, k)] for dc in DayClass for k in (EventKind.START, EventKind.STOP)] for c in cats]
    _write_text(d / "poi_presence.svg", charts.grouped_bar_svg(
        cats, series, values, f"POI presence within {radius:g} m (mean of frames)", cfg.provenance()))
    logger.info("buffer-poi: %d rows -> %s", len(rows), d)


def cmd_buffer_path(cfg: RunConfig, args) -> None:
    ws = Workspace(cfg)
    ev, paths = ws.events, ws.paths
    radius = float(cfg["buffers"]["path_radius"])
    rows, bands = [], []
    for kind in cfg["buffers"]["path_kinds"]:
        dist = buffers.nearest_path_distance(ev.xy, paths, kind, cutoff=max(radius, 10.0))
        rows += buffers.presence_rows(ev, dist <= radius, kind, radius, _frames_all())
        bands += buffers.band_percentages(ev, paths, kind)
    d = _outdir(cfg, "buffers")
    buffers.write_buffer_csv(d / "path_corridor.csv", rows, cfg.provenance())
    buffers.write_band_csv(d / "path_bands.csv", bands, cfg.provenance())
    groups = [f"{r.path_kind.value} {r.event_kind.value} {r.day_class.value}"
              for r in bands if r.band.value == "on_path"]
    band_names = ["on_path", "within_5m", "band_5_to_10m"]
    values = [[r.mean_of_frames for r in bands[i:i + 4] if r.band.value in band_names]
              for i in range(0, len(bands), 4)]
    _write_text(d / "path_bands.svg", charts.grouped_bar_svg(
        groups, band_names, values, "Trip ends by distance band (mean of frames)", cfg.provenance()))
    logger.info("buffer-path: %d rows -> %s", len(rows), d)


def cmd_ttest(cfg: RunConfig, args) -> None:
    ws = Workspace(cfg)
    b = cfg["buffers"]
    ev, index, paths = ws.events, ws.poi_index, ws.paths
    tests, skipped = [], []
    targets = [(k, float(b["path_radius"])) for k in b["path_kinds"]]
    targets += [(c, float(b["poi_radius"])) for c in b["categories"]]
    for target, radius in targets:
        try:
            tests.append(buffers.compare_start_stop(ev, target, radius, b["pairing"], index, paths))
        except DomainError as exc:
            skipped.append((target, str(exc)))
    d = _outdir(cfg, "buffers")
    buffers.write_ttest_csv(d / "ttests.csv", tests, cfg.provenance(), skipped)
    logger.info("ttest: %d tests, %d skipped -> %s", len(tests), len(skipped), d)


def _read_csv(path: Path) -> list[list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(line for line in fh if not line.startswith("#")))


def _md_table(rows: list[list[str]]) -> str:
    if not rows:
        return "(none)\n"
    head, body = rows[0], rows[1:]
    out = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    out += ["| " + " | ".join(r) + " |" for r in body]
    return "\n".join(out) + "\n"


def cmd_report(cfg: RunConfig, args) -> None:
    out = cfg.out
    parts = ["# scootflow run report", "", f"`{cfg.provenance()}`", ""]
    sections = [
        ("Model comparison", out / "fit" / "summary.csv", None),
        ("Buffer t-tests (start vs stop)", out / "buffers" / "ttests.csv", None),
        ("Path distance bands", out / "buffers" / "path_bands.csv", None),
        ("POI presence summary", out / "buffers" / "poi_presence_summary.csv", None),
    ]
    imp = out / "importance"
    if imp.is_dir():
        for p in sorted(imp.glob("*.csv")):
            sections.append((f"Top features: {p.stem}", p, 8))
    found = 0
    for title, path, limit in sections:
        if not path.exists():
            continue
        rows = _read_csv(path)
        if limit:
            rows = rows[: limit + 1]
        parts += [f"## {title}", "", _md_table(rows)]
        found += 1
    if not found:
        raise DomainError(f"nothing to report under {out}; run the pipeline first")
    _write_text(out / "report.md", "\n".join(parts))
    logger.info("report -> %s", out / "report.md")


PIPELINE = ("derive", "features-spatial", "features-temporal", "fit", "importance",
            "buffer-poi", "buffer-path", "ttest", "report")


def cmd_pipeline(cfg: RunConfig, args) -> None:
    steps = PIPELINE if args.no_synth else ("synth", *PIPELINE)
    for name in steps:
        logger.info("== %s", name)
        COMMANDS[name][0](cfg, args)


COMMANDS = {
    "poll": (cmd_poll, "poll a GBFS free_bike_status feed into the snapshot log"),
    "derive": (cmd_derive, "derive trip start/stop events from the snapshot log"),
    "features-spatial": (cmd_features_spatial, "build per-zone spatial design matrices"),
    "features-temporal": (cmd_features_temporal, "build hourly temporal design matrices"),
    "fit": (cmd_fit, "fit and compare NBR, RFR and NN on every design matrix"),
    "importance": (cmd_importance, "forest feature importance with correlation signs"),
    "buffer-poi": (cmd_buffer_poi, "POI presence around trip starts and stops"),
    "buffer-path": (cmd_buffer_path, "path corridor and distance-band percentages"),
    "ttest": (cmd_ttest, "paired start-vs-stop t-tests per buffer target"),
    "synth": (cmd_synth, "generate a synthetic city, weather and snapshot log"),
    "report": (cmd_report, "collect outputs into a markdown report"),
    "pipeline": (cmd_pipeline, "run synth through report in order"),
}


# --- argument parsing -------------------------------------------------------


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument("--tz", help="IANA time zone for local time frames")
    common.add_argument("--frames", action=argparse.BooleanOptionalAction, default=None,
                        help="also build/fit the ten weekday/weekend time-frame models")
    common.add_argument("--zones", type=_csv_list, help="SA2 or zone ids for per-area temporal models, or 'auto'")
    common.add_argument("--models", type=_csv_list, help="comma list from NBR,RFR,NN")
    common.add_argument("--radius", type=float, help="buffer radius in meters for buffer-poi/buffer-path/ttest")
    common.add_argument("--pairing", choices=("day", "frame"), help="t-test pairing unit")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="scootflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        if name == "poll":
            p.add_argument("--url", help="free_bike_status endpoint")
            p.add_argument("--max-ticks", type=int, default=None, help="stop after this many polls")
        if name in ("synth", "pipeline"):
            p.add_argument("--days", type=int, help="synthetic log length in days")
            p.add_argument("--grid", type=int, help="synthetic city is grid x grid zones")
            p.add_argument("--jitter", type=float, help="GPS jitter radius in meters")
        if name == "pipeline":
            p.add_argument("--no-synth", action="store_true", help="use existing inputs instead of synth")
        else:
            p.set_defaults(no_synth=False)
    return parser


def overrides_from_args(args) -> dict:
    o: dict = {}
    if args.seed is not None:
        o["seed"] = args.seed
    if args.out is not None:
        o["out"] = args.out
    if args.tz is not None:
        o["tz"] = args.tz
    fit = {}
    if args.frames is not None:
        fit["frames"] = args.frames
    if args.zones is not None:
        fit["zones"] = "auto" if args.zones == ["auto"] else args.zones
    if args.models is not None:
        fit["models"] = args.models
    if fit:
        o["fit"] = fit
    buf = {}
    if args.radius is not None:
        key = "poi_radius" if args.command == "buffer-poi" else "path_radius"
        buf[key] = args.radius
        if args.command == "ttest":
            buf["poi_radius"] = args.radius
    if args.pairing is not None:
        buf["pairing"] = args.pairing
    if buf:
        o["buffers"] = buf
    synth = {k: getattr(args, a) for k, a in (("days", "days"), ("grid", "grid"), ("gps_jitter", "jitter"))
             if getattr(args, a, None) is not None}
    if synth:
        o["synth"] = synth
    if getattr(args, "url", None):
        o["poller"] = {"endpoint_url": args.url}
    return o


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = RunConfig.load(args.config, overrides_from_args(args))
        COMMANDS[args.command][0](cfg, args)
    except ValueError as exc:  # DomainError and SchemaError included
        print(f"scootflow {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (FitError, FeedError, NotFittedError, OSError, RuntimeError) as exc:
        print(f"scootflow {args.command}: failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
