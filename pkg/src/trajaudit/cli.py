"""Batch entry points wiring the modules into the detection-to-audit pipeline.

Exit codes: 0 success, 2 usage, 3 missing input file, 4 schema/validation
error, 5 other toolkit error. The last stderr line on failure is machine
parsable: ``ERROR <code>: <message>``.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import config as config_mod
from .errors import (
    InvalidSpecError,
    ReviewValidationError,
    SchemaError,
    StoreError,
    TrajauditError,
)
from .evaluation import match_frames
from .miner import event_from_record, hotspot, mine
from .records import (
    FORMAT_VERSION,
    header_record,
    load_detections,
    load_ground_truth,
    load_tracks,
    save_detections,
    save_ground_truth,
    save_tracks,
    write_jsonl,
)
from .refinement import correction_records, refine
from .scenario import generate_scenario, load_scenario
from .stabilizer import dims_summary_record, stabilize, stabilized_point_extras
from .tracker import track as run_tracker

EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_SCHEMA = 4
EXIT_OTHER = 5


def _fail(code: int, name: str, message: str):
    print(f"ERROR {name}: {message}", file=sys.stderr)
    raise SystemExit(code)


def _load_cfg(args) -> config_mod.ConfigMap:
    cfg = config_mod.load_config(getattr(args, "config", None))
    return config_mod.apply_overrides(cfg, getattr(args, "set", None))


def _manifest_for(out_path: str, args, subcommand: str, inputs: dict, outputs: dict, resolved: dict):
    config_mod.write_manifest(
        Path(out_path).with_suffix(Path(out_path).suffix + ".manifest.json"),
        subcommand,
        inputs,
        outputs,
        resolved,
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_gen(args) -> int:
    spec = load_scenario(args.spec)
    stream, gt = generate_scenario(spec, seed=args.seed)
    save_detections(stream, args.out)
    if args.gt:
        save_ground_truth(gt, args.gt)
    resolved = {"spec": str(args.spec), "seed": spec.seed if args.seed is None else args.seed}
    _manifest_for(args.out, args, "gen", {"spec": args.spec}, {"detections": args.out, "gt": args.gt or ""}, resolved)
    print(f"gen: {stream.n_detections()} detections over {len(stream.frame_ids)} frames, {len(gt)} agents")
    return 0


def cmd_track(args) -> int:
    cfg_map = _load_cfg(args)
    stream, issues = load_detections(args.infile, dt=args.dt, strict=not args.lenient)
    tcfg = config_mod.tracker_config(cfg_map, dt=stream.dt)
    tracks = run_tracker(stream, tcfg)
    save_tracks(tracks, args.out, dt=tcfg.dt, kind="tracks")
    resolved = asdict(tcfg)
    _manifest_for(args.out, args, "track", {"detections": args.infile}, {"tracks": args.out}, resolved)
    if issues:
        print(f"track: skipped {len(issues)} malformed line(s)", file=sys.stderr)
    print(f"track: {len(tracks)} track(s) from {stream.n_detections()} detections")
    return 0


def cmd_refine(args) -> int:
    cfg_map = _load_cfg(args)
    rcfg = config_mod.refinement_config(cfg_map)
    tracks, header = load_tracks(args.infile)
    dt = float(header.get("dt", args.dt))
    branch = args.branch.upper()
    refined = [refine(t, branch, rcfg) for t in tracks]
    save_tracks(
        [r.track for r in refined],
        args.out,
        dt=dt,
        kind="refined_tracks",
        branch=branch,
        per_point_extra=lambda tr, i, p: {"branch": branch},
    )
    if args.corrections:
        rows = [header_record("corrections", dt=dt, branch=branch)]
        for r in refined:
            rows.extend(correction_records(r))
        write_jsonl(args.corrections, rows)
    resolved = asdict(rcfg)
    resolved["branch"] = branch
    _manifest_for(
        args.out, args, "refine",
        {"tracks": args.infile},
        {"refined": args.out, "corrections": args.corrections or ""},
        resolved,
    )
    n_corr = sum(len(r.corrections) for r in refined)
    print(f"refine: branch {branch}, {len(refined)} track(s), {n_corr} correction record(s)")
    return 0


def cmd_stabilize(args) -> int:
    cfg_map = _load_cfg(args)
    tracks, header = load_tracks(args.infile)
    dt = float(header.get("dt", args.dt))
    scfg = config_mod.stabilizer_config(cfg_map, dt=dt)
    stabilized = [stabilize(t, scfg) for t in tracks]
    by_id = {s.track.track_id: s for s in stabilized}
    save_tracks(
        [s.to_track() for s in stabilized],
        args.out,
        dt=dt,
        kind="stabilized_tracks",
        per_point_extra=lambda tr, i, p: stabilized_point_extras(by_id[tr.track_id], i),
        tail_records=[dims_summary_record(s) for s in stabilized],
    )
    resolved = asdict(scfg)
    _manifest_for(args.out, args, "stabilize", {"tracks": args.infile}, {"stabilized": args.out}, resolved)
    print(f"stabilize: {len(stabilized)} track(s)")
    return 0


def cmd_mine(args) -> int:
    cfg_map = _load_cfg(args)
    mcfg = config_mod.screening_config(cfg_map)
    tracks, header = load_tracks(args.infile)
    dt = float(header.get("dt", args.dt))
    branch = header.get("branch", "B0")
    events, summary = mine(tracks, mcfg, dt=dt, branch=branch)

    rows = [header_record("events", dt=dt, branch=branch)]
    rows.extend(ev.to_record() for ev in events)
    write_jsonl(args.out, rows)

    if args.summary:
        body = {"format_version": FORMAT_VERSION, **summary.to_dict(), "config": asdict(mcfg) | {"allowed_class_pairs": None}}
        Path(args.summary).parent.mkdir(parents=True, exist_ok=True)
        with open(args.summary, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(body, fh, ensure_ascii=False, indent=1, sort_keys=True)
            fh.write("\n")

    if args.hotspot:
        grid = hotspot(events, cell_size=args.cell_size)
        Path(args.hotspot).parent.mkdir(parents=True, exist_ok=True)
        with open(args.hotspot, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("cell_x,cell_y,count\n")
            for cx, cy, count in grid.to_rows():
                fh.write(f"{cx},{cy},{count}\n")

    if args.series:
        from .metrics import pair_metrics
        from .miner import screen_pairs

        srows = [header_record("metric_series", dt=dt, branch=branch)]
        for a, b in screen_pairs(tracks, mcfg, dt=dt):
            series = pair_metrics(a, b, dt=dt, buffer=mcfg.buffer)
            for rec in series.to_records():
                srows.append({"track_a": a.track_id, "track_b": b.track_id, **rec})
        write_jsonl(args.series, srows)

    resolved = asdict(mcfg) | {"allowed_class_pairs": None, "cell_size": args.cell_size}
    _manifest_for(
        args.out, args, "mine",
        {"refined": args.infile},
        {"events": args.out, "summary": args.summary or "", "hotspot": args.hotspot or ""},
        resolved,
    )
    print(
        f"mine: {summary.n_tracks} tracks -> {summary.n_movement_valid} movement-valid "
        f"-> {summary.n_candidate_pairs} pairs -> {summary.n_events} event(s)"
    )
    return 0


def cmd_eval(args) -> int:
    preds, header = load_tracks(args.pred)
    gts = load_ground_truth(args.gt)
    dt = float(header.get("dt", args.dt))
    report = match_frames(
        preds,
        gts,
        radius=args.radius,
        strict_class=args.strict_class,
        dt=dt,
        collect_per_frame=bool(args.per_frame),
    )
    body = {"format_version": FORMAT_VERSION, **report.to_dict()}
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(body, fh, ensure_ascii=False, indent=1, sort_keys=True)
        fh.write("\n")
    if args.per_frame:
        with open(args.per_frame, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("frame,tp,fp,fn\n")
            for row in report.per_frame:
                fh.write(f"{row['frame']},{row['tp']},{row['fp']},{row['fn']}\n")
    resolved = {"radius": args.radius, "strict_class": args.strict_class, "dt": dt}
    _manifest_for(args.out, args, "eval", {"pred": args.pred, "gt": args.gt}, {"report": args.out}, resolved)
    print(f"eval: f1={report.f1:.4f} precision={report.precision:.4f} recall={report.recall:.4f}")
    return 0


def cmd_qa_export(args) -> int:
    from .qa.store import QaStore

    events_rows = []
    header = {}
    for lineno, line in _iter_jsonl_checked(args.events):
        obj = json.loads(line)
        if "format_version" in obj and "event_id" not in obj:
            from .records import check_header

            header = check_header(obj, "events", lineno)
            continue
        events_rows.append(event_from_record(obj))
    tracks, _ = load_tracks(args.tracks)
    store = QaStore(args.store)
    stamp = args.stamp
    if stamp is None and os.environ.get("SOURCE_DATE_EPOCH"):
        from datetime import datetime, timezone

        stamp = datetime.fromtimestamp(
            int(os.environ["SOURCE_DATE_EPOCH"]), tz=timezone.utc
        ).isoformat(timespec="seconds")
    items = store.export_queue(
        events_rows,
        tracks,
        round_id=args.round,
        margin=args.margin,
        stamp=stamp,
        config_snapshot={"branch": header.get("branch", ""), "dt": header.get("dt")},
    )
    print(f"qa-export: round {args.round}: {len(items)} new item(s)")
    return 0


def _iter_jsonl_checked(path: str):
    from .records import iter_jsonl

    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(str(p))
    return iter_jsonl(p)


def cmd_serve(args) -> int:
    import uvicorn

    from .qa.store import QaStore
    from .service import create_app

    store_path = args.store or os.environ.get("STORE_PATH")
    if not store_path:
        _fail(EXIT_USAGE, "usage", "either --store or STORE_PATH is required")
    addr = args.addr or os.environ.get("SERVICE_ADDR", "127.0.0.1:8787")
    host, _, port = addr.partition(":")
    store = QaStore(store_path, read_only=args.read_only, create=False)
    app = create_app(store, assets_dir=args.assets)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8787), log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trajaudit",
        description="Trajectory auditing pipeline: generate, track, refine, "
        "stabilize, mine near-misses, evaluate, and run the QA review loop.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI config file")
        p.add_argument(
            "--set",
            action="append",
            metavar="SECTION.KEY=VALUE",
            help="override a config value (repeatable)",
        )
        p.add_argument("--dt", type=float, default=0.1, help="frame period in seconds")

    p = sub.add_parser("gen", help="generate a synthetic scenario")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--gt")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("track", help="run the tracker over detections")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lenient", action="store_true", help="skip malformed lines")
    common(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("refine", help="apply a refinement branch")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--branch", required=True, choices=["b0", "b1", "b2", "B0", "B1", "B2"])
    p.add_argument("--out", required=True)
    p.add_argument("--corrections", help="corrections sidecar JSONL")
    common(p)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("stabilize", help="dynamics-aware stabilization branch")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_stabilize)

    p = sub.add_parser("mine", help="screen pairs and extract near-miss events")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--summary")
    p.add_argument("--hotspot")
    p.add_argument("--series", help="full per-pair metric series JSONL")
    p.add_argument("--cell-size", type=float, default=1.0)
    common(p)
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("eval", help="evaluate tracks against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--per-frame", help="optional per-frame CSV")
    p.add_argument("--radius", type=float, default=1.5)
    p.add_argument("--strict-class", action="store_true")
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("qa-export", help="export pending events as a review round")
    p.add_argument("--events", required=True)
    p.add_argument("--tracks", required=True)
    p.add_argument("--round", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--margin", type=int, default=20)
    p.add_argument("--stamp", help="fixed created_at for reproducible exports")
    p.set_defaults(func=cmd_qa_export)

    p = sub.add_parser("serve", help="serve the QA review API (and dashboard)")
    p.add_argument("--store")
    p.add_argument("--addr", help="host:port (default 127.0.0.1:8787)")
    p.add_argument("--assets", help="static dashboard asset directory")
    p.add_argument("--read-only", action="store_true")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        _fail(EXIT_MISSING_FILE, "missing_file", str(exc))
    except (SchemaError, InvalidSpecError, ReviewValidationError) as exc:
        _fail(EXIT_SCHEMA, "schema", str(exc))
    except StoreError as exc:
        _fail(EXIT_OTHER, "store", str(exc))
    except TrajauditError as exc:
        _fail(EXIT_OTHER, "error", str(exc))
    return 0


if __name__ == "__main__":
    sys.exit(main())
