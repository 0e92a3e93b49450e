"""Command line interface: preprocess, play, inject, score, notify, watch."""

from __future__ import annotations

import argparse
import json
import sys
import threading
from pathlib import Path

from .audio import AudioTrack
from .inject import run_inject
from .profiles import AnalysisParams, AnalysisProfile, ensure_profile
from .protocol import (DEFAULT_HOST, DEFAULT_PORT, NotificationServer,
                       send_notification, watch_file)
from .score import score_bundle
from .server import (Session, SessionConfig, SessionLog, SinkUnavailableError,
                     make_sink)


def _parse_params(spec: str | None) -> AnalysisParams:
    if not spec:
        return AnalysisParams()
    if spec.startswith("@"):
        with open(spec[1:]) as fh:
            overrides = json.load(fh)
    else:
        overrides = json.loads(spec)
    if not isinstance(overrides, dict):
        raise ValueError("--params must be a json object")
    base = AnalysisParams().snapshot()
    unknown = set(overrides) - set(base)
    if unknown:
        raise ValueError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
    base.update(overrides)
    return AnalysisParams.from_dict(base)


def _parse_endpoint(spec: str) -> tuple[str, int]:
    if ":" in spec:
        host, port = spec.rsplit(":", 1)
        return host or DEFAULT_HOST, int(port)
    return spec or DEFAULT_HOST, DEFAULT_PORT


def _load_entries(paths: list[str], genre: str | None, auto: bool,
                  params: AnalysisParams
                  ) -> list[tuple[AudioTrack, AnalysisProfile, bool]]:
    entries = []
    for path in paths:
        track = AudioTrack.load(path, genre_keyword=genre)
        profile, cached = ensure_profile(track, keyword=genre, auto=auto,
                                         params=params)
        entries.append((track, profile, cached))
    return entries


def _add_source_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("tracks", nargs="+", help="wav file paths, in play order")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--genre", help="genre keyword for every listed track")
    g.add_argument("--auto", action="store_true",
                   help="categorize each track from its own audio")
    p.add_argument("--params", help="analysis overrides: json object "
                                    "or @file.json")


def cmd_preprocess(args) -> int:
    params = _parse_params(args.params)
    for path in args.tracks:
        track = AudioTrack.load(path, genre_keyword=args.genre)
        profile, cached = ensure_profile(track, keyword=args.genre,
                                         auto=args.auto, params=params)
        graph = profile.jump_graph
        bits = [
            f"{path}:",
            "cached" if cached else "built",
            f"category={profile.category.value}",
            f"duration_s={profile.duration:.1f}",
            f"beats={0 if profile.beats is None else len(profile.beats)}",
            f"segments={0 if profile.segment_bounds is None else len(profile.segment_bounds)}",
            f"jump_candidates={0 if graph is None else graph.total_candidates()}",
            f"flags={','.join(profile.flags) if profile.flags else '-'}",
        ]
        print(" ".join(bits))
    return 0


def cmd_play(args) -> int:
    params = _parse_params(args.params)
    loaded = _load_entries(args.tracks, args.genre, args.auto, params)
    entries = [(t, p) for t, p, _ in loaded]
    sink = make_sink(args.out if args.out else args.sink)
    config = SessionConfig(realtime=args.realtime, seed=args.seed,
                           task_prompt=args.task_prompt,
                           level_override=args.level,
                           lead_s=args.lead,
                           min_spacing_s=args.min_spacing)
    log = SessionLog(args.log) if args.log else SessionLog()
    session = Session(entries, sink, log, config)
    server = None
    if args.serve is not None:
        host, port = _parse_endpoint(args.serve)
        server = NotificationServer((host, port), on_notify=session.on_notify)
        server.serve_in_thread()
        print(f"listening on {host}:{port}", file=sys.stderr)
    try:
        session.run()
    except KeyboardInterrupt:
        session.stop()
    finally:
        if server is not None:
            server.shutdown()
            server.server_close()
    c = session.counts
    print(f"done: stream_s={session.stream_t:.1f} notified={c['notified']} "
          f"edits={c['edits']} unserved={c['unserved']} "
          f"dropped={c['dropped']}")
    return 0


def cmd_inject(args) -> int:
    params = _parse_params(args.params)
    loaded = _load_entries(args.tracks, args.genre, args.auto, params)
    entries = [(t, p) for t, p, _ in loaded]
    manifest = run_inject(entries, args.out, seed=args.seed,
                          control=args.control)
    served = sum(1 for e in manifest["events"] if e["served"])
    print(f"wrote {args.out}/modified.wav, reference.wav, manifest.json")
    print(f"events={len(manifest['events'])} served={served} "
          f"control={manifest['control']}")
    return 0 if served == len(manifest["events"]) else 1


def cmd_score(args) -> int:
    result = score_bundle(args.bundle)
    for lv in (1, 2, 3):
        d = result.per_level[lv]
        print(f"level {lv}: events={d['events']} hits={d['hits']} "
              f"accuracy={d['accuracy']:.3f}")
    print(f"overall accuracy={result.overall_accuracy:.3f} "
          f"false_positives={result.false_positives} "
          f"regions={len(result.regions_s)}")
    if args.json_out:
        with open(args.json_out, "w") as fh:
            json.dump(result.to_dict(), fh, indent=2, sort_keys=True)
    return 0


def cmd_notify(args) -> int:
    host, port = _parse_endpoint(args.endpoint)
    reply = send_notification(args.level, args.source, host, port)
    print(json.dumps(reply))
    return 0 if reply.get("ok") else 1


def cmd_watch(args) -> int:
    host, port = _parse_endpoint(args.endpoint)
    stop = threading.Event()
    try:
        watch_file(args.path, host, port, stop=stop)
    except KeyboardInterrupt:
        stop.set()
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="songcue",
        description="Convey notifications by editing the music you are "
                    "already streaming.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess",
                       help="analyze tracks and cache sidecar profiles")
    _add_source_args(p)
    p.set_defaults(fn=cmd_preprocess)

    p = sub.add_parser("play", help="stream a playlist, folding in requests")
    _add_source_args(p)
    p.add_argument("--out", help="write the rendered stream to this wav file")
    p.add_argument("--sink", default="device",
                   help="capture | null | device (default: device)")
    p.add_argument("--serve", nargs="?", const=f"{DEFAULT_HOST}:{DEFAULT_PORT}",
                   help="accept notifications on HOST:PORT "
                        f"(default {DEFAULT_HOST}:{DEFAULT_PORT})")
    p.add_argument("--log", help="write the session event log here")
    p.add_argument("--level", type=int, choices=(1, 2, 3),
                   help="force every notification to this subtlety level")
    p.add_argument("--task-prompt", help="log a task prompt for this session")
    p.add_argument("--realtime", action="store_true",
                   help="pace emission to the wall clock")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lead", type=float, default=1.0,
                   help="seconds of stream kept clean ahead of the playhead")
    p.add_argument("--min-spacing", type=float, default=10.0,
                   help="minimum seconds between applied edits")
    p.set_defaults(fn=cmd_play)

    p = sub.add_parser("inject",
                       help="render a seeded notification schedule offline")
    _add_source_args(p)
    p.add_argument("--out", required=True, help="output bundle directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--control", action="store_true",
                   help="render plain tones instead of musical edits")
    p.set_defaults(fn=cmd_inject)

    p = sub.add_parser("score",
                       help="detect edits in an inject bundle and score them")
    p.add_argument("bundle", help="directory written by inject")
    p.add_argument("--json-out", help="also write the result as json")
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("notify", help="send one notification to a session")
    p.add_argument("--level", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--source", default="cli")
    p.add_argument("--endpoint", default=f"{DEFAULT_HOST}:{DEFAULT_PORT}")
    p.set_defaults(fn=cmd_notify)

    p = sub.add_parser("watch",
                       help="tail a file; lines 'LEVEL [SOURCE]' become "
                            "notifications")
    p.add_argument("path")
    p.add_argument("--endpoint", default=f"{DEFAULT_HOST}:{DEFAULT_PORT}")
    p.set_defaults(fn=cmd_watch)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except SinkUnavailableError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (OSError, ValueError, ConnectionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
